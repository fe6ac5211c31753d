//! Finite residuated binars as operation tables, and everything needed to
//! check one independently of how it was found.
//!
//! Tables are indexed in written-expression order: `lres[x][z]` holds `x \ z`
//! and `rres[z][y]` holds `z / y`. The lattice order is never stored; it is
//! derived from `meet` and cross-checked against `join`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{Identity, Term};

/// The five fundamental operations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Meet,
    Join,
    Mult,
    Lres,
    Rres,
}

impl Op {
    pub const ALL: [Op; 5] = [Op::Meet, Op::Join, Op::Mult, Op::Lres, Op::Rres];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Op::Meet => "meet",
            Op::Join => "join",
            Op::Mult => "mult",
            Op::Lres => "lres",
            Op::Rres => "rres",
        }
    }

    /// ASCII surface syntax used by the term parser.
    pub fn symbol(self) -> &'static str {
        match self {
            Op::Meet => "^",
            Op::Join => "v",
            Op::Mult => "*",
            Op::Lres => "\\",
            Op::Rres => "/",
        }
    }

    pub fn from_name(name: &str) -> Option<Op> {
        Op::ALL.into_iter().find(|op| op.name() == name)
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlgebraError {
    #[error("carrier must be nonempty")]
    EmptyCarrier,
    #[error("table {op} has wrong shape (expected {size}x{size})")]
    BadShape { op: Op, size: usize },
    #[error("table {op} entry [{row}][{col}] = {value} is outside 0..{size}")]
    OutOfRange { op: Op, row: usize, col: usize, value: usize, size: usize },
    #[error("meet and join disagree on the order at ({0}, {1})")]
    OrderInconsistent(usize, usize),
    #[error("multiplication is not residuated: {side} residual undefined at ({x}, {z})")]
    NotResiduated { x: usize, z: usize, side: Side },
    #[error("unbound variable {0}")]
    UnboundVariable(String),
    #[error("variable {name} bound to {value}, outside carrier of size {size}")]
    ValueOutOfRange { name: String, value: usize, size: usize },
    #[error("size mismatch: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("malformed model file: {0}")]
    Format(String),
}

/// Which residual a [`AlgebraError::NotResiduated`] refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

/// A square operation table stored row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Table {
    size: usize,
    cells: Vec<usize>,
}

impl Table {
    pub fn from_fn(size: usize, mut f: impl FnMut(usize, usize) -> usize) -> Table {
        let mut cells = Vec::with_capacity(size * size);
        for row in 0..size {
            for col in 0..size {
                cells.push(f(row, col));
            }
        }
        Table { size, cells }
    }

    pub fn constant(size: usize, value: usize) -> Table {
        Table { size, cells: vec![value; size * size] }
    }

    pub fn from_rows(rows: &[Vec<usize>]) -> Table {
        let size = rows.len();
        Table { size, cells: rows.iter().flatten().copied().collect() }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> usize {
        self.cells[row * self.size + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: usize) {
        self.cells[row * self.size + col] = value;
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn rows(&self) -> Vec<Vec<usize>> {
        self.cells.chunks(self.size.max(1)).map(<[usize]>::to_vec).collect()
    }

    fn check(&self, op: Op, size: usize) -> Result<(), AlgebraError> {
        if self.size != size || self.cells.len() != size * size {
            return Err(AlgebraError::BadShape { op, size });
        }
        for (i, &value) in self.cells.iter().enumerate() {
            if value >= size {
                return Err(AlgebraError::OutOfRange { op, row: i / size, col: i % size, value, size });
            }
        }
        Ok(())
    }
}

/// A finite algebra of signature `(^, v, *, \, /)` on the carrier `{0..n-1}`.
///
/// Construction only guarantees totality. Whether the tables form a
/// residuated binar is answered by [`check_lattice`] and [`check_residuation`].
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FiniteBinar {
    size: usize,
    tables: [Table; 5],
}

impl FiniteBinar {
    pub fn new(tables: [Table; 5]) -> Result<FiniteBinar, AlgebraError> {
        let size = tables[0].size();
        if size == 0 {
            return Err(AlgebraError::EmptyCarrier);
        }
        for op in Op::ALL {
            tables[op.index()].check(op, size)?;
        }
        Ok(FiniteBinar { size, tables })
    }

    /// Builds from nested rows in the order meet, join, mult, lres, rres.
    pub fn from_rows(
        meet: &[Vec<usize>],
        join: &[Vec<usize>],
        mult: &[Vec<usize>],
        lres: &[Vec<usize>],
        rres: &[Vec<usize>],
    ) -> Result<FiniteBinar, AlgebraError> {
        FiniteBinar::new([
            Table::from_rows(meet),
            Table::from_rows(join),
            Table::from_rows(mult),
            Table::from_rows(lres),
            Table::from_rows(rres),
        ])
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn apply(&self, op: Op, a: usize, b: usize) -> usize {
        self.tables[op.index()].get(a, b)
    }

    pub fn table(&self, op: Op) -> &Table {
        &self.tables[op.index()]
    }

    pub fn tables(&self) -> &[Table; 5] {
        &self.tables
    }

    /// `x <= y` read off the meet table.
    #[inline]
    pub fn leq(&self, x: usize, y: usize) -> bool {
        self.apply(Op::Meet, x, y) == x
    }

    /// Applies the relabeling `perm` (old element `i` becomes `perm[i]`).
    pub fn relabel(&self, perm: &[usize]) -> FiniteBinar {
        let n = self.size;
        let mut inverse = vec![0; n];
        for (old, &new) in perm.iter().enumerate() {
            inverse[new] = old;
        }
        let tables = Op::ALL.map(|op| {
            Table::from_fn(n, |a, b| perm[self.apply(op, inverse[a], inverse[b])])
        });
        FiniteBinar { size: n, tables }
    }

    pub fn to_json(&self) -> ModelFile {
        ModelFile {
            size: self.size,
            ops: OpsFile {
                meet: self.tables[0].rows(),
                join: self.tables[1].rows(),
                mult: self.tables[2].rows(),
                lres: self.tables[3].rows(),
                rres: self.tables[4].rows(),
            },
        }
    }

    pub fn from_json_str(text: &str) -> Result<FiniteBinar, AlgebraError> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| AlgebraError::Format(e.to_string()))?;
        FiniteBinar::try_from(file)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&self.to_json()).expect("model serializes")
    }
}

/// On-disk model layout: `{"size": n, "ops": {"meet": [[..]], ...}}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelFile {
    pub size: usize,
    pub ops: OpsFile,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpsFile {
    pub meet: Vec<Vec<usize>>,
    pub join: Vec<Vec<usize>>,
    pub mult: Vec<Vec<usize>>,
    pub lres: Vec<Vec<usize>>,
    pub rres: Vec<Vec<usize>>,
}

impl TryFrom<ModelFile> for FiniteBinar {
    type Error = AlgebraError;

    fn try_from(file: ModelFile) -> Result<Self, Self::Error> {
        let ops = file.ops;
        let tables = [ops.meet, ops.join, ops.mult, ops.lres, ops.rres];
        for (op, rows) in Op::ALL.into_iter().zip(&tables) {
            if rows.len() != file.size || rows.iter().any(|r| r.len() != file.size) {
                return Err(AlgebraError::BadShape { op, size: file.size });
            }
        }
        let [a, b, c, d, e] = tables;
        FiniteBinar::from_rows(&a, &b, &c, &d, &e)
    }
}

impl Serialize for FiniteBinar {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for FiniteBinar {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let file = ModelFile::deserialize(deserializer)?;
        FiniteBinar::try_from(file).map_err(serde::de::Error::custom)
    }
}

/// The partial order of a lattice as a boolean matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrderRelation {
    size: usize,
    leq: Vec<bool>,
}

impl OrderRelation {
    /// Derives `x <= y :<=> meet(x, y) = x` and cross-checks it against
    /// `join(x, y) = y` and the partial-order laws.
    pub fn from_meet_join(meet: &Table, join: &Table) -> Result<OrderRelation, AlgebraError> {
        let n = meet.size();
        let mut leq = vec![false; n * n];
        for x in 0..n {
            for y in 0..n {
                let by_meet = meet.get(x, y) == x;
                if by_meet != (join.get(x, y) == y) {
                    return Err(AlgebraError::OrderInconsistent(x, y));
                }
                leq[x * n + y] = by_meet;
            }
        }
        let order = OrderRelation { size: n, leq };
        order.check_partial_order()?;
        Ok(order)
    }

    /// Builds an order from an explicit matrix, checking the partial-order laws.
    pub fn from_matrix(size: usize, leq: Vec<bool>) -> Result<OrderRelation, AlgebraError> {
        assert_eq!(leq.len(), size * size);
        let order = OrderRelation { size, leq };
        order.check_partial_order()?;
        Ok(order)
    }

    fn check_partial_order(&self) -> Result<(), AlgebraError> {
        let n = self.size;
        for x in 0..n {
            if !self.leq(x, x) {
                return Err(AlgebraError::OrderInconsistent(x, x));
            }
            for y in 0..n {
                if x != y && self.leq(x, y) && self.leq(y, x) {
                    return Err(AlgebraError::OrderInconsistent(x, y));
                }
                for z in 0..n {
                    if self.leq(x, y) && self.leq(y, z) && !self.leq(x, z) {
                        return Err(AlgebraError::OrderInconsistent(x, z));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn leq(&self, x: usize, y: usize) -> bool {
        self.leq[x * self.size + y]
    }

    pub fn lt(&self, x: usize, y: usize) -> bool {
        x != y && self.leq(x, y)
    }

    pub fn matrix(&self) -> Vec<Vec<bool>> {
        self.leq.chunks(self.size.max(1)).map(<[bool]>::to_vec).collect()
    }

    /// Least upper bound of `elems` (the empty join is the bottom), if it exists.
    pub fn join_of(&self, elems: &[usize]) -> Option<usize> {
        let uppers: Vec<usize> = (0..self.size)
            .filter(|&u| elems.iter().all(|&e| self.leq(e, u)))
            .collect();
        uppers.iter().copied().find(|&u| uppers.iter().all(|&v| self.leq(u, v)))
    }

    /// Greatest lower bound of `elems` (the empty meet is the top), if it exists.
    pub fn meet_of(&self, elems: &[usize]) -> Option<usize> {
        let lowers: Vec<usize> = (0..self.size)
            .filter(|&l| elems.iter().all(|&e| self.leq(l, e)))
            .collect();
        lowers.iter().copied().find(|&l| lowers.iter().all(|&v| self.leq(v, l)))
    }

    /// Number of elements below and above `x` (including `x`).
    pub fn degree(&self, x: usize) -> (usize, usize) {
        let below = (0..self.size).filter(|&y| self.leq(y, x)).count();
        let above = (0..self.size).filter(|&y| self.leq(x, y)).count();
        (below, above)
    }
}

pub fn derive_order(b: &FiniteBinar) -> Result<OrderRelation, AlgebraError> {
    OrderRelation::from_meet_join(b.table(Op::Meet), b.table(Op::Join))
}

/// One failed instance of an axiom. For equations `lhs`/`rhs` are the two
/// evaluated sides; for residuation they are truth values (0/1) of the two
/// conditions compared.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub axiom: String,
    pub assignment: Vec<(String, usize)>,
    pub lhs: usize,
    pub rhs: usize,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} fails at ", self.axiom)?;
        let parts: Vec<String> = self.assignment.iter().map(|(v, e)| format!("{v}={e}")).collect();
        write!(f, "{{{}}}: {} vs {}", parts.join(", "), self.lhs, self.rhs)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub violations: Vec<Violation>,
}

impl VerificationReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn merge(&mut self, other: VerificationReport) {
        self.violations.extend(other.violations);
    }

    pub fn has_violation(&self, axiom: &str, assignment: &[usize]) -> bool {
        self.violations.iter().any(|v| {
            v.axiom == axiom && v.assignment.iter().map(|(_, e)| *e).eq(assignment.iter().copied())
        })
    }
}

/// Evaluates `term` bottom-up by table lookup.
pub fn eval_term(
    term: &Term,
    env: &BTreeMap<String, usize>,
    b: &FiniteBinar,
) -> Result<usize, AlgebraError> {
    match term {
        Term::Var(name) => {
            let value = *env.get(name).ok_or_else(|| AlgebraError::UnboundVariable(name.clone()))?;
            if value >= b.size() {
                return Err(AlgebraError::ValueOutOfRange { name: name.clone(), value, size: b.size() });
            }
            Ok(value)
        }
        Term::App(op, l, r) => Ok(b.apply(*op, eval_term(l, env, b)?, eval_term(r, env, b)?)),
    }
}

// Faster evaluation with variables resolved to slots up front.
enum Compiled {
    Slot(usize),
    App(Op, Box<Compiled>, Box<Compiled>),
}

impl Compiled {
    fn new(term: &Term, vars: &[String]) -> Compiled {
        match term {
            Term::Var(name) => Compiled::Slot(vars.iter().position(|v| v == name).expect("var collected")),
            Term::App(op, l, r) => {
                Compiled::App(*op, Box::new(Compiled::new(l, vars)), Box::new(Compiled::new(r, vars)))
            }
        }
    }

    fn eval(&self, values: &[usize], b: &FiniteBinar) -> usize {
        match self {
            Compiled::Slot(i) => values[*i],
            Compiled::App(op, l, r) => b.apply(*op, l.eval(values, b), r.eval(values, b)),
        }
    }
}

/// Calls `f` on every tuple in `{0..n-1}^arity` in lexicographic order
/// until it returns `false`.
pub fn for_each_tuple(n: usize, arity: usize, mut f: impl FnMut(&[usize]) -> bool) {
    let mut tuple = vec![0; arity];
    loop {
        if !f(&tuple) {
            return;
        }
        let mut i = arity;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            tuple[i] += 1;
            if tuple[i] < n {
                break;
            }
            tuple[i] = 0;
        }
    }
}

/// Outcome of [`check_identity`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum IdentityCheck {
    Holds,
    Counter(Violation),
}

impl IdentityCheck {
    pub fn holds(&self) -> bool {
        matches!(self, IdentityCheck::Holds)
    }
}

/// Evaluates both sides over all assignments of the identity's variables
/// (sorted by name) and returns the lexicographically first violation.
pub fn check_identity(b: &FiniteBinar, id: &Identity) -> IdentityCheck {
    match identity_violations(b, id, true).into_iter().next() {
        Some(v) => IdentityCheck::Counter(v),
        None => IdentityCheck::Holds,
    }
}

fn identity_violations(b: &FiniteBinar, id: &Identity, first_only: bool) -> Vec<Violation> {
    let vars = id.vars();
    let lhs = Compiled::new(&id.lhs, &vars);
    let rhs = Compiled::new(&id.rhs, &vars);
    let mut out = Vec::new();
    for_each_tuple(b.size(), vars.len(), |tuple| {
        let (l, r) = (lhs.eval(tuple, b), rhs.eval(tuple, b));
        if l != r {
            out.push(Violation {
                axiom: id.name.clone(),
                assignment: vars.iter().cloned().zip(tuple.iter().copied()).collect(),
                lhs: l,
                rhs: r,
            });
            return !first_only;
        }
        true
    });
    out
}

/// Commutativity, associativity, idempotence and absorption for meet and join.
pub fn check_lattice(b: &FiniteBinar) -> VerificationReport {
    let mut report = VerificationReport::default();
    for id in crate::dsl::lattice_axioms() {
        report.violations.extend(identity_violations(b, &id, false));
    }
    report
}

/// Checks `x*y <= z  <=>  y <= x\z  <=>  x <= z/y` for every triple, with the
/// order derived from meet. Lists every failing triple; the axiom name says
/// which equivalence failed.
pub fn check_residuation(b: &FiniteBinar) -> VerificationReport {
    let n = b.size();
    let mut report = VerificationReport::default();
    for_each_tuple(n, 3, |t| {
        let (x, y, z) = (t[0], t[1], t[2]);
        let by_mult = b.leq(b.apply(Op::Mult, x, y), z);
        let by_lres = b.leq(y, b.apply(Op::Lres, x, z));
        let by_rres = b.leq(x, b.apply(Op::Rres, z, y));
        let assignment = || vec![("x".to_string(), x), ("y".to_string(), y), ("z".to_string(), z)];
        if by_mult != by_lres {
            report.violations.push(Violation {
                axiom: "RES(mult,lres)".into(),
                assignment: assignment(),
                lhs: by_mult as usize,
                rhs: by_lres as usize,
            });
        }
        if by_mult != by_rres {
            report.violations.push(Violation {
                axiom: "RES(mult,rres)".into(),
                assignment: assignment(),
                lhs: by_mult as usize,
                rhs: by_rres as usize,
            });
        }
        true
    });
    report
}

/// Full verification against a task: lattice laws, residuation, every
/// assumed identity, and failure of the refuted one.
pub fn verify(b: &FiniteBinar, assume: &[Identity], refute: Option<&Identity>) -> VerificationReport {
    let mut report = check_lattice(b);
    if !report.pass() {
        return report;
    }
    report.merge(check_residuation(b));
    for id in assume {
        if let IdentityCheck::Counter(v) = check_identity(b, id) {
            report.violations.push(v);
        }
    }
    if let Some(id) = refute {
        if check_identity(b, id).holds() {
            report.violations.push(Violation {
                axiom: format!("refute {}", id.name),
                assignment: Vec::new(),
                lhs: 0,
                rhs: 0,
            });
        }
    }
    report
}

/// Computes the residuals of `mult` with respect to `order`:
/// `x\z = max {y : x*y <= z}` and `z/y = max {x : x*y <= z}`.
///
/// Fails when a set is not a principal down-set, i.e. when `mult` is not
/// residuated.
pub fn derive_residuals(order: &OrderRelation, mult: &Table) -> Result<(Table, Table), AlgebraError> {
    let n = order.size();
    let mut lres = Table::constant(n, 0);
    let mut rres = Table::constant(n, 0);
    let mut set = Vec::with_capacity(n);
    for x in 0..n {
        for z in 0..n {
            set.clear();
            set.extend((0..n).filter(|&y| order.leq(mult.get(x, y), z)));
            let top = principal_generator(order, &set)
                .ok_or(AlgebraError::NotResiduated { x, z, side: Side::Left })?;
            lres.set(x, z, top);
        }
    }
    for z in 0..n {
        for y in 0..n {
            set.clear();
            set.extend((0..n).filter(|&x| order.leq(mult.get(x, y), z)));
            let top = principal_generator(order, &set)
                .ok_or(AlgebraError::NotResiduated { x: z, z: y, side: Side::Right })?;
            rres.set(z, y, top);
        }
    }
    Ok((lres, rres))
}

// `set` (sorted) must equal the down-set of its own join.
fn principal_generator(order: &OrderRelation, set: &[usize]) -> Option<usize> {
    if set.is_empty() {
        return None;
    }
    let top = order.join_of(set)?;
    let down = (0..order.size()).filter(|&y| order.leq(y, top));
    if down.eq(set.iter().copied()) {
        Some(top)
    } else {
        None
    }
}

/// Edges `(x, y)` with `x < y` and nothing strictly between, sorted.
pub fn covering_relation(order: &OrderRelation) -> Vec<(usize, usize)> {
    let n = order.size();
    let mut edges = Vec::new();
    for x in 0..n {
        for y in 0..n {
            if order.lt(x, y) && !(0..n).any(|z| order.lt(x, z) && order.lt(z, y)) {
                edges.push((x, y));
            }
        }
    }
    edges
}

/// Searches for a bijection `p` with `p(a.op(x, y)) = b.op(p(x), p(y))` for
/// every operation. Returns `p` as a vector indexed by elements of `a`.
pub fn are_isomorphic(a: &FiniteBinar, b: &FiniteBinar) -> Result<Option<Vec<usize>>, AlgebraError> {
    if a.size() != b.size() {
        return Err(AlgebraError::SizeMismatch(a.size(), b.size()));
    }
    Ok(find_isomorphism(a.tables(), b.tables()))
}

/// Isomorphism search over an arbitrary family of tables. The first table
/// must be a meet (or any table whose `t[x][y] == x` is an order-like
/// invariant); degrees with respect to it prune candidate images.
pub fn find_isomorphism(a: &[Table], b: &[Table]) -> Option<Vec<usize>> {
    assert_eq!(a.len(), b.len());
    let n = a[0].size();
    if n != b[0].size() {
        return None;
    }
    let signature = |tables: &[Table], x: usize| {
        let meet = &tables[0];
        let below = (0..n).filter(|&y| meet.get(y, x) == y).count();
        let above = (0..n).filter(|&y| meet.get(x, y) == x).count();
        let idempotent: Vec<bool> = tables.iter().map(|t| t.get(x, x) == x).collect();
        (below, above, idempotent)
    };
    let sig_a: Vec<_> = (0..n).map(|x| signature(a, x)).collect();
    let sig_b: Vec<_> = (0..n).map(|x| signature(b, x)).collect();
    {
        let mut sa = sig_a.clone();
        let mut sb = sig_b.clone();
        sa.sort();
        sb.sort();
        if sa != sb {
            return None;
        }
    }
    let candidates: Vec<Vec<usize>> =
        (0..n).map(|x| (0..n).filter(|&y| sig_a[x] == sig_b[y]).collect()).collect();

    struct Search<'a> {
        a: &'a [Table],
        b: &'a [Table],
        n: usize,
        candidates: Vec<Vec<usize>>,
        map: Vec<Option<usize>>,
        used: Vec<bool>,
    }

    impl Search<'_> {
        fn consistent(&self, x: usize) -> bool {
            let px = self.map[x].expect("assigned");
            for y in 0..=x {
                let py = self.map[y].expect("assigned");
                for (ta, tb) in self.a.iter().zip(self.b) {
                    for (u, v, pu, pv) in [(x, y, px, py), (y, x, py, px)] {
                        let r = ta.get(u, v);
                        if let Some(pr) = self.map[r] {
                            if pr != tb.get(pu, pv) {
                                return false;
                            }
                        }
                    }
                }
            }
            // images of earlier products that land on x must now agree
            for u in 0..=x {
                for v in 0..=x {
                    let (pu, pv) = (self.map[u].unwrap(), self.map[v].unwrap());
                    for (ta, tb) in self.a.iter().zip(self.b) {
                        if ta.get(u, v) == x && tb.get(pu, pv) != px {
                            return false;
                        }
                    }
                }
            }
            true
        }

        fn run(&mut self, x: usize) -> bool {
            if x == self.n {
                return true;
            }
            for i in 0..self.candidates[x].len() {
                let y = self.candidates[x][i];
                if self.used[y] {
                    continue;
                }
                self.map[x] = Some(y);
                self.used[y] = true;
                if self.consistent(x) && self.run(x + 1) {
                    return true;
                }
                self.used[y] = false;
                self.map[x] = None;
            }
            false
        }
    }

    let mut search = Search { a, b, n, candidates, map: vec![None; n], used: vec![false; n] };
    if search.run(0) {
        Some(search.map.into_iter().map(|p| p.expect("complete")).collect())
    } else {
        None
    }
}

/// Order-preservation of `mult` in both arguments, a consequence of
/// residuation. Returns the first offending `(x, x', y)` if any.
pub fn mult_monotonicity_failure(b: &FiniteBinar) -> Option<(usize, usize, usize)> {
    let n = b.size();
    for x in 0..n {
        for x2 in 0..n {
            if !b.leq(x, x2) {
                continue;
            }
            for y in 0..n {
                if !b.leq(b.apply(Op::Mult, x, y), b.apply(Op::Mult, x2, y))
                    || !b.leq(b.apply(Op::Mult, y, x), b.apply(Op::Mult, y, x2))
                {
                    return Some((x, x2, y));
                }
            }
        }
    }
    None
}

/// Groups models into isomorphism classes, keeping the first of each.
pub fn dedup_isomorphic(models: impl IntoIterator<Item = FiniteBinar>) -> Vec<FiniteBinar> {
    let mut buckets: HashMap<Vec<(usize, usize)>, Vec<FiniteBinar>> = HashMap::new();
    let mut order = Vec::new();
    for m in models {
        let mut key: Vec<(usize, usize)> = match derive_order(&m) {
            Ok(o) => (0..m.size()).map(|x| o.degree(x)).collect(),
            Err(_) => Vec::new(),
        };
        key.sort();
        let bucket = buckets.entry(key.clone()).or_default();
        if bucket.iter().all(|rep| find_isomorphism(rep.tables(), m.tables()).is_none()) {
            bucket.push(m);
            order.push((key, bucket.len() - 1));
        }
    }
    order.into_iter().map(|(k, i)| buckets[&k][i].clone()).collect()
}

/// Handy constructions used across tests, the oracle and the demo.
pub mod examples {
    use super::*;

    /// Lattice tables for a chain `0 < 1 < ... < n-1`.
    pub fn chain_lattice(n: usize) -> (Table, Table) {
        (Table::from_fn(n, usize::min), Table::from_fn(n, usize::max))
    }

    /// `M3`: bottom 0, atoms 1, 2, 3, top 4.
    pub fn m3_lattice() -> (Table, Table) {
        lattice_from_order(5, |x, y| x == y || x == 0 || y == 4)
    }

    /// `N5`: `0 < 1 < 2 < 4` and `0 < 3 < 4`.
    pub fn n5_lattice() -> (Table, Table) {
        lattice_from_order(5, |x, y| {
            x == y || x == 0 || y == 4 || (x == 1 && y == 2)
        })
    }

    /// Meet/join tables of a lattice given by its order predicate.
    pub fn lattice_from_order(n: usize, leq: impl Fn(usize, usize) -> bool) -> (Table, Table) {
        let matrix: Vec<bool> = (0..n * n).map(|i| leq(i / n, i % n)).collect();
        let order = OrderRelation::from_matrix(n, matrix).expect("partial order");
        let meet = Table::from_fn(n, |x, y| order.meet_of(&[x, y]).expect("meet exists"));
        let join = Table::from_fn(n, |x, y| order.join_of(&[x, y]).expect("join exists"));
        (meet, join)
    }

    /// Completes a lattice and a multiplication with derived residuals.
    pub fn with_mult(meet: Table, join: Table, mult: Table) -> Result<FiniteBinar, AlgebraError> {
        let order = OrderRelation::from_meet_join(&meet, &join)?;
        let (lres, rres) = derive_residuals(&order, &mult)?;
        FiniteBinar::new([meet, join, mult, lres, rres])
    }

    /// Chain of length `n` with `mult = meet`, a residuated binar (in fact a
    /// Heyting algebra).
    pub fn chain_meet(n: usize) -> FiniteBinar {
        let (meet, join) = chain_lattice(n);
        with_mult(meet.clone(), join, meet).expect("chain with meet is residuated")
    }

    /// `M3` with `x * y = top` for nonzero `x, y` and bottom otherwise. This
    /// preserves joins in each argument, so the residuals exist.
    pub fn m3_model() -> FiniteBinar {
        let (meet, join) = m3_lattice();
        let mult = Table::from_fn(5, |x, y| if x != 0 && y != 0 { 4 } else { 0 });
        with_mult(meet, join, mult).expect("M3 model is residuated")
    }
}

#[cfg(test)]
mod tests {
    use super::examples::*;
    use super::*;
    use crate::dsl::{builtin_identity, parse_term, Law};

    fn two_chain(mult: Table, lres: Table, rres: Table) -> FiniteBinar {
        let (meet, join) = chain_lattice(2);
        FiniteBinar::new([meet, join, mult, lres, rres]).unwrap()
    }

    #[test]
    fn order_of_two_chain() {
        let b = chain_meet(2);
        assert_eq!(derive_order(&b).unwrap().matrix(), vec![vec![true, true], vec![false, true]]);
    }

    #[test]
    fn order_inconsistent_when_join_is_min() {
        let (meet, _) = chain_lattice(2);
        let b = FiniteBinar::new([meet.clone(), meet.clone(), meet.clone(), meet.clone(), meet]).unwrap();
        assert_eq!(derive_order(&b), Err(AlgebraError::OrderInconsistent(0, 1)));
    }

    #[test]
    fn order_of_m3() {
        let b = m3_model();
        let order = derive_order(&b).unwrap();
        for x in 0..5 {
            assert!(order.leq(0, x));
            assert!(order.leq(x, 4));
        }
        for a in 1..4 {
            for c in 1..4 {
                assert_eq!(order.leq(a, c), a == c);
            }
        }
    }

    #[test]
    fn lattice_checks() {
        assert!(check_lattice(&chain_meet(2)).pass());
        let (meet, _) = chain_lattice(2);
        let bad = FiniteBinar::new([
            meet.clone(),
            Table::constant(2, 0),
            meet.clone(),
            meet.clone(),
            meet,
        ])
        .unwrap();
        let report = check_lattice(&bad);
        assert!(!report.pass());
        let absorption = report
            .violations
            .iter()
            .find(|v| v.axiom == "absorb-join")
            .expect("absorption violated");
        assert_eq!(absorption.assignment, vec![("x".to_string(), 1), ("y".to_string(), 0)]);
        assert_eq!((absorption.lhs, absorption.rhs), (0, 1));
    }

    #[test]
    fn residuation_checks() {
        let good = two_chain(
            Table::from_fn(2, usize::min),
            Table::from_rows(&[vec![1, 1], vec![0, 1]]),
            Table::from_rows(&[vec![1, 0], vec![1, 1]]),
        );
        assert!(check_residuation(&good).pass());

        for lres in [Table::constant(2, 0), Table::constant(2, 1), Table::from_fn(2, usize::max)] {
            let bad = two_chain(Table::from_fn(2, usize::max), lres, Table::constant(2, 1));
            let report = check_residuation(&bad);
            assert!(!report.pass());
            assert!(report.has_violation("RES(mult,lres)", &[1, 0, 0]));
        }

        let trivial = FiniteBinar::new(Op::ALL.map(|_| Table::constant(1, 0))).unwrap();
        assert!(check_residuation(&trivial).pass());
    }

    #[test]
    fn eval_examples() {
        let m3 = m3_model();
        let env: BTreeMap<String, usize> =
            [("x", 1), ("y", 2), ("z", 3)].into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        assert_eq!(eval_term(&parse_term("x ^ (y v z)").unwrap(), &env, &m3), Ok(1));
        let env0: BTreeMap<String, usize> = [("x".to_string(), 0)].into();
        assert_eq!(eval_term(&parse_term("x").unwrap(), &env0, &m3), Ok(0));
        let chain = chain_meet(2);
        let env2: BTreeMap<String, usize> = [("x".to_string(), 1), ("y".to_string(), 0)].into();
        assert_eq!(eval_term(&parse_term("x * y").unwrap(), &env2, &chain), Ok(0));
        assert_eq!(
            eval_term(&parse_term("x * w").unwrap(), &env2, &chain),
            Err(AlgebraError::UnboundVariable("w".into()))
        );
    }

    #[test]
    fn identity_examples() {
        let ld = builtin_identity(Law::LD);
        assert!(check_identity(&chain_meet(2), &ld).holds());
        match check_identity(&m3_model(), &ld) {
            IdentityCheck::Counter(v) => {
                assert_eq!(v.assignment.iter().map(|p| p.1).collect::<Vec<_>>(), vec![1, 2, 3]);
                assert_eq!((v.lhs, v.rhs), (1, 0));
            }
            IdentityCheck::Holds => panic!("M3 is not distributive"),
        }
        assert!(check_identity(&chain_meet(2), &builtin_identity(Law::D1)).holds());
    }

    #[test]
    fn residual_derivation() {
        let (meet, join) = chain_lattice(2);
        let order = OrderRelation::from_meet_join(&meet, &join).unwrap();
        let (l, r) = derive_residuals(&order, &Table::from_fn(2, usize::min)).unwrap();
        assert_eq!(l.rows(), vec![vec![1, 1], vec![0, 1]]);
        assert_eq!(r.rows(), vec![vec![1, 0], vec![1, 1]]);
        assert_eq!(
            derive_residuals(&order, &Table::from_fn(2, usize::max)),
            Err(AlgebraError::NotResiduated { x: 1, z: 0, side: Side::Left })
        );
        for n in 1..5 {
            let (meet, join) = chain_lattice(n);
            let order = OrderRelation::from_meet_join(&meet, &join).unwrap();
            let (l, r) = derive_residuals(&order, &Table::constant(n, 0)).unwrap();
            assert_eq!(l, Table::constant(n, n - 1));
            assert_eq!(r, Table::constant(n, n - 1));
        }
    }

    #[test]
    fn non_monotone_mult_is_not_residuated() {
        // on 0<1<2, {y : 2*y <= 0} = {1, 2} is not a down-set
        let (meet, join) = chain_lattice(3);
        let mult = Table::from_fn(3, |x, y| if (x, y) == (2, 0) { 2 } else { 0 });
        assert!(with_mult(meet, join, mult).is_err());
    }

    #[test]
    fn isomorphism_examples() {
        let m3 = m3_model();
        let swapped = m3.relabel(&[4, 2, 1, 3, 0]);
        assert_ne!(m3, swapped);
        let p = are_isomorphic(&m3, &swapped).unwrap().expect("relabeling is an isomorphism");
        assert_eq!(m3.relabel(&p), swapped);

        let chain = chain_meet(2);
        let (meet, join) = chain_lattice(2);
        let zero = with_mult(meet, join, Table::constant(2, 0)).unwrap();
        assert_eq!(are_isomorphic(&chain, &zero).unwrap(), None);
        assert_eq!(are_isomorphic(&m3, &m3).unwrap(), Some(vec![0, 1, 2, 3, 4]));
        assert_eq!(are_isomorphic(&m3, &chain), Err(AlgebraError::SizeMismatch(5, 2)));
    }

    #[test]
    fn covering_examples() {
        let order = |b: &FiniteBinar| derive_order(b).unwrap();
        assert_eq!(covering_relation(&order(&chain_meet(2))), vec![(0, 1)]);
        assert_eq!(
            covering_relation(&order(&m3_model())),
            vec![(0, 1), (0, 2), (0, 3), (1, 4), (2, 4), (3, 4)]
        );
        assert_eq!(covering_relation(&order(&chain_meet(4))), vec![(0, 1), (1, 2), (2, 3)]);
    }

    #[test]
    fn model_json_round_trip() {
        let m = m3_model();
        let text = m.to_json_string();
        assert!(text.starts_with(r#"{"size":5,"ops":{"meet":[[0,0,0,0,0],"#));
        assert_eq!(FiniteBinar::from_json_str(&text).unwrap(), m);
        assert!(matches!(
            FiniteBinar::from_json_str(r#"{"size":2,"ops":{"meet":[[0]],"join":[],"mult":[],"lres":[],"rres":[]}}"#),
            Err(AlgebraError::BadShape { .. })
        ));
        assert!(matches!(
            FiniteBinar::from_json_str(
                r#"{"size":1,"ops":{"meet":[[0]],"join":[[0]],"mult":[[3]],"lres":[[0]],"rres":[[0]]}}"#
            ),
            Err(AlgebraError::OutOfRange { op: Op::Mult, .. })
        ));
    }

    #[test]
    fn m3_model_verifies() {
        let m = m3_model();
        assert!(check_lattice(&m).pass());
        assert!(check_residuation(&m).pass());
        assert_eq!(mult_monotonicity_failure(&m), None);
    }
}
