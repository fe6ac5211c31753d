//! Compilation of a search task into CNF.
//!
//! Every operation table is represented one-hot: variable `op[row][col]=val`
//! for each cell and value, with exactly-one constraints per cell. Identities
//! are instantiated over all variable tuples; nested subterms get auxiliary
//! one-hot value vectors, shared between all occurrences of the same ground
//! subterm. The order `x <= y` is not a separate relation: it is the literal
//! `meet[x][y]=x`.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{for_each_tuple, FiniteBinar, Op, Table};
use crate::dsl::{lattice_axioms, Identity, Law, Term};

/// Largest carrier the encoder accepts.
pub const MAX_SIZE: usize = 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodeError {
    #[error("size {0} exceeds the encoding ceiling of {MAX_SIZE}")]
    SizeOverflow(usize),
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("ill-formed assignment: cell {op}[{row}][{col}] has {count} true values")]
    IllFormedAssignment { op: Op, row: usize, col: usize, count: usize },
}

/// Find an algebra of `size` elements satisfying `assume` (on top of the
/// lattice and residuation axioms) and violating `refute`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SearchTask {
    pub size: usize,
    pub assume: BTreeSet<Law>,
    pub refute: Option<Law>,
}

impl SearchTask {
    pub fn new(
        size: usize,
        assume: impl IntoIterator<Item = Law>,
        refute: Option<Law>,
    ) -> Result<SearchTask, EncodeError> {
        let task = SearchTask { size, assume: assume.into_iter().collect(), refute };
        task.validate()?;
        Ok(task)
    }

    pub fn validate(&self) -> Result<(), EncodeError> {
        if self.size == 0 {
            return Err(EncodeError::InvalidTask("size must be at least 1".into()));
        }
        if let Some(t) = self.refute {
            if self.assume.contains(&t) {
                return Err(EncodeError::InvalidTask(format!("{t} is both assumed and refuted")));
            }
        }
        Ok(())
    }

    /// Whether lattice distributivity is assumed.
    pub fn distributive(&self) -> bool {
        self.assume.contains(&Law::LD)
    }

    pub fn assumed_identities(&self) -> Vec<Identity> {
        self.assume.iter().map(|l| l.identity()).collect()
    }

    pub fn refuted_identity(&self) -> Option<Identity> {
        self.refute.map(Law::identity)
    }

    /// Full verification of a candidate model against this task.
    pub fn verify(&self, model: &FiniteBinar) -> crate::algebra::VerificationReport {
        let mut report = crate::algebra::verify(model, &self.assumed_identities(), self.refuted_identity().as_ref());
        if model.size() != self.size {
            report.violations.push(crate::algebra::Violation {
                axiom: format!("size {} != {}", model.size(), self.size),
                assignment: Vec::new(),
                lhs: model.size(),
                rhs: self.size,
            });
        }
        report
    }
}

impl fmt::Display for SearchTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let assume: Vec<&str> = self.assume.iter().map(|l| l.name()).collect();
        write!(f, "n={} assume={{{}}} refute={}", self.size, assume.join(","), match self.refute {
            Some(l) => l.name(),
            None => "-",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncodeOptions {
    /// Pin bottom/top and force the numeric labeling to extend the order.
    pub symmetry: bool,
    /// Add `meet[x][y]=x <=> join[x][y]=y`, implied by absorption but
    /// useful for propagation.
    pub redundant: bool,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        EncodeOptions { symmetry: true, redundant: true }
    }
}

/// A labeled block of auxiliary variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuxBlock {
    pub label: String,
    pub first: u32,
    pub count: u32,
}

/// Maps `(op, row, col, value)` to base variables and records the
/// auxiliary blocks allocated after them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarMap {
    pub size: usize,
    pub aux: Vec<AuxBlock>,
}

impl VarMap {
    pub fn new(size: usize) -> VarMap {
        VarMap { size, aux: Vec::new() }
    }

    pub fn base_count(&self) -> u32 {
        (5 * self.size * self.size * self.size) as u32
    }

    #[inline]
    pub fn var(&self, op: Op, row: usize, col: usize, value: usize) -> i32 {
        let n = self.size;
        (1 + ((op.index() * n + row) * n + col) * n + value) as i32
    }

    /// Inverse of [`VarMap::var`] on base variables.
    pub fn lookup(&self, var: i32) -> Option<(Op, usize, usize, usize)> {
        let n = self.size;
        if var < 1 || var as u32 > self.base_count() {
            return None;
        }
        let mut i = var as usize - 1;
        let value = i % n;
        i /= n;
        let col = i % n;
        i /= n;
        let row = i % n;
        Some((Op::ALL[i / n], row, col, value))
    }
}

/// A clause set over variables `1..=num_vars`. Clauses are stored flat,
/// each terminated by `0` as in DIMACS.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CnfInstance {
    num_vars: u32,
    lits: Vec<i32>,
    clause_count: usize,
    pub varmap: Option<VarMap>,
}

impl CnfInstance {
    pub fn new(num_vars: u32) -> CnfInstance {
        CnfInstance { num_vars, ..CnfInstance::default() }
    }

    pub fn from_clauses(num_vars: u32, clauses: &[Vec<i32>]) -> CnfInstance {
        let mut cnf = CnfInstance::new(num_vars);
        for c in clauses {
            cnf.add_clause(c);
        }
        cnf
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.clause_count
    }

    pub fn new_var(&mut self) -> i32 {
        self.num_vars += 1;
        self.num_vars as i32
    }

    /// Adds a clause. Panics on an empty clause or an out-of-range literal.
    pub fn add_clause(&mut self, clause: &[i32]) {
        assert!(!clause.is_empty(), "empty clause");
        for &l in clause {
            assert!(l != 0 && l.unsigned_abs() <= self.num_vars, "literal {l} out of range");
        }
        self.lits.extend_from_slice(clause);
        self.lits.push(0);
        self.clause_count += 1;
    }

    pub fn clauses(&self) -> impl Iterator<Item = &[i32]> + '_ {
        self.lits.split(|&l| l == 0).take(self.clause_count)
    }

    pub fn literal_count(&self) -> usize {
        self.lits.len() - self.clause_count
    }

    /// Whether `assignment` (indexed by `var - 1`) satisfies every clause.
    pub fn satisfied_by(&self, assignment: &[bool]) -> bool {
        self.clauses().all(|c| {
            c.iter().any(|&l| {
                let value = assignment.get(l.unsigned_abs() as usize - 1).copied().unwrap_or(false);
                value == (l > 0)
            })
        })
    }
}

/// DIMACS text. With a varmap, `c map` comment lines come first: one per
/// cell (`c map <op> <row> <col> <first-var>`, value `v` is `first-var + v`)
/// and one per auxiliary block (`c map aux <label> <first> <count>`).
pub fn write_dimacs(cnf: &CnfInstance) -> Vec<u8> {
    let mut out = Vec::with_capacity(cnf.lits.len() * 5 + 64);
    write_dimacs_to(cnf, &mut out).expect("writing to a Vec cannot fail");
    out
}

pub fn write_dimacs_to(cnf: &CnfInstance, out: &mut impl Write) -> std::io::Result<()> {
    if let Some(map) = &cnf.varmap {
        let n = map.size;
        writeln!(out, "c residuated binar search, size {n}")?;
        for op in Op::ALL {
            for row in 0..n {
                for col in 0..n {
                    writeln!(out, "c map {op} {row} {col} {}", map.var(op, row, col, 0))?;
                }
            }
        }
        for block in &map.aux {
            writeln!(out, "c map aux {} {} {}", block.label, block.first, block.count)?;
        }
    }
    writeln!(out, "p cnf {} {}", cnf.num_vars, cnf.clause_count)?;
    let mut line = String::new();
    for clause in cnf.clauses() {
        line.clear();
        for l in clause {
            line.push_str(&l.to_string());
            line.push(' ');
        }
        line.push_str("0\n");
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// Static symmetry reduction: element `0` is the bottom, `n-1` the top,
/// and `x <= y` implies `x <= y` numerically. `leq(x, y)` yields the literal
/// standing for the order.
pub fn symmetry_clauses(n: usize, leq: impl Fn(usize, usize) -> i32) -> Vec<Vec<i32>> {
    let mut out = Vec::new();
    if n < 2 {
        return out;
    }
    for y in 0..n {
        out.push(vec![leq(0, y)]);
        out.push(vec![leq(y, n - 1)]);
    }
    for x in 0..n {
        for y in 0..x {
            out.push(vec![-leq(x, y)]);
        }
    }
    out
}

// Ground term: a term with every variable replaced by an element.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Ground {
    Elem(usize),
    App(Op, Box<Ground>, Box<Ground>),
}

impl Ground {
    fn instantiate(term: &Term, vars: &[String], tuple: &[usize]) -> Ground {
        match term {
            Term::Var(v) => Ground::Elem(tuple[vars.iter().position(|w| w == v).expect("bound")]),
            Term::App(op, l, r) => Ground::App(
                *op,
                Box::new(Ground::instantiate(l, vars, tuple)),
                Box::new(Ground::instantiate(r, vars, tuple)),
            ),
        }
    }
}

// Value of a ground term: a known element or a one-hot literal vector.
#[derive(Clone, Debug)]
enum Val {
    Const(usize),
    Lits(Vec<i32>),
}

struct Encoder {
    n: usize,
    map: VarMap,
    cnf: CnfInstance,
    cache: HashMap<Ground, Val>,
    aux_label: String,
    aux_first: u32,
}

impl Encoder {
    fn new(n: usize) -> Encoder {
        let map = VarMap::new(n);
        let cnf = CnfInstance::new(map.base_count());
        Encoder { n, map, cnf, cache: HashMap::new(), aux_label: String::new(), aux_first: 0 }
    }

    fn base(&self, op: Op, row: usize, col: usize, value: usize) -> i32 {
        self.map.var(op, row, col, value)
    }

    fn leq(&self, x: usize, y: usize) -> i32 {
        self.base(Op::Meet, x, y, x)
    }

    fn begin_aux(&mut self, label: &str) {
        self.aux_label = label.to_string();
        self.aux_first = self.cnf.num_vars() + 1;
    }

    fn end_aux(&mut self) {
        let next = self.cnf.num_vars() + 1;
        if next > self.aux_first {
            self.map.aux.push(AuxBlock {
                label: std::mem::take(&mut self.aux_label),
                first: self.aux_first,
                count: next - self.aux_first,
            });
        }
    }

    fn exactly_one(&mut self, lits: &[i32]) {
        self.cnf.add_clause(lits);
        for i in 0..lits.len() {
            for j in i + 1..lits.len() {
                self.cnf.add_clause(&[-lits[i], -lits[j]]);
            }
        }
    }

    fn one_hot_cells(&mut self) {
        let n = self.n;
        for op in Op::ALL {
            for row in 0..n {
                for col in 0..n {
                    let lits: Vec<i32> = (0..n).map(|v| self.base(op, row, col, v)).collect();
                    self.exactly_one(&lits);
                }
            }
        }
    }

    fn fresh_vector(&mut self) -> Vec<i32> {
        let lits: Vec<i32> = (0..self.n).map(|_| self.cnf.new_var()).collect();
        self.exactly_one(&lits);
        lits
    }

    fn value(&mut self, g: &Ground) -> Val {
        if let Some(v) = self.cache.get(g) {
            return v.clone();
        }
        let val = match g {
            Ground::Elem(e) => Val::Const(*e),
            Ground::App(op, l, r) => {
                let op = *op;
                let n = self.n;
                match (self.value(l), self.value(r)) {
                    (Val::Const(i), Val::Const(j)) => {
                        Val::Lits((0..n).map(|w| self.base(op, i, j, w)).collect())
                    }
                    (Val::Const(i), Val::Lits(b)) => {
                        let t = self.fresh_vector();
                        for u in 0..n {
                            for w in 0..n {
                                self.cnf.add_clause(&[-b[u], -self.base(op, i, u, w), t[w]]);
                            }
                        }
                        Val::Lits(t)
                    }
                    (Val::Lits(a), Val::Const(j)) => {
                        let t = self.fresh_vector();
                        for u in 0..n {
                            for w in 0..n {
                                self.cnf.add_clause(&[-a[u], -self.base(op, u, j, w), t[w]]);
                            }
                        }
                        Val::Lits(t)
                    }
                    (Val::Lits(a), Val::Lits(_)) => {
                        // op(A, B) = op(u, B) where A = u; each op(u, B) is a
                        // shared ground subterm with a constant left argument
                        let rows: Vec<Vec<i32>> = (0..n)
                            .map(|u| {
                                match self.value(&Ground::App(op, Box::new(Ground::Elem(u)), r.clone())) {
                                    Val::Lits(c) => c,
                                    Val::Const(_) => unreachable!("right argument is not constant"),
                                }
                            })
                            .collect();
                        let t = self.fresh_vector();
                        for u in 0..n {
                            for w in 0..n {
                                self.cnf.add_clause(&[-a[u], -rows[u][w], t[w]]);
                            }
                        }
                        Val::Lits(t)
                    }
                }
            }
        };
        self.cache.insert(g.clone(), val.clone());
        val
    }

    fn assert_equal(&mut self, l: &Val, r: &Val) {
        match (l, r) {
            (Val::Const(a), Val::Const(b)) => {
                if a != b {
                    let f = self.cnf.new_var();
                    self.cnf.add_clause(&[f]);
                    self.cnf.add_clause(&[-f]);
                }
            }
            (Val::Const(a), Val::Lits(v)) | (Val::Lits(v), Val::Const(a)) => {
                self.cnf.add_clause(&[v[*a]]);
            }
            (Val::Lits(a), Val::Lits(b)) => {
                for w in 0..self.n {
                    if a[w] != b[w] {
                        self.cnf.add_clause(&[-a[w], b[w]]);
                        self.cnf.add_clause(&[a[w], -b[w]]);
                    }
                }
            }
        }
    }

    fn assume_identity(&mut self, id: &Identity) {
        let vars = id.vars();
        self.begin_aux(&format!("assume-{}", id.name));
        let n = self.n;
        let mut tuples = Vec::new();
        for_each_tuple(n, vars.len(), |t| {
            tuples.push(t.to_vec());
            true
        });
        for t in tuples {
            let l = self.value(&Ground::instantiate(&id.lhs, &vars, &t));
            let r = self.value(&Ground::instantiate(&id.rhs, &vars, &t));
            self.assert_equal(&l, &r);
        }
        self.end_aux();
    }

    fn refute_identity(&mut self, id: &Identity) {
        let vars = id.vars();
        self.begin_aux(&format!("refute-{}", id.name));
        let mut tuples = Vec::new();
        for_each_tuple(self.n, vars.len(), |t| {
            tuples.push(t.to_vec());
            true
        });
        let mut selectors = Vec::with_capacity(tuples.len());
        for t in tuples {
            let l = self.value(&Ground::instantiate(&id.lhs, &vars, &t));
            let r = self.value(&Ground::instantiate(&id.rhs, &vars, &t));
            let w = self.cnf.new_var();
            selectors.push(w);
            match (&l, &r) {
                (Val::Const(a), Val::Const(b)) => {
                    if a == b {
                        self.cnf.add_clause(&[-w]);
                    }
                }
                (Val::Const(a), Val::Lits(v)) | (Val::Lits(v), Val::Const(a)) => {
                    self.cnf.add_clause(&[-w, -v[*a]]);
                }
                (Val::Lits(a), Val::Lits(b)) => {
                    for k in 0..self.n {
                        if a[k] == b[k] {
                            self.cnf.add_clause(&[-w, -a[k]]);
                        } else {
                            self.cnf.add_clause(&[-w, -a[k], -b[k]]);
                        }
                    }
                }
            }
        }
        self.cnf.add_clause(&selectors);
        self.end_aux();
    }

    // x*y <= z  <=>  y <= x\z  <=>  x <= z/y, all three tied to one
    // auxiliary variable per triple.
    fn residuation(&mut self) {
        let n = self.n;
        self.begin_aux("res");
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    let p = self.cnf.new_var();
                    for v in 0..n {
                        let cases = [
                            (self.base(Op::Mult, x, y, v), v, z),
                            (self.base(Op::Lres, x, z, v), y, v),
                            (self.base(Op::Rres, z, y, v), x, v),
                        ];
                        for (cell, lo, hi) in cases {
                            if lo == hi {
                                self.cnf.add_clause(&[-cell, p]);
                            } else {
                                let le = self.leq(lo, hi);
                                self.cnf.add_clause(&[-cell, -le, p]);
                                self.cnf.add_clause(&[-cell, le, -p]);
                            }
                        }
                    }
                }
            }
        }
        self.end_aux();
    }

    fn redundant_order(&mut self) {
        let n = self.n;
        for x in 0..n {
            for y in 0..n {
                let by_meet = self.leq(x, y);
                let by_join = self.base(Op::Join, x, y, y);
                if by_meet != by_join {
                    self.cnf.add_clause(&[-by_meet, by_join]);
                    self.cnf.add_clause(&[by_meet, -by_join]);
                }
            }
        }
    }
}

/// Compiles `task` to CNF.
pub fn encode_search(task: &SearchTask, opts: EncodeOptions) -> Result<CnfInstance, EncodeError> {
    task.validate()?;
    encode_identities(task.size, &task.assumed_identities(), task.refuted_identity().as_ref(), opts)
}

/// Like [`encode_search`] but for arbitrary identities.
pub fn encode_identities(
    n: usize,
    assume: &[Identity],
    refute: Option<&Identity>,
    opts: EncodeOptions,
) -> Result<CnfInstance, EncodeError> {
    if n == 0 {
        return Err(EncodeError::InvalidTask("size must be at least 1".into()));
    }
    if n > MAX_SIZE {
        return Err(EncodeError::SizeOverflow(n));
    }
    let mut enc = Encoder::new(n);
    enc.one_hot_cells();
    if opts.symmetry {
        let map = enc.map.clone();
        for c in symmetry_clauses(n, |x, y| map.var(Op::Meet, x, y, x)) {
            enc.cnf.add_clause(&c);
        }
    }
    if opts.redundant {
        enc.redundant_order();
    }
    for id in lattice_axioms() {
        enc.assume_identity(&id);
    }
    enc.residuation();
    for id in assume {
        enc.assume_identity(id);
    }
    if let Some(id) = refute {
        enc.refute_identity(id);
    }
    let mut cnf = enc.cnf;
    cnf.varmap = Some(enc.map);
    Ok(cnf)
}

/// Reads the unique true value of every cell. `assignment[i]` is the value
/// of variable `i + 1`.
pub fn decode_model(assignment: &[bool], map: &VarMap) -> Result<FiniteBinar, EncodeError> {
    let n = map.size;
    let tables = Op::ALL.map(|op| {
        let mut table = Table::constant(n, 0);
        let mut bad = None;
        for row in 0..n {
            for col in 0..n {
                let trues: Vec<usize> = (0..n)
                    .filter(|&v| assignment.get(map.var(op, row, col, v) as usize - 1).copied().unwrap_or(false))
                    .collect();
                if trues.len() == 1 {
                    table.set(row, col, trues[0]);
                } else if bad.is_none() {
                    bad = Some(EncodeError::IllFormedAssignment { op, row, col, count: trues.len() });
                }
            }
        }
        bad.map_or(Ok(table), Err)
    });
    let mut out = Vec::with_capacity(5);
    for t in tables {
        out.push(t?);
    }
    let tables: [Table; 5] = out.try_into().expect("five tables");
    Ok(FiniteBinar::new(tables).expect("decoded values are in range"))
}

/// The one-hot assignment describing `model` on the base variables.
pub fn model_assignment(model: &FiniteBinar, map: &VarMap, num_vars: u32) -> Vec<bool> {
    let mut a = vec![false; num_vars as usize];
    let n = model.size();
    for op in Op::ALL {
        for row in 0..n {
            for col in 0..n {
                a[map.var(op, row, col, model.apply(op, row, col)) as usize - 1] = true;
            }
        }
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::examples::chain_meet;

    #[test]
    fn base_variable_count() {
        let task = SearchTask::new(2, [], None).unwrap();
        let cnf = encode_search(&task, EncodeOptions::default()).unwrap();
        assert_eq!(cnf.varmap.as_ref().unwrap().base_count(), 40);
        assert!(cnf.num_vars() >= 40);
    }

    #[test]
    fn invalid_tasks() {
        assert!(SearchTask::new(0, [], None).is_err());
        assert!(SearchTask::new(3, [Law::D1], Some(Law::D1)).is_err());
        let big = SearchTask::new(33, [], None).unwrap();
        assert_eq!(encode_search(&big, EncodeOptions::default()), Err(EncodeError::SizeOverflow(33)));
    }

    #[test]
    fn varmap_lookup_inverts_var() {
        let map = VarMap::new(3);
        for op in Op::ALL {
            for r in 0..3 {
                for c in 0..3 {
                    for v in 0..3 {
                        assert_eq!(map.lookup(map.var(op, r, c, v)), Some((op, r, c, v)));
                    }
                }
            }
        }
        assert_eq!(map.lookup(0), None);
        assert_eq!(map.lookup(136), None);
    }

    #[test]
    fn dimacs_format() {
        let cnf = CnfInstance::from_clauses(2, &[vec![1, 2], vec![-1]]);
        assert_eq!(write_dimacs(&cnf), b"p cnf 2 2\n1 2 0\n-1 0\n");
        assert_eq!(write_dimacs(&CnfInstance::new(5)), b"p cnf 5 0\n");
    }

    #[test]
    fn dimacs_header_counts_emitted_clauses() {
        let task = SearchTask::new(2, [], None).unwrap();
        let cnf = encode_search(&task, EncodeOptions::default()).unwrap();
        let text = String::from_utf8(write_dimacs(&cnf)).unwrap();
        let header = text.lines().find(|l| l.starts_with("p cnf")).unwrap();
        let body = text.lines().filter(|l| !l.starts_with('c') && !l.starts_with('p')).count();
        assert_eq!(header, format!("p cnf {} {}", cnf.num_vars(), body));
        assert!(text.lines().any(|l| l == "c map meet 0 0 1"));
    }

    #[test]
    fn decode_hand_built_assignment() {
        let model = chain_meet(2);
        let task = SearchTask::new(2, [], None).unwrap();
        let cnf = encode_search(&task, EncodeOptions::default()).unwrap();
        let map = cnf.varmap.as_ref().unwrap();
        let a = model_assignment(&model, map, cnf.num_vars());
        assert_eq!(decode_model(&a, map).unwrap(), model);

        let mut two = a.clone();
        two[map.var(Op::Mult, 1, 1, 0) as usize - 1] = true;
        assert_eq!(
            decode_model(&two, map),
            Err(EncodeError::IllFormedAssignment { op: Op::Mult, row: 1, col: 1, count: 2 })
        );
    }

    #[test]
    fn symmetry_for_two_elements() {
        let leq = |x: usize, y: usize| (10 * x + y + 1) as i32;
        let clauses = symmetry_clauses(2, leq);
        assert!(clauses.contains(&vec![leq(0, 1)]));
        assert!(clauses.contains(&vec![-leq(1, 0)]));
        assert!(symmetry_clauses(1, leq).is_empty());
    }

    #[test]
    fn clause_literals_in_range() {
        let task = SearchTask::new(3, [Law::D1, Law::LD], Some(Law::D3)).unwrap();
        let cnf = encode_search(&task, EncodeOptions::default()).unwrap();
        assert!(cnf.clauses().all(|c| !c.is_empty() && c.iter().all(|l| l.unsigned_abs() <= cnf.num_vars())));
        assert_eq!(cnf.clauses().count(), cnf.num_clauses());
    }
}
