//! Terms, identities and the built-in axiom catalogue.
//!
//! Surface syntax is ASCII: `^` meet, `v` join, `*` mult, `\` left residual,
//! `/` right residual. All operators are binary. A chain of the same
//! operator associates to the left; mixing different operators without
//! parentheses is rejected rather than guessed.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::Op;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    App(Op, Box<Term>, Box<Term>),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(name.to_string())
    }

    pub fn app(op: Op, l: Term, r: Term) -> Term {
        Term::App(op, Box::new(l), Box::new(r))
    }

    pub fn depth(&self) -> usize {
        match self {
            Term::Var(_) => 0,
            Term::App(_, l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::App(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::App(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
        }
    }
}

/// Fully parenthesized rendering; `parse_term(&format_term(t)) == t`.
pub fn format_term(t: &Term) -> String {
    t.to_string()
}

/// A universally quantified equation.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Identity {
    pub name: String,
    pub lhs: Term,
    pub rhs: Term,
}

impl Identity {
    /// Variables of both sides, sorted by name.
    pub fn vars(&self) -> Vec<String> {
        let mut set = BTreeSet::new();
        self.lhs.collect_vars(&mut set);
        self.rhs.collect_vars(&mut set);
        set.into_iter().collect()
    }
}

impl fmt::Display for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} = {}", self.name, self.lhs, self.rhs)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DslError {
    #[error("syntax error at {position}: expected {expected}")]
    Syntax { position: usize, expected: String },
    #[error("unknown axiom name {0:?}")]
    UnknownName(String),
    #[error("line {line}: {source}")]
    Line { line: usize, source: Box<DslError> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Token {
    Ident(usize, usize),
    Op(Op),
    Open,
    Close,
    Eq,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>, DslError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let tok = match c {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
                continue;
            }
            b'(' => Token::Open,
            b')' => Token::Close,
            b'=' => Token::Eq,
            b'^' => Token::Op(Op::Meet),
            b'*' => Token::Op(Op::Mult),
            b'\\' => Token::Op(Op::Lres),
            b'/' => Token::Op(Op::Rres),
            c if c.is_ascii_alphabetic() => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_alphabetic() {
                    i += 1;
                }
                let tok = if &text[start..i] == "v" { Token::Op(Op::Join) } else { Token::Ident(start, i) };
                out.push((start, tok));
                continue;
            }
            _ => {
                return Err(DslError::Syntax {
                    position: i,
                    expected: "variable, operator or parenthesis".into(),
                })
            }
        };
        out.push((i, tok));
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    text: &'a str,
    tokens: Vec<(usize, Token)>,
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<Token> {
        self.tokens.get(self.pos).map(|t| t.1)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.text.len(), |t| t.0)
    }

    fn error<T>(&self, expected: &str) -> Result<T, DslError> {
        Err(DslError::Syntax { position: self.offset(), expected: expected.into() })
    }

    fn term(&mut self) -> Result<Term, DslError> {
        let mut acc = self.operand()?;
        let mut chain_op: Option<Op> = None;
        while let Some(Token::Op(op)) = self.peek() {
            match chain_op {
                Some(prev) if prev != op => {
                    return self.error(&format!("`{}` or parentheses around mixed operators", prev.symbol()))
                }
                _ => chain_op = Some(op),
            }
            self.pos += 1;
            let rhs = self.operand()?;
            acc = Term::app(op, acc, rhs);
        }
        Ok(acc)
    }

    fn operand(&mut self) -> Result<Term, DslError> {
        match self.peek() {
            Some(Token::Ident(a, b)) => {
                self.pos += 1;
                Ok(Term::Var(self.text[a..b].to_string()))
            }
            Some(Token::Open) => {
                self.pos += 1;
                let t = self.term()?;
                if self.peek() != Some(Token::Close) {
                    return self.error("`)`");
                }
                self.pos += 1;
                Ok(t)
            }
            _ => self.error("variable or `(`"),
        }
    }
}

pub fn parse_term(text: &str) -> Result<Term, DslError> {
    let mut p = Parser { text, tokens: tokenize(text)?, pos: 0 };
    let t = p.term()?;
    if p.pos != p.tokens.len() {
        return p.error("end of term");
    }
    Ok(t)
}

/// Parses `lhs = rhs`, optionally prefixed by `name:`. Unnamed identities
/// are called `E`.
pub fn parse_identity(text: &str) -> Result<Identity, DslError> {
    let (name, body, base) = match text.find(':') {
        Some(i) => (text[..i].trim().to_string(), &text[i + 1..], i + 1),
        None => ("E".to_string(), text, 0),
    };
    if name.is_empty() {
        return Err(DslError::Syntax { position: 0, expected: "identity name before `:`".into() });
    }
    let eqs: Vec<usize> = body.match_indices('=').map(|(i, _)| i).collect();
    if eqs.len() != 1 {
        let position = base + eqs.get(1).copied().unwrap_or(body.len());
        return Err(DslError::Syntax { position, expected: "exactly one `=`".into() });
    }
    let shift = |e: DslError, by: usize| match e {
        DslError::Syntax { position, expected } => DslError::Syntax { position: position + by, expected },
        other => other,
    };
    let lhs = parse_term(&body[..eqs[0]]).map_err(|e| shift(e, base))?;
    let rhs = parse_term(&body[eqs[0] + 1..]).map_err(|e| shift(e, base + eqs[0] + 1))?;
    Ok(Identity { name, lhs, rhs })
}

/// Axiom file: one identity per line, `name: equation`, `#` starts a comment.
/// Lines without a name are called `E<line>`.
pub fn parse_axiom_file(text: &str) -> Result<Vec<Identity>, DslError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut id = parse_identity(line)
            .map_err(|e| DslError::Line { line: i + 1, source: Box::new(e) })?;
        if !line.contains(':') {
            id.name = format!("E{}", i + 1);
        }
        out.push(id);
    }
    Ok(out)
}

/// The distributivity identities and lattice distributivity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Law {
    D1,
    D2,
    D3,
    D4,
    D5,
    D6,
    LD,
}

impl Law {
    pub const ALL: [Law; 7] = [Law::D1, Law::D2, Law::D3, Law::D4, Law::D5, Law::D6, Law::LD];
    pub const DISTRIBUTIVITY: [Law; 6] = [Law::D1, Law::D2, Law::D3, Law::D4, Law::D5, Law::D6];

    pub fn name(self) -> &'static str {
        match self {
            Law::D1 => "D1",
            Law::D2 => "D2",
            Law::D3 => "D3",
            Law::D4 => "D4",
            Law::D5 => "D5",
            Law::D6 => "D6",
            Law::LD => "LD",
        }
    }

    pub fn equation(self) -> &'static str {
        match self {
            Law::D1 => "x * (y ^ z) = (x * y) ^ (x * z)",
            Law::D2 => "(x ^ y) * z = (x * z) ^ (y * z)",
            Law::D3 => "x \\ (y v z) = (x \\ y) v (x \\ z)",
            Law::D4 => "(x v y) / z = (x / z) v (y / z)",
            Law::D5 => "(x ^ y) \\ z = (x \\ z) v (y \\ z)",
            Law::D6 => "x / (y ^ z) = (x / y) v (x / z)",
            Law::LD => "x ^ (y v z) = (x ^ y) v (x ^ z)",
        }
    }

    pub fn identity(self) -> Identity {
        let mut id = parse_identity(self.equation()).expect("built-in identity parses");
        id.name = self.name().to_string();
        id
    }
}

impl fmt::Display for Law {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Law {
    type Err = DslError;

    fn from_str(s: &str) -> Result<Law, DslError> {
        Law::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| DslError::UnknownName(s.to_string()))
    }
}

/// Parses a comma-separated list such as `D1,D4,LD`.
pub fn parse_law_list(text: &str) -> Result<BTreeSet<Law>, DslError> {
    text.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

pub fn builtin_identity(law: Law) -> Identity {
    law.identity()
}

const LATTICE: [(&str, &str); 8] = [
    ("comm-meet", "x ^ y = y ^ x"),
    ("comm-join", "x v y = y v x"),
    ("assoc-meet", "x ^ (y ^ z) = (x ^ y) ^ z"),
    ("assoc-join", "x v (y v z) = (x v y) v z"),
    ("idem-meet", "x ^ x = x"),
    ("idem-join", "x v x = x"),
    ("absorb-meet", "x ^ (x v y) = x"),
    ("absorb-join", "x v (x ^ y) = x"),
];

/// The eight lattice equations.
pub fn lattice_axioms() -> Vec<Identity> {
    LATTICE
        .iter()
        .map(|(name, eq)| {
            let mut id = parse_identity(eq).expect("lattice axiom parses");
            id.name = name.to_string();
            id
        })
        .collect()
}

/// What a built-in name stands for. `RES` is not an equation; encoder and
/// verifier treat it specially.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Builtin {
    Identity(Identity),
    Lattice(Vec<Identity>),
    Residuation,
}

pub fn builtin(name: &str) -> Result<Builtin, DslError> {
    match name {
        "LATTICE" => Ok(Builtin::Lattice(lattice_axioms())),
        "RES" => Ok(Builtin::Residuation),
        _ => Law::ALL
            .into_iter()
            .find(|l| l.name() == name)
            .map(|l| Builtin::Identity(l.identity()))
            .ok_or_else(|| DslError::UnknownName(name.to_string())),
    }
}
