//! LaTeX Cayley tables, Hasse diagrams (DOT and TikZ), and report bundles
//! over grid results. All emitters are byte-deterministic.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::algebra::{covering_relation, derive_order, AlgebraError, FiniteBinar, Op, OrderRelation};
use crate::grid::{Goal, SearchResult};
use crate::sat::Status;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("unknown operation {0:?} (expected meet, join, mult, lres or rres)")]
    UnknownOp(String),
    #[error("model has no lattice order: {0}")]
    Algebra(#[from] AlgebraError),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn latex_symbol(op: Op) -> &'static str {
    match op {
        Op::Meet => "\\wedge",
        Op::Join => "\\vee",
        Op::Mult => "\\cdot",
        Op::Lres => "\\backslash",
        Op::Rres => "/",
    }
}

/// A `tabular` for one operation: row `x`, column `y` holds `x op y`.
pub fn cayley_latex(b: &FiniteBinar, op_name: &str) -> Result<String, ReportError> {
    let op = Op::from_name(op_name).ok_or_else(|| ReportError::UnknownOp(op_name.to_string()))?;
    let n = b.size();
    let mut s = String::new();
    writeln!(s, "\\begin{{tabular}}{{c|{}}}", "c".repeat(n)).unwrap();
    let header: Vec<String> = (0..n).map(|y| y.to_string()).collect();
    writeln!(s, "${}$ & {} \\\\", latex_symbol(op), header.join(" & ")).unwrap();
    s.push_str("\\hline\n");
    for x in 0..n {
        let row: Vec<String> = (0..n).map(|y| b.apply(op, x, y).to_string()).collect();
        writeln!(s, "{x} & {} \\\\", row.join(" & ")).unwrap();
    }
    s.push_str("\\end{tabular}\n");
    Ok(s)
}

/// Drawing positions: `rank[x]` is the length of the longest chain from a
/// minimal element up to `x`; `levels[r]` lists rank-`r` elements in label
/// order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HasseLayout {
    pub rank: Vec<usize>,
    pub levels: Vec<Vec<usize>>,
    pub edges: Vec<(usize, usize)>,
}

impl HasseLayout {
    pub fn new(order: &OrderRelation) -> HasseLayout {
        let n = order.size();
        let edges = covering_relation(order);
        // a linear extension: fewer strict lower bounds first
        let mut topo: Vec<usize> = (0..n).collect();
        topo.sort_by_key(|&x| ((0..n).filter(|&y| order.lt(y, x)).count(), x));
        let mut rank = vec![0; n];
        for &y in &topo {
            for &(a, b) in &edges {
                if b == y {
                    rank[y] = rank[y].max(rank[a] + 1);
                }
            }
        }
        let height = rank.iter().copied().max().map_or(0, |r| r + 1);
        let mut levels = vec![Vec::new(); height];
        for x in 0..n {
            levels[rank[x]].push(x);
        }
        HasseLayout { rank, levels, edges }
    }

    /// Horizontal slot of `x` within its level, centred on zero.
    pub fn offset(&self, x: usize) -> f64 {
        let level = &self.levels[self.rank[x]];
        let i = level.iter().position(|&e| e == x).expect("element in its level");
        i as f64 - (level.len() as f64 - 1.0) / 2.0
    }
}

pub fn hasse_dot(b: &FiniteBinar) -> Result<String, ReportError> {
    Ok(hasse_dot_for(&derive_order(b)?))
}

pub fn hasse_dot_for(order: &OrderRelation) -> String {
    let layout = HasseLayout::new(order);
    let mut s = String::from("graph hasse {\n  rankdir=BT;\n  node [shape=circle];\n");
    for level in &layout.levels {
        let nodes: Vec<String> = level.iter().map(|x| format!("\"{x}\";")).collect();
        writeln!(s, "  {{ rank=same; {} }}", nodes.join(" ")).unwrap();
    }
    for (a, b) in &layout.edges {
        writeln!(s, "  \"{a}\" -- \"{b}\";").unwrap();
    }
    s.push_str("}\n");
    s
}

pub fn hasse_tikz(b: &FiniteBinar) -> Result<String, ReportError> {
    Ok(hasse_tikz_for(&derive_order(b)?))
}

/// A standalone document with one `tikzpicture`.
pub fn hasse_tikz_for(order: &OrderRelation) -> String {
    let layout = HasseLayout::new(order);
    let mut s = String::from(
        "\\documentclass[tikz]{standalone}\n\\begin{document}\n\\begin{tikzpicture}[every node/.style={circle,draw,inner sep=2pt}]\n",
    );
    for x in 0..order.size() {
        writeln!(s, "  \\node (n{x}) at ({:.1},{}) {{{x}}};", layout.offset(x), layout.rank[x]).unwrap();
    }
    for (a, b) in &layout.edges {
        writeln!(s, "  \\draw (n{a}) -- (n{b});").unwrap();
    }
    s.push_str("\\end{tikzpicture}\n\\end{document}\n");
    s
}

fn escape(text: &str) -> String {
    let mut out = String::new();
    for c in text.chars() {
        match c {
            '_' | '&' | '%' | '#' | '$' | '{' | '}' => {
                out.push('\\');
                out.push(c);
            }
            _ => out.push(c),
        }
    }
    out
}

struct GoalSummary<'a> {
    goal: Goal,
    sizes: Vec<(usize, Status)>,
    witness: Option<&'a SearchResult>,
    budget: Option<f64>,
}

impl GoalSummary<'_> {
    fn status(&self) -> Status {
        if self.witness.is_some() {
            Status::Sat
        } else if self.sizes.iter().all(|s| s.1 == Status::Unsat) {
            Status::Unsat
        } else {
            Status::Unknown
        }
    }

    fn status_text(&self) -> String {
        match (self.status(), self.budget) {
            (Status::Unknown, Some(b)) => format!("UNKNOWN (timeout budget {b}\\,s)"),
            (st, _) => st.to_string(),
        }
    }

    fn description(&self) -> String {
        let assume: Vec<&str> = self.goal.assume.iter().map(|l| l.name()).collect();
        let assume = if assume.is_empty() { "nothing".to_string() } else { assume.join(", ") };
        match self.goal.refute {
            Some(t) => format!("assume {assume}; refute {t}"),
            None => format!("assume {assume}"),
        }
    }
}

fn summarize(results: &[SearchResult]) -> Vec<GoalSummary<'_>> {
    let mut by_goal: BTreeMap<Goal, Vec<&SearchResult>> = BTreeMap::new();
    for r in results {
        by_goal.entry(Goal::of(&r.task)).or_default().push(r);
    }
    by_goal
        .into_iter()
        .map(|(goal, mut rs)| {
            rs.sort_by_key(|r| r.task.size);
            let witness = rs.iter().copied().find(|r| r.status == Status::Sat && r.model.is_some());
            let budget = rs.iter().filter(|r| r.status == Status::Unknown).find_map(|r| r.budget_seconds);
            let sizes = rs.iter().map(|r| (r.task.size, r.status)).collect();
            GoalSummary { goal, sizes, witness, budget }
        })
        .collect()
}

fn write_file(path: &Path, contents: &str, written: &mut Vec<PathBuf>) -> Result<(), ReportError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|source| ReportError::Io { path: parent.into(), source })?;
    }
    std::fs::write(path, contents).map_err(|source| ReportError::Io { path: path.into(), source })?;
    written.push(path.to_path_buf());
    Ok(())
}

/// Writes `<goal>/<op>.tex`, `<goal>/hasse.dot`, `<goal>/hasse.tex` for
/// every goal with a witness, and `summary.tex` covering all goals.
/// Returns the paths written.
pub fn report_bundle(results: &[SearchResult], dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let goals = summarize(results);
    let mut written = Vec::new();
    let mut doc = String::from(
        "\\documentclass{article}\n\\usepackage{standalone}\n\\usepackage{tikz}\n\\begin{document}\n\\section*{Summary}\n",
    );
    if goals.is_empty() {
        doc.push_str("No results (empty result set).\n");
    } else {
        doc.push_str("\\begin{tabular}{lll}\nGoal & Status & Witness size \\\\\n\\hline\n");
        for g in &goals {
            let size = g.witness.map_or("--".to_string(), |w| w.task.size.to_string());
            writeln!(doc, "{} & {} & {} \\\\", escape(&g.description()), g.status_text(), size).unwrap();
        }
        doc.push_str("\\end{tabular}\n");
    }
    for g in &goals {
        let slug = g.goal.slug();
        writeln!(doc, "\\section*{{{}}}", escape(&g.description())).unwrap();
        writeln!(doc, "Status: {}.", g.status_text()).unwrap();
        let tried: Vec<String> = g.sizes.iter().map(|(n, st)| format!("{n}: {st}")).collect();
        writeln!(doc, "Sizes tried: {}.\n", tried.join(", ")).unwrap();
        let Some(w) = g.witness else { continue };
        let model = w.model.as_ref().expect("witness has a model");
        writeln!(doc, "Minimal witness size: {}.\n", w.task.size).unwrap();
        for op in Op::ALL {
            let file = dir.join(&slug).join(format!("{}.tex", op.name()));
            write_file(&file, &cayley_latex(model, op.name())?, &mut written)?;
            writeln!(doc, "\\input{{{slug}/{}.tex}}\\quad", op.name()).unwrap();
        }
        write_file(&dir.join(&slug).join("hasse.dot"), &hasse_dot(model)?, &mut written)?;
        write_file(&dir.join(&slug).join("hasse.tex"), &hasse_tikz(model)?, &mut written)?;
        writeln!(doc, "\n\\includestandalone{{{slug}/hasse}}\n").unwrap();
    }
    doc.push_str("\\end{document}\n");
    write_file(&dir.join("summary.tex"), &doc, &mut written)?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::examples::{chain_meet, m3_model};

    #[test]
    fn two_chain_meet_table() {
        let t = cayley_latex(&chain_meet(2), "meet").unwrap();
        assert_eq!(
            t,
            "\\begin{tabular}{c|cc}\n$\\wedge$ & 0 & 1 \\\\\n\\hline\n0 & 0 & 0 \\\\\n1 & 0 & 1 \\\\\n\\end{tabular}\n"
        );
        assert!(cayley_latex(&chain_meet(1), "mult").unwrap().contains("0 & 0 \\\\"));
        assert!(matches!(cayley_latex(&chain_meet(2), "plus"), Err(ReportError::UnknownOp(_))));
    }

    #[test]
    fn hasse_edges() {
        let dot = hasse_dot(&chain_meet(2)).unwrap();
        assert_eq!(dot.matches(" -- ").count(), 1);
        assert!(dot.contains("\"0\" -- \"1\";"));
        assert_eq!(hasse_dot(&chain_meet(4)).unwrap().matches(" -- ").count(), 3);

        let m3 = m3_model();
        let dot = hasse_dot(&m3).unwrap();
        assert_eq!(dot.matches(" -- ").count(), 6);
        assert!(dot.contains("{ rank=same; \"1\"; \"2\"; \"3\"; }"));
        let tikz = hasse_tikz(&m3).unwrap();
        assert_eq!(tikz.matches("\\draw").count(), 6);
        assert_eq!(tikz.matches("\\node").count(), 5);
    }

    #[test]
    fn ranks_follow_longest_chain() {
        let n5 = crate::algebra::examples::n5_lattice();
        let order = OrderRelation::from_meet_join(&n5.0, &n5.1).unwrap();
        let layout = HasseLayout::new(&order);
        assert_eq!(layout.levels.len(), 4);
        assert_eq!(layout.rank[0], 0);
        assert_eq!(layout.rank[4], 3);
    }

    #[test]
    fn empty_bundle() {
        let dir = tempfile::tempdir().unwrap();
        let files = report_bundle(&[], dir.path()).unwrap();
        assert_eq!(files, vec![dir.path().join("summary.tex")]);
        let text = std::fs::read_to_string(&files[0]).unwrap();
        assert!(text.contains("empty result set"));
    }
}
