//! Plain DPLL: unit propagation over two watched literals, chronological
//! backtracking, and branching on the first unassigned variable (true
//! first). No learning, no restarts.

use std::sync::atomic::Ordering;
use web_time::Instant;

use super::{Budget, SolveResult, SolveStats, Status};
use crate::encode::CnfInstance;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
struct Lit(u32);

impl Lit {
    fn from_dimacs(l: i32) -> Lit {
        let var = l.unsigned_abs() - 1;
        Lit(var * 2 + u32::from(l < 0))
    }

    fn var(self) -> usize {
        (self.0 >> 1) as usize
    }

    fn negative(self) -> bool {
        self.0 & 1 == 1
    }

    fn code(self) -> usize {
        self.0 as usize
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;

    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

struct Decision {
    trail_len: usize,
    lit: Lit,
    flipped: bool,
}

struct Solver {
    clauses: Vec<Vec<Lit>>,
    watches: Vec<Vec<usize>>,
    // 0 unassigned, 1 true, -1 false
    values: Vec<i8>,
    trail: Vec<Lit>,
    qhead: usize,
    decisions: Vec<Decision>,
    next_var: usize,
    stats: SolveStats,
}

impl Solver {
    fn value(&self, lit: Lit) -> i8 {
        let v = self.values[lit.var()];
        if lit.negative() {
            -v
        } else {
            v
        }
    }

    fn enqueue(&mut self, lit: Lit) {
        self.values[lit.var()] = if lit.negative() { -1 } else { 1 };
        self.trail.push(lit);
    }

    /// Returns false on conflict.
    fn propagate(&mut self) -> bool {
        while self.qhead < self.trail.len() {
            let false_lit = !self.trail[self.qhead];
            self.qhead += 1;
            self.stats.propagations += 1;
            let mut ws = std::mem::take(&mut self.watches[false_lit.code()]);
            let mut i = 0;
            let mut conflict = false;
            while i < ws.len() {
                let ci = ws[i];
                let clause = &mut self.clauses[ci];
                if clause[0] == false_lit {
                    clause.swap(0, 1);
                }
                let first = clause[0];
                let first_value = {
                    let v = self.values[first.var()];
                    if first.negative() { -v } else { v }
                };
                if first_value == 1 {
                    i += 1;
                    continue;
                }
                let mut moved = false;
                for k in 2..clause.len() {
                    let l = clause[k];
                    let v = self.values[l.var()];
                    let lv = if l.negative() { -v } else { v };
                    if lv != -1 {
                        clause.swap(1, k);
                        self.watches[clause[1].code()].push(ci);
                        ws.swap_remove(i);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                if first_value == -1 {
                    conflict = true;
                    break;
                }
                self.enqueue(first);
                i += 1;
            }
            let back = &mut self.watches[false_lit.code()];
            ws.append(back);
            *back = ws;
            if conflict {
                return false;
            }
        }
        true
    }

    fn undo_to(&mut self, trail_len: usize) {
        while self.trail.len() > trail_len {
            let lit = self.trail.pop().expect("nonempty trail");
            self.values[lit.var()] = 0;
            self.next_var = self.next_var.min(lit.var());
        }
        self.qhead = trail_len;
    }

    /// Returns false when every branch is exhausted.
    fn backtrack(&mut self) -> bool {
        while let Some(d) = self.decisions.pop() {
            self.undo_to(d.trail_len);
            if !d.flipped {
                let lit = !d.lit;
                self.decisions.push(Decision { trail_len: d.trail_len, lit, flipped: true });
                self.enqueue(lit);
                return true;
            }
        }
        false
    }

    fn pick(&mut self) -> Option<usize> {
        while self.next_var < self.values.len() {
            if self.values[self.next_var] == 0 {
                return Some(self.next_var);
            }
            self.next_var += 1;
        }
        None
    }
}

/// Decides `cnf`. Exceeding the budget yields UNKNOWN; a SAT answer is
/// re-checked against every clause before it is returned.
pub fn solve_builtin(cnf: &CnfInstance, budget: &Budget) -> SolveResult {
    let start = Instant::now();
    let num_vars = cnf.num_vars() as usize;
    let mut solver = Solver {
        clauses: Vec::with_capacity(cnf.num_clauses()),
        watches: vec![Vec::new(); 2 * num_vars],
        values: vec![0; num_vars],
        trail: Vec::with_capacity(num_vars),
        qhead: 0,
        decisions: Vec::new(),
        next_var: 0,
        stats: SolveStats::default(),
    };
    let finish = |solver: Solver, status: Status| {
        let mut stats = solver.stats;
        stats.wall = start.elapsed();
        match status {
            Status::Sat => {
                let assignment: Vec<bool> = solver.values.iter().map(|&v| v == 1).collect();
                assert!(cnf.satisfied_by(&assignment), "built-in solver produced a non-model");
                SolveResult { status, assignment: Some(assignment), stats, reason: None }
            }
            Status::Unsat => SolveResult { status, assignment: None, stats, reason: None },
            Status::Unknown => unreachable!(),
        }
    };

    let mut units = Vec::new();
    for clause in cnf.clauses() {
        let mut lits: Vec<Lit> = clause.iter().map(|&l| Lit::from_dimacs(l)).collect();
        lits.sort_by_key(|l| l.0);
        lits.dedup();
        if lits.windows(2).any(|w| w[0].var() == w[1].var()) {
            continue;
        }
        if lits.len() == 1 {
            units.push(lits[0]);
            continue;
        }
        let ci = solver.clauses.len();
        solver.watches[lits[0].code()].push(ci);
        solver.watches[lits[1].code()].push(ci);
        solver.clauses.push(lits);
    }
    for u in units {
        match solver.value(u) {
            1 => {}
            -1 => return finish(solver, Status::Unsat),
            _ => solver.enqueue(u),
        }
    }

    let deadline = budget.timeout.map(|t| start + t);
    loop {
        if !solver.propagate() {
            if !solver.backtrack() {
                return finish(solver, Status::Unsat);
            }
            continue;
        }
        let Some(var) = solver.pick() else {
            return finish(solver, Status::Sat);
        };
        solver.stats.decisions += 1;
        if let Some(max) = budget.max_decisions {
            if solver.stats.decisions > max {
                let mut stats = solver.stats;
                stats.wall = start.elapsed();
                return SolveResult::unknown("decision limit", stats);
            }
        }
        if solver.stats.decisions.is_multiple_of(256) {
            let timed_out = deadline.is_some_and(|d| Instant::now() >= d);
            let cancelled = budget.cancel.as_ref().is_some_and(|c| c.load(Ordering::Relaxed));
            if timed_out || cancelled {
                let mut stats = solver.stats;
                stats.wall = start.elapsed();
                return SolveResult::unknown(if timed_out { "timeout" } else { "cancelled" }, stats);
            }
        }
        let lit = Lit(var as u32 * 2);
        solver.decisions.push(Decision { trail_len: solver.trail.len(), lit, flipped: false });
        solver.enqueue(lit);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn solve(num_vars: u32, clauses: &[Vec<i32>]) -> SolveResult {
        solve_builtin(&CnfInstance::from_clauses(num_vars, clauses), &Budget::default())
    }

    fn brute_force_sat(num_vars: u32, clauses: &[Vec<i32>]) -> bool {
        (0u32..1 << num_vars).any(|bits| {
            clauses.iter().all(|c| c.iter().any(|&l| ((bits >> (l.unsigned_abs() - 1)) & 1 == 1) == (l > 0)))
        })
    }

    #[test]
    fn small_examples() {
        let r = solve(2, &[vec![1, 2], vec![-1]]);
        assert_eq!(r.status, Status::Sat);
        assert_eq!(r.assignment, Some(vec![false, true]));
        assert_eq!(solve(1, &[vec![1], vec![-1]]).status, Status::Unsat);
        assert_eq!(solve(3, &[]).status, Status::Sat);
    }

    #[test]
    fn pigeonhole_three_into_two_is_unsat() {
        // p(i, h) = 2i + h + 1
        let p = |i: i32, h: i32| 2 * i + h + 1;
        let mut clauses = Vec::new();
        for i in 0..3 {
            clauses.push(vec![p(i, 0), p(i, 1)]);
        }
        for h in 0..2 {
            for i in 0..3 {
                for j in i + 1..3 {
                    clauses.push(vec![-p(i, h), -p(j, h)]);
                }
            }
        }
        assert_eq!(solve(6, &clauses).status, Status::Unsat);
    }

    #[test]
    fn decision_budget() {
        let clauses: Vec<Vec<i32>> = (1..=20).map(|v| vec![v, v + 20]).collect();
        let r = solve_builtin(
            &CnfInstance::from_clauses(40, &clauses),
            &Budget { max_decisions: Some(3), ..Budget::default() },
        );
        assert_eq!(r.status, Status::Unknown);
        assert_eq!(r.reason.as_deref(), Some("decision limit"));
    }

    fn arb_cnf() -> impl Strategy<Value = (u32, Vec<Vec<i32>>)> {
        (1u32..=8).prop_flat_map(|n| {
            let lit = (1..=n as i32, any::<bool>()).prop_map(|(v, neg)| if neg { -v } else { v });
            (Just(n), proptest::collection::vec(proptest::collection::vec(lit, 1..=4), 0..30))
        })
    }

    proptest! {
        #[test]
        fn agrees_with_brute_force((n, clauses) in arb_cnf()) {
            let r = solve(n, &clauses);
            prop_assert_eq!(r.status == Status::Sat, brute_force_sat(n, &clauses));
        }
    }
}
