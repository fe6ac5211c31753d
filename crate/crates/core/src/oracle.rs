//! Exhaustive ground truth for small carriers, independent of the encoder.
//!
//! Lattices are enumerated as labeled partial orders in which all binary
//! meets and joins exist. Residuated binars are enumerated as a lattice
//! plus a multiplication table; the residuals are never enumerated because
//! they are determined by the multiplication and the order.

use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::algebra::{
    check_identity, derive_residuals, find_isomorphism, FiniteBinar, OrderRelation, Table,
};
use crate::encode::SearchTask;

/// Largest size for which lattices are enumerated.
pub const LATTICE_BOUND: usize = 6;
/// Largest size for which residuated binars are enumerated exhaustively.
pub const BINAR_BOUND: usize = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("size {size} exceeds the exhaustive bound {bound}")]
    BoundExceeded { size: usize, bound: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lattice {
    pub meet: Table,
    pub join: Table,
}

impl Lattice {
    pub fn order(&self) -> OrderRelation {
        OrderRelation::from_meet_join(&self.meet, &self.join).expect("enumerated lattices are consistent")
    }
}

#[derive(Clone, Debug)]
pub struct LatticeCatalogue {
    pub size: usize,
    pub up_to_iso: bool,
    pub lattices: Vec<Lattice>,
}

// All labeled partial orders on {0..n-1}, as row-major leq matrices. Each
// poset on {0..k} extends one on {0..k-1} by choosing the new element's
// strict down-set and up-set.
fn labeled_posets(n: usize) -> Vec<Vec<bool>> {
    let mut posets: Vec<Vec<bool>> = vec![Vec::new()];
    for k in 0..n {
        let mut next = Vec::new();
        for p in &posets {
            let leq = |a: usize, b: usize| p[a * k + b];
            let down_closed = |mask: u32| {
                (0..k).all(|a| mask >> a & 1 == 0 || (0..k).all(|b| !leq(b, a) || mask >> b & 1 == 1))
            };
            let up_closed = |mask: u32| {
                (0..k).all(|a| mask >> a & 1 == 0 || (0..k).all(|b| !leq(a, b) || mask >> b & 1 == 1))
            };
            let downs: Vec<u32> = (0..1u32 << k).filter(|&m| down_closed(m)).collect();
            let ups: Vec<u32> = (0..1u32 << k).filter(|&m| up_closed(m)).collect();
            for &d in &downs {
                for &u in &ups {
                    if d & u != 0 {
                        continue;
                    }
                    let compatible = (0..k).all(|a| {
                        d >> a & 1 == 0 || (0..k).all(|b| u >> b & 1 == 0 || leq(a, b))
                    });
                    if !compatible {
                        continue;
                    }
                    let m = k + 1;
                    let mut q = vec![false; m * m];
                    for a in 0..k {
                        for b in 0..k {
                            q[a * m + b] = leq(a, b);
                        }
                        q[a * m + k] = d >> a & 1 == 1;
                        q[k * m + a] = u >> a & 1 == 1;
                    }
                    q[k * m + k] = true;
                    next.push(q);
                }
            }
        }
        posets = next;
    }
    posets
}

fn lattice_of(n: usize, leq: Vec<bool>) -> Option<Lattice> {
    let order = OrderRelation::from_matrix(n, leq).ok()?;
    let mut meet = Table::constant(n, 0);
    let mut join = Table::constant(n, 0);
    for x in 0..n {
        for y in 0..n {
            meet.set(x, y, order.meet_of(&[x, y])?);
            join.set(x, y, order.join_of(&[x, y])?);
        }
    }
    Some(Lattice { meet, join })
}

/// All lattices on `{0..n-1}`, or one representative per isomorphism class.
pub fn enumerate_lattices(n: usize, up_to_iso: bool) -> Result<LatticeCatalogue, OracleError> {
    if n > LATTICE_BOUND {
        return Err(OracleError::BoundExceeded { size: n, bound: LATTICE_BOUND });
    }
    let mut lattices: Vec<Lattice> = Vec::new();
    if n > 0 {
        for leq in labeled_posets(n) {
            let Some(l) = lattice_of(n, leq) else { continue };
            if up_to_iso
                && lattices.iter().any(|r| {
                    find_isomorphism(&[r.meet.clone(), r.join.clone()], &[l.meet.clone(), l.join.clone()]).is_some()
                })
            {
                continue;
            }
            lattices.push(l);
        }
    }
    Ok(LatticeCatalogue { size: n, up_to_iso, lattices })
}

fn all_tables(n: usize) -> impl Iterator<Item = Table> {
    let cells = n * n;
    let total = (n as u64).pow(cells as u32);
    (0..total).map(move |mut code| {
        Table::from_fn(n, |_, _| {
            let v = (code % n as u64) as usize;
            code /= n as u64;
            v
        })
    })
}

/// Every residuated binar on `{0..n-1}`, all labelings included.
pub fn enumerate_residuated_binars(n: usize) -> Result<Vec<FiniteBinar>, OracleError> {
    if n > BINAR_BOUND {
        return Err(OracleError::BoundExceeded { size: n, bound: BINAR_BOUND });
    }
    let mut out = Vec::new();
    for lat in enumerate_lattices(n, false)?.lattices {
        let order = lat.order();
        for mult in all_tables(n) {
            if let Ok((lres, rres)) = derive_residuals(&order, &mult) {
                let b = FiniteBinar::new([lat.meet.clone(), lat.join.clone(), mult, lres, rres])
                    .expect("derived tables are total");
                out.push(b);
            }
        }
    }
    Ok(out)
}

/// Cached [`enumerate_residuated_binars`].
pub fn residuated_binars(n: usize) -> Result<&'static [FiniteBinar], OracleError> {
    static CACHE: [OnceLock<Vec<FiniteBinar>>; BINAR_BOUND + 1] =
        [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];
    if n > BINAR_BOUND {
        return Err(OracleError::BoundExceeded { size: n, bound: BINAR_BOUND });
    }
    Ok(CACHE[n].get_or_init(|| enumerate_residuated_binars(n).expect("within bound")))
}

fn satisfies(task: &SearchTask, b: &FiniteBinar) -> bool {
    task.assume.iter().all(|l| check_identity(b, &l.identity()).holds())
        && task.refute.is_none_or(|l| !check_identity(b, &l.identity()).holds())
}

/// First enumerated algebra satisfying the assumptions and violating the
/// refuted identity. `None` means no model of that size exists.
pub fn oracle_search(task: &SearchTask) -> Result<Option<FiniteBinar>, OracleError> {
    Ok(residuated_binars(task.size)?.iter().find(|b| satisfies(task, b)).cloned())
}

/// Number of labeled models of the task.
pub fn count_models(task: &SearchTask) -> Result<usize, OracleError> {
    Ok(residuated_binars(task.size)?.iter().filter(|b| satisfies(task, b)).count())
}

/// Random residuated binars of size `n <= 6`, for fuzzing beyond the
/// exhaustive bound. Not uniform and not exhaustive: a random lattice is
/// picked, the multiplication is chosen on pairs of join-irreducibles and
/// extended by joins, and candidates that fail to be residuated are
/// discarded. Returns fewer than `count` models if `attempts` run out.
pub fn sample_residuated_binars(
    n: usize,
    count: usize,
    attempts: usize,
    rng: &mut impl Rng,
) -> Result<Vec<FiniteBinar>, OracleError> {
    let catalogue = enumerate_lattices(n, false)?;
    let mut out = Vec::new();
    for _ in 0..attempts {
        if out.len() == count {
            break;
        }
        let lat = catalogue.lattices.choose(rng).expect("some lattice exists");
        let order = lat.order();
        let bottom = order.join_of(&[]).expect("finite lattices have a bottom");
        let irreducible: Vec<usize> = (0..n)
            .filter(|&x| x != bottom && (0..n).filter(|&y| order.lt(y, x)).all(|y| {
                (0..n).filter(|&z| order.lt(z, x)).all(|z| order.leq(z, y))
            }))
            .collect();
        let mut f = std::collections::HashMap::new();
        for &a in &irreducible {
            for &b in &irreducible {
                f.insert((a, b), rng.gen_range(0..n));
            }
        }
        let order_ref = &order;
        let mult = Table::from_fn(n, |x, y| {
            let mut parts = Vec::new();
            for &a in irreducible.iter().filter(|&&a| order_ref.leq(a, x)) {
                for &b in irreducible.iter().filter(|&&b| order_ref.leq(b, y)) {
                    parts.push(f[&(a, b)]);
                }
            }
            order_ref.join_of(&parts).expect("lattice")
        });
        if let Ok((lres, rres)) = derive_residuals(&order, &mult) {
            out.push(FiniteBinar::new([lat.meet.clone(), lat.join.clone(), mult, lres, rres]).expect("total"));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{check_lattice, check_residuation, examples};
    use crate::dsl::Law;
    use rand::SeedableRng;

    #[test]
    fn lattice_counts_up_to_iso() {
        let counts: Vec<usize> =
            (1..=5).map(|n| enumerate_lattices(n, true).unwrap().lattices.len()).collect();
        assert_eq!(counts, vec![1, 1, 1, 2, 5]);
    }

    #[test]
    fn labeled_lattice_counts_match_orbit_sizes() {
        // n! / |Aut| summed over classes: chain has trivial automorphisms,
        // 2x2 has 2; at n = 5: chain 120, M3 20 (|Aut| = 6), N5 120,
        // 2x2 plus top 60, 2x2 plus bottom 60
        let labeled: Vec<usize> =
            (1..=5).map(|n| enumerate_lattices(n, false).unwrap().lattices.len()).collect();
        assert_eq!(labeled, vec![1, 2, 6, 36, 380]);
    }

    #[test]
    fn five_element_lattices_include_m3_and_n5() {
        let cat = enumerate_lattices(5, true).unwrap();
        for (meet, join) in [examples::m3_lattice(), examples::n5_lattice()] {
            assert!(cat
                .lattices
                .iter()
                .any(|l| find_isomorphism(&[l.meet.clone(), l.join.clone()], &[meet.clone(), join.clone()]).is_some()));
        }
    }

    #[test]
    fn lattice_bound() {
        assert_eq!(enumerate_lattices(7, true).unwrap_err(), OracleError::BoundExceeded { size: 7, bound: 6 });
        assert!(enumerate_residuated_binars(4).is_err());
    }

    #[test]
    fn binar_counts() {
        assert_eq!(residuated_binars(1).unwrap().len(), 1);
        // per labeled 2-chain: bottom absorbing, top*top free
        assert_eq!(residuated_binars(2).unwrap().len(), 4);
        for b in residuated_binars(3).unwrap() {
            assert!(check_lattice(b).pass());
            assert!(check_residuation(b).pass());
        }
    }

    #[test]
    fn two_element_models() {
        let models = residuated_binars(2).unwrap();
        assert!(models.contains(&examples::chain_meet(2)));
        // on the labeling 0 < 1, mult = max is excluded
        let natural = models.iter().filter(|b| b.leq(0, 1));
        assert!(natural.clone().count() == 2);
        assert!(natural.clone().all(|b| b.apply(crate::Op::Mult, 0, 1) == 0));
    }

    #[test]
    fn search_examples() {
        let t = SearchTask::new(1, [Law::D2, Law::D3, Law::D4, Law::D5, Law::D6, Law::LD], Some(Law::D1)).unwrap();
        assert_eq!(oracle_search(&t).unwrap(), None);
        assert!(oracle_search(&SearchTask::new(2, [], None).unwrap()).unwrap().is_some());
        assert!(oracle_search(&SearchTask::new(3, [Law::LD], None).unwrap()).unwrap().is_some());
    }

    #[test]
    fn count_examples() {
        assert_eq!(count_models(&SearchTask::new(1, [], None).unwrap()).unwrap(), 1);
        assert_eq!(count_models(&SearchTask::new(2, [], None).unwrap()).unwrap(), 4);
        assert_eq!(count_models(&SearchTask::new(3, [], Some(Law::LD)).unwrap()).unwrap(), 0);
    }

    #[test]
    fn samples_are_residuated() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for n in [4, 5] {
            let models = sample_residuated_binars(n, 20, 2000, &mut rng).unwrap();
            assert!(!models.is_empty());
            for m in models {
                assert!(check_lattice(&m).pass() && check_residuation(&m).pass());
            }
        }
    }
}
