use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use resbin::algebra::{
    are_isomorphic, check_identity, check_lattice, check_residuation, derive_order, mult_monotonicity_failure,
    IdentityCheck,
};
use resbin::encode::{encode_search, model_assignment};
use resbin::oracle::{oracle_search, sample_residuated_binars};
use resbin::sat::{solve_builtin, Budget};
use resbin::{EncodeOptions, FiniteBinar, Law, Op, SearchTask, Status};

fn sampled(n: usize, count: usize, seed: u64) -> Vec<FiniteBinar> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_residuated_binars(n, count, count * 50, &mut rng).unwrap()
}

fn satisfied(b: &FiniteBinar) -> BTreeSet<Law> {
    Law::ALL
        .into_iter()
        .filter(|l| matches!(check_identity(b, &l.identity()), IdentityCheck::Holds))
        .collect()
}

#[test]
fn every_task_at_size_two_agrees_with_the_oracle() {
    for refute in [None].into_iter().chain(Law::DISTRIBUTIVITY.map(Some)) {
        let others: Vec<Law> = Law::ALL.into_iter().filter(|l| Some(*l) != refute).collect();
        for mask in 0u32..1 << others.len() {
            let assume = others.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|p| *p.1);
            let task = SearchTask::new(2, assume, refute).unwrap();
            let cnf = encode_search(&task, EncodeOptions::default()).unwrap();
            let r = solve_builtin(&cnf, &Budget::default());
            assert_eq!(r.status == Status::Sat, oracle_search(&task).unwrap().is_some(), "{task}");
        }
    }
}

#[test]
fn sampled_models_are_residuated_lattices_with_monotone_mult() {
    for n in 4..=5 {
        let models = sampled(n, 40, n as u64);
        assert!(models.len() >= 20, "sampler produced only {}", models.len());
        for b in &models {
            assert!(check_lattice(b).pass());
            assert!(check_residuation(b).pass());
            assert_eq!(mult_monotonicity_failure(b), None);
            for x in 0..n {
                for y in 0..n {
                    let by_meet = b.apply(Op::Meet, x, y) == x;
                    let by_join = b.apply(Op::Join, x, y) == y;
                    assert_eq!(by_meet, by_join);
                }
            }
        }
    }
}

/// Beyond the exhaustive bound: a model fixed on the base variables must
/// extend to a satisfying assignment exactly when it satisfies the task.
#[test]
fn encoder_accepts_exactly_the_models_of_the_task() {
    let opts = EncodeOptions { symmetry: false, redundant: true };
    for n in 4..=5 {
        for b in sampled(n, 12, 100 + n as u64) {
            let holds = satisfied(&b);
            let fails: Vec<Law> = Law::DISTRIBUTIVITY.into_iter().filter(|l| !holds.contains(l)).collect();
            let mut tasks = vec![SearchTask::new(n, holds.iter().copied(), None).unwrap()];
            if let Some(&t) = fails.first() {
                tasks.push(SearchTask::new(n, holds.iter().copied(), Some(t)).unwrap());
                tasks.push(SearchTask::new(n, [t], None).unwrap());
            }
            if let Some(&h) = holds.iter().find(|l| **l != Law::LD) {
                tasks.push(SearchTask::new(n, [], Some(h)).unwrap());
            }
            for task in tasks {
                let mut cnf = encode_search(&task, opts).unwrap();
                let map = cnf.varmap.clone().unwrap();
                let fixed = model_assignment(&b, &map, map.base_count());
                for (i, v) in fixed.iter().enumerate() {
                    let var = i as i32 + 1;
                    cnf.add_clause(&[if *v { var } else { -var }]);
                }
                let r = solve_builtin(&cnf, &Budget::default());
                assert_eq!(r.status == Status::Sat, task.verify(&b).pass(), "{task}");
            }
        }
    }
}

fn arb_perm(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn identity_checks_are_isomorphism_invariant(seed in 0u64..1000, perm in arb_perm(4)) {
        let b = sampled(4, 1, seed).pop().unwrap();
        let c = b.relabel(&perm);
        prop_assert_eq!(satisfied(&b), satisfied(&c));
        prop_assert!(check_residuation(&c).pass());
        prop_assert!(are_isomorphic(&b, &c).unwrap().is_some());
        let (ob, oc) = (derive_order(&b).unwrap(), derive_order(&c).unwrap());
        for x in 0..4 {
            for y in 0..4 {
                prop_assert_eq!(ob.leq(x, y), oc.leq(perm[x], perm[y]));
            }
        }
    }
}
