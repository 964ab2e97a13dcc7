mod common;

use common::{arb_alpha, arb_step, arb_system, q};
use mvdyn::ergodic::{
    branching_measure, find_disjoint_invariant_pair, orbit_sample, recurrence_tree, CellGraph, OrbitPoint,
};
use mvdyn::finiteoracle::{FiniteSystem, Statement};
use mvdyn::fractal::{cantor_fp_compare, cantor_map, ifs_overlap_map, Similarity};
use mvdyn::kernel::pushforward;
use mvdyn::pcfunc::PCFunction;
use mvdyn::transfer::{duality_check, fp_apply};
use mvdyn::{gallery, IntervalSet, MultiSystem, Rational, Scalar};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn arb_cells(n: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::btree_set(0..n, 0..n).prop_map(|s| s.into_iter().collect())
}

fn is_subset(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|i| b.binary_search(i).is_ok())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn prune_is_a_monotone_fixpoint((name, sys) in arb_system(), a in arb_cells(24), b in arb_cells(24)) {
        let graph = CellGraph::from_system(&sys, 24).unwrap();
        let pa = graph.prune(&a);
        prop_assert_eq!(graph.prune(&pa), pa.clone(), "{}", name);
        prop_assert!(is_subset(&pa, &a));
        prop_assert!(graph.is_weakly_invariant(&pa));
        let union: Vec<usize> = {
            let mut u: Vec<usize> = a.iter().chain(&b).copied().collect();
            u.sort_unstable();
            u.dedup();
            u
        };
        prop_assert!(is_subset(&pa, &graph.prune(&union)), "{}", name);
    }

    #[test]
    fn orbit_steps_follow_the_map((name, sys) in arb_system(), k in 0i64..=1000, seed in any::<u64>()) {
        let x = Rational::ratio(k, 1000);
        let orbit = orbit_sample(&sys, &x, 12, seed, 6).unwrap();
        prop_assert_eq!(orbit.len(), 12);
        for w in orbit.windows(2) {
            match &w[0] {
                OrbitPoint::Exact(p) => {
                    let images = sys.evaluate(p).unwrap();
                    match &w[1] {
                        OrbitPoint::Exact(y) => prop_assert!(images.contains(y), "{}", name),
                        OrbitPoint::Float(y) => prop_assert!(images.iter().any(|v| (v.to_f64() - y).abs() <= 1e-12), "{}", name),
                    }
                }
                OrbitPoint::Float(p) => {
                    let fsys = sys.to_f64().unwrap();
                    let images = fsys.evaluate(&p.clamp(0.0, 1.0)).unwrap();
                    let y = w[1].to_f64();
                    prop_assert!(images.iter().any(|v| (v.clamp(0.0, 1.0) - y).abs() <= 1e-12), "{}", name);
                }
            }
        }
        prop_assert!(orbit[..7].iter().all(OrbitPoint::is_exact));
        prop_assert!(orbit[7..].iter().all(|p| !p.is_exact()));
    }

    #[test]
    fn recurrence_is_monotone_in_depth_and_budget(k in 0i64..250, depth in 1usize..12, budget in 1usize..400) {
        let sys = gallery::example2::<Rational>();
        let b = IntervalSet::parse("0,1/4").unwrap();
        let x = Rational::ratio(k, 1000);
        let base = recurrence_tree(&sys, &x, &b, depth, budget, 64).unwrap();
        let deeper = recurrence_tree(&sys, &x, &b, depth + 1, budget, 64).unwrap();
        let wider = recurrence_tree(&sys, &x, &b, depth, budget * 2, 64).unwrap();
        prop_assert!(base.best_return_count <= base.depth);
        prop_assert!(base.nodes_explored <= budget);
        prop_assert!(deeper.best_return_count >= base.best_return_count || base.budget_exhausted);
        prop_assert!(wider.best_return_count >= base.best_return_count);
    }

    #[test]
    fn finite_pushforward_conserves_mass(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = FiniteSystem::random(&mut rng, 8, 3);
        let total = sys.pushforward().into_iter().fold(q("0"), |a, b| a + b);
        prop_assert_eq!(total, q("1"));
    }

    #[test]
    fn three_statements_agree(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = FiniteSystem::random(&mut rng, 8, 3);
        prop_assume!(sys.is_nonsingular());
        let exact = sys.ergodic(Statement::Exact).unwrap();
        prop_assert_eq!(sys.ergodic(Statement::Null).unwrap(), exact);
        prop_assert_eq!(sys.ergodic(Statement::DisjointPair).unwrap(), exact);
    }

    #[test]
    fn invariant_finite_systems_fix_the_constant(seed in any::<u64>()) {
        let sys = regular_system(seed);
        prop_assert_eq!(sys.pushforward(), sys.weights().to_vec());
        let m = sys.fp_matrix();
        for row in &m {
            prop_assert_eq!(row.iter().fold(q("0"), |a, b| a + b), q("1"));
        }
        if sys.ergodic(Statement::Exact).unwrap() {
            prop_assert_eq!(sys.fixed_space_dimension(), 1);
        }
    }

    #[test]
    fn cantor_operator_is_markov_and_adjoint(alpha in arb_alpha(), f in arb_step(true), g in arb_step(false)) {
        let sys = cantor_map(&alpha).unwrap();
        let pf = fp_apply(&sys, &f).unwrap();
        prop_assert_eq!(pf.integral(), f.integral());
        prop_assert!(pf.is_nonnegative());
        prop_assert_eq!(duality_check(&sys, &f, &g).unwrap(), q("0"));
        let cmp = cantor_fp_compare(&alpha, &f).unwrap();
        prop_assert_eq!(cmp.generic_mass, f.integral());
        prop_assert_eq!(cmp.generic_duality_residual, q("0"));
    }

    #[test]
    fn symmetric_overlap_has_multiplicity_two_on_the_overlap(alpha in arb_alpha()) {
        prop_assume!(alpha >= q("1/2"));
        let shift = q("1") - alpha.clone();
        let sys = ifs_overlap_map(&[
            Similarity::new(alpha.clone(), q("0")).unwrap(),
            Similarity::new(alpha.clone(), shift.clone()).unwrap(),
        ])
        .unwrap();
        let cells = sys.multiplicity_partition();
        prop_assert_eq!(cells.cell(2), IntervalSet::span(shift, alpha));
        prop_assert_eq!(branching_measure(&sys), cells.cell(2).measure());
    }

    #[test]
    fn branching_measure_is_the_complement_of_single_cover((name, sys) in arb_system()) {
        let single = sys.multiplicity_partition().cell(1).measure();
        prop_assert_eq!(branching_measure(&sys), q("1") - single, "{}", name);
    }
}

/// `n` points with uniform weights and `succ(i) = {π(i+k) : k < d}`; every
/// point has in-degree `d`, so the weights are invariant.
fn regular_system(seed: u64) -> FiniteSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rand::Rng::gen_range(&mut rng, 1..=8usize);
    let d = rand::Rng::gen_range(&mut rng, 1..=n.min(3));
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let succ = (0..n).map(|i| (0..d).map(|k| perm[(i + k) % n]).collect()).collect();
    FiniteSystem::new(vec![Rational::ratio(1, n as i64); n], succ).unwrap()
}

#[test]
fn returned_pairs_keep_an_edge_inside() {
    for (name, sys) in common::systems() {
        for n in [16, 64] {
            let Some(pair) = find_disjoint_invariant_pair(&sys, n).unwrap() else { continue };
            let graph = CellGraph::from_system(&sys, n).unwrap();
            for set in [&pair.first, &pair.second] {
                assert!(!set.is_empty(), "{name}");
                for &i in set.iter() {
                    assert!(graph.successors(i).iter().any(|j| set.contains(j)), "{name} cell {i} at {n}");
                }
            }
            assert!(pair.first.iter().all(|i| !pair.second.contains(i)), "{name}");
        }
    }
}

#[test]
fn gallery_systems_round_trip_through_json() {
    let mut all = common::systems();
    all.push(("example5".into(), gallery::example5()));
    for (name, sys) in all {
        let text = serde_json::to_string(&sys).unwrap();
        let back: MultiSystem = serde_json::from_str(&text).unwrap();
        assert_eq!(back, sys, "{name}");
        assert_eq!(back.branches(), sys.branches(), "{name}");
    }
}

#[test]
fn lebesgue_invariance_across_the_cantor_family() {
    let one = PCFunction::constant(q("1"));
    for alpha in ["1/3", "1/2", "2/3"] {
        let sys = cantor_map(&q(alpha)).unwrap();
        assert_eq!(pushforward(&sys, &one).unwrap().simplify(), one, "{alpha}");
    }
    for alpha in ["2/5", "3/5", "3/7", "4/7"] {
        let sys = cantor_map(&q(alpha)).unwrap();
        assert_ne!(pushforward(&sys, &one).unwrap().simplify(), one, "{alpha}");
    }
}
