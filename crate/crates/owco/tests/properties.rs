//! Randomized invariants. Instances come either from the corpus generator,
//! keyed by a seed so failures replay, or from raw proptest strategies.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use owco::corpus::{random_block_vector, random_valid_instance, CorpusParams};
use owco::graph::FunctionalGraph;
use owco::moments::{owco_moments, stieltjes_test, MomentSequence};
use owco::operators::owco_build;
use owco::spaces::counting_reduction;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The counting reduction keeps the reported spectrum of checks: the
    /// operator norm survives up to roundoff and the moment sequences do
    /// not move at all.
    #[test]
    fn reduction_preserves_norm_and_moments(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (spec, _) = random_valid_instance(&mut rng, &CorpusParams::default()).unwrap();
        let reduced = counting_reduction(&spec);
        prop_assert!(reduced.is_counting());

        let n0 = owco_build(&spec).operator_norm();
        let n1 = owco_build(&reduced).operator_norm();
        prop_assert!((n0 - n1).abs() <= 1e-12 * n0.max(1.0), "{n0} vs {n1}");

        for x in 0..spec.n_vertices() {
            for w in 0..spec.n_w() {
                let a = owco_moments(&spec, x, w, 4).unwrap();
                let b = owco_moments(&reduced, x, w, 4).unwrap();
                prop_assert_eq!(a.values(), b.values());
            }
        }
    }

    /// Taking the adjoint twice is the identity on the stored entries, and
    /// the adjoint has the same norm.
    #[test]
    fn adjoint_is_a_norm_preserving_involution(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (spec, _) = random_valid_instance(&mut rng, &CorpusParams::default()).unwrap();
        let a = owco_build(&spec);
        let aa = a.adjoint().adjoint();
        let dim = spec.space().dim();
        for i in 0..dim {
            for j in 0..dim {
                prop_assert_eq!(a.entry(i, j), aa.entry(i, j));
            }
        }
        let na = a.operator_norm();
        let ns = a.adjoint().operator_norm();
        prop_assert!((na - ns).abs() <= 1e-12 * na.max(1.0), "{na} vs {ns}");
    }

    /// Iterated norms never outrun the operator norm.
    #[test]
    fn power_norms_respect_the_operator_norm(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (spec, _) = random_valid_instance(&mut rng, &CorpusParams::default()).unwrap();
        let norm = owco_build(&spec).operator_norm();
        let f = random_block_vector(&mut rng, spec.n_vertices(), spec.n_w());
        let norms = owco::moments::lambert_moments(&spec, &f, 5).unwrap();
        for (n, &value) in norms.iter().enumerate() {
            let bound = norm.powi(2 * n as i32) * norms[0];
            prop_assert!(value <= bound * (1.0 + 1e-12) + 1e-300, "n = {n}: {value} > {bound}");
        }
    }

    /// Every trajectory of a functional graph ends on a cycle, and the
    /// cycles are vertex-disjoint.
    #[test]
    fn trajectories_terminate_on_disjoint_cycles(
        phi in (2..12usize).prop_flat_map(|n| proptest::collection::vec(0..n, n)),
    ) {
        let n = phi.len();
        let graph = FunctionalGraph::new(phi).unwrap();
        let cycles = graph.cycles();
        prop_assert!(!cycles.is_empty());

        let mut on_cycle = vec![false; n];
        for cycle in &cycles {
            for &x in cycle {
                prop_assert!(!on_cycle[x], "vertex {x} on two cycles");
                on_cycle[x] = true;
            }
            // the cycle is closed
            for (i, &x) in cycle.iter().enumerate() {
                prop_assert_eq!(graph.phi()[x], cycle[(i + 1) % cycle.len()]);
            }
        }
        for x in 0..n {
            prop_assert!(on_cycle[graph.iterate(x, n).unwrap()]);
        }
    }

    /// Moment sequences of genuine atomic measures pass the half-line test,
    /// and the even-ratio support bound never exceeds the top atom.
    #[test]
    fn atomic_moments_are_stieltjes_with_a_tight_bound(
        pairs in proptest::collection::vec((0.1..10.0f64, 0.05..1.0f64), 1..4),
        order in 4..10usize,
    ) {
        let atoms: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        for (i, &t) in atoms.iter().enumerate() {
            for &u in &atoms[..i] {
                prop_assume!((t - u).abs() >= 0.2);
            }
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let a: Vec<f64> = (0..=order)
            .map(|n| pairs.iter().map(|&(t, w)| w / total * t.powi(n as i32)).sum())
            .collect();
        let seq = MomentSequence::new(a).unwrap();
        let verdict = stieltjes_test(&seq, 1e-9).unwrap();
        prop_assert!(verdict.is_stieltjes, "{verdict:?}");
        if let Some(bound) = verdict.support.value {
            let top = atoms.iter().cloned().fold(0.0f64, f64::max);
            prop_assert!(bound <= top * (1.0 + 1e-12), "{bound} > {top}");
        }
    }
}
