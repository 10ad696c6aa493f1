use proptest::prelude::*;
use stableq_core::gwtree::{cycle_shift_to_excursion, tree_from_lukasiewicz, LabelledTree, PlaneTree};
use stableq_core::mapmetric::{check_dcirc_dominates, check_identity_to_pointed};
use stableq_core::{build_quadrangulation, validate_quadrangulation, Epsilon};

/// A random offspring vector of length `n + 1` summing to `n`, built by
/// dropping `n` balls into `n + 1` boxes.
fn offspring_vector() -> impl Strategy<Value = Vec<u32>> {
    (1usize..40).prop_flat_map(|n| {
        prop::collection::vec(0..=n, n).prop_map(move |balls| {
            let mut counts = vec![0u32; n + 1];
            for b in balls {
                counts[b] += 1;
            }
            counts
        })
    })
}

fn labelled_tree() -> impl Strategy<Value = LabelledTree> {
    offspring_vector().prop_flat_map(|off| {
        let tree = tree_from_lukasiewicz(&cycle_shift_to_excursion(&off).unwrap()).unwrap();
        let n = tree.n_vertices();
        prop::collection::vec(-1i32..=1, n).prop_map(move |steps| {
            let mut labels = vec![0i32; n];
            for v in 1..n {
                labels[v] = labels[tree.parent(v).unwrap()] + steps[v];
            }
            LabelledTree::new(tree.clone(), labels).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn cycle_shift_is_a_rotation_and_round_trips(off in offspring_vector()) {
        let exc = cycle_shift_to_excursion(&off).unwrap();
        let rotated = exc.offspring();
        let len = off.len();
        prop_assert!((0..len).any(|s| (0..len).all(|k| rotated[k] == off[(s + k) % len])));
        let tree = tree_from_lukasiewicz(&exc).unwrap();
        prop_assert_eq!(tree.lukasiewicz(), exc.clone());
        prop_assert_eq!(PlaneTree::from_offspring(&rotated).unwrap(), tree);
    }

    #[test]
    fn every_labelled_tree_maps_to_a_valid_quadrangulation(lt in labelled_tree(), plus in any::<bool>()) {
        let eps = if plus { Epsilon::Plus } else { Epsilon::Minus };
        let q = build_quadrangulation(&lt, eps).unwrap();
        let report = validate_quadrangulation(&q);
        prop_assert!(report.all_passed(), "{:?}", report.failures().collect::<Vec<_>>());
        prop_assert_eq!(q.n_faces(), lt.n_edges());
        check_identity_to_pointed(&q, &lt).unwrap();
        let n = lt.tree().n_vertices() as u32;
        let pairs: Vec<(u32, u32)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
        check_dcirc_dominates(&q, &lt, &pairs).unwrap();
    }
}
