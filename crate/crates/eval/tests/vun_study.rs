mod common;

use anfm_eval::{estimator_study, validity_std, validity_std_monte_carlo, vun, DescriptorKind, EvalError};
use anfm_graph::{is_connected, Graph};
use proptest::prelude::*;

#[test]
fn samples_from_train_are_not_novel() {
    let train = common::random_graphs(20, 5..=9, 0.4, 1);
    let report = vun(&train[..10], &train, |_| true);
    assert_eq!(report.novel, 0.0);
    assert_eq!(report.vun, 0.0);
}

#[test]
fn duplicates_count_once() {
    let g = Graph::cycle(6);
    let shifted = g.relabel(&[1, 2, 3, 4, 5, 0]);
    let report = vun(&[g.clone(), shifted, Graph::path(6)], &[], |_| true);
    assert!((report.unique - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(report.novel, 1.0);
}

#[test]
fn std_values() {
    assert!((validity_std(0.5, 40) - 0.0790569).abs() < 1e-6);
    assert!((validity_std(0.5, 1024) - 0.015625).abs() < 1e-12);
    assert_eq!(validity_std(1.0, 40), 0.0);
}

#[test]
fn monte_carlo_std_matches_closed_form() {
    let mc = validity_std_monte_carlo(0.5, 40, 20_000, 3);
    assert!((mc / 0.0790 - 1.0).abs() < 0.05, "{mc}");
}

#[test]
fn full_pool_study_has_zero_std() {
    let pool = common::random_graphs(12, 6..=10, 0.3, 2);
    let reference = common::random_graphs(8, 6..=10, 0.3, 3);
    let rows = estimator_study(&pool, &reference, &[12], 5, 0).unwrap();
    assert_eq!(rows.len(), DescriptorKind::ALL.len());
    assert!(rows.iter().all(|r| r.std == 0.0), "{rows:?}");
}

#[test]
fn study_std_shrinks_with_size() {
    let pool = common::random_graphs(200, 6..=12, 0.3, 4);
    let reference = common::random_graphs(50, 6..=12, 0.3, 5);
    let rows = estimator_study(&pool, &reference, &[8, 128], 32, 1).unwrap();
    for kind in DescriptorKind::ALL {
        let r: Vec<_> = rows.iter().filter(|r| r.kind == kind).collect();
        assert!(r[1].std < r[0].std, "{kind:?}: {r:?}");
    }
}

#[test]
fn study_rejects_oversized_subsets() {
    let pool = common::random_graphs(4, 5..=6, 0.5, 6);
    let err = estimator_study(&pool, &pool, &[5], 2, 0).unwrap_err();
    assert!(matches!(err, EvalError::InsufficientSamples { needed: 5, have: 4 }));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn vun_invariant_under_relabeling(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let samples = common::random_graphs(16, 4..=8, 0.4, seed);
        let train = common::random_graphs(16, 4..=8, 0.4, seed ^ 1);
        let relabeled: Vec<Graph> =
            samples.iter().map(|g| g.relabel(&common::random_permutation(g.n(), &mut r))).collect();
        prop_assert_eq!(vun(&samples, &train, is_connected), vun(&relabeled, &train, is_connected));
    }
}
