mod common;

use anfm_graph::datasets::{
    generate, load_gds, load_jsonl, read_gds, sample_family, save_gds, save_jsonl, valid, write_gds, DatasetError,
    DatasetSpec, Family,
};
use anfm_graph::{is_connected, is_lobster, is_planar};
use common::{random_graph, rng};

#[test]
fn planar_samples_have_64_nodes_and_are_valid() {
    let ds = generate(&DatasetSpec::new(Family::Planar, 3).with_counts(20, 4, 4)).unwrap();
    for r in ds.train.iter().chain(&ds.val).chain(&ds.test) {
        assert_eq!(r.graph.n(), 64);
        assert!(is_planar(&r.graph) && is_connected(&r.graph));
        assert!(valid(&r.graph, Family::Planar));
    }
}

#[test]
fn sbm_samples_stay_in_size_range() {
    let ds = generate(&DatasetSpec::new(Family::Sbm, 5).with_counts(20, 2, 2)).unwrap();
    for r in &ds.train {
        assert!((40..=200).contains(&r.graph.n()), "n = {}", r.graph.n());
        assert!(is_connected(&r.graph));
    }
}

#[test]
fn sbm_surrogate_accepts_most_generated_graphs() {
    let spec = DatasetSpec::new(Family::Sbm, 17).with_counts(60, 1, 1);
    let ds = generate(&spec).unwrap();
    let accepted = ds.train.iter().filter(|r| valid(&r.graph, Family::Sbm)).count();
    assert!(accepted as f64 >= 0.9 * ds.train.len() as f64, "accepted {accepted} of {}", ds.train.len());
}

#[test]
fn lobster_samples_are_lobsters_within_window() {
    let mut spec = DatasetSpec::new(Family::Lobster, 9).with_counts(50, 5, 5);
    spec.lobster.mean_backbone = 6.0;
    spec.lobster.max_nodes = 30;
    let ds = generate(&spec).unwrap();
    for r in &ds.train {
        assert!(is_lobster(&r.graph));
        assert!((10..=30).contains(&r.graph.n()));
    }
    let default = generate(&DatasetSpec::new(Family::Lobster, 1).with_counts(10, 1, 1)).unwrap();
    assert!(default.train.iter().all(|r| is_lobster(&r.graph) && (10..=100).contains(&r.graph.n())));
}

#[test]
fn dense_random_graphs_are_not_planar_valid() {
    let mut r = rng(2);
    for _ in 0..5 {
        let g = random_graph(64, 0.5, &mut r);
        assert!(!valid(&g, Family::Planar));
        assert!(!valid(&g, Family::Lobster));
        assert!(!valid(&g, Family::Sbm));
    }
}

#[test]
fn generation_is_reproducible_to_the_byte() {
    let spec = DatasetSpec::new(Family::Lobster, 42).with_counts(30, 3, 3);
    let a = write_gds(&generate(&spec).unwrap().train_graphs()).unwrap();
    let b = write_gds(&generate(&spec).unwrap().train_graphs()).unwrap();
    assert_eq!(a, b);
    let other = write_gds(&generate(&DatasetSpec { seed: 43, ..spec }).unwrap().train_graphs()).unwrap();
    assert_ne!(a, other);
}

#[test]
fn per_graph_seeds_do_not_depend_on_split_sizes() {
    let small = generate(&DatasetSpec::new(Family::Planar, 8).with_counts(3, 1, 1)).unwrap();
    let large = generate(&DatasetSpec::new(Family::Planar, 8).with_counts(10, 1, 1)).unwrap();
    assert_eq!(small.train_graphs(), large.train_graphs()[..3].to_vec());
    let g = sample_family(&small.spec, small.train[1].seed).unwrap();
    assert_eq!(g, small.train[1].graph);
}

#[test]
fn files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = DatasetSpec::new(Family::Lobster, 4).with_counts(100, 1, 1);
    spec.lobster.mean_backbone = 10.0;
    let graphs = generate(&spec).unwrap().train_graphs();
    let bin = dir.path().join("train.gds");
    save_gds(&bin, &graphs).unwrap();
    assert_eq!(load_gds(&bin).unwrap(), graphs);
    let json = dir.path().join("train.jsonl");
    save_jsonl(&json, &graphs).unwrap();
    assert_eq!(load_jsonl(&json).unwrap(), graphs);

    let empty = dir.path().join("empty.gds");
    std::fs::write(&empty, b"").unwrap();
    assert!(matches!(load_gds(&empty), Err(DatasetError::Header(0))));
    let bytes = std::fs::read(&bin).unwrap();
    assert!(matches!(read_gds(&bytes[..bytes.len() - 3]), Err(DatasetError::Truncated { .. })));
}

#[test]
fn invalid_specs_are_rejected() {
    let spec = DatasetSpec::new(Family::Planar, 0).with_counts(0, 1, 1);
    assert!(matches!(generate(&spec), Err(DatasetError::InvalidSpec(_))));
}
