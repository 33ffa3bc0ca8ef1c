mod common;

use common::*;
use wmpot::curriculum::{build_curriculum, DiscardReason};
use wmpot::{Domain, SolverConfig};

fn cfg() -> SolverConfig {
    SolverConfig::default()
}

#[test]
fn rotated_moons_line_up_by_angle() {
    for seed in 0..2 {
        let source = moons_at(150, 0.1, 100 * seed, 0.0);
        let target = moons_at(150, 0.1, 100 * seed + 1, 90.0);
        let candidates: Vec<Domain> = [54.0, 18.0, 135.0, 72.0, 36.0]
            .iter()
            .enumerate()
            .map(|(k, &a)| moons_at(150, 0.1, 100 * seed + 2 + k as u64, a))
            .collect();
        let cur = build_curriculum(&source, &target, &candidates, &cfg()).unwrap();
        assert_eq!(cur.ids(), ["rot18", "rot36", "rot54", "rot72"], "seed {seed}");
        assert_eq!(cur.discarded.len(), 1);
        assert_eq!(cur.discarded[0].id, "rot135");
        assert_eq!(cur.discarded[0].reason, DiscardReason::BeyondTarget);
        assert!(cur.discarded[0].w.unwrap() > cur.w_target);
        assert!(cur.ordered.windows(2).all(|p| p[0].w <= p[1].w));
        let resolved = cur.resolve(&candidates).unwrap();
        assert_eq!(resolved[0].id(), "rot18");
    }
}

#[test]
fn order_does_not_depend_on_candidate_order() {
    let source = moons_at(20, 0.1, 1, 0.0);
    let target = moons_at(20, 0.1, 2, 90.0);
    let mut candidates: Vec<Domain> = [20.0, 40.0, 60.0, 80.0]
        .iter()
        .enumerate()
        .map(|(k, &a)| moons_at(20, 0.1, 3 + k as u64, a))
        .collect();
    let forward = build_curriculum(&source, &target, &candidates, &cfg()).unwrap();
    candidates.reverse();
    candidates.swap(0, 2);
    let shuffled = build_curriculum(&source, &target, &candidates, &cfg()).unwrap();
    assert_eq!(forward.ids(), shuffled.ids());
    assert_eq!(forward.w_target, shuffled.w_target);
}

#[test]
fn copy_of_the_source_comes_first() {
    let source = moons_at(20, 0.1, 5, 0.0);
    let target = moons_at(20, 0.1, 6, 90.0);
    let candidates = vec![
        moons_at(20, 0.1, 7, 45.0),
        source.clone().with_id("copy"),
        moons_at(20, 0.1, 8, 10.0),
    ];
    let cur = build_curriculum(&source, &target, &candidates, &cfg()).unwrap();
    assert_eq!(cur.ids()[0], "copy");
}

#[test]
fn translated_copies_are_ordered_by_shift() {
    let source = moons_at(20, 0.1, 9, 0.0);
    let shifted = |s: f64| {
        let x = source.features().to_owned() + s;
        source.with_features(x).unwrap().with_id(format!("shift{s}"))
    };
    let target = shifted(3.0);
    let candidates: Vec<Domain> = [2.5, 0.5, 4.0, 1.5, 1.0].iter().map(|&s| shifted(s)).collect();
    let cur = build_curriculum(&source, &target, &candidates, &cfg()).unwrap();
    assert_eq!(cur.ids(), ["shift0.5", "shift1", "shift1.5", "shift2.5"]);
    assert_eq!(cur.discarded[0].id, "shift4");
}

#[test]
fn candidate_at_the_target_distance_is_kept() {
    let source = moons_at(10, 0.1, 10, 0.0);
    let target = moons_at(10, 0.1, 11, 60.0);
    let cur = build_curriculum(&source, &target, &[target.clone().with_id("same")], &cfg()).unwrap();
    assert_eq!(cur.ids(), ["same"]);
    assert_eq!(cur.ordered[0].w, cur.w_target);
}

#[test]
fn saved_curriculum_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let source = moons_at(10, 0.1, 12, 0.0);
    let target = moons_at(10, 0.1, 13, 90.0);
    let far = source.with_features(source.features().to_owned() + 10.0).unwrap().with_id("far");
    let cur = build_curriculum(&source, &target, &[far], &cfg()).unwrap();
    assert!(cur.ordered.is_empty());
    assert_eq!(cur.flags.len(), 1);
    let path = dir.path().join("curriculum.json");
    cur.save(&path).unwrap();
    let back: wmpot::curriculum::CurriculumResult =
        serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(back, cur);
}
