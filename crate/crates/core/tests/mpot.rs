mod common;

use common::*;
use wmpot::cot::{continuous_transfer, cot_hop, TransferPath};
use wmpot::mpot::{bidirectional_refine, mpot_final_hop, multi_path_transfer, refine_paths, RefineMode};
use wmpot::{Domain, Error, SolverConfig};

fn cfg() -> SolverConfig {
    SolverConfig {
        sinkhorn_tol: 1e-10,
        ..Default::default()
    }
}

struct Chain {
    source: Domain,
    mids: Vec<Domain>,
    target: Domain,
}

fn chain(seed: u64) -> Chain {
    let n = 15;
    Chain {
        source: moons_at(n, 0.1, seed, 0.0),
        mids: [18.0, 36.0, 54.0, 72.0]
            .iter()
            .enumerate()
            .map(|(k, &a)| moons_at(n, 0.1, seed + 1 + k as u64, a))
            .collect(),
        target: moons_at(n, 0.1, seed + 9, 90.0),
    }
}

fn paths(c: &Chain, cfg: &SolverConfig) -> (TransferPath, TransferPath) {
    let p1: Vec<&Domain> = c.mids.iter().collect();
    let p2 = vec![&c.mids[1], &c.mids[3]];
    (
        continuous_transfer(&c.source, &p1, &c.target, cfg).unwrap(),
        continuous_transfer(&c.source, &p2, &c.target, cfg).unwrap(),
    )
}

#[test]
fn without_consistency_the_refined_hop_is_the_sequential_hop() {
    let cfg = SolverConfig { eta_p: 0.0, ..cfg() };
    let c = chain(1);
    let (p1, p2) = paths(&c, &cfg);
    let (mapped, prev) = p1.before_final_hop();
    let w = p1.source_weights.view();
    let refined = mpot_final_hop(mapped, w, prev, &c.target, p2.plans.last().unwrap(), &cfg).unwrap();
    let sequential = cot_hop(mapped, w, prev, &c.target, &cfg).unwrap();
    let diff = max_abs_diff(refined.plan.values(), sequential.plan.values());
    assert!(diff < 1e-8, "plans differ by {diff}");
    assert_eq!(p1.plans.last().unwrap(), &sequential.plan);
}

#[test]
fn agreeing_paths_leave_the_sequential_plan_fixed() {
    let cfg = cfg();
    let c = chain(2);
    let (p1, _) = paths(&c, &cfg);
    let (mapped, prev) = p1.before_final_hop();
    let own = p1.plans.last().unwrap();
    let refined = mpot_final_hop(mapped, p1.source_weights.view(), prev, &c.target, own, &cfg).unwrap();
    let diff = max_abs_diff(refined.plan.values(), own.values());
    assert!(diff < 1e-6, "plan moved by {diff}");
}

#[test]
fn vanishing_consistency_weight_approaches_the_sequential_plan() {
    let cfg = SolverConfig { eta_p: 1e-8, ..cfg() };
    let c = chain(3);
    let (p1, p2) = paths(&c, &cfg);
    let (mapped, prev) = p1.before_final_hop();
    let refined =
        mpot_final_hop(mapped, p1.source_weights.view(), prev, &c.target, p2.plans.last().unwrap(), &cfg).unwrap();
    let diff = max_abs_diff(refined.plan.values(), p1.plans.last().unwrap().values());
    assert!(diff < 1e-4, "plans differ by {diff}");
}

#[test]
fn bidirectional_refinement_is_symmetric_under_swapping_paths() {
    let cfg = cfg();
    let c = chain(4);
    let (p1, p2) = paths(&c, &cfg);
    let (mapped, prev) = p1.before_final_hop();
    let w = p1.source_weights.view();
    let (g1, g2) = (p1.plans.last().unwrap(), p2.plans.last().unwrap());
    let ab = bidirectional_refine(mapped, w, prev, &c.target, g1, g2, &cfg).unwrap();
    let ba = bidirectional_refine(mapped, w, prev, &c.target, g2, g1, &cfg).unwrap();
    assert_eq!(ab.plan.values(), ba.plan.values());
    assert_eq!(ab.trace, ba.trace);
}

#[test]
fn bidirectional_with_identical_paths_matches_one_sided_refinement() {
    let cfg = SolverConfig {
        outer_max_iter: 2000,
        ..cfg()
    };
    let c = chain(5);
    let (p1, p2) = paths(&c, &cfg);
    let (mapped, prev) = p1.before_final_hop();
    let w = p1.source_weights.view();
    let g = p2.plans.last().unwrap();
    let both = bidirectional_refine(mapped, w, prev, &c.target, g, g, &cfg).unwrap();
    let one = mpot_final_hop(mapped, w, prev, &c.target, g, &cfg).unwrap();
    assert!(both.converged && one.converged);
    let diff = max_abs_diff(both.plan.values(), one.plan.values());
    assert!(diff < 1e-6, "plans differ by {diff}");
}

#[test]
fn refinement_keeps_marginals_and_lowers_its_objective() {
    let cfg = cfg();
    let c = chain(6);
    for mode in RefineMode::ALL {
        let p1: Vec<&Domain> = c.mids.iter().collect();
        let p2 = vec![&c.mids[1], &c.mids[3]];
        let r = multi_path_transfer(&c.source, &p1, &p2, &c.target, mode, &cfg).unwrap();
        assert!(r.refined_plan.marginal_violation() < 1e-7, "{}", mode.name());
        assert!(r.objective_trace.iter().all(|v| v.is_finite()));
        let first = r.objective_trace[0];
        assert!(*r.objective_trace.last().unwrap() <= first + 1e-12, "{}", mode.name());
        assert_eq!(r.mapped_source.dim(), c.source.features().dim());
        assert_eq!(r.mode, mode);
    }
}

#[test]
fn paths_from_different_sources_are_rejected() {
    let cfg = cfg();
    let a = chain(7);
    let b = chain(8);
    let p1 = continuous_transfer(&a.source, &[], &a.target, &cfg).unwrap();
    let p2 = continuous_transfer(&b.source, &[], &a.target, &cfg).unwrap();
    assert!(matches!(
        refine_paths(p1, p2, &a.target, RefineMode::Bidirectional, &cfg),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn saved_result_contains_both_paths_and_the_refinement() {
    let cfg = cfg();
    let c = chain(9);
    let dir = tempfile::tempdir().unwrap();
    let r = multi_path_transfer(&c.source, &[&c.mids[0]], &[&c.mids[1]], &c.target, RefineMode::P1RefinesP2, &cfg)
        .unwrap();
    r.save(dir.path()).unwrap();
    for f in [
        "path1/plan_1.csv",
        "path2/diagnostics.json",
        "refined_plan.csv",
        "refined_plan.json",
        "refined_mapped.csv",
        "refinement.json",
    ] {
        assert!(dir.path().join(f).exists(), "missing {f}");
    }
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("refinement.json")).unwrap()).unwrap();
    assert_eq!(meta["mode"], "p1_refines_p2");
}
