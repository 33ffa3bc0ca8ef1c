//! Multi-path refinement of the final hop.
//!
//! Two transfer paths reach the target through different intermediate domains. The final
//! plan of one path is refined with a path-consistency term tying its barycentric map to the
//! other path's, or a single plan is refined against both (bidirectional mode).

use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::config::{ConsistencyAnchor, SolverConfig};
use crate::cot::{check_positive, continuous_transfer, time_term, PrevHop, TransferPath};
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::ot::{barycentric_map_points, cost_between, CouplingPlan};
use crate::prox::{forward_backward, Start};

fn check_consistency(gamma: ArrayView2<'_, f64>, other: ArrayView2<'_, f64>, x: ArrayView2<'_, f64>) -> Result<()> {
    if gamma.dim() != other.dim() {
        return Err(Error::ShapeMismatch(format!(
            "plans are {:?} and {:?}",
            gamma.dim(),
            other.dim()
        )));
    }
    if gamma.ncols() != x.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "plans have {} columns but there are {} anchor points",
            gamma.ncols(),
            x.nrows()
        )));
    }
    Ok(())
}

/// `N_S (P - P_other) X`.
fn map_gap(gamma: ArrayView2<'_, f64>, other: ArrayView2<'_, f64>, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    check_consistency(gamma, other, x)?;
    Ok((&gamma - &other).dot(&x) * gamma.nrows() as f64)
}

/// `|| N_S P X - N_S P_other X ||_F^2`.
pub fn path_consistency(gamma: ArrayView2<'_, f64>, other: ArrayView2<'_, f64>, x: ArrayView2<'_, f64>) -> Result<f64> {
    Ok(map_gap(gamma, other, x)?.iter().map(|v| v * v).sum())
}

/// `2 N_S^2 (P - P_other) X X^T`.
pub fn grad_path_consistency(
    gamma: ArrayView2<'_, f64>,
    other: ArrayView2<'_, f64>,
    x: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    let gap = map_gap(gamma, other, x)?;
    Ok(gap.dot(&x.t()) * (2.0 * gamma.nrows() as f64))
}

/// The anchor points of the consistency term for the configured [`ConsistencyAnchor`].
fn anchor<'s>(
    x_n: &'s ArrayView2<'_, f64>,
    prev: &'s Option<PrevHop<'_>>,
    cfg: &SolverConfig,
) -> Result<ArrayView2<'s, f64>> {
    match (cfg.anchor, prev) {
        (ConsistencyAnchor::Target, _) => Ok(x_n.view()),
        (ConsistencyAnchor::LastIntermediate, Some(p)) if p.points.nrows() == x_n.nrows() => Ok(p.points.view()),
        (ConsistencyAnchor::LastIntermediate, Some(p)) => Err(Error::ShapeMismatch(format!(
            "last-intermediate anchor has {} points but the target has {}",
            p.points.nrows(),
            x_n.nrows()
        ))),
        (ConsistencyAnchor::LastIntermediate, None) => Err(Error::InvalidArgument(
            "last-intermediate anchor needs a previous hop".into(),
        )),
    }
}

/// Value and gradient of `eta_t R_t + eta_p sum_k w_k R_p(., others_k)` at `gamma`. The
/// consistency terms are accumulated in the order given.
fn smooth_terms(
    gamma: ArrayView2<'_, f64>,
    others: &[(f64, ArrayView2<'_, f64>)],
    prev: Option<PrevHop<'_>>,
    x_n: ArrayView2<'_, f64>,
    cfg: &SolverConfig,
) -> Result<(f64, Array2<f64>)> {
    let x = anchor(&x_n, &prev, cfg)?;
    let ns = gamma.nrows() as f64;
    let mut value = 0.0;
    let mut grad = Array2::<f64>::zeros(gamma.raw_dim());
    if cfg.eta_p > 0.0 {
        for &(w, other) in others {
            let gap = map_gap(gamma, other, x)?;
            value += w * cfg.eta_p * gap.iter().map(|v| v * v).sum::<f64>();
            grad += &(gap.dot(&x.t()) * (2.0 * ns * w * cfg.eta_p));
        }
    } else {
        for &(_, other) in others {
            check_consistency(gamma, other, x)?;
        }
    }
    let (t_val, t_grad) = time_term(gamma, prev, x_n, cfg.eta_t)?;
    Ok((value + t_val, grad + t_grad))
}

/// `eta_t grad R_t + eta_p grad R_p - lambda log(P)`.
///
/// Without `other` the consistency term is dropped and this equals [`crate::cot::grad_j`].
pub fn grad_j(
    gamma: ArrayView2<'_, f64>,
    other: Option<ArrayView2<'_, f64>>,
    prev: Option<PrevHop<'_>>,
    x_n: ArrayView2<'_, f64>,
    cfg: &SolverConfig,
) -> Result<Array2<f64>> {
    check_positive(gamma)?;
    let others: Vec<(f64, ArrayView2<'_, f64>)> = other.into_iter().map(|o| (1.0, o)).collect();
    let (_, mut grad) = smooth_terms(gamma, &others, prev, x_n, cfg)?;
    grad.zip_mut_with(&gamma, |g, &p| *g -= cfg.lambda * p.ln());
    Ok(grad)
}

/// A refined final-hop plan with its outer-loop objective trace.
#[derive(Debug, Clone)]
pub struct Refinement {
    pub plan: CouplingPlan,
    pub trace: Vec<f64>,
    pub outer_iterations: usize,
    pub converged: bool,
}

fn check_final_hop(mapped: ArrayView2<'_, f64>, weights: ArrayView1<'_, f64>, target: &Domain) -> Result<()> {
    if mapped.nrows() != weights.len() || mapped.ncols() != target.dim() {
        return Err(Error::ShapeMismatch(format!(
            "mapped source is {:?} with {} weights; target dimension is {}",
            mapped.dim(),
            weights.len(),
            target.dim()
        )));
    }
    Ok(())
}

/// One-sided refinement: the final hop of one path with a consistency term toward `gamma_other`,
/// the other path's final plan. Starts from the plain entropic plan, like [`crate::cot::cot_hop`].
pub fn mpot_final_hop(
    mapped_source: ArrayView2<'_, f64>,
    weights: ArrayView1<'_, f64>,
    prev: Option<PrevHop<'_>>,
    target: &Domain,
    gamma_other: &CouplingPlan,
    cfg: &SolverConfig,
) -> Result<Refinement> {
    check_final_hop(mapped_source, weights, target)?;
    let cost = cost_between(mapped_source, target.features(), true)?;
    let others = [(1.0, gamma_other.values())];
    let x_n = target.features();
    let run = forward_backward(
        cost.values(),
        weights,
        target.weights(),
        Start::Sinkhorn,
        |p| smooth_terms(p, &others, prev, x_n, cfg),
        cfg,
    )?;
    Ok(Refinement {
        plan: run.plan,
        trace: run.trace,
        outer_iterations: run.outer_iterations,
        converged: run.converged,
    })
}

/// Bidirectional refinement: a single plan minimizing the hop objective plus
/// `lambda1 R_p(., gamma_p2) + lambda2 R_p(., gamma_p1)`, started from the uniform plan.
pub fn bidirectional_refine(
    mapped_source: ArrayView2<'_, f64>,
    weights: ArrayView1<'_, f64>,
    prev: Option<PrevHop<'_>>,
    target: &Domain,
    gamma_p1: &CouplingPlan,
    gamma_p2: &CouplingPlan,
    cfg: &SolverConfig,
) -> Result<Refinement> {
    check_final_hop(mapped_source, weights, target)?;
    let cost = cost_between(mapped_source, target.features(), true)?;
    let others = [(cfg.lambda1, gamma_p2.values()), (cfg.lambda2, gamma_p1.values())];
    let x_n = target.features();
    let run = forward_backward(
        cost.values(),
        weights,
        target.weights(),
        Start::Uniform,
        |p| smooth_terms(p, &others, prev, x_n, cfg),
        cfg,
    )?;
    Ok(Refinement {
        plan: run.plan,
        trace: run.trace,
        outer_iterations: run.outer_iterations,
        converged: run.converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefineMode {
    /// Path 1's final hop, made consistent with path 2.
    P2RefinesP1,
    /// Path 2's final hop, made consistent with path 1.
    P1RefinesP2,
    Bidirectional,
}

impl RefineMode {
    pub const ALL: [RefineMode; 3] = [RefineMode::P2RefinesP1, RefineMode::P1RefinesP2, RefineMode::Bidirectional];

    pub fn name(self) -> &'static str {
        match self {
            RefineMode::P2RefinesP1 => "p2_refines_p1",
            RefineMode::P1RefinesP2 => "p1_refines_p2",
            RefineMode::Bidirectional => "bidirectional",
        }
    }
}

#[derive(Debug, Clone)]
pub struct MultiPathResult {
    pub refined_plan: CouplingPlan,
    /// Barycentric image of the source under the refined plan.
    pub mapped_source: Array2<f64>,
    pub path1: TransferPath,
    pub path2: TransferPath,
    pub mode: RefineMode,
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

impl MultiPathResult {
    /// Same layout as [`TransferPath::save`] for both paths (under `path1/`, `path2/`), plus
    /// the refined plan, its mapped source and a `refinement.json` with mode and trace.
    pub fn save(&self, dir: &Path) -> Result<()> {
        self.path1.save(&dir.join("path1"))?;
        self.path2.save(&dir.join("path2"))?;
        self.refined_plan.save(dir, "refined_plan")?;
        crate::io::write_file(
            &dir.join("refined_mapped.csv"),
            crate::ot::dense_csv(self.mapped_source.view()).as_bytes(),
        )?;
        let meta = serde_json::json!({
            "mode": self.mode,
            "objective_trace": self.objective_trace,
            "converged": self.converged,
        });
        crate::io::write_file(
            &dir.join("refinement.json"),
            serde_json::to_string_pretty(&meta).expect("refinement serializes").as_bytes(),
        )
    }
}

/// Refines the final hop of two precomputed paths that share source and target.
pub fn refine_paths(
    path1: TransferPath,
    path2: TransferPath,
    target: &Domain,
    mode: RefineMode,
    cfg: &SolverConfig,
) -> Result<MultiPathResult> {
    let (Some(g1), Some(g2)) = (path1.plans.last(), path2.plans.last()) else {
        return Err(Error::InvalidArgument("both paths need at least one hop".into()));
    };
    if path1.source_points != path2.source_points {
        return Err(Error::InvalidArgument("paths start from different sources".into()));
    }
    let refined = match mode {
        RefineMode::P2RefinesP1 => {
            let (mapped, prev) = path1.before_final_hop();
            mpot_final_hop(mapped, path1.source_weights.view(), prev, target, g2, cfg)?
        }
        RefineMode::P1RefinesP2 => {
            let (mapped, prev) = path2.before_final_hop();
            mpot_final_hop(mapped, path2.source_weights.view(), prev, target, g1, cfg)?
        }
        RefineMode::Bidirectional => {
            let (mapped, prev) = path1.before_final_hop();
            bidirectional_refine(mapped, path1.source_weights.view(), prev, target, g1, g2, cfg)?
        }
    };
    let mapped_source = barycentric_map_points(refined.plan.values(), target.features())?;
    Ok(MultiPathResult {
        refined_plan: refined.plan,
        mapped_source,
        path1,
        path2,
        mode,
        objective_trace: refined.trace,
        converged: refined.converged,
    })
}

/// Runs both transfer paths with sequential OT and refines their final hop.
pub fn multi_path_transfer(
    source: &Domain,
    path1: &[&Domain],
    path2: &[&Domain],
    target: &Domain,
    mode: RefineMode,
    cfg: &SolverConfig,
) -> Result<MultiPathResult> {
    let (p1, p2) = rayon::join(
        || continuous_transfer(source, path1, target, cfg),
        || continuous_transfer(source, path2, target, cfg),
    );
    refine_paths(p1?, p2?, target, mode, cfg)
}
