//! Sequential OT along a curriculum, with a time regularizer that keeps consecutive
//! barycentric maps close.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::config::SolverConfig;
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::ot::{barycentric_map_points, cost_between, wasserstein_points, CouplingPlan};
use crate::prox::{forward_backward, Start};

/// The plan of the previous hop and the points it mapped onto.
#[derive(Debug, Clone, Copy)]
pub struct PrevHop<'a> {
    pub plan: ArrayView2<'a, f64>,
    pub points: ArrayView2<'a, f64>,
}

fn check_pair(
    gamma: ArrayView2<'_, f64>,
    gamma_prev: ArrayView2<'_, f64>,
    x_n: ArrayView2<'_, f64>,
    x_prev: ArrayView2<'_, f64>,
) -> Result<()> {
    if gamma.nrows() != gamma_prev.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "plans have {} and {} source rows",
            gamma.nrows(),
            gamma_prev.nrows()
        )));
    }
    if gamma.ncols() != x_n.nrows() || gamma_prev.ncols() != x_prev.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "plan columns ({}, {}) do not match point counts ({}, {})",
            gamma.ncols(),
            gamma_prev.ncols(),
            x_n.nrows(),
            x_prev.nrows()
        )));
    }
    if x_n.ncols() != x_prev.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "hop points have dimensions {} and {}",
            x_n.ncols(),
            x_prev.ncols()
        )));
    }
    Ok(())
}

/// `N_S (P X_n - P_prev X_prev)`: the displacement between consecutive barycentric maps.
fn displacement(
    gamma: ArrayView2<'_, f64>,
    gamma_prev: ArrayView2<'_, f64>,
    x_n: ArrayView2<'_, f64>,
    x_prev: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    check_pair(gamma, gamma_prev, x_n, x_prev)?;
    let ns = gamma.nrows() as f64;
    Ok((gamma.dot(&x_n) - gamma_prev.dot(&x_prev)) * ns)
}

/// `|| N_S P X_n - N_S P_prev X_prev ||_F^2`.
pub fn time_regularizer(
    gamma: ArrayView2<'_, f64>,
    gamma_prev: ArrayView2<'_, f64>,
    x_n: ArrayView2<'_, f64>,
    x_prev: ArrayView2<'_, f64>,
) -> Result<f64> {
    let d = displacement(gamma, gamma_prev, x_n, x_prev)?;
    Ok(d.iter().map(|v| v * v).sum())
}

/// Gradient of [`time_regularizer`] in `gamma`: `2 N_S^2 (P X_n - P_prev X_prev) X_n^T`.
pub fn grad_time_regularizer(
    gamma: ArrayView2<'_, f64>,
    gamma_prev: ArrayView2<'_, f64>,
    x_n: ArrayView2<'_, f64>,
    x_prev: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    let d = displacement(gamma, gamma_prev, x_n, x_prev)?;
    let ns = gamma.nrows() as f64;
    Ok(d.dot(&x_n.t()) * (2.0 * ns))
}

/// Value and gradient of `eta_t * R_t`, or zero when there is no previous hop.
pub(crate) fn time_term(
    gamma: ArrayView2<'_, f64>,
    prev: Option<PrevHop<'_>>,
    x_n: ArrayView2<'_, f64>,
    eta_t: f64,
) -> Result<(f64, Array2<f64>)> {
    match prev {
        Some(p) if eta_t > 0.0 => {
            let d = displacement(gamma, p.plan, x_n, p.points)?;
            let value: f64 = d.iter().map(|v| v * v).sum();
            let grad = d.dot(&x_n.t()) * (2.0 * gamma.nrows() as f64 * eta_t);
            Ok((eta_t * value, grad))
        }
        Some(p) => {
            check_pair(gamma, p.plan, x_n, p.points)?;
            Ok((0.0, Array2::zeros(gamma.raw_dim())))
        }
        None => Ok((0.0, Array2::zeros(gamma.raw_dim()))),
    }
}

pub(crate) fn check_positive(gamma: ArrayView2<'_, f64>) -> Result<()> {
    for ((row, col), &value) in gamma.indexed_iter() {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::NonPositivePlan { row, col, value });
        }
    }
    Ok(())
}

/// `eta_t * grad R_t - lambda * log(P)`: the gradient of the hop's regularizers.
///
/// Fails on any nonpositive entry, which no entropic iterate can have.
pub fn grad_j(
    gamma: ArrayView2<'_, f64>,
    prev: Option<PrevHop<'_>>,
    x_n: ArrayView2<'_, f64>,
    cfg: &SolverConfig,
) -> Result<Array2<f64>> {
    check_positive(gamma)?;
    let (_, mut grad) = time_term(gamma, prev, x_n, cfg.eta_t)?;
    grad.zip_mut_with(&gamma, |g, &p| *g -= cfg.lambda * p.ln());
    Ok(grad)
}

/// Per-hop record kept in a [`TransferPath`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopDiagnostics {
    pub domain: String,
    /// Regularized objective at the returned plan, on the max-normalized hop cost.
    pub objective: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub marginal_violation: f64,
    pub converged: bool,
    /// Entropic Wasserstein objective between the mapped source and the hop's domain.
    pub w_mapped: f64,
}

/// Result of one hop: the plan plus the outer-loop objective trace.
#[derive(Debug, Clone)]
pub struct HopOutcome {
    pub plan: CouplingPlan,
    pub trace: Vec<f64>,
    pub outer_iterations: usize,
    pub converged: bool,
}

impl HopOutcome {
    pub fn objective(&self) -> f64 {
        *self.trace.last().expect("trace starts with the initial plan")
    }
}

fn check_hop_input(mapped: ArrayView2<'_, f64>, weights: ArrayView1<'_, f64>, next: &Domain) -> Result<()> {
    if mapped.nrows() != weights.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} mapped points but {} weights",
            mapped.nrows(),
            weights.len()
        )));
    }
    if mapped.ncols() != next.dim() {
        return Err(Error::DimensionMismatch(format!(
            "mapped source has dimension {}, domain {} has {}",
            mapped.ncols(),
            next.id(),
            next.dim()
        )));
    }
    Ok(())
}

/// One hop of sequential transport from the current mapped source onto `next`.
///
/// Without a previous hop this is plain entropic OT on the max-normalized cost. Otherwise the
/// forward-backward loop minimizes `<P, M> + lambda Omega(P) + eta_t R_t(P)` starting from the
/// plain entropic plan.
pub fn cot_hop(
    mapped_source: ArrayView2<'_, f64>,
    weights: ArrayView1<'_, f64>,
    prev: Option<PrevHop<'_>>,
    next: &Domain,
    cfg: &SolverConfig,
) -> Result<HopOutcome> {
    check_hop_input(mapped_source, weights, next)?;
    let cost = cost_between(mapped_source, next.features(), true)?;
    let Some(prev) = prev else {
        return plain_hop(cost.values(), weights, next, cfg);
    };
    let x_n = next.features();
    let run = forward_backward(
        cost.values(),
        weights,
        next.weights(),
        Start::Sinkhorn,
        |p| time_term(p, Some(prev), x_n, cfg.eta_t),
        cfg,
    )?;
    Ok(HopOutcome {
        plan: run.plan,
        trace: run.trace,
        outer_iterations: run.outer_iterations,
        converged: run.converged,
    })
}

fn plain_hop(cost: ArrayView2<'_, f64>, a: ArrayView1<'_, f64>, next: &Domain, cfg: &SolverConfig) -> Result<HopOutcome> {
    let run = crate::ot::sinkhorn_raw(cost, cfg.lambda, a, next.weights(), cfg.sinkhorn_tol, cfg.sinkhorn_max_iter, None)?;
    let plan = CouplingPlan::from_run(run, a, next.weights());
    let obj = plan.transport_cost(cost) + cfg.lambda * plan.neg_entropy();
    let converged = plan.converged();
    Ok(HopOutcome {
        plan,
        trace: vec![obj],
        outer_iterations: 0,
        converged,
    })
}

/// Hop-by-hop transport of a source domain through a sequence of domains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferPath {
    /// Source id followed by the id of every hop's domain.
    pub sequence: Vec<String>,
    /// `plans[k]` maps the source as it stood before hop `k` onto hop `k`'s domain.
    pub plans: Vec<CouplingPlan>,
    /// Mapped source after every hop.
    pub mapped: Vec<Array2<f64>>,
    /// Points of every hop's domain.
    pub hop_points: Vec<Array2<f64>>,
    pub source_points: Array2<f64>,
    pub source_weights: Array1<f64>,
    pub per_hop_diagnostics: Vec<HopDiagnostics>,
}

impl TransferPath {
    fn start(source: &Domain) -> Self {
        TransferPath {
            sequence: vec![source.id().to_string()],
            plans: Vec::new(),
            mapped: Vec::new(),
            hop_points: Vec::new(),
            source_points: source.features().to_owned(),
            source_weights: source.weights().to_owned(),
            per_hop_diagnostics: Vec::new(),
        }
    }

    /// The source points after the latest hop.
    pub fn mapped_source(&self) -> ArrayView2<'_, f64> {
        self.mapped.last().unwrap_or(&self.source_points).view()
    }

    pub fn hops(&self) -> usize {
        self.plans.len()
    }

    /// State just before hop `k`: the mapped source and the previous hop, if any.
    pub fn before_hop(&self, k: usize) -> (ArrayView2<'_, f64>, Option<PrevHop<'_>>) {
        if k == 0 {
            return (self.source_points.view(), None);
        }
        let prev = PrevHop {
            plan: self.plans[k - 1].values(),
            points: self.hop_points[k - 1].view(),
        };
        (self.mapped[k - 1].view(), Some(prev))
    }

    /// State before the last hop.
    pub fn before_final_hop(&self) -> (ArrayView2<'_, f64>, Option<PrevHop<'_>>) {
        self.before_hop(self.hops().saturating_sub(1))
    }

    /// Writes `plan_<k>.csv/json`, `mapped_<k>.csv`, `scatter_<k>.csv` per hop and
    /// `diagnostics.json`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        for (k, plan) in self.plans.iter().enumerate() {
            plan.save(dir, &format!("plan_{k}"))?;
            crate::io::write_file(
                &dir.join(format!("mapped_{k}.csv")),
                crate::ot::dense_csv(self.mapped[k].view()).as_bytes(),
            )?;
            crate::io::write_file(
                &dir.join(format!("scatter_{k}.csv")),
                scatter_csv(k, self.mapped[k].view(), self.hop_points[k].view()).as_bytes(),
            )?;
        }
        let meta = serde_json::json!({
            "sequence": self.sequence,
            "per_hop_diagnostics": self.per_hop_diagnostics,
        });
        crate::io::write_file(
            &dir.join("diagnostics.json"),
            serde_json::to_string_pretty(&meta).expect("diagnostics serialize").as_bytes(),
        )
    }
}

/// Plot-ready rows `hop,kind,x0,...` with `kind` either `mapped` or `target`.
pub fn scatter_csv(hop: usize, mapped: ArrayView2<'_, f64>, target: ArrayView2<'_, f64>) -> String {
    let d = mapped.ncols();
    let mut s = String::from("hop,kind");
    for j in 0..d {
        s.push_str(&format!(",x{j}"));
    }
    s.push('\n');
    for (kind, pts) in [("mapped", mapped), ("target", target)] {
        for row in pts.rows() {
            s.push_str(&format!("{hop},{kind}"));
            for v in row {
                s.push_str(&format!(",{v:?}"));
            }
            s.push('\n');
        }
    }
    s
}

/// Runs [`cot_hop`] along `source -> intermediates... -> target`, mapping the source
/// barycentrically after every hop.
///
/// A failing hop aborts with [`Error::Hop`], which carries the path up to that point.
pub fn continuous_transfer(
    source: &Domain,
    intermediates: &[&Domain],
    target: &Domain,
    cfg: &SolverConfig,
) -> Result<TransferPath> {
    cfg.validate()?;
    let mut path = TransferPath::start(source);
    for (k, &next) in intermediates.iter().chain(std::iter::once(&target)).enumerate() {
        if let Err(e) = advance(&mut path, next, cfg) {
            return Err(Error::Hop {
                index: k,
                domain: next.id().to_string(),
                source: Box::new(e),
                partial: Box::new(path),
            });
        }
    }
    Ok(path)
}

fn advance(path: &mut TransferPath, next: &Domain, cfg: &SolverConfig) -> Result<()> {
    let k = path.hops();
    let (mapped, prev) = path.before_hop(k);
    let hop = cot_hop(mapped, path.source_weights.view(), prev, next, cfg)?;
    let new_mapped = barycentric_map_points(hop.plan.values(), next.features())?;
    push_hop(path, next, hop, new_mapped, cfg)
}

pub(crate) fn push_hop(
    path: &mut TransferPath,
    next: &Domain,
    hop: HopOutcome,
    mapped: Array2<f64>,
    cfg: &SolverConfig,
) -> Result<()> {
    let w = wasserstein_points(mapped.view(), path.source_weights.view(), next.features(), next.weights(), cfg)?;
    path.per_hop_diagnostics.push(HopDiagnostics {
        domain: next.id().to_string(),
        objective: hop.objective(),
        outer_iterations: hop.outer_iterations,
        inner_iterations: hop.plan.iterations(),
        marginal_violation: hop.plan.marginal_violation(),
        converged: hop.converged && hop.plan.converged(),
        w_mapped: w.value,
    });
    path.sequence.push(next.id().to_string());
    path.plans.push(hop.plan);
    path.mapped.push(mapped);
    path.hop_points.push(next.features().to_owned());
    Ok(())
}
