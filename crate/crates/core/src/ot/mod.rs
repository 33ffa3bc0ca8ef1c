//! Ground costs, entropic OT, an exact oracle for tiny instances and barycentric mapping.

mod exact;
mod sinkhorn;

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::config::SolverConfig;
use crate::domain::Domain;
use crate::error::{Error, Result};

pub use self::sinkhorn::marginal_violation;
pub(crate) use self::sinkhorn::{solve as sinkhorn_raw, SinkhornRun};

/// Pairwise ground costs between two point clouds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    values: Array2<f64>,
    scale: f64,
}

impl CostMatrix {
    /// Wraps precomputed costs. Entries must be finite and nonnegative.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidArgument("cost entries must be finite and nonnegative".into()));
        }
        Ok(CostMatrix { values, scale: 1.0 })
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    /// The divisor applied by normalization (1 when unnormalized).
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }

    /// Costs in original units.
    pub fn unnormalized(&self) -> Array2<f64> {
        &self.values * self.scale
    }

    pub fn transposed(&self) -> CostMatrix {
        CostMatrix {
            values: self.values.t().to_owned(),
            scale: self.scale,
        }
    }

    fn normalized(mut self) -> Self {
        let max = self.values.iter().copied().fold(0.0_f64, f64::max);
        if max > 0.0 {
            self.values.mapv_inplace(|c| c / max);
            self.scale *= max;
        }
        self
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        crate::io::write_file(path, dense_csv(self.values.view()).as_bytes())
    }
}

/// Squared Euclidean distances between the rows of `x` and the rows of `y`.
pub fn squared_euclidean(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if x.ncols() != y.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "point sets have {} and {} features",
            x.ncols(),
            y.ncols()
        )));
    }
    let mut out = Array2::zeros((x.nrows(), y.nrows()));
    for (mut orow, xi) in out.rows_mut().into_iter().zip(x.rows()) {
        for (o, yj) in orow.iter_mut().zip(y.rows()) {
            let mut s = 0.0;
            for (p, q) in xi.iter().zip(yj.iter()) {
                let d = p - q;
                s += d * d;
            }
            *o = s;
        }
    }
    Ok(out)
}

/// Squared Euclidean cost between two point matrices, optionally divided by its max entry.
pub fn cost_between(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, normalize: bool) -> Result<CostMatrix> {
    let cost = CostMatrix {
        values: squared_euclidean(x, y)?,
        scale: 1.0,
    };
    Ok(if normalize { cost.normalized() } else { cost })
}

/// Squared Euclidean cost between two domains.
pub fn cost_matrix(a: &Domain, b: &Domain, normalize: bool) -> Result<CostMatrix> {
    cost_between(a.features(), b.features(), normalize)
}

/// A nonnegative transport matrix together with the marginals it was solved for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingPlan {
    values: Array2<f64>,
    row_marginal: Array1<f64>,
    col_marginal: Array1<f64>,
    marginal_violation: f64,
    iterations: usize,
    converged: bool,
}

/// Metadata written next to a dense plan CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanHeader {
    pub rows: usize,
    pub cols: usize,
    pub row_marginal: Vec<f64>,
    pub col_marginal: Vec<f64>,
    pub marginal_violation: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl CouplingPlan {
    /// Wraps an arbitrary nonnegative matrix; the violation is measured against the given
    /// marginals.
    pub fn from_values(values: Array2<f64>, row_marginal: Array1<f64>, col_marginal: Array1<f64>) -> Result<Self> {
        if values.nrows() != row_marginal.len() || values.ncols() != col_marginal.len() {
            return Err(Error::ShapeMismatch(format!(
                "plan is {}x{} but marginals have lengths {} and {}",
                values.nrows(),
                values.ncols(),
                row_marginal.len(),
                col_marginal.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument("plan entries must be finite and nonnegative".into()));
        }
        let violation = marginal_violation(values.view(), row_marginal.view(), col_marginal.view());
        Ok(CouplingPlan {
            values,
            row_marginal,
            col_marginal,
            marginal_violation: violation,
            iterations: 0,
            converged: true,
        })
    }

    /// The independent coupling `a b^T`.
    pub fn product(row_marginal: Array1<f64>, col_marginal: Array1<f64>) -> Self {
        let values = outer(row_marginal.view(), col_marginal.view());
        CouplingPlan {
            values,
            row_marginal,
            col_marginal,
            marginal_violation: 0.0,
            iterations: 0,
            converged: true,
        }
    }

    pub(crate) fn from_run(run: SinkhornRun, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Self {
        CouplingPlan {
            values: run.plan,
            row_marginal: a.to_owned(),
            col_marginal: b.to_owned(),
            marginal_violation: run.violation,
            iterations: run.iterations,
            converged: run.converged,
        }
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn row_marginal(&self) -> ArrayView1<'_, f64> {
        self.row_marginal.view()
    }

    pub fn col_marginal(&self) -> ArrayView1<'_, f64> {
        self.col_marginal.view()
    }

    pub fn marginal_violation(&self) -> f64 {
        self.marginal_violation
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// False when the solver stopped at its iteration cap above tolerance.
    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn transposed(&self) -> CouplingPlan {
        CouplingPlan {
            values: self.values.t().to_owned(),
            row_marginal: self.col_marginal.clone(),
            col_marginal: self.row_marginal.clone(),
            marginal_violation: self.marginal_violation,
            iterations: self.iterations,
            converged: self.converged,
        }
    }

    pub(crate) fn from_parts(
        values: Array2<f64>,
        row_marginal: Array1<f64>,
        col_marginal: Array1<f64>,
        marginal_violation: f64,
        iterations: usize,
        converged: bool,
    ) -> Self {
        CouplingPlan {
            values,
            row_marginal,
            col_marginal,
            marginal_violation,
            iterations,
            converged,
        }
    }

    /// `<plan, cost>` in the cost's stored units.
    pub fn transport_cost(&self, cost: ArrayView2<'_, f64>) -> f64 {
        frobenius_inner(self.values.view(), cost)
    }

    /// `sum p log p`, with `0 log 0 = 0`.
    pub fn neg_entropy(&self) -> f64 {
        neg_entropy(self.values.view())
    }

    pub fn header(&self) -> PlanHeader {
        PlanHeader {
            rows: self.values.nrows(),
            cols: self.values.ncols(),
            row_marginal: self.row_marginal.to_vec(),
            col_marginal: self.col_marginal.to_vec(),
            marginal_violation: self.marginal_violation,
            iterations: self.iterations,
            converged: self.converged,
        }
    }

    /// Writes `<stem>.csv` (dense values) and `<stem>.json` (header) into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        crate::io::write_file(&dir.join(format!("{stem}.csv")), dense_csv(self.values.view()).as_bytes())?;
        let header = serde_json::to_string_pretty(&self.header()).map_err(|source| Error::Json {
            path: dir.join(format!("{stem}.json")),
            source,
        })?;
        crate::io::write_file(&dir.join(format!("{stem}.json")), header.as_bytes())
    }
}

pub(crate) fn dense_csv(m: ArrayView2<'_, f64>) -> String {
    let mut s = String::with_capacity(m.len() * 12);
    for row in m.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

pub(crate) fn outer(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j])
}

pub(crate) fn frobenius_inner(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> f64 {
    x.iter().zip(y.iter()).map(|(p, q)| p * q).sum()
}

pub(crate) fn neg_entropy(p: ArrayView2<'_, f64>) -> f64 {
    p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum()
}

/// Entropic OT plan minimizing `<P, M> + lambda * sum P log P` under the marginals `a, b`.
///
/// Hitting `max_iter` above `tol` is not an error: the plan comes back with
/// `converged() == false` and its achieved violation.
pub fn sinkhorn(
    cost: &CostMatrix,
    lambda: f64,
    a: ArrayView1<'_, f64>,
    b: ArrayView1<'_, f64>,
    tol: f64,
    max_iter: usize,
) -> Result<CouplingPlan> {
    let run = sinkhorn_raw(cost.values(), lambda, a, b, tol, max_iter, None)?;
    Ok(CouplingPlan::from_run(run, a, b))
}

/// Exact unregularized OT cost and an optimal vertex plan. Limited to 64 plan entries.
pub fn exact_ot_lp(cost: &CostMatrix, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Result<(f64, CouplingPlan)> {
    let (c, plan) = exact::solve(cost.values(), a, b)?;
    Ok((c, CouplingPlan::from_values(plan, a.to_owned(), b.to_owned())?))
}

/// Maps every source point to `N_A * sum_j P_ij y_j`.
pub fn barycentric_map_points(plan: ArrayView2<'_, f64>, targets: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if plan.ncols() != targets.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "plan has {} columns but there are {} target points",
            plan.ncols(),
            targets.nrows()
        )));
    }
    Ok(plan.dot(&targets) * plan.nrows() as f64)
}

/// Barycentric projection of the plan's source points onto `targets`.
pub fn barycentric_map(plan: &CouplingPlan, targets: &Domain) -> Result<Array2<f64>> {
    barycentric_map_points(plan.values(), targets.features())
}

/// Value of the entropic OT problem between two weighted point clouds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WassersteinEstimate {
    /// `<P, M> + lambda * Omega(P)`, with `M` in original squared distance units.
    pub value: f64,
    pub transport_cost: f64,
    pub neg_entropy: f64,
    pub marginal_violation: f64,
    pub converged: bool,
}

/// Entropic OT value between weighted point clouds.
///
/// The plan is solved on the max-normalized cost with `cfg.lambda`, then the objective is
/// evaluated on the unnormalized squared distances.
pub fn wasserstein_points(
    x: ArrayView2<'_, f64>,
    a: ArrayView1<'_, f64>,
    y: ArrayView2<'_, f64>,
    b: ArrayView1<'_, f64>,
    cfg: &SolverConfig,
) -> Result<WassersteinEstimate> {
    let cost = cost_between(x, y, true)?;
    let plan = sinkhorn(&cost, cfg.lambda, a, b, cfg.sinkhorn_tol, cfg.sinkhorn_max_iter)?;
    let transport_cost = plan.transport_cost(cost.values()) * cost.scale();
    let omega = plan.neg_entropy();
    Ok(WassersteinEstimate {
        value: transport_cost + cfg.lambda * omega,
        transport_cost,
        neg_entropy: omega,
        marginal_violation: plan.marginal_violation(),
        converged: plan.converged(),
    })
}

pub fn wasserstein(a: &Domain, b: &Domain, cfg: &SolverConfig) -> Result<WassersteinEstimate> {
    wasserstein_points(a.features(), a.weights(), b.features(), b.weights(), cfg)
}

/// Entropic Wasserstein objective between two domains (see [`wasserstein_points`]).
pub fn wasserstein_distance(a: &Domain, b: &Domain, cfg: &SolverConfig) -> Result<f64> {
    wasserstein(a, b, cfg).map(|w| w.value)
}

/// Uniform probability vector of length `n`.
pub fn uniform(n: usize) -> Array1<f64> {
    Array1::from_elem(n, 1.0 / n as f64)
}

/// Row sums of a plan.
pub fn row_sums(p: ArrayView2<'_, f64>) -> Array1<f64> {
    p.sum_axis(Axis(1))
}
