use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Zip};

use crate::error::{Error, Result};

/// Scalings are folded back into the log potentials once they leave `[e^-ABSORB, e^ABSORB]`.
const ABSORB: f64 = 40.0;

/// Output of the stabilized solver, including the dual potentials for warm starts.
#[derive(Debug, Clone)]
pub(crate) struct SinkhornRun {
    pub plan: Array2<f64>,
    pub f: Array1<f64>,
    pub g: Array1<f64>,
    pub iterations: usize,
    pub violation: f64,
    pub converged: bool,
}

pub(crate) fn check_marginal(w: ArrayView1<'_, f64>) -> Result<()> {
    if let Some((index, &value)) = w.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InvalidMarginal { index, value });
    }
    Ok(())
}

/// `reg * log sum_j exp((g_j - c_ij) / reg)` for every row, with max-shift.
fn row_softmin(cost: ArrayView2<'_, f64>, g: &Array1<f64>, reg: f64) -> Array1<f64> {
    let mut out = Array1::zeros(cost.nrows());
    for (i, row) in cost.rows().into_iter().enumerate() {
        let mut m = f64::NEG_INFINITY;
        for (c, gj) in row.iter().zip(g.iter()) {
            m = m.max(gj - c);
        }
        let mut s = 0.0;
        for (c, gj) in row.iter().zip(g.iter()) {
            s += ((gj - c - m) / reg).exp();
        }
        out[i] = m + reg * s.ln();
    }
    out
}

fn col_softmin(cost: ArrayView2<'_, f64>, f: &Array1<f64>, reg: f64) -> Array1<f64> {
    row_softmin(cost.t(), f, reg)
}

/// Exact log-domain half steps; these re-center the potentials whenever the scaled kernel
/// under- or overflows.
fn log_step(
    cost: ArrayView2<'_, f64>,
    reg: f64,
    log_a: &Array1<f64>,
    log_b: &Array1<f64>,
    f: &mut Array1<f64>,
    g: &mut Array1<f64>,
) {
    *f = reg * log_a - row_softmin(cost, g, reg);
    *g = reg * log_b - col_softmin(cost, f, reg);
}

fn kernel(cost: ArrayView2<'_, f64>, f: &Array1<f64>, g: &Array1<f64>, reg: f64) -> Array2<f64> {
    let mut k = Array2::zeros(cost.raw_dim());
    for (i, (mut krow, crow)) in k.rows_mut().into_iter().zip(cost.rows()).enumerate() {
        let fi = f[i];
        Zip::from(&mut krow).and(&crow).and(g).for_each(|kij, &c, &gj| {
            *kij = ((fi + gj - c) / reg).exp();
        });
    }
    k
}

/// Entropic OT between `a` and `b` under `cost` with `reg * sum(p log p)` regularization.
///
/// Log-domain potentials with bounded scaling vectors: a matrix-vector Sinkhorn sweep runs
/// on the kernel `exp((f + g - C) / reg)` and the scalings are absorbed into `f, g` before
/// they can over- or underflow. Stops when the L1 marginal violation drops below `tol`.
pub(crate) fn solve(
    cost: ArrayView2<'_, f64>,
    reg: f64,
    a: ArrayView1<'_, f64>,
    b: ArrayView1<'_, f64>,
    tol: f64,
    max_iter: usize,
    warm: Option<(&Array1<f64>, &Array1<f64>)>,
) -> Result<SinkhornRun> {
    let (n, m) = cost.dim();
    if a.len() != n || b.len() != m {
        return Err(Error::ShapeMismatch(format!(
            "cost is {n}x{m} but marginals have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if !(reg.is_finite() && reg > 0.0) {
        return Err(Error::InvalidArgument(format!("regularization must be positive, got {reg}")));
    }
    check_marginal(a)?;
    check_marginal(b)?;
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("cost matrix"));
    }

    let log_a = a.mapv(f64::ln);
    let log_b = b.mapv(f64::ln);
    let (mut f, mut g) = match warm {
        Some((f0, g0)) if f0.len() == n && g0.len() == m => (f0.clone(), g0.clone()),
        _ => (Array1::zeros(n), Array1::zeros(m)),
    };
    log_step(cost, reg, &log_a, &log_b, &mut f, &mut g);

    let mut k = kernel(cost, &f, &g, reg);
    let mut u = Array1::<f64>::ones(n);
    let mut v = Array1::<f64>::ones(m);
    let mut violation = f64::INFINITY;
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;

        let kv = k.dot(&v);
        Zip::from(&mut u).and(&a).and(&kv).for_each(|ui, &ai, &s| *ui = ai / s);
        let ktu = k.t().dot(&u);
        // Rows are exact after the u update; the column residual is the full L1 violation.
        violation = Zip::from(&v).and(&ktu).and(&b).fold(0.0, |acc, &vj, &s, &bj| acc + (vj * s - bj).abs());
        if violation < tol {
            break;
        }
        Zip::from(&mut v).and(&b).and(&ktu).for_each(|vj, &bj, &s| *vj = bj / s);

        let bad = u.iter().chain(v.iter()).any(|x| !x.is_finite() || *x == 0.0);
        let large = u.iter().chain(v.iter()).any(|x| x.ln().abs() > ABSORB);
        if bad {
            // A row or column of the kernel underflowed entirely; restart from exact
            // log-domain potentials.
            log_step(cost, reg, &log_a, &log_b, &mut f, &mut g);
            k = kernel(cost, &f, &g, reg);
            u.fill(1.0);
            v.fill(1.0);
        } else if large {
            Zip::from(&mut f).and(&u).for_each(|fi, &ui| *fi += reg * ui.ln());
            Zip::from(&mut g).and(&v).for_each(|gj, &vj| *gj += reg * vj.ln());
            k = kernel(cost, &f, &g, reg);
            u.fill(1.0);
            v.fill(1.0);
        }
    }

    Zip::from(&mut f).and(&u).for_each(|fi, &ui| *fi += reg * ui.ln());
    Zip::from(&mut g).and(&v).for_each(|gj, &vj| *gj += reg * vj.ln());
    let mut plan = k;
    for (i, mut row) in plan.rows_mut().into_iter().enumerate() {
        let ui = u[i];
        Zip::from(&mut row).and(&v).for_each(|p, &vj| *p *= ui * vj);
    }
    if plan.iter().any(|p| !p.is_finite()) || f.iter().chain(g.iter()).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("Sinkhorn kernel after stabilization"));
    }
    let violation = if violation.is_finite() { violation } else { marginal_violation(plan.view(), a, b) };
    Ok(SinkhornRun {
        plan,
        f,
        g,
        iterations,
        violation,
        converged: violation < tol,
    })
}

/// L1 distance of the plan's row and column sums from the prescribed marginals.
pub fn marginal_violation(plan: ArrayView2<'_, f64>, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    let rows = plan.sum_axis(ndarray::Axis(1));
    let cols = plan.sum_axis(ndarray::Axis(0));
    let r: f64 = rows.iter().zip(a.iter()).map(|(x, y)| (x - y).abs()).sum();
    let c: f64 = cols.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum();
    r + c
}
