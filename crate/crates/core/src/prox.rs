//! Forward-backward loop shared by the time-regularized and path-consistent hops.
//!
//! Each outer step linearizes the smooth regularizers at the current plan and solves a
//! KL-proximal entropic OT problem:
//!
//! ```text
//! M_c     = alpha * M + alpha * grad G(P_c) - log P_c
//! P_{c+1} = Sinkhorn(M_c, 1 + alpha * lambda)
//! ```
//!
//! whose fixed points are exactly the minimizers of `<P, M> + lambda * Omega(P) + G(P)`
//! over the transport polytope. `log P_c` is carried analytically from the dual potentials,
//! so plan entries that underflow to zero never produce infinite costs.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Zip};

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::ot::{frobenius_inner, neg_entropy, sinkhorn_raw, CouplingPlan};

/// Starting point of the outer loop.
pub(crate) enum Start {
    /// Plain entropic OT on the hop cost.
    Sinkhorn,
    /// The constant plan `1 / (N_S N_T)`.
    Uniform,
}

pub(crate) struct ProxRun {
    pub plan: CouplingPlan,
    /// Objective after every outer step, starting with the initial plan.
    pub trace: Vec<f64>,
    pub outer_iterations: usize,
    pub converged: bool,
}

/// Minimizes `<P, cost> + cfg.lambda * Omega(P) + smooth(P)`.
///
/// `smooth` returns the regularizer's value and gradient at a plan. When the loop stops at
/// `outer_max_iter` the lowest-objective iterate is returned with `converged == false`.
pub(crate) fn forward_backward<S>(
    cost: ArrayView2<'_, f64>,
    a: ArrayView1<'_, f64>,
    b: ArrayView1<'_, f64>,
    start: Start,
    smooth: S,
    cfg: &SolverConfig,
) -> Result<ProxRun>
where
    S: Fn(ArrayView2<'_, f64>) -> Result<(f64, Array2<f64>)>,
{
    cfg.validate()?;
    let (n, m) = cost.dim();
    let lambda = cfg.lambda;
    let alpha = cfg.alpha;
    let reg = 1.0 + alpha * lambda;

    let mut inner_iterations = 0;
    let (mut plan, mut log_plan, mut violation) = match start {
        Start::Sinkhorn => {
            let run = sinkhorn_raw(cost, lambda, a, b, cfg.sinkhorn_tol, cfg.sinkhorn_max_iter, None)?;
            inner_iterations += run.iterations;
            let log_plan = log_from_potentials(cost, &run.f, &run.g, lambda);
            (run.plan, log_plan, run.violation)
        }
        Start::Uniform => {
            let v = 1.0 / (n * m) as f64;
            let plan = Array2::from_elem((n, m), v);
            let violation = crate::ot::marginal_violation(plan.view(), a, b);
            (plan, Array2::from_elem((n, m), v.ln()), violation)
        }
    };

    let objective = |p: ArrayView2<'_, f64>, g: f64| frobenius_inner(p, cost) + lambda * neg_entropy(p) + g;
    let (mut g_val, mut grad) = smooth(plan.view())?;
    let mut trace = vec![objective(plan.view(), g_val)];
    let mut best = (trace[0], plan.clone(), violation);
    let mut warm: Option<(Array1<f64>, Array1<f64>)> = None;
    let mut converged = false;
    let mut outer = 0;

    while outer < cfg.outer_max_iter {
        outer += 1;
        let mut mc = Array2::zeros((n, m));
        Zip::from(&mut mc)
            .and(cost)
            .and(&grad)
            .and(&log_plan)
            .for_each(|x, &c, &d, &l| *x = alpha * c + alpha * d - l);
        if mc.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("linearized cost of the outer iteration"));
        }
        let run = sinkhorn_raw(
            mc.view(),
            reg,
            a,
            b,
            cfg.sinkhorn_tol,
            cfg.sinkhorn_max_iter,
            warm.as_ref().map(|(f, g)| (f, g)),
        )?;
        inner_iterations += run.iterations;

        let change = Zip::from(&run.plan).and(&plan).fold(0.0f64, |acc, &x, &y| acc.max((x - y).abs()));
        log_plan = log_from_potentials(mc.view(), &run.f, &run.g, reg);
        plan = run.plan;
        violation = run.violation;
        warm = Some((run.f, run.g));

        (g_val, grad) = smooth(plan.view())?;
        let obj = objective(plan.view(), g_val);
        if !obj.is_finite() {
            return Err(Error::NonFinite("outer-loop objective"));
        }
        trace.push(obj);
        if obj < best.0 {
            best = (obj, plan.clone(), violation);
        }
        if change < cfg.outer_tol {
            converged = true;
            break;
        }
    }

    if !converged {
        (_, plan, violation) = best;
    }
    let inner_ok = violation < cfg.sinkhorn_tol;
    let plan = CouplingPlan::from_parts(plan, a.to_owned(), b.to_owned(), violation, inner_iterations, converged && inner_ok);
    Ok(ProxRun {
        plan,
        trace,
        outer_iterations: outer,
        converged,
    })
}

fn log_from_potentials(cost: ArrayView2<'_, f64>, f: &Array1<f64>, g: &Array1<f64>, reg: f64) -> Array2<f64> {
    let mut out = Array2::zeros(cost.raw_dim());
    for (i, (mut row, crow)) in out.rows_mut().into_iter().zip(cost.rows()).enumerate() {
        let fi = f[i];
        Zip::from(&mut row).and(&crow).and(g).for_each(|x, &c, &gj| *x = (fi + gj - c) / reg);
    }
    out
}
