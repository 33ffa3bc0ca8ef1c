use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which points the path-consistency regularizer compares the two barycentric maps through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ConsistencyAnchor {
    /// The target domain's points (the final hop is a map onto the target).
    #[default]
    Target,
    /// The last intermediate domain's points. Only shape-compatible when that domain has as
    /// many points as the target.
    LastIntermediate,
}

/// Solver hyperparameters shared by every stage of the pipeline.
///
/// Costs handed to Sinkhorn are max-normalized, so `lambda` is relative to the largest
/// pairwise squared distance of each problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Entropic weight.
    pub lambda: f64,
    /// Time-regularizer weight.
    pub eta_t: f64,
    /// Path-consistency weight.
    pub eta_p: f64,
    /// Forward-backward step size. Each outer step contracts the entropic part by
    /// `1 / (1 + alpha * lambda)`; the linearized regularizers stay stable while
    /// `alpha * eta * 2 N_S * max |x|^2` is below about one.
    pub alpha: f64,
    /// Blend weight of the path-2 term in bidirectional refinement.
    pub lambda1: f64,
    /// Blend weight of the path-1 term in bidirectional refinement.
    pub lambda2: f64,
    /// Marginal L1 tolerance of the Sinkhorn solver.
    pub sinkhorn_tol: f64,
    pub sinkhorn_max_iter: usize,
    /// L-infinity change in the plan below which the outer loop stops.
    pub outer_tol: f64,
    pub outer_max_iter: usize,
    pub anchor: ConsistencyAnchor,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda: 1e-2,
            eta_t: 1e-6,
            eta_p: 2e-6,
            alpha: 100.0,
            lambda1: 0.5,
            lambda2: 0.5,
            sinkhorn_tol: 1e-7,
            sinkhorn_max_iter: 10_000,
            outer_tol: 1e-9,
            outer_max_iter: 200,
            anchor: ConsistencyAnchor::Target,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")))
            }
        };
        let nonnegative = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be nonnegative, got {v}")))
            }
        };
        positive("lambda", self.lambda)?;
        positive("alpha", self.alpha)?;
        positive("sinkhorn_tol", self.sinkhorn_tol)?;
        positive("outer_tol", self.outer_tol)?;
        nonnegative("eta_t", self.eta_t)?;
        nonnegative("eta_p", self.eta_p)?;
        nonnegative("lambda1", self.lambda1)?;
        nonnegative("lambda2", self.lambda2)?;
        if (self.lambda1 + self.lambda2 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "lambda1 + lambda2 must equal 1, got {} + {}",
                self.lambda1, self.lambda2
            )));
        }
        if self.sinkhorn_max_iter == 0 || self.outer_max_iter == 0 {
            return Err(Error::InvalidConfig("iteration caps must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        SolverConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_unbalanced_blend() {
        let cfg = SolverConfig {
            lambda1: 0.7,
            lambda2: 0.7,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn rejects_nonpositive_lambda() {
        let cfg = SolverConfig {
            lambda: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg: SolverConfig = serde_json::from_str(r#"{"eta_p": 0.0}"#).unwrap();
        assert_eq!(cfg.eta_p, 0.0);
        assert_eq!(cfg.lambda, SolverConfig::default().lambda);
    }
}
