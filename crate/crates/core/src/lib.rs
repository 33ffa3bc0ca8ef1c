//! Continuous domain adaptation along a Wasserstein-ordered curriculum of intermediate
//! domains, with sequential optimal transport and a multi-path consistency refinement of
//! the final hop.
//!
//! The pipeline, bottom up:
//!
//! - [`domain`]: point clouds with empirical measures, generators and transforms.
//! - [`ot`]: squared Euclidean costs, stabilized Sinkhorn, an exact oracle for tiny
//!   instances, barycentric mapping and the entropic Wasserstein objective.
//! - [`curriculum`]: filters and sorts intermediate domains by their distance to the source.
//! - [`cot`]: hop-by-hop transport with the time regularizer.
//! - [`mpot`]: path-consistency refinement of the last hop, one-sided or bidirectional.
//! - [`downstream`]: the predictors trained on the mapped source.

pub mod config;
pub mod cot;
pub mod curriculum;
pub mod domain;
pub mod downstream;
pub mod error;
pub mod io;
pub mod mpot;
pub mod ot;
mod prox;

pub use config::{ConsistencyAnchor, SolverConfig};
pub use domain::{Domain, Labels};
pub use error::{Error, Result};
