//! Wasserstein transfer curriculum: intermediate domains sorted by their entropic OT
//! distance to the source, with anything farther than the target dropped.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SolverConfig;
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::ot::wasserstein_distance;

/// A retained candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumEntry {
    pub id: String,
    /// Position in the candidate list handed to [`build_curriculum`].
    pub index: usize,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum DiscardReason {
    BeyondTarget,
    SolverFailure(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscardedEntry {
    pub id: String,
    pub index: usize,
    /// Missing when the distance could not be computed.
    pub w: Option<f64>,
    pub reason: DiscardReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumResult {
    pub ordered: Vec<CurriculumEntry>,
    pub discarded: Vec<DiscardedEntry>,
    pub w_target: f64,
    /// Human-readable warnings, e.g. an empty curriculum.
    pub flags: Vec<String>,
}

impl CurriculumResult {
    /// Ordered ids, source side first.
    pub fn ids(&self) -> Vec<&str> {
        self.ordered.iter().map(|e| e.id.as_str()).collect()
    }

    /// Looks the retained domains up in the candidate list the curriculum was built from.
    pub fn resolve<'a>(&self, candidates: &'a [Domain]) -> Result<Vec<&'a Domain>> {
        self.ordered
            .iter()
            .map(|e| match candidates.get(e.index) {
                Some(d) if d.id() == e.id => Ok(d),
                _ => Err(Error::InvalidArgument(format!(
                    "curriculum entry {} (index {}) is not in the candidate list",
                    e.id, e.index
                ))),
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("curriculum serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_file(path, self.to_json().as_bytes())
    }
}

/// Sorts `candidates` by `W(source, candidate)` and keeps those with `W <= W(source, target)`.
///
/// Ties keep the input order. A candidate whose distance cannot be computed is discarded with
/// [`DiscardReason::SolverFailure`] instead of failing the whole curriculum.
pub fn build_curriculum(
    source: &Domain,
    target: &Domain,
    candidates: &[Domain],
    cfg: &SolverConfig,
) -> Result<CurriculumResult> {
    let d = source.dim();
    for dom in std::iter::once(target).chain(candidates) {
        if dom.dim() != d {
            return Err(Error::DimensionMismatch(format!(
                "domain {} has dimension {} but the source has {d}",
                dom.id(),
                dom.dim()
            )));
        }
    }
    let w_target = wasserstein_distance(source, target, cfg)?;
    let distances: Vec<Result<f64>> =
        candidates.par_iter().map(|c| wasserstein_distance(source, c, cfg)).collect();

    let mut ordered = Vec::new();
    let mut discarded = Vec::new();
    for (index, (cand, w)) in candidates.iter().zip(distances).enumerate() {
        let id = cand.id().to_string();
        match w {
            Ok(w) if w <= w_target => ordered.push(CurriculumEntry { id, index, w }),
            Ok(w) => discarded.push(DiscardedEntry {
                id,
                index,
                w: Some(w),
                reason: DiscardReason::BeyondTarget,
            }),
            Err(e) => discarded.push(DiscardedEntry {
                id,
                index,
                w: None,
                reason: DiscardReason::SolverFailure(e.to_string()),
            }),
        }
    }
    ordered.sort_by(|a, b| a.w.total_cmp(&b.w));

    let mut flags = Vec::new();
    if ordered.is_empty() {
        flags.push("empty curriculum: transport goes directly from source to target".to_string());
    }
    for e in &discarded {
        if let DiscardReason::SolverFailure(msg) = &e.reason {
            flags.push(format!("candidate {} dropped: {msg}", e.id));
        }
    }
    Ok(CurriculumResult {
        ordered,
        discarded,
        w_target,
        flags,
    })
}
