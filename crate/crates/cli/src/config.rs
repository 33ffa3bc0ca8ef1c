//! Experiment configuration, read from JSON.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use wmpot::domain::RotationCenter;
use wmpot::mpot::RefineMode;
use wmpot::SolverConfig;

/// One adaptation method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Direct transport from source to target.
    Dot,
    /// Sequential transport through intermediates ordered by their metadata.
    CotMeta,
    /// Sequential transport through the Wasserstein curriculum.
    CotWdis,
    WmpotP2p1,
    WmpotP1p2,
    WmpotBidir,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Dot,
        Method::CotMeta,
        Method::CotWdis,
        Method::WmpotP2p1,
        Method::WmpotP1p2,
        Method::WmpotBidir,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Dot => "dot",
            Method::CotMeta => "cot_meta",
            Method::CotWdis => "cot_wdis",
            Method::WmpotP2p1 => "wmpot_p2p1",
            Method::WmpotP1p2 => "wmpot_p1p2",
            Method::WmpotBidir => "wmpot_bidir",
        }
    }

    pub fn refine_mode(self) -> Option<RefineMode> {
        match self {
            Method::WmpotP2p1 => Some(RefineMode::P2RefinesP1),
            Method::WmpotP1p2 => Some(RefineMode::P1RefinesP2),
            Method::WmpotBidir => Some(RefineMode::Bidirectional),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .with_context(|| {
                let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
                format!("unknown method `{s}` (expected one of {})", names.join(", "))
            })
    }
}

/// Where the domains come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// Freshly sampled half moons per seed, one rotated copy per angle.
    HalfMoons {
        #[serde(default = "default_points_per_moon")]
        points_per_moon: usize,
        #[serde(default = "default_noise")]
        noise: f64,
        #[serde(default)]
        source_angle: f64,
        #[serde(default = "default_target_angle")]
        target_angle: f64,
        #[serde(default = "default_candidate_angles")]
        candidate_angles: Vec<f64>,
        #[serde(default)]
        center: RotationCenter,
    },
    /// Random subsets of an IDX image archive, rotated per domain.
    RotatedImages {
        images: PathBuf,
        labels: PathBuf,
        points: usize,
        #[serde(default)]
        source_angle: f64,
        #[serde(default = "default_target_angle")]
        target_angle: f64,
        #[serde(default = "default_candidate_angles")]
        candidate_angles: Vec<f64>,
    },
    /// Fixed domains listed in a manifest; seeds only change the candidate order.
    Manifest { path: PathBuf },
}

fn default_points_per_moon() -> usize {
    150
}

fn default_noise() -> f64 {
    0.1
}

fn default_target_angle() -> f64 {
    90.0
}

fn default_candidate_angles() -> Vec<f64> {
    vec![18.0, 36.0, 54.0, 72.0]
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::HalfMoons {
            points_per_moon: default_points_per_moon(),
            noise: default_noise(),
            source_angle: 0.0,
            target_angle: default_target_angle(),
            candidate_angles: default_candidate_angles(),
            center: RotationCenter::Origin,
        }
    }
}

/// How the second transfer path is picked from the curriculum.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathSpec {
    /// Curriculum positions 1, 3, 5, ... (counting from 0).
    #[default]
    OddIndexed,
    /// Explicit domain ids, in transfer order.
    Ids(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DownstreamSpec {
    /// Neighbours for classification.
    pub k: usize,
    /// Penalty for regression.
    pub ridge: f64,
}

impl Default for DownstreamSpec {
    fn default() -> Self {
        DownstreamSpec { k: 1, ridge: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub dataset: DatasetSpec,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub path2: PathSpec,
    /// Explicit path 1; the full curriculum when absent.
    #[serde(default)]
    pub path1: Option<Vec<String>>,
    #[serde(default)]
    pub downstream: DownstreamSpec,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub artifacts: Artifacts,
}

/// Per-(seed, method) files written by `run`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Artifacts {
    None,
    /// Scatter CSVs per hop plus hop diagnostics.
    #[default]
    Scatter,
    /// Everything in `Scatter` plus dense plans and mapped sources.
    Full,
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetSpec::default(),
            methods: default_methods(),
            solver: SolverConfig::default(),
            seeds: default_seeds(),
            path2: PathSpec::default(),
            path1: None,
            downstream: DownstreamSpec::default(),
            output_dir: None,
            artifacts: Artifacts::default(),
        }
    }
}

impl ExperimentConfig {
    /// Reads a config file. Relative dataset paths resolve against the file's directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.dataset.rebase(base);
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.seeds.is_empty() {
            bail!("seed list is empty");
        }
        if self.methods.is_empty() {
            bail!("method list is empty");
        }
        if self.downstream.k == 0 {
            bail!("downstream k must be at least 1");
        }
        if !(self.downstream.ridge.is_finite() && self.downstream.ridge >= 0.0) {
            bail!("downstream ridge must be nonnegative");
        }
        if let DatasetSpec::HalfMoons { points_per_moon: 0, .. } | DatasetSpec::RotatedImages { points: 0, .. } =
            self.dataset
        {
            bail!("domains need at least one point");
        }
        self.solver.validate()?;
        Ok(())
    }
}

impl DatasetSpec {
    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match self {
            DatasetSpec::HalfMoons { .. } => {}
            DatasetSpec::RotatedImages { images, labels, .. } => {
                fix(images);
                fix(labels);
            }
            DatasetSpec::Manifest { path } => fix(path),
        }
    }
}

/// Parses `3`, `0..10` (half-open) or `1,4,9` into a seed list.
pub fn parse_seeds(s: &str) -> anyhow::Result<Vec<u64>> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().with_context(|| format!("bad seed range `{s}`"))?;
        let b: u64 = b.trim().parse().with_context(|| format!("bad seed range `{s}`"))?;
        if a >= b {
            bail!("empty seed range `{s}`");
        }
        return Ok((a..b).collect());
    }
    s.split(',')
        .map(|t| t.trim().parse::<u64>().with_context(|| format!("bad seed `{t}`")))
        .collect()
}
