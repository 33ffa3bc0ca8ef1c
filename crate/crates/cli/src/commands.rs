//! The `generate`, `curriculum`, `run` and `ablate` commands.
//!
//! Seeds are processed in parallel on a pool of `jobs` threads; results are merged in seed
//! order, so every output file is independent of scheduling.

use std::path::{Path, PathBuf};

use anyhow::Context;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use wmpot::curriculum::{build_curriculum, CurriculumResult, DiscardReason};
use wmpot::mpot::RefineMode;
use wmpot::{Domain, SolverConfig};

use crate::config::{Artifacts, ExperimentConfig, Method};
use crate::data::{shuffle_rng, Scenario};
use crate::methods::{metadata_curriculum, Metric, SeedEvaluator};
use crate::report::{aggregate, kendall_tau, mean_variance, sort_rows, write_csv, write_json, Aggregate, Row};

#[derive(Debug, Clone)]
pub struct Options {
    pub out: PathBuf,
    pub jobs: usize,
}

/// A (seed, cell) that could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub seed: u64,
    pub cell: String,
    pub error: String,
}

fn failure(seed: u64, cell: impl Into<String>, e: &anyhow::Error) -> Failure {
    Failure {
        seed,
        cell: cell.into(),
        error: format!("{e:#}"),
    }
}

fn per_seed<T: Send>(jobs: usize, seeds: &[u64], f: impl Fn(u64) -> T + Sync) -> anyhow::Result<Vec<T>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .context("building the worker pool")?;
    Ok(pool.install(|| seeds.par_iter().map(|&s| f(s)).collect()))
}

fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed_{seed}"))
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Writes each seed's domains as CSV files plus a manifest under `seed_<s>/`.
pub fn generate(cfg: &ExperimentConfig, opts: &Options) -> anyhow::Result<Vec<PathBuf>> {
    cfg.validate()?;
    let dirs = per_seed(opts.jobs, &cfg.seeds, |seed| -> anyhow::Result<PathBuf> {
        let dir = seed_dir(&opts.out, seed);
        create_dir(&dir)?;
        Scenario::build(&cfg.dataset, seed)?.save(&dir)?;
        Ok(dir.join("manifest.json"))
    })?;
    dirs.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumRow {
    pub seed: u64,
    pub id: String,
    pub meta: Option<f64>,
    pub w: Option<f64>,
    /// Curriculum position, or `discarded`.
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOrdering {
    pub seed: u64,
    pub w_order: Vec<String>,
    pub metadata_order: Option<Vec<String>>,
    /// Wasserstein order equals metadata order, including which candidates are kept.
    pub agrees: Option<bool>,
    /// Between W_k and the metadata gap to the source, over the retained candidates.
    pub kendall_tau: Option<f64>,
    pub discarded: Vec<String>,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumReport {
    pub seeds: Vec<SeedOrdering>,
    /// Fraction of seeds with metadata whose W-order agrees with the metadata order.
    pub agreement_rate: Option<f64>,
    pub mean_kendall_tau: Option<f64>,
    pub failures: Vec<Failure>,
}

fn ordering_for(seed: u64, scenario: &Scenario, cur: &CurriculumResult) -> anyhow::Result<SeedOrdering> {
    let meta_order = metadata_curriculum(scenario)
        .ok()
        .map(|ds| ds.iter().map(|d| d.id().to_string()).collect::<Vec<_>>());
    let w_order: Vec<String> = cur.ids().into_iter().map(String::from).collect();
    let retained = cur.resolve(&scenario.candidates)?;
    let tau = scenario.source.meta().and_then(|s| {
        let gaps: Option<Vec<f64>> = retained.iter().map(|d| d.meta().map(|m| (m - s).abs())).collect();
        let w: Vec<f64> = cur.ordered.iter().map(|e| e.w).collect();
        gaps.and_then(|g| kendall_tau(&w, &g))
    });
    Ok(SeedOrdering {
        seed,
        agrees: meta_order.as_ref().map(|m| *m == w_order),
        metadata_order: meta_order,
        w_order,
        kendall_tau: tau,
        discarded: cur.discarded.iter().map(|d| d.id.clone()).collect(),
        flags: cur.flags.clone(),
    })
}

fn curriculum_rows(seed: u64, scenario: &Scenario, cur: &CurriculumResult) -> Vec<CurriculumRow> {
    let meta = |idx: usize| scenario.candidates[idx].meta();
    let mut rows: Vec<CurriculumRow> = cur
        .ordered
        .iter()
        .enumerate()
        .map(|(pos, e)| CurriculumRow {
            seed,
            id: e.id.clone(),
            meta: meta(e.index),
            w: Some(e.w),
            status: pos.to_string(),
        })
        .collect();
    rows.extend(cur.discarded.iter().map(|d| CurriculumRow {
        seed,
        id: d.id.clone(),
        meta: meta(d.index),
        w: d.w,
        status: match d.reason {
            DiscardReason::BeyondTarget => "discarded".into(),
            DiscardReason::SolverFailure(_) => "failed".into(),
        },
    }));
    rows
}

/// Builds the Wasserstein curriculum per seed and compares it with the metadata order.
/// Writes `seed_<s>/curriculum.json`, `curriculum.csv` and `curriculum_summary.json`.
pub fn curriculum(cfg: &ExperimentConfig, opts: &Options) -> anyhow::Result<CurriculumReport> {
    cfg.validate()?;
    create_dir(&opts.out)?;
    let results = per_seed(opts.jobs, &cfg.seeds, |seed| {
        let scenario = Scenario::build(&cfg.dataset, seed)?;
        let cur = build_curriculum(&scenario.source, &scenario.target, &scenario.candidates, &cfg.solver)?;
        let dir = seed_dir(&opts.out, seed);
        create_dir(&dir)?;
        cur.save(&dir.join("curriculum.json"))?;
        Ok::<_, anyhow::Error>((ordering_for(seed, &scenario, &cur)?, curriculum_rows(seed, &scenario, &cur)))
    })?;

    let mut seeds = Vec::new();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (seed, r) in cfg.seeds.iter().zip(results) {
        match r {
            Ok((o, r)) => {
                seeds.push(o);
                rows.extend(r);
            }
            Err(e) => failures.push(failure(*seed, "curriculum", &e)),
        }
    }
    let agree: Vec<f64> = seeds.iter().filter_map(|s| s.agrees).map(|a| a as u8 as f64).collect();
    let taus: Vec<f64> = seeds.iter().filter_map(|s| s.kendall_tau).collect();
    let report = CurriculumReport {
        agreement_rate: (!agree.is_empty()).then(|| mean_variance(&agree).0),
        mean_kendall_tau: (!taus.is_empty()).then(|| mean_variance(&taus).0),
        seeds,
        failures,
    };
    write_csv(&opts.out.join("curriculum.csv"), &rows)?;
    write_json(&opts.out.join("curriculum_summary.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub aggregates: Vec<Aggregate>,
    pub failures: Vec<Failure>,
    #[serde(skip)]
    pub rows: Vec<Row>,
}

impl RunReport {
    pub fn mean(&self, method: Method, metric: &str) -> Option<f64> {
        self.aggregates
            .iter()
            .find(|a| a.method == method.name() && a.metric == metric)
            .map(|a| a.mean)
    }

    /// Per-seed values of one metric, in seed order.
    pub fn values(&self, method: Method, metric: &str) -> Vec<(u64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.method == method.name() && r.metric == metric)
            .map(|r| (r.seed, r.value))
            .collect()
    }
}

fn to_rows(seed: u64, cell: &str, metrics: Vec<Metric>) -> impl Iterator<Item = Row> + '_ {
    metrics.into_iter().map(move |(metric, value)| Row {
        seed,
        method: cell.to_string(),
        metric: metric.to_string(),
        value,
    })
}

/// Runs every configured method on every seed. Writes `results.csv` (one row per seed,
/// method and metric), `summary.json`, `summary.csv` and, when enabled, per-cell artifacts
/// under `seed_<s>/<method>/` (see [`Artifacts`]). Failed cells are listed in the summary and do not stop the run.
pub fn run(cfg: &ExperimentConfig, opts: &Options) -> anyhow::Result<RunReport> {
    cfg.validate()?;
    create_dir(&opts.out)?;
    let per = per_seed(opts.jobs, &cfg.seeds, |seed| {
        let mut rows = Vec::new();
        let mut fails = Vec::new();
        let scenario = match Scenario::build(&cfg.dataset, seed) {
            Ok(s) => s,
            Err(e) => {
                fails.extend(cfg.methods.iter().map(|m| failure(seed, m.name(), &e)));
                return (rows, fails);
            }
        };
        let mut eval = SeedEvaluator::new(&scenario, cfg);
        for &method in &cfg.methods {
            let dir = seed_dir(&opts.out, seed).join(method.name());
            let artifacts = (cfg.artifacts != Artifacts::None).then_some((dir.as_path(), cfg.artifacts));
            let res = eval.evaluate(method, artifacts);
            match res {
                Ok(m) => rows.extend(to_rows(seed, method.name(), m)),
                Err(e) => fails.push(failure(seed, method.name(), &e)),
            }
        }
        if cfg.artifacts != Artifacts::None {
            let dir = seed_dir(&opts.out, seed);
            let saved = create_dir(&dir).and_then(|_| Ok(eval.curriculum()?.save(&dir.join("curriculum.json"))?));
            if let Err(e) = saved {
                fails.push(failure(seed, "curriculum", &e));
            }
        }
        (rows, fails)
    })?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (r, f) in per {
        rows.extend(r);
        failures.extend(f);
    }
    sort_rows(&mut rows);
    let report = RunReport {
        methods: cfg.methods.clone(),
        seeds: cfg.seeds.clone(),
        aggregates: aggregate(&rows),
        failures,
        rows,
    };
    write_csv(&opts.out.join("results.csv"), &report.rows)?;
    write_csv(&opts.out.join("summary.csv"), &report.aggregates)?;
    write_json(&opts.out.join("summary.json"), &report)?;
    Ok(report)
}

/// One toggled comparison of the ablation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    /// Delimited domains against random batches of the pooled intermediate data.
    Partitioning,
    /// Wasserstein-ordered curriculum against a random permutation of it.
    Ordering,
    /// Bidirectional refinement with and without path consistency.
    Consistency,
}

impl Arm {
    pub const ALL: [Arm; 3] = [Arm::Partitioning, Arm::Ordering, Arm::Consistency];

    pub fn name(self) -> &'static str {
        match self {
            Arm::Partitioning => "partitioning",
            Arm::Ordering => "ordering",
            Arm::Consistency => "consistency",
        }
    }

    /// Variant names; the first is the full method.
    pub fn variants(self) -> [&'static str; 2] {
        match self {
            Arm::Partitioning => ["delimited", "pooled"],
            Arm::Ordering => ["ordered", "shuffled"],
            Arm::Consistency => ["eta_p_on", "eta_p_off"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub seed: u64,
    pub arm: String,
    pub variant: String,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub arm: Arm,
    /// Aggregates with `method` holding the variant name.
    pub aggregates: Vec<Aggregate>,
    pub rows: Vec<AblationRow>,
}

impl ArmReport {
    pub fn mean(&self, variant: &str, metric: &str) -> Option<f64> {
        self.aggregates
            .iter()
            .find(|a| a.method == variant && a.metric == metric)
            .map(|a| a.mean)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub arms: Vec<ArmReport>,
    pub failures: Vec<Failure>,
}

impl AblationReport {
    pub fn arm(&self, arm: Arm) -> &ArmReport {
        self.arms.iter().find(|a| a.arm == arm).expect("every arm is reported")
    }
}

/// The candidates' rows pooled, shuffled and cut into batches of the original sizes.
fn pooled_batches(scenario: &Scenario) -> anyhow::Result<Vec<Domain>> {
    let parts: Vec<&Domain> = scenario.candidates.iter().collect();
    if parts.is_empty() {
        return Ok(Vec::new());
    }
    let pool = Domain::pool("pool", &parts)?;
    let mut rows: Vec<usize> = (0..pool.len()).collect();
    rows.shuffle(&mut shuffle_rng(scenario.seed, 2));
    let mut start = 0;
    let mut batches = Vec::new();
    for (k, c) in scenario.candidates.iter().enumerate() {
        let idx = &rows[start..start + c.len()];
        batches.push(pool.select(idx)?.with_id(format!("batch{k}")));
        start += c.len();
    }
    Ok(batches)
}

fn ablation_cell(
    eval: &mut SeedEvaluator<'_>,
    arm: Arm,
    variant: usize,
    solver: &SolverConfig,
) -> anyhow::Result<Vec<Metric>> {
    let scenario = eval.scenario();
    let route: Vec<Domain>;
    let refs: Vec<&Domain> = match (arm, variant) {
        (Arm::Partitioning | Arm::Ordering, 0) => eval.curriculum_domains()?,
        (Arm::Partitioning, _) => {
            let batches = pooled_batches(scenario)?;
            let cur = build_curriculum(&scenario.source, &scenario.target, &batches, solver)?;
            let keep: Vec<usize> = cur.ordered.iter().map(|e| e.index).collect();
            route = keep.into_iter().map(|i| batches[i].clone()).collect();
            route.iter().collect()
        }
        (Arm::Ordering, _) => {
            let mut r = eval.curriculum_domains()?;
            r.shuffle(&mut shuffle_rng(scenario.seed, 1));
            r
        }
        (Arm::Consistency, v) => {
            let solver = SolverConfig {
                eta_p: if v == 0 { solver.eta_p } else { 0.0 },
                ..solver.clone()
            };
            let result = eval.refine(RefineMode::Bidirectional, &solver)?;
            return eval.metrics(result.mapped_source.view());
        }
    };
    let mapped = eval.transfer(&refs)?.mapped_source().to_owned();
    eval.metrics(mapped.view())
}

/// Runs the three ablation arms on every seed. Writes `ablation.csv` and `ablation.json`.
pub fn ablate(cfg: &ExperimentConfig, opts: &Options) -> anyhow::Result<AblationReport> {
    ablate_arms(cfg, opts, &Arm::ALL)
}

/// [`ablate`] restricted to `arms`.
pub fn ablate_arms(cfg: &ExperimentConfig, opts: &Options, arms: &[Arm]) -> anyhow::Result<AblationReport> {
    cfg.validate()?;
    create_dir(&opts.out)?;
    let per = per_seed(opts.jobs, &cfg.seeds, |seed| {
        let mut rows = Vec::new();
        let mut fails = Vec::new();
        let scenario = match Scenario::build(&cfg.dataset, seed) {
            Ok(s) => s,
            Err(e) => {
                fails.push(failure(seed, "ablation", &e));
                return (rows, fails);
            }
        };
        let mut eval = SeedEvaluator::new(&scenario, cfg);
        for &arm in arms {
            for (v, name) in arm.variants().into_iter().enumerate() {
                match ablation_cell(&mut eval, arm, v, &cfg.solver) {
                    Ok(m) => rows.extend(m.into_iter().map(|(metric, value)| AblationRow {
                        seed,
                        arm: arm.name().into(),
                        variant: name.into(),
                        metric: metric.into(),
                        value,
                    })),
                    Err(e) => fails.push(failure(seed, format!("{}/{name}", arm.name()), &e)),
                }
            }
        }
        (rows, fails)
    })?;
    let mut all = Vec::new();
    let mut failures = Vec::new();
    for (r, f) in per {
        all.extend(r);
        failures.extend(f);
    }
    let arms = arms
        .iter()
        .map(|&arm| {
            let rows: Vec<AblationRow> = all.iter().filter(|r| r.arm == arm.name()).cloned().collect();
            let flat: Vec<Row> = rows
                .iter()
                .map(|r| Row {
                    seed: r.seed,
                    method: r.variant.clone(),
                    metric: r.metric.clone(),
                    value: r.value,
                })
                .collect();
            ArmReport {
                arm,
                aggregates: aggregate(&flat),
                rows,
            }
        })
        .collect();
    let report = AblationReport { arms, failures };
    write_csv(&opts.out.join("ablation.csv"), &all)?;
    write_json(&opts.out.join("ablation.json"), &report)?;
    Ok(report)
}
