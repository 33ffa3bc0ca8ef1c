//! Method pipelines for one seed, sharing curriculum and transfer paths between methods.

use std::collections::HashMap;
use std::path::Path;

use anyhow::{bail, Context};
use ndarray::ArrayView2;
use wmpot::cot::{continuous_transfer, scatter_csv, TransferPath};
use wmpot::curriculum::{build_curriculum, CurriculumResult};
use wmpot::downstream::{accuracy, fit_predict_knn, fit_predict_ridge, score, Task};
use wmpot::mpot::{refine_paths, MultiPathResult, RefineMode};
use wmpot::ot::wasserstein_points;
use wmpot::{Domain, Labels, SolverConfig};

use crate::config::{Artifacts, ExperimentConfig, Method, PathSpec};
use crate::data::Scenario;

/// A named scalar result of one method on one seed.
pub type Metric = (&'static str, f64);

/// Intermediates ordered by their metadata distance to the source, keeping those no farther
/// than the target. Ties fall back to the id.
pub fn metadata_curriculum(scenario: &Scenario) -> anyhow::Result<Vec<&Domain>> {
    let meta = |d: &Domain| d.meta().with_context(|| format!("domain `{}` has no metadata", d.id()));
    let s = meta(&scenario.source)?;
    let reach = (meta(&scenario.target)? - s).abs();
    let mut keyed = Vec::new();
    for c in &scenario.candidates {
        let gap = (meta(c)? - s).abs();
        if gap <= reach {
            keyed.push((gap, c));
        }
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.id().cmp(b.1.id())));
    Ok(keyed.into_iter().map(|(_, c)| c).collect())
}

pub struct SeedEvaluator<'a> {
    scenario: &'a Scenario,
    cfg: &'a ExperimentConfig,
    curriculum: Option<CurriculumResult>,
    paths: HashMap<Vec<String>, TransferPath>,
}

impl<'a> SeedEvaluator<'a> {
    pub fn new(scenario: &'a Scenario, cfg: &'a ExperimentConfig) -> Self {
        SeedEvaluator {
            scenario,
            cfg,
            curriculum: None,
            paths: HashMap::new(),
        }
    }

    pub fn scenario(&self) -> &'a Scenario {
        self.scenario
    }

    pub fn curriculum(&mut self) -> anyhow::Result<&CurriculumResult> {
        if self.curriculum.is_none() {
            let s = self.scenario;
            self.curriculum = Some(build_curriculum(&s.source, &s.target, &s.candidates, &self.cfg.solver)?);
        }
        Ok(self.curriculum.as_ref().expect("just built"))
    }

    /// The retained curriculum domains, source side first.
    pub fn curriculum_domains(&mut self) -> anyhow::Result<Vec<&'a Domain>> {
        let s = self.scenario;
        Ok(self.curriculum()?.resolve(&s.candidates)?)
    }

    fn by_ids(&self, ids: &[String]) -> anyhow::Result<Vec<&'a Domain>> {
        let s = self.scenario;
        ids.iter()
            .map(|id| {
                s.candidates
                    .iter()
                    .find(|d| d.id() == id)
                    .with_context(|| format!("path lists unknown domain `{id}`"))
            })
            .collect()
    }

    pub fn path1_route(&mut self) -> anyhow::Result<Vec<&'a Domain>> {
        match &self.cfg.path1 {
            Some(ids) => self.by_ids(ids),
            None => self.curriculum_domains(),
        }
    }

    pub fn path2_route(&mut self) -> anyhow::Result<Vec<&'a Domain>> {
        match &self.cfg.path2 {
            PathSpec::Ids(ids) => self.by_ids(ids),
            PathSpec::OddIndexed => Ok(self.curriculum_domains()?.into_iter().skip(1).step_by(2).collect()),
        }
    }

    /// Sequential transport through `route`, computed once per distinct route.
    pub fn transfer(&mut self, route: &[&Domain]) -> anyhow::Result<&TransferPath> {
        let key: Vec<String> = route.iter().map(|d| d.id().to_string()).collect();
        if !self.paths.contains_key(&key) {
            let s = self.scenario;
            let path = continuous_transfer(&s.source, route, &s.target, &self.cfg.solver)?;
            self.paths.insert(key.clone(), path);
        }
        Ok(&self.paths[&key])
    }

    /// Both paths' sequential transport, then a final-hop refinement under `solver`.
    pub fn refine(&mut self, mode: RefineMode, solver: &SolverConfig) -> anyhow::Result<MultiPathResult> {
        let r1 = self.path1_route()?;
        let r2 = self.path2_route()?;
        let p1 = self.transfer(&r1)?.clone();
        let p2 = self.transfer(&r2)?.clone();
        Ok(refine_paths(p1, p2, &self.scenario.target, mode, solver)?)
    }

    /// Target metrics of a mapped source: the downstream score (`accuracy` or `mse`, when the
    /// target is labeled) and `w_target`, the entropic Wasserstein objective to the target.
    pub fn metrics(&self, mapped: ArrayView2<'_, f64>) -> anyhow::Result<Vec<Metric>> {
        let s = self.scenario;
        let t = &s.target;
        let mut out = Vec::new();
        match (s.source.labels(), t.labels()) {
            (Some(Labels::Class(ys)), Some(Labels::Class(yt))) => {
                let pred = fit_predict_knn(mapped, ys, t.features(), self.cfg.downstream.k)?;
                out.push(("accuracy", accuracy(&pred, yt)?));
            }
            (Some(Labels::Real(ys)), Some(Labels::Real(yt))) => {
                let pred = fit_predict_ridge(mapped, ys, t.features(), self.cfg.downstream.ridge)?;
                out.push(("mse", score(&pred, yt, Task::Regression)?));
            }
            (_, None) => {}
            _ => bail!("source and target labels are of different kinds"),
        }
        let w = wasserstein_points(mapped, s.source.weights(), t.features(), t.weights(), &self.cfg.solver)?;
        out.push(("w_target", w.value));
        Ok(out)
    }

    /// Runs `method`; with `artifacts` set, writes its files into that directory.
    pub fn evaluate(&mut self, method: Method, artifacts: Option<(&Path, Artifacts)>) -> anyhow::Result<Vec<Metric>> {
        if let Some(mode) = method.refine_mode() {
            let solver = self.cfg.solver.clone();
            let result = self.refine(mode, &solver)?;
            if let Some((dir, level)) = artifacts {
                save_refined(&result, &self.scenario.target, dir, level)?;
            }
            return self.metrics(result.mapped_source.view());
        }
        let route = match method {
            Method::Dot => Vec::new(),
            Method::CotMeta => metadata_curriculum(self.scenario)?,
            _ => self.curriculum_domains()?,
        };
        let path = self.transfer(&route)?;
        if let Some((dir, level)) = artifacts {
            save_path(path, dir, level)?;
        }
        let mapped = path.mapped_source().to_owned();
        self.metrics(mapped.view())
    }
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// `Full` is [`TransferPath::save`]; `Scatter` keeps the per-hop scatter files and diagnostics.
pub fn save_path(path: &TransferPath, dir: &Path, level: Artifacts) -> anyhow::Result<()> {
    match level {
        Artifacts::None => Ok(()),
        Artifacts::Full => {
            std::fs::create_dir_all(dir)?;
            Ok(path.save(dir)?)
        }
        Artifacts::Scatter => {
            for k in 0..path.hops() {
                let text = scatter_csv(k, path.mapped[k].view(), path.hop_points[k].view());
                write(&dir.join(format!("scatter_{k}.csv")), &text)?;
            }
            let meta = serde_json::json!({
                "sequence": path.sequence,
                "per_hop_diagnostics": path.per_hop_diagnostics,
            });
            write(&dir.join("diagnostics.json"), &serde_json::to_string_pretty(&meta)?)
        }
    }
}

fn save_refined(result: &MultiPathResult, target: &Domain, dir: &Path, level: Artifacts) -> anyhow::Result<()> {
    match level {
        Artifacts::None => Ok(()),
        Artifacts::Full => {
            std::fs::create_dir_all(dir)?;
            Ok(result.save(dir)?)
        }
        Artifacts::Scatter => {
            save_path(&result.path1, &dir.join("path1"), level)?;
            save_path(&result.path2, &dir.join("path2"), level)?;
            let hop = result.path1.hops().max(result.path2.hops()) - 1;
            write(
                &dir.join("scatter_refined.csv"),
                &scatter_csv(hop, result.mapped_source.view(), target.features()),
            )?;
            let meta = serde_json::json!({
                "mode": result.mode,
                "objective_trace": result.objective_trace,
                "converged": result.converged,
            });
            write(&dir.join("refinement.json"), &serde_json::to_string_pretty(&meta)?)
        }
    }
}
