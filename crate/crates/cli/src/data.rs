//! Per-seed domain construction.

use std::path::Path;

use anyhow::{bail, Context};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wmpot::domain::{make_half_moons, rotate_domain, subsample};
use wmpot::io::{load_idx_images, save_csv_domain, LabelKind, Manifest, ManifestEntry, Role};
use wmpot::Domain;

use crate::config::DatasetSpec;

/// Source, target and candidate intermediates for one seed. Candidates come in a seeded
/// random order so nothing downstream can lean on the listing order.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub seed: u64,
    pub source: Domain,
    pub target: Domain,
    pub candidates: Vec<Domain>,
}

/// Deterministic sub-seed for domain `k` of experiment seed `seed`.
pub fn domain_seed(seed: u64, k: u64) -> u64 {
    let mut z = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ k.wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeded RNG for shuffles and random batches, independent of the domain samples.
pub fn shuffle_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(domain_seed(seed, u64::MAX - stream))
}

fn angle_id(angle: f64) -> String {
    format!("rot{angle}")
}

impl Scenario {
    pub fn build(spec: &DatasetSpec, seed: u64) -> anyhow::Result<Self> {
        let (source, target, mut candidates) = match spec {
            DatasetSpec::HalfMoons {
                points_per_moon,
                noise,
                source_angle,
                target_angle,
                candidate_angles,
                center,
            } => {
                let make = |k: u64, angle: f64| -> anyhow::Result<Domain> {
                    let base = make_half_moons(*points_per_moon, *noise, domain_seed(seed, k))?;
                    Ok(rotate_domain(&base, angle, *center)?.with_id(angle_id(angle)))
                };
                let source = make(0, *source_angle)?;
                let target = make(1, *target_angle)?;
                let candidates = candidate_angles
                    .iter()
                    .enumerate()
                    .map(|(k, &a)| make(k as u64 + 2, a))
                    .collect::<anyhow::Result<Vec<_>>>()?;
                (source, target, candidates)
            }
            DatasetSpec::RotatedImages {
                images,
                labels,
                points,
                source_angle,
                target_angle,
                candidate_angles,
            } => {
                let pool = load_idx_images(images, Some(labels))?;
                let make = |k: u64, angle: f64| -> anyhow::Result<Domain> {
                    let part = subsample(&pool, *points, domain_seed(seed, k))?;
                    Ok(rotate_domain(&part, angle, Default::default())?.with_id(angle_id(angle)))
                };
                let source = make(0, *source_angle)?;
                let target = make(1, *target_angle)?;
                let candidates = candidate_angles
                    .iter()
                    .enumerate()
                    .map(|(k, &a)| make(k as u64 + 2, a))
                    .collect::<anyhow::Result<Vec<_>>>()?;
                (source, target, candidates)
            }
            DatasetSpec::Manifest { path } => {
                let manifest = Manifest::load(path)?;
                let base = path.parent().unwrap_or(Path::new("."));
                let loaded = manifest
                    .resolve(base)
                    .with_context(|| format!("resolving manifest {}", path.display()))?;
                (loaded.source, loaded.target, loaded.intermediates)
            }
        };
        if source.labels().is_none() {
            bail!("source domain `{}` has no labels", source.id());
        }
        candidates.shuffle(&mut shuffle_rng(seed, 0));
        Ok(Scenario {
            seed,
            source,
            target,
            candidates,
        })
    }

    /// Writes every domain as CSV plus a `manifest.json` that reads them back.
    pub fn save(&self, dir: &Path) -> anyhow::Result<()> {
        let mut entries = Vec::new();
        let mut put = |d: &Domain, role: Role| -> anyhow::Result<()> {
            let file = format!("{}.csv", d.id());
            save_csv_domain(d, &dir.join(&file))?;
            entries.push(ManifestEntry {
                id: d.id().to_string(),
                path: file.into(),
                role,
                meta: d.meta(),
            });
            Ok(())
        };
        put(&self.source, Role::Source)?;
        let mut sorted: Vec<&Domain> = self.candidates.iter().collect();
        sorted.sort_by(|a, b| a.id().cmp(b.id()));
        for d in sorted {
            put(d, Role::Intermediate)?;
        }
        put(&self.target, Role::Target)?;
        let label_kind = match self.source.labels() {
            Some(wmpot::Labels::Real(_)) => LabelKind::Real,
            _ => LabelKind::Class,
        };
        Manifest {
            label_kind,
            domains: entries,
        }
        .save(&dir.join("manifest.json"))?;
        Ok(())
    }
}
