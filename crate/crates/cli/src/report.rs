//! Result rows, aggregates and rank statistics.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

/// One (seed, method, metric) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub seed: u64,
    pub method: String,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub method: String,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample variance; zero for a single seed.
    pub variance: f64,
}

pub fn mean_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, variance)
}

/// Groups rows by (method, metric) in lexicographic order.
pub fn aggregate(rows: &[Row]) -> Vec<Aggregate> {
    let mut groups: BTreeMap<(&str, &str), Vec<f64>> = BTreeMap::new();
    for r in rows {
        groups.entry((&r.method, &r.metric)).or_default().push(r.value);
    }
    groups
        .into_iter()
        .map(|((method, metric), values)| {
            let (mean, variance) = mean_variance(&values);
            Aggregate {
                method: method.to_string(),
                metric: metric.to_string(),
                n: values.len(),
                mean,
                variance,
            }
        })
        .collect()
}

pub fn sort_rows(rows: &mut [Row]) {
    rows.sort_by(|a, b| {
        (a.seed, &a.method, &a.metric)
            .cmp(&(b.seed, &b.method, &b.metric))
    });
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> anyhow::Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    r.deserialize()
        .map(|row| row.with_context(|| format!("reading {}", path.display())))
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Kendall's tau-a between two scorings of the same items. Pairs tied in either scoring
/// count as neither concordant nor discordant. `None` for fewer than two items.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "kendall_tau needs paired scores");
    let n = x.len();
    if n < 2 {
        return None;
    }
    let mut s = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            let a = (x[i] - x[j]).signum() * (y[i] - y[j]).signum();
            if x[i] != x[j] && y[i] != y[j] {
                s += a as i64;
            }
        }
    }
    Some(s as f64 / (n * (n - 1) / 2) as f64)
}
