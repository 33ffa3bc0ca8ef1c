//! Exact unregularized OT for oracle-sized instances, by successive shortest augmenting
//! paths on the transportation network.

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

const MAX_ENTRIES: usize = 64;
const EPS: f64 = 1e-15;

/// Minimum-cost transport plan and its cost.
pub(crate) fn solve(cost: ArrayView2<'_, f64>, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Result<(f64, Array2<f64>)> {
    let (n, m) = cost.dim();
    if n * m > MAX_ENTRIES {
        return Err(Error::InstanceTooLarge { rows: n, cols: m });
    }
    if a.len() != n || b.len() != m {
        return Err(Error::ShapeMismatch(format!(
            "cost is {n}x{m} but marginals have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b.iter()).any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidArgument("marginals must be finite and nonnegative".into()));
    }
    if (a.sum() - b.sum()).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "marginal masses differ: {} vs {}",
            a.sum(),
            b.sum()
        )));
    }

    let mut supply = a.to_vec();
    let mut demand = b.to_vec();
    let mut flow = Array2::<f64>::zeros((n, m));

    // Nodes 0..n are sources, n..n+m sinks. Forward arcs i -> j carry unlimited flow at
    // cost c_ij; a backward arc j -> i exists while flow_ij > 0, at cost -c_ij.
    while supply.iter().any(|&s| s > EPS) && demand.iter().any(|&d| d > EPS) {
        let nodes = n + m;
        let mut dist = vec![f64::INFINITY; nodes];
        let mut pred: Vec<Option<usize>> = vec![None; nodes];
        for i in 0..n {
            if supply[i] > EPS {
                dist[i] = 0.0;
            }
        }
        // Bellman-Ford. Residual costs of the current flow admit no negative cycle, so
        // nodes - 1 relaxation rounds suffice.
        for _ in 0..nodes {
            let mut changed = false;
            for i in 0..n {
                for j in 0..m {
                    let c = cost[[i, j]];
                    if dist[i] + c < dist[n + j] - 1e-15 {
                        dist[n + j] = dist[i] + c;
                        pred[n + j] = Some(i);
                        changed = true;
                    }
                    if flow[[i, j]] > EPS && dist[n + j] - c < dist[i] - 1e-15 {
                        dist[i] = dist[n + j] - c;
                        pred[i] = Some(n + j);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }

        let Some(sink) = (0..m)
            .filter(|&j| demand[j] > EPS && dist[n + j].is_finite())
            .min_by(|&x, &y| dist[n + x].total_cmp(&dist[n + y]))
        else {
            break;
        };

        // Walk back to the originating source, collecting the bottleneck.
        let mut path = Vec::new();
        let mut node = n + sink;
        while let Some(p) = pred[node] {
            path.push((p, node));
            node = p;
        }
        let origin = node;
        let mut delta = supply[origin].min(demand[sink]);
        for &(from, to) in &path {
            if from >= n {
                // Backward arc: sink `from` back to source `to` cancels flow.
                delta = delta.min(flow[[to, from - n]]);
            }
        }
        for &(from, to) in &path {
            if from < n {
                flow[[from, to - n]] += delta;
            } else {
                flow[[to, from - n]] -= delta;
                if flow[[to, from - n]] < EPS {
                    flow[[to, from - n]] = 0.0;
                }
            }
        }
        supply[origin] -= delta;
        demand[sink] -= delta;
    }

    let total = flow.iter().zip(cost.iter()).map(|(x, c)| x * c).sum();
    Ok((total, flow))
}
