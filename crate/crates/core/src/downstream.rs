//! Predictors trained on the mapped source with the source labels.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classification,
    Regression,
}

fn check_train(train_x: ArrayView2<'_, f64>, n_labels: usize, test_x: ArrayView2<'_, f64>) -> Result<()> {
    if train_x.nrows() == 0 {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if train_x.nrows() != n_labels {
        return Err(Error::ShapeMismatch(format!(
            "{} training rows but {n_labels} labels",
            train_x.nrows()
        )));
    }
    if train_x.ncols() != test_x.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "training features have dimension {}, test features {}",
            train_x.ncols(),
            test_x.ncols()
        )));
    }
    Ok(())
}

/// k-nearest-neighbour vote under Euclidean distance.
///
/// Equidistant neighbours are taken in training order; a tied vote goes to the smaller label.
pub fn fit_predict_knn(
    train_x: ArrayView2<'_, f64>,
    train_y: &[i64],
    test_x: ArrayView2<'_, f64>,
    k: usize,
) -> Result<Vec<i64>> {
    check_train(train_x, train_y.len(), test_x)?;
    if k == 0 || k > train_x.nrows() {
        return Err(Error::InvalidArgument(format!(
            "k must be in 1..={}, got {k}",
            train_x.nrows()
        )));
    }
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(train_x.nrows());
    let mut out = Vec::with_capacity(test_x.nrows());
    for q in test_x.rows() {
        order.clear();
        for (j, t) in train_x.rows().into_iter().enumerate() {
            let d: f64 = q.iter().zip(t.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            order.push((d, j));
        }
        if k < order.len() {
            order.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        let mut votes: BTreeMap<i64, usize> = BTreeMap::new();
        for &(_, j) in &order[..k] {
            *votes.entry(train_y[j]).or_default() += 1;
        }
        // Labels iterate ascending and only a strictly larger count replaces the leader.
        let label = votes
            .iter()
            .fold((i64::MAX, 0usize), |best, (&l, &c)| if c > best.1 { (l, c) } else { best })
            .0;
        out.push(label);
    }
    Ok(out)
}

/// Closed-form ridge regression with an unpenalized intercept.
///
/// At `ridge = 0` a rank-deficient design is reported as [`Error::SingularSystem`].
pub fn fit_predict_ridge(
    train_x: ArrayView2<'_, f64>,
    train_y: &[f64],
    test_x: ArrayView2<'_, f64>,
    ridge: f64,
) -> Result<Vec<f64>> {
    check_train(train_x, train_y.len(), test_x)?;
    if !(ridge.is_finite() && ridge >= 0.0) {
        return Err(Error::InvalidArgument(format!("ridge must be nonnegative, got {ridge}")));
    }
    let (coef, intercept) = ridge_fit(train_x, ArrayView1::from(train_y), ridge)?;
    Ok((test_x.dot(&coef) + intercept).to_vec())
}

pub(crate) fn ridge_fit(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, ridge: f64) -> Result<(Array1<f64>, f64)> {
    let x_mean = x.mean_axis(Axis(0)).expect("nonempty");
    let y_mean = y.mean().expect("nonempty");
    let xc = &x - &x_mean;
    let yc = &y - y_mean;
    let mut gram = xc.t().dot(&xc);
    for i in 0..gram.nrows() {
        gram[[i, i]] += ridge;
    }
    let rhs = xc.t().dot(&yc);
    let coef = solve_linear(gram, rhs)?;
    let intercept = y_mean - x_mean.dot(&coef);
    Ok((coef, intercept))
}

/// Gaussian elimination with partial pivoting.
fn solve_linear(mut a: Array2<f64>, mut b: Array1<f64>) -> Result<Array1<f64>> {
    let n = b.len();
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[[i, col]].abs().total_cmp(&a[[j, col]].abs()))
            .expect("nonempty range");
        if a[[piv, col]].abs() <= 1e-12 * scale {
            return Err(Error::SingularSystem);
        }
        if piv != col {
            for j in 0..n {
                a.swap([piv, j], [col, j]);
            }
            b.swap(piv, col);
        }
        for i in col + 1..n {
            let f = a[[i, col]] / a[[col, col]];
            if f != 0.0 {
                for j in col..n {
                    a[[i, j]] -= f * a[[col, j]];
                }
                b[i] -= f * b[col];
            }
        }
    }
    let mut x = Array1::zeros(n);
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[[i, j]] * x[j]).sum();
        x[i] = (b[i] - s) / a[[i, i]];
    }
    Ok(x)
}

/// Accuracy for classification, mean squared error for regression.
pub fn score(pred: &[f64], truth: &[f64], task: Task) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions for {} targets",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::InvalidArgument("nothing to score".into()));
    }
    let n = pred.len() as f64;
    Ok(match task {
        Task::Classification => pred.iter().zip(truth).filter(|(p, t)| p == t).count() as f64 / n,
        Task::Regression => pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n,
    })
}

/// [`score`] for integer class labels.
pub fn accuracy(pred: &[i64], truth: &[i64]) -> Result<f64> {
    let p: Vec<f64> = pred.iter().map(|&v| v as f64).collect();
    let t: Vec<f64> = truth.iter().map(|&v| v as f64).collect();
    score(&p, &t, Task::Classification)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn tied_vote_goes_to_smaller_label() {
        let x = array![[0.0], [2.0]];
        let pred = fit_predict_knn(x.view(), &[7, 3], array![[1.0]].view(), 2).unwrap();
        assert_eq!(pred, vec![3]);
    }

    #[test]
    fn k_out_of_range() {
        let x = array![[0.0], [2.0]];
        assert!(fit_predict_knn(x.view(), &[0, 1], x.view(), 3).is_err());
        assert!(fit_predict_knn(x.view(), &[0, 1], x.view(), 0).is_err());
    }

    #[test]
    fn singular_at_zero_ridge() {
        let x = array![[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]];
        let err = fit_predict_ridge(x.view(), &[1.0, 2.0, 3.0], x.view(), 0.0);
        assert!(matches!(err, Err(Error::SingularSystem)));
        assert!(fit_predict_ridge(x.view(), &[1.0, 2.0, 3.0], x.view(), 1e-3).is_ok());
    }
}
