#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wmpot::domain::{make_half_moons, rotate_domain, RotationCenter};
use wmpot::Domain;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0))
}

/// Strictly positive matrix with total mass one.
pub fn positive_plan(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Array2<f64> {
    let p = Array2::from_shape_fn((n, m), |_| rng.random_range(0.05..1.0));
    let s = p.sum();
    p / s
}

pub fn simplex(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
    let w = Array1::from_shape_fn(n, |_| rng.random_range(0.2..1.0));
    let s = w.sum();
    w / s
}

/// Central differences of `f` at `x`, one entry at a time.
pub fn finite_difference(f: impl Fn(&Array2<f64>) -> f64, x: &Array2<f64>, h: f64) -> Array2<f64> {
    let mut g = Array2::zeros(x.raw_dim());
    let mut probe = x.clone();
    for idx in ndarray::indices(x.raw_dim()) {
        let x0 = probe[idx];
        probe[idx] = x0 + h;
        let up = f(&probe);
        probe[idx] = x0 - h;
        let down = f(&probe);
        probe[idx] = x0;
        g[idx] = (up - down) / (2.0 * h);
    }
    g
}

/// Largest entrywise error relative to the largest gradient entry.
pub fn relative_error(approx: &Array2<f64>, exact: &Array2<f64>) -> f64 {
    let scale = exact.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    approx.iter().zip(exact.iter()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale
}

/// Half moons (`n` points per moon) rotated about the origin, labeled with the angle.
pub fn moons_at(n: usize, noise: f64, seed: u64, angle: f64) -> Domain {
    let d = make_half_moons(n, noise, seed).unwrap();
    rotate_domain(&d, angle, RotationCenter::Origin)
        .unwrap()
        .with_id(format!("rot{angle}"))
}

pub fn max_abs_diff(a: ndarray::ArrayView2<'_, f64>, b: ndarray::ArrayView2<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}
