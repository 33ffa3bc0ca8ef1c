//! Domains: point clouds carrying an empirical probability measure and optional labels.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sample labels. Class ids for classification, reals for regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Labels {
    Class(Vec<i64>),
    Real(Vec<f64>),
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Labels::Class(v) => v.len(),
            Labels::Real(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_class(&self) -> Option<&[i64]> {
        match self {
            Labels::Class(v) => Some(v),
            Labels::Real(_) => None,
        }
    }

    pub fn as_real(&self) -> Option<&[f64]> {
        match self {
            Labels::Real(v) => Some(v),
            Labels::Class(_) => None,
        }
    }

    fn select(&self, rows: &[usize]) -> Labels {
        match self {
            Labels::Class(v) => Labels::Class(rows.iter().map(|&i| v[i]).collect()),
            Labels::Real(v) => Labels::Real(rows.iter().map(|&i| v[i]).collect()),
        }
    }
}

/// A point cloud with an empirical measure.
///
/// Immutable once built: every constructor goes through [`Domain::validate`], and the
/// builder-style methods return new values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    id: String,
    features: Array2<f64>,
    labels: Option<Labels>,
    weights: Array1<f64>,
    meta: Option<f64>,
    image_shape: Option<(usize, usize)>,
}

impl Domain {
    /// Builds a domain with the uniform measure.
    pub fn new(id: impl Into<String>, features: Array2<f64>, labels: Option<Labels>) -> Result<Self> {
        let n = features.nrows();
        let weights = if n == 0 {
            Array1::zeros(0)
        } else {
            Array1::from_elem(n, 1.0 / n as f64)
        };
        Self::with_weights(id, features, labels, weights)
    }

    pub fn with_weights(
        id: impl Into<String>,
        features: Array2<f64>,
        labels: Option<Labels>,
        weights: Array1<f64>,
    ) -> Result<Self> {
        let domain = Domain {
            id: id.into(),
            features,
            labels,
            weights,
            meta: None,
            image_shape: None,
        };
        domain.validate()?;
        Ok(domain)
    }

    /// Checks every domain invariant.
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| {
            Err(Error::InvalidDomain {
                id: self.id.clone(),
                reason,
            })
        };
        let (n, d) = self.features.dim();
        if n == 0 || d == 0 {
            return fail(format!("needs at least one sample and one feature, got {n}x{d}"));
        }
        if let Some((i, j)) = self
            .features
            .indexed_iter()
            .find(|(_, v)| !v.is_finite())
            .map(|(ix, _)| ix)
        {
            return fail(format!("non-finite feature at ({i}, {j})"));
        }
        if self.weights.len() != n {
            return fail(format!("{} weights for {n} samples", self.weights.len()));
        }
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return fail("weights must be finite and nonnegative".into());
        }
        let total: f64 = self.weights.sum();
        if (total - 1.0).abs() > 1e-12 {
            return fail(format!("weights sum to {total}, not 1"));
        }
        if let Some(labels) = &self.labels {
            if labels.len() != n {
                return fail(format!("{} labels for {n} samples", labels.len()));
            }
        }
        if let Some((h, w)) = self.image_shape {
            if h * w != d {
                return fail(format!("image shape {h}x{w} does not match {d} features"));
            }
        }
        Ok(())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn labels(&self) -> Option<&Labels> {
        self.labels.as_ref()
    }

    pub fn weights(&self) -> ArrayView1<'_, f64> {
        self.weights.view()
    }

    pub fn meta(&self) -> Option<f64> {
        self.meta
    }

    pub fn image_shape(&self) -> Option<(usize, usize)> {
        self.image_shape
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn with_meta(mut self, meta: Option<f64>) -> Self {
        self.meta = meta;
        self
    }

    pub fn without_labels(mut self) -> Self {
        self.labels = None;
        self
    }

    /// Flags the domain as a stack of `height x width` row-major images.
    pub fn with_image_shape(mut self, height: usize, width: usize) -> Result<Self> {
        self.image_shape = Some((height, width));
        self.validate()?;
        Ok(self)
    }

    /// Same measure and labels, new feature matrix. Used for mapped point clouds.
    pub fn with_features(&self, features: Array2<f64>) -> Result<Self> {
        if features.nrows() != self.len() {
            return Err(Error::ShapeMismatch(format!(
                "replacement features have {} rows, domain has {}",
                features.nrows(),
                self.len()
            )));
        }
        let mut out = self.clone();
        out.image_shape = out.image_shape.filter(|(h, w)| h * w == features.ncols());
        out.features = features;
        out.validate()?;
        Ok(out)
    }

    /// Restricts the domain to `rows` (in that order) and re-uniformizes the weights.
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        let features = self.features.select(Axis(0), rows);
        let labels = self.labels.as_ref().map(|l| l.select(rows));
        let mut out = Domain::new(self.id.clone(), features, labels)?;
        out.meta = self.meta;
        out.image_shape = self.image_shape;
        Ok(out)
    }

    /// Feature centroid under the domain's measure.
    pub fn centroid(&self) -> Array1<f64> {
        self.weights.dot(&self.features)
    }

    /// Concatenates domains into one uniformly weighted pool. Labels survive only if every
    /// part carries labels of the same kind.
    pub fn pool(id: impl Into<String>, parts: &[&Domain]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("cannot pool zero domains".into()))?;
        let d = first.dim();
        if let Some(bad) = parts.iter().find(|p| p.dim() != d) {
            return Err(Error::DimensionMismatch(format!(
                "domain `{}` has {} features, expected {d}",
                bad.id(),
                bad.dim()
            )));
        }
        let views: Vec<_> = parts.iter().map(|p| p.features.view()).collect();
        let features = ndarray::concatenate(Axis(0), &views)
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        let labels = match first.labels() {
            Some(Labels::Class(_)) => parts
                .iter()
                .map(|p| p.labels().and_then(Labels::as_class).map(<[i64]>::to_vec))
                .collect::<Option<Vec<_>>>()
                .map(|v| Labels::Class(v.concat())),
            Some(Labels::Real(_)) => parts
                .iter()
                .map(|p| p.labels().and_then(Labels::as_real).map(<[f64]>::to_vec))
                .collect::<Option<Vec<_>>>()
                .map(|v| Labels::Real(v.concat())),
            None => None,
        };
        Domain::new(id, features, labels)
    }
}

/// Evaluates the two-arc half-moon parametrization at the given angles, without noise.
fn half_moon_points(upper: &[f64], lower: &[f64]) -> (Array2<f64>, Vec<i64>) {
    let n = upper.len() + lower.len();
    let mut features = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    for (i, &t) in upper.iter().enumerate() {
        features[[i, 0]] = t.cos();
        features[[i, 1]] = t.sin();
        labels.push(0);
    }
    for (k, &t) in lower.iter().enumerate() {
        let i = upper.len() + k;
        features[[i, 0]] = 1.0 - t.cos();
        features[[i, 1]] = 0.5 - t.sin();
        labels.push(1);
    }
    (features, labels)
}

/// Two interleaved half circles with `n` points each: label 0 on `(cos t, sin t)`, label 1
/// on `(1 - cos t, 0.5 - sin t)`, `t ~ U[0, pi]`, plus isotropic Gaussian noise.
pub fn make_half_moons(n: usize, noise_sigma: f64, seed: u64) -> Result<Domain> {
    if n == 0 {
        return Err(Error::InvalidArgument("half moons need n >= 1".into()));
    }
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise_sigma must be finite and >= 0, got {noise_sigma}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let upper: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=std::f64::consts::PI)).collect();
    let lower: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=std::f64::consts::PI)).collect();
    let (mut features, labels) = half_moon_points(&upper, &lower);
    if noise_sigma > 0.0 {
        let normal = Normal::new(0.0, noise_sigma).expect("validated sigma");
        features.mapv_inplace(|v| v + normal.sample(&mut rng));
    }
    Domain::new("half_moons", features, Some(Labels::Class(labels)))
}

/// Pivot of a point-cloud rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RotationCenter {
    /// The coordinate origin, a fixed frame point shared by every domain.
    #[default]
    Origin,
    /// The domain's own weighted centroid.
    Centroid,
    Point([f64; 2]),
}

/// Rotates a domain counter-clockwise by `angle_deg`.
///
/// Two-feature point clouds rotate about `center`. Image domains rotate every image about
/// its own pixel-grid center with bilinear resampling; `center` is ignored for them.
/// The rotation angle is recorded as the domain's metadata.
pub fn rotate_domain(domain: &Domain, angle_deg: f64, center: RotationCenter) -> Result<Domain> {
    if !angle_deg.is_finite() {
        return Err(Error::InvalidArgument(format!("angle must be finite, got {angle_deg}")));
    }
    let features = if let Some((h, w)) = domain.image_shape() {
        rotate_images(domain.features(), h, w, angle_deg)
    } else {
        if domain.dim() != 2 {
            return Err(Error::DimensionMismatch(format!(
                "point-cloud rotation needs 2 features, domain `{}` has {}",
                domain.id(),
                domain.dim()
            )));
        }
        let pivot = match center {
            RotationCenter::Origin => [0.0, 0.0],
            RotationCenter::Centroid => {
                let c = domain.centroid();
                [c[0], c[1]]
            }
            RotationCenter::Point(p) => p,
        };
        let (sin, cos) = angle_deg.to_radians().sin_cos();
        let mut out = domain.features().to_owned();
        for mut row in out.rows_mut() {
            let x = row[0] - pivot[0];
            let y = row[1] - pivot[1];
            row[0] = cos * x - sin * y + pivot[0];
            row[1] = sin * x + cos * y + pivot[1];
        }
        out
    };
    Ok(domain.with_features(features)?.with_meta(Some(angle_deg)))
}

fn rotate_images(images: ArrayView2<'_, f64>, h: usize, w: usize, angle_deg: f64) -> Array2<f64> {
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    let cy = (h as f64 - 1.0) / 2.0;
    let cx = (w as f64 - 1.0) / 2.0;
    let mut out = Array2::zeros(images.raw_dim());
    for (src, mut dst) in images.rows().into_iter().zip(out.rows_mut()) {
        let pixel = |r: isize, c: isize| -> f64 {
            if r < 0 || c < 0 || r >= h as isize || c >= w as isize {
                0.0
            } else {
                src[r as usize * w + c as usize]
            }
        };
        for r in 0..h {
            for c in 0..w {
                // Inverse map: sample the source at the output pixel rotated back.
                let y = r as f64 - cy;
                let x = c as f64 - cx;
                let sx = cos * x + sin * y + cx;
                let sy = -sin * x + cos * y + cy;
                let (x0, y0) = (sx.floor(), sy.floor());
                let (fx, fy) = (sx - x0, sy - y0);
                let (x0, y0) = (x0 as isize, y0 as isize);
                dst[r * w + c] = (1.0 - fy) * ((1.0 - fx) * pixel(y0, x0) + fx * pixel(y0, x0 + 1))
                    + fy * ((1.0 - fx) * pixel(y0 + 1, x0) + fx * pixel(y0 + 1, x0 + 1));
            }
        }
    }
    out
}

/// Uniform sampling of `n` rows without replacement; the result keeps the draw order.
pub fn subsample(domain: &Domain, n: usize, seed: u64) -> Result<Domain> {
    if n == 0 || n > domain.len() {
        return Err(Error::InvalidArgument(format!(
            "subsample size must be in 1..={}, got {n}",
            domain.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = index::sample(&mut rng, domain.len(), n).into_vec();
    domain.select(&rows)
}

/// Per-feature min-max scaling to [0, 1], fit on one domain and reused for the others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    min: Array1<f64>,
    range: Array1<f64>,
}

impl MinMaxScaler {
    pub fn fit(domain: &Domain) -> Self {
        let x = domain.features();
        let min = x.fold_axis(Axis(0), f64::INFINITY, |a, &b| a.min(b));
        let max = x.fold_axis(Axis(0), f64::NEG_INFINITY, |a, &b| a.max(b));
        let range = &max - &min;
        MinMaxScaler { min, range }
    }

    /// Constant features (zero range on the fitted domain) map to 0 offset only.
    pub fn transform(&self, domain: &Domain) -> Result<Domain> {
        if domain.dim() != self.min.len() {
            return Err(Error::DimensionMismatch(format!(
                "scaler fit on {} features, domain `{}` has {}",
                self.min.len(),
                domain.id(),
                domain.dim()
            )));
        }
        let mut x = domain.features().to_owned();
        for mut row in x.rows_mut() {
            for j in 0..row.len() {
                let r = self.range[j];
                row[j] = if r > 0.0 { (row[j] - self.min[j]) / r } else { row[j] - self.min[j] };
            }
        }
        domain.with_features(x)
    }
}

/// Number of samples per class id.
pub fn class_counts(labels: &[i64]) -> std::collections::BTreeMap<i64, usize> {
    let mut counts = std::collections::BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0) += 1;
    }
    counts
}

/// Pairwise Euclidean distances, used by the isometry checks.
pub fn pairwise_distances(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = x.nrows();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let diff = &x.slice(s![i, ..]) - &x.slice(s![j, ..]);
            out[[i, j]] = diff.dot(&diff).sqrt();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn zero_parameter_is_the_arc_endpoint() {
        let (x, labels) = half_moon_points(&[0.0], &[0.0]);
        assert_abs_diff_eq!(x[[0, 0]], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x[[0, 1]], 0.0, epsilon = 1e-15);
        assert_eq!(labels[0], 0);
        assert_abs_diff_eq!(x[[1, 0]], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x[[1, 1]], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn noise_free_upper_moon_is_on_the_unit_circle() {
        let d = make_half_moons(100, 0.0, 3).unwrap();
        assert_eq!(d.len(), 200);
        assert_eq!(d.dim(), 2);
        let labels = d.labels().unwrap().as_class().unwrap();
        for (row, &l) in d.features().rows().into_iter().zip(labels) {
            if l == 0 {
                assert_abs_diff_eq!(row[0].powi(2) + row[1].powi(2), 1.0, epsilon = 1e-9);
            } else {
                let (x, y) = (1.0 - row[0], 0.5 - row[1]);
                assert_abs_diff_eq!(x * x + y * y, 1.0, epsilon = 1e-9);
            }
        }
        assert_eq!(class_counts(labels).values().copied().collect::<Vec<_>>(), vec![100, 100]);
    }

    #[test]
    fn noisy_sample_mean_matches_analytic_mean() {
        // For t ~ U[0, pi]: E[cos t] = 0 and E[sin t] = 2/pi. The upper moon has mean
        // (0, 2/pi) and the lower moon (1, 0.5 - 2/pi), so the pooled mean is (0.5, 0.25).
        let sigma = 0.05;
        let d = make_half_moons(500, sigma, 7).unwrap();
        let mean = d.centroid();
        // Per-coordinate spread: arc variance plus noise. Var(cos t) = 1/2 and
        // Var(sin t) = 1/2 - 4/pi^2; the mixture adds the squared half-gap of the moon means.
        let pi = std::f64::consts::PI;
        let var_x = 0.5 + 0.25 + sigma * sigma;
        let gap_y = (2.0 / pi) - (0.5 - 2.0 / pi);
        let var_y = 0.5 - 4.0 / (pi * pi) + (gap_y / 2.0).powi(2) + sigma * sigma;
        let n = 1000.0_f64;
        assert!((mean[0] - 0.5).abs() < 3.0 * var_x.sqrt() / n.sqrt(), "x mean {}", mean[0]);
        assert!((mean[1] - 0.25).abs() < 3.0 * var_y.sqrt() / n.sqrt(), "y mean {}", mean[1]);
    }

    #[test]
    fn half_moons_rejects_zero_count() {
        assert!(matches!(make_half_moons(0, 0.1, 1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn half_moons_is_seed_deterministic() {
        assert_eq!(make_half_moons(20, 0.1, 9).unwrap(), make_half_moons(20, 0.1, 9).unwrap());
        assert_ne!(make_half_moons(20, 0.1, 9).unwrap(), make_half_moons(20, 0.1, 10).unwrap());
    }

    #[test]
    fn zero_rotation_is_identity() {
        let d = make_half_moons(30, 0.1, 1).unwrap();
        for center in [RotationCenter::Origin, RotationCenter::Centroid] {
            let r = rotate_domain(&d, 0.0, center).unwrap();
            assert_abs_diff_eq!(r.features(), d.features(), epsilon = 1e-12);
            assert_eq!(r.meta(), Some(0.0));
        }
    }

    #[test]
    fn quarter_turn_about_origin() {
        let d = Domain::new("p", array![[1.0, 0.0]], None).unwrap();
        let r = rotate_domain(&d, 90.0, RotationCenter::Origin).unwrap();
        assert_abs_diff_eq!(r.features()[[0, 0]], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.features()[[0, 1]], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn centroid_rotation_keeps_the_centroid() {
        let d = make_half_moons(40, 0.1, 4).unwrap();
        let r = rotate_domain(&d, 63.0, RotationCenter::Centroid).unwrap();
        assert_abs_diff_eq!(r.centroid(), d.centroid(), epsilon = 1e-12);
    }

    #[test]
    fn rotations_compose() {
        let d = make_half_moons(50, 0.1, 2).unwrap();
        for center in [RotationCenter::Origin, RotationCenter::Centroid, RotationCenter::Point([0.3, -2.0])] {
            let twice = rotate_domain(&rotate_domain(&d, 36.0, center).unwrap(), 36.0, center).unwrap();
            let once = rotate_domain(&d, 72.0, center).unwrap();
            assert_abs_diff_eq!(twice.features(), once.features(), epsilon = 1e-9);
        }
    }

    #[test]
    fn rotation_preserves_labels_and_weights() {
        let d = make_half_moons(10, 0.1, 2).unwrap();
        let r = rotate_domain(&d, 18.0, RotationCenter::Origin).unwrap();
        assert_eq!(r.labels(), d.labels());
        assert_eq!(r.weights(), d.weights());
    }

    #[test]
    fn rotation_rejects_high_dimensional_point_clouds() {
        let d = Domain::new("p", Array2::zeros((3, 4)), None).unwrap();
        assert!(matches!(
            rotate_domain(&d, 10.0, RotationCenter::Origin),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn image_quarter_turn_moves_pixels() {
        // 3x3 image, single bright pixel at the middle of the top row.
        let mut img = Array2::zeros((1, 9));
        img[[0, 1]] = 1.0;
        let d = Domain::new("img", img, None).unwrap().with_image_shape(3, 3).unwrap();
        let r = rotate_domain(&d, 90.0, RotationCenter::Origin).unwrap();
        // Pixel offsets are (column, row) about the grid center; the top-middle pixel at
        // offset (0, -1) goes to (1, 0), the middle of the right column.
        let f = r.features();
        assert_abs_diff_eq!(f.sum(), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(f[[0, 5]], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(f[[0, 1]], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(rotate_domain(&d, 0.0, RotationCenter::Origin).unwrap().features(), d.features(), epsilon = 1e-12);
    }

    #[test]
    fn validator_rejects_bad_weights() {
        let x = Array2::zeros((2, 1));
        assert!(Domain::with_weights("w", x.clone(), None, array![0.7, 0.7]).is_err());
        assert!(Domain::with_weights("w", x.clone(), None, array![1.5, -0.5]).is_err());
        assert!(Domain::with_weights("w", x, None, array![0.25, 0.75]).is_ok());
    }

    #[test]
    fn validator_rejects_empty_and_nonfinite() {
        assert!(Domain::new("e", Array2::zeros((0, 2)), None).is_err());
        assert!(Domain::new("e", Array2::zeros((2, 0)), None).is_err());
        assert!(Domain::new("e", array![[f64::NAN, 1.0]], None).is_err());
        assert!(Domain::new("e", array![[0.0, 1.0]], Some(Labels::Class(vec![1, 2]))).is_err());
    }

    #[test]
    fn subsample_full_size_is_a_permutation() {
        let d = make_half_moons(25, 0.1, 5).unwrap();
        let s = subsample(&d, d.len(), 11).unwrap();
        let mut a: Vec<(u64, u64)> =
            d.features().rows().into_iter().map(|r| (r[0].to_bits(), r[1].to_bits())).collect();
        let mut b: Vec<(u64, u64)> =
            s.features().rows().into_iter().map(|r| (r[0].to_bits(), r[1].to_bits())).collect();
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b);
    }

    #[test]
    fn subsample_single_row_comes_from_the_source() {
        let d = make_half_moons(25, 0.1, 5).unwrap();
        let s = subsample(&d, 1, 3).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.weights()[0], 1.0);
        assert!(d.features().rows().into_iter().any(|r| r == s.features().row(0)));
    }

    #[test]
    fn subsample_is_seed_deterministic() {
        let d = make_half_moons(500, 0.1, 5).unwrap();
        assert_eq!(subsample(&d, 500, 1).unwrap(), subsample(&d, 500, 1).unwrap());
        let a = subsample(&d, 500, 1).unwrap();
        let b = subsample(&d, 500, 2).unwrap();
        assert_ne!(a.features(), b.features());
        assert!(subsample(&d, 1001, 1).is_err());
        assert!(subsample(&d, 0, 1).is_err());
    }

    #[test]
    fn scaler_fits_source_and_reuses_parameters() {
        let src = Domain::new("s", array![[0.0, 10.0], [2.0, 20.0]], None).unwrap();
        let other = Domain::new("o", array![[1.0, 30.0]], None).unwrap();
        let scaler = MinMaxScaler::fit(&src);
        let s = scaler.transform(&src).unwrap();
        assert_abs_diff_eq!(s.features(), array![[0.0, 0.0], [1.0, 1.0]].view(), epsilon = 1e-15);
        let o = scaler.transform(&other).unwrap();
        assert_abs_diff_eq!(o.features(), array![[0.5, 2.0]].view(), epsilon = 1e-15);
    }

    #[test]
    fn pool_concatenates_labels() {
        let a = make_half_moons(3, 0.0, 1).unwrap();
        let b = make_half_moons(2, 0.0, 2).unwrap();
        let p = Domain::pool("pool", &[&a, &b]).unwrap();
        assert_eq!(p.len(), 10);
        assert_eq!(p.labels().unwrap().len(), 10);
        p.validate().unwrap();
    }

    proptest! {
        #[test]
        fn rotation_is_an_isometry(seed in 0u64..1000, angle in -360.0f64..360.0) {
            let d = make_half_moons(8, 0.2, seed).unwrap();
            let r = rotate_domain(&d, angle, RotationCenter::Centroid).unwrap();
            let before = pairwise_distances(d.features());
            let after = pairwise_distances(r.features());
            for (x, y) in before.iter().zip(after.iter()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn generated_domains_satisfy_invariants(n in 1usize..50, sigma in 0.0f64..1.0, seed: u64) {
            let d = make_half_moons(n, sigma, seed).unwrap();
            prop_assert!(d.validate().is_ok());
            let s = subsample(&d, n, seed ^ 1).unwrap();
            prop_assert!(s.validate().is_ok());
        }
    }
}
