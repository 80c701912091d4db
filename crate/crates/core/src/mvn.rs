//! Multivariate normal sampling through the linear-transform property: if
//! `X ~ N(0, I)` then `A X + b ~ N(b, A A^T)`.
//!
//! Kernels produced by the generator have diagonal covariances, where the
//! decomposition `Sigma = A A^T` is just `A = diag(sqrt(var))`.

use std::f64::consts::TAU;

use rand::Rng;

/// `N(mean, diag(var))`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalGaussian {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl DiagonalGaussian {
    /// Panics if the lengths differ or a variance is negative or not finite.
    pub fn new(mean: Vec<f64>, var: Vec<f64>) -> Self {
        assert_eq!(mean.len(), var.len(), "mean and variance lengths differ");
        assert!(var.iter().all(|v| v.is_finite() && *v >= 0.0), "variances must be finite and nonnegative");
        Self { mean, var }
    }

    /// From per-dimension standard deviations.
    pub fn from_std(mean: Vec<f64>, std: &[f64]) -> Self {
        Self::new(mean, std.iter().map(|s| s * s).collect())
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
        let scale: Vec<f64> = self.var.iter().map(|v| v.sqrt()).collect();
        sample_std_normal(count, self.dim(), rng)
            .into_iter()
            .map(|z| {
                z.iter()
                    .zip(&scale)
                    .zip(&self.mean)
                    .map(|((z, a), b)| if *a == 0.0 { *b } else { b + a * z })
                    .collect()
            })
            .collect()
    }
}

/// Standard normal pair by the Box–Muller transform.
pub fn box_muller<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    // u1 in (0, 1] keeps ln finite
    let u1 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (TAU * u2).sin_cos();
    (r * c, r * s)
}

/// `count x dim` matrix of independent standard normal draws, filled row
/// by row.
pub fn sample_std_normal<R: Rng + ?Sized>(count: usize, dim: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let total = count * dim;
    let mut flat = Vec::with_capacity(total + 1);
    while flat.len() < total {
        let (a, b) = box_muller(rng);
        flat.push(a);
        flat.push(b);
    }
    flat.truncate(total);
    if dim == 0 {
        return vec![Vec::new(); count];
    }
    flat.chunks(dim).map(<[f64]>::to_vec).collect()
}

pub fn sample_gaussian<R: Rng + ?Sized>(g: &DiagonalGaussian, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
    g.sample(count, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn column_moments(rows: &[Vec<f64>], j: usize) -> (f64, f64) {
        let n = rows.len() as f64;
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn empty_and_deterministic() {
        assert!(sample_std_normal(0, 3, &mut rng::stream(1, 0)).is_empty());
        let a = sample_std_normal(5, 3, &mut rng::stream(1, 0));
        let b = sample_std_normal(5, 3, &mut rng::stream(1, 0));
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
        assert!(a.iter().all(|r| r.len() == 3));
    }

    #[test]
    fn standard_normal_moments() {
        let z = sample_std_normal(100_000, 1, &mut rng::stream(42, 0));
        let (m, v) = column_moments(&z, 0);
        assert!(m.abs() < 0.02, "mean {m}");
        assert!((0.97..1.03).contains(&v), "var {v}");
    }

    #[test]
    fn diagonal_moments_and_zero_variance() {
        let g = DiagonalGaussian::new(vec![0.0, 0.0, 3.5], vec![1.0, 4.0, 0.0]);
        let y = g.sample(100_000, &mut rng::stream(7, 3));
        let (_, v0) = column_moments(&y, 0);
        let (_, v1) = column_moments(&y, 1);
        assert!((v0 - 1.0).abs() < 0.05);
        assert!((v1 - 4.0).abs() < 0.2);
        assert!(y.iter().all(|r| r[2] == 3.5));
    }

    #[test]
    fn affine_image_mean() {
        let mu = [1.0, -2.0];
        let b = [0.5, 0.25];
        let g = DiagonalGaussian::new(mu.to_vec(), vec![0.3, 0.7]);
        let y = g.sample(100_000, &mut rng::stream(11, 0));
        for j in 0..2 {
            let mapped: Vec<Vec<f64>> = y.iter().map(|r| vec![2.0 * r[j] + b[j]]).collect();
            let (m, _) = column_moments(&mapped, 0);
            assert!((m - (2.0 * mu[j] + b[j])).abs() < 0.02, "dim {j}: {m}");
        }
    }
}
