//! Synthetic data: irregularly sampled spirals and complex processes with
//! known covariance structure.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::curves::{polygon_to_srv, PlanePolygon, SrvCurve};
use crate::error::{Error, Result};

/// Winding rate of `beta(t) = t * exp(i * SPIRAL_RATE * t)`.
pub const SPIRAL_RATE: f64 = 13.0;

pub fn spiral_point(t: f64) -> Complex64 {
    Complex64::from_polar(t, SPIRAL_RATE * t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpiralConfig {
    pub curves: usize,
    pub min_points: usize,
    pub max_points: usize,
    /// Noise standard deviation relative to the polygon length.
    pub noise_sd: f64,
    /// Jitter of the sampling grid in units of the nominal spacing.
    pub jitter: f64,
    /// Apply a random rotation, scaling and translation per curve.
    pub transform: bool,
    pub seed: u64,
}

impl Default for SpiralConfig {
    fn default() -> Self {
        Self {
            curves: 9,
            min_points: 17,
            max_points: 22,
            noise_sd: 0.005,
            jitter: 0.4,
            transform: true,
            seed: 1,
        }
    }
}

/// Spirals sampled at jittered, roughly equal angle steps with both
/// endpoints included. Deterministic for a given seed.
pub fn simulate_spirals(config: &SpiralConfig) -> Result<Vec<PlanePolygon>> {
    if config.curves == 0 {
        return Err(Error::InvalidInput("at least one spiral is required".into()));
    }
    if config.min_points < 3 || config.max_points < config.min_points {
        return Err(Error::InvalidInput(format!(
            "invalid point range {}..={}",
            config.min_points, config.max_points
        )));
    }
    if !(config.noise_sd >= 0.0) || !(0.0..1.0).contains(&config.jitter) {
        return Err(Error::InvalidInput("noise and jitter must be nonnegative, jitter < 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let standard = Normal::new(0.0, 1.0).expect("unit normal");
    let width = format!("{}", config.curves).len().max(2);
    (0..config.curves)
        .map(|i| {
            let n = rng.random_range(config.min_points..=config.max_points);
            let step = 1.0 / (n - 1) as f64;
            let times: Vec<f64> = (0..n)
                .map(|k| {
                    if k == 0 || k == n - 1 {
                        k as f64 * step
                    } else {
                        k as f64 * step + config.jitter * step * (rng.random::<f64>() - 0.5)
                    }
                })
                .collect();
            let clean: Vec<Complex64> = times.iter().map(|&t| spiral_point(t)).collect();
            let length: f64 = clean.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
            let sd = config.noise_sd * length / std::f64::consts::SQRT_2;
            let noisy: Vec<Complex64> = clean
                .iter()
                .map(|p| {
                    if sd > 0.0 {
                        p + Complex64::new(standard.sample(&mut rng), standard.sample(&mut rng)) * sd
                    } else {
                        *p
                    }
                })
                .collect();
            let polygon = PlanePolygon::new(format!("spiral_{:0width$}", i + 1), noisy)?;
            if config.transform {
                let rotation = Complex64::from_polar(1.0, rng.random_range(-std::f64::consts::PI..std::f64::consts::PI));
                let scale = rng.random_range(0.5f64..2.0);
                let shift = Complex64::new(standard.sample(&mut rng), standard.sample(&mut rng));
                Ok(polygon.transformed(rotation, scale, shift))
            } else {
                Ok(polygon)
            }
        })
        .collect()
}

/// SRV of the spiral sampled at `segments + 1` equidistant parameters.
pub fn true_spiral_srv(segments: usize) -> Result<SrvCurve> {
    let segments = segments.max(2);
    let points = (0..=segments)
        .map(|k| spiral_point(k as f64 / segments as f64))
        .collect();
    polygon_to_srv(&PlanePolygon::new("spiral", points)?)
}

/// Zero-mean complex process `Y(t) = sum_k z_k e_k(t)` on a grid.
///
/// With `proper = true` the scores are circular complex Gaussian with
/// `E|z_k|^2 = lambda_k` (independent real and imaginary parts of
/// variance `lambda_k / 2`). Otherwise scores are real Gaussian with
/// variance `lambda_k`, giving a non-vanishing pseudo-covariance.
#[derive(Debug, Clone)]
pub struct ComplexProcess {
    /// `eigenfunctions[k][j] = e_k(grid[j])`.
    pub eigenfunctions: Vec<Vec<Complex64>>,
    pub eigenvalues: Vec<f64>,
    pub proper: bool,
}

impl ComplexProcess {
    pub fn sample(&self, rng: &mut impl Rng) -> Vec<Complex64> {
        let standard = Normal::new(0.0, 1.0).expect("unit normal");
        let len = self.eigenfunctions.first().map_or(0, Vec::len);
        let mut out = vec![Complex64::new(0.0, 0.0); len];
        for (e, &lambda) in self.eigenfunctions.iter().zip(&self.eigenvalues) {
            let z = if self.proper {
                let sd = (lambda / 2.0).sqrt();
                Complex64::new(standard.sample(rng) * sd, standard.sample(rng) * sd)
            } else {
                Complex64::new(standard.sample(rng) * lambda.sqrt(), 0.0)
            };
            for (o, v) in out.iter_mut().zip(e) {
                *o += z * v;
            }
        }
        out
    }

    /// `C(s_j, s_k) = E[conj(Y_j) Y_k]`.
    pub fn covariance(&self, j: usize, k: usize) -> Complex64 {
        self.eigenfunctions
            .iter()
            .zip(&self.eigenvalues)
            .map(|(e, l)| e[j].conj() * e[k] * *l)
            .sum()
    }

    /// `R(s_j, s_k) = E[Y_j Y_k]`.
    pub fn pseudo_covariance(&self, j: usize, k: usize) -> Complex64 {
        if self.proper {
            return Complex64::new(0.0, 0.0);
        }
        self.eigenfunctions
            .iter()
            .zip(&self.eigenvalues)
            .map(|(e, l)| e[j] * e[k] * *l)
            .sum()
    }
}

/// Largest absolute z-scores of Monte-Carlo moment checks on a process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentCheck {
    /// Block identities `E[A_s A_t] = Re(C + R)/2`, `E[B_s B_t] = Re(C - R)/2`,
    /// `E[A_s B_t] = Im(C + R)/2`, `E[B_s A_t] = Im(R - C)/2` with
    /// `A = Re Y`, `B = Im Y`, checked against the true `C` and `R`.
    pub block: f64,
    /// Empirical pseudo-covariance against zero.
    pub pseudo_zero: f64,
}

fn z_score(samples: &[f64], target: f64) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    let diff = mean - target;
    if se > 0.0 {
        (diff / se).abs()
    } else if diff.abs() <= 1e-12 * (1.0 + target.abs()) {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Draws `n` realizations and z-scores all grid pairs `(s, t)`.
pub fn moment_check(process: &ComplexProcess, n: usize, rng: &mut impl Rng) -> MomentCheck {
    let draws: Vec<Vec<Complex64>> = (0..n).map(|_| process.sample(rng)).collect();
    let len = draws.first().map_or(0, Vec::len);
    let mut check = MomentCheck { block: 0.0, pseudo_zero: 0.0 };
    for s in 0..len {
        for t in 0..len {
            let c = process.covariance(s, t);
            let r = process.pseudo_covariance(s, t);
            let product = |f: fn(Complex64, Complex64) -> f64| -> Vec<f64> { draws.iter().map(|y| f(y[s], y[t])).collect() };
            let block = [
                z_score(&product(|a, b| a.re * b.re), 0.5 * (c + r).re),
                z_score(&product(|a, b| a.im * b.im), 0.5 * (c - r).re),
                z_score(&product(|a, b| a.re * b.im), 0.5 * (c + r).im),
                z_score(&product(|a, b| a.im * b.re), 0.5 * (r - c).im),
            ];
            let pseudo = [
                z_score(&product(|a, b| (a * b).re), 0.0),
                z_score(&product(|a, b| (a * b).im), 0.0),
            ];
            check.block = block.into_iter().fold(check.block, f64::max);
            check.pseudo_zero = pseudo.into_iter().fold(check.pseudo_zero, f64::max);
        }
    }
    check
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_samples_lie_on_spiral() {
        let config = SpiralConfig {
            curves: 1,
            min_points: 1000,
            max_points: 1000,
            noise_sd: 0.0,
            transform: false,
            ..SpiralConfig::default()
        };
        let polys = simulate_spirals(&config).unwrap();
        let pts = &polys[0].points;
        assert_eq!(pts.len(), 1000);
        for p in pts {
            let t = p.norm();
            assert!((spiral_point(t) - p).norm() < 1e-12);
        }
        assert_eq!(pts[0], Complex64::new(0.0, 0.0));
        assert!((pts[999] - spiral_point(1.0)).norm() < 1e-15);
    }

    #[test]
    fn deterministic_per_seed() {
        let config = SpiralConfig::default();
        assert_eq!(simulate_spirals(&config).unwrap(), simulate_spirals(&config).unwrap());
        let other = SpiralConfig { seed: 2, ..config.clone() };
        assert_ne!(simulate_spirals(&config).unwrap(), simulate_spirals(&other).unwrap());
    }

    #[test]
    fn point_counts_in_range() {
        let polys = simulate_spirals(&SpiralConfig::default()).unwrap();
        assert_eq!(polys.len(), 9);
        assert!(polys.iter().all(|p| (17..=22).contains(&p.points.len())));
        assert_eq!(polys[0].id, "spiral_01");
    }
}
