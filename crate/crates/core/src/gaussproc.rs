//! Conditional expectations under a working complex Gaussian model.
//!
//! Scores `z ~ CN(0, diag(lambda))` with `E[z z^T] = 0` are observed through
//! `y = E z + eps`, `eps_j ~ CN(0, tau_j^2)`. Observations with zero noise
//! pin the scores to an affine subspace; the remaining directions are
//! conditioned on the noisy observations.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::covsmooth::EigenSystem;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_pd_inverse, CMatrix, CVector};

/// Relative singular-value threshold for the rank of the zero-noise design.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningProblem {
    /// `n x m` design `E_jk = e_k(t_j)`.
    pub design: CMatrix,
    pub observations: CVector,
    pub eigenvalues: Vec<f64>,
    /// Per-observation noise variance `tau^2(t_j)`.
    pub noise: Vec<f64>,
}

impl ConditioningProblem {
    pub fn new(
        design: CMatrix,
        observations: CVector,
        eigenvalues: Vec<f64>,
        noise: Vec<f64>,
    ) -> Result<Self> {
        let (n, m) = design.shape();
        if observations.len() != n || noise.len() != n {
            return Err(Error::InvalidProblem(format!(
                "design has {n} rows but {} observations and {} noise variances",
                observations.len(),
                noise.len()
            )));
        }
        if eigenvalues.len() != m {
            return Err(Error::InvalidProblem(format!(
                "design has {m} columns but {} eigenvalues",
                eigenvalues.len()
            )));
        }
        if let Some(l) = eigenvalues.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidProblem(format!("eigenvalue {l} is not positive")));
        }
        if let Some(t) = noise.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
            return Err(Error::InvalidProblem(format!("noise variance {t} is negative")));
        }
        Ok(Self {
            design,
            observations,
            eigenvalues,
            noise,
        })
    }

    /// Observations `values[j]` at `times[j]` against the leading
    /// components of `eigen`, with a common noise variance.
    pub fn from_eigen(
        eigen: &EigenSystem,
        times: &[f64],
        values: &[Complex64],
        noise_variance: f64,
    ) -> Result<Self> {
        let m = eigen.len();
        let functions: Vec<_> = (0..m).map(|k| eigen.eigenfunction(k)).collect();
        let design = CMatrix::from_fn(times.len(), m, |j, k| functions[k].evaluate(times[j]));
        Self::new(
            design,
            CVector::from_column_slice(values),
            eigen.values.clone(),
            vec![noise_variance.max(0.0); times.len()],
        )
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn zero_noise_count(&self) -> usize {
        self.noise.iter().filter(|t| **t == 0.0).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorScores {
    pub mean: CVector,
    /// Posterior covariance `N S N^dagger` in eigen coordinates.
    pub covariance: CMatrix,
    /// Part of the mean determined by zero-noise observations.
    pub pinned: CVector,
    /// Orthonormal basis of the directions left free by zero-noise data.
    pub null_space: CMatrix,
}

fn rows(a: &CMatrix, idx: &[usize]) -> CMatrix {
    CMatrix::from_fn(idx.len(), a.ncols(), |i, j| a[(idx[i], j)])
}

/// Splits `C^m` into the row space of `e0` (`M`) and its complement (`N`).
fn rank_split(e0: &CMatrix, m: usize) -> (CMatrix, CMatrix) {
    if e0.nrows() == 0 {
        return (CMatrix::zeros(m, 0), CMatrix::identity(m, m));
    }
    let padded = if e0.nrows() < m {
        let mut p = CMatrix::zeros(m, m);
        p.view_mut((0, 0), e0.shape()).copy_from(e0);
        p
    } else {
        e0.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let max = svd.singular_values.iter().fold(0.0_f64, |a, s| a.max(*s));
    let mut rank_cols = Vec::new();
    let mut null_cols = Vec::new();
    for (k, s) in svd.singular_values.iter().enumerate() {
        let col: CVector = v_t.row(k).adjoint();
        if max > 0.0 && *s > RANK_TOLERANCE * max {
            rank_cols.push(col);
        } else {
            null_cols.push(col);
        }
    }
    let assemble = |cols: &[CVector]| {
        if cols.is_empty() {
            CMatrix::zeros(m, 0)
        } else {
            CMatrix::from_columns(cols)
        }
    };
    (assemble(&rank_cols), assemble(&null_cols))
}

pub fn condition(problem: &ConditioningProblem) -> Result<PosteriorScores> {
    let m = problem.dim();
    let lambda_inv = CMatrix::from_diagonal(&CVector::from_iterator(
        m,
        problem.eigenvalues.iter().map(|l| Complex64::new(1.0 / l, 0.0)),
    ));
    let zero: Vec<usize> = (0..problem.noise.len()).filter(|&j| problem.noise[j] == 0.0).collect();
    let noisy: Vec<usize> = (0..problem.noise.len()).filter(|&j| problem.noise[j] > 0.0).collect();

    let e0 = rows(&problem.design, &zero);
    let y0 = CVector::from_iterator(zero.len(), zero.iter().map(|&j| problem.observations[j]));
    let (m_basis, n_basis) = rank_split(&e0, m);

    let z0 = if m_basis.ncols() > 0 {
        let em = &e0 * &m_basis;
        let inner = em.adjoint() * &em;
        let inner_inv = hermitian_pd_inverse(&inner).map_err(|_| Error::RankDeficiency)?;
        &m_basis * (inner_inv * (em.adjoint() * &y0))
    } else {
        CVector::zeros(m)
    };

    if n_basis.ncols() == 0 {
        return Ok(PosteriorScores {
            mean: z0.clone(),
            covariance: CMatrix::zeros(m, m),
            pinned: z0,
            null_space: n_basis,
        });
    }

    let ep = rows(&problem.design, &noisy);
    let t_inv = CVector::from_iterator(
        noisy.len(),
        noisy.iter().map(|&j| Complex64::new(1.0 / problem.noise[j], 0.0)),
    );
    let weighted_ep = CMatrix::from_fn(ep.nrows(), m, |i, k| ep[(i, k)] * t_inv[i]);
    let precision = ep.adjoint() * &weighted_ep + &lambda_inv;
    let reduced = n_basis.adjoint() * &precision * &n_basis;
    let reduced = (&reduced + reduced.adjoint()) * Complex64::new(0.5, 0.0);
    let s_tilde = hermitian_pd_inverse(&reduced)?;

    let yp = CVector::from_iterator(noisy.len(), noisy.iter().map(|&j| problem.observations[j]));
    let resid = yp - &ep * &z0;
    let drive = weighted_ep.adjoint() * resid - &lambda_inv * &z0;
    let z_plus = &s_tilde * (n_basis.adjoint() * drive);
    let mean = &n_basis * z_plus + &z0;
    let covariance = &n_basis * s_tilde * n_basis.adjoint();
    let covariance = (&covariance + covariance.adjoint()) * Complex64::new(0.5, 0.0);
    Ok(PosteriorScores {
        mean,
        covariance,
        pinned: z0,
        null_space: n_basis,
    })
}

/// `E[<x, Y>]`-type score `z^dagger g` for eigen coordinates `g`.
pub fn expected_inner_product(post: &PosteriorScores, g: &[Complex64]) -> Complex64 {
    post.mean.iter().zip(g).map(|(z, g)| z.conj() * g).sum()
}

/// `E[||Y||^2] = tr(S) + ||z||^2` for orthonormal eigenfunctions.
pub fn expected_squared_norm(post: &PosteriorScores) -> f64 {
    post.covariance.diagonal().iter().map(|z| z.re).sum::<f64>() + post.mean.norm_squared()
}

/// `g^dagger S g + |z^dagger g|^2`.
pub fn expected_score_magnitude_sq(post: &PosteriorScores, g: &[Complex64]) -> f64 {
    let gv = CVector::from_column_slice(g);
    let quad = (gv.adjoint() * &post.covariance * &gv)[(0, 0)].re;
    quad.max(0.0) + expected_inner_product(post, g).norm_sqr()
}

/// Real `2m`-dimensional embedding of a circular complex Gaussian used to
/// cross-check [`condition`]; returns the posterior mean and complex
/// covariance. Zero-noise rows must be linearly independent.
#[doc(hidden)]
pub fn condition_real_oracle(problem: &ConditioningProblem) -> Option<(CVector, CMatrix)> {
    let (n, m) = problem.design.shape();
    let e = &problem.design;
    let h = DMatrix::from_fn(2 * n, 2 * m, |i, j| {
        let z = e[(i % n, j % m)];
        match (i < n, j < m) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let p = DMatrix::from_fn(2 * m, 2 * m, |i, j| {
        if i == j {
            problem.eigenvalues[i % m] / 2.0
        } else {
            0.0
        }
    });
    let r = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        if i == j {
            problem.noise[i % n] / 2.0
        } else {
            0.0
        }
    });
    let w = nalgebra::DVector::from_fn(2 * n, |i, _| {
        let y = problem.observations[i % n];
        if i < n {
            y.re
        } else {
            y.im
        }
    });
    let ph = &p * h.transpose();
    let k = (&h * &ph + r).try_inverse()?;
    let gain = &ph * k;
    let mean = &gain * w;
    let cov = &p - &gain * ph.transpose();
    let z = CVector::from_fn(m, |i, _| Complex64::new(mean[i], mean[i + m]));
    let s = CMatrix::from_fn(m, m, |j, k| {
        Complex64::new(
            cov[(j, k)] + cov[(j + m, k + m)],
            cov[(j + m, k)] - cov[(j, k + m)],
        )
    });
    Some((z, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_problem(rng: &mut ChaCha8Rng, m: usize, n0: usize, n_plus: usize) -> ConditioningProblem {
        let n = n0 + n_plus;
        let design = CMatrix::from_fn(n, m, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let obs = CVector::from_fn(n, |_, _| c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)));
        let eig = (0..m).map(|_| rng.random_range(0.1..3.0)).collect();
        let mut noise: Vec<f64> = (0..n_plus).map(|_| rng.random_range(0.05..1.0)).collect();
        noise.extend(std::iter::repeat_n(0.0, n0));
        // interleave so partitioning is exercised
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let design = CMatrix::from_fn(n, m, |i, j| design[(order[i], j)]);
        let obs = CVector::from_fn(n, |i, _| obs[order[i]]);
        let noise = order.iter().map(|&i| noise[i]).collect();
        ConditioningProblem::new(design, obs, eig, noise).unwrap()
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * (1.0 + b.norm())
    }

    #[test]
    fn prior_when_unobserved() {
        let p = ConditioningProblem::new(CMatrix::zeros(0, 2), CVector::zeros(0), vec![2.0, 0.5], vec![])
            .unwrap();
        let post = condition(&p).unwrap();
        assert_eq!(post.mean, CVector::zeros(2));
        assert!((post.covariance[(0, 0)] - c(2.0, 0.0)).norm() < 1e-15);
        assert!((post.covariance[(1, 1)] - c(0.5, 0.0)).norm() < 1e-15);
        assert!((expected_squared_norm(&post) - 2.5).abs() < 1e-15);
        assert!((expected_score_magnitude_sq(&post, &[c(1.0, 0.0), c(0.0, 0.0)]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn scalar_posterior() {
        let (e1, y, tau2, lambda) = (c(0.6, -0.3), c(1.2, 0.4), 0.25, 1.5);
        let p = ConditioningProblem::new(
            CMatrix::from_element(1, 1, e1),
            CVector::from_element(1, y),
            vec![lambda],
            vec![tau2],
        )
        .unwrap();
        let post = condition(&p).unwrap();
        let s = 1.0 / (e1.norm_sqr() / tau2 + 1.0 / lambda);
        assert!((post.covariance[(0, 0)].re - s).abs() < 1e-14);
        assert!(close(post.mean[0], e1.conj() * y * (s / tau2), 1e-14));
        let (z, cov) = condition_real_oracle(&p).unwrap();
        assert!(close(z[0], post.mean[0], 1e-12));
        assert!(close(cov[(0, 0)], post.covariance[(0, 0)], 1e-12));
    }

    #[test]
    fn exact_observation_pins_direction() {
        let p = ConditioningProblem::new(
            CMatrix::from_row_slice(1, 2, &[c(1.0, 0.0), c(0.0, 0.0)]),
            CVector::from_element(1, c(0.7, -0.2)),
            vec![1.0, 2.0],
            vec![0.0],
        )
        .unwrap();
        let post = condition(&p).unwrap();
        assert!(close(post.mean[0], c(0.7, -0.2), 1e-14));
        for k in 0..2 {
            assert!(post.covariance[(0, k)].norm() < 1e-14);
            assert!(post.covariance[(k, 0)].norm() < 1e-14);
        }
        assert!((post.covariance[(1, 1)].re - 2.0).abs() < 1e-12);
    }

    #[test]
    fn full_rank_exact_data_has_no_spread() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_problem(&mut rng, 3, 3, 2);
        let post = condition(&p).unwrap();
        assert!(post.covariance.iter().all(|z| z.norm() < 1e-12));
        assert!((expected_squared_norm(&post) - post.mean.norm_squared()).abs() < 1e-12);
    }

    #[test]
    fn agrees_with_real_gaussian_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..300 {
            let m = rng.random_range(1..=4);
            let n0 = rng.random_range(0..=m.min(3));
            let n_plus = rng.random_range(0..=6 - n0);
            let p = random_problem(&mut rng, m, n0, n_plus);
            let post = condition(&p).unwrap();
            let (z, s) = condition_real_oracle(&p).unwrap();
            for k in 0..m {
                assert!(close(post.mean[k], z[k], 1e-8), "{} vs {}", post.mean[k], z[k]);
                for j in 0..m {
                    assert!((post.covariance[(j, k)] - s[(j, k)]).norm() < 1e-8);
                }
            }
            let g: Vec<Complex64> = (0..m).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let oracle_ip: Complex64 = z.iter().zip(&g).map(|(z, g)| z.conj() * g).sum();
            assert!(close(expected_inner_product(&post, &g), oracle_ip, 1e-8));
            let oracle_norm = s.diagonal().iter().map(|v| v.re).sum::<f64>() + z.norm_squared();
            assert!((expected_squared_norm(&post) - oracle_norm).abs() < 1e-8 * (1.0 + oracle_norm));
            let gv = CVector::from_column_slice(&g);
            let oracle_sq = (gv.adjoint() * &s * &gv)[(0, 0)].re + oracle_ip.norm_sqr();
            assert!((expected_score_magnitude_sq(&post, &g) - oracle_sq).abs() < 1e-8 * (1.0 + oracle_sq));
        }
    }

    #[test]
    fn inconsistent_exact_data_uses_least_squares() {
        // two exact observations of a one-dimensional score that disagree
        let p = ConditioningProblem::new(
            CMatrix::from_row_slice(2, 1, &[c(1.0, 0.0), c(1.0, 0.0)]),
            CVector::from_column_slice(&[c(1.0, 0.0), c(3.0, 0.0)]),
            vec![1.0],
            vec![0.0, 0.0],
        )
        .unwrap();
        let post = condition(&p).unwrap();
        assert!(close(post.mean[0], c(2.0, 0.0), 1e-14));
    }

    #[test]
    fn rejects_bad_problems() {
        assert!(ConditioningProblem::new(CMatrix::zeros(1, 1), CVector::zeros(1), vec![0.0], vec![1.0]).is_err());
        assert!(ConditioningProblem::new(CMatrix::zeros(1, 1), CVector::zeros(1), vec![1.0], vec![-1.0]).is_err());
        assert!(ConditioningProblem::new(CMatrix::zeros(2, 1), CVector::zeros(1), vec![1.0], vec![1.0]).is_err());
    }

    proptest! {
        #[test]
        fn phase_equivariance(seed in 0u64..10_000, omega in -3.1f64..3.1) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = rng.random_range(1..=4);
            let n0 = rng.random_range(0..=m.min(2));
            let n_plus = rng.random_range(0..=5);
            let p = random_problem(&mut rng, m, n0, n_plus);
            let u = Complex64::from_polar(1.0, omega);
            let rotated = ConditioningProblem { observations: p.observations.map(|y| y * u), ..p.clone() };
            let a = condition(&p).unwrap();
            let b = condition(&rotated).unwrap();
            for k in 0..m {
                prop_assert!(close(b.mean[k], a.mean[k] * u, 1e-9));
            }
            for (x, y) in a.covariance.iter().zip(b.covariance.iter()) {
                prop_assert!((x - y).norm() < 1e-12);
            }
            let g: Vec<Complex64> = (0..m).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            prop_assert!((expected_squared_norm(&a) - expected_squared_norm(&b)).abs() < 1e-9 * (1.0 + expected_squared_norm(&a)));
            prop_assert!(close(expected_inner_product(&b, &g), expected_inner_product(&a, &g) * u.conj(), 1e-9));
        }

        #[test]
        fn extra_noisy_observation_never_adds_spread(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = rng.random_range(1..=4);
            let n_plus = rng.random_range(0..=5);
            let p = random_problem(&mut rng, m, 0, n_plus + 1);
            let smaller = ConditioningProblem::new(
                p.design.rows(0, n_plus).into_owned(),
                p.observations.rows(0, n_plus).into_owned(),
                p.eigenvalues.clone(),
                p.noise[..n_plus].to_vec(),
            ).unwrap();
            let tr = |post: &PosteriorScores| post.covariance.diagonal().iter().map(|z| z.re).sum::<f64>();
            prop_assert!(tr(&condition(&p).unwrap()) <= tr(&condition(&smaller).unwrap()) + 1e-12);
        }
    }
}
