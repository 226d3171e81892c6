//! Hermitian covariance surface estimation.
//!
//! The covariance `C(s, t) = E[conj(Y(s)) Y(t)]` is modelled as
//! `f(s)^T Xi f(t)` with a Hermitian coefficient matrix `Xi`. The sparse
//! estimator regresses within-curve cross products on the tensor-product
//! basis, fitting the symmetric real part (plus a constant nugget on the
//! diagonal) and the antisymmetric imaginary part separately. The dense
//! estimator averages outer products of per-curve coefficient fits.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{
    antisymmetric_index, symmetric_index, PenaltyMatrix, SplineBasis,
};
use crate::curves::{CurveFunction, SrvCurve};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_with_jitter, hermitian_asymmetry, CMatrix};

/// Lower end of the GCV search grid for smoothing parameters.
pub const GCV_ETA_MIN: f64 = 1e-4;
/// Upper end of the GCV search grid.
pub const GCV_ETA_MAX: f64 = 1e4;
/// Grid points per decade.
pub const GCV_POINTS_PER_DECADE: usize = 10;

/// Smoothing-parameter selection. Penalties are rescaled by
/// `tr(X^T X) / tr(S)` before use, so `eta` is dimensionless.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Smoothing {
    #[default]
    Gcv,
    Fixed(f64),
}

/// One response product `conj(y_ij) y_ik` at `(t_ij, t_ik)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossProductRow {
    pub curve: usize,
    pub s: f64,
    pub t: f64,
    pub response: Complex64,
    pub diagonal: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CrossProductRows {
    pub rows: Vec<CrossProductRow>,
}

impl CrossProductRows {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn diagonal_count(&self) -> usize {
        self.rows.iter().filter(|r| r.diagonal).count()
    }
}

pub fn assemble_crossproducts(curves: &[SrvCurve]) -> CrossProductRows {
    let mut rows = Vec::with_capacity(curves.iter().map(|c| c.len() * c.len()).sum());
    for (i, curve) in curves.iter().enumerate() {
        for (j, (&s, &ys)) in curve.times.iter().zip(&curve.values).enumerate() {
            for (k, (&t, &yt)) in curve.times.iter().zip(&curve.values).enumerate() {
                rows.push(CrossProductRow {
                    curve: i,
                    s,
                    t,
                    response: ys.conj() * yt,
                    diagonal: j == k,
                });
            }
        }
    }
    CrossProductRows { rows }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub observations: usize,
    pub rss_real: f64,
    pub rss_imag: f64,
    pub edf_real: f64,
    pub edf_imag: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceFit {
    pub basis: SplineBasis,
    /// Hermitian `m x m` coefficient matrix.
    pub xi: CMatrix,
    /// Nugget coefficients; a single constant when enabled, empty otherwise.
    pub nugget: Vec<f64>,
    pub eta_real: f64,
    pub eta_imag: f64,
    pub eta_nugget: f64,
    pub residual: ResidualSummary,
}

impl CovarianceFit {
    pub fn surface(&self, s: f64, t: f64) -> Complex64 {
        let a = self.basis.local_unchecked(s);
        let b = self.basis.local_unchecked(t);
        let mut acc = Complex64::new(0.0, 0.0);
        for (g, fg) in a.iter() {
            for (k, fk) in b.iter() {
                acc += self.xi[(g, k)] * (fg * fk);
            }
        }
        acc
    }

    /// Measurement-error variance at `t`, clamped to be nonnegative.
    pub fn nugget_variance(&self, _t: f64) -> f64 {
        self.nugget.first().copied().unwrap_or(0.0).max(0.0)
    }
}

/// Sparse sufficient statistics of a penalized least-squares problem.
#[derive(Debug, Clone)]
struct NormalEquations {
    gram: DMatrix<f64>,
    rhs: DVector<f64>,
    yty: f64,
    observations: usize,
}

impl NormalEquations {
    fn new(p: usize) -> Self {
        Self {
            gram: DMatrix::zeros(p, p),
            rhs: DVector::zeros(p),
            yty: 0.0,
            observations: 0,
        }
    }

    fn add_row(&mut self, entries: &[(usize, f64)], y: f64) {
        for &(a, va) in entries {
            self.rhs[a] += va * y;
            for &(b, vb) in entries {
                self.gram[(a, b)] += va * vb;
            }
        }
        self.yty += y * y;
        self.observations += 1;
    }
}

#[derive(Debug, Clone)]
struct PenalizedSolution {
    coef: DVector<f64>,
    eta: f64,
    edf: f64,
    rss: f64,
}

fn log_grid() -> Vec<f64> {
    let decades = (GCV_ETA_MAX / GCV_ETA_MIN).log10().round() as usize;
    let n = decades * GCV_POINTS_PER_DECADE;
    (0..=n)
        .map(|k| GCV_ETA_MIN * 10f64.powf(k as f64 / GCV_POINTS_PER_DECADE as f64))
        .collect()
}

fn penalty_scale(gram: &DMatrix<f64>, penalty: &DMatrix<f64>) -> f64 {
    let tp = penalty.trace();
    if tp > 0.0 {
        gram.trace().max(f64::MIN_POSITIVE) / tp
    } else {
        1.0
    }
}

fn solve_fixed(eq: &NormalEquations, penalty: &DMatrix<f64>, eta: f64) -> Result<PenalizedSolution> {
    let a = &eq.gram + penalty * eta;
    let chol = cholesky_with_jitter(&a)?;
    let coef = chol.solve(&eq.rhs);
    let edf = chol.solve(&eq.gram).trace();
    let rss = (eq.yty - 2.0 * coef.dot(&eq.rhs) + coef.dot(&(&eq.gram * &coef))).max(0.0);
    Ok(PenalizedSolution {
        coef,
        eta,
        edf,
        rss,
    })
}

/// GCV over the log grid using one simultaneous diagonalization of
/// `X^T X` and the penalty; the chosen `eta` is then refit directly.
fn select_gcv(eq: &NormalEquations, penalty: &DMatrix<f64>) -> Result<f64> {
    if penalty.iter().all(|v| *v == 0.0) || eq.gram.nrows() == 0 {
        return Ok(0.0);
    }
    let combined = &eq.gram + penalty;
    let chol = cholesky_with_jitter(&combined)?;
    let l = chol.l();
    let linv_s = l
        .solve_lower_triangular(penalty)
        .ok_or(Error::SingularDesign { condition: f64::INFINITY })?;
    let c = l
        .solve_lower_triangular(&linv_s.transpose())
        .ok_or(Error::SingularDesign { condition: f64::INFINITY })?;
    let c = (&c + c.transpose()) * 0.5;
    let eig = c.symmetric_eigen();
    let linv_r = l
        .solve_lower_triangular(&eq.rhs)
        .ok_or(Error::SingularDesign { condition: f64::INFINITY })?;
    let z = eig.eigenvectors.transpose() * linv_r;
    let d: Vec<f64> = eig.eigenvalues.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let n = eq.observations as f64;
    let mut best = (f64::INFINITY, GCV_ETA_MIN);
    for eta in log_grid() {
        let mut edf = 0.0;
        let mut rss = eq.yty;
        for (dk, zk) in d.iter().zip(z.iter()) {
            let denom = 1.0 + (eta - 1.0) * dk;
            let w = zk / denom;
            edf += (1.0 - dk) / denom;
            rss += -2.0 * w * zk + (1.0 - dk) * w * w;
        }
        let resid_df = n - edf;
        if resid_df <= 0.0 {
            continue;
        }
        let score = n * rss.max(0.0) / (resid_df * resid_df);
        if score < best.0 {
            best = (score, eta);
        }
    }
    Ok(best.1)
}

fn solve_penalized(
    eq: &NormalEquations,
    penalty: &DMatrix<f64>,
    smoothing: Smoothing,
) -> Result<PenalizedSolution> {
    let scaled = penalty * penalty_scale(&eq.gram, penalty);
    let eta = match smoothing {
        Smoothing::Fixed(eta) => {
            if !(eta >= 0.0) {
                return Err(Error::InvalidConfig(format!("smoothing parameter {eta} < 0")));
            }
            eta
        }
        Smoothing::Gcv => select_gcv(eq, &scaled)?,
    };
    solve_fixed(eq, &scaled, eta)
}

/// `D P_tensor D^T` for a constraint transform whose rows map a parameter
/// to at most two `vec` positions, computed from the sparse rows.
fn constrained_penalty(rows: &[Vec<(usize, usize, f64)>], penalty: &PenaltyMatrix) -> DMatrix<f64> {
    let p = &penalty.matrix;
    let n = rows.len();
    let mut out = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let mut acc = 0.0;
            for &(g, k, va) in &rows[a] {
                for &(g2, k2, vb) in &rows[b] {
                    let mut entry = 0.0;
                    if k == k2 {
                        entry += p[(g, g2)];
                    }
                    if g == g2 {
                        entry += p[(k, k2)];
                    }
                    acc += va * entry * vb;
                }
            }
            out[(a, b)] = acc;
            out[(b, a)] = acc;
        }
    }
    out
}

fn symmetric_rows(m: usize) -> Vec<Vec<(usize, usize, f64)>> {
    let mut rows = vec![Vec::new(); m * (m + 1) / 2];
    for g in 0..m {
        for k in g..m {
            let row = &mut rows[symmetric_index(m, g, k)];
            row.push((g, k, 1.0));
            if g != k {
                row.push((k, g, 1.0));
            }
        }
    }
    rows
}

fn antisymmetric_rows(m: usize) -> Vec<Vec<(usize, usize, f64)>> {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut rows = vec![Vec::new(); m * m.saturating_sub(1) / 2];
    for g in 0..m {
        for k in g + 1..m {
            rows[antisymmetric_index(m, g, k)] = vec![(g, k, scale), (k, g, -scale)];
        }
    }
    rows
}

fn push_entry(entries: &mut Vec<(usize, f64)>, col: usize, value: f64) {
    if let Some(e) = entries.iter_mut().find(|e| e.0 == col) {
        e.1 += value;
    } else {
        entries.push((col, value));
    }
}

/// Sparse Hermitian tensor-product covariance smoothing.
pub fn fit_sparse(
    rows: &CrossProductRows,
    basis: &SplineBasis,
    penalty: &PenaltyMatrix,
    nugget: bool,
    smoothing: Smoothing,
) -> Result<CovarianceFit> {
    let m = basis.dim();
    if penalty.dim() != m {
        return Err(Error::InvalidInput(format!(
            "penalty of dimension {} for basis of dimension {m}",
            penalty.dim()
        )));
    }
    let n_sym = m * (m + 1) / 2;
    let n_anti = m * m.saturating_sub(1) / 2;
    let nugget_cols = usize::from(nugget && rows.diagonal_count() > 0);
    let mut eq_re = NormalEquations::new(n_sym + nugget_cols);
    let mut eq_im = NormalEquations::new(n_anti);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut re_entries = Vec::with_capacity(5);
    let mut im_entries = Vec::with_capacity(4);
    for row in &rows.rows {
        re_entries.clear();
        im_entries.clear();
        let a = basis.local_unchecked(row.s);
        let b = basis.local_unchecked(row.t);
        for (g, fg) in a.iter() {
            for (k, fk) in b.iter() {
                let v = fg * fk;
                if v == 0.0 {
                    continue;
                }
                push_entry(&mut re_entries, symmetric_index(m, g, k), v);
                if g < k {
                    push_entry(&mut im_entries, antisymmetric_index(m, g, k), v * scale);
                } else if g > k {
                    push_entry(&mut im_entries, antisymmetric_index(m, k, g), -v * scale);
                }
            }
        }
        if nugget_cols == 1 && row.diagonal {
            re_entries.push((n_sym, 1.0));
        }
        eq_re.add_row(&re_entries, row.response.re);
        if n_anti > 0 {
            eq_im.add_row(&im_entries, row.response.im);
        }
    }

    let mut pen_re = DMatrix::zeros(n_sym + nugget_cols, n_sym + nugget_cols);
    pen_re
        .view_mut((0, 0), (n_sym, n_sym))
        .copy_from(&constrained_penalty(&symmetric_rows(m), penalty));
    let pen_im = constrained_penalty(&antisymmetric_rows(m), penalty);

    let sol_re = solve_penalized(&eq_re, &pen_re, smoothing)?;
    let sol_im = if n_anti > 0 {
        solve_penalized(&eq_im, &pen_im, smoothing)?
    } else {
        PenalizedSolution {
            coef: DVector::zeros(0),
            eta: 0.0,
            edf: 0.0,
            rss: 0.0,
        }
    };

    let mut xi = CMatrix::zeros(m, m);
    for g in 0..m {
        for k in 0..m {
            let re = sol_re.coef[symmetric_index(m, g, k)];
            let im = match g.cmp(&k) {
                std::cmp::Ordering::Less => sol_im.coef[antisymmetric_index(m, g, k)] * scale,
                std::cmp::Ordering::Greater => -sol_im.coef[antisymmetric_index(m, k, g)] * scale,
                std::cmp::Ordering::Equal => 0.0,
            };
            xi[(g, k)] = Complex64::new(re, im);
        }
    }
    let nugget = if nugget_cols == 1 {
        vec![sol_re.coef[n_sym].max(0.0)]
    } else {
        Vec::new()
    };
    Ok(CovarianceFit {
        basis: *basis,
        xi,
        nugget,
        eta_real: sol_re.eta,
        eta_imag: sol_im.eta,
        eta_nugget: 0.0,
        residual: ResidualSummary {
            observations: rows.len(),
            rss_real: sol_re.rss,
            rss_imag: sol_im.rss,
            edf_real: sol_re.edf,
            edf_imag: sol_im.edf,
        },
    })
}

struct CurveSystem {
    gram: DMatrix<f64>,
    rhs_re: DVector<f64>,
    rhs_im: DVector<f64>,
    yty: f64,
    n: usize,
}

fn curve_system(curve: &SrvCurve, basis: &SplineBasis) -> CurveSystem {
    let m = basis.dim();
    let mut gram = DMatrix::zeros(m, m);
    let mut rhs_re = DVector::zeros(m);
    let mut rhs_im = DVector::zeros(m);
    let mut yty = 0.0;
    for (&t, &y) in curve.times.iter().zip(&curve.values) {
        let local = basis.local_unchecked(t);
        for (a, va) in local.iter() {
            rhs_re[a] += va * y.re;
            rhs_im[a] += va * y.im;
            for (b, vb) in local.iter() {
                gram[(a, b)] += va * vb;
            }
        }
        yty += y.norm_sqr();
    }
    CurveSystem {
        gram,
        rhs_re,
        rhs_im,
        yty,
        n: curve.len(),
    }
}

/// Per-curve penalized coefficient fits, pooled for a common `eta`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientFits {
    pub functions: Vec<CurveFunction>,
    pub eta: f64,
    /// Pooled residual sum of squares `sum |y - fit|^2`.
    pub rss: f64,
    /// Effective degrees of freedom summed over curves.
    pub edf: f64,
    /// Pooled residual variance `E|eps|^2`.
    pub noise_variance: f64,
}

pub fn fit_curve_coefficients(
    curves: &[SrvCurve],
    basis: &SplineBasis,
    penalty: &PenaltyMatrix,
    smoothing: Smoothing,
) -> Result<CoefficientFits> {
    let systems: Vec<CurveSystem> = curves.par_iter().map(|c| curve_system(c, basis)).collect();
    let mean_trace =
        systems.iter().map(|s| s.gram.trace()).sum::<f64>() / systems.len().max(1) as f64;
    let scaled = &penalty.matrix
        * if penalty.matrix.trace() > 0.0 {
            mean_trace / penalty.matrix.trace()
        } else {
            1.0
        };
    let eta = match smoothing {
        Smoothing::Fixed(eta) if eta >= 0.0 => eta,
        Smoothing::Fixed(eta) => {
            return Err(Error::InvalidConfig(format!("smoothing parameter {eta} < 0")))
        }
        Smoothing::Gcv if scaled.iter().all(|v| *v == 0.0) => 0.0,
        Smoothing::Gcv => {
            let total_n: f64 = systems.iter().map(|s| s.n as f64).sum::<f64>();
            let mut best = (f64::INFINITY, GCV_ETA_MIN);
            for eta in log_grid() {
                let mut rss = 0.0;
                let mut edf = 0.0;
                let mut ok = true;
                for sys in &systems {
                    match solve_curve(sys, &scaled, eta) {
                        Ok((_, r, e)) => {
                            rss += r;
                            edf += e;
                        }
                        Err(_) => {
                            ok = false;
                            break;
                        }
                    }
                }
                let resid_df = total_n - edf;
                if !ok || resid_df <= 0.0 {
                    continue;
                }
                let score = total_n * rss / (resid_df * resid_df);
                if score < best.0 {
                    best = (score, eta);
                }
            }
            best.1
        }
    };
    let fits: Vec<(Vec<Complex64>, f64, f64)> = systems
        .par_iter()
        .map(|sys| solve_curve(sys, &scaled, eta))
        .collect::<Result<_>>()?;
    let total_n: usize = systems.iter().map(|s| s.n).sum();
    let rss: f64 = fits.iter().map(|f| f.1).sum();
    let edf: f64 = fits.iter().map(|f| f.2).sum();
    let resid_df = total_n as f64 - edf;
    let noise_variance = if resid_df > 0.5 { rss / resid_df } else { 0.0 };
    let functions = fits
        .into_iter()
        .map(|(coefs, _, _)| CurveFunction::new(*basis, coefs))
        .collect::<Result<_>>()?;
    Ok(CoefficientFits {
        functions,
        eta,
        rss,
        edf,
        noise_variance,
    })
}

fn solve_curve(sys: &CurveSystem, penalty: &DMatrix<f64>, eta: f64) -> Result<(Vec<Complex64>, f64, f64)> {
    let a = &sys.gram + penalty * eta;
    let chol = cholesky_with_jitter(&a)?;
    let re = chol.solve(&sys.rhs_re);
    let im = chol.solve(&sys.rhs_im);
    let edf = chol.solve(&sys.gram).trace();
    let fit_re = re.dot(&(&sys.gram * &re)) - 2.0 * re.dot(&sys.rhs_re);
    let fit_im = im.dot(&(&sys.gram * &im)) - 2.0 * im.dot(&sys.rhs_im);
    let rss = (sys.yty + fit_re + fit_im).max(0.0);
    let coefs = re
        .iter()
        .zip(im.iter())
        .map(|(r, i)| Complex64::new(*r, *i))
        .collect();
    Ok((coefs, rss, edf))
}

/// Dense-data estimator: `Xi` is the average of `conj(theta_i) theta_i^T`
/// over per-curve coefficient vectors, `tau^2` the pooled residual variance.
pub fn fit_dense(
    curves: &[SrvCurve],
    basis: &SplineBasis,
    penalty: &PenaltyMatrix,
    smoothing: Smoothing,
) -> Result<CovarianceFit> {
    if curves.is_empty() {
        return Err(Error::InvalidInput("no curves to fit".into()));
    }
    let fits = fit_curve_coefficients(curves, basis, penalty, smoothing)?;
    let m = basis.dim();
    let mut xi = CMatrix::zeros(m, m);
    for f in &fits.functions {
        for g in 0..m {
            for k in 0..m {
                xi[(g, k)] += f.coefs[g].conj() * f.coefs[k];
            }
        }
    }
    xi /= Complex64::new(fits.functions.len() as f64, 0.0);
    let observations = curves.iter().map(|c| c.len()).sum();
    Ok(CovarianceFit {
        basis: *basis,
        xi,
        nugget: vec![fits.noise_variance.max(0.0)],
        eta_real: fits.eta,
        eta_imag: fits.eta,
        eta_nugget: 0.0,
        residual: ResidualSummary {
            observations,
            rss_real: fits.rss,
            rss_imag: 0.0,
            edf_real: fits.edf,
            edf_imag: fits.edf,
        },
    })
}

/// Eigenfunctions `e_k = theta_k^T f` of the estimated covariance operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSystem {
    pub basis: SplineBasis,
    /// Positive eigenvalues in descending order.
    pub values: Vec<f64>,
    /// `G`-orthonormal coefficient vectors.
    pub coefs: Vec<Vec<Complex64>>,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn eigenfunction(&self, k: usize) -> CurveFunction {
        CurveFunction {
            basis: self.basis,
            coefs: self.coefs[k].clone(),
        }
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Keeps components with `lambda >= floor * lambda_1`.
    pub fn truncated(&self, relative_floor: f64) -> EigenSystem {
        let Some(&top) = self.values.first() else {
            return self.clone();
        };
        let keep = self
            .values
            .iter()
            .take_while(|v| **v >= relative_floor * top)
            .count();
        EigenSystem {
            basis: self.basis,
            values: self.values[..keep].to_vec(),
            coefs: self.coefs[..keep].to_vec(),
        }
    }

    /// `sum_k lambda_k conj(e_k(s)) e_k(t)`.
    pub fn reconstruct(&self, s: f64, t: f64) -> Complex64 {
        (0..self.len())
            .map(|k| {
                let e = self.eigenfunction(k);
                e.evaluate(s).conj() * e.evaluate(t) * self.values[k]
            })
            .sum()
    }
}

/// Eigen-decomposition of the covariance operator with kernel
/// `f(s)^T Xi f(t)`.
///
/// With `G = L L^T` the operator acts on coefficient vectors like
/// `Xi G`, similar to the Hermitian `L^T Xi L`. For an eigenvector `w`,
/// `v = L^{-T} w` satisfies `Xi = sum lambda v v^dagger` and
/// `theta = conj(v)` gives `e(t) = theta^T f(t)`.
pub fn eigendecompose(fit: &CovarianceFit) -> Result<EigenSystem> {
    eigendecompose_matrix(&fit.xi, &fit.basis)
}

pub fn eigendecompose_matrix(xi: &CMatrix, basis: &SplineBasis) -> Result<EigenSystem> {
    let m = basis.dim();
    if xi.shape() != (m, m) {
        return Err(Error::InvalidInput(format!(
            "coefficient matrix {:?} does not match basis dimension {m}",
            xi.shape()
        )));
    }
    let scale = xi.iter().fold(0.0_f64, |a, z| a.max(z.norm()));
    let asym = hermitian_asymmetry(xi);
    if asym > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotHermitian { asymmetry: asym });
    }
    let gram = basis.gram();
    let chol = nalgebra::Cholesky::new(gram).ok_or(Error::NotSpd)?;
    let l = chol.l().map(|v| Complex64::new(v, 0.0));
    let whitened = l.transpose() * xi * &l;
    let whitened = (&whitened + whitened.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = whitened.symmetric_eigen();
    let lt = chol.l().transpose();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut values = Vec::new();
    let mut coefs = Vec::new();
    for k in order {
        let lambda = eig.eigenvalues[k];
        if !(lambda > 0.0) {
            continue;
        }
        let w = eig.eigenvectors.column(k);
        let w_re = DVector::from_iterator(m, w.iter().map(|z| z.re));
        let w_im = DVector::from_iterator(m, w.iter().map(|z| z.im));
        let v_re = lt.solve_upper_triangular(&w_re).ok_or(Error::NotSpd)?;
        let v_im = lt.solve_upper_triangular(&w_im).ok_or(Error::NotSpd)?;
        let theta: Vec<Complex64> = v_re
            .iter()
            .zip(v_im.iter())
            .map(|(r, i)| Complex64::new(*r, -*i))
            .collect();
        values.push(lambda);
        coefs.push(theta);
    }
    Ok(EigenSystem {
        basis: *basis,
        values,
        coefs,
    })
}
