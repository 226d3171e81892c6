//! Elastic and inelastic full Procrustes mean estimation.
//!
//! Each iteration fits the Hermitian covariance of the current SRV
//! evaluations (I), takes its leading eigenfunction as the mean (II),
//! rotates and rescales every curve using conditional score expectations
//! (III) and re-places its nodes by warping alignment to the mean (IV).

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{PenaltyMatrix, SplineBasis, SplineOrder};
use crate::covsmooth::{
    assemble_crossproducts, eigendecompose, fit_dense, fit_sparse, CovarianceFit, EigenSystem,
    Smoothing,
};
use crate::curves::{inner_product, srv_to_curve, CurveFunction, SrvCurve, SrvView};
use crate::error::{Error, Result};
use crate::gaussproc::{condition, expected_squared_norm, ConditioningProblem, PosteriorScores};
use crate::warping::{align, blend_reconstruction, AlignmentProblem, DEFAULT_GRID};

/// Components with eigenvalues below this fraction of the largest are
/// excluded from conditioning.
pub const EIGENVALUE_FLOOR: f64 = 1e-12;
/// Points of the reconstructed mean polyline.
pub const MEAN_POLYLINE_POINTS: usize = 201;
/// Pieces of the constant proxy used when a spline has to be warped.
pub const PROXY_PIECES: usize = 400;
const DISTANCE_ROUNDS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Sparse,
    Dense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeanFitConfig {
    /// Spline degree on SRV level, 0 or 1.
    pub basis_order: usize,
    pub knots: usize,
    pub penalty_order: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub rho: f64,
    pub nugget: bool,
    pub smoothing: Smoothing,
    pub backend: Backend,
    /// Candidate grid size for warping alignment.
    #[serde(skip)]
    pub warp_grid: usize,
}

impl Default for MeanFitConfig {
    fn default() -> Self {
        Self {
            basis_order: 1,
            knots: 13,
            penalty_order: 2,
            tolerance: 1e-3,
            max_iterations: 20,
            rho: 0.0,
            nugget: true,
            smoothing: Smoothing::Gcv,
            backend: Backend::Sparse,
            warp_grid: DEFAULT_GRID,
        }
    }
}

impl MeanFitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig(format!("tolerance {} must be positive", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::InvalidConfig(format!("rho {} outside [0, 1]", self.rho)));
        }
        if let Smoothing::Fixed(eta) = self.smoothing {
            if !(eta >= 0.0 && eta.is_finite()) {
                return Err(Error::InvalidConfig(format!("fixed smoothing parameter {eta} must be >= 0")));
            }
        }
        let basis = self.basis().map_err(|e| Error::InvalidConfig(e.to_string()))?;
        if self.penalty_order >= basis.dim() {
            return Err(Error::InvalidConfig(format!(
                "penalty order {} needs more than {} basis functions",
                self.penalty_order,
                basis.dim()
            )));
        }
        Ok(())
    }

    pub fn basis(&self) -> Result<SplineBasis> {
        SplineBasis::from_knots(SplineOrder::from_degree(self.basis_order)?, self.knots)
    }

    fn penalty(&self, basis: &SplineBasis) -> Result<PenaltyMatrix> {
        PenaltyMatrix::difference(basis.dim(), self.penalty_order)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveEstimate {
    /// Accumulated rotation applied to the curve.
    pub rotation: Complex64,
    /// Accumulated scaling applied to the curve.
    pub scale: f64,
    /// Conditional expectation of the squared norm in the last Step III.
    pub length_estimate: f64,
    pub curve: SrvCurve,
    /// Segments removed by collapse during warping.
    pub collapsed: usize,
    /// The conditional leading score vanished; the rotation was kept.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `||psi_h - psi_{h-1}||` after phase fixing.
    pub change: Option<f64>,
    pub leading_eigenvalue: f64,
    pub eigenvalue_sum: f64,
    pub eta_real: f64,
    pub eta_imag: f64,
    pub nugget: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticMeanResult {
    pub mean: CurveFunction,
    /// Mean curve `int psi |psi|` on an equidistant grid.
    pub mean_polyline: Vec<Complex64>,
    pub eigen: EigenSystem,
    pub curves: Vec<CurveEstimate>,
    pub variance: f64,
    pub trace: Vec<IterationRecord>,
    pub converged: bool,
    pub iterations: usize,
}

fn fit_covariance(curves: &[SrvCurve], config: &MeanFitConfig, basis: &SplineBasis) -> Result<CovarianceFit> {
    let penalty = config.penalty(basis)?;
    match config.backend {
        Backend::Sparse => fit_sparse(
            &assemble_crossproducts(curves),
            basis,
            &penalty,
            config.nugget,
            config.smoothing,
        ),
        Backend::Dense => {
            let mut fit = fit_dense(curves, basis, &penalty, config.smoothing)?;
            if !config.nugget {
                fit.nugget.clear();
            }
            Ok(fit)
        }
    }
}

fn variance_estimate(eigen: &EigenSystem, backend: Backend) -> f64 {
    let Some(&top) = eigen.values.first() else {
        return 1.0;
    };
    let v = match backend {
        Backend::Sparse => 1.0 - top / eigen.total(),
        Backend::Dense => 1.0 - top,
    };
    v.clamp(0.0, 1.0)
}

fn noise_for_conditioning(fit: &CovarianceFit, eigen: &EigenSystem) -> f64 {
    let tau2 = fit.nugget_variance(0.0);
    if tau2 < EIGENVALUE_FLOOR * eigen.total() {
        0.0
    } else {
        tau2
    }
}

struct StepThree {
    rotation: Complex64,
    scale: f64,
    length: f64,
    posterior: PosteriorScores,
    flagged: bool,
}

fn rotation_and_length(curve: &SrvCurve, eigen: &EigenSystem, noise: f64) -> Result<StepThree> {
    let problem = ConditioningProblem::from_eigen(eigen, &curve.times, &curve.values, noise)?;
    let posterior = condition(&problem)?;
    let length = expected_squared_norm(&posterior);
    if !(length > 0.0) {
        return Err(Error::ZeroPosterior);
    }
    let z1 = posterior.mean[0];
    let flagged = z1.norm() <= 1e-12 * length.sqrt();
    let rotation = if flagged {
        Complex64::new(1.0, 0.0)
    } else {
        z1.conj() / z1.norm()
    };
    Ok(StepThree {
        rotation,
        scale: length.powf(-0.5),
        length,
        posterior,
        flagged,
    })
}

fn leading_function(eigen: &EigenSystem) -> Result<CurveFunction> {
    if eigen.is_empty() {
        return Err(Error::ZeroPosterior);
    }
    Ok(eigen.eigenfunction(0))
}

fn rotate_leading(eigen: &mut EigenSystem, factor: Complex64) {
    for c in &mut eigen.coefs[0] {
        *c *= factor;
    }
}

fn check_curves(curves: &[SrvCurve]) -> Result<()> {
    if curves.len() < 2 {
        return Err(Error::InvalidInput(format!("at least two curves are required, got {}", curves.len())));
    }
    Ok(())
}

struct Presentation {
    mean: CurveFunction,
    polyline: Vec<Complex64>,
    factor: Complex64,
}

/// Rotates the mean so that its chord `beta(1) - beta(0)` is positive real.
fn present(mean: &CurveFunction) -> Presentation {
    let grid: Vec<f64> = (0..MEAN_POLYLINE_POINTS)
        .map(|k| k as f64 / (MEAN_POLYLINE_POINTS - 1) as f64)
        .collect();
    let polyline = srv_to_curve(mean, &grid);
    let chord = polyline[polyline.len() - 1] - polyline[0];
    let factor = if chord.norm() > 1e-12 {
        chord.conj() / chord.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    Presentation {
        mean: mean.scaled(factor),
        polyline: polyline.iter().map(|p| p * factor).collect(),
        factor,
    }
}

fn finish(
    mut eigen: EigenSystem,
    mut curves: Vec<CurveEstimate>,
    backend: Backend,
    trace: Vec<IterationRecord>,
    converged: bool,
) -> Result<ElasticMeanResult> {
    let presentation = present(&leading_function(&eigen)?);
    rotate_leading(&mut eigen, presentation.factor);
    for c in &mut curves {
        c.rotation *= presentation.factor;
        c.curve = c.curve.scaled(presentation.factor);
    }
    let iterations = trace.len();
    Ok(ElasticMeanResult {
        mean: presentation.mean,
        mean_polyline: presentation.polyline,
        variance: variance_estimate(&eigen, backend),
        eigen,
        curves,
        trace,
        converged,
        iterations,
    })
}

fn record(iteration: usize, change: Option<f64>, fit: &CovarianceFit, eigen: &EigenSystem) -> IterationRecord {
    IterationRecord {
        iteration,
        change,
        leading_eigenvalue: eigen.values.first().copied().unwrap_or(0.0),
        eigenvalue_sum: eigen.total(),
        eta_real: fit.eta_real,
        eta_imag: fit.eta_imag,
        nugget: fit.nugget_variance(0.0),
    }
}

/// Leading eigenfunction of one covariance fit; curves are rotation
/// aligned and normalized but keep their parameterization.
pub fn estimate_inelastic_mean(curves: &[SrvCurve], config: &MeanFitConfig) -> Result<ElasticMeanResult> {
    config.validate()?;
    check_curves(curves)?;
    let basis = config.basis()?;
    let fit = fit_covariance(curves, config, &basis)?;
    let eigen = eigendecompose(&fit)?;
    let truncated = eigen.truncated(EIGENVALUE_FLOOR);
    let noise = noise_for_conditioning(&fit, &truncated);
    let steps: Vec<StepThree> = curves
        .par_iter()
        .map(|c| rotation_and_length(c, &truncated, noise))
        .collect::<Result<_>>()?;
    let estimates = curves
        .iter()
        .zip(steps)
        .map(|(c, s)| CurveEstimate {
            rotation: s.rotation,
            scale: s.scale,
            length_estimate: s.length,
            curve: c.scaled(s.rotation * s.scale),
            collapsed: 0,
            flagged: s.flagged,
        })
        .collect();
    let trace = vec![record(1, None, &fit, &eigen)];
    finish(eigen, estimates, config.backend, trace, true)
}

/// Iterates Steps I-IV until the phase-fixed mean changes by less than
/// the tolerance, then runs Steps III and IV once more.
pub fn estimate_elastic_mean(curves: &[SrvCurve], config: &MeanFitConfig) -> Result<ElasticMeanResult> {
    config.validate()?;
    check_curves(curves)?;
    let basis = config.basis()?;
    let mut states: Vec<CurveEstimate> = curves
        .iter()
        .map(|c| CurveEstimate {
            rotation: Complex64::new(1.0, 0.0),
            scale: 1.0,
            length_estimate: c.norm().powi(2),
            curve: c.clone(),
            collapsed: 0,
            flagged: false,
        })
        .collect();
    let mut origins: Vec<Vec<f64>> = curves.iter().map(|c| c.nodes.clone()).collect();
    let mut previous: Option<CurveFunction> = None;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut last_eigen = None;
    for h in 1..=config.max_iterations {
        let current: Vec<SrvCurve> = states.iter().map(|s| s.curve.clone()).collect();
        let fit = fit_covariance(&current, config, &basis)?;
        let mut eigen = eigendecompose(&fit)?;
        let mut psi = leading_function(&eigen)?;
        let mut change = None;
        if let Some(prev) = &previous {
            let ip = inner_product(&psi, prev);
            if ip.norm() > 0.0 {
                let factor = ip / ip.norm();
                psi = psi.scaled(factor);
                rotate_leading(&mut eigen, factor);
            }
            let diff = CurveFunction {
                basis,
                coefs: psi.coefs.iter().zip(&prev.coefs).map(|(a, b)| a - b).collect(),
            };
            let d = diff.norm();
            change = Some(d);
            converged = d < config.tolerance;
        }
        trace.push(record(h, change, &fit, &eigen));
        log::info!(
            "iteration {h}: change {:?}, leading eigenvalue {:.6}",
            change,
            eigen.values.first().copied().unwrap_or(0.0)
        );

        let truncated = eigen.truncated(EIGENVALUE_FLOOR);
        let noise = noise_for_conditioning(&fit, &truncated);
        let rho = config.rho;
        let grid = config.warp_grid;
        let updated: Vec<(CurveEstimate, Vec<usize>)> = states
            .par_iter()
            .map(|state| -> Result<(CurveEstimate, Vec<usize>)> {
                let step = rotation_and_length(&state.curve, &truncated, noise)?;
                let factor = step.rotation * step.scale;
                let values = blend_reconstruction(&state.curve, &truncated, &step.posterior, rho, factor)?;
                let blended = SrvCurve {
                    values,
                    ..state.curve.clone()
                };
                let aligned = align(&AlignmentProblem::new(blended, &psi).with_grid(grid))?;
                let mut curve = aligned.curve;
                curve.length_estimate = step.length;
                let estimate = CurveEstimate {
                    rotation: state.rotation * step.rotation,
                    scale: state.scale * step.scale,
                    length_estimate: step.length,
                    collapsed: state.collapsed + (state.curve.len() - curve.len()),
                    curve,
                    flagged: step.flagged,
                };
                Ok((estimate, aligned.kept))
            })
            .collect::<Result<_>>()?;
        states = Vec::with_capacity(updated.len());
        for ((estimate, kept), origin) in updated.into_iter().zip(origins.iter_mut()) {
            *origin = surviving_nodes(origin, &kept);
            states.push(estimate);
        }
        center_warps(&mut states, &origins)?;
        previous = Some(psi);
        last_eigen = Some(eigen);
        if converged {
            break;
        }
    }
    if !converged {
        log::warn!("no convergence within {} iterations", config.max_iterations);
    }
    let eigen = last_eigen.expect("at least one iteration");
    finish(eigen, states, config.backend, trace, converged)
}

fn surviving_nodes(nodes: &[f64], kept: &[usize]) -> Vec<f64> {
    std::iter::once(0.0).chain(kept.iter().map(|&j| nodes[j + 1])).collect()
}

/// Piecewise-linear interpolation through increasing `(xs, ys)`.
fn interpolate(xs: &[f64], ys: &[f64], t: f64) -> f64 {
    let j = xs.partition_point(|&x| x <= t).clamp(1, xs.len() - 1);
    let (x0, x1) = (xs[j - 1], xs[j]);
    let w = ((t - x0) / (x1 - x0)).clamp(0.0, 1.0);
    ys[j - 1] + w * (ys[j] - ys[j - 1])
}

/// Re-parameterizes all curves by the average of their cumulative warps
/// back to the initial nodes. A common warp of all curves and the mean
/// leaves the objective unchanged, so without this the parameterization
/// drifts from iteration to iteration.
fn center_warps(states: &mut [CurveEstimate], origins: &[Vec<f64>]) -> Result<()> {
    let n = states.len() as f64;
    let mean_warp = |t: f64| -> f64 {
        states
            .iter()
            .zip(origins)
            .map(|(s, o)| interpolate(&s.curve.nodes, o, t))
            .sum::<f64>()
            / n
    };
    let moved: Vec<Vec<f64>> = states
        .iter()
        .map(|s| {
            let mut nodes: Vec<f64> = s.curve.nodes.iter().map(|&t| mean_warp(t)).collect();
            let last = nodes.len() - 1;
            nodes[0] = 0.0;
            nodes[last] = 1.0;
            nodes
        })
        .collect();
    for (state, nodes) in states.iter_mut().zip(moved) {
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            continue;
        }
        let values = state
            .curve
            .values
            .iter()
            .zip(state.curve.nodes.windows(2).zip(nodes.windows(2)))
            .map(|(q, (old, new))| q * ((old[1] - old[0]) / (new[1] - new[0])).sqrt())
            .collect();
        let length = state.curve.length_estimate;
        state.curve = SrvCurve::from_nodes(nodes, values)?;
        state.curve.length_estimate = length;
    }
    Ok(())
}

/// Elastic full Procrustes distance, approximated from above by
/// alternating closed-form rotation and warping alignment of `q2` to `q1`.
/// A spline `q2` is replaced by a piecewise-constant proxy.
pub fn elastic_distance<'a, 'b>(q1: impl Into<SrvView<'a>>, q2: impl Into<SrvView<'b>>, grid: usize) -> Result<f64> {
    let (q1, q2) = (q1.into(), q2.into());
    for q in [q1, q2] {
        let norm = q.norm();
        if (norm - 1.0).abs() > crate::curves::NORM_TOLERANCE {
            return Err(Error::NotNormalized { norm });
        }
    }
    let mut moving = match q2 {
        SrvView::Piecewise(c) => c.clone(),
        SrvView::Spline(f) => f.piecewise_constant_proxy(PROXY_PIECES),
    };
    let mut best = 0.0_f64;
    for _ in 0..DISTANCE_ROUNDS {
        let ip = inner_product(q1, &moving);
        best = best.max(ip.norm());
        if ip.norm() == 0.0 {
            break;
        }
        moving = moving.scaled(ip.conj() / ip.norm());
        let aligned = match q1 {
            SrvView::Piecewise(c) => align(&AlignmentProblem::new(moving.clone(), c).with_grid(grid))?,
            SrvView::Spline(f) => align(&AlignmentProblem::new(moving.clone(), f).with_grid(grid))?,
        };
        best = best.max(aligned.objective);
        if aligned.objective <= aligned.identity_objective {
            break;
        }
        moving = aligned.curve;
    }
    let best = best.min(1.0);
    Ok((1.0 - best * best).max(0.0).sqrt())
}

pub type Labels = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupVariance {
    pub labels: Labels,
    pub curves: usize,
    pub variance: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceDecomposition {
    pub primary: Vec<String>,
    pub complement: Vec<String>,
    pub total_variance: f64,
    pub groups: Vec<GroupVariance>,
    /// Distinct complement label combinations present.
    pub complement_levels: usize,
    /// Distinct combinations of all decomposition labels present.
    pub cells: usize,
    pub r_squared: f64,
}

fn project(labels: &Labels, keys: &[String]) -> Result<Labels> {
    keys.iter()
        .map(|k| {
            labels
                .get(k)
                .map(|v| (k.clone(), v.clone()))
                .ok_or_else(|| Error::InvalidInput(format!("curve has no feature `{k}`")))
        })
        .collect()
}

fn group_name(labels: &Labels) -> String {
    if labels.is_empty() {
        return "all".into();
    }
    labels
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// Group-wise elastic mean variances and the coefficient of determination
/// `R^2 = 1 - |A2| sum_a sigma^2_{a x A2} / (|X| sigma^2_X)` of the
/// `primary` features.
pub fn variance_decomposition(
    curves: &[SrvCurve],
    labels: &[Labels],
    primary: &[String],
    complement: &[String],
    config: &MeanFitConfig,
) -> Result<VarianceDecomposition> {
    if curves.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} curves but {} label sets",
            curves.len(),
            labels.len()
        )));
    }
    let mut groups: BTreeMap<Labels, Vec<usize>> = BTreeMap::new();
    let mut complement_tuples = BTreeSet::new();
    let mut cells = BTreeSet::new();
    let all_keys: Vec<String> = primary.iter().chain(complement).cloned().collect();
    for (i, l) in labels.iter().enumerate() {
        groups.entry(project(l, primary)?).or_default().push(i);
        complement_tuples.insert(project(l, complement)?);
        cells.insert(project(l, &all_keys)?);
    }
    for (key, members) in &groups {
        if members.len() < 2 {
            return Err(Error::EmptyGroup(group_name(key)));
        }
    }
    let total = estimate_elastic_mean(curves, config)?;
    let mut results = Vec::with_capacity(groups.len());
    for (key, members) in groups {
        let subset: Vec<SrvCurve> = members.iter().map(|&i| curves[i].clone()).collect();
        let fit = estimate_elastic_mean(&subset, config)?;
        results.push(GroupVariance {
            labels: key,
            curves: members.len(),
            variance: fit.variance,
            converged: fit.converged,
        });
    }
    let sum: f64 = results.iter().map(|g| g.variance).sum();
    let numerator = complement_tuples.len() as f64 * sum;
    let denominator = cells.len() as f64 * total.variance;
    let r_squared = if denominator > 0.0 {
        1.0 - numerator / denominator
    } else {
        0.0
    };
    Ok(VarianceDecomposition {
        primary: primary.to_vec(),
        complement: complement.to_vec(),
        total_variance: total.variance,
        groups: results,
        complement_levels: complement_tuples.len(),
        cells: cells.len(),
        r_squared,
    })
}
