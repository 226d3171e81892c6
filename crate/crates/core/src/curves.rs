//! Plane curves as complex-valued functions: sample polygons, their
//! piecewise-constant square-root-velocity (SRV) representations, spline
//! SRV functions, and the inelastic full Procrustes geometry on them.

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::SplineBasis;
use crate::error::{Error, Result};

/// Tolerance for the unit-norm precondition of distance computations.
pub const NORM_TOLERANCE: f64 = 1e-8;

/// Ordered sample points of one observed curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanePolygon {
    pub id: String,
    pub points: Vec<Complex64>,
}

impl PlanePolygon {
    pub fn new(id: impl Into<String>, points: Vec<Complex64>) -> Result<Self> {
        let id = id.into();
        if points.iter().any(|p| !p.re.is_finite() || !p.im.is_finite()) {
            return Err(Error::DegeneratePolygon(format!(
                "curve `{id}` has non-finite coordinates"
            )));
        }
        let polygon = Self { id, points };
        let distinct = polygon.distinct_points().len();
        if distinct < 2 {
            return Err(Error::DegeneratePolygon(format!(
                "curve `{}` has {distinct} distinct point(s)",
                polygon.id
            )));
        }
        Ok(polygon)
    }

    pub fn from_xy(id: impl Into<String>, xy: &[(f64, f64)]) -> Result<Self> {
        Self::new(id, xy.iter().map(|&(x, y)| Complex64::new(x, y)).collect())
    }

    /// Points with consecutive duplicates (zero-length edges) merged.
    pub fn distinct_points(&self) -> Vec<Complex64> {
        let mut out: Vec<Complex64> = Vec::with_capacity(self.points.len());
        for &p in &self.points {
            if out.last() != Some(&p) {
                out.push(p);
            }
        }
        out
    }

    pub fn merged_duplicates(&self) -> usize {
        self.points.len() - self.distinct_points().len()
    }

    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    /// Applies `z -> scale * e^{i angle} * z + shift`.
    pub fn transformed(&self, rotation: Complex64, scale: f64, shift: Complex64) -> Self {
        Self {
            id: self.id.clone(),
            points: self
                .points
                .iter()
                .map(|&p| rotation * scale * p + shift)
                .collect(),
        }
    }
}

/// Piecewise-constant SRV representation of one curve.
///
/// `values[j]` holds on `[nodes[j], nodes[j + 1])` and is the SRV evaluation
/// at `times[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrvCurve {
    pub times: Vec<f64>,
    pub values: Vec<Complex64>,
    pub nodes: Vec<f64>,
    pub length_estimate: f64,
}

impl SrvCurve {
    /// Builds a curve with times at interval midpoints.
    pub fn from_nodes(nodes: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if values.is_empty() || nodes.len() != values.len() + 1 {
            return Err(Error::InvalidInput(format!(
                "{} nodes do not bound {} SRV values",
                nodes.len(),
                values.len()
            )));
        }
        if nodes[0] != 0.0 || *nodes.last().unwrap() != 1.0 {
            return Err(Error::InvalidInput("nodes must span [0, 1]".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("nodes must be strictly increasing".into()));
        }
        if values.iter().any(|q| !q.re.is_finite() || !q.im.is_finite()) {
            return Err(Error::InvalidInput("SRV values must be finite".into()));
        }
        let times = nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        Ok(Self {
            times,
            values,
            nodes,
            length_estimate: 1.0,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn interval_lengths(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.windows(2).map(|w| w[1] - w[0])
    }

    pub fn norm(&self) -> f64 {
        self.values
            .iter()
            .zip(self.interval_lengths())
            .map(|(q, l)| q.norm_sqr() * l)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            values: self.values.iter().map(|q| q * factor).collect(),
            ..self.clone()
        }
    }

    /// Value of the piecewise-constant function at `t` (right-continuous).
    pub fn value_at(&self, t: f64) -> Complex64 {
        let j = self.nodes.partition_point(|s| *s <= t);
        self.values[j.saturating_sub(1).min(self.values.len() - 1)]
    }
}

/// Complex spline function `psi(t) = theta^T f(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveFunction {
    pub basis: SplineBasis,
    pub coefs: Vec<Complex64>,
}

impl CurveFunction {
    pub fn new(basis: SplineBasis, coefs: Vec<Complex64>) -> Result<Self> {
        if coefs.len() != basis.dim() {
            return Err(Error::InvalidInput(format!(
                "{} coefficients for a basis of dimension {}",
                coefs.len(),
                basis.dim()
            )));
        }
        if coefs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidInput("coefficients must be finite".into()));
        }
        Ok(Self { basis, coefs })
    }

    pub fn evaluate(&self, t: f64) -> Complex64 {
        self.basis
            .local_unchecked(t)
            .iter()
            .map(|(k, w)| self.coefs[k] * w)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        inner_product(self, self).re.max(0.0).sqrt()
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            basis: self.basis,
            coefs: self.coefs.iter().map(|c| c * factor).collect(),
        }
    }

    /// Piecewise-constant proxy on `pieces` equal intervals, renormalized to
    /// the norm of `self`.
    pub fn piecewise_constant_proxy(&self, pieces: usize) -> SrvCurve {
        let pieces = pieces.max(1);
        let nodes: Vec<f64> = (0..=pieces).map(|k| k as f64 / pieces as f64).collect();
        let values: Vec<Complex64> = nodes
            .windows(2)
            .map(|w| self.evaluate(0.5 * (w[0] + w[1])))
            .collect();
        let mut curve = SrvCurve {
            times: nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect(),
            values,
            nodes,
            length_estimate: 1.0,
        };
        let proxy_norm = curve.norm();
        if proxy_norm > 0.0 {
            let factor = Complex64::new(self.norm() / proxy_norm, 0.0);
            curve = curve.scaled(factor);
        }
        curve
    }
}

/// Segment of a piecewise-linear complex function on `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearPiece {
    pub start: f64,
    pub end: f64,
    pub left: Complex64,
    pub right: Complex64,
}

impl LinearPiece {
    pub fn at(&self, t: f64) -> Complex64 {
        let width = self.end - self.start;
        if width <= 0.0 {
            return self.left;
        }
        let w = (t - self.start) / width;
        self.left * (1.0 - w) + self.right * w
    }
}

/// Borrowed view over either SRV representation.
#[derive(Debug, Clone, Copy)]
pub enum SrvView<'a> {
    Piecewise(&'a SrvCurve),
    Spline(&'a CurveFunction),
}

impl<'a> From<&'a SrvCurve> for SrvView<'a> {
    fn from(c: &'a SrvCurve) -> Self {
        SrvView::Piecewise(c)
    }
}

impl<'a> From<&'a CurveFunction> for SrvView<'a> {
    fn from(c: &'a CurveFunction) -> Self {
        SrvView::Spline(c)
    }
}

impl SrvView<'_> {
    /// The function as contiguous linear pieces covering [0, 1].
    pub fn pieces(&self) -> Vec<LinearPiece> {
        match self {
            SrvView::Piecewise(c) => c
                .nodes
                .windows(2)
                .zip(&c.values)
                .map(|(w, &q)| LinearPiece {
                    start: w[0],
                    end: w[1],
                    left: q,
                    right: q,
                })
                .collect(),
            SrvView::Spline(f) => {
                let bp = f.basis.breakpoints();
                bp.windows(2)
                    .map(|w| {
                        let mid = f.evaluate(0.5 * (w[0] + w[1]));
                        match f.basis.order() {
                            crate::basis::SplineOrder::Constant => LinearPiece {
                                start: w[0],
                                end: w[1],
                                left: mid,
                                right: mid,
                            },
                            crate::basis::SplineOrder::Linear => LinearPiece {
                                start: w[0],
                                end: w[1],
                                left: f.evaluate(w[0]),
                                right: f.evaluate(w[1]),
                            },
                        }
                    })
                    .collect()
            }
        }
    }

    pub fn norm(&self) -> f64 {
        inner_product(*self, *self).re.max(0.0).sqrt()
    }
}

/// `<a, b> = \int conj(a(t)) b(t) dt`, exact for all supported representations.
pub fn inner_product<'a, 'b>(a: impl Into<SrvView<'a>>, b: impl Into<SrvView<'b>>) -> Complex64 {
    let (a, b) = (a.into(), b.into());
    if let (SrvView::Spline(fa), SrvView::Spline(fb)) = (a, b) {
        if fa.basis == fb.basis {
            let g = fa.basis.gram();
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..fa.coefs.len() {
                for j in 0..fb.coefs.len() {
                    if g[(i, j)] != 0.0 {
                        acc += fa.coefs[i].conj() * fb.coefs[j] * g[(i, j)];
                    }
                }
            }
            return acc;
        }
    }
    let pa = a.pieces();
    let pb = b.pieces();
    let (mut i, mut j) = (0, 0);
    let mut acc = Complex64::new(0.0, 0.0);
    let mut cursor = 0.0_f64;
    while i < pa.len() && j < pb.len() {
        let end = pa[i].end.min(pb[j].end);
        if end > cursor {
            // Simpson's rule is exact for the quadratic integrand.
            let mid = 0.5 * (cursor + end);
            let f = |t: f64| pa[i].at(t).conj() * pb[j].at(t);
            acc += (end - cursor) / 6.0 * (f(cursor) + 4.0 * f(mid) + f(end));
            cursor = end;
        }
        if pa[i].end <= end {
            i += 1;
        }
        if pb[j].end <= end {
            j += 1;
        }
    }
    acc
}

/// Unit-length, translation-normalized SRV of a sample polygon under the
/// constant-speed parameterization of the polygon.
pub fn polygon_to_srv(polygon: &PlanePolygon) -> Result<SrvCurve> {
    let points = polygon.distinct_points();
    if points.len() < 2 {
        return Err(Error::DegeneratePolygon(format!(
            "curve `{}` has fewer than 2 distinct points",
            polygon.id
        )));
    }
    let edges: Vec<Complex64> = points.windows(2).map(|w| w[1] - w[0]).collect();
    let lengths: Vec<f64> = edges.iter().map(|d| d.norm()).collect();
    let total: f64 = lengths.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegeneratePolygon(format!(
            "curve `{}` has zero length",
            polygon.id
        )));
    }
    let values = edges
        .iter()
        .zip(&lengths)
        .map(|(d, l)| d / *l)
        .collect::<Vec<_>>();
    let mut nodes = Vec::with_capacity(edges.len() + 1);
    nodes.push(0.0);
    let mut acc = 0.0;
    for l in &lengths {
        acc += l;
        nodes.push(acc / total);
    }
    *nodes.last_mut().unwrap() = 1.0;
    if nodes.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::DegeneratePolygon(format!(
            "curve `{}` has edges too short to resolve",
            polygon.id
        )));
    }
    SrvCurve::from_nodes(nodes, values)
}

/// Reconstructs `beta(t) = \int_0^t q |q| ds` at the given increasing grid,
/// anchored at `beta(0) = 0`.
pub fn srv_to_curve<'a>(q: impl Into<SrvView<'a>>, grid: &[f64]) -> Vec<Complex64> {
    match q.into() {
        SrvView::Piecewise(c) => piecewise_to_curve(c, grid),
        SrvView::Spline(f) => spline_to_curve(f, grid),
    }
}

fn piecewise_to_curve(c: &SrvCurve, grid: &[f64]) -> Vec<Complex64> {
    let mut vertices = Vec::with_capacity(c.nodes.len());
    vertices.push(Complex64::new(0.0, 0.0));
    let mut acc = Complex64::new(0.0, 0.0);
    for (q, l) in c.values.iter().zip(c.interval_lengths()) {
        acc += q * q.norm() * l;
        vertices.push(acc);
    }
    grid.iter()
        .map(|&t| {
            let t = t.clamp(0.0, 1.0);
            let j = c.nodes.partition_point(|s| *s <= t);
            if j == 0 {
                return vertices[0];
            }
            if j >= c.nodes.len() {
                return *vertices.last().unwrap();
            }
            let k = j - 1;
            let q = c.values[k];
            vertices[k] + q * q.norm() * (t - c.nodes[k])
        })
        .collect()
}

fn spline_to_curve(f: &CurveFunction, grid: &[f64]) -> Vec<Complex64> {
    let (nodes, weights) = gauss_legendre_16();
    let integrand = |t: f64| {
        let v = f.evaluate(t);
        v * v.norm()
    };
    let integrate = |a: f64, b: f64| -> Complex64 {
        if b <= a {
            return Complex64::new(0.0, 0.0);
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        nodes
            .iter()
            .zip(weights)
            .map(|(x, w)| integrand(mid + half * x) * (w * half))
            .sum()
    };
    let bp = f.basis.breakpoints();
    let mut cumulative = Vec::with_capacity(bp.len());
    cumulative.push(Complex64::new(0.0, 0.0));
    for w in bp.windows(2) {
        let last = *cumulative.last().unwrap();
        cumulative.push(last + integrate(w[0], w[1]));
    }
    grid.iter()
        .map(|&t| {
            let t = t.clamp(0.0, 1.0);
            let k = bp.partition_point(|b| *b <= t).saturating_sub(1);
            if k + 1 >= bp.len() {
                return *cumulative.last().unwrap();
            }
            cumulative[k] + integrate(bp[k], t)
        })
        .collect()
}

/// Nodes and weights of the 16-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre_16() -> &'static ([f64; 16], [f64; 16]) {
    static RULE: OnceLock<([f64; 16], [f64; 16])> = OnceLock::new();
    RULE.get_or_init(|| {
        const N: usize = 16;
        let mut nodes = [0.0; N];
        let mut weights = [0.0; N];
        for i in 0..N {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (N as f64 + 0.5)).cos();
            let mut derivative = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=N {
                    let k = k as f64;
                    let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                derivative = N as f64 * (x * p1 - p0) / (x * x - 1.0);
                let step = p1 / derivative;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * derivative * derivative);
        }
        (nodes, weights)
    })
}

/// Inelastic full Procrustes distance and the rotation `u` such that
/// `u * q2` is rotation-aligned to `q1`.
pub fn inelastic_distance<'a, 'b>(
    q1: impl Into<SrvView<'a>>,
    q2: impl Into<SrvView<'b>>,
) -> Result<(f64, Complex64)> {
    let (q1, q2) = (q1.into(), q2.into());
    for q in [q1, q2] {
        let norm = q.norm();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized { norm });
        }
    }
    let ip = inner_product(q1, q2);
    let magnitude = ip.norm();
    let distance = (1.0 - magnitude * magnitude).max(0.0).sqrt();
    let rotation = if magnitude == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        ip.conj() / magnitude
    };
    Ok((distance, rotation))
}
