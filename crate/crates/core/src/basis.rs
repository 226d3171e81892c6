//! Equidistant B-spline bases of order 0 and 1 on [0, 1], their Gram and
//! difference-penalty matrices, and the symmetric / antisymmetric
//! tensor-product constraint transforms used for Hermitian smoothing.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplineOrder {
    /// Piecewise constant indicators.
    Constant,
    /// Piecewise linear hat functions.
    Linear,
}

impl SplineOrder {
    pub fn from_degree(order: usize) -> Result<Self> {
        match order {
            0 => Ok(SplineOrder::Constant),
            1 => Ok(SplineOrder::Linear),
            other => Err(Error::InvalidBasis(format!(
                "unsupported spline order {other} (only 0 and 1)"
            ))),
        }
    }

    pub fn degree(self) -> usize {
        match self {
            SplineOrder::Constant => 0,
            SplineOrder::Linear => 1,
        }
    }
}

/// Real B-spline basis on equidistant knots.
///
/// An order-0 basis of dimension `m` has `m + 1` knots (its interval
/// boundaries); an order-1 basis of dimension `m` has `m` knots, one per hat
/// function peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplineBasis {
    order: SplineOrder,
    dim: usize,
}

/// Non-zero basis values at one point: at most two adjacent functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalValues {
    pub first: usize,
    pub weights: [f64; 2],
    pub len: usize,
}

impl LocalValues {
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.len).map(move |k| (self.first + k, self.weights[k]))
    }
}

impl SplineBasis {
    pub fn new(order: SplineOrder, dim: usize) -> Result<Self> {
        let min_dim = match order {
            SplineOrder::Constant => 1,
            SplineOrder::Linear => 2,
        };
        if dim < min_dim {
            return Err(Error::InvalidBasis(format!(
                "order-{} basis needs dimension >= {min_dim}, got {dim}",
                order.degree()
            )));
        }
        Ok(Self { order, dim })
    }

    /// Basis from a count of equidistant knots on [0, 1] (boundaries included).
    pub fn from_knots(order: SplineOrder, knots: usize) -> Result<Self> {
        if knots < 2 {
            return Err(Error::InvalidBasis(format!(
                "need at least 2 knots, got {knots}"
            )));
        }
        match order {
            SplineOrder::Constant => Self::new(order, knots - 1),
            SplineOrder::Linear => Self::new(order, knots),
        }
    }

    pub fn order(&self) -> SplineOrder {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn knot_count(&self) -> usize {
        match self.order {
            SplineOrder::Constant => self.dim + 1,
            SplineOrder::Linear => self.dim,
        }
    }

    /// Knot positions, which are the breakpoints of every represented function.
    pub fn breakpoints(&self) -> Vec<f64> {
        let intervals = self.knot_count() - 1;
        (0..=intervals)
            .map(|k| k as f64 / intervals as f64)
            .collect()
    }

    fn spacing(&self) -> f64 {
        1.0 / (self.knot_count() - 1) as f64
    }

    /// Right-continuous evaluation, closed on the left at `t = 1`.
    pub fn local(&self, t: f64) -> Result<LocalValues> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::OutOfDomain(t));
        }
        Ok(self.local_unchecked(t))
    }

    pub(crate) fn local_unchecked(&self, t: f64) -> LocalValues {
        let t = t.clamp(0.0, 1.0);
        match self.order {
            SplineOrder::Constant => {
                let k = ((t * self.dim as f64).floor() as usize).min(self.dim - 1);
                LocalValues {
                    first: k,
                    weights: [1.0, 0.0],
                    len: 1,
                }
            }
            SplineOrder::Linear => {
                let h = self.spacing();
                let k = ((t / h).floor() as usize).min(self.dim - 2);
                let w = (t / h - k as f64).clamp(0.0, 1.0);
                LocalValues {
                    first: k,
                    weights: [1.0 - w, w],
                    len: 2,
                }
            }
        }
    }

    pub fn evaluate(&self, t: f64) -> Result<Vec<f64>> {
        let local = self.local(t)?;
        let mut out = vec![0.0; self.dim];
        for (k, w) in local.iter() {
            out[k] += w;
        }
        Ok(out)
    }

    /// Exact Gram matrix of inner products between basis functions.
    pub fn gram(&self) -> DMatrix<f64> {
        let m = self.dim;
        match self.order {
            SplineOrder::Constant => DMatrix::from_diagonal_element(m, m, 1.0 / m as f64),
            SplineOrder::Linear => {
                let h = self.spacing();
                let mut g = DMatrix::zeros(m, m);
                for k in 0..m {
                    let interior = k > 0 && k + 1 < m;
                    g[(k, k)] = if interior { 2.0 * h / 3.0 } else { h / 3.0 };
                    if k + 1 < m {
                        g[(k, k + 1)] = h / 6.0;
                        g[(k + 1, k)] = h / 6.0;
                    }
                }
                g
            }
        }
    }

    /// Exact integrals of each basis function over [0, 1].
    pub fn integrals(&self) -> Vec<f64> {
        let m = self.dim;
        match self.order {
            SplineOrder::Constant => vec![1.0 / m as f64; m],
            SplineOrder::Linear => {
                let h = self.spacing();
                (0..m)
                    .map(|k| if k == 0 || k + 1 == m { h / 2.0 } else { h })
                    .collect()
            }
        }
    }

    pub fn difference_penalty(&self, order: usize) -> Result<PenaltyMatrix> {
        PenaltyMatrix::difference(self.dim, order)
    }
}

/// `P = D^T D` for the `d`-th order difference matrix `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyMatrix {
    pub matrix: DMatrix<f64>,
    pub difference_order: usize,
}

impl PenaltyMatrix {
    pub fn difference(dim: usize, order: usize) -> Result<Self> {
        if order >= dim {
            return Err(Error::InvalidOrder { order, dim });
        }
        let mut d = DMatrix::<f64>::identity(dim, dim);
        for _ in 0..order {
            let rows = d.nrows() - 1;
            d = DMatrix::from_fn(rows, dim, |i, j| d[(i + 1, j)] - d[(i, j)]);
        }
        Ok(Self {
            matrix: d.transpose() * d,
            difference_order: order,
        })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            matrix: DMatrix::zeros(dim, dim),
            difference_order: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// `P (x) I + I (x) P`.
pub fn tensor_penalty(penalty: &PenaltyMatrix) -> DMatrix<f64> {
    let p = &penalty.matrix;
    let m = p.nrows();
    let eye = DMatrix::<f64>::identity(m, m);
    p.kronecker(&eye) + eye.kronecker(p)
}

/// Linear maps from the free parameters of symmetric and antisymmetric
/// `m x m` matrices into row-major `vec` coordinates of length `m^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintTransforms {
    /// `(m^2 + m) / 2` rows: one per unordered pair `g <= k`.
    pub symmetric: DMatrix<f64>,
    /// `(m^2 - m) / 2` rows: one per pair `g < k`, orthonormal.
    pub antisymmetric: DMatrix<f64>,
}

/// Position of the unordered pair `(g, k)`, `g <= k`, among symmetric parameters.
pub fn symmetric_index(m: usize, g: usize, k: usize) -> usize {
    let (g, k) = if g <= k { (g, k) } else { (k, g) };
    g * m - g * (g + 1) / 2 + k
}

/// Position of the pair `(g, k)`, `g < k`, among antisymmetric parameters.
pub fn antisymmetric_index(m: usize, g: usize, k: usize) -> usize {
    debug_assert!(g < k);
    g * m - g * (g + 1) / 2 + (k - g - 1)
}

pub fn constraint_transforms(m: usize) -> ConstraintTransforms {
    let n_sym = m * (m + 1) / 2;
    let n_anti = m * m.saturating_sub(1) / 2;
    let mut symmetric = DMatrix::zeros(n_sym, m * m);
    let mut antisymmetric = DMatrix::zeros(n_anti, m * m);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    for g in 0..m {
        for k in g..m {
            let row = symmetric_index(m, g, k);
            symmetric[(row, g * m + k)] = 1.0;
            symmetric[(row, k * m + g)] = 1.0;
            if g < k {
                let row = antisymmetric_index(m, g, k);
                antisymmetric[(row, g * m + k)] = scale;
                antisymmetric[(row, k * m + g)] = -scale;
            }
        }
    }
    ConstraintTransforms {
        symmetric,
        antisymmetric,
    }
}
