//! Small dense linear-algebra helpers shared by the smoothing and
//! conditioning code.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const MAX_JITTER_STEPS: usize = 8;

/// Cholesky factorization with diagonal jitter escalation.
///
/// Starts without jitter; on failure adds `1e-10 * trace / n` to the diagonal
/// and escalates by a factor of 100 per step.
pub fn cholesky_with_jitter(a: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    if let Some(chol) = Cholesky::new(a.clone()) {
        return Ok(chol);
    }
    let n = a.nrows().max(1);
    let scale = (a.trace().abs() / n as f64).max(f64::MIN_POSITIVE);
    let mut jitter = 1e-10 * scale;
    for _ in 0..MAX_JITTER_STEPS {
        let mut b = a.clone();
        for i in 0..a.nrows() {
            b[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(b) {
            log::debug!("cholesky succeeded with jitter {jitter:.3e}");
            return Ok(chol);
        }
        jitter *= 100.0;
    }
    Err(Error::SingularDesign {
        condition: condition_estimate(a),
    })
}

/// Ratio of extreme absolute eigenvalues of a symmetric matrix.
pub fn condition_estimate(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 1.0;
    }
    let eig = a.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let min = eig
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Inverse of a Hermitian positive definite complex matrix via its real
/// 2n x 2n embedding `[[A, -B], [B, A]]` for `A + iB`.
pub fn hermitian_pd_inverse(h: &CMatrix) -> Result<CMatrix> {
    let n = h.nrows();
    if n == 0 {
        return Ok(CMatrix::zeros(0, 0));
    }
    let embedded = real_embedding(h);
    let chol = Cholesky::new(embedded).ok_or(Error::RankDeficiency)?;
    let inv = chol.inverse();
    Ok(CMatrix::from_fn(n, n, |i, j| {
        Complex64::new(inv[(i, j)], inv[(i + n, j)])
    }))
}

/// Solves `H x = b` for Hermitian positive definite `H`.
pub fn hermitian_pd_solve(h: &CMatrix, b: &CVector) -> Result<CVector> {
    let n = h.nrows();
    if n == 0 {
        return Ok(CVector::zeros(0));
    }
    let embedded = real_embedding(h);
    let chol = Cholesky::new(embedded).ok_or(Error::RankDeficiency)?;
    let rhs = DVector::from_fn(2 * n, |i, _| if i < n { b[i].re } else { b[i - n].im });
    let x = chol.solve(&rhs);
    Ok(CVector::from_fn(n, |i, _| Complex64::new(x[i], x[i + n])))
}

fn real_embedding(h: &CMatrix) -> DMatrix<f64> {
    let n = h.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = h[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Largest entry of `|H - H^dagger|`.
pub fn hermitian_asymmetry(h: &CMatrix) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..h.nrows() {
        for j in 0..h.ncols() {
            worst = worst.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn to_complex(a: &DMatrix<f64>) -> CMatrix {
    a.map(|v| Complex64::new(v, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermitian_inverse_matches_identity() {
        let h = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(2.0, 0.0),
                Complex64::new(0.5, 0.5),
                Complex64::new(0.5, -0.5),
                Complex64::new(3.0, 0.0),
            ],
        );
        let inv = hermitian_pd_inverse(&h).unwrap();
        let prod = &h * &inv;
        for i in 0..2 {
            for j in 0..2 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - Complex64::new(expected, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn jitter_rescues_semidefinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(cholesky_with_jitter(&a).is_ok());
    }

    #[test]
    fn singular_reports_condition() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        match cholesky_with_jitter(&a) {
            Err(Error::SingularDesign { condition }) => assert!(condition >= 1.0),
            other => panic!("unexpected {other:?}"),
        }
    }
}
