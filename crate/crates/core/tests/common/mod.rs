#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use shapemean::basis::{SplineBasis, SplineOrder};
use shapemean::curves::{inner_product, CurveFunction, SrvCurve};

/// Proper complex process with two spline eigenfunctions.
pub struct SplineProcess {
    pub eigenfunctions: Vec<CurveFunction>,
    pub eigenvalues: Vec<f64>,
}

impl SplineProcess {
    pub fn new(dim: usize, eigenvalues: [f64; 2]) -> Self {
        let basis = SplineBasis::new(SplineOrder::Linear, dim).unwrap();
        let knots = basis.breakpoints();
        let raw = |f: &dyn Fn(f64) -> Complex64| {
            CurveFunction::new(basis, knots.iter().map(|&t| f(t)).collect()).unwrap()
        };
        let e1 = raw(&|t| Complex64::from_polar(1.0, 3.0 * t));
        let e1 = e1.scaled(Complex64::new(1.0 / e1.norm(), 0.0));
        let e2 = raw(&|t| Complex64::new(2.0 * t - 1.0, 0.5 * (t * 5.0).sin()));
        let proj = inner_product(&e1, &e2);
        let e2 = CurveFunction::new(
            basis,
            e2.coefs.iter().zip(&e1.coefs).map(|(b, a)| b - a * proj).collect(),
        )
        .unwrap();
        let e2 = e2.scaled(Complex64::new(1.0 / e2.norm(), 0.0));
        Self {
            eigenfunctions: vec![e1, e2],
            eigenvalues: eigenvalues.to_vec(),
        }
    }

    pub fn basis(&self) -> &SplineBasis {
        &self.eigenfunctions[0].basis
    }

    pub fn draw(&self, rng: &mut impl Rng) -> CurveFunction {
        let standard = Normal::new(0.0, 1.0).unwrap();
        let mut coefs = vec![Complex64::new(0.0, 0.0); self.basis().dim()];
        for (e, &lambda) in self.eigenfunctions.iter().zip(&self.eigenvalues) {
            let sd = (lambda / 2.0).sqrt();
            let z = Complex64::new(standard.sample(rng) * sd, standard.sample(rng) * sd);
            for (c, v) in coefs.iter_mut().zip(&e.coefs) {
                *c += z * v;
            }
        }
        CurveFunction::new(*self.basis(), coefs).unwrap()
    }

    pub fn covariance(&self, s: f64, t: f64) -> Complex64 {
        self.eigenfunctions
            .iter()
            .zip(&self.eigenvalues)
            .map(|(e, l)| e.evaluate(s).conj() * e.evaluate(t) * *l)
            .sum()
    }
}

/// Observes `y` at midpoints of `segments` random intervals, with complex
/// white noise of total variance `noise_var`.
pub fn observe(y: &CurveFunction, segments: usize, noise_var: f64, rng: &mut impl Rng) -> SrvCurve {
    let mut cuts: Vec<f64> = (0..segments - 1).map(|_| rng.random::<f64>()).collect();
    cuts.sort_by(f64::total_cmp);
    let nodes: Vec<f64> = std::iter::once(0.0).chain(cuts).chain(std::iter::once(1.0)).collect();
    let sd = (noise_var / 2.0).sqrt();
    let standard = Normal::new(0.0, 1.0).unwrap();
    let values = nodes
        .windows(2)
        .map(|w| {
            let t = 0.5 * (w[0] + w[1]);
            y.evaluate(t) + Complex64::new(standard.sample(rng), standard.sample(rng)) * sd
        })
        .collect();
    SrvCurve::from_nodes(nodes, values).unwrap()
}
