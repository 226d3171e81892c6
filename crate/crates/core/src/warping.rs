//! Warping alignment of a piecewise-constant SRV curve to a target SRV.
//!
//! New nodes `0 = s_0 <= ... <= s_n = 1` maximize
//! `sum_j sqrt(l_j * int_{s_{j-1}}^{s_j} max(Re(conj(psi) q_j), 0)^2)` where
//! `l_j` are the old interval lengths. The target is piecewise linear, so
//! every gain has a closed form. A dynamic program over candidate nodes is
//! followed by a golden-section pass per node.

use num_complex::Complex64;

use crate::covsmooth::EigenSystem;
use crate::curves::{LinearPiece, SrvCurve, SrvView};
use crate::error::{Error, Result};
use crate::gaussproc::PosteriorScores;

pub const DEFAULT_GRID: usize = 201;
/// Intervals shorter than this are treated as collapsed.
pub const COLLAPSE_THRESHOLD: f64 = 1e-8;

const GOLDEN_ITERATIONS: usize = 60;
const REFINE_SAMPLES: usize = 32;
const REFINE_SWEEPS: usize = 8;

/// `int_0^len max(l(t), 0)^2` for `l` linear from `l0` to `l1`.
fn clipped_square(l0: f64, l1: f64, len: f64) -> f64 {
    if len <= 0.0 {
        return 0.0;
    }
    match (l0 >= 0.0, l1 >= 0.0) {
        (true, true) => len * (l0 * l0 + l0 * l1 + l1 * l1) / 3.0,
        (false, false) => 0.0,
        _ => {
            let (pos, neg) = if l0 > 0.0 { (l0, l1) } else { (l1, l0) };
            let frac = pos / (pos - neg);
            len * frac * pos * pos / 3.0
        }
    }
}

fn response(piece: &LinearPiece, q: Complex64, t: f64) -> f64 {
    let p = piece.at(t);
    p.re * q.re + p.im * q.im
}

fn gain_on_pieces(pieces: &[LinearPiece], q: Complex64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let first = pieces.partition_point(|p| p.end <= a);
    let mut total = 0.0;
    for piece in &pieces[first.min(pieces.len())..] {
        if piece.start >= b {
            break;
        }
        let lo = piece.start.max(a);
        let hi = piece.end.min(b);
        if hi > lo {
            total += clipped_square(response(piece, q, lo), response(piece, q, hi), hi - lo);
        }
    }
    total
}

/// `int_a^b max(Re(conj(psi(t)) q), 0)^2 dt` in closed form.
pub fn segment_gain<'a>(target: impl Into<SrvView<'a>>, q: Complex64, a: f64, b: f64) -> f64 {
    gain_on_pieces(&target.into().pieces(), q, a, b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentProblem {
    /// Rotated (and possibly blended) curve whose nodes are re-placed.
    pub curve: SrvCurve,
    target: Vec<LinearPiece>,
    pub grid: usize,
}

impl AlignmentProblem {
    pub fn new<'a>(curve: SrvCurve, target: impl Into<SrvView<'a>>) -> Self {
        Self {
            curve,
            target: target.into().pieces(),
            grid: DEFAULT_GRID,
        }
    }

    pub fn with_grid(mut self, grid: usize) -> Self {
        self.grid = grid.max(2);
        self
    }

    pub fn gain(&self, j: usize, a: f64, b: f64) -> f64 {
        gain_on_pieces(&self.target, self.curve.values[j], a, b)
    }

    /// Objective for a full node vector of length `n + 1`.
    pub fn objective(&self, nodes: &[f64]) -> f64 {
        self.curve
            .interval_lengths()
            .enumerate()
            .map(|(j, l)| (l * self.gain(j, nodes[j], nodes[j + 1])).sqrt())
            .sum()
    }

    /// Cumulative gains `int_0^{c_k}` for segment value `q` at sorted candidates.
    fn prefix_gains(&self, q: Complex64, candidates: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(candidates.len());
        let mut acc = 0.0;
        let mut cursor = 0.0_f64;
        let mut p = 0;
        for &c in candidates {
            while p < self.target.len() && self.target[p].end <= c {
                let piece = &self.target[p];
                let lo = cursor.max(piece.start);
                if piece.end > lo {
                    acc += clipped_square(response(piece, q, lo), response(piece, q, piece.end), piece.end - lo);
                }
                cursor = piece.end;
                p += 1;
            }
            if p < self.target.len() && c > cursor {
                let piece = &self.target[p];
                let lo = cursor.max(piece.start);
                acc += clipped_square(response(piece, q, lo), response(piece, q, c), c - lo);
                cursor = c;
            }
            out.push(acc);
        }
        out
    }

    /// Best node placement restricted to `candidates` (sorted, starting at
    /// 0 and ending at 1). Ties resolve to the first maximizer.
    fn dynamic_program(&self, candidates: &[f64]) -> (Vec<f64>, f64) {
        let n = self.curve.len();
        let k = candidates.len();
        let lengths: Vec<f64> = self.curve.interval_lengths().collect();
        let mut value = vec![f64::NEG_INFINITY; k];
        value[0] = 0.0;
        let mut back = vec![vec![0usize; k]; n];
        for j in 0..n {
            let prefix = self.prefix_gains(self.curve.values[j], candidates);
            let mut next = vec![f64::NEG_INFINITY; k];
            let last_only = j + 1 == n;
            for b in 0..k {
                if last_only && b != k - 1 {
                    continue;
                }
                let mut best = f64::NEG_INFINITY;
                let mut arg = 0;
                for a in 0..=b {
                    if value[a] == f64::NEG_INFINITY {
                        continue;
                    }
                    let gain = (prefix[b] - prefix[a]).max(0.0);
                    let v = value[a] + (lengths[j] * gain).sqrt();
                    if v > best {
                        best = v;
                        arg = a;
                    }
                }
                next[b] = best;
                back[j][b] = arg;
            }
            value = next;
        }
        let mut idx = vec![0usize; n + 1];
        idx[n] = k - 1;
        for j in (0..n).rev() {
            idx[j] = back[j][idx[j + 1]];
        }
        let nodes = idx.iter().map(|&i| candidates[i]).collect();
        (nodes, value[k - 1])
    }

    /// Dynamic program on the equidistant grid of `grid` points only.
    pub fn align_on_grid(&self, grid: usize) -> (Vec<f64>, f64) {
        let grid = grid.max(2);
        let candidates: Vec<f64> = (0..grid).map(|i| i as f64 / (grid - 1) as f64).collect();
        let (nodes, _) = self.dynamic_program(&candidates);
        let objective = self.objective(&nodes);
        (nodes, objective)
    }

    fn candidates(&self) -> Vec<f64> {
        let g = self.grid.max(2 * self.curve.len() + 1);
        let mut c: Vec<f64> = (0..g).map(|i| i as f64 / (g - 1) as f64).collect();
        c.extend_from_slice(&self.curve.nodes);
        c.sort_by(f64::total_cmp);
        c.dedup();
        c
    }

    fn refine(&self, nodes: &mut [f64], spacing: f64) {
        for _ in 0..REFINE_SWEEPS {
            if !self.refine_sweep(nodes, spacing) {
                break;
            }
        }
    }

    /// One coordinate pass; returns whether any node moved.
    fn refine_sweep(&self, nodes: &mut [f64], spacing: f64) -> bool {
        let n = self.curve.len();
        let lengths: Vec<f64> = self.curve.interval_lengths().collect();
        let mut moved = false;
        for j in 1..n {
            let lo = nodes[j - 1].max(nodes[j] - spacing);
            let hi = nodes[j + 1].min(nodes[j] + spacing);
            if hi <= lo {
                continue;
            }
            let local = |x: f64| {
                (lengths[j - 1] * self.gain(j - 1, nodes[j - 1], x)).sqrt()
                    + (lengths[j] * self.gain(j, x, nodes[j + 1])).sqrt()
            };
            let current = local(nodes[j]);
            let x = scan_then_golden(&local, lo, hi);
            if local(x) > current + 1e-14 * (1.0 + current) {
                nodes[j] = x;
                moved = true;
            }
        }
        moved
    }
}

/// Coarse scan of `[lo, hi]` followed by golden-section search in the
/// bracket around the best sample.
fn scan_then_golden(f: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let step = (hi - lo) / REFINE_SAMPLES as f64;
    let mut best = 0;
    let mut best_v = f(lo);
    for i in 1..=REFINE_SAMPLES {
        let v = f(lo + step * i as f64);
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    let a = lo + step * best.saturating_sub(1) as f64;
    let b = (lo + step * (best + 1) as f64).min(hi);
    let x = golden_max(f, a, b);
    if f(x) > best_v {
        x
    } else {
        lo + step * best as f64
    }
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..GOLDEN_ITERATIONS {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let candidates = [a, c, d, b];
    let mut best = candidates[0];
    let mut best_v = f(best);
    for &x in &candidates[1..] {
        let v = f(x);
        if v > best_v {
            best = x;
            best_v = v;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentResult {
    /// Optimal nodes for all original segments, weakly increasing.
    pub nodes: Vec<f64>,
    /// Indices of the original segments that survive collapse.
    pub kept: Vec<usize>,
    /// Re-parameterized curve with `w*`-reweighted values.
    pub curve: SrvCurve,
    pub objective: f64,
    pub identity_objective: f64,
    /// All gains vanished; identity nodes were returned.
    pub degenerate: bool,
}

fn snap_collapsed(nodes: &mut [f64]) {
    let n = nodes.len() - 1;
    for j in 1..n {
        if nodes[j] - nodes[j - 1] < COLLAPSE_THRESHOLD {
            nodes[j] = nodes[j - 1];
        }
    }
    for j in (1..n).rev() {
        if nodes[j + 1] - nodes[j] < COLLAPSE_THRESHOLD {
            nodes[j] = nodes[j + 1];
        }
    }
}

fn reweighted(problem: &AlignmentProblem, nodes: Vec<f64>, objective: f64, identity: f64, degenerate: bool) -> Result<AlignmentResult> {
    let curve = &problem.curve;
    let mut kept = Vec::new();
    let mut new_nodes = vec![0.0];
    let mut values = Vec::new();
    for (j, old) in curve.interval_lengths().enumerate() {
        let new = nodes[j + 1] - nodes[j];
        if new > 0.0 {
            kept.push(j);
            new_nodes.push(nodes[j + 1]);
            values.push(curve.values[j] * (old / new).sqrt());
        }
    }
    *new_nodes.last_mut().expect("at least one node") = 1.0;
    let mut aligned = SrvCurve::from_nodes(new_nodes, values)?;
    aligned.length_estimate = curve.length_estimate;
    Ok(AlignmentResult {
        nodes,
        kept,
        curve: aligned,
        objective,
        identity_objective: identity,
        degenerate,
    })
}

pub fn align(problem: &AlignmentProblem) -> Result<AlignmentResult> {
    let n = problem.curve.len();
    let identity_nodes = problem.curve.nodes.clone();
    let identity = problem.objective(&identity_nodes);
    let all_zero = (0..n).all(|j| problem.gain(j, 0.0, 1.0) == 0.0);
    if all_zero {
        log::warn!("warping target is orthogonal to every segment; keeping identity nodes");
        return reweighted(problem, identity_nodes, identity, identity, true);
    }
    if n == 1 {
        return reweighted(problem, identity_nodes, identity, identity, false);
    }
    let candidates = problem.candidates();
    let spacing = 1.0 / (problem.grid.max(2 * n + 1) - 1) as f64;
    let (mut nodes, _) = problem.dynamic_program(&candidates);
    problem.refine(&mut nodes, spacing);
    snap_collapsed(&mut nodes);
    let mut objective = problem.objective(&nodes);
    if !(objective >= identity) {
        nodes = identity_nodes;
        objective = identity;
    }
    reweighted(problem, nodes, objective, identity, false)
}

/// `u * (rho * q_tilde(t_j) + (1 - rho) * q_j)` with the smooth
/// reconstruction `q_tilde = (z / ||z||)^T e(t)`.
pub fn blend_reconstruction(
    curve: &SrvCurve,
    eigen: &EigenSystem,
    post: &PosteriorScores,
    rho: f64,
    rotation: Complex64,
) -> Result<Vec<Complex64>> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidConfig(format!("blend weight {rho} outside [0, 1]")));
    }
    if rho == 0.0 {
        return Ok(curve.values.iter().map(|q| rotation * q).collect());
    }
    let norm = post.mean.norm();
    if norm == 0.0 {
        return Err(Error::ZeroPosterior);
    }
    let k = eigen.len().min(post.mean.len());
    let functions: Vec<_> = (0..k).map(|i| eigen.eigenfunction(i)).collect();
    Ok(curve
        .times
        .iter()
        .zip(&curve.values)
        .map(|(&t, &q)| {
            let smooth: Complex64 = (0..k).map(|i| post.mean[i] * functions[i].evaluate(t)).sum::<Complex64>() / norm;
            rotation * (smooth * rho + q * (1.0 - rho))
        })
        .collect())
}
