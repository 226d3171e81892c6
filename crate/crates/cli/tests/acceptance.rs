//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Run with `cargo test -p shapemean-cli --test acceptance`.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shapemean::basis::SplineBasis;
use shapemean::covsmooth::{assemble_crossproducts, fit_sparse, Smoothing};
use shapemean::curves::{inelastic_distance, polygon_to_srv, CurveFunction, PlanePolygon, SrvCurve};
use shapemean::gaussproc::{
    condition, condition_real_oracle, expected_inner_product, expected_score_magnitude_sq, expected_squared_norm,
    ConditioningProblem,
};
use shapemean::linalg::{CMatrix, CVector};
use shapemean::mean::{
    elastic_distance, estimate_elastic_mean, variance_decomposition, Backend, Labels, MeanFitConfig,
};
use shapemean::simulate::{moment_check, simulate_spirals, true_spiral_srv, ComplexProcess, SpiralConfig};
use shapemean::warping::{AlignmentProblem, DEFAULT_GRID};

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_similarity(rng: &mut ChaCha8Rng, p: &PlanePolygon) -> PlanePolygon {
    p.transformed(
        Complex64::from_polar(1.0, rng.random_range(-3.1..3.1)),
        rng.random_range(0.2..5.0),
        c(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)),
    )
}

fn srvs(polys: &[PlanePolygon]) -> Vec<SrvCurve> {
    polys.iter().map(|p| polygon_to_srv(p).unwrap()).collect()
}

// 1
fn conditioning_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let close = |a: Complex64, b: Complex64| (a - b).norm() / (1.0 + b.norm());
    for _ in 0..200 {
        let m = rng.random_range(1..=4);
        let n = rng.random_range(0..=6);
        let zero_rows = rng.random_range(0..=n.min(m));
        let design = CMatrix::from_fn(n, m, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let obs = CVector::from_fn(n, |_, _| c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)));
        let eig = (0..m).map(|_| rng.random_range(0.1..3.0)).collect();
        let mut noise: Vec<f64> = (0..n).map(|i| if i < zero_rows { 0.0 } else { rng.random_range(0.05..1.0) }).collect();
        noise.reverse();
        let problem = ConditioningProblem::new(design, obs, eig, noise).unwrap();
        let post = condition(&problem).map_err(|e| e.to_string())?;
        let (z, s) = condition_real_oracle(&problem).ok_or("oracle failed")?;
        let g: Vec<Complex64> = (0..m).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let gv = CVector::from_column_slice(&g);
        for k in 0..m {
            worst = worst.max(close(post.mean[k], z[k]));
            for l in 0..m {
                worst = worst.max(close(post.covariance[(k, l)], s[(k, l)]));
            }
        }
        let oracle_ip: Complex64 = z.iter().zip(&g).map(|(z, g)| z.conj() * g).sum();
        worst = worst.max(close(expected_inner_product(&post, &g), oracle_ip));
        let oracle_norm = s.diagonal().iter().map(|v| v.re).sum::<f64>() + z.norm_squared();
        worst = worst.max((expected_squared_norm(&post) - oracle_norm).abs() / (1.0 + oracle_norm));
        let oracle_sq = (gv.adjoint() * &s * &gv)[(0, 0)].re + oracle_ip.norm_sqr();
        worst = worst.max((expected_score_magnitude_sq(&post, &g) - oracle_sq).abs() / (1.0 + oracle_sq));
    }
    check(worst <= 1e-8, format!("200 problems, max relative deviation {worst:.2e} (tol 1e-8)"))
}

// 2
fn warping_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let grid = 51;
    let pts: Vec<f64> = (0..grid).map(|i| i as f64 / (grid - 1) as f64).collect();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..=3);
        let knots = rng.random_range(2..=6);
        let basis = SplineBasis::new(shapemean::basis::SplineOrder::Linear, knots).unwrap();
        let coefs = (0..knots).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let target = CurveFunction::new(basis, coefs).unwrap();
        let target = target.scaled(c(1.0 / target.norm(), 0.0));
        let mut cuts: Vec<f64> = (0..n - 1).map(|_| rng.random_range(0.05..0.95)).collect();
        cuts.sort_by(f64::total_cmp);
        let nodes: Vec<f64> = std::iter::once(0.0).chain(cuts).chain(std::iter::once(1.0)).collect();
        let values = (0..n).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let problem = AlignmentProblem::new(SrvCurve::from_nodes(nodes, values).unwrap(), &target);
        let (_, dp) = problem.align_on_grid(grid);
        let mut best = f64::NEG_INFINITY;
        match n {
            1 => best = problem.objective(&[0.0, 1.0]),
            2 => {
                for &a in &pts {
                    best = best.max(problem.objective(&[0.0, a, 1.0]));
                }
            }
            _ => {
                for (i, &a) in pts.iter().enumerate() {
                    for &b in &pts[i..] {
                        best = best.max(problem.objective(&[0.0, a, b, 1.0]));
                    }
                }
            }
        }
        worst = worst.max((dp - best).abs());
    }
    check(worst <= 1e-12, format!("100 instances, max |DP - exhaustive| {worst:.2e}"))
}

// 3
fn moment_suite() -> Outcome {
    let grid: Vec<f64> = (0..8).map(|k| k as f64 / 7.0).collect();
    let process = |proper| ComplexProcess {
        eigenfunctions: vec![
            grid.iter().map(|&t| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * t)).collect(),
            grid.iter().map(|&t| c(0.0, 2f64.sqrt() * (std::f64::consts::PI * t).cos())).collect(),
        ],
        eigenvalues: vec![1.5, 0.6],
        proper,
    };
    let proper = moment_check(&process(true), 2000, &mut ChaCha8Rng::seed_from_u64(31));
    let improper = moment_check(&process(false), 2000, &mut ChaCha8Rng::seed_from_u64(32));
    check(
        proper.block < 5.0 && proper.pseudo_zero < 5.0 && improper.block < 5.0 && improper.pseudo_zero > 5.0,
        format!(
            "proper: block z {:.2}, pseudo z {:.2}; real-score process: block z {:.2}, pseudo z {:.1} (must exceed 5)",
            proper.block, proper.pseudo_zero, improper.block, improper.pseudo_zero
        ),
    )
}

// 4
fn invariance_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let polys = simulate_spirals(&SpiralConfig::default()).unwrap();
    // ingestion: translation and scale
    let mut ingest_dev: f64 = 0.0;
    for p in &polys {
        let moved = p.transformed(c(1.0, 0.0), rng.random_range(0.1..10.0), c(rng.random_range(-50.0..50.0), 3.0));
        let (a, b) = (polygon_to_srv(p).unwrap(), polygon_to_srv(&moved).unwrap());
        for (x, y) in a.values.iter().zip(&b.values) {
            ingest_dev = ingest_dev.max((x - y).norm());
        }
        for (x, y) in a.nodes.iter().zip(&b.nodes) {
            ingest_dev = ingest_dev.max((x - y).abs());
        }
    }
    // sparse covariance fit: global rotation
    let curves = srvs(&polys);
    let config = MeanFitConfig::default();
    let basis = config.basis().unwrap();
    let penalty = basis.difference_penalty(config.penalty_order).unwrap();
    let fit = |cs: &[SrvCurve]| fit_sparse(&assemble_crossproducts(cs), &basis, &penalty, true, Smoothing::Gcv).unwrap();
    let base = fit(&curves);
    let quarter: Vec<SrvCurve> = curves.iter().map(|q| q.scaled(c(0.0, 1.0))).collect();
    let bit_exact = fit(&quarter).xi == base.xi;
    let angle = Complex64::from_polar(1.0, 0.7317);
    let turned: Vec<SrvCurve> = curves.iter().map(|q| q.scaled(angle)).collect();
    let generic = (fit(&turned).xi - &base.xi).norm() / base.xi.norm();
    // elastic mean: per-curve similarity transforms
    let spiral_config = MeanFitConfig { max_iterations: 50, ..MeanFitConfig::default() };
    let moved: Vec<PlanePolygon> = polys.iter().map(|p| random_similarity(&mut rng, p)).collect();
    let a = estimate_elastic_mean(&curves, &spiral_config).map_err(|e| e.to_string())?;
    let b = estimate_elastic_mean(&srvs(&moved), &spiral_config).map_err(|e| e.to_string())?;
    let (d, _) = inelastic_distance(&a.mean, &b.mean).unwrap();
    check(
        ingest_dev <= 1e-12 && bit_exact && generic <= 1e-12 && d < 1e-6,
        format!(
            "ingestion dev {ingest_dev:.1e}; quarter-turn fit bit-exact {bit_exact}; generic angle rel dev {generic:.1e}; mean distance {d:.1e}"
        ),
    )
}

fn spiral_distance(sc: SpiralConfig, config: &MeanFitConfig) -> Result<(f64, bool, usize), String> {
    let truth = true_spiral_srv(400).unwrap();
    let curves = srvs(&simulate_spirals(&sc).unwrap());
    let result = estimate_elastic_mean(&curves, config).map_err(|e| e.to_string())?;
    let d = elastic_distance(&result.mean, &truth, DEFAULT_GRID).map_err(|e| e.to_string())?;
    Ok((d, result.converged, result.iterations))
}

/// Config shipped with the spiral scenarios.
fn spiral_config() -> MeanFitConfig {
    MeanFitConfig { max_iterations: 50, ..MeanFitConfig::default() }
}

// 5
fn spiral_recovery() -> Outcome {
    let dense = SpiralConfig { min_points: 200, max_points: 200, noise_sd: 0.0, ..SpiralConfig::default() };
    let (delta0, c0, _) = spiral_distance(dense, &MeanFitConfig { backend: Backend::Dense, ..spiral_config() })?;
    let (d, converged, iterations) = spiral_distance(SpiralConfig::default(), &spiral_config())?;
    check(
        d <= 1.5 * delta0 && converged && c0,
        format!("d = {d:.4}, oracle delta0 = {delta0:.4} (ratio {:.3}, limit 1.5); converged in {iterations}", d / delta0),
    )
}

// 6
fn very_sparse() -> Outcome {
    let sc = SpiralConfig { curves: 20, min_points: 4, max_points: 7, ..SpiralConfig::default() };
    let config = MeanFitConfig { smoothing: Smoothing::Fixed(1.0), ..spiral_config() };
    let (d, converged, iterations) = spiral_distance(sc, &config)?;
    check(
        converged && d.is_finite() && d < 0.5,
        format!("converged {converged} in {iterations}, d = {d:.4} (limit 0.5), smoothing fixed eta = 1"),
    )
}

fn equal_edge_polygon(directions: &[f64]) -> PlanePolygon {
    let mut pts = vec![c(0.0, 0.0)];
    for &a in directions {
        let last = *pts.last().unwrap();
        pts.push(last + Complex64::from_polar(1.0, a));
    }
    PlanePolygon::new("shape", pts).unwrap()
}

/// Order-0 basis whose knots are the vertices of an equal-edge polygon.
fn exact_config(edges: usize) -> MeanFitConfig {
    MeanFitConfig {
        basis_order: 0,
        knots: edges + 1,
        penalty_order: 1,
        nugget: false,
        smoothing: Smoothing::Fixed(0.0),
        ..MeanFitConfig::default()
    }
}

// 7
fn degenerate_distribution() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let dirs: Vec<f64> = (0..12).map(|k| 0.5 * k as f64 + rng.random_range(-0.3..0.3)).collect();
    let base = equal_edge_polygon(&dirs);
    let truth = polygon_to_srv(&base).unwrap();
    let copies: Vec<PlanePolygon> = (0..10).map(|_| random_similarity(&mut rng, &base)).collect();
    let result = estimate_elastic_mean(&srvs(&copies), &exact_config(dirs.len())).map_err(|e| e.to_string())?;
    let (d, _) = inelastic_distance(&result.mean, &truth).unwrap();
    check(
        result.variance < 1e-4 && d < 1e-6,
        format!("variance {:.1e} (limit 1e-4), distance {d:.1e} (limit 1e-6)", result.variance),
    )
}

// 8
fn variance_sanity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let key = |v: &str| Labels::from([("group".to_string(), v.to_string())]);
    let spirals = srvs(&simulate_spirals(&SpiralConfig { curves: 6, ..SpiralConfig::default() }).unwrap());
    let single = variance_decomposition(
        &spirals,
        &vec![key("all"); spirals.len()],
        &["group".to_string()],
        &[],
        &spiral_config(),
    )
    .map_err(|e| e.to_string())?;
    let a = equal_edge_polygon(&[0.0, 0.4, 1.2, 2.0, 2.2]);
    let b = equal_edge_polygon(&[0.0, -0.7, -0.2, 0.9, 1.9]);
    let mut curves = Vec::new();
    let mut labels = Vec::new();
    for i in 0..10 {
        let (p, g) = if i % 2 == 0 { (&a, "a") } else { (&b, "b") };
        curves.push(polygon_to_srv(&random_similarity(&mut rng, p)).unwrap());
        labels.push(key(g));
    }
    let split = variance_decomposition(&curves, &labels, &["group".to_string()], &[], &exact_config(5))
        .map_err(|e| e.to_string())?;
    check(
        single.r_squared == 0.0 && split.r_squared >= 0.999,
        format!("single group R2 = {}; separating groups R2 = {:.6} (limit 0.999)", single.r_squared, split.r_squared),
    )
}

// 9
fn cli_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_shapemean");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |args: &[&str]| -> Result<(), String> {
        let out = Command::new(bin).args(args).output().map_err(|e| e.to_string())?;
        if out.status.success() {
            Ok(())
        } else {
            Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)))
        }
    };
    let p = |s: &str| dir.path().join(s).display().to_string();
    std::fs::write(dir.path().join("config.json"), r#"{"max_iterations": 50}"#).unwrap();
    let mut reports = Vec::new();
    for k in 0..2 {
        let data = p(&format!("data{k}"));
        run(&["simulate", "--kind", "spiral", "--n", "9", "--seed", "7", "--out", &data])?;
        let out = p(&format!("run{k}"));
        run(&["mean", "--input", &format!("{data}/spirals.csv"), "--config", &p("config.json"), "--out", &out])?;
        reports.push(std::fs::read(Path::new(&out).join("report.json")).map_err(|e| e.to_string())?);
    }
    let identical = reports[0] == reports[1];
    let schema: serde_json::Value =
        serde_json::from_str(include_str!("../../../docs/schema.json")).map_err(|e| e.to_string())?;
    let validator = jsonschema::validator_for(&schema).map_err(|e| e.to_string())?;
    let report: serde_json::Value = serde_json::from_slice(&reports[0]).map_err(|e| e.to_string())?;
    let errors: Vec<String> = validator.iter_errors(&report).map(|e| e.to_string()).collect();
    check(
        identical && errors.is_empty(),
        format!("byte-identical {identical}; schema errors {}", if errors.is_empty() { "none".into() } else { errors.join("; ") }),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("conditional Gaussian oracle", Duration::from_secs(10), conditioning_oracle),
        ("warping DP oracle", Duration::from_secs(30), warping_oracle),
        ("Monte-Carlo moment suite", Duration::from_secs(60), moment_suite),
        ("invariance suite", Duration::from_secs(120), invariance_suite),
        ("spiral recovery", Duration::from_secs(120), spiral_recovery),
        ("very sparse robustness", Duration::from_secs(120), very_sparse),
        ("degenerate distribution", Duration::from_secs(30), degenerate_distribution),
        ("variance decomposition", Duration::from_secs(60), variance_sanity),
        ("CLI determinism", Duration::from_secs(180), cli_determinism),
    ];
    let mut failed = 0;
    let mut summary = BTreeMap::new();
    for (i, (name, limit, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if elapsed <= *limit => (true, d),
            Ok(d) => (false, format!("{d}; too slow")),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {} {:<28} {}  [{:.1}s / {}s]  {}",
            i + 1,
            name,
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs(),
            detail
        );
        summary.insert(i + 1, ok);
    }
    println!("acceptance: {} of {} criteria passed", summary.values().filter(|v| **v).count(), summary.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
