//! Batch front-end: `shapemean {mean|inelastic|distance|variance|simulate}`.

pub mod dataset;
pub mod error;
pub mod report;
pub mod svg;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use shapemean::curves::{inelastic_distance, polygon_to_srv, srv_to_curve, SrvCurve};
use shapemean::mean::{
    elastic_distance, estimate_elastic_mean, estimate_inelastic_mean, variance_decomposition, ElasticMeanResult,
    MeanFitConfig,
};
use shapemean::simulate::{simulate_spirals, SpiralConfig};
use shapemean::warping::DEFAULT_GRID;

pub use crate::dataset::{ingest, Dataset};
pub use crate::error::{CliError, CliResult};
use crate::report::{write_json, Body, DistanceReport, MeanReport, Report, SimulationReport, Timings, SCHEMA_VERSION};

#[derive(Debug, Parser)]
#[command(name = "shapemean", version, about = "Elastic full Procrustes mean shapes of plane curves")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads for per-curve steps (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Elastic full Procrustes mean.
    Mean(EstimateArgs),
    /// Inelastic full Procrustes mean (no warping).
    Inelastic(EstimateArgs),
    /// Elastic and inelastic distance between two curves of a dataset.
    Distance(DistanceArgs),
    /// Group-wise variances and the R^2 of a feature decomposition.
    Variance(VarianceArgs),
    /// Write a simulated dataset.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// JSON file with MeanFitConfig keys; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Accepted for interface uniformity; estimation is deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DistanceArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Two curve ids, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub pair: Vec<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct VarianceArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Feature keys defining the groups, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub group_by: Vec<String>,
    /// `<primary keys>:<complement keys>`, each comma separated.
    #[arg(long)]
    pub decompose: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value = "spiral")]
    pub kind: String,
    #[arg(long, default_value_t = 9)]
    pub n: usize,
    #[arg(long, default_value_t = 17)]
    pub min_points: usize,
    #[arg(long, default_value_t = 22)]
    pub max_points: usize,
    /// Noise standard deviation relative to the polygon length.
    #[arg(long, default_value_t = 0.005)]
    pub noise_sd: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        // Fails only if a pool already exists, as in repeated in-process runs.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Mean(args) => run_estimate(args, true),
        Command::Inelastic(args) => run_estimate(args, false),
        Command::Distance(args) => run_distance(args),
        Command::Variance(args) => run_variance(args),
        Command::Simulate(args) => run_simulate(args),
    }
}

pub fn load_config(path: Option<&Path>) -> CliResult<MeanFitConfig> {
    let Some(path) = path else {
        return Ok(MeanFitConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let config: MeanFitConfig =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
    config.validate()?;
    Ok(config)
}

fn prepare_out(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn to_srv(dataset: &Dataset) -> CliResult<Vec<SrvCurve>> {
    Ok(dataset.curves.iter().map(polygon_to_srv).collect::<Result<_, _>>()?)
}

fn ids(dataset: &Dataset) -> Vec<String> {
    dataset.curves.iter().map(|c| c.id.clone()).collect()
}

fn run_estimate(args: &EstimateArgs, elastic: bool) -> CliResult<()> {
    let start = Instant::now();
    let config = load_config(args.config.as_deref())?;
    let dataset = ingest(&args.input)?;
    let curves = to_srv(&dataset)?;
    let ingest_seconds = start.elapsed().as_secs_f64();
    prepare_out(&args.out)?;

    let estimated = Instant::now();
    let result = if elastic {
        estimate_elastic_mean(&curves, &config)?
    } else {
        estimate_inelastic_mean(&curves, &config)?
    };
    let estimate_seconds = estimated.elapsed().as_secs_f64();

    let svg = svg::render(&result.mean_polyline, &aligned_polylines(&result, &ids(&dataset)));
    let svg_path = args.out.join("mean.svg");
    std::fs::write(&svg_path, svg).map_err(|e| CliError::io(&svg_path, e))?;

    let mean = MeanReport::new(result, &ids(&dataset));
    let mut warnings = dataset.warnings.clone();
    warnings.extend(mean.warnings());
    for w in &warnings {
        log::warn!("{w}");
    }
    let report = Report {
        schema_version: SCHEMA_VERSION,
        command: if elastic { "mean" } else { "inelastic" },
        config: Some(config),
        body: Body::Mean { result: mean },
        warnings,
    };
    write_json(&report, &args.out.join("report.json"))?;
    let timings = Timings {
        ingest_seconds,
        estimate_seconds,
        total_seconds: start.elapsed().as_secs_f64(),
    };
    write_json(&timings, &args.out.join("timings.json"))
}

fn aligned_polylines(result: &ElasticMeanResult, ids: &[String]) -> Vec<(String, Vec<num_complex::Complex64>)> {
    result
        .curves
        .iter()
        .zip(ids)
        .map(|(c, id)| (id.clone(), srv_to_curve(&c.curve, &c.curve.nodes)))
        .collect()
}

fn run_distance(args: &DistanceArgs) -> CliResult<()> {
    let start = Instant::now();
    let [a, b] = args.pair.as_slice() else {
        return Err(CliError::Usage("--pair takes exactly two curve ids, e.g. --pair a,b".into()));
    };
    // Validated for uniformity with the other commands; distances do not use it.
    let config = load_config(args.config.as_deref())?;
    let dataset = ingest(&args.input)?;
    let find = |id: &String| -> CliResult<SrvCurve> {
        let polygon = dataset
            .curves
            .iter()
            .find(|c| &c.id == id)
            .ok_or_else(|| CliError::Data(format!("no curve with id `{id}`")))?;
        Ok(polygon_to_srv(polygon)?)
    };
    let (q1, q2) = (find(a)?, find(b)?);
    let ingest_seconds = start.elapsed().as_secs_f64();
    prepare_out(&args.out)?;
    let estimated = Instant::now();
    let (inelastic, rotation) = inelastic_distance(&q1, &q2)?;
    let elastic = elastic_distance(&q1, &q2, DEFAULT_GRID)?;
    let report = Report {
        schema_version: SCHEMA_VERSION,
        command: "distance",
        config: args.config.as_ref().map(|_| config),
        body: Body::Distance {
            distance: DistanceReport {
                pair: [a.clone(), b.clone()],
                elastic,
                inelastic,
                rotation,
            },
        },
        warnings: dataset.warnings.clone(),
    };
    write_json(&report, &args.out.join("report.json"))?;
    write_json(
        &Timings {
            ingest_seconds,
            estimate_seconds: estimated.elapsed().as_secs_f64(),
            total_seconds: start.elapsed().as_secs_f64(),
        },
        &args.out.join("timings.json"),
    )
}

fn split_keys(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|k| !k.is_empty()).map(String::from).collect()
}

fn run_variance(args: &VarianceArgs) -> CliResult<()> {
    let start = Instant::now();
    let (primary, complement) = match &args.decompose {
        Some(spec) => {
            let (p, c) = spec
                .split_once(':')
                .ok_or_else(|| CliError::Usage(format!("--decompose expects <primary>:<complement>, got `{spec}`")))?;
            (split_keys(p), split_keys(c))
        }
        None => (args.group_by.clone(), Vec::new()),
    };
    if primary.is_empty() {
        return Err(CliError::Usage("give --group-by or --decompose with at least one primary key".into()));
    }
    if args.decompose.is_some() && !args.group_by.is_empty() && args.group_by != primary {
        return Err(CliError::Usage("--group-by must match the primary keys of --decompose".into()));
    }
    let config = load_config(args.config.as_deref())?;
    let dataset = ingest(&args.input)?;
    let curves = to_srv(&dataset)?;
    let ingest_seconds = start.elapsed().as_secs_f64();
    prepare_out(&args.out)?;
    let estimated = Instant::now();
    let decomposition = variance_decomposition(&curves, &dataset.features, &primary, &complement, &config)?;
    let mut warnings = dataset.warnings.clone();
    for g in &decomposition.groups {
        if !g.converged {
            warnings.push(format!("group {:?}: no convergence", g.labels));
        }
    }
    let report = Report {
        schema_version: SCHEMA_VERSION,
        command: "variance",
        config: Some(config),
        body: Body::Variance { decomposition },
        warnings,
    };
    write_json(&report, &args.out.join("report.json"))?;
    write_json(
        &Timings {
            ingest_seconds,
            estimate_seconds: estimated.elapsed().as_secs_f64(),
            total_seconds: start.elapsed().as_secs_f64(),
        },
        &args.out.join("timings.json"),
    )
}

fn run_simulate(args: &SimulateArgs) -> CliResult<()> {
    let start = Instant::now();
    if args.kind != "spiral" {
        return Err(CliError::Usage(format!("unknown simulation kind `{}`; available: spiral", args.kind)));
    }
    let parameters = SpiralConfig {
        curves: args.n,
        min_points: args.min_points,
        max_points: args.max_points,
        noise_sd: args.noise_sd,
        seed: args.seed,
        ..SpiralConfig::default()
    };
    let curves = simulate_spirals(&parameters).map_err(|e| CliError::Usage(e.to_string()))?;
    prepare_out(&args.out)?;
    let dataset = Dataset {
        features: vec![Default::default(); curves.len()],
        curves,
        warnings: Vec::new(),
    };
    let data = "spirals.csv";
    dataset::write_csv(&dataset, &args.out.join(data))?;
    let report = Report {
        schema_version: SCHEMA_VERSION,
        command: "simulate",
        config: None,
        body: Body::Simulate {
            simulation: SimulationReport {
                kind: "spiral",
                parameters,
                data: data.into(),
                ids: ids(&dataset),
            },
        },
        warnings: Vec::new(),
    };
    write_json(&report, &args.out.join("report.json"))?;
    write_json(
        &Timings {
            total_seconds: start.elapsed().as_secs_f64(),
            ..Timings::default()
        },
        &args.out.join("timings.json"),
    )
}
