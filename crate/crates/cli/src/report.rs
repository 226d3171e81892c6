//! `report.json` contents. Timings live in a separate `timings.json` so
//! that reports are byte-identical across identical runs.

use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;
use shapemean::covsmooth::EigenSystem;
use shapemean::curves::CurveFunction;
use shapemean::mean::{ElasticMeanResult, IterationRecord, MeanFitConfig, VarianceDecomposition};
use shapemean::simulate::SpiralConfig;

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<MeanFitConfig>,
    #[serde(flatten)]
    pub body: Body,
    pub warnings: Vec<String>,
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
pub enum Body {
    Mean { result: MeanReport },
    Distance { distance: DistanceReport },
    Variance { decomposition: VarianceDecomposition },
    Simulate { simulation: SimulationReport },
}

#[derive(Debug, Serialize)]
pub struct MeanReport {
    pub converged: bool,
    pub iterations: usize,
    pub variance: f64,
    pub mean: CurveFunction,
    pub mean_polyline: Vec<Complex64>,
    pub eigen: EigenSystem,
    pub trace: Vec<IterationRecord>,
    pub curves: Vec<CurveReport>,
}

#[derive(Debug, Serialize)]
pub struct CurveReport {
    pub id: String,
    pub rotation: Complex64,
    pub scale: f64,
    pub length_estimate: f64,
    pub nodes: Vec<f64>,
    pub times: Vec<f64>,
    pub values: Vec<Complex64>,
    pub collapsed: usize,
    pub flagged: bool,
}

impl MeanReport {
    pub fn new(result: ElasticMeanResult, ids: &[String]) -> Self {
        let curves = result
            .curves
            .into_iter()
            .zip(ids)
            .map(|(c, id)| CurveReport {
                id: id.clone(),
                rotation: c.rotation,
                scale: c.scale,
                length_estimate: c.length_estimate,
                nodes: c.curve.nodes,
                times: c.curve.times,
                values: c.curve.values,
                collapsed: c.collapsed,
                flagged: c.flagged,
            })
            .collect();
        Self {
            converged: result.converged,
            iterations: result.iterations,
            variance: result.variance,
            mean: result.mean,
            mean_polyline: result.mean_polyline,
            eigen: result.eigen,
            trace: result.trace,
            curves,
        }
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.converged {
            out.push(format!("no convergence within {} iterations", self.iterations));
        }
        for c in &self.curves {
            if c.collapsed > 0 {
                out.push(format!("curve `{}`: {} segment(s) collapsed during warping", c.id, c.collapsed));
            }
            if c.flagged {
                out.push(format!("curve `{}`: leading score vanished, rotation kept", c.id));
            }
        }
        out
    }
}

#[derive(Debug, Serialize)]
pub struct DistanceReport {
    pub pair: [String; 2],
    pub elastic: f64,
    pub inelastic: f64,
    /// Rotation of the second curve that minimizes the inelastic distance.
    pub rotation: Complex64,
}

#[derive(Debug, Serialize)]
pub struct SimulationReport {
    pub kind: &'static str,
    pub parameters: SpiralConfig,
    pub data: String,
    pub ids: Vec<String>,
}

#[derive(Debug, Serialize, Default)]
pub struct Timings {
    pub ingest_seconds: f64,
    pub estimate_seconds: f64,
    pub total_seconds: f64,
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}
