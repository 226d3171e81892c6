//! Curve datasets: CSV `curve_id,x,y[,feature...]` or JSON
//! `[{"id", "points": [[x, y], ...], "features": {...}}]`.

use std::collections::{BTreeMap, HashSet};
use std::io::Read;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use shapemean::curves::PlanePolygon;
use shapemean::mean::Labels;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub curves: Vec<PlanePolygon>,
    pub features: Vec<Labels>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn from_path(path: &Path) -> CliResult<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("csv") => Ok(Format::Csv),
            Some("json") => Ok(Format::Json),
            _ => Err(CliError::Usage(format!(
                "cannot infer format of {}; use a .csv or .json file",
                path.display()
            ))),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonCurve {
    id: String,
    points: Vec<[f64; 2]>,
    #[serde(default)]
    features: BTreeMap<String, String>,
}

struct RawCurve {
    id: String,
    points: Vec<Complex64>,
    features: Labels,
}

pub fn ingest(path: &Path) -> CliResult<Dataset> {
    let format = Format::from_path(path)?;
    let mut text = String::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| CliError::io(path, e))?;
    match format {
        Format::Csv => parse_csv(&text),
        Format::Json => parse_json(&text),
    }
}

pub fn parse_csv(text: &str) -> CliResult<Dataset> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(csv_error)?.clone();
    let names: Vec<&str> = headers.iter().collect();
    if names.len() < 3 || names[..3] != ["curve_id", "x", "y"] {
        return Err(CliError::Parse {
            line: 1,
            column: 1,
            message: format!("header must start with curve_id,x,y, found {}", names.join(",")),
        });
    }
    let feature_names: Vec<String> = names[3..].iter().map(|s| s.to_string()).collect();
    let mut raw: Vec<RawCurve> = Vec::new();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let coordinate = |column: usize| -> CliResult<f64> {
            let field = &record[column];
            field.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| CliError::Parse {
                line,
                column: column + 1,
                message: format!("`{field}` is not a finite number"),
            })
        };
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(CliError::Parse { line, column: 1, message: "empty curve_id".into() });
        }
        let point = Complex64::new(coordinate(1)?, coordinate(2)?);
        let features: Labels = feature_names.iter().cloned().zip(record.iter().skip(3).map(str::to_string)).collect();
        match raw.last_mut() {
            Some(current) if current.id == id => {
                if current.features != features {
                    return Err(CliError::Parse {
                        line,
                        column: 4,
                        message: format!("features of curve `{id}` change within the curve"),
                    });
                }
                current.points.push(point);
            }
            _ => {
                if !seen.insert(id.clone()) {
                    return Err(CliError::DuplicateId(id));
                }
                raw.push(RawCurve { id, points: vec![point], features });
            }
        }
    }
    build(raw)
}

pub fn parse_json(text: &str) -> CliResult<Dataset> {
    let curves: Vec<JsonCurve> = serde_json::from_str(text).map_err(|e| CliError::Parse {
        line: e.line() as u64,
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut seen = HashSet::new();
    let mut raw = Vec::with_capacity(curves.len());
    for c in curves {
        if !seen.insert(c.id.clone()) {
            return Err(CliError::DuplicateId(c.id));
        }
        if c.points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(CliError::Data(format!("curve `{}` has non-finite coordinates", c.id)));
        }
        raw.push(RawCurve {
            id: c.id,
            points: c.points.iter().map(|p| Complex64::new(p[0], p[1])).collect(),
            features: c.features,
        });
    }
    build(raw)
}

fn build(raw: Vec<RawCurve>) -> CliResult<Dataset> {
    if raw.is_empty() {
        return Err(CliError::Data("dataset contains no curves".into()));
    }
    let mut dataset = Dataset::default();
    let mut too_few = Vec::new();
    for c in raw {
        let distinct = {
            let mut d = c.points.clone();
            d.dedup();
            d.len()
        };
        if distinct < 3 {
            too_few.push(c.id);
            continue;
        }
        let polygon = PlanePolygon::new(c.id, c.points)?;
        let merged = polygon.merged_duplicates();
        if merged > 0 {
            dataset
                .warnings
                .push(format!("curve `{}`: merged {merged} duplicate consecutive point(s)", polygon.id));
        }
        dataset.curves.push(polygon);
        dataset.features.push(c.features);
    }
    if !too_few.is_empty() {
        return Err(CliError::TooFewPoints(too_few));
    }
    Ok(dataset)
}

fn csv_error(e: csv::Error) -> CliError {
    let line = e.position().map_or(0, |p| p.line());
    CliError::Parse { line, column: 1, message: e.to_string() }
}

/// Writes the CSV format read by [`parse_csv`].
pub fn write_csv(dataset: &Dataset, path: &Path) -> CliResult<()> {
    let keys: Vec<String> = dataset.features.first().map(|f| f.keys().cloned().collect()).unwrap_or_default();
    let mut writer = csv::Writer::from_path(path).map_err(|e| CliError::Data(e.to_string()))?;
    let mut header = vec!["curve_id".to_string(), "x".into(), "y".into()];
    header.extend(keys.iter().cloned());
    let write_err = |e: csv::Error| CliError::Data(e.to_string());
    writer.write_record(&header).map_err(write_err)?;
    for (curve, features) in dataset.curves.iter().zip(&dataset.features) {
        for p in &curve.points {
            let mut row = vec![curve.id.clone(), format!("{:?}", p.re), format!("{:?}", p.im)];
            row.extend(keys.iter().map(|k| features.get(k).cloned().unwrap_or_default()));
            writer.write_record(&row).map_err(write_err)?;
        }
    }
    writer.flush().map_err(|e| CliError::io(path, e))
}
