//! Instance files: a header row followed by comma-separated rows.
//!
//! Strategic records: header `w1,...,w11,label`, one record per row, raw
//! (unstandardized) features and a `-1`/`1` label.
//!
//! Pricing: header `theta` or `theta,rho`, one product per row. Without a
//! `rho` column the cost multipliers are drawn from the instance seed.
//!
//! Values are written in shortest round-trip form, so a written file reads
//! back to bit-identical numbers.

use std::path::Path;

use crate::error::{Error, Result};
use crate::problems::strategic::{StrategicRecord, N_FEATURES};

fn file_err(path: &Path, msg: impl std::fmt::Display) -> Error {
    Error::InstanceFile(format!("{}: {msg}", path.display()))
}

fn strategic_header() -> Vec<String> {
    (1..=N_FEATURES).map(|i| format!("w{i}")).chain(["label".to_string()]).collect()
}

fn parse_field(path: &Path, line: u64, name: &str, raw: &str) -> Result<f64> {
    raw.trim()
        .parse::<f64>()
        .map_err(|e| file_err(path, format!("line {line}, column `{name}`: {e}")))
}

pub fn read_strategic_records(path: &Path) -> Result<Vec<StrategicRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| file_err(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| file_err(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header != strategic_header() {
        return Err(file_err(path, format!("expected header {}", strategic_header().join(","))));
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| file_err(path, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let values = row
            .iter()
            .zip(&header)
            .map(|(raw, name)| parse_field(path, line, name, raw))
            .collect::<Result<Vec<f64>>>()?;
        let (features, label) = values.split_at(N_FEATURES);
        records.push(
            StrategicRecord::new(features.to_vec(), label[0])
                .map_err(|e| file_err(path, format!("line {line}: {e}")))?,
        );
    }
    Ok(records)
}

pub fn write_strategic_records(path: &Path, records: &[StrategicRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| file_err(path, e))?;
    writer.write_record(strategic_header()).map_err(|e| file_err(path, e))?;
    for r in records {
        let row: Vec<String> = r.features.iter().chain([&r.label]).map(|v| format!("{v}")).collect();
        writer.write_record(&row).map_err(|e| file_err(path, e))?;
    }
    writer.flush().map_err(|e| file_err(path, e))
}

/// Pricing file contents: reference prices and optional cost multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct PricingFile {
    pub theta: Vec<f64>,
    pub rho: Option<Vec<f64>>,
}

pub fn read_pricing(path: &Path) -> Result<PricingFile> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| file_err(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| file_err(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let with_rho = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["theta"] => false,
        ["theta", "rho"] => true,
        _ => return Err(file_err(path, "expected header `theta` or `theta,rho`")),
    };
    let mut theta = Vec::new();
    let mut rho = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| file_err(path, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        theta.push(parse_field(path, line, "theta", &row[0])?);
        if with_rho {
            rho.push(parse_field(path, line, "rho", &row[1])?);
        }
    }
    if theta.is_empty() {
        return Err(file_err(path, "no products"));
    }
    Ok(PricingFile {
        theta,
        rho: with_rho.then_some(rho),
    })
}

pub fn write_pricing(path: &Path, file: &PricingFile) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| file_err(path, e))?;
    match &file.rho {
        Some(rho) => {
            writer.write_record(["theta", "rho"]).map_err(|e| file_err(path, e))?;
            for (t, r) in file.theta.iter().zip(rho) {
                writer
                    .write_record([format!("{t}"), format!("{r}")])
                    .map_err(|e| file_err(path, e))?;
            }
        }
        None => {
            writer.write_record(["theta"]).map_err(|e| file_err(path, e))?;
            for t in &file.theta {
                writer.write_record([format!("{t}")]).map_err(|e| file_err(path, e))?;
            }
        }
    }
    writer.flush().map_err(|e| file_err(path, e))
}
