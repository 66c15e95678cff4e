use std::fs;
use std::path::Path;

use anyhow::Context;
use hybrid_scattering::{Convention, MeasurementRecord, MeasurementSet, PiecewisePolynomial, SparseSignal};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::Failure;

/// One line of a measurement CSV.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Row {
    pub scale: f64,
    pub freq: f64,
    pub p: u32,
    pub value: f64,
    pub convention: Convention,
}

impl From<&MeasurementRecord> for Row {
    fn from(r: &MeasurementRecord) -> Self {
        Row {
            scale: r.scale,
            freq: r.frequency,
            p: r.exponent,
            value: r.value,
            convention: r.convention,
        }
    }
}

impl From<Row> for MeasurementRecord {
    fn from(r: Row) -> Self {
        MeasurementRecord {
            scale: r.scale,
            frequency: r.freq,
            exponent: r.p,
            value: r.value,
            convention: r.convention,
        }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(value)
}

pub fn read_signal(path: &Path) -> Result<SparseSignal, Failure> {
    read_json(path)
}

pub fn read_polynomial(path: &Path) -> Result<PiecewisePolynomial, Failure> {
    read_json(path)
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    let mut text = serde_json::to_string_pretty(value).context("serializing JSON")?;
    text.push('\n');
    Ok(text)
}

/// Writes to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, contents: &str) -> Result<(), Failure> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            fs::write(p, contents).with_context(|| format!("writing {}", p.display()))?;
        }
        None => print!("{contents}"),
    }
    Ok(())
}

pub fn csv_string<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String, Failure> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).context("writing CSV")?;
    }
    let bytes = writer.into_inner().context("flushing CSV")?;
    Ok(String::from_utf8(bytes).context("CSV is not UTF-8")?)
}

pub fn measurement_csv(set: &MeasurementSet) -> Result<String, Failure> {
    csv_string(set.records.iter().map(Row::from))
}

pub fn read_rows(path: &Path) -> Result<Vec<Row>, Failure> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let rows = reader
        .deserialize()
        .collect::<Result<Vec<Row>, _>>()
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok(rows)
}

pub fn read_measurements(paths: &[impl AsRef<Path>]) -> Result<MeasurementSet, Failure> {
    let mut records = Vec::new();
    for path in paths {
        records.extend(read_rows(path.as_ref())?.into_iter().map(MeasurementRecord::from));
    }
    Ok(MeasurementSet { records })
}

/// Per-frequency `(s, f^p)` sweeps in order of first appearance, each sorted
/// by scale. Every row must carry exponent `p`.
pub fn read_sweeps(paths: &[impl AsRef<Path>], p: Option<u32>) -> Result<(Vec<f64>, Vec<Vec<(f64, f64)>>, u32), Failure> {
    let mut freqs: Vec<f64> = Vec::new();
    let mut sweeps: Vec<Vec<(f64, f64)>> = Vec::new();
    let mut exponent = p;
    for path in paths {
        for row in read_rows(path.as_ref())? {
            match exponent {
                None => exponent = Some(row.p),
                Some(e) if e != row.p => {
                    return Err(Failure::precondition(format!(
                        "{}: row exponent {} differs from {e}",
                        path.as_ref().display(),
                        row.p
                    )))
                }
                _ => {}
            }
            let power = match row.convention {
                Convention::NormPower => row.value,
                Convention::Norm => row.value.powi(row.p as i32),
            };
            let slot = match freqs.iter().position(|&f| f == row.freq) {
                Some(i) => i,
                None => {
                    freqs.push(row.freq);
                    sweeps.push(Vec::new());
                    freqs.len() - 1
                }
            };
            sweeps[slot].push((row.scale, power));
        }
    }
    for sweep in &mut sweeps {
        sweep.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    let exponent = exponent.ok_or_else(|| Failure::precondition("no measurement rows found"))?;
    Ok((freqs, sweeps, exponent))
}
