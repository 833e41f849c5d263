use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::Noise;
use crate::error::{Error, Result};
use crate::trace::RunTrace;

pub const CSV_HEADER: [&str; 7] = [
    "k",
    "value_evals",
    "f_val",
    "g_norm",
    "step_norm",
    "lyapunov_H",
    "descent_ok",
];

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn float(v: f64) -> String {
    format!("{v:?}")
}

fn opt<T>(v: Option<T>, show: impl Fn(T) -> String) -> String {
    v.map(show).unwrap_or_default()
}

/// Writes the trace with `CSV_HEADER`; floats use their shortest
/// round-trip form and absent values are empty fields.
pub fn emit_csv(trace: &RunTrace, path: &Path) -> Result<()> {
    if trace.is_empty() {
        return Err(Error::invalid("trace", "cannot write an empty trace"));
    }
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(CSV_HEADER).map_err(csv_err(path))?;
    for r in trace.records() {
        w.write_record([
            r.k.to_string(),
            r.value_evals.to_string(),
            float(r.f_val),
            opt(r.g_norm, float),
            float(r.step_norm),
            opt(r.lyapunov_h, float),
            opt(r.descent_ok, |b| b.to_string()),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub k: u64,
    pub value_evals: u64,
    pub f_val: f64,
    pub g_norm: Option<f64>,
    pub step_norm: f64,
    #[serde(rename = "lyapunov_H")]
    pub lyapunov_h: Option<f64>,
    pub descent_ok: Option<bool>,
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = r.headers().map_err(csv_err(path))?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Config(format!(
            "{} does not have the trace header {}",
            path.display(),
            CSV_HEADER.join(",")
        )));
    }
    r.deserialize().map(|row| row.map_err(csv_err(path))).collect()
}

/// Per-run facts that the CSV alone does not carry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellMeta {
    pub problem: String,
    pub n: usize,
    pub seed: u64,
    pub noise: Noise,
    pub method: String,
    pub lipschitz: Option<f64>,
    pub tau: f64,
    pub nu: f64,
    /// Largest `β_k` and `|β_k − γ_k|` over the run.
    pub beta_bar: f64,
    pub delta_bar: f64,
    pub fstar: Option<f64>,
    pub budget: u64,
    pub target_ratio: f64,
    pub termination: String,
    pub evals_to_target: Option<u64>,
    pub final_best: f64,
    pub last_value_evals: u64,
    /// `None` when the run's parameters admit no Lyapunov constants.
    pub descent_violations: Option<usize>,
    pub csv: String,
}

/// `<trace>.meta.json` next to `<trace>.csv`.
pub fn meta_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e.into(),
    })?;
    w.write_all(b"\n").map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn read_meta(path: &Path) -> Result<CellMeta> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Value evaluations spent before the first iterate with
/// `f − f* ≤ ratio·(f(x^1) − f*)`.
pub fn evals_to_target(rows: &[(u64, f64)], fstar: f64, ratio: f64) -> Option<u64> {
    let (_, f0) = *rows.first()?;
    let goal = ratio * (f0 - fstar);
    rows.iter()
        .position(|&(_, f)| f - fstar <= goal)
        .map(|i| if i == 0 { 0 } else { rows[i - 1].0 })
}
