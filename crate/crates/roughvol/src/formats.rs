//! CSV and JSON files.
//!
//! All files are UTF-8 with LF line endings; floating-point fields carry
//! 17 significant digits so that they parse back to the same value.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use roughvol_core::estimators::{EstimateResult, Flag};
use roughvol_core::wavelet::EnergyLevels;
use roughvol_core::{ModelKind, PriceSeries};
use serde::{Deserialize, Serialize};

use crate::error::{format_err, io_err, Result};

pub const RESULTS_HEADER: [&str; 10] = ["model", "H", "eta", "N", "rep", "H_hat", "eta_hat", "J_star", "flags", "wall_ms"];

/// `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(io_err(path))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> crate::Error + '_ {
    move |e| format_err(path, e)
}

fn parse<T: std::str::FromStr>(path: &Path, field: &str, what: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    field.parse().map_err(|e| format_err(path, format!("{what} {field:?}: {e}")))
}

fn parse_opt(path: &Path, field: &str, what: &str) -> Result<Option<f64>> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse(path, field, what).map(Some)
    }
}

/// One replication of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub model: ModelKind,
    pub hurst: f64,
    pub eta: f64,
    pub n_exp: u32,
    pub rep: usize,
    pub h_hat: f64,
    pub eta_hat: Option<f64>,
    pub j_star: u32,
    pub flags: Vec<Flag>,
    pub wall_ms: u64,
}

impl ResultRow {
    fn record(&self) -> [String; 10] {
        let flags: Vec<&str> = self.flags.iter().map(|f| f.as_str()).collect();
        [
            self.model.as_str().to_string(),
            fmt_f64(self.hurst),
            fmt_f64(self.eta),
            self.n_exp.to_string(),
            self.rep.to_string(),
            fmt_f64(self.h_hat),
            fmt_opt(self.eta_hat),
            self.j_star.to_string(),
            flags.join("|"),
            self.wall_ms.to_string(),
        ]
    }
}

/// Incremental writer of `results.csv`.
pub struct ResultsWriter {
    inner: csv::Writer<File>,
    path: std::path::PathBuf,
}

impl ResultsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut inner = writer(path)?;
        inner.write_record(RESULTS_HEADER).map_err(csv_err(path))?;
        inner.flush().map_err(io_err(path))?;
        Ok(Self { inner, path: path.to_path_buf() })
    }

    /// Appends rows and flushes them to disk.
    pub fn append(&mut self, rows: &[ResultRow]) -> Result<()> {
        for row in rows {
            self.inner.write_record(row.record()).map_err(csv_err(&self.path))?;
        }
        self.inner.flush().map_err(io_err(&self.path))
    }
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    ResultsWriter::create(path)?.append(rows)
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = reader.headers().map_err(csv_err(path))?;
    if header.iter().ne(RESULTS_HEADER) {
        return Err(format_err(path, format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_err(path))?;
        let flags = if rec[8].is_empty() {
            Vec::new()
        } else {
            rec[8].split('|').map(|f| parse(path, f, "flag")).collect::<Result<_>>()?
        };
        rows.push(ResultRow {
            model: parse(path, &rec[0], "model")?,
            hurst: parse(path, &rec[1], "H")?,
            eta: parse(path, &rec[2], "eta")?,
            n_exp: parse(path, &rec[3], "N")?,
            rep: parse(path, &rec[4], "rep")?,
            h_hat: parse(path, &rec[5], "H_hat")?,
            eta_hat: parse_opt(path, &rec[6], "eta_hat")?,
            j_star: parse(path, &rec[7], "J_star")?,
            flags,
            wall_ms: parse(path, &rec[9], "wall_ms")?,
        });
    }
    Ok(rows)
}

/// Error summary of one `(model, H, eta, N)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub model: ModelKind,
    pub hurst: f64,
    pub eta: f64,
    pub n_exp: u32,
    pub reps: usize,
    pub bias_h: f64,
    pub rmse_h: f64,
    pub median_abs_h: f64,
    pub bias_eta: Option<f64>,
    pub rmse_eta: Option<f64>,
    pub median_abs_eta: Option<f64>,
}

pub const AGGREGATES_HEADER: [&str; 11] = [
    "model",
    "H",
    "eta",
    "N",
    "reps",
    "bias_H",
    "rmse_H",
    "median_abs_H",
    "bias_eta",
    "rmse_eta",
    "median_abs_eta",
];

pub fn write_aggregates(path: &Path, aggs: &[Aggregate]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(AGGREGATES_HEADER).map_err(csv_err(path))?;
    for a in aggs {
        w.write_record([
            a.model.as_str().to_string(),
            fmt_f64(a.hurst),
            fmt_f64(a.eta),
            a.n_exp.to_string(),
            a.reps.to_string(),
            fmt_f64(a.bias_h),
            fmt_f64(a.rmse_h),
            fmt_f64(a.median_abs_h),
            fmt_opt(a.bias_eta),
            fmt_opt(a.rmse_eta),
            fmt_opt(a.median_abs_eta),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_aggregates(path: &Path) -> Result<Vec<Aggregate>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_err(path))?;
        out.push(Aggregate {
            model: parse(path, &rec[0], "model")?,
            hurst: parse(path, &rec[1], "H")?,
            eta: parse(path, &rec[2], "eta")?,
            n_exp: parse(path, &rec[3], "N")?,
            reps: parse(path, &rec[4], "reps")?,
            bias_h: parse(path, &rec[5], "bias_H")?,
            rmse_h: parse(path, &rec[6], "rmse_H")?,
            median_abs_h: parse(path, &rec[7], "median_abs_H")?,
            bias_eta: parse_opt(path, &rec[8], "bias_eta")?,
            rmse_eta: parse_opt(path, &rec[9], "rmse_eta")?,
            median_abs_eta: parse_opt(path, &rec[10], "median_abs_eta")?,
        });
    }
    Ok(out)
}

/// Fitted error exponent of one `(model, H, eta)` series.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub model: ModelKind,
    pub hurst: f64,
    pub eta: f64,
    pub quantity: &'static str,
    pub slope: f64,
    pub stderr: f64,
    pub theory: f64,
}

pub fn write_rates(path: &Path, rates: &[RateRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["model", "H", "eta", "quantity", "slope", "stderr", "theory"]).map_err(csv_err(path))?;
    for r in rates {
        w.write_record([
            r.model.as_str().to_string(),
            fmt_f64(r.hurst),
            fmt_f64(r.eta),
            r.quantity.to_string(),
            fmt_f64(r.slope),
            fmt_f64(r.stderr),
            fmt_f64(r.theory),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Prices as `t,S` with `t = k / n`.
pub fn write_prices(path: &Path, prices: &PriceSeries) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "S"]).map_err(csv_err(path))?;
    let n = (prices.len() - 1) as f64;
    for (k, s) in prices.values.iter().enumerate() {
        w.write_record([fmt_f64(k as f64 / n), fmt_f64(*s)]).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads the `S` column of a `t,S` file; its length must be `2^N + 1`.
pub fn read_prices(path: &Path) -> Result<(u32, Vec<f64>)> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = reader.headers().map_err(csv_err(path))?;
    if header.iter().ne(["t", "S"]) {
        return Err(format_err(path, "expected header t,S"));
    }
    let mut values = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_err(path))?;
        values.push(parse(path, &rec[1], "S")?);
    }
    let n = values.len().saturating_sub(1);
    if n < 2 || !n.is_power_of_two() {
        return Err(format_err(path, format!("{} prices is not 2^N + 1", values.len())));
    }
    Ok((n.trailing_zeros(), values))
}

pub fn write_ladder(path: &Path, levels: &EnergyLevels) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["j", "p", "Q"]).map_err(csv_err(path))?;
    for (j, p, q) in levels.iter() {
        w.write_record([j.to_string(), p.to_string(), fmt_f64(q)]).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_ladder(path: &Path) -> Result<Vec<(u32, u32, f64)>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_err(path))?;
        out.push((parse(path, &rec[0], "j")?, parse(path, &rec[1], "p")?, parse(path, &rec[2], "Q")?));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotJson {
    pub m: usize,
    #[serde(rename = "H")]
    pub h: f64,
    pub eta: Option<f64>,
    #[serde(rename = "J")]
    pub j: u32,
}

/// Serialized [`EstimateResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateJson {
    #[serde(rename = "H_hat")]
    pub h_hat: f64,
    pub eta_hat: Option<f64>,
    #[serde(rename = "J_star")]
    pub j_star: u32,
    pub m_opt: usize,
    pub trajectory: Vec<SnapshotJson>,
    pub flags: Vec<String>,
}

impl From<&EstimateResult> for EstimateJson {
    fn from(r: &EstimateResult) -> Self {
        Self {
            h_hat: r.h_hat,
            eta_hat: r.eta_hat,
            j_star: r.j_star,
            m_opt: r.m_opt,
            trajectory: r.trajectory.iter().map(|s| SnapshotJson { m: s.m, h: s.h, eta: s.eta, j: s.level }).collect(),
            flags: r.flags.iter().map(|f| f.as_str().to_string()).collect(),
        }
    }
}

pub fn write_estimate(out: &mut impl Write, result: &EstimateResult) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut *out, &EstimateJson::from(result))?;
    out.write_all(b"\n")
}
