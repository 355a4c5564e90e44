//! Monte Carlo runner: simulate, estimate, aggregate, fit rates.

use std::cmp::Ordering;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use roughvol_core::estimators::{estimate_piecewise, iterate, EstimateResult, EstimatorConfig};
use roughvol_core::kappa::KappaTable;
use roughvol_core::market::{GeneralSimulator, PiecewiseSimulator};
use roughvol_core::rate::{fit_rate, fit_rate_log_corrected, minimax_slope};
use roughvol_core::wavelet::EnergyLevels;
use roughvol_core::{ModelKind, ModelParams};

use crate::cache::satisfies;
use crate::config::ExperimentConfig;
use crate::error::{io_err, Error, Result};
use crate::formats::{write_aggregates, write_rates, Aggregate, RateRow, ResultRow, ResultsWriter};
use crate::svg::rmse_plot;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResults {
    pub rows: Vec<ResultRow>,
    pub aggregates: Vec<Aggregate>,
    pub rates: Vec<RateRow>,
}

enum Simulator {
    Piecewise(PiecewiseSimulator),
    General(GeneralSimulator),
}

struct Cell<'a> {
    model: ModelKind,
    hurst: f64,
    eta: f64,
    n_exp: u32,
    simulator: Simulator,
    estimator: &'a EstimatorConfig,
    table: Option<&'a KappaTable>,
    timing: bool,
}

impl Cell<'_> {
    fn estimate(&self, seed: u64) -> Result<EstimateResult> {
        Ok(match &self.simulator {
            Simulator::Piecewise(sim) => estimate_piecewise(&sim.run(seed)?.prices, self.estimator)?,
            Simulator::General(sim) => {
                let prices = sim.run(seed)?.prices;
                let levels = EnergyLevels::general_empirical(&prices)?;
                let table = self.table.expect("general cells carry a table");
                iterate(&levels, table, self.estimator)?
            }
        })
    }

    fn replicate(&self, rep: usize, seed: u64) -> Result<ResultRow> {
        let start = Instant::now();
        let r = self.estimate(seed)?;
        let wall_ms = if self.timing { start.elapsed().as_millis() as u64 } else { 0 };
        Ok(ResultRow {
            model: self.model,
            hurst: self.hurst,
            eta: self.eta,
            n_exp: self.n_exp,
            rep,
            h_hat: r.h_hat,
            eta_hat: r.eta_hat,
            j_star: r.j_star,
            flags: r.flags,
            wall_ms,
        })
    }
}

/// Runs every cell of the grid. Replications run on the current rayon pool;
/// rows are written to `out_dir/results.csv` cell by cell in a fixed order,
/// followed by `aggregates.csv`, `rates.csv` and (optionally)
/// `rmse_vs_n.svg`.
pub fn run(config: &ExperimentConfig, table: Option<&KappaTable>, out_dir: Option<&Path>) -> Result<ExperimentResults> {
    config.validate()?;
    let estimator = config.estimator_config()?;
    let bounds = config.bounds()?;
    if let Some(req) = config.kappa_requirement()? {
        match table {
            Some(t) if satisfies(t, &req) => {}
            Some(_) => return Err(Error::Config("kappa table does not cover the experiment".into())),
            None => return Err(Error::Config("general model needs a kappa table".into())),
        }
    }
    let mut writer = match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(io_err(dir))?;
            Some(ResultsWriter::create(&dir.join("results.csv"))?)
        }
        None => None,
    };

    let mut rows = Vec::with_capacity(config.hurst.len() * config.eta.len() * config.n.len() * config.replications);
    for &hurst in &config.hurst {
        for &eta in &config.eta {
            for &n_exp in &config.n {
                let params = ModelParams::new(hurst, eta, bounds)?;
                let simulator = match config.model {
                    ModelKind::Piecewise => {
                        let vol_exp = config.vol_exp.expect("validated");
                        Simulator::Piecewise(PiecewiseSimulator::new(params, n_exp, vol_exp)?)
                    }
                    ModelKind::General => Simulator::General(GeneralSimulator::new(params, n_exp, config.oversample)?),
                };
                let cell = Cell {
                    model: config.model,
                    hurst,
                    eta,
                    n_exp,
                    simulator,
                    estimator: &estimator,
                    table,
                    timing: config.output.timing,
                };
                let cell_rows = (0..config.replications)
                    .into_par_iter()
                    .map(|rep| cell.replicate(rep, config.base_seed.wrapping_add(rep as u64)))
                    .collect::<Result<Vec<_>>>()?;
                if let Some(w) = writer.as_mut() {
                    w.append(&cell_rows)?;
                }
                rows.extend(cell_rows);
            }
        }
    }

    let aggregates = aggregate(&rows)?;
    let rates = rate_fits(&aggregates);
    if let Some(dir) = out_dir {
        write_aggregates(&dir.join("aggregates.csv"), &aggregates)?;
        write_rates(&dir.join("rates.csv"), &rates)?;
        if config.output.svg {
            let path = dir.join("rmse_vs_n.svg");
            std::fs::write(&path, rmse_plot(&aggregates, &rates)?).map_err(io_err(&path))?;
        }
    }
    Ok(ExperimentResults { rows, aggregates, rates })
}

fn cell_order(a: &ResultRow, b: &ResultRow) -> Ordering {
    a.model
        .as_str()
        .cmp(b.model.as_str())
        .then(a.hurst.total_cmp(&b.hurst))
        .then(a.eta.total_cmp(&b.eta))
        .then(a.n_exp.cmp(&b.n_exp))
}

/// Bias, RMSE and median absolute error, invariant under reordering.
fn summarize(mut errors: Vec<f64>) -> (f64, f64, f64) {
    errors.sort_by(f64::total_cmp);
    let k = errors.len() as f64;
    let bias = errors.iter().sum::<f64>() / k;
    let mut squares: Vec<f64> = errors.iter().map(|e| e * e).collect();
    squares.sort_by(f64::total_cmp);
    let rmse = (squares.iter().sum::<f64>() / k).sqrt();
    let mut abs: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let mid = abs.len() / 2;
    let median = if abs.len() % 2 == 1 { abs[mid] } else { 0.5 * (abs[mid - 1] + abs[mid]) };
    (bias, rmse, median)
}

/// Per-cell error summaries, sorted by `(model, H, eta, N)`.
pub fn aggregate(rows: &[ResultRow]) -> Result<Vec<Aggregate>> {
    if rows.is_empty() {
        return Err(Error::Config("no result rows to aggregate".into()));
    }
    let mut sorted: Vec<&ResultRow> = rows.iter().collect();
    sorted.sort_by(|a, b| cell_order(a, b));
    let mut out = Vec::new();
    for group in sorted.chunk_by(|a, b| cell_order(a, b) == Ordering::Equal) {
        let first = group[0];
        let (bias_h, rmse_h, median_abs_h) = summarize(group.iter().map(|r| r.h_hat - r.hurst).collect());
        let eta_errors: Option<Vec<f64>> = group.iter().map(|r| r.eta_hat.map(|e| e - r.eta)).collect();
        let eta_summary = eta_errors.map(summarize);
        out.push(Aggregate {
            model: first.model,
            hurst: first.hurst,
            eta: first.eta,
            n_exp: first.n_exp,
            reps: group.len(),
            bias_h,
            rmse_h,
            median_abs_h,
            bias_eta: eta_summary.map(|s| s.0),
            rmse_eta: eta_summary.map(|s| s.1),
            median_abs_eta: eta_summary.map(|s| s.2),
        });
    }
    Ok(out)
}

/// Rate fits of RMSE against `N` per `(model, H, eta)` series; series with
/// fewer than three sample sizes or a degenerate error are skipped. The
/// `eta` fit removes a `log(n)` factor.
pub fn rate_fits(aggs: &[Aggregate]) -> Vec<RateRow> {
    let mut out = Vec::new();
    let same_series = |a: &Aggregate, b: &Aggregate| a.model == b.model && a.hurst == b.hurst && a.eta == b.eta;
    for series in aggs.chunk_by(|a, b| same_series(a, b)) {
        let first = &series[0];
        let h_points: Vec<(u32, f64)> = series.iter().map(|a| (a.n_exp, a.rmse_h)).collect();
        if let Ok(fit) = fit_rate(&h_points) {
            out.push(RateRow {
                model: first.model,
                hurst: first.hurst,
                eta: first.eta,
                quantity: "H",
                slope: fit.slope,
                stderr: fit.stderr,
                theory: minimax_slope(first.hurst),
            });
        }
        let eta_points: Option<Vec<(u32, f64)>> = series.iter().map(|a| a.rmse_eta.map(|r| (a.n_exp, r))).collect();
        if let Some(Ok(fit)) = eta_points.map(|p| fit_rate_log_corrected(&p)) {
            out.push(RateRow {
                model: first.model,
                hurst: first.hurst,
                eta: first.eta,
                quantity: "eta",
                slope: fit.slope,
                stderr: fit.stderr,
                theory: minimax_slope(first.hurst),
            });
        }
    }
    out
}
