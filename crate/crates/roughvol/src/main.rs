use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use roughvol::cache;
use roughvol::config::{ExperimentConfig, KappaRequirement, KappaSection};
use roughvol::experiment::{self, aggregate, rate_fits};
use roughvol::formats::{read_prices, read_results, write_estimate, write_ladder, write_prices};
use roughvol_core::estimators::{estimate_h_piecewise, iterate, EstimatorConfig};
use roughvol_core::kappa::choose_s;
use roughvol_core::market::{log_realized_variance, simulate_general, simulate_piecewise};
use roughvol_core::wavelet::EnergyLevels;
use roughvol_core::{ModelKind, ModelParams, ParamBounds, PriceSeries};

#[derive(Parser)]
#[command(name = "roughvol", version, about = "Rough volatility estimation and Monte Carlo rate checks")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment manifest (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (or file for kappa-build)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Kappa table cache (JSON)
    #[arg(long, global = true)]
    kappa_cache: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct ModelArgs {
    #[arg(long, default_value = "general")]
    model: ModelKind,
    /// H_-,H_+,eta_-,eta_+
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.5, 0.25, 4.0])]
    bounds: Vec<f64>,
    /// Volatility grid exponent of the piecewise model
    #[arg(long)]
    vol_exp: Option<u32>,
}

impl ModelArgs {
    fn bounds(&self) -> Result<ParamBounds> {
        let b = &self.bounds;
        if b.len() != 4 {
            bail!("--bounds takes four values H_-,H_+,eta_-,eta_+");
        }
        let bounds = ParamBounds::new(b[0], b[1], b[2], b[3])?;
        bounds.validate_for(self.model)?;
        Ok(bounds)
    }

    fn vol_exp(&self) -> Result<u32> {
        self.vol_exp.context("the piecewise model needs --vol-exp")
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one price path and write prices.csv
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        hurst: f64,
        #[arg(long)]
        eta: f64,
        /// Sample-size exponent N (n = 2^N)
        #[arg(long)]
        n_exp: u32,
        #[arg(long, default_value_t = 4)]
        oversample: usize,
    },
    /// Estimate (H, eta) from a t,S price file
    Estimate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        prices: PathBuf,
        /// Number of debiasing passes (default from H_-)
        #[arg(long)]
        m_opt: Option<usize>,
        /// Hurst spacing of a kappa table built on the fly
        #[arg(long, default_value_t = 0.02)]
        spacing: f64,
    },
    /// Run a Monte Carlo experiment from --config
    Experiment,
    /// Build a kappa table and write it to --kappa-cache (or --out)
    KappaBuild {
        #[arg(long)]
        h_min: Option<f64>,
        #[arg(long)]
        h_max: Option<f64>,
        #[arg(long, default_value_t = 0.02)]
        spacing: f64,
        #[arg(long)]
        p_max: Option<u32>,
        /// Truncation order S (default from the Hurst range)
        #[arg(long)]
        order: Option<usize>,
    },
    /// Fit error rates from a results.csv and compare with -1/(4H+2)
    RateCheck {
        #[arg(long)]
        results: Option<PathBuf>,
        /// Fail when any H slope is further than this from theory
        #[arg(long)]
        tolerance: Option<f64>,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(k) = cli.common.threads {
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global()?;
    }
    match cli.command {
        Command::Simulate { model, hurst, eta, n_exp, oversample } => {
            simulate(&cli.common, &model, hurst, eta, n_exp, oversample)
        }
        Command::Estimate { model, prices, m_opt, spacing } => estimate(&cli.common, &model, &prices, m_opt, spacing),
        Command::Experiment => run_experiment(&cli.common),
        Command::KappaBuild { h_min, h_max, spacing, p_max, order } => {
            kappa_build(&cli.common, h_min, h_max, spacing, p_max, order)
        }
        Command::RateCheck { results, tolerance } => rate_check(&cli.common, results, tolerance),
    }
}

fn out_dir(common: &Common) -> Result<PathBuf> {
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn simulate(common: &Common, model: &ModelArgs, hurst: f64, eta: f64, n_exp: u32, oversample: usize) -> Result<()> {
    let params = ModelParams::new(hurst, eta, model.bounds()?)?;
    let seed = common.seed.unwrap_or(0);
    let prices = match model.model {
        ModelKind::Piecewise => simulate_piecewise(params, n_exp, model.vol_exp()?, seed)?,
        ModelKind::General => simulate_general(params, n_exp, oversample, seed)?,
    };
    let path = out_dir(common)?.join("prices.csv");
    write_prices(&path, &prices)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn estimate(common: &Common, model: &ModelArgs, prices: &Path, m_opt: Option<usize>, spacing: f64) -> Result<()> {
    let bounds = model.bounds()?;
    let (n_exp, values) = read_prices(prices)?;
    let vol_exp = match model.model {
        ModelKind::Piecewise => Some(model.vol_exp()?),
        ModelKind::General => None,
    };
    let series = PriceSeries::new(n_exp, values, model.model, vol_exp, common.seed.unwrap_or(0))?;
    let mut config = EstimatorConfig::for_model(model.model, bounds)?;
    if let Some(m) = m_opt {
        config.m_opt = m;
    }
    let (levels, result) = match model.model {
        ModelKind::Piecewise => {
            let levels = EnergyLevels::piecewise_empirical(&log_realized_variance(&series)?, n_exp)?;
            let r = estimate_h_piecewise(&levels, &config)?;
            (levels, r)
        }
        ModelKind::General => {
            let req = KappaRequirement {
                h_lo: bounds.h_minus,
                h_hi: bounds.h_plus,
                spacing,
                p_max: n_exp - 1,
                order: config.order,
                quad: KappaSection::default().quad(),
            };
            let table = cache::load_or_build(common.kappa_cache.as_deref(), &req)?;
            let levels = EnergyLevels::general_empirical(&series)?;
            let r = iterate(&levels, &table, &config)?;
            (levels, r)
        }
    };
    match &common.out {
        Some(_) => {
            let dir = out_dir(common)?;
            let path = dir.join("estimate.json");
            let mut file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            write_estimate(&mut file, &result)?;
            write_ladder(&dir.join("ladder.csv"), &levels)?;
            eprintln!("wrote {}", path.display());
        }
        None => write_estimate(&mut std::io::stdout().lock(), &result)?,
    }
    Ok(())
}

fn run_experiment(common: &Common) -> Result<()> {
    let path = common.config.as_deref().context("experiment needs --config")?;
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = common.seed {
        config.base_seed = seed;
    }
    if let Some(out) = &common.out {
        config.output.dir = out.clone();
    }
    if let Some(cache) = &common.kappa_cache {
        config.output.kappa_cache = Some(cache.clone());
    }
    if let (None, Some(k)) = (common.threads, config.threads) {
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global()?;
    }
    config.validate()?;
    let table = match config.kappa_requirement()? {
        Some(req) => Some(cache::load_or_build(config.output.kappa_cache.as_deref(), &req)?),
        None => None,
    };
    let results = experiment::run(&config, table.as_ref(), Some(&config.output.dir))?;
    print_rates(&results.rates);
    eprintln!("wrote {} rows to {}", results.rows.len(), config.output.dir.join("results.csv").display());
    Ok(())
}

fn kappa_build(
    common: &Common,
    h_min: Option<f64>,
    h_max: Option<f64>,
    spacing: f64,
    p_max: Option<u32>,
    order: Option<usize>,
) -> Result<()> {
    let target = common.kappa_cache.clone().or_else(|| common.out.clone()).context("kappa-build needs --kappa-cache")?;
    let req = match &common.config {
        Some(path) => ExperimentConfig::load(path)?
            .kappa_requirement()?
            .context("the configured model needs no kappa table")?,
        None => {
            let (lo, hi) = (h_min.context("--h-min")?, h_max.context("--h-max")?);
            KappaRequirement {
                h_lo: lo,
                h_hi: hi,
                spacing,
                p_max: p_max.context("--p-max")?,
                order: match order {
                    Some(s) => s,
                    None => choose_s(lo, hi)?,
                },
                quad: KappaSection::default().quad(),
            }
        }
    };
    let table = cache::build_for(&req)?;
    cache::save(&table, &target)?;
    eprintln!(
        "wrote {} ({} Hurst values, p <= {}, S = {})",
        target.display(),
        table.h_grid().len(),
        table.p_max(),
        table.order()
    );
    Ok(())
}

fn rate_check(common: &Common, results: Option<PathBuf>, tolerance: Option<f64>) -> Result<()> {
    let path = match results {
        Some(p) => p,
        None => common.out.clone().unwrap_or_else(|| PathBuf::from(".")).join("results.csv"),
    };
    let rows = read_results(&path)?;
    let aggs = aggregate(&rows)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "model,H,eta,N,reps,rmse_H,median_abs_H")?;
    for a in &aggs {
        writeln!(out, "{},{},{},{},{},{:.6e},{:.6e}", a.model, a.hurst, a.eta, a.n_exp, a.reps, a.rmse_h, a.median_abs_h)?;
    }
    let rates = rate_fits(&aggs);
    if rates.is_empty() {
        bail!("no series with at least three sample sizes");
    }
    print_rates(&rates);
    if let Some(tol) = tolerance {
        let bad: Vec<_> = rates.iter().filter(|r| r.quantity == "H" && (r.slope - r.theory).abs() > tol).collect();
        if !bad.is_empty() {
            bail!("{} H slope(s) differ from theory by more than {tol}", bad.len());
        }
    }
    Ok(())
}

fn print_rates(rates: &[roughvol::formats::RateRow]) {
    for r in rates {
        println!(
            "{} H={} eta={} {}: slope {:.4} +/- {:.4} (theory {:.4})",
            r.model, r.hurst, r.eta, r.quantity, r.slope, r.stderr, r.theory
        );
    }
}
