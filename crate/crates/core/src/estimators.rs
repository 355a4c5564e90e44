//! Adaptive level selection and the estimators of `(H, eta)`.
//!
//! The piecewise model uses a single log-ratio of energies at the selected
//! level. The general model starts from the same ratio (threshold constant
//! one), estimates `eta` at the level `floor(N / (2H + 1))`, and then runs
//! `m_opt` debiasing passes that subtract the higher-order bias
//! `B^{(S)}_{j,p}` evaluated at the previous estimate.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::kappa::{bias_term, choose_s, KappaTable, MAX_ORDER};
use crate::market::{log_realized_variance, ModelKind, ParamBounds, PriceSeries};
use crate::wavelet::EnergyLevels;

/// Non-fatal conditions met while estimating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Flag {
    /// No level passed the threshold; the smallest admissible scale was used.
    DegenerateSelection,
    /// A non-positive energy entered the log-ratio; `H` was set to `H_+`.
    NonPositiveRatio,
    /// Negative radicand in the `eta` formula; `eta` was set to `eta_-`.
    NegativeRadicand,
}

impl Flag {
    pub const ALL: [Flag; 3] = [Flag::DegenerateSelection, Flag::NonPositiveRatio, Flag::NegativeRadicand];

    pub fn as_str(self) -> &'static str {
        match self {
            Flag::DegenerateSelection => "degenerate_selection",
            Flag::NonPositiveRatio => "nonpositive_ratio",
            Flag::NegativeRadicand => "negative_radicand",
        }
    }
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Flag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Flag::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown flag {s:?}")))
    }
}

fn add_flag(flags: &mut Vec<Flag>, flag: Flag) {
    if let Err(pos) = flags.binary_search(&flag) {
        flags.insert(pos, flag);
    }
}

/// `m_opt = max(floor(1/(4 H_-) - 2 H_-), 0)`.
pub fn m_opt(h_minus: f64) -> usize {
    let v = libm::floor(1.0 / (4.0 * h_minus) - 2.0 * h_minus);
    if v > 0.0 {
        v as usize
    } else {
        0
    }
}

/// `nu0 = eta_-^2 / 2 * min(3, (4 - 2^{2H_+}) 2^{2H_+})`.
///
/// The value reaches zero at `H_+ = 1`, where the selection threshold
/// collapses.
pub fn default_nu0(bounds: &ParamBounds) -> f64 {
    let x = libm::exp2(2.0 * bounds.h_plus);
    0.5 * bounds.eta_minus * bounds.eta_minus * f64::min(3.0, (4.0 - x) * x)
}

/// Infimum of `eta^2 (4 - 2^{2H}) 2^{2H}` over the parameter box. The
/// piecewise threshold constant must stay strictly below it.
pub fn nu0_ceiling(bounds: &ParamBounds) -> f64 {
    let f = |h: f64| {
        let x = libm::exp2(2.0 * h);
        (4.0 - x) * x
    };
    bounds.eta_minus * bounds.eta_minus * f64::min(f(bounds.h_minus), f(bounds.h_plus))
}

/// Estimator settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub bounds: ParamBounds,
    /// Threshold constant of the piecewise level selector.
    pub nu0: f64,
    /// Truncation order `S` of the bias expansion.
    pub order: usize,
    /// Number of debiasing passes after the first stage.
    pub m_opt: usize,
}

impl EstimatorConfig {
    /// Defaults for a model: `nu0` from [`default_nu0`]; for the general
    /// model `S` from [`choose_s`] and `m_opt` from [`m_opt`].
    pub fn for_model(kind: ModelKind, bounds: ParamBounds) -> Result<Self> {
        bounds.validate_for(kind)?;
        let (order, passes) = match kind {
            ModelKind::Piecewise => (1, 0),
            ModelKind::General => (choose_s(bounds.h_minus, bounds.h_plus)?, m_opt(bounds.h_minus)),
        };
        let config = Self { bounds, nu0: default_nu0(&bounds), order, m_opt: passes };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        if !(self.nu0 > 0.0 && self.nu0.is_finite()) {
            return Err(Error::Degenerate(format!("threshold constant nu0={} is not positive", self.nu0)));
        }
        let ceiling = nu0_ceiling(&self.bounds);
        if self.nu0 >= ceiling {
            return Err(Error::InvalidConfig(format!("nu0={} must be below {ceiling}", self.nu0)));
        }
        if self.order == 0 || self.order > MAX_ORDER {
            return Err(Error::InvalidConfig(format!("order S={} outside 1..={MAX_ORDER}", self.order)));
        }
        Ok(())
    }
}

/// Estimate after one stage or pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snapshot {
    pub m: usize,
    pub h: f64,
    pub eta: Option<f64>,
    /// Selected level `J*` of this pass.
    pub level: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub h_hat: f64,
    /// `None` where the model's estimator does not produce `eta`.
    pub eta_hat: Option<f64>,
    pub j_star: u32,
    pub m_opt: usize,
    /// One snapshot for the first stage, then one per pass.
    pub trajectory: Vec<Snapshot>,
    /// Sorted, without duplicates.
    pub flags: Vec<Flag>,
}

impl EstimateResult {
    fn from_snapshots(trajectory: Vec<Snapshot>, m_opt: usize, flags: Vec<Flag>) -> Self {
        let last = *trajectory.last().expect("at least one snapshot");
        Self { h_hat: last.h, eta_hat: last.eta, j_star: last.level, m_opt, trajectory, flags }
    }
}

/// Largest `j` in `lo..G` with `q(j, G-j-1) >= c 2^j / n`, or `(lo, true)`.
fn select(
    levels: &EnergyLevels,
    lo: u32,
    c: f64,
    q: &mut impl FnMut(u32, u32) -> Result<f64>,
) -> Result<(u32, bool)> {
    if levels.is_empty() {
        return Err(Error::EmptyLadder);
    }
    let g = levels.grid_exp;
    if g < lo + 1 {
        return Err(Error::InvalidConfig(format!("grid exponent {g} leaves no admissible level")));
    }
    let n = levels.n();
    for j in (lo..g).rev() {
        if q(j, g - j - 1)? >= c * libm::exp2(j as f64) / n {
            return Ok((j, false));
        }
    }
    Ok((lo, true))
}

/// `-1/2 log2(upper / lower)` clamped; a non-positive energy gives `H_+`.
fn ratio_estimate(upper: f64, lower: f64, bounds: &ParamBounds) -> (f64, bool) {
    if upper > 0.0 && lower > 0.0 {
        let h = -0.5 * libm::log2(upper / lower);
        if h.is_finite() {
            return (bounds.clamp_h(h), false);
        }
    }
    (bounds.h_plus, true)
}

fn h_at_level(
    levels: &EnergyLevels,
    j: u32,
    bounds: &ParamBounds,
    q: &mut impl FnMut(u32, u32) -> Result<f64>,
) -> Result<(f64, bool)> {
    let p = levels.grid_exp - j - 1;
    let lower = q(j, p)?;
    let upper = q(j + 1, p)?;
    Ok(ratio_estimate(upper, lower, bounds))
}

fn check_model(levels: &EnergyLevels, model: ModelKind) -> Result<()> {
    if levels.model != model {
        return Err(Error::InvalidConfig(format!("expected a {model} ladder, got {}", levels.model)));
    }
    Ok(())
}

/// `J* = max{2 <= j <= N_vol - 1 : Q_{j,N_vol-j-1} >= nu0 2^j / n}`, with
/// the fallback `(2, true)`.
pub fn select_level_piecewise(levels: &EnergyLevels, nu0: f64) -> Result<(u32, bool)> {
    select(levels, 2, nu0, &mut |j, p| levels.get(j, p))
}

/// `J* = max{1 <= j <= N - 1 : Q_{j,N-j-1} >= 2^j / n}`, with the fallback
/// `(1, true)`.
pub fn select_level_general(levels: &EnergyLevels) -> Result<(u32, bool)> {
    select(levels, 1, 1.0, &mut |j, p| levels.get(j, p))
}

/// Piecewise-model estimator `-1/2 log2(Q_{J*+1,p} / Q_{J*,p})`,
/// `p = N_vol - J* - 1`.
pub fn estimate_h_piecewise(levels: &EnergyLevels, config: &EstimatorConfig) -> Result<EstimateResult> {
    check_model(levels, ModelKind::Piecewise)?;
    let mut flags = Vec::new();
    let mut q = |j, p| levels.get(j, p);
    let (j_star, degenerate) = select(levels, 2, config.nu0, &mut q)?;
    if degenerate {
        add_flag(&mut flags, Flag::DegenerateSelection);
    }
    let (h, nonpositive) = h_at_level(levels, j_star, &config.bounds, &mut q)?;
    if nonpositive {
        add_flag(&mut flags, Flag::NonPositiveRatio);
    }
    let snap = Snapshot { m: 0, h, eta: None, level: j_star };
    Ok(EstimateResult::from_snapshots(alloc::vec![snap], 0, flags))
}

/// Full piecewise pipeline from prices: block log realized variances,
/// debiased ladder, estimator.
pub fn estimate_piecewise(prices: &PriceSeries, config: &EstimatorConfig) -> Result<EstimateResult> {
    let xhat = log_realized_variance(prices)?;
    let levels = EnergyLevels::piecewise_empirical(&xhat, prices.n_exp)?;
    estimate_h_piecewise(&levels, config)
}

/// First-stage general-model estimator of `H`.
pub fn estimate_h0_general(levels: &EnergyLevels, config: &EstimatorConfig) -> Result<EstimateResult> {
    check_model(levels, ModelKind::General)?;
    let mut flags = Vec::new();
    let (h, j_star) = h_step(levels, &config.bounds, &mut flags, &mut |j, p| levels.get(j, p))?;
    let snap = Snapshot { m: 0, h, eta: None, level: j_star };
    Ok(EstimateResult::from_snapshots(alloc::vec![snap], config.m_opt, flags))
}

fn h_step(
    levels: &EnergyLevels,
    bounds: &ParamBounds,
    flags: &mut Vec<Flag>,
    q: &mut impl FnMut(u32, u32) -> Result<f64>,
) -> Result<(f64, u32)> {
    let (j_star, degenerate) = select(levels, 1, 1.0, q)?;
    if degenerate {
        add_flag(flags, Flag::DegenerateSelection);
    }
    let (h, nonpositive) = h_at_level(levels, j_star, bounds, q)?;
    if nonpositive {
        add_flag(flags, Flag::NonPositiveRatio);
    }
    Ok((h, j_star))
}

/// Level `floor(N / (2H + 1))` at which `eta` is read off, kept in `1..=N-1`.
pub fn eta_level(n_exp: u32, h: f64) -> u32 {
    let j = libm::floor(n_exp as f64 / (2.0 * h + 1.0));
    (j.max(1.0) as u32).min(n_exp.saturating_sub(1).max(1))
}

fn eta_step(
    levels: &EnergyLevels,
    h: f64,
    table: &KappaTable,
    bounds: &ParamBounds,
    flags: &mut Vec<Flag>,
    q: &mut impl FnMut(u32, u32) -> Result<f64>,
) -> Result<f64> {
    let n = levels.n_exp;
    let j = eta_level(n, h);
    let p = n - j;
    let radicand = q(j, p)? * libm::exp2(2.0 * j as f64 * h) / table.kappa(h, p, 1)?;
    if radicand >= 0.0 {
        Ok(bounds.clamp_eta(libm::sqrt(radicand)))
    } else {
        add_flag(flags, Flag::NegativeRadicand);
        Ok(bounds.eta_minus)
    }
}

/// First-stage estimator of `eta`:
/// `sqrt(Q_{j,N-j} 2^{2jH} / kappa_{N-j,1}(H))` at `j = floor(N / (2H + 1))`,
/// clamped. A negative radicand gives `eta_-` and a flag.
pub fn estimate_eta0_general(
    levels: &EnergyLevels,
    h0: f64,
    table: &KappaTable,
    config: &EstimatorConfig,
) -> Result<(f64, Vec<Flag>)> {
    check_model(levels, ModelKind::General)?;
    let mut flags = Vec::new();
    let eta = eta_step(levels, h0, table, &config.bounds, &mut flags, &mut |j, p| levels.get(j, p))?;
    Ok((eta, flags))
}

/// Outcome of one debiasing pass.
#[derive(Debug, Clone, PartialEq)]
pub struct RefineStep {
    pub h: f64,
    pub eta: f64,
    pub j_star: u32,
    pub flags: Vec<Flag>,
}

/// One debiasing pass. Every energy is corrected by `B^{(S)}` at
/// `prev = (H, eta)`, the level and `H` are re-selected on the corrected
/// ladder, and `eta` is re-estimated with the bias evaluated at the new `H`
/// and the previous `eta`.
pub fn refine(
    levels: &EnergyLevels,
    prev: (f64, f64),
    table: &KappaTable,
    config: &EstimatorConfig,
) -> Result<RefineStep> {
    check_model(levels, ModelKind::General)?;
    let (prev_h, prev_eta) = prev;
    if !config.bounds.contains(prev_h, prev_eta) {
        return Err(Error::Domain(format!("previous estimate ({prev_h}, {prev_eta}) outside the bounds")));
    }
    let s = config.order;
    let mut flags = Vec::new();
    let (h, j_star) = h_step(levels, &config.bounds, &mut flags, &mut |j, p| {
        Ok(levels.get(j, p)? - bias_term(j, p, s, prev_h, prev_eta, table)?)
    })?;
    let eta = eta_step(levels, h, table, &config.bounds, &mut flags, &mut |j, p| {
        Ok(levels.get(j, p)? - bias_term(j, p, s, h, prev_eta, table)?)
    })?;
    Ok(RefineStep { h, eta, j_star, flags })
}

/// First stage followed by `config.m_opt` debiasing passes; the trajectory
/// holds `m_opt + 1` snapshots.
pub fn iterate(levels: &EnergyLevels, table: &KappaTable, config: &EstimatorConfig) -> Result<EstimateResult> {
    check_model(levels, ModelKind::General)?;
    let mut flags = Vec::new();
    let (h0, j0) = h_step(levels, &config.bounds, &mut flags, &mut |j, p| levels.get(j, p))?;
    let eta0 = eta_step(levels, h0, table, &config.bounds, &mut flags, &mut |j, p| levels.get(j, p))?;
    let mut trajectory = Vec::with_capacity(config.m_opt + 1);
    trajectory.push(Snapshot { m: 0, h: h0, eta: Some(eta0), level: j0 });
    let (mut h, mut eta) = (h0, eta0);
    for m in 1..=config.m_opt {
        let step = refine(levels, (h, eta), table, config)?;
        for f in step.flags {
            add_flag(&mut flags, f);
        }
        (h, eta) = (step.h, step.eta);
        trajectory.push(Snapshot { m, h, eta: Some(eta), level: step.j_star });
    }
    Ok(EstimateResult::from_snapshots(trajectory, config.m_opt, flags))
}

/// Full general-model pipeline from prices.
pub fn estimate_general(prices: &PriceSeries, table: &KappaTable, config: &EstimatorConfig) -> Result<EstimateResult> {
    let levels = EnergyLevels::general_empirical(prices)?;
    iterate(&levels, table, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kappa::kappa_first_order;
    use crate::quadrature::QuadSpec;
    use crate::wavelet::EnergyKind;
    use crate::HurstParam;

    fn bounds() -> ParamBounds {
        ParamBounds::new(0.1, 0.5, 0.5, 2.0).unwrap()
    }

    fn geometric_ladder(model: ModelKind, n_exp: u32, grid_exp: u32, h: f64, scale: f64) -> EnergyLevels {
        let mut levels = EnergyLevels::new(EnergyKind::Empirical, model, n_exp, grid_exp);
        for (j, p) in EnergyLevels::ladder_indices(model, grid_exp) {
            levels.insert(j, p, scale * libm::exp2(-2.0 * h * j as f64));
        }
        levels
    }

    #[test]
    fn m_opt_formula_values() {
        assert_eq!(m_opt(0.1), 2);
        assert_eq!(m_opt(0.01), 24);
        assert_eq!(m_opt(0.25), 0);
        assert_eq!(m_opt(0.4), 0);
        assert_eq!(m_opt(0.05), 4);
    }

    #[test]
    fn default_threshold_values() {
        let b = ParamBounds::new(0.1, 0.5, 1.0, 2.0).unwrap();
        assert!((default_nu0(&b) - 1.5).abs() < 1e-15);
        let b2 = ParamBounds::new(0.1, 0.5, 2.0, 3.0).unwrap();
        assert!((default_nu0(&b2) - 4.0 * default_nu0(&b)).abs() < 1e-14);
        let b3 = ParamBounds::new(0.1, 0.999_999_999, 1.0, 2.0).unwrap();
        assert!(default_nu0(&b3) < 1e-7);
        assert!(default_nu0(&b) < nu0_ceiling(&b));
    }

    #[test]
    fn config_defaults_per_model() {
        let c = EstimatorConfig::for_model(ModelKind::General, bounds()).unwrap();
        assert_eq!((c.order, c.m_opt), (4, 2));
        let c = EstimatorConfig::for_model(ModelKind::Piecewise, bounds()).unwrap();
        assert_eq!((c.order, c.m_opt), (1, 0));
        let mut bad = c;
        bad.nu0 = 10.0;
        assert!(bad.validate().is_err());
        bad.nu0 = 0.0;
        assert!(matches!(bad.validate(), Err(Error::Degenerate(_))));
    }

    #[test]
    fn flag_names_round_trip() {
        for f in Flag::ALL {
            assert_eq!(f.as_str().parse::<Flag>().unwrap(), f);
        }
        assert!("bogus".parse::<Flag>().is_err());
    }

    #[test]
    fn piecewise_selection_takes_largest_level() {
        let (n_exp, g) = (12, 8);
        let config = EstimatorConfig::for_model(ModelKind::Piecewise, bounds()).unwrap();
        let mut levels = EnergyLevels::new(EnergyKind::Empirical, ModelKind::Piecewise, n_exp, g);
        for (j, p) in EnergyLevels::ladder_indices(ModelKind::Piecewise, g) {
            levels.insert(j, p, 2.0 * config.nu0 * libm::exp2(j as f64) / libm::exp2(n_exp as f64));
        }
        assert_eq!(select_level_piecewise(&levels, config.nu0).unwrap(), (g - 1, false));
        for (j, p) in EnergyLevels::ladder_indices(ModelKind::Piecewise, g) {
            levels.insert(j, p, 0.0);
        }
        assert_eq!(select_level_piecewise(&levels, config.nu0).unwrap(), (2, true));
        let r = estimate_h_piecewise(&levels, &config).unwrap();
        assert_eq!(r.h_hat, config.bounds.h_plus);
        assert_eq!(r.flags, alloc::vec![Flag::DegenerateSelection, Flag::NonPositiveRatio]);
    }

    #[test]
    fn empty_and_missing_levels_error() {
        let config = EstimatorConfig::for_model(ModelKind::Piecewise, bounds()).unwrap();
        let empty = EnergyLevels::new(EnergyKind::Empirical, ModelKind::Piecewise, 10, 6);
        assert_eq!(estimate_h_piecewise(&empty, &config), Err(Error::EmptyLadder));
        let mut partial = EnergyLevels::new(EnergyKind::Empirical, ModelKind::Piecewise, 10, 6);
        partial.insert(2, 3, 1.0);
        assert!(matches!(estimate_h_piecewise(&partial, &config), Err(Error::MissingLevel { .. })));
    }

    #[test]
    fn ratio_inversion_is_exact() {
        let config = EstimatorConfig::for_model(ModelKind::Piecewise, bounds()).unwrap();
        for h in [0.12, 0.25, 0.3, 0.4771, 0.49] {
            let levels = geometric_ladder(ModelKind::Piecewise, 14, 8, h, 10.0);
            let r = estimate_h_piecewise(&levels, &config).unwrap();
            assert!((r.h_hat - h).abs() < 1e-12, "{h}: {}", r.h_hat);
            assert!(r.flags.is_empty());
            let general = EstimatorConfig::for_model(ModelKind::General, bounds()).unwrap();
            let levels = geometric_ladder(ModelKind::General, 12, 12, h, 10.0);
            let r = estimate_h0_general(&levels, &general).unwrap();
            assert!((r.h_hat - h).abs() < 1e-12, "{h}: {}", r.h_hat);
        }
    }

    fn first_order_table(grid: Vec<f64>, p_max: u32) -> KappaTable {
        let mut values = Vec::new();
        for &h in &grid {
            for p in 0..=p_max {
                values.push(kappa_first_order(HurstParam::new(h).unwrap(), p));
            }
        }
        KappaTable::from_values(grid, p_max, 1, QuadSpec::DEFAULT, values).unwrap()
    }

    #[test]
    fn eta_inversion_and_negative_radicand() {
        let b = bounds();
        let mut config = EstimatorConfig::for_model(ModelKind::General, b).unwrap();
        config.order = 1;
        let (n_exp, h, eta) = (12u32, 0.3, 1.3);
        let table = first_order_table(alloc::vec![0.1, 0.3, 0.5], n_exp);
        let mut levels = EnergyLevels::new(EnergyKind::Empirical, ModelKind::General, n_exp, n_exp);
        for (j, p) in EnergyLevels::ladder_indices(ModelKind::General, n_exp) {
            let k = table.kappa(h, p, 1).unwrap();
            levels.insert(j, p, eta * eta * libm::exp2(-2.0 * h * j as f64) * k);
        }
        let (got, flags) = estimate_eta0_general(&levels, h, &table, &config).unwrap();
        assert!((got - eta).abs() < 1e-12);
        assert!(flags.is_empty());
        let j = eta_level(n_exp, h);
        levels.insert(j, n_exp - j, -1.0);
        let (got, flags) = estimate_eta0_general(&levels, h, &table, &config).unwrap();
        assert_eq!(got, b.eta_minus);
        assert_eq!(flags, alloc::vec![Flag::NegativeRadicand]);
    }

    #[test]
    fn first_order_refine_is_reestimation() {
        let b = bounds();
        let mut config = EstimatorConfig::for_model(ModelKind::General, b).unwrap();
        config.order = 1;
        let table = first_order_table(alloc::vec![0.1, 0.3, 0.5], 12);
        let levels = geometric_ladder(ModelKind::General, 12, 12, 0.27, 3.0);
        let first = estimate_h0_general(&levels, &config).unwrap();
        let step = refine(&levels, (0.4, 1.0), &table, &config).unwrap();
        assert_eq!(step.h, first.h_hat);
        assert_eq!(step.j_star, first.j_star);
    }

    #[test]
    fn exact_expectation_ladder_is_a_fixed_point() {
        let b = ParamBounds::new(0.25, 0.5, 0.5, 2.0).unwrap();
        let config = EstimatorConfig::for_model(ModelKind::General, b).unwrap();
        assert_eq!(config.order, 2);
        let (n_exp, h, eta) = (10u32, 0.3, 1.2);
        let grid = alloc::vec![0.25, 0.3, 0.35, 0.4, 0.45, 0.5];
        let table = KappaTable::build(grid, n_exp, config.order, QuadSpec::DEFAULT).unwrap();
        let mut levels = EnergyLevels::new(EnergyKind::True, ModelKind::General, n_exp, n_exp);
        for (j, p) in EnergyLevels::ladder_indices(ModelKind::General, n_exp) {
            let mut q = 0.0;
            for a in 1..=config.order {
                let af = a as f64;
                q += libm::pow(eta, 2.0 * af) * libm::exp2(-2.0 * af * h * j as f64) * table.kappa(h, p, a).unwrap();
            }
            levels.insert(j, p, q);
        }
        let step = refine(&levels, (h, eta), &table, &config).unwrap();
        assert!((step.h - h).abs() < 1e-10, "{}", step.h);
        assert!((step.eta - eta).abs() < 1e-10, "{}", step.eta);

        let mut config = config;
        config.m_opt = 4;
        let r = iterate(&levels, &table, &config).unwrap();
        assert_eq!(r.trajectory.len(), 5);
        let mut prev_change = f64::INFINITY;
        for w in r.trajectory.windows(2).skip(1) {
            let change = (w[1].h - w[0].h).abs();
            assert!(change <= prev_change);
            prev_change = change;
        }
        for s in &r.trajectory {
            assert!(config.bounds.contains(s.h, s.eta.unwrap()));
        }
    }
}
