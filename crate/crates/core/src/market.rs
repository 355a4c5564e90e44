//! Synthetic high-frequency prices under the two volatility models.
//!
//! In the piecewise model the log-variance is `eta W^H` frozen at the left
//! end of each of `2^{N_vol}` blocks. In the general model it is
//! `eta W^H_t` itself and each observation interval receives the left
//! Riemann sum of `exp(eta W^H)` over an oversampled grid. Given the
//! variance path, price increments are exact conditional Gaussians.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{domain, Error, Result};
use crate::fbm::{FgnSampler, HurstParam};

/// Which volatility model generated (or is assumed for) a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelKind {
    Piecewise,
    General,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Piecewise => "piecewise",
            ModelKind::General => "general",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "piecewise" => Ok(ModelKind::Piecewise),
            "general" => Ok(ModelKind::General),
            other => Err(Error::InvalidConfig(format!("unknown model kind '{other}'"))),
        }
    }
}

/// Compact parameter domain `[H_-, H_+] x [eta_-, eta_+]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamBounds {
    pub h_minus: f64,
    pub h_plus: f64,
    pub eta_minus: f64,
    pub eta_plus: f64,
}

impl ParamBounds {
    pub fn new(h_minus: f64, h_plus: f64, eta_minus: f64, eta_plus: f64) -> Result<Self> {
        let b = Self { h_minus, h_plus, eta_minus, eta_plus };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h_minus > 0.0 && self.h_minus < self.h_plus && self.h_plus < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < H_- < H_+ < 1, got [{}, {}]",
                self.h_minus, self.h_plus
            )));
        }
        if !(self.eta_minus > 0.0 && self.eta_minus <= self.eta_plus && self.eta_plus.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < eta_- <= eta_+, got [{}, {}]",
                self.eta_minus, self.eta_plus
            )));
        }
        Ok(())
    }

    /// Extra requirement of the continuous model.
    pub fn validate_for(&self, kind: ModelKind) -> Result<()> {
        self.validate()?;
        if kind == ModelKind::General && self.h_plus >= 0.75 {
            return Err(Error::InvalidConfig(format!("general model needs H_+ < 3/4, got {}", self.h_plus)));
        }
        Ok(())
    }

    pub fn clamp_h(&self, h: f64) -> f64 {
        h.clamp(self.h_minus, self.h_plus)
    }

    pub fn clamp_eta(&self, eta: f64) -> f64 {
        eta.clamp(self.eta_minus, self.eta_plus)
    }

    pub fn contains(&self, h: f64, eta: f64) -> bool {
        (self.h_minus..=self.h_plus).contains(&h) && (self.eta_minus..=self.eta_plus).contains(&eta)
    }
}

/// True parameters of a simulation plus the domain they are known to lie in.
///
/// Fields are public so that degenerate inputs (such as `eta = 0`) can be
/// built directly for testing; [`ModelParams::new`] enforces the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub hurst: HurstParam,
    pub eta: f64,
    pub sigma0: f64,
    pub bounds: ParamBounds,
}

impl ModelParams {
    pub fn new(h: f64, eta: f64, bounds: ParamBounds) -> Result<Self> {
        bounds.validate()?;
        if !bounds.contains(h, eta) {
            return Err(Error::InvalidConfig(format!("(H={h}, eta={eta}) outside the parameter bounds")));
        }
        Ok(Self { hurst: HurstParam::new(h)?, eta, sigma0: 1.0, bounds })
    }

    fn check_simulable(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(domain(format!("eta must be finite and non-negative, got {}", self.eta)));
        }
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return Err(domain(format!("sigma0 must be positive, got {}", self.sigma0)));
        }
        Ok(())
    }
}

/// Prices `S_{i/n}`, `i = 0..=n`, with `n = 2^N` and `S_0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub n_exp: u32,
    pub values: Vec<f64>,
    pub kind: ModelKind,
    /// Block exponent of the piecewise model (`delta = 2^{-N_vol}`).
    pub vol_exp: Option<u32>,
    pub seed: u64,
}

impl PriceSeries {
    pub fn new(n_exp: u32, values: Vec<f64>, kind: ModelKind, vol_exp: Option<u32>, seed: u64) -> Result<Self> {
        if n_exp > 40 {
            return Err(Error::InvalidConfig(format!("grid exponent {n_exp} too large")));
        }
        let n = 1usize << n_exp;
        if values.len() != n + 1 {
            return Err(Error::InvalidConfig(format!(
                "expected {} prices for N={n_exp}, got {}",
                n + 1,
                values.len()
            )));
        }
        if let Some(v) = vol_exp {
            if v > n_exp {
                return Err(Error::InvalidConfig(format!("N_vol={v} exceeds N={n_exp}")));
            }
        }
        if kind == ModelKind::Piecewise && vol_exp.is_none() {
            return Err(Error::InvalidConfig("piecewise series needs a block exponent".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(domain("non-finite price"));
        }
        Ok(Self { n_exp, values, kind, vol_exp, seed })
    }

    /// Number of observation intervals `n`.
    pub fn len(&self) -> usize {
        self.values.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn increments(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.windows(2).map(|w| w[1] - w[0])
    }

    /// Observations per volatility block (`m = n delta`).
    pub fn block_size(&self) -> Option<usize> {
        self.vol_exp.map(|v| 1usize << (self.n_exp - v))
    }

    /// Same series with every price multiplied by `c`.
    pub fn rescaled(&self, c: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * c).collect(), ..self.clone() }
    }
}

/// Block log realized variances `X_i = log(delta^{-1} sum_{block i} (dS)^2)`,
/// so that `X_i = eta W^H_{i delta} + log(chi2_m / m)`.
///
/// Each value is also kept split as `log(mantissa) + exponent * ln 2`, with
/// the binary exponent as an integer. Differences of the integer parts are
/// exact, which makes detail coefficients bit-identical when all prices are
/// multiplied by a power of two.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRVSeries {
    pub values: Vec<f64>,
    pub vol_exp: u32,
    pub mantissa_logs: Vec<f64>,
    pub exponents: Vec<i64>,
}

impl LogRVSeries {
    /// Series given directly by its values (no exact split).
    pub fn from_values(values: Vec<f64>, vol_exp: u32) -> Self {
        let exponents = alloc::vec![0; values.len()];
        Self { mantissa_logs: values.clone(), values, vol_exp, exponents }
    }

    /// Series from positive block sums `sum_{block i} (dS)^2`.
    pub fn from_block_sums(sums: &[f64], vol_exp: u32) -> Result<Self> {
        let mut values = Vec::with_capacity(sums.len());
        let mut mantissa_logs = Vec::with_capacity(sums.len());
        let mut exponents = Vec::with_capacity(sums.len());
        for (i, &rv) in sums.iter().enumerate() {
            if !(rv > 0.0 && rv.is_finite()) {
                return Err(Error::NonPositiveLog(i));
            }
            let (mant, e) = libm::frexp(rv);
            let lm = libm::log(mant);
            let e = i64::from(e) + i64::from(vol_exp);
            mantissa_logs.push(lm);
            exponents.push(e);
            values.push(lm + e as f64 * core::f64::consts::LN_2);
        }
        Ok(Self { values, vol_exp, mantissa_logs, exponents })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_exponent(name: &str, e: u32) -> Result<()> {
    if e > 30 {
        return Err(Error::InvalidConfig(format!("{name}={e} is too large")));
    }
    Ok(())
}

fn gaussian_increments(rng: &mut crate::SimRng, variances: impl Iterator<Item = f64>, n: usize) -> Vec<f64> {
    let mut values = Vec::with_capacity(n + 1);
    let mut s = 0.0;
    values.push(s);
    for var in variances {
        let xi: f64 = StandardNormal.sample(rng);
        s += libm::sqrt(var) * xi;
        values.push(s);
    }
    values
}

/// Reusable piecewise-model simulator.
pub struct PiecewiseSimulator {
    params: ModelParams,
    n_exp: u32,
    vol_exp: u32,
    sampler: FgnSampler,
}

/// A piecewise-model draw together with the latent block log-variances
/// `eta W^H_{i delta}`, `i < 2^{N_vol}`.
#[derive(Debug, Clone)]
pub struct PiecewiseSample {
    pub prices: PriceSeries,
    pub latent: Vec<f64>,
}

impl PiecewiseSimulator {
    pub fn new(params: ModelParams, n_exp: u32, vol_exp: u32) -> Result<Self> {
        check_exponent("N", n_exp)?;
        if vol_exp > n_exp {
            return Err(Error::InvalidConfig(format!("N_vol={vol_exp} exceeds N={n_exp}")));
        }
        params.check_simulable()?;
        let sampler = FgnSampler::new(params.hurst, 1usize << vol_exp)?;
        Ok(Self { params, n_exp, vol_exp, sampler })
    }

    pub fn run(&self, seed: u64) -> Result<PiecewiseSample> {
        let mut rng = crate::rng_from_seed(seed);
        let blocks = 1usize << self.vol_exp;
        let n = 1usize << self.n_exp;
        let m = n / blocks;
        let path = self.sampler.sample_path(&mut rng, 1.0 / blocks as f64);
        let latent: Vec<f64> = path[..blocks].iter().map(|w| self.params.eta * w).collect();
        let s2 = self.params.sigma0 * self.params.sigma0;
        let dt = 1.0 / n as f64;
        let variances = (0..n).map(|i| s2 * libm::exp(latent[i / m]) * dt);
        let values = gaussian_increments(&mut rng, variances, n);
        let prices = PriceSeries::new(self.n_exp, values, ModelKind::Piecewise, Some(self.vol_exp), seed)?;
        Ok(PiecewiseSample { prices, latent })
    }
}

pub fn simulate_piecewise(params: ModelParams, n_exp: u32, vol_exp: u32, seed: u64) -> Result<PriceSeries> {
    Ok(PiecewiseSimulator::new(params, n_exp, vol_exp)?.run(seed)?.prices)
}

/// Reusable general-model simulator.
pub struct GeneralSimulator {
    params: ModelParams,
    n_exp: u32,
    oversample: usize,
    sampler: FgnSampler,
}

/// A general-model draw together with the integrated variance of every
/// observation interval.
#[derive(Debug, Clone)]
pub struct GeneralSample {
    pub prices: PriceSeries,
    pub integrated_variance: Vec<f64>,
}

impl GeneralSimulator {
    pub fn new(params: ModelParams, n_exp: u32, oversample: usize) -> Result<Self> {
        check_exponent("N", n_exp)?;
        if oversample == 0 || !oversample.is_power_of_two() {
            return Err(Error::InvalidConfig(format!("oversample must be a power of two, got {oversample}")));
        }
        params.check_simulable()?;
        let fine = (1usize << n_exp)
            .checked_mul(oversample)
            .ok_or_else(|| Error::InvalidConfig("fine grid too large".into()))?;
        let sampler = FgnSampler::new(params.hurst, fine)?;
        Ok(Self { params, n_exp, oversample, sampler })
    }

    pub fn run(&self, seed: u64) -> Result<GeneralSample> {
        let mut rng = crate::rng_from_seed(seed);
        let n = 1usize << self.n_exp;
        let fine = n * self.oversample;
        let path = self.sampler.sample_path(&mut rng, 1.0 / fine as f64);
        let s2 = self.params.sigma0 * self.params.sigma0;
        let eta = self.params.eta;
        let integrated_variance: Vec<f64> = path[..fine]
            .chunks_exact(self.oversample)
            .map(|c| s2 * c.iter().map(|w| libm::exp(eta * w)).sum::<f64>() / fine as f64)
            .collect();
        let values = gaussian_increments(&mut rng, integrated_variance.iter().copied(), n);
        let prices = PriceSeries::new(self.n_exp, values, ModelKind::General, None, seed)?;
        Ok(GeneralSample { prices, integrated_variance })
    }
}

pub fn simulate_general(params: ModelParams, n_exp: u32, oversample: usize, seed: u64) -> Result<PriceSeries> {
    Ok(GeneralSimulator::new(params, n_exp, oversample)?.run(seed)?.prices)
}

/// Block log realized variances of a piecewise-model series.
pub fn log_realized_variance(prices: &PriceSeries) -> Result<LogRVSeries> {
    let vol_exp = match (prices.kind, prices.vol_exp) {
        (ModelKind::Piecewise, Some(v)) => v,
        _ => return Err(Error::InvalidConfig("log realized variance needs a piecewise series".into())),
    };
    let m = 1usize << (prices.n_exp - vol_exp);
    let incs: Vec<f64> = prices.increments().collect();
    let sums: Vec<f64> = incs.chunks_exact(m).map(|block| block.iter().map(|d| d * d).sum()).collect();
    LogRVSeries::from_block_sums(&sums, vol_exp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{chi2_log_mean, chi2_log_variance};

    fn bounds() -> ParamBounds {
        ParamBounds::new(0.05, 0.7, 0.1, 3.0).unwrap()
    }

    fn flat(h: f64) -> ModelParams {
        ModelParams { hurst: HurstParam::new(h).unwrap(), eta: 0.0, sigma0: 1.0, bounds: bounds() }
    }

    #[test]
    fn model_kind_round_trip() {
        for k in [ModelKind::Piecewise, ModelKind::General] {
            assert_eq!(k.as_str().parse::<ModelKind>().unwrap(), k);
        }
        assert!("other".parse::<ModelKind>().is_err());
    }

    #[test]
    fn bounds_validation() {
        assert!(ParamBounds::new(0.3, 0.2, 1.0, 2.0).is_err());
        assert!(ParamBounds::new(0.1, 0.5, 0.0, 2.0).is_err());
        let b = ParamBounds::new(0.1, 0.8, 0.5, 2.0).unwrap();
        assert!(b.validate_for(ModelKind::General).is_err());
        assert!(b.validate_for(ModelKind::Piecewise).is_ok());
        assert!(ModelParams::new(0.9, 1.0, b).is_err());
    }

    #[test]
    fn piecewise_rejects_bad_exponents() {
        assert!(matches!(PiecewiseSimulator::new(flat(0.3), 6, 7), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn simulations_are_deterministic() {
        let p = ModelParams::new(0.3, 1.0, bounds()).unwrap();
        assert_eq!(simulate_piecewise(p, 10, 5, 3).unwrap(), simulate_piecewise(p, 10, 5, 3).unwrap());
        assert_eq!(simulate_general(p, 10, 4, 3).unwrap(), simulate_general(p, 10, 4, 3).unwrap());
        assert_ne!(simulate_general(p, 10, 4, 3).unwrap(), simulate_general(p, 10, 4, 4).unwrap());
    }

    #[test]
    fn flat_general_increments_are_standard() {
        let s = simulate_general(flat(0.3), 14, 2, 11).unwrap();
        let n = s.len() as f64;
        let z: Vec<f64> = s.increments().map(|d| d * libm::sqrt(n)).collect();
        let mean = z.iter().sum::<f64>() / n;
        let var = z.iter().map(|x| x * x).sum::<f64>() / n;
        assert!(mean.abs() < 4.0 / libm::sqrt(n));
        assert!((var - 1.0).abs() < 4.0 * libm::sqrt(2.0 / n));
    }

    #[test]
    fn flat_blocks_are_log_chi_square() {
        // m = 4: X_i = log(chi2_4 / 4)
        let mut xs = Vec::new();
        for seed in 0..20 {
            let s = simulate_piecewise(flat(0.3), 12, 10, seed).unwrap();
            xs.extend(log_realized_variance(&s).unwrap().values);
        }
        let k = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / k;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1.0);
        let want_mean = chi2_log_mean(4).unwrap();
        let want_var = chi2_log_variance(4).unwrap();
        assert!((mean - want_mean).abs() < 4.0 * libm::sqrt(want_var / k), "{mean} {want_mean}");
        assert!((var - want_var).abs() < 0.05 * want_var, "{var} {want_var}");
    }

    #[test]
    fn single_block_uses_all_increments() {
        let p = ModelParams::new(0.3, 1.0, bounds()).unwrap();
        let s = simulate_piecewise(p, 8, 0, 5).unwrap();
        let x = log_realized_variance(&s).unwrap();
        let rv: f64 = s.increments().map(|d| d * d).sum();
        assert!((x.values[0] - libm::log(rv)).abs() < 1e-14);
    }

    #[test]
    fn log_rv_needs_piecewise() {
        let s = simulate_general(flat(0.3), 6, 1, 1).unwrap();
        assert!(log_realized_variance(&s).is_err());
        let z = PriceSeries::new(2, alloc::vec![0.0; 5], ModelKind::Piecewise, Some(1), 0).unwrap();
        assert_eq!(log_realized_variance(&z), Err(Error::NonPositiveLog(0)));
        let x = LogRVSeries::from_block_sums(&[0.75, 12.0], 3).unwrap();
        assert!((x.values[1] - libm::log(96.0)).abs() < 1e-14);
        assert_eq!(x.exponents, alloc::vec![3, 7]);
    }
}
