//! Pre-averaged detail coefficients and energy levels.
//!
//! The piecewise model uses second differences of the block log-variance on
//! the `delta`-grid; the general model uses first differences of log
//! integrated variance over dyadic intervals. Empirical energies are debiased
//! by the exact mean of the squared noise part of each coefficient.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::market::{LogRVSeries, ModelKind, PriceSeries};
use crate::special::{chi2_log_variance, lognormal_sq_moments};

/// Differencing order of the detail coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetailOrder {
    /// Second differences (piecewise model).
    Second,
    /// First differences (general model).
    First,
}

fn out_of_range(msg: alloc::string::String) -> Error {
    Error::IndexOutOfRange(msg)
}

fn second_detail(
    len: usize,
    value: impl Fn(usize) -> (f64, i64),
    grid_exp: u32,
    j: u32,
    k: usize,
    p: u32,
) -> Result<f64> {
    if j < 2 || j + p > grid_exp {
        return Err(out_of_range(format!("need 2 <= j and j + p <= {grid_exp}, got j={j}, p={p}")));
    }
    if k >= 1usize << (j - 1) {
        return Err(out_of_range(format!("k={k} exceeds 2^(j-1) - 1 for j={j}")));
    }
    let scale_step = 1usize << (grid_exp - j);
    let fine_step = 1usize << (grid_exp - j - p);
    let last = (k + 2) * scale_step + ((1usize << p) - 1) * fine_step;
    if last >= len {
        return Err(out_of_range(format!("series of length {len} too short for j={j}, p={p}")));
    }
    let mut acc = 0.0;
    let mut whole = 0i64;
    for l in 0..1usize << p {
        let a = k * scale_step + l * fine_step;
        let (xa, ea) = value(a);
        let (xb, eb) = value(a + scale_step);
        let (xc, ec) = value(a + 2 * scale_step);
        acc += xa - 2.0 * xb + xc;
        whole += ea - 2 * eb + ec;
    }
    Ok((acc + whole as f64 * core::f64::consts::LN_2) * libm::exp2(-(j as f64) / 2.0 - p as f64))
}

/// `d_{j,k,p} = 2^{-j/2-p} sum_{l<2^p} (X_a - 2 X_b + X_c)` with
/// `a = (k + l 2^{-p}) 2^{-j}`, `b = a + 2^{-j}`, `c = a + 2^{1-j}`, for `X`
/// sampled on the grid `i 2^{-grid_exp}`.
pub fn detail_piecewise(x: &[f64], grid_exp: u32, j: u32, k: usize, p: u32) -> Result<f64> {
    second_detail(x.len(), |i| (x[i], 0), grid_exp, j, k, p)
}

/// [`detail_piecewise`] on block log realized variances, using their exact
/// mantissa/exponent split.
pub fn detail_log_rv(x: &LogRVSeries, j: u32, k: usize, p: u32) -> Result<f64> {
    second_detail(x.len(), |i| (x.mantissa_logs[i], x.exponents[i]), x.vol_exp, j, k, p)
}

/// `d_{j,k,p} = 2^{-p-j/2} (B_{k+1} - B_k)` where `B_k` sums the `2^p`
/// values of `logvals` inside `[k 2^{-j}, (k+1) 2^{-j})`; `logvals` holds one
/// value per interval of length `2^{-j-p}`.
pub fn detail_general(logvals: &[f64], j: u32, k: usize, p: u32) -> Result<f64> {
    if j + p > 40 || logvals.len() != 1usize << (j + p) {
        return Err(out_of_range(format!(
            "expected 2^(j+p) = 2^{} log values, got {}",
            j + p,
            logvals.len()
        )));
    }
    if j == 0 || k >= 1usize << (j - 1) {
        return Err(out_of_range(format!("k={k} outside 0..2^(j-1) for j={j}")));
    }
    let w = 1usize << p;
    let left: f64 = logvals[k * w..(k + 1) * w].iter().sum();
    let right: f64 = logvals[(k + 1) * w..(k + 2) * w].iter().sum();
    Ok((right - left) * libm::exp2(-(p as f64) - j as f64 / 2.0))
}

/// Logs of sums of consecutive groups of `2^{group_exp}` positive values.
pub fn grouped_logs(values: &[f64], group_exp: u32) -> Result<Vec<f64>> {
    let g = 1usize << group_exp;
    if !values.len().is_multiple_of(g) {
        return Err(out_of_range(format!("{} values do not split into groups of {g}", values.len())));
    }
    values
        .chunks_exact(g)
        .enumerate()
        .map(|(i, c)| {
            let s: f64 = c.iter().sum();
            if s > 0.0 {
                Ok(libm::log(s))
            } else {
                Err(Error::NonPositiveLog(i))
            }
        })
        .collect()
}

/// Logs of squared price increments over `2^{level}` equal intervals.
pub fn increment_logs(prices: &PriceSeries, level: u32) -> Result<Vec<f64>> {
    if level > prices.n_exp {
        return Err(out_of_range(format!("level {level} finer than the observation grid N={}", prices.n_exp)));
    }
    let stride = 1usize << (prices.n_exp - level);
    prices
        .values
        .iter()
        .step_by(stride)
        .collect::<Vec<_>>()
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let d = w[1] - w[0];
            if d != 0.0 {
                Ok(libm::log(d * d))
            } else {
                Err(Error::NonPositiveLog(i))
            }
        })
        .collect()
}

fn energy_piecewise_raw(x: &[f64], grid_exp: u32, j: u32, p: u32, offset: f64) -> Result<f64> {
    if j < 2 {
        return Err(out_of_range(format!("j={j} below 2 for second differences")));
    }
    let mut acc = 0.0;
    for k in 0..1usize << (j - 1) {
        let d = detail_piecewise(x, grid_exp, j, k, p)?;
        acc += d * d - offset;
    }
    Ok(acc)
}

fn energy_general_raw(logvals: &[f64], j: u32, p: u32, offset: f64) -> Result<f64> {
    if j == 0 {
        return Err(out_of_range("j must be at least 1 for first differences".into()));
    }
    let mut acc = 0.0;
    for k in 0..1usize << (j - 1) {
        let d = detail_general(logvals, j, k, p)?;
        acc += d * d - offset;
    }
    Ok(acc)
}

/// `Q_{j,p} = sum_{k < 2^{j-1}} d_{j,k,p}^2`.
///
/// For [`DetailOrder::Second`], `values` is the log-variance on the grid
/// `i 2^{-grid_exp}`. For [`DetailOrder::First`], `values` holds positive
/// integrated variances of `2^{grid_exp}` equal intervals.
pub fn energy_true(values: &[f64], grid_exp: u32, j: u32, p: u32, order: DetailOrder) -> Result<f64> {
    match order {
        DetailOrder::Second => energy_piecewise_raw(values, grid_exp, j, p, 0.0),
        DetailOrder::First => {
            if values.len() != 1usize << grid_exp || j + p > grid_exp {
                return Err(out_of_range(format!("need 2^{grid_exp} values and j + p <= {grid_exp}")));
            }
            let logs = grouped_logs(values, grid_exp - j - p)?;
            energy_general_raw(&logs, j, p, 0.0)
        }
    }
}

/// Noise bias of one squared piecewise coefficient:
/// `6 psi'(m/2) 2^{-j-p}`.
pub fn piecewise_noise_offset(j: u32, p: u32, m: u64) -> Result<f64> {
    Ok(6.0 * chi2_log_variance(m)? * libm::exp2(-((j + p) as f64)))
}

/// Noise bias of one squared general-model coefficient:
/// `2^{-j-p+1} Var(log xi^2)`.
pub fn general_noise_offset(j: u32, p: u32) -> f64 {
    libm::exp2(1.0 - (j + p) as f64) * lognormal_sq_moments().1
}

/// Debiased empirical energy of the piecewise model.
pub fn energy_empirical_piecewise(xhat: &LogRVSeries, j: u32, p: u32, m: u64) -> Result<f64> {
    let offset = piecewise_noise_offset(j, p, m)?;
    if j < 2 {
        return Err(out_of_range(format!("j={j} below 2 for second differences")));
    }
    let mut acc = 0.0;
    for k in 0..1usize << (j - 1) {
        let d = detail_log_rv(xhat, j, k, p)?;
        acc += d * d - offset;
    }
    Ok(acc)
}

/// Debiased empirical energy of the general model.
pub fn energy_empirical_general(prices: &PriceSeries, j: u32, p: u32) -> Result<f64> {
    let logs = increment_logs(prices, j + p)?;
    energy_general_raw(&logs, j, p, general_noise_offset(j, p))
}

/// Whether a ladder holds energies of the latent process or of data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyKind {
    True,
    Empirical,
}

/// Energy ladder `{Q_{j,p}}` indexed by `(j, p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLevels {
    pub kind: EnergyKind,
    pub model: ModelKind,
    /// Observation exponent `N`.
    pub n_exp: u32,
    /// Grid exponent the scales refer to: `N_vol` (piecewise) or `N`.
    pub grid_exp: u32,
    /// `(j, p) -> Q`.
    pub entries: BTreeMap<(u32, u32), f64>,
    /// `(j, p) -> ` noise bias subtracted from each squared coefficient.
    pub offsets: BTreeMap<(u32, u32), f64>,
}

impl EnergyLevels {
    pub fn new(kind: EnergyKind, model: ModelKind, n_exp: u32, grid_exp: u32) -> Self {
        Self { kind, model, n_exp, grid_exp, entries: BTreeMap::new(), offsets: BTreeMap::new() }
    }

    /// Levels `(j, G-j-1)` for `j_min <= j <= G-1` and `(j, G-j)` for
    /// `j_min + 1 <= j <= G` (piecewise) or `j_min <= j <= G` (general).
    pub fn ladder_indices(model: ModelKind, grid_exp: u32) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        let (lo, hi_lo) = match model {
            ModelKind::Piecewise => (2, 3),
            ModelKind::General => (1, 1),
        };
        for j in lo..grid_exp {
            out.push((j, grid_exp - j - 1));
        }
        for j in hi_lo..=grid_exp {
            out.push((j, grid_exp - j));
        }
        out.sort_unstable();
        out
    }

    /// Debiased empirical ladder of a piecewise-model series.
    pub fn piecewise_empirical(xhat: &LogRVSeries, n_exp: u32) -> Result<Self> {
        if xhat.vol_exp > n_exp {
            return Err(Error::InvalidConfig(format!("N_vol={} exceeds N={n_exp}", xhat.vol_exp)));
        }
        let m = 1u64 << (n_exp - xhat.vol_exp);
        let mut out = Self::new(EnergyKind::Empirical, ModelKind::Piecewise, n_exp, xhat.vol_exp);
        for (j, p) in Self::ladder_indices(ModelKind::Piecewise, xhat.vol_exp) {
            out.offsets.insert((j, p), piecewise_noise_offset(j, p, m)?);
            out.entries.insert((j, p), energy_empirical_piecewise(xhat, j, p, m)?);
        }
        Ok(out)
    }

    /// Ladder of the latent block log-variance of the piecewise model.
    pub fn piecewise_true(latent: &[f64], vol_exp: u32, n_exp: u32) -> Result<Self> {
        let mut out = Self::new(EnergyKind::True, ModelKind::Piecewise, n_exp, vol_exp);
        for (j, p) in Self::ladder_indices(ModelKind::Piecewise, vol_exp) {
            out.offsets.insert((j, p), 0.0);
            out.entries.insert((j, p), energy_true(latent, vol_exp, j, p, DetailOrder::Second)?);
        }
        Ok(out)
    }

    /// Debiased empirical ladder of a price series under the general model.
    pub fn general_empirical(prices: &PriceSeries) -> Result<Self> {
        let n_exp = prices.n_exp;
        let mut out = Self::new(EnergyKind::Empirical, ModelKind::General, n_exp, n_exp);
        let mut logs_by_level: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        for (j, p) in Self::ladder_indices(ModelKind::General, n_exp) {
            let level = j + p;
            if !logs_by_level.contains_key(&level) {
                logs_by_level.insert(level, increment_logs(prices, level)?);
            }
            let offset = general_noise_offset(j, p);
            out.offsets.insert((j, p), offset);
            out.entries.insert((j, p), energy_general_raw(&logs_by_level[&level], j, p, offset)?);
        }
        Ok(out)
    }

    /// Ladder of the true log integrated variance of the general model, from
    /// the integrated variance of each of the `2^N` observation intervals.
    pub fn general_true(integrated_variance: &[f64], n_exp: u32) -> Result<Self> {
        let mut out = Self::new(EnergyKind::True, ModelKind::General, n_exp, n_exp);
        for (j, p) in Self::ladder_indices(ModelKind::General, n_exp) {
            out.offsets.insert((j, p), 0.0);
            out.entries.insert((j, p), energy_true(integrated_variance, n_exp, j, p, DetailOrder::First)?);
        }
        Ok(out)
    }

    pub fn get(&self, j: u32, p: u32) -> Result<f64> {
        self.entries.get(&(j, p)).copied().ok_or(Error::MissingLevel { j, p })
    }

    pub fn insert(&mut self, j: u32, p: u32, q: f64) {
        self.entries.insert((j, p), q);
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        self.entries.iter().map(|(&(j, p), &q)| (j, p, q))
    }

    /// Observation count `n = 2^N` as a float.
    pub fn n(&self) -> f64 {
        libm::exp2(self.n_exp as f64)
    }
}
