//! Fractional Brownian motion: covariance kernels and exact sampling.
//!
//! Paths are produced from fractional Gaussian noise (the increment
//! sequence) by circulant embedding, then cumulatively summed. If the
//! embedding ever produced a materially negative eigenvalue the sampler
//! switches to the Durbin-Levinson recursion, which is exact but quadratic.

use alloc::vec::Vec;
use num_complex::Complex64;
use rand_core::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{domain, Error, Result};
use crate::fft::Fft;

/// Relative tolerance below which negative embedding eigenvalues are
/// treated as rounding noise.
pub const EIGEN_TOLERANCE: f64 = 1e-10;
/// Largest number of increments handled by the quadratic fallback.
pub const MAX_FALLBACK_POINTS: usize = 1 << 16;

/// Hurst index, strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct HurstParam(f64);

impl HurstParam {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(domain(alloc::format!("Hurst index {value} outside (0,1)")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// A sampled path on an equispaced grid starting at time 0.
#[derive(Debug, Clone, PartialEq)]
pub struct FbmPath {
    pub hurst: HurstParam,
    /// Number of grid points (increments + 1).
    pub grid_size: usize,
    /// Time between consecutive grid points.
    pub step: f64,
    /// `values[k]` is the path at time `k * step`; `values[0] == 0`.
    pub values: Vec<f64>,
    pub seed: u64,
}

#[inline]
pub(crate) fn pow_abs(x: f64, e: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        libm::pow(libm::fabs(x), e)
    }
}

/// `Cov(W_s, W_t) = (s^{2H} + t^{2H} - |t-s|^{2H}) / 2`.
pub fn fbm_covariance(s: f64, t: f64, h: HurstParam) -> Result<f64> {
    if !(s >= 0.0 && t >= 0.0) {
        return Err(domain("fbm covariance needs non-negative times"));
    }
    let e = 2.0 * h.0;
    Ok(0.5 * (pow_abs(s, e) + pow_abs(t, e) - pow_abs(t - s, e)))
}

/// Correlation kernel of unit-spacing second differences:
/// `phi(x) = 1/2 sum_{k=0}^{4} (-1)^{k+1} C(4,k) |x+k-2|^{2H}`.
pub fn phi_corr(x: f64, h: HurstParam) -> f64 {
    const BINOM: [f64; 5] = [1.0, 4.0, 6.0, 4.0, 1.0];
    let e = 2.0 * h.0;
    let mut acc = 0.0;
    for (k, c) in BINOM.iter().enumerate() {
        let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
        acc += sign * c * pow_abs(x + k as f64 - 2.0, e);
    }
    0.5 * acc
}

/// Autocovariance of unit-spacing increments (fractional Gaussian noise):
/// `D(x) = (|x+1|^{2H} - 2|x|^{2H} + |x-1|^{2H}) / 2`.
pub fn first_diff_corr(x: f64, h: HurstParam) -> f64 {
    let e = 2.0 * h.0;
    0.5 * (pow_abs(x + 1.0, e) - 2.0 * pow_abs(x, e) + pow_abs(x - 1.0, e))
}

/// Which exact algorithm a sampler uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMethod {
    CirculantEmbedding,
    DurbinLevinson,
}

enum Engine {
    Circulant { fft: Fft, scale: Vec<f64> },
    Levinson { autocov: Vec<f64> },
}

/// Reusable generator of unit-spacing fractional Gaussian noise of fixed
/// length. Construction does the expensive spectral work once.
pub struct FgnSampler {
    hurst: HurstParam,
    n: usize,
    engine: Engine,
}

impl FgnSampler {
    /// Sampler for `n` increments; `n` must be a power of two.
    pub fn new(hurst: HurstParam, n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(domain("increment count must be a positive power of two"));
        }
        let autocov: Vec<f64> = (0..=n).map(|k| first_diff_corr(k as f64, hurst)).collect();
        let m = 2 * n;
        let mut buf: Vec<Complex64> = (0..m)
            .map(|k| {
                let lag = if k <= n { k } else { m - k };
                Complex64::new(autocov[lag], 0.0)
            })
            .collect();
        let fft = Fft::new(m);
        fft.forward(&mut buf);
        let lmax = buf.iter().map(|c| c.re).fold(f64::MIN, f64::max);
        let lmin = buf.iter().map(|c| c.re).fold(f64::MAX, f64::min);
        if lmin < -EIGEN_TOLERANCE * lmax {
            return Self::levinson(hurst, n, autocov);
        }
        let scale = buf
            .iter()
            .map(|c| libm::sqrt(c.re.max(0.0) / m as f64))
            .collect();
        Ok(Self { hurst, n, engine: Engine::Circulant { fft, scale } })
    }

    /// Sampler that always uses the quadratic Durbin-Levinson recursion.
    pub fn new_levinson(hurst: HurstParam, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(domain("increment count must be positive"));
        }
        let autocov = (0..=n).map(|k| first_diff_corr(k as f64, hurst)).collect();
        Self::levinson(hurst, n, autocov)
    }

    fn levinson(hurst: HurstParam, n: usize, autocov: Vec<f64>) -> Result<Self> {
        if n > MAX_FALLBACK_POINTS {
            return Err(Error::SimulationInfeasible { points: n });
        }
        Ok(Self { hurst, n, engine: Engine::Levinson { autocov } })
    }

    pub fn hurst(&self) -> HurstParam {
        self.hurst
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn method(&self) -> SamplingMethod {
        match self.engine {
            Engine::Circulant { .. } => SamplingMethod::CirculantEmbedding,
            Engine::Levinson { .. } => SamplingMethod::DurbinLevinson,
        }
    }

    /// Two independent noise sequences with unit-spacing covariance.
    pub fn sample_pair<R: RngCore + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        match &self.engine {
            Engine::Circulant { fft, scale } => {
                let mut buf: Vec<Complex64> = scale
                    .iter()
                    .map(|&s| {
                        let re: f64 = StandardNormal.sample(rng);
                        let im: f64 = StandardNormal.sample(rng);
                        Complex64::new(s * re, s * im)
                    })
                    .collect();
                fft.forward(&mut buf);
                let first = buf[..self.n].iter().map(|c| c.re).collect();
                let second = buf[..self.n].iter().map(|c| c.im).collect();
                (first, second)
            }
            Engine::Levinson { autocov } => {
                let a = levinson_sample(autocov, self.n, rng);
                let b = levinson_sample(autocov, self.n, rng);
                (a, b)
            }
        }
    }

    /// One noise sequence with unit-spacing covariance.
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.sample_pair(rng).0
    }

    /// fBm values at `k * step`, `k = 0..=n`, built from one noise draw.
    pub fn sample_path<R: RngCore + ?Sized>(&self, rng: &mut R, step: f64) -> Vec<f64> {
        integrate_noise(&self.sample(rng), self.hurst, step)
    }
}

fn integrate_noise(noise: &[f64], hurst: HurstParam, step: f64) -> Vec<f64> {
    let scale = libm::pow(step, hurst.value());
    let mut out = Vec::with_capacity(noise.len() + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for x in noise {
        acc += scale * x;
        out.push(acc);
    }
    out
}

fn levinson_sample<R: RngCore + ?Sized>(autocov: &[f64], n: usize, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut phi: Vec<f64> = Vec::with_capacity(n);
    let mut prev: Vec<f64> = Vec::with_capacity(n);
    let mut v = autocov[0];
    let z: f64 = StandardNormal.sample(rng);
    out.push(libm::sqrt(v) * z);
    for t in 1..n {
        let mut num = autocov[t];
        for k in 0..t - 1 {
            num -= phi[k] * autocov[t - 1 - k];
        }
        let refl = num / v;
        prev.clear();
        prev.extend_from_slice(&phi);
        phi.clear();
        for k in 0..t - 1 {
            phi.push(prev[k] - refl * prev[t - 2 - k]);
        }
        phi.push(refl);
        v *= 1.0 - refl * refl;
        let mut mean = 0.0;
        for k in 0..t {
            mean += phi[k] * out[t - 1 - k];
        }
        let z: f64 = StandardNormal.sample(rng);
        out.push(mean + libm::sqrt(v.max(0.0)) * z);
    }
    out
}

/// Exact sample of `W^H` at `k T / 2^N`, `k = 0..=2^N`.
pub fn sample_fbm(hurst: HurstParam, grid_exp: u32, horizon: f64, seed: u64) -> Result<FbmPath> {
    if grid_exp == 0 {
        return Err(domain("grid exponent must be at least 1"));
    }
    if !(horizon > 0.0) {
        return Err(domain("horizon must be positive"));
    }
    let n = 1usize << grid_exp;
    let sampler = FgnSampler::new(hurst, n)?;
    let mut rng = crate::rng_from_seed(seed);
    let step = horizon / n as f64;
    let values = sampler.sample_path(&mut rng, step);
    Ok(FbmPath { hurst, grid_size: n + 1, step, values, seed })
}
