//! Polygamma functions of order 0..=3 and moments of `log(chi2_m / m)`.

use crate::error::{domain, Result};

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Order of a polygamma function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolygammaOrder {
    Digamma = 0,
    Trigamma = 1,
    Tetragamma = 2,
    Pentagamma = 3,
}

impl TryFrom<u32> for PolygammaOrder {
    type Error = crate::Error;

    fn try_from(k: u32) -> Result<Self> {
        match k {
            0 => Ok(Self::Digamma),
            1 => Ok(Self::Trigamma),
            2 => Ok(Self::Tetragamma),
            3 => Ok(Self::Pentagamma),
            _ => Err(domain("polygamma order must be in 0..=3")),
        }
    }
}

const SHIFT: f64 = 16.0;
// Bernoulli numbers B_2 .. B_14.
const BERNOULLI: [f64; 7] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
];

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// `psi^{(k)}(x)` for `x > 0`.
pub fn polygamma(order: PolygammaOrder, x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain("polygamma needs a finite positive argument"));
    }
    let k = order as u32;
    let kf = factorial(k);
    let sign_k = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    // psi^{(k)}(x) = psi^{(k)}(x+1) - (-1)^k k! x^{-k-1}
    let mut shift_sum = 0.0;
    let mut y = x;
    while y < SHIFT {
        shift_sum += libm::pow(y, -(k as f64) - 1.0);
        y += 1.0;
    }
    let tail = asymptotic(k, y);
    Ok(tail - sign_k * kf * shift_sum)
}

fn asymptotic(k: u32, x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    if k == 0 {
        let mut s = libm::log(x) - 0.5 * inv;
        let mut p = inv2;
        for (i, b) in BERNOULLI.iter().enumerate() {
            let n2 = 2.0 * (i as f64 + 1.0);
            s -= b / n2 * p;
            p *= inv2;
        }
        return s;
    }
    let kf = factorial(k);
    let km1 = factorial(k - 1);
    let xk = libm::pow(x, -(k as f64));
    let mut s = km1 * xk + 0.5 * kf * xk * inv;
    let mut p = xk * inv2;
    for (i, b) in BERNOULLI.iter().enumerate() {
        let n2 = 2 * (i as u32 + 1);
        // (2n + k - 1)! / (2n)!
        let ratio: f64 = ((n2 + 1)..=(n2 + k - 1)).map(f64::from).product();
        s += b * ratio * p;
        p *= inv2;
    }
    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
    sign * s
}

fn half_dof(m: u64) -> Result<f64> {
    if m < 1 {
        return Err(domain("degrees of freedom must be at least 1"));
    }
    Ok(m as f64 / 2.0)
}

/// `E[log(chi2_m / m)] = psi(m/2) - log(m/2)`.
pub fn chi2_log_mean(m: u64) -> Result<f64> {
    let x = half_dof(m)?;
    Ok(polygamma(PolygammaOrder::Digamma, x)? - libm::log(x))
}

/// `Var(log(chi2_m / m)) = psi'(m/2)`.
pub fn chi2_log_variance(m: u64) -> Result<f64> {
    polygamma(PolygammaOrder::Trigamma, half_dof(m)?)
}

/// Exact fourth raw moment of `Y = log(chi2_m / m)`, assembled from the
/// cumulants `psi(m/2) - log(m/2), psi', psi'', psi'''`.
pub fn chi2_log_fourth_moment(m: u64) -> Result<f64> {
    let x = half_dof(m)?;
    let k1 = chi2_log_mean(m)?;
    let k2 = polygamma(PolygammaOrder::Trigamma, x)?;
    let k3 = polygamma(PolygammaOrder::Tetragamma, x)?;
    let k4 = polygamma(PolygammaOrder::Pentagamma, x)?;
    Ok(k4 + 4.0 * k3 * k1 + 3.0 * k2 * k2 + 6.0 * k2 * k1 * k1 + k1 * k1 * k1 * k1)
}

/// Mean and variance of `log(xi^2)` for a standard Gaussian `xi`:
/// `(-gamma - log 2, pi^2 / 2)`.
pub fn lognormal_sq_moments() -> (f64, f64) {
    let pi = core::f64::consts::PI;
    (-EULER_GAMMA - core::f64::consts::LN_2, pi * pi / 2.0)
}
