//! Log-log rate fits of error against sample size.

use alloc::format;

use crate::error::{Error, Result};

/// Least-squares line `log2(rmse) = intercept + slope * N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    /// Slope in bits of error per doubling of `n`.
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
}

/// Theoretical exponent `-1/(4H + 2)` of the error in `n`.
pub fn minimax_slope(h: f64) -> f64 {
    -1.0 / (4.0 * h + 2.0)
}

/// Regresses `log2(rmse)` on the sample-size exponent `N`. Needs at least
/// three distinct exponents and a non-constant positive error.
pub fn fit_rate(points: &[(u32, f64)]) -> Result<RateFit> {
    fit_with_offset(points, |_| 0.0)
}

/// [`fit_rate`] after dividing the error by `log(n)`, for rates of the form
/// `n^{-r} log(n)`.
pub fn fit_rate_log_corrected(points: &[(u32, f64)]) -> Result<RateFit> {
    fit_with_offset(points, |n| libm::log2(n as f64))
}

fn fit_with_offset(points: &[(u32, f64)], offset: impl Fn(u32) -> f64) -> Result<RateFit> {
    let mut xs = alloc::vec::Vec::with_capacity(points.len());
    for &(n, r) in points {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Degenerate(format!("error {r} at N={n} is not positive")));
        }
        xs.push(n);
    }
    xs.sort_unstable();
    xs.dedup();
    if xs.len() < 3 {
        return Err(Error::Degenerate(format!("{} distinct sample sizes, need 3", xs.len())));
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|&(n, _)| n as f64).sum::<f64>() / k;
    let y = |n: u32, r: f64| libm::log2(r) - offset(n);
    let my = points.iter().map(|&(n, r)| y(n, r)).sum::<f64>() / k;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(n, r) in points {
        let dx = n as f64 - mx;
        let dy = y(n, r) - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if syy == 0.0 {
        return Err(Error::Degenerate("constant error across sample sizes".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let resid = (syy - slope * sxy).max(0.0);
    let dof = k - 2.0;
    let stderr = if dof > 0.0 { libm::sqrt(resid / dof / sxx) } else { 0.0 };
    Ok(RateFit { slope, stderr, intercept })
}
