//! Scaling constants of the energy levels.
//!
//! `kappa_p` is the piecewise-model constant. For the general model the
//! expected energy expands as `sum_a eta^{2a} 2^{-2ajH} kappa_{p,a}(H)`;
//! the first coefficient has a closed form and the higher ones are built
//! from pairing graphs integrated numerically by [`KappaEngine`].

mod graph;
mod integrate;

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use self::graph::{long_increment_family, two_block_family, Family};
use self::integrate::Integrator;
use crate::error::{domain, Error, Result};
use crate::fbm::{phi_corr, pow_abs, HurstParam};
pub use crate::quadrature::QuadSpec;

/// Offsets up to this size are integrated directly; larger ones use the
/// Chebyshev expansion in `1/z`.
const NEAR_FIELD: i64 = 8;
const CHEB_NODES: usize = 16;
/// Largest supported truncation order.
pub const MAX_ORDER: usize = 4;

/// Largest relative change tolerated when the quadrature is refined.
/// Orders above two contain closed cycles whose inner integrals are only
/// tabulated on the nodes, which limits the attainable agreement.
pub fn convergence_tol(a: usize) -> f64 {
    if a <= 2 {
        1e-6
    } else {
        1e-3
    }
}

/// `kappa_p(H) = 2^{-p} sum_{|l| < 2^p} (1 - |l| 2^{-p}) phi_H(l 2^{-p})`.
pub fn kappa_p(h: HurstParam, p: u32) -> f64 {
    let m = 1i64 << p;
    let inv = 1.0 / m as f64;
    let mut acc = phi_corr(0.0, h);
    for l in 1..m {
        acc += 2.0 * (1.0 - l as f64 * inv) * phi_corr(l as f64 * inv, h);
    }
    acc * inv
}

/// `G(w) = int_0^1 int_0^1 |w + u - v|^{2H} du dv`, the variance of the
/// difference of two unit block means `w` apart.
fn block_mean_variogram(w: f64, e: f64) -> f64 {
    let norm = (e + 1.0) * (e + 2.0);
    let w = w.abs();
    if w < 4.0 {
        let f = |x: f64| pow_abs(x, e + 2.0) / norm;
        return f(w + 1.0) - 2.0 * f(w) + f(w - 1.0);
    }
    // binomial series avoids the cancellation of the second difference
    let alpha = e + 2.0;
    let inv2 = 1.0 / (w * w);
    let mut binom = 1.0;
    let mut power = pow_abs(w, alpha);
    let mut acc = 0.0;
    for k in 1..60 {
        let k2 = 2.0 * k as f64;
        binom *= (alpha - k2 + 2.0) * (alpha - k2 + 1.0) / ((k2 - 1.0) * k2);
        power *= inv2;
        let term = binom * power;
        acc += term;
        if term.abs() <= 1e-17 * acc.abs() {
            break;
        }
    }
    2.0 * acc / norm
}

/// First-order constant `kappa_{p,1}(H)` of the general model.
pub fn kappa_first_order(h: HurstParam, p: u32) -> f64 {
    let e = 2.0 * h.value();
    let m = 1i64 << p;
    let mf = m as f64;
    let term = |d: i64| {
        let d = d as f64;
        0.5 * (block_mean_variogram(d + mf, e) + block_mean_variogram(d - mf, e))
            - block_mean_variogram(d, e)
    };
    let mut acc = mf * term(0);
    for d in 1..m {
        acc += 2.0 * (mf - d as f64) * term(d);
    }
    0.5 * libm::exp2(-2.0 * p as f64 * (1.0 + h.value())) * acc
}

/// Truncation order: the smallest `S` with `S >= 1/(4 H_-) + 1/2` and
/// `S > H_+/(2 H_-) - 1/2`. Both bounds are treated as strict when they
/// land on an integer.
pub fn choose_s(h_minus: f64, h_plus: f64) -> Result<usize> {
    if !(h_minus > 0.0 && h_plus > h_minus) {
        return Err(domain(format!("need 0 < H_- < H_+, got ({h_minus}, {h_plus})")));
    }
    let snap = |x: f64| {
        let r = libm::round(x);
        if (x - r).abs() < 1e-9 {
            r
        } else {
            x
        }
    };
    let first = snap(1.0 / (4.0 * h_minus) + 0.5);
    let second = snap(h_plus / (2.0 * h_minus) - 0.5);
    let s = libm::floor(first).max(libm::floor(second)) + 1.0;
    Ok((s as usize).max(1))
}

fn chebyshev_nodes() -> [f64; CHEB_NODES] {
    let mut x = [0.0; CHEB_NODES];
    for (k, v) in x.iter_mut().enumerate() {
        *v = libm::cos(PI * (k as f64 + 0.5) / CHEB_NODES as f64) / NEAR_FIELD as f64;
    }
    x
}

fn chebyshev_eval(nodes: &[f64; CHEB_NODES], values: &[f64; CHEB_NODES], x: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..CHEB_NODES {
        let d = x - nodes[k];
        if d == 0.0 {
            return values[k];
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let w = sign * libm::sin(PI * (k as f64 + 0.5) / CHEB_NODES as f64) / d;
        num += w * values[k];
        den += w;
    }
    num / den
}

/// Lag functions of one order `a`: the block covariance split by number of
/// cross edges, and the covariance with the long increment.
struct OrderData {
    near_cross: Vec<Vec<f64>>,
    near_long: Vec<f64>,
    far_cross: Vec<[f64; CHEB_NODES]>,
    far_long: [f64; CHEB_NODES],
}

/// All `kappa_{p,a}(H)`, `a <= S`, at one Hurst exponent.
pub struct KappaEngine {
    hurst: HurstParam,
    order: usize,
    quad: QuadSpec,
    cheb: [f64; CHEB_NODES],
    data: Vec<OrderData>,
}

impl KappaEngine {
    pub fn new(hurst: HurstParam, order: usize, quad: QuadSpec) -> Result<Self> {
        if order == 0 {
            return Err(domain("truncation order must be at least 1"));
        }
        if order > MAX_ORDER {
            return Err(domain(format!("truncation order {order} exceeds the supported maximum {MAX_ORDER}")));
        }
        let e = 2.0 * hurst.value();
        let cheb = chebyshev_nodes();
        let families: Vec<(Family, Family)> = (2..=order)
            .map(|a| Ok((two_block_family(a)?, long_increment_family(a)?)))
            .collect::<Result<_>>()?;
        let mut data: Vec<OrderData> = (2..=order)
            .map(|a| OrderData {
                near_cross: alloc::vec![alloc::vec![0.0; (2 * NEAR_FIELD + 1) as usize]; a],
                near_long: alloc::vec![0.0; (2 * NEAR_FIELD + 1) as usize],
                far_cross: alloc::vec![[0.0; CHEB_NODES]; a],
                far_long: [0.0; CHEB_NODES],
            })
            .collect();
        if order >= 2 {
            let integ = Integrator::new(hurst.value(), quad, order);
            let eval = |z: f64| -> Result<Vec<(Vec<f64>, f64)>> {
                let lag = integ.lag(z, order);
                let mut out = Vec::new();
                for (a, (two, long)) in (2..=order).zip(&families) {
                    let mut cross = alloc::vec![0.0; a];
                    for (g, w) in &two.terms {
                        let c = g.cross_edges() as usize;
                        cross[c - 1] += w * integ.integrate(g, &lag)?;
                    }
                    let mut l = 0.0;
                    for (g, w) in &long.terms {
                        l += w * integ.integrate(g, &lag)?;
                    }
                    out.push((cross, l));
                }
                Ok(out)
            };
            for z in -NEAR_FIELD..=NEAR_FIELD {
                let idx = (z + NEAR_FIELD) as usize;
                for (d, (cross, l)) in data.iter_mut().zip(eval(z as f64)?) {
                    for (c, v) in cross.into_iter().enumerate() {
                        d.near_cross[c][idx] = v;
                    }
                    d.near_long[idx] = l;
                }
            }
            for (k, &x) in cheb.iter().enumerate() {
                let z = 1.0 / x;
                let zs = pow_abs(z, e);
                for (d, (cross, l)) in data.iter_mut().zip(eval(z)?) {
                    for (c, v) in cross.into_iter().enumerate() {
                        d.far_cross[c][k] = v / libm::pow(zs / (z * z), (c + 1) as f64);
                    }
                    d.far_long[k] = l / (zs / z);
                }
            }
        }
        Ok(Self { hurst, order, quad, cheb, data })
    }

    pub fn hurst(&self) -> HurstParam {
        self.hurst
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn quad(&self) -> QuadSpec {
        self.quad
    }

    /// Covariance of the order-`a` block functionals at offset `z`, and the
    /// covariance of the long increment with the order `2a-1` functional.
    fn lag_functions(&self, a: usize, z: i64) -> (f64, f64) {
        let d = &self.data[a - 2];
        if z.abs() <= NEAR_FIELD {
            let idx = (z + NEAR_FIELD) as usize;
            let cross = d.near_cross.iter().map(|v| v[idx]).sum();
            return (cross, d.near_long[idx]);
        }
        let e = 2.0 * self.hurst.value();
        let zf = z as f64;
        let x = 1.0 / zf;
        let zs = pow_abs(zf, e);
        let mut cross = 0.0;
        for (c, vals) in d.far_cross.iter().enumerate() {
            cross += chebyshev_eval(&self.cheb, vals, x) * libm::pow(zs / (zf * zf), (c + 1) as f64);
        }
        (cross, chebyshev_eval(&self.cheb, &d.far_long, x) * zs / zf)
    }

    pub fn kappa(&self, p: u32, a: usize) -> Result<f64> {
        if a == 0 || a > self.order {
            return Err(domain(format!("order a={a} outside 1..={}", self.order)));
        }
        if p > 30 {
            return Err(domain(format!("depth p={p} too large")));
        }
        if a == 1 {
            return Ok(kappa_first_order(self.hurst, p));
        }
        let m = 1i64 << p;
        let term = |d: i64| {
            let (c0, l0) = self.lag_functions(a, d);
            let (cp, lp) = self.lag_functions(a, d + m);
            let (cm, lm) = self.lag_functions(a, d - m);
            2.0 * c0 - cp - cm + 2.0 * (lp + lm - 2.0 * l0)
        };
        let mut acc = 0.0;
        for d in 1 - m..m {
            acc += (m - d.abs()) as f64 * term(d);
        }
        let h = self.hurst.value();
        Ok(0.5 * libm::exp2(-2.0 * p as f64 * (1.0 + a as f64 * h)) * acc)
    }
}

/// `kappa_{p,a}(H)` with a convergence check against a refined quadrature.
pub fn kappa_pa(h: HurstParam, p: u32, a: usize, order: usize, quad: QuadSpec) -> Result<f64> {
    if a == 0 || a > order {
        return Err(domain(format!("order a={a} outside 1..={order}")));
    }
    if a == 1 {
        return Ok(kappa_first_order(h, p));
    }
    let coarse = KappaEngine::new(h, a, quad)?.kappa(p, a)?;
    let fine = KappaEngine::new(h, a, quad.refined())?.kappa(p, a)?;
    if (coarse - fine).abs() > convergence_tol(a) * fine.abs() {
        return Err(Error::Quadrature(format!(
            "kappa_(p={p},a={a}) at H={}: {coarse} vs refined {fine}",
            h.value()
        )));
    }
    Ok(fine)
}

/// Tabulated `kappa_{p,a}(H)` for `p <= p_max`, `a <= S` on a sorted grid of
/// Hurst exponents, interpolated cubically in between.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaTable {
    h_grid: Vec<f64>,
    p_max: u32,
    order: usize,
    quad: QuadSpec,
    /// index `(ih * (p_max + 1) + p) * order + (a - 1)`
    values: Vec<f64>,
}

impl KappaTable {
    /// Evenly spaced grid from `lo` to `hi` inclusive.
    pub fn uniform_grid(lo: f64, hi: f64, spacing: f64) -> Result<Vec<f64>> {
        if !(lo > 0.0 && hi >= lo && spacing > 0.0) {
            return Err(domain(format!("bad grid ({lo}, {hi}, {spacing})")));
        }
        let steps = libm::ceil((hi - lo) / spacing - 1e-9) as usize;
        let steps = steps.max(1);
        Ok((0..=steps).map(|k| lo + (hi - lo) * k as f64 / steps as f64).collect())
    }

    /// Values at one Hurst exponent, laid out as `[p][a - 1]`.
    pub fn column(h: f64, p_max: u32, order: usize, quad: QuadSpec) -> Result<Vec<f64>> {
        let engine = KappaEngine::new(HurstParam::new(h)?, order, quad)?;
        let mut out = Vec::with_capacity((p_max as usize + 1) * order);
        for p in 0..=p_max {
            for a in 1..=order {
                out.push(engine.kappa(p, a)?);
            }
        }
        Ok(out)
    }

    pub fn from_columns(
        h_grid: Vec<f64>,
        p_max: u32,
        order: usize,
        quad: QuadSpec,
        columns: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let width = (p_max as usize + 1) * order;
        if columns.len() != h_grid.len() || columns.iter().any(|c| c.len() != width) {
            return Err(Error::InvalidConfig("kappa columns do not match the grid".into()));
        }
        Self::from_values(h_grid, p_max, order, quad, columns.concat())
    }

    pub fn from_values(h_grid: Vec<f64>, p_max: u32, order: usize, quad: QuadSpec, values: Vec<f64>) -> Result<Self> {
        if h_grid.is_empty() || order == 0 {
            return Err(Error::InvalidConfig("empty kappa table".into()));
        }
        if h_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("kappa grid must be strictly increasing".into()));
        }
        if values.len() != h_grid.len() * (p_max as usize + 1) * order {
            return Err(Error::InvalidConfig("kappa value count does not match the grid".into()));
        }
        Ok(Self { h_grid, p_max, order, quad, values })
    }

    pub fn build(h_grid: Vec<f64>, p_max: u32, order: usize, quad: QuadSpec) -> Result<Self> {
        let columns = h_grid
            .iter()
            .map(|&h| Self::column(h, p_max, order, quad))
            .collect::<Result<Vec<_>>>()?;
        Self::from_columns(h_grid, p_max, order, quad, columns)
    }

    pub fn h_grid(&self) -> &[f64] {
        &self.h_grid
    }

    pub fn p_max(&self) -> u32 {
        self.p_max
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn quad(&self) -> QuadSpec {
        self.quad
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn at(&self, ih: usize, p: u32, a: usize) -> f64 {
        self.values[(ih * (self.p_max as usize + 1) + p as usize) * self.order + (a - 1)]
    }

    pub fn covers(&self, h: f64) -> bool {
        let tol = 1e-12;
        h >= self.h_grid[0] - tol && h <= self.h_grid[self.h_grid.len() - 1] + tol
    }

    /// Interpolated `kappa_{p,a}(h)`.
    pub fn kappa(&self, h: f64, p: u32, a: usize) -> Result<f64> {
        if !self.covers(h) {
            return Err(Error::TableCoverage(format!("H={h}")));
        }
        if p > self.p_max {
            return Err(Error::TableCoverage(format!("p={p} (max {})", self.p_max)));
        }
        if a == 0 || a > self.order {
            return Err(Error::TableCoverage(format!("a={a} (max {})", self.order)));
        }
        let g = &self.h_grid;
        if let Some(ih) = g.iter().position(|&x| x == h) {
            return Ok(self.at(ih, p, a));
        }
        let n = g.len();
        let width = n.min(4);
        let upper = g.partition_point(|&x| x < h).clamp(1, n - 1);
        let start = (upper as isize - width as isize / 2).clamp(0, (n - width) as isize) as usize;
        let mut acc = 0.0;
        for i in start..start + width {
            let mut l = 1.0;
            for k in start..start + width {
                if k != i {
                    l *= (h - g[k]) / (g[i] - g[k]);
                }
            }
            acc += l * self.at(i, p, a);
        }
        Ok(acc)
    }
}

/// `B_{j,p}(I, nu) = sum_{a=2}^{S} nu^{2a} 2^{-2aIj} kappa_{p,a}(I)`.
pub fn bias_term(j: u32, p: u32, order: usize, trial_h: f64, nu: f64, table: &KappaTable) -> Result<f64> {
    if order > table.order() {
        return Err(Error::TableCoverage(format!("S={order} (table has {})", table.order())));
    }
    let mut acc = 0.0;
    for a in 2..=order {
        let af = a as f64;
        let scale = libm::pow(nu, 2.0 * af) * libm::exp2(-2.0 * af * trial_h * j as f64);
        if scale == 0.0 {
            continue;
        }
        acc += scale * table.kappa(trial_h, p, a)?;
    }
    Ok(acc)
}
