//! Numerical integration of pairing graphs over `[0,1]^V`.
//!
//! Vertices are eliminated one at a time. Each elimination integrates one
//! variable against the kernels linking it to at most two remaining
//! vertices. Kernels between two variables of the same block have a kink on
//! the diagonal, so their matrices are built by product integration: the
//! smooth remainder is interpolated on the panel nodes and the kernel is
//! integrated exactly enough with a kink-splitting rule.

use alloc::collections::BTreeMap;
use core::cell::RefCell;
use alloc::vec::Vec;

use super::graph::Graph;
use crate::error::{Error, Result};
use crate::fbm::pow_abs;
use crate::quadrature::{gauss_legendre, EndpointRule, PanelRule, QuadSpec};

/// `(1 + t)^{e} - 1`, accurate for small `t`.
#[inline]
fn pow1m(t: f64, e: f64) -> f64 {
    libm::expm1(e * libm::log1p(t))
}

/// Hurst-dependent kernels in block units.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Kernels {
    pub e: f64,
}

impl Kernels {
    /// `Cov(W_x - W_0, W_y - W_0)`.
    #[inline]
    pub fn same(&self, x: f64, y: f64) -> f64 {
        0.5 * (pow_abs(x, self.e) + pow_abs(y, self.e) - pow_abs(x - y, self.e))
    }

    #[inline]
    pub fn var(&self, x: f64) -> f64 {
        pow_abs(x, self.e)
    }

    /// `Cov(W_x - W_0, W_{z+y} - W_z)`.
    #[inline]
    pub fn cross(&self, x: f64, y: f64, z: f64) -> f64 {
        let e = self.e;
        if z.abs() < 4.0 {
            0.5 * (pow_abs(z + y, e) + pow_abs(x - z, e) - pow_abs(z + y - x, e) - pow_abs(z, e))
        } else {
            let inv = 1.0 / z;
            0.5 * pow_abs(z, e) * (pow1m(y * inv, e) + pow1m(-x * inv, e) - pow1m((y - x) * inv, e))
        }
    }

    /// `int_0^1 Cov(W_{1+u} - W_u, W_{z+y} - W_z) du` restricted to the
    /// part that depends on `z` only through `z` (the other part is the
    /// same function at `z - M`).
    pub fn long(&self, y: f64, z: f64, gl: &(Vec<f64>, Vec<f64>)) -> f64 {
        let e = self.e;
        if z.abs() < 2.0 {
            let prim = |x: f64| {
                let v = pow_abs(x, e + 1.0) / (e + 1.0);
                if x < 0.0 {
                    -v
                } else {
                    v
                }
            };
            0.5 * (prim(z + y) - prim(z + y - 1.0) - prim(z) + prim(z - 1.0))
        } else {
            let (xs, ws) = gl;
            let mut acc = 0.0;
            for (x, w) in xs.iter().zip(ws) {
                let u = 0.5 * (x + 1.0);
                let d = z - u;
                acc += 0.5 * w * pow_abs(d, e) * pow1m(y / d, e);
            }
            0.5 * acc
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Base {
    Unit,
    Same(usize),
    /// power, and whether the lower-indexed vertex sits in block 0
    Cross(usize, bool),
}

struct Factor {
    base: Base,
    /// row = lower vertex, column = higher vertex
    tab: Option<Vec<f64>>,
}

/// Rule-dependent data shared by every lag.
pub(crate) struct Integrator {
    pub k: Kernels,
    pub rule: PanelRule,
    n: usize,
    self_loop: Vec<f64>,
    same_pi: Vec<Vec<f64>>,
    same_raw: Vec<Vec<f64>>,
    long_gl: (Vec<f64>, Vec<f64>),
    /// `W[i][m][k] = int ks^a(t_i, y) ks^b(y, t_m) l_k(y) dy`, keyed by `(a, b)`
    chains: RefCell<BTreeMap<(usize, usize), Vec<f64>>>,
}

/// Kernel data for one block offset `z`.
pub(crate) struct Lag {
    z: f64,
    cross_raw: Vec<Vec<f64>>,
    mark: Vec<f64>,
}

impl Integrator {
    pub fn new(hurst: f64, spec: QuadSpec, max_power: usize) -> Self {
        let k = Kernels { e: 2.0 * hurst };
        let rule = PanelRule::new(spec);
        let n = rule.len();
        let self_loop = rule.nodes.iter().map(|&t| k.var(t)).collect();
        let ep = EndpointRule::new(32, 3);
        let mut same_pi = Vec::new();
        let mut same_raw = Vec::new();
        for c in 1..=max_power {
            let f = |x: f64, y: f64| libm::pow(k.same(x, y), c as f64);
            same_pi.push(product_matrix(&rule, &ep, &f));
            let mut raw = alloc::vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    raw[i * n + j] = f(rule.nodes[i], rule.nodes[j]);
                }
            }
            same_raw.push(raw);
        }
        Self { k, rule, n, self_loop, same_pi, same_raw, long_gl: gauss_legendre(24), chains: RefCell::new(BTreeMap::new()) }
    }

    pub fn lag(&self, z: f64, max_power: usize) -> Lag {
        let n = self.n;
        let nodes = &self.rule.nodes;
        let mut cross_raw = Vec::new();
        if z != 0.0 {
            let mut base = alloc::vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    base[i * n + j] = self.k.cross(nodes[i], nodes[j], z);
                }
            }
            for c in 1..=max_power {
                cross_raw.push(base.iter().map(|v| libm::pow(*v, c as f64)).collect());
            }
        }
        let mark = nodes.iter().map(|&t| self.k.long(t, z, &self.long_gl)).collect();
        Lag { z, cross_raw, mark }
    }

    fn kink_power(lag: &Lag, f: &Factor) -> Option<usize> {
        match f.base {
            Base::Same(c) => Some(c),
            Base::Cross(c, _) if lag.z == 0.0 => Some(c),
            _ => None,
        }
    }

    fn with_chain<R>(&self, a: usize, b: usize, use_it: impl FnOnce(&[f64]) -> R) -> R {
        if let Some(w) = self.chains.borrow().get(&(a, b)) {
            return use_it(w);
        }
        let w = self.build_chain(a, b);
        let out = use_it(&w);
        self.chains.borrow_mut().insert((a, b), w);
        out
    }

    fn build_chain(&self, a: usize, b: usize) -> Vec<f64> {
        let n = self.n;
        let g = self.rule.spec.order;
        let rule = &self.rule;
        let ep = EndpointRule::new(24, 3);
        let q = ep.nodes.len();
        let (fa, fb) = (a as f64, b as f64);
        // samples on whole panels, used away from both kinks
        let panels = rule.panels();
        let mut ys = Vec::with_capacity(panels * q);
        let mut wy = Vec::with_capacity(panels * q);
        let mut basis = alloc::vec![0.0; panels * q * g];
        for p in 0..panels {
            let (c0, c1) = (rule.breaks[p], rule.breaks[p + 1]);
            for (s, w) in ep.nodes.iter().zip(&ep.weights) {
                let y = c0 + (c1 - c0) * s;
                let idx = ys.len();
                rule.lagrange(p, y, &mut basis[idx * g..(idx + 1) * g]);
                ys.push(y);
                wy.push(w * (c1 - c0));
            }
        }
        let ny = ys.len();
        let mut left = alloc::vec![0.0; n * ny];
        let mut right = alloc::vec![0.0; n * ny];
        for i in 0..n {
            for (k, &y) in ys.iter().enumerate() {
                let s = self.k.same(rule.nodes[i], y);
                left[i * ny + k] = libm::pow(s, fa) * wy[k];
                right[i * ny + k] = libm::pow(s, fb);
            }
        }
        let mut out = alloc::vec![0.0; n * n * n];
        let mut local = alloc::vec![0.0; g];
        for i in 0..n {
            let ti = rule.nodes[i];
            let pi = rule.panel_of(i);
            for m in 0..n {
                let tm = rule.nodes[m];
                let pm = rule.panel_of(m);
                let row = &mut out[(i * n + m) * n..(i * n + m + 1) * n];
                for p in 0..panels {
                    let target = &mut row[p * g..(p + 1) * g];
                    if p != pi && p != pm {
                        for k in p * q..(p + 1) * q {
                            let c = left[i * ny + k] * right[m * ny + k];
                            for (o, l) in target.iter_mut().zip(&basis[k * g..(k + 1) * g]) {
                                *o += c * l;
                            }
                        }
                        continue;
                    }
                    let mut cuts = [rule.breaks[p], 0.0, 0.0, 0.0];
                    let mut nc = 1;
                    for (t, owner) in [(ti, pi), (tm, pm)] {
                        if owner == p {
                            cuts[nc] = t;
                            nc += 1;
                        }
                    }
                    cuts[nc] = rule.breaks[p + 1];
                    cuts[1..nc].sort_by(f64::total_cmp);
                    for piece in cuts[..=nc].windows(2) {
                        let (c0, c1) = (piece[0], piece[1]);
                        let len = c1 - c0;
                        if len <= 0.0 {
                            continue;
                        }
                        for (s, w) in ep.nodes.iter().zip(&ep.weights) {
                            let y = c0 + len * s;
                            let kv = libm::pow(self.k.same(ti, y), fa) * libm::pow(self.k.same(y, tm), fb) * w * len;
                            rule.lagrange(p, y, &mut local);
                            for (o, l) in target.iter_mut().zip(&local) {
                                *o += kv * l;
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn weighted(&self, lag: &Lag, f: &Factor, row_is_lo: bool) -> Vec<f64> {
        let n = self.n;
        let w = &self.rule.weights;
        let mut m = match f.base {
            Base::Unit => {
                let mut m = alloc::vec![0.0; n * n];
                for i in 0..n {
                    m[i * n..(i + 1) * n].copy_from_slice(w);
                }
                m
            }
            Base::Same(c) => self.same_pi[c - 1].clone(),
            Base::Cross(c, lo_side0) => {
                if lag.z == 0.0 {
                    self.same_pi[c - 1].clone()
                } else {
                    let raw = &lag.cross_raw[c - 1];
                    let row_side0 = row_is_lo == lo_side0;
                    let mut m = alloc::vec![0.0; n * n];
                    for i in 0..n {
                        for k in 0..n {
                            let r = if row_side0 { raw[i * n + k] } else { raw[k * n + i] };
                            m[i * n + k] = r * w[k];
                        }
                    }
                    m
                }
            }
        };
        if let Some(tab) = &f.tab {
            apply_tab(&mut m, tab, n, row_is_lo);
        }
        m
    }

    fn raw(&self, lag: &Lag, f: &Factor, row_is_lo: bool) -> Vec<f64> {
        let n = self.n;
        let mut m = match f.base {
            Base::Unit => alloc::vec![1.0; n * n],
            Base::Same(c) => self.same_raw[c - 1].clone(),
            Base::Cross(c, lo_side0) => {
                if lag.z == 0.0 {
                    self.same_raw[c - 1].clone()
                } else {
                    let raw = &lag.cross_raw[c - 1];
                    if row_is_lo == lo_side0 {
                        raw.clone()
                    } else {
                        transpose(raw, n)
                    }
                }
            }
        };
        if let Some(tab) = &f.tab {
            apply_tab(&mut m, tab, n, row_is_lo);
        }
        m
    }

    /// Integral of the product of all kernels of `g` over `[0,1]^V`.
    pub fn integrate(&self, g: &Graph, lag: &Lag) -> Result<f64> {
        let n = self.n;
        let nv = g.len();
        let mut unary: Vec<Vec<f64>> = (0..nv)
            .map(|v| {
                (0..n)
                    .map(|i| {
                        libm::pow(self.self_loop[i], f64::from(g.adj[v][v]))
                            * libm::pow(lag.mark[i], f64::from(g.marks[v]))
                    })
                    .collect()
            })
            .collect();
        let mut factors: BTreeMap<(usize, usize), Factor> = BTreeMap::new();
        for u in 0..nv {
            for v in u + 1..nv {
                let c = usize::from(g.adj[u][v]);
                if c == 0 {
                    continue;
                }
                let base = if g.side[u] == g.side[v] { Base::Same(c) } else { Base::Cross(c, g.side[u] == 0) };
                factors.insert((u, v), Factor { base, tab: None });
            }
        }
        let mut alive: Vec<bool> = alloc::vec![true; nv];
        let mut scalar = 1.0;
        for _ in 0..nv {
            let neighbours = |v: usize, factors: &BTreeMap<(usize, usize), Factor>| -> Vec<usize> {
                factors.keys().filter_map(|&(a, b)| if a == v { Some(b) } else if b == v { Some(a) } else { None }).collect()
            };
            let v = (0..nv)
                .filter(|&v| alive[v])
                .min_by_key(|&v| neighbours(v, &factors).len())
                .expect("a live vertex");
            let nb = neighbours(v, &factors);
            let fv = core::mem::take(&mut unary[v]);
            match nb.len() {
                0 => {
                    scalar *= self.rule.weights.iter().zip(&fv).map(|(w, f)| w * f).sum::<f64>();
                }
                1 => {
                    let u = nb[0];
                    let key = (u.min(v), u.max(v));
                    let f = factors.remove(&key).expect("factor");
                    let e = self.weighted(lag, &f, u < v);
                    for i in 0..n {
                        let row = &e[i * n..(i + 1) * n];
                        unary[u][i] *= row.iter().zip(&fv).map(|(a, b)| a * b).sum::<f64>();
                    }
                }
                2 => {
                    let (mut u, mut x) = (nb[0], nb[1]);
                    let mut fu = factors.remove(&(u.min(v), u.max(v))).expect("factor");
                    let mut fx = factors.remove(&(x.min(v), x.max(v))).expect("factor");
                    let (ku, kx) = (Self::kink_power(lag, &fu), Self::kink_power(lag, &fx));
                    if ku.is_none() && kx.is_some() {
                        core::mem::swap(&mut u, &mut x);
                        core::mem::swap(&mut fu, &mut fx);
                    }
                    let mut t = alloc::vec![0.0; n * n];
                    match (ku, kx, &fu.tab, &fx.tab) {
                        (Some(cu), Some(cx), None, None) => self.with_chain(cu, cx, |w| {
                            for (tv, wrow) in t.iter_mut().zip(w.chunks_exact(n)) {
                                *tv = wrow.iter().zip(&fv).map(|(a, b)| a * b).sum();
                            }
                        }),
                        _ => {
                            let e = self.weighted(lag, &fu, u < v);
                            let r = self.raw(lag, &fx, v < x);
                            for i in 0..n {
                                for k in 0..n {
                                    let c = e[i * n + k] * fv[k];
                                    if c == 0.0 {
                                        continue;
                                    }
                                    let rrow = &r[k * n..(k + 1) * n];
                                    let trow = &mut t[i * n..(i + 1) * n];
                                    for (tm, rm) in trow.iter_mut().zip(rrow) {
                                        *tm += c * rm;
                                    }
                                }
                            }
                        }
                    }
                    // t is indexed [u][x]
                    let key = (u.min(x), u.max(x));
                    let t = if u < x { t } else { transpose(&t, n) };
                    match factors.get_mut(&key) {
                        Some(existing) => {
                            existing.tab = Some(match existing.tab.take() {
                                Some(old) => old.iter().zip(&t).map(|(a, b)| a * b).collect(),
                                None => t,
                            });
                        }
                        None => {
                            factors.insert(key, Factor { base: Base::Unit, tab: Some(t) });
                        }
                    }
                }
                d => {
                    return Err(Error::Quadrature(alloc::format!(
                        "pairing graph needs elimination of a vertex with {d} neighbours"
                    )))
                }
            }
            alive[v] = false;
        }
        Ok(scalar)
    }
}

fn apply_tab(m: &mut [f64], tab: &[f64], n: usize, row_is_lo: bool) {
    for i in 0..n {
        for k in 0..n {
            let t = if row_is_lo { tab[i * n + k] } else { tab[k * n + i] };
            m[i * n + k] *= t;
        }
    }
}

fn transpose(m: &[f64], n: usize) -> Vec<f64> {
    let mut out = alloc::vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            out[k * n + i] = m[i * n + k];
        }
    }
    out
}

/// `P[i][k] = int_0^1 K(t_i, y) l_k(y) dy` with `l_k` the panel Lagrange
/// basis; the panel holding `t_i` is split at `t_i`.
fn product_matrix(rule: &PanelRule, ep: &EndpointRule, kernel: &impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let n = rule.len();
    let g = rule.spec.order;
    let mut out = alloc::vec![0.0; n * n];
    let mut basis = alloc::vec![0.0; g];
    for i in 0..n {
        let t = rule.nodes[i];
        let own = rule.panel_of(i);
        for p in 0..rule.panels() {
            let (a, b) = (rule.breaks[p], rule.breaks[p + 1]);
            let pieces: &[(f64, f64)] = if p == own { &[(a, t), (t, b)] } else { &[(a, b)] };
            for &(c0, c1) in pieces {
                let len = c1 - c0;
                for (s, w) in ep.nodes.iter().zip(&ep.weights) {
                    let y = c0 + len * s;
                    let kv = kernel(t, y) * w * len;
                    rule.lagrange(p, y, &mut basis);
                    let row = &mut out[i * n + p * g..i * n + (p + 1) * g];
                    for (o, l) in row.iter_mut().zip(&basis) {
                        *o += kv * l;
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(side: &[u8], edges: &[(usize, usize)]) -> Graph {
        let n = side.len();
        let mut adj = alloc::vec![alloc::vec![0u8; n]; n];
        for &(u, v) in edges {
            if u == v {
                adj[u][u] += 1;
            } else {
                adj[u][v] += 1;
                adj[v][u] += 1;
            }
        }
        Graph { side: side.to_vec(), marks: alloc::vec![0; n], adj }
    }

    fn prim(x: f64, e: f64) -> f64 {
        let v = pow_abs(x, e + 1.0) / (e + 1.0);
        if x < 0.0 {
            -v
        } else {
            v
        }
    }

    fn second_diff_f(w: f64, e: f64) -> f64 {
        let f = |x: f64| pow_abs(x, e + 2.0) / ((e + 1.0) * (e + 2.0));
        f(w + 1.0) - 2.0 * f(w) + f(w - 1.0)
    }

    #[test]
    fn single_edges_match_closed_forms() {
        for h in [0.1, 0.3, 0.45] {
            let e = 2.0 * h;
            let integ = Integrator::new(h, QuadSpec::DEFAULT, 2);
            // same block
            let lag0 = integ.lag(0.0, 2);
            let g = graph(&[0, 0], &[(0, 1)]);
            let want = 1.0 / (e + 1.0) - 0.5 * 2.0 / ((e + 1.0) * (e + 2.0));
            let got = integ.integrate(&g, &lag0).unwrap();
            assert!((got - want).abs() < 1e-8 * want, "h={h} {got} {want}");
            // self loop
            let g = graph(&[0], &[(0, 0)]);
            let got = integ.integrate(&g, &lag0).unwrap();
            assert!((got - 1.0 / (e + 1.0)).abs() < 1e-8);
            // cross edges at several offsets
            for z in [-3.0, -1.0, 0.0, 1.0, 2.0, 9.0, -40.0] {
                let lag = integ.lag(z, 2);
                let g = graph(&[0, 1], &[(0, 1)]);
                let got = integ.integrate(&g, &lag).unwrap();
                let want = 0.5
                    * (prim(z + 1.0, e) - prim(z, e) + prim(1.0 - z, e) - prim(-z, e)
                        - second_diff_f(z, e)
                        - pow_abs(z, e));
                assert!((got - want).abs() < 1e-8, "h={h} z={z} {got} {want}");
            }
        }
    }

    #[test]
    fn path_of_three_matches_one_dimensional_oracle() {
        // int int int ks(x,y) ks(y,z) = int F(y)^2 with F(y) = int ks(x,y) dx.
        for h in [0.1, 0.3] {
            let e = 2.0 * h;
            let integ = Integrator::new(h, QuadSpec::DEFAULT, 2);
            let lag0 = integ.lag(0.0, 2);
            let g = graph(&[0, 0, 0], &[(0, 1), (1, 2)]);
            let got = integ.integrate(&g, &lag0).unwrap();
            let f = |y: f64| {
                0.5 * (pow_abs(y, e) + 1.0 / (e + 1.0)
                    - (pow_abs(y, e + 1.0) + pow_abs(1.0 - y, e + 1.0)) / (e + 1.0))
            };
            let ep = EndpointRule::new(64, 3);
            let want = ep.integrate(0.0, 1.0, |y| f(y) * f(y));
            assert!((got - want).abs() < 1e-8 * want, "h={h} {got} {want}");
        }
    }

    #[test]
    fn refinement_is_stable_for_cycles() {
        // triangle inside one block
        let g = graph(&[0, 0, 0], &[(0, 1), (1, 2), (0, 2)]);
        let coarse = Integrator::new(0.3, QuadSpec::DEFAULT, 1);
        let fine = Integrator::new(0.3, QuadSpec::FINE, 1);
        let a = coarse.integrate(&g, &coarse.lag(0.0, 1)).unwrap();
        let b = fine.integrate(&g, &fine.lag(0.0, 1)).unwrap();
        assert!((a - b).abs() < 2e-5 * b.abs(), "{a} {b}");
    }
}
