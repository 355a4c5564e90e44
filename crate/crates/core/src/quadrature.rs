//! Gauss-Legendre rules, graded composite panels on `[0, 1]` and a
//! smoothing change of variables for endpoint singularities.

use alloc::vec::Vec;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, by Newton iteration on
/// the three-term recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = alloc::vec![0.0; n];
    let mut weights = alloc::vec![0.0; n];
    let pi = core::f64::consts::PI;
    for i in 0..n.div_ceil(2) {
        let mut x = libm::cos(pi * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Rule on `[0, 1]` whose nodes cluster at both ends: GL of degree
/// `n` in `s` after `y = s^q / (s^q + (1-s)^q)`.
#[derive(Debug, Clone)]
pub struct EndpointRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl EndpointRule {
    pub fn new(n: usize, q: i32) -> Self {
        let (x, w) = gauss_legendre(n);
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for (xi, wi) in x.iter().zip(&w) {
            let s = 0.5 * (xi + 1.0);
            let a = libm::pow(s, q as f64);
            let b = libm::pow(1.0 - s, q as f64);
            let y = a / (a + b);
            let dy = q as f64 * libm::pow(s * (1.0 - s), q as f64 - 1.0) / ((a + b) * (a + b));
            nodes.push(y);
            weights.push(0.5 * wi * dy);
        }
        Self { nodes, weights }
    }

    /// `int_a^b f`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let len = b - a;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(y, w)| w * f(a + len * y))
            .sum::<f64>()
            * len
    }
}

/// Size parameters of the graded panel rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadSpec {
    /// Gauss-Legendre nodes per panel.
    pub order: usize,
    /// Number of geometrically shrinking panels at each end.
    pub levels: usize,
    /// Equal panels covering the middle of the interval.
    pub interior: usize,
}

impl QuadSpec {
    pub const DEFAULT: QuadSpec = QuadSpec { order: 8, levels: 6, interior: 4 };
    pub const FINE: QuadSpec = QuadSpec { order: 12, levels: 10, interior: 8 };

    /// A spec with strictly more nodes in every respect.
    pub fn refined(self) -> QuadSpec {
        QuadSpec { order: self.order + 4, levels: self.levels + 4, interior: 2 * self.interior }
    }

    pub fn node_count(self) -> usize {
        self.order * (2 * self.levels + self.interior)
    }
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self::DEFAULT
    }
}

const GRADING_RATIO: f64 = 0.2;

/// Composite Gauss-Legendre rule on `[0, 1]` with panels graded
/// geometrically towards both endpoints.
#[derive(Debug, Clone)]
pub struct PanelRule {
    pub spec: QuadSpec,
    pub breaks: Vec<f64>,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    barycentric: Vec<f64>,
}

impl PanelRule {
    pub fn new(spec: QuadSpec) -> Self {
        let mut breaks = Vec::new();
        breaks.push(0.0);
        for m in (1..=spec.levels).rev() {
            breaks.push(libm::pow(GRADING_RATIO, m as f64));
        }
        let (lo, hi) = (GRADING_RATIO, 1.0 - GRADING_RATIO);
        for k in 1..spec.interior {
            breaks.push(lo + (hi - lo) * k as f64 / spec.interior as f64);
        }
        for m in 1..=spec.levels {
            breaks.push(1.0 - libm::pow(GRADING_RATIO, m as f64));
        }
        breaks.push(1.0);
        let (x, w) = gauss_legendre(spec.order);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for pair in breaks.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(a + (b - a) * 0.5 * (xi + 1.0));
                weights.push((b - a) * 0.5 * wi);
            }
        }
        let g = spec.order;
        let mut barycentric = alloc::vec![0.0; nodes.len()];
        for (p, chunk) in nodes.chunks(g).enumerate() {
            for k in 0..g {
                let mut prod = 1.0;
                for m in 0..g {
                    if m != k {
                        prod *= chunk[k] - chunk[m];
                    }
                }
                barycentric[p * g + k] = 1.0 / prod;
            }
        }
        Self { spec, breaks, nodes, weights, barycentric }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn panels(&self) -> usize {
        self.breaks.len() - 1
    }

    pub fn panel_of(&self, node: usize) -> usize {
        node / self.spec.order
    }

    /// Nodes of panel `p`.
    pub fn panel_nodes(&self, p: usize) -> &[f64] {
        let g = self.spec.order;
        &self.nodes[p * g..(p + 1) * g]
    }

    /// Values at `y` of the Lagrange basis on the nodes of panel `p`.
    pub fn lagrange(&self, p: usize, y: f64, out: &mut [f64]) {
        let g = self.spec.order;
        let xs = self.panel_nodes(p);
        let lam = &self.barycentric[p * g..(p + 1) * g];
        if let Some(hit) = xs.iter().position(|&x| x == y) {
            out.fill(0.0);
            out[hit] = 1.0;
            return;
        }
        let mut total = 0.0;
        for ((o, x), l) in out.iter_mut().zip(xs).zip(lam) {
            *o = l / (y - x);
            total += *o;
        }
        for o in out.iter_mut() {
            *o /= total;
        }
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_exactness() {
        for n in [1usize, 2, 5, 8, 17, 40] {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * libm::pow(*x, deg as f64)).sum();
                let want = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((got - want).abs() < 1e-13, "n={n} deg={deg} {got} {want}");
            }
        }
    }

    #[test]
    fn endpoint_rule_handles_power_singularities() {
        let r = EndpointRule::new(32, 3);
        for a in [0.2f64, 0.6, 1.4] {
            let got = r.integrate(0.0, 1.0, |y| libm::pow(y, a) + libm::pow(1.0 - y, a));
            let want = 2.0 / (a + 1.0);
            assert!((got - want).abs() < 1e-10, "{a}: {got}");
        }
    }

    #[test]
    fn panel_rule_layout() {
        let r = PanelRule::new(QuadSpec::DEFAULT);
        assert_eq!(r.len(), QuadSpec::DEFAULT.node_count());
        assert_eq!(r.len(), 128);
        let total: f64 = r.weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
        let got = r.integrate(|y| libm::pow(y, 0.2));
        assert!((got - 1.0 / 1.2).abs() < 1e-7);
        let mut basis = [0.0; 8];
        r.lagrange(3, r.nodes[3 * 8 + 2], &mut basis);
        for (k, b) in basis.iter().enumerate() {
            let want = if k == 2 { 1.0 } else { 0.0 };
            assert!((b - want).abs() < 1e-12);
        }
    }
}
