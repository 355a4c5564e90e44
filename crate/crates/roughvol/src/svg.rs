//! Log-log plot of RMSE against sample size.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::formats::{Aggregate, RateRow};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// One `<g class="series">` per `(model, H, eta)` with the measured
/// `log2 RMSE(H_hat)` against `N` and a dashed line of the theoretical slope
/// through the first point.
pub fn rmse_plot(aggs: &[Aggregate], rates: &[RateRow]) -> Result<String> {
    if aggs.is_empty() {
        return Err(Error::Config("nothing to plot".into()));
    }
    let xs: Vec<f64> = aggs.iter().map(|a| a.n_exp as f64).collect();
    let ys: Vec<f64> = aggs.iter().map(|a| a.rmse_h.max(f64::MIN_POSITIVE).log2()).collect();
    let (x0, x1) = span(&xs);
    let (y0, y1) = span(&ys);
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        s,
        r#"<path d="M{left} {top} L{left} {bottom} L{right} {bottom}" stroke="black" fill="none"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">N = log2(n)</text>"#,
        WIDTH / 2.0,
        HEIGHT - 20.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" transform="rotate(-90 16 {})" text-anchor="middle">log2 RMSE(H)</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for (v, label) in [(x0, x0), (x1, x1)] {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{label}</text>"#, px(v), bottom + 16.0);
    }
    for v in [y0, y1] {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.2}</text>"#, left - 6.0, py(v) + 4.0);
    }

    let same = |a: &Aggregate, b: &Aggregate| a.model == b.model && a.hurst == b.hurst && a.eta == b.eta;
    for (i, series) in aggs.chunk_by(|a, b| same(a, b)).enumerate() {
        let color = COLORS[i % COLORS.len()];
        let first = &series[0];
        let label = format!("{} H={} eta={}", first.model, first.hurst, first.eta);
        let _ = writeln!(s, r#"<g class="series" data-label="{label}">"#);
        let pts: Vec<(f64, f64)> =
            series.iter().map(|a| (a.n_exp as f64, a.rmse_h.max(f64::MIN_POSITIVE).log2())).collect();
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" stroke="{color}" fill="none"/>"#, path.join(" "));
        for &(x, y) in &pts {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, px(x), py(y));
        }
        let theory = rates
            .iter()
            .find(|r| r.quantity == "H" && r.model == first.model && r.hurst == first.hurst && r.eta == first.eta)
            .map(|r| r.theory)
            .unwrap_or(-1.0 / (4.0 * first.hurst + 2.0));
        let (xa, ya) = pts[0];
        let xb = pts[pts.len() - 1].0;
        let yb = ya + theory * (xb - xa);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-dasharray="5,4"/>"#,
            px(xa),
            py(ya),
            px(xb),
            py(yb)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" fill="{color}">{label}, slope {theory:.4}</text>"#,
            left + 10.0,
            top + 14.0 * i as f64
        );
        let _ = writeln!(s, "</g>");
    }
    let _ = writeln!(s, "</svg>");
    Ok(s)
}

fn span(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < 1e-9 {
        (lo - 1.0, hi + 1.0)
    } else {
        let pad = 0.08 * (hi - lo);
        (lo - pad, hi + pad)
    }
}
