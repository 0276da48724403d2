//! Self-contained SVG line plots.

use std::fmt::Write as _;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN: f64 = 60.0;
const TICKS: usize = 5;

pub struct Series<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub ys: &'a [f64],
}

/// Renders every series against `xs` as one `<polyline>` with one vertex per
/// sample, plus axes, tick labels and a legend.
pub fn render(title: &str, xs: &[f64], series: &[Series<'_>]) -> String {
    let finite = |v: &&f64| v.is_finite();
    let (x_lo, x_hi) = bounds(xs.iter().filter(finite).copied());
    let (y_lo, y_hi) = bounds(series.iter().flat_map(|s| s.ys.iter().filter(finite).copied()));
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let sx = |x: f64| MARGIN + (x - x_lo) / (x_hi - x_lo) * plot_w;
    // non-finite samples are pinned to the bottom edge to keep the vertex count
    let sy = |y: f64| {
        if y.is_finite() {
            HEIGHT - MARGIN - (y - y_lo) / (y_hi - y_lo) * plot_h
        } else {
            HEIGHT - MARGIN
        }
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        MARGIN / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for i in 0..=TICKS {
        let f = i as f64 / TICKS as f64;
        let (xv, yv) = (x_lo + f * (x_hi - x_lo), y_lo + f * (y_hi - y_lo));
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(
            svg,
            r#"<line x1="{px:.2}" y1="{b}" x2="{px:.2}" y2="{b2}" stroke="black"/><text x="{px:.2}" y="{t}" text-anchor="middle">{xv:.3}</text>"#,
            b = HEIGHT - MARGIN,
            b2 = HEIGHT - MARGIN + 5.0,
            t = HEIGHT - MARGIN + 18.0
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{MARGIN}" y1="{py:.2}" x2="{l}" y2="{py:.2}" stroke="black"/><text x="{t}" y="{py:.2}" text-anchor="end" dominant-baseline="middle">{yv:.3}</text>"#,
            l = MARGIN - 5.0,
            t = MARGIN - 8.0
        );
    }
    for (i, s) in series.iter().enumerate() {
        let points: Vec<String> = xs
            .iter()
            .zip(s.ys)
            .map(|(&x, &y)| format!("{:.3},{:.3}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline data-series="{label}" fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>"#,
            label = escape(s.label),
            color = s.color,
            pts = points.join(" ")
        );
        let ly = MARGIN + 16.0 + 18.0 * i as f64;
        let lx = WIDTH - MARGIN - 150.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{x2}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{tx}" y="{ly}" dominant-baseline="middle">{label}</text>"#,
            x2 = lx + 24.0,
            tx = lx + 30.0,
            color = s.color,
            label = escape(s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 1.0, hi + 1.0);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
