//! SVG learning curves with a rolling mean ± standard deviation band.

use std::fmt::Write;

use crate::metrics::MetricsRow;

pub const WINDOW: usize = 10;

const PANEL_W: f64 = 320.0;
const PANEL_H: f64 = 220.0;
const PAD: f64 = 40.0;

/// Trailing rolling mean and population standard deviation; the first
/// points use the shorter windows available.
pub fn rolling(values: &[f64], window: usize) -> Vec<(f64, f64)> {
    let w = window.max(1);
    (0..values.len())
        .map(|i| {
            let s = &values[(i + 1).saturating_sub(w)..=i];
            let n = s.len() as f64;
            let mean = s.iter().sum::<f64>() / n;
            let var = s.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            (mean, var.sqrt())
        })
        .collect()
}

struct Series {
    title: &'static str,
    points: Vec<(f64, f64)>,
}

fn series(rows: &[MetricsRow]) -> Vec<Series> {
    let pick = |title, f: &dyn Fn(&MetricsRow) -> Option<f64>| Series {
        title,
        points: rows
            .iter()
            .filter_map(|r| f(r).map(|v| (r.samples as f64, v)))
            .collect(),
    };
    vec![
        pick("trajectory accuracy", &|r| r.acc),
        pick("trajectory length", &|r| r.len),
        pick("loss", &|r| Some(r.loss)),
        pick("top-k accuracy", &|r| r.topk),
        pick("OOD accuracy", &|r| r.ood_acc),
    ]
}

/// Renders the five panels side by side.
pub fn render_svg(rows: &[MetricsRow]) -> String {
    let panels = series(rows);
    let width = PANEL_W * panels.len() as f64;
    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{PANEL_H}" viewBox="0 0 {width} {PANEL_H}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="{width}" height="{PANEL_H}" fill="white"/>"#).unwrap();
    for (i, s) in panels.iter().enumerate() {
        panel(&mut svg, s, i as f64 * PANEL_W);
    }
    svg.push_str("</svg>\n");
    svg
}

fn panel(svg: &mut String, s: &Series, x0: f64) {
    let (left, right) = (x0 + PAD, x0 + PANEL_W - 10.0);
    let (top, bottom) = (25.0, PANEL_H - PAD);
    writeln!(
        svg,
        r#"<text x="{}" y="15" text-anchor="middle">{}</text>"#,
        x0 + PANEL_W / 2.0,
        s.title
    )
    .unwrap();
    writeln!(
        svg,
        r#"<path d="M{left} {top} V{bottom} H{right}" stroke="black" fill="none"/>"#
    )
    .unwrap();
    if s.points.is_empty() {
        writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">no data</text>"#, (left + right) / 2.0, (top + bottom) / 2.0).unwrap();
        return;
    }
    let values: Vec<f64> = s.points.iter().map(|p| p.1).collect();
    let stats = rolling(&values, WINDOW);
    let xs: Vec<f64> = s.points.iter().map(|p| p.0).collect();
    let (xmin, xmax) = bounds(xs.iter().copied());
    let (ymin, ymax) = bounds(stats.iter().flat_map(|&(m, d)| [m - d, m + d]));
    let sx = |x: f64| left + (x - xmin) / (xmax - xmin) * (right - left);
    let sy = |y: f64| bottom - (y - ymin) / (ymax - ymin) * (bottom - top);

    let mut band = String::new();
    for (x, &(m, d)) in xs.iter().zip(&stats) {
        write!(band, "{:.2},{:.2} ", sx(*x), sy(m + d)).unwrap();
    }
    for (x, &(m, d)) in xs.iter().zip(&stats).rev() {
        write!(band, "{:.2},{:.2} ", sx(*x), sy(m - d)).unwrap();
    }
    writeln!(svg, r##"<polygon points="{}" fill="#1f77b4" fill-opacity="0.25" stroke="none"/>"##, band.trim_end()).unwrap();
    let line: Vec<String> = xs
        .iter()
        .zip(&stats)
        .map(|(x, &(m, _))| format!("{:.2},{:.2}", sx(*x), sy(m)))
        .collect();
    writeln!(
        svg,
        r##"<polyline points="{}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>"##,
        line.join(" ")
    )
    .unwrap();
    for (y, label) in [(ymin, ymin), (ymax, ymax)] {
        writeln!(svg, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, left - 4.0, sy(y) + 4.0, fmt(label)).unwrap();
    }
    for (x, label) in [(xmin, xmin), (xmax, xmax)] {
        writeln!(svg, r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#, sx(x), bottom + 14.0, fmt(label)).unwrap();
    }
    writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">samples</text>"#, (left + right) / 2.0, bottom + 30.0).unwrap();
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        // A flat series sits in the middle of a unit-wide range.
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

fn fmt(v: f64) -> String {
    if v.abs() >= 1e4 {
        format!("{v:.3e}")
    } else {
        format!("{v:.3}")
    }
}
