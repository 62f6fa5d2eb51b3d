//! Minimal deterministic SVG charts. Numbers are written with two decimals
//! so output bytes depend only on the data.

use std::fmt::Write as _;

use super::{plot_stride, BandCounts, ColumnSummary};
use crate::optima::ScoreSchedule;

pub const SVG_WIDTH: f64 = 960.0;
pub const SVG_HEIGHT: f64 = 540.0;

const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        let (y0, y1) = if y1 > y0 { (y0, y1) } else { (y0 - 1.0, y0 + 1.0) };
        let x1 = if x1 > x0 { x1 } else { x0 + 1.0 };
        Self { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (SVG_WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        let y = y.clamp(self.y0, self.y1);
        SVG_HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (SVG_HEIGHT - TOP - BOTTOM)
    }
}

fn open(title: &str, x_label: &str, y_label: &str, frame: &Frame) -> String {
    let mut s = String::new();
    let w = SVG_WIDTH;
    let h = SVG_HEIGHT;
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="16">{}</text>"#, w / 2.0, escape(title)).unwrap();
    let (bx, by) = (LEFT, h - BOTTOM);
    writeln!(
        s,
        r#"<path d="M{bx:.2} {TOP:.2} L{bx:.2} {by:.2} L{:.2} {by:.2}" stroke="black" fill="none"/>"#,
        w - RIGHT
    )
    .unwrap();
    writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, w / 2.0, h - 12.0, escape(x_label)).unwrap();
    writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(y_label)
    )
    .unwrap();
    for (v, anchor, x, y) in [
        (frame.x0, "start", frame.px(frame.x0), by + 16.0),
        (frame.x1, "end", frame.px(frame.x1), by + 16.0),
    ] {
        writeln!(s, r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}">{}</text>"#, tick(v)).unwrap();
    }
    for v in [frame.y0, frame.y1] {
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, frame.py(v) + 4.0, tick(v)).unwrap();
    }
    s
}

fn tick(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e9 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn polyline(points: &[(f64, f64)], stroke: &str, width: f64) -> String {
    let mut d = String::new();
    for (i, (x, y)) in points.iter().enumerate() {
        write!(d, "{}{x:.2} {y:.2}", if i == 0 { "M" } else { " L" }).unwrap();
    }
    format!("<path d=\"{d}\" stroke=\"{stroke}\" stroke-width=\"{width}\" fill=\"none\"/>\n")
}

fn band(upper: &[(f64, f64)], lower: &[(f64, f64)], fill: &str, opacity: f64) -> String {
    let mut d = String::new();
    for (i, (x, y)) in upper.iter().enumerate() {
        write!(d, "{}{x:.2} {y:.2}", if i == 0 { "M" } else { " L" }).unwrap();
    }
    for (x, y) in lower.iter().rev() {
        write!(d, " L{x:.2} {y:.2}").unwrap();
    }
    format!("<path d=\"{d} Z\" fill=\"{fill}\" fill-opacity=\"{opacity}\" stroke=\"none\"/>\n")
}

fn sampled_columns(n: usize) -> Vec<usize> {
    let stride = plot_stride(n);
    let mut cols: Vec<usize> = (0..n).step_by(stride).collect();
    if cols.last() != Some(&(n - 1)) {
        cols.push(n - 1);
    }
    cols
}

/// Aggregated convergence graph: min-max and quartile envelopes, median and mean.
pub fn convergence_svg(summary: &[ColumnSummary], title: &str) -> String {
    if summary.is_empty() {
        return String::new();
    }
    let cols = sampled_columns(summary.len());
    let lo = summary.iter().map(|s| s.min).filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min);
    let hi = summary.iter().map(|s| s.max).filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    let frame = Frame::new(1.0, summary.len() as f64, lo, hi);
    let mut s = open(title, "function evaluations", "best height so far (m)", &frame);
    let pts = |f: &dyn Fn(&ColumnSummary) -> f64| -> Vec<(f64, f64)> {
        cols.iter()
            .map(|&j| (frame.px((j + 1) as f64), frame.py(f(&summary[j]))))
            .collect()
    };
    s.push_str(&band(&pts(&|c| c.max), &pts(&|c| c.min), "#6baed6", 0.25));
    s.push_str(&band(&pts(&|c| c.q3), &pts(&|c| c.q1), "#2171b5", 0.35));
    s.push_str(&polyline(&pts(&|c| c.median), "#08306b", 1.5));
    s.push_str(&polyline(&pts(&|c| c.mean), "#cb181d", 1.5));
    s.push_str("</svg>\n");
    s
}

/// Height-band graph: stacked areas in schedule order, lowest band at the bottom.
pub fn bands_svg(counts: &BandCounts, schedule: &ScoreSchedule, title: &str) -> String {
    let n_cols = counts.counts.len();
    if n_cols == 0 {
        return String::new();
    }
    let runs = counts.counts[0].iter().sum::<usize>().max(1) as f64;
    let cols = sampled_columns(n_cols);
    let frame = Frame::new(1.0, n_cols as f64, 0.0, 1.0);
    let mut s = open(title, "function evaluations", "proportion of runs", &frame);
    let mut below = vec![0.0f64; cols.len()];
    for (b, spec) in schedule.bands().iter().enumerate() {
        let above: Vec<f64> = cols
            .iter()
            .zip(&below)
            .map(|(&j, &base)| base + counts.counts[j][b] as f64 / runs)
            .collect();
        if above.iter().zip(&below).any(|(a, b)| a > b) {
            let up: Vec<(f64, f64)> = cols.iter().zip(&above).map(|(&j, &v)| (frame.px((j + 1) as f64), frame.py(v))).collect();
            let down: Vec<(f64, f64)> = cols.iter().zip(&below).map(|(&j, &v)| (frame.px((j + 1) as f64), frame.py(v))).collect();
            writeln!(s, "<!-- band {b}: {} -->", escape(&spec.label)).unwrap();
            s.push_str(&band(&up, &down, &spec.colour, 1.0));
        }
        below = above;
    }
    s.push_str("</svg>\n");
    s
}

/// ERT against target on a log scale; infinite values are left out.
pub fn ert_curve_svg(curve: &[(f64, f64)], title: &str) -> String {
    let finite: Vec<(f64, f64)> = curve.iter().copied().filter(|(_, e)| e.is_finite() && *e > 0.0).collect();
    let (x0, x1) = curve
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (t, _)| (a.min(*t), b.max(*t)));
    let (y0, y1) = finite
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (_, e)| (a.min(e.log10()), b.max(e.log10())));
    let frame = Frame::new(
        if x0.is_finite() { x0 } else { 0.0 },
        if x1.is_finite() { x1 } else { 1.0 },
        if y0.is_finite() { y0.floor() } else { 0.0 },
        if y1.is_finite() { y1.ceil() } else { 1.0 },
    );
    let mut s = open(title, "target height (m)", "log10 ERT", &frame);
    let pts: Vec<(f64, f64)> = finite.iter().map(|&(t, e)| (frame.px(t), frame.py(e.log10()))).collect();
    if !pts.is_empty() {
        s.push_str(&polyline(&pts, "#08306b", 1.5));
    }
    s.push_str("</svg>\n");
    s
}
