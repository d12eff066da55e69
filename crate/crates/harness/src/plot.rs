//! Static SVG figures: accuracy against a swept parameter, and 2-D scatter
//! plots of a dataset.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use aqks::data::RawDataset;

use crate::experiment::TrialSummary;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    AccuracyVsAxis,
    Scatter2d,
}

impl FromStr for PlotKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accuracy_vs_axis" => Ok(PlotKind::AccuracyVsAxis),
            "scatter2d" => Ok(PlotKind::Scatter2d),
            other => bail!("invalid plot kind `{other}`: expected accuracy_vs_axis or scatter2d"),
        }
    }
}

/// What a plot is drawn from.
#[derive(Debug, Clone, Copy)]
pub enum PlotSource<'a> {
    Summaries(&'a [TrialSummary]),
    Dataset(&'a RawDataset),
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn open(title: &str) -> String {
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (x0, y0, x1, y1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, MARGIN);
    let _ = writeln!(
        svg,
        r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" fill="none" stroke="black" stroke-width="1"/>"#
    );
    svg
}

/// Linear map from `[lo, hi]` onto `[a, b]`; a zero-width range maps to the middle.
fn scale(v: f64, lo: f64, hi: f64, a: f64, b: f64) -> f64 {
    if hi > lo {
        a + (v - lo) / (hi - lo) * (b - a)
    } else {
        (a + b) / 2.0
    }
}

/// Mean test accuracy per summary as one polyline with ±σ bars, plus the
/// baseline as a dashed path.
pub fn accuracy_vs_axis_svg(summaries: &[TrialSummary]) -> Result<String> {
    if summaries.is_empty() {
        bail!("accuracy_vs_axis needs at least one summary");
    }
    if let Some(s) = summaries.iter().find(|s| s.trials.is_empty()) {
        bail!("accuracy_vs_axis: point `{}` has no trials", s.value);
    }
    let numeric: Option<Vec<f64>> = summaries.iter().map(|s| s.value.parse().ok()).collect();
    let positions: Vec<f64> = match &numeric {
        Some(v) if v.iter().all(|x| *x > 0.0) && {
            let (lo, hi) = min_max(v);
            hi / lo >= 20.0
        } =>
        {
            v.iter().map(|x| x.log10()).collect()
        }
        Some(v) => v.clone(),
        None => (0..summaries.len()).map(|i| i as f64).collect(),
    };
    let stats: Vec<(f64, f64)> = summaries.iter().map(|s| s.test_stats()).collect();
    let mut ys: Vec<f64> = stats.iter().flat_map(|(m, s)| [m - s, m + s]).collect();
    ys.extend(summaries.iter().map(|s| s.baseline.test_accuracy));
    let (ylo, yhi) = min_max(&ys);
    let pad = ((yhi - ylo) * 0.1).max(0.01);
    let (ylo, yhi) = ((ylo - pad).max(0.0), (yhi + pad).min(1.0));
    let (xlo, xhi) = min_max(&positions);
    let px = |x: f64| scale(x, xlo, xhi, MARGIN + 20.0, WIDTH - MARGIN - 20.0);
    let py = |y: f64| scale(y, ylo, yhi, HEIGHT - MARGIN, MARGIN);

    let axis = &summaries[0].axis;
    let mut svg = open(&format!("Test accuracy vs. {axis}"));
    for (s, &x) in summaries.iter().zip(&positions) {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="11">{}</text>"#,
            px(x),
            HEIGHT - MARGIN + 16.0,
            escape(&s.value)
        );
    }
    for k in 0..=4 {
        let y = ylo + (yhi - ylo) * k as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="11">{y:.3}</text>"#,
            MARGIN - 6.0,
            py(y) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0,
        escape(axis)
    );

    let baseline: Vec<String> = summaries
        .iter()
        .zip(&positions)
        .enumerate()
        .map(|(i, (s, &x))| {
            format!("{}{:.2},{:.2}", if i == 0 { "M" } else { " L" }, px(x), py(s.baseline.test_accuracy))
        })
        .collect();
    let _ = writeln!(
        svg,
        r#"<path class="baseline" d="{}" fill="none" stroke="{}" stroke-dasharray="6,4" stroke-width="1.5"/>"#,
        baseline.concat(),
        PALETTE[1]
    );
    for ((m, s), &x) in stats.iter().zip(&positions) {
        let _ = writeln!(
            svg,
            r#"<line class="error-bar" x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="{3}" stroke-width="1"/>"#,
            px(x),
            py(m - s),
            py(m + s),
            PALETTE[0]
        );
    }
    let points: Vec<String> = stats
        .iter()
        .zip(&positions)
        .map(|((m, _), &x)| format!("{:.2},{:.2}", px(x), py(*m)))
        .collect();
    let _ = writeln!(
        svg,
        r#"<polyline class="aqks" points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
        points.join(" "),
        PALETTE[0]
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" fill="{}">quantum features (mean ± σ)</text>"#,
        WIDTH - MARGIN - 170.0,
        MARGIN - 12.0,
        PALETTE[0]
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" fill="{}">baseline</text>"#,
        MARGIN + 10.0,
        MARGIN - 12.0,
        PALETTE[1]
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// One circle per sample, colored by label.
pub fn scatter2d_svg(ds: &RawDataset) -> Result<String> {
    if ds.dim() != 2 {
        bail!("scatter2d needs a 2-D dataset, this one has {} columns", ds.dim());
    }
    if ds.is_empty() {
        bail!("scatter2d: dataset is empty");
    }
    let labels: Vec<i32> = ds.label_counts().into_keys().collect();
    let xs: Vec<f64> = ds.x.iter_rows().map(|r| r[0]).collect();
    let ys: Vec<f64> = ds.x.iter_rows().map(|r| r[1]).collect();
    let (xlo, xhi) = min_max(&xs);
    let (ylo, yhi) = min_max(&ys);
    // Equal units on both axes keep circles round.
    let span = (xhi - xlo).max(yhi - ylo);
    let (cx, cy) = ((xlo + xhi) / 2.0, (ylo + yhi) / 2.0);
    let side = (HEIGHT - 2.0 * MARGIN).min(WIDTH - 2.0 * MARGIN);
    let left = (WIDTH - side) / 2.0;
    let px = |x: f64| scale(x, cx - span / 2.0, cx + span / 2.0, left, left + side);
    let py = |y: f64| scale(y, cy - span / 2.0, cy + span / 2.0, MARGIN + side, MARGIN);

    let mut svg = open("Dataset");
    for ((x, y), label) in xs.iter().zip(&ys).zip(&ds.y) {
        let k = labels.iter().position(|l| l == label).unwrap_or(0);
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{}"/>"#,
            px(*x),
            py(*y),
            PALETTE[k % PALETTE.len()]
        );
    }
    for (k, l) in labels.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" fill="{}">label {l}</text>"#,
            WIDTH - MARGIN + 4.0,
            MARGIN + 14.0 * k as f64,
            PALETTE[k % PALETTE.len()]
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

pub fn render(source: PlotSource<'_>, kind: PlotKind) -> Result<String> {
    match (kind, source) {
        (PlotKind::AccuracyVsAxis, PlotSource::Summaries(s)) => accuracy_vs_axis_svg(s),
        (PlotKind::Scatter2d, PlotSource::Dataset(d)) => scatter2d_svg(d),
        (PlotKind::AccuracyVsAxis, PlotSource::Dataset(_)) => {
            bail!("invalid plot kind: accuracy_vs_axis is drawn from results, not a dataset")
        }
        (PlotKind::Scatter2d, PlotSource::Summaries(_)) => {
            bail!("invalid plot kind: scatter2d is drawn from a dataset, not results")
        }
    }
}

/// Renders the plot and writes it to `path`.
pub fn emit_svg_plot(source: PlotSource<'_>, kind: PlotKind, path: &Path) -> Result<()> {
    let svg = render(source, kind)?;
    std::fs::write(path, svg).with_context(|| format!("writing {}", path.display()))
}
