//! Self-contained SVG line charts of a trace.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::harness::experiment::TraceRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// True count staircase with every available estimate.
    Tracking,
    /// Network loss and its detector statistic.
    Loss,
    /// Per-step wall time of both filters.
    Timing,
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tracking" => Ok(PlotKind::Tracking),
            "loss" => Ok(PlotKind::Loss),
            "timing" => Ok(PlotKind::Timing),
            other => Err(Error::config(
                "kind",
                format!("unknown plot kind `{other}` (tracking, loss, timing)"),
            )),
        }
    }
}

impl PlotKind {
    fn title(self) -> &'static str {
        match self {
            PlotKind::Tracking => "Estimated number of users",
            PlotKind::Loss => "Network loss",
            PlotKind::Timing => "Step time",
        }
    }

    fn y_label(self) -> &'static str {
        match self {
            PlotKind::Tracking => "users",
            PlotKind::Loss => "loss",
            PlotKind::Timing => "µs",
        }
    }
}

struct Series {
    label: &'static str,
    color: &'static str,
    points: Vec<(f64, f64)>,
    step: bool,
}

fn series(
    trace: &[TraceRecord],
    label: &'static str,
    color: &'static str,
    get: impl Fn(&TraceRecord) -> Option<f64>,
) -> Option<Series> {
    let points: Vec<_> = trace
        .iter()
        .filter_map(|r| get(r).filter(|v| v.is_finite()).map(|v| (r.t as f64, v)))
        .collect();
    (!points.is_empty()).then_some(Series {
        label,
        color,
        points,
        step: false,
    })
}

fn collect_series(trace: &[TraceRecord], kind: PlotKind) -> Vec<Series> {
    let list = match kind {
        PlotKind::Tracking => vec![
            series(trace, "true", "#000000", |r| Some(r.n_true as f64))
                .map(|s| Series { step: true, ..s }),
            series(trace, "raw", "#b0b0b0", |r| r.n_hat_raw),
            series(trace, "kf", "#1f77b4", |r| r.n_kf),
            series(trace, "nn", "#d62728", |r| r.n_nn),
        ],
        PlotKind::Loss => vec![
            series(trace, "loss", "#d62728", |r| r.loss),
            series(trace, "cusum", "#2ca02c", |r| r.g_nn),
        ],
        PlotKind::Timing => vec![
            series(trace, "kf", "#1f77b4", |r| r.kf_step_us),
            series(trace, "nn", "#d62728", |r| r.nn_step_us),
        ],
    };
    list.into_iter().flatten().collect()
}

/// Tick spacing of 1, 2 or 5 times a power of ten giving about `target` ticks.
fn nice_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    let m = if r < 1.5 {
        1.0
    } else if r < 3.5 {
        2.0
    } else if r < 7.5 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step(hi - lo, 5.0);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 120.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

/// Renders `trace` as an SVG document. The output depends only on the input.
pub fn render_svg(trace: &[TraceRecord], kind: PlotKind) -> Result<String> {
    if trace.is_empty() {
        return Err(Error::config(
            "trace",
            "nothing to plot: the trace is empty",
        ));
    }
    let plotted = collect_series(trace, kind);
    if plotted.is_empty() {
        return Err(Error::config(
            "trace",
            format!("no columns for a {kind:?} plot"),
        ));
    }

    let (x0, x1) = bounds(plotted.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = bounds(plotted.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut svg = String::new();
    let w = &mut svg;
    // Writing to a String cannot fail.
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        w,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        w,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + pw / 2.0,
        kind.title()
    );

    let _ = writeln!(w, r#"<g class="axes" stroke="dimgray" fill="none">"#);
    let _ = writeln!(
        w,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}"/>"#
    );
    for t in ticks(x0, x1) {
        let x = sx(t);
        let _ = writeln!(
            w,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}"/>"#,
            TOP + ph,
            TOP + ph + 5.0
        );
    }
    for t in ticks(y0, y1) {
        let y = sy(t);
        let _ = writeln!(
            w,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}"/>"#,
            LEFT - 5.0
        );
    }
    let _ = writeln!(w, "</g>");
    let _ = writeln!(w, r#"<g class="labels" fill="black">"#);
    for t in ticks(x0, x1) {
        let _ = writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{t}</text>"#,
            sx(t),
            TOP + ph + 18.0
        );
    }
    for t in ticks(y0, y1) {
        let _ = writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 8.0,
            sy(t) + 4.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        w,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">slot</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        w,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        kind.y_label()
    );
    let _ = writeln!(w, "</g>");

    for s in &plotted {
        let mut pts = String::new();
        let mut last: Option<(f64, f64)> = None;
        for &(x, y) in &s.points {
            if let (true, Some((_, ly))) = (s.step, last) {
                if ly != y {
                    let _ = write!(pts, "{:.2},{:.2} ", sx(x), sy(ly));
                }
            }
            let _ = write!(pts, "{:.2},{:.2} ", sx(x), sy(y));
            last = Some((x, y));
        }
        let width = if s.step { 2.0 } else { 1.2 };
        let _ = writeln!(
            w,
            r#"<polyline class="series" data-label="{}" fill="none" stroke="{}" stroke-width="{width}" points="{}"/>"#,
            s.label,
            s.color,
            pts.trim_end()
        );
    }

    let _ = writeln!(w, r#"<g class="legend">"#);
    for (i, s) in plotted.iter().enumerate() {
        let y = TOP + 10.0 + 20.0 * i as f64;
        let x = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            w,
            r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            x + 25.0,
            s.color,
            x + 32.0,
            y + 4.0,
            s.label
        );
    }
    let _ = writeln!(w, "</g>");
    let _ = writeln!(w, "</svg>");
    Ok(svg)
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 || (1e-3..1e6).contains(&v.abs()) {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    } else {
        format!("{v:.1e}")
    }
}

pub fn emit_plot(trace: &[TraceRecord], path: &Path, kind: PlotKind) -> Result<()> {
    let svg = render_svg(trace, kind)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}
