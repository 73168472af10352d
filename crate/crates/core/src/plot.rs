//! Self-contained SVG figures of a trace.
//!
//! `timeseries.svg` stacks gap, velocity and wheel force against time.
//! `trajectory.svg` shows position against time with each stop line's red
//! intervals as horizontal bands, then velocity and wheel force against
//! position. Red intervals come from the signal plans when a scenario is
//! given and are otherwise read off the trace, which only knows the phase
//! of the signal ahead.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::signals::{Corridor, SignalPlan};
use crate::trace::{PhaseCell, TraceRecord};

pub const TIMESERIES_FILE: &str = "timeseries.svg";
pub const TRAJECTORY_FILE: &str = "trajectory.svg";

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("cannot plot an empty trace")]
    EmptyTrace,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

const WIDTH: f64 = 800.0;
const PANEL_HEIGHT: f64 = 220.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 45.0;
const TICKS: usize = 5;

const LINE: &str = "#1f4e9a";
const RED: &str = "#d62728";

/// Red interval `[t0, t1]` at a stop line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RedBand {
    pub stop_line: f64,
    pub t0: f64,
    pub t1: f64,
}

struct Panel<'a> {
    title: &'a str,
    x_label: &'a str,
    y_label: &'a str,
    points: Vec<(f64, f64)>,
    bands: &'a [RedBand],
}

/// Writes both figures into `out_dir` and returns their paths.
pub fn emit_plots(
    trace: &[TraceRecord],
    corridor: Option<&Corridor>,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, PlotError> {
    if trace.is_empty() {
        return Err(PlotError::EmptyTrace);
    }
    fs::create_dir_all(out_dir).map_err(|source| PlotError::Io { path: out_dir.to_path_buf(), source })?;
    let bands = match corridor {
        Some(c) => plan_bands(&c.signals, trace[0].time, trace[trace.len() - 1].time),
        None => trace_bands(trace),
    };
    let figures = [(TIMESERIES_FILE, timeseries_svg(trace)), (TRAJECTORY_FILE, trajectory_svg(trace, &bands))];
    let mut paths = Vec::new();
    for (name, svg) in figures {
        let path = out_dir.join(name);
        fs::write(&path, svg).map_err(|source| PlotError::Io { path: path.clone(), source })?;
        paths.push(path);
    }
    Ok(paths)
}

pub fn timeseries_svg(trace: &[TraceRecord]) -> String {
    let series = |f: fn(&TraceRecord) -> f64| trace.iter().map(|r| (r.time, f(r))).collect();
    render(&[
        Panel { title: "Radar distance", x_label: "time [s]", y_label: "d [m]", points: series(|r| r.radar_distance), bands: &[] },
        Panel { title: "Velocity", x_label: "time [s]", y_label: "v [m/s]", points: series(|r| r.velocity), bands: &[] },
        Panel { title: "Wheel force", x_label: "time [s]", y_label: "F [N]", points: series(|r| r.wheel_force), bands: &[] },
    ])
}

pub fn trajectory_svg(trace: &[TraceRecord], bands: &[RedBand]) -> String {
    let along = |f: fn(&TraceRecord) -> f64| trace.iter().map(|r| (r.position, f(r))).collect();
    render(&[
        Panel {
            title: "Position and red phases",
            x_label: "time [s]",
            y_label: "position [m]",
            points: trace.iter().map(|r| (r.time, r.position)).collect(),
            bands,
        },
        Panel { title: "Velocity", x_label: "position [m]", y_label: "v [m/s]", points: along(|r| r.velocity), bands: &[] },
        Panel { title: "Wheel force", x_label: "position [m]", y_label: "F [N]", points: along(|r| r.wheel_force), bands: &[] },
    ])
}

/// Red intervals of every signal over `[t0, t1]`.
pub fn plan_bands(signals: &[SignalPlan], t0: f64, t1: f64) -> Vec<RedBand> {
    let mut bands = Vec::new();
    for s in signals {
        let red_start = s.green + s.yellow;
        let first = ((t0 - s.offset) / s.cycle_length).floor() as i64 - 1;
        let last = ((t1 - s.offset) / s.cycle_length).ceil() as i64;
        for k in first..=last {
            let base = s.offset + k as f64 * s.cycle_length;
            let (a, b) = ((base + red_start).max(t0), (base + s.cycle_length).min(t1));
            if s.red > 0.0 && a < b {
                bands.push(RedBand { stop_line: s.stop_line_position, t0: a, t1: b });
            }
        }
    }
    bands
}

/// Red runs of the signal ahead, located from `position + d_tl`.
pub fn trace_bands(trace: &[TraceRecord]) -> Vec<RedBand> {
    let mut bands: Vec<RedBand> = Vec::new();
    let mut open: Option<(usize, RedBand)> = None;
    for r in trace {
        let red = match (r.signal_phase, r.signal_index, r.d_tl) {
            (PhaseCell::Red, Some(i), Some(d)) => Some((i, r.position + d)),
            _ => None,
        };
        open = match (open, red) {
            (Some((i, mut band)), Some((j, _))) if i == j => {
                band.t1 = r.time;
                Some((i, band))
            }
            (prev, next) => {
                bands.extend(prev.map(|(_, b)| b));
                next.map(|(j, line)| (j, RedBand { stop_line: line, t0: r.time, t1: r.time }))
            }
        };
    }
    bands.extend(open.map(|(_, b)| b));
    bands
}

/// Round tick spacing near `span / TICKS`.
fn tick_step(span: f64) -> f64 {
    let raw = span / TICKS as f64;
    let magnitude = 10f64.powf(raw.log10().floor());
    let m = raw / magnitude;
    let nice = if m < 1.5 {
        1.0
    } else if m < 3.0 {
        2.0
    } else if m < 7.0 {
        5.0
    } else {
        10.0
    };
    nice * magnitude
}

/// Axis range covering `values`, padded when degenerate.
fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-9 * (1.0 + lo.abs()) {
        let pad = 0.5 * (1.0 + lo.abs() * 0.1);
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

fn render(panels: &[Panel<'_>]) -> String {
    let height = PANEL_HEIGHT * panels.len() as f64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, p) in panels.iter().enumerate() {
        panel(&mut svg, p, i as f64 * PANEL_HEIGHT);
    }
    svg.push_str("</svg>\n");
    svg
}

fn panel(svg: &mut String, p: &Panel<'_>, top: f64) {
    let (x0, x1) = range(p.points.iter().map(|q| q.0));
    let (y0, y1) = range(p.points.iter().map(|q| q.1).chain(p.bands.iter().map(|b| b.stop_line)));
    let (left, right) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let (upper, lower) = (top + MARGIN_TOP, top + PANEL_HEIGHT - MARGIN_BOTTOM);
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * (right - left);
    let sy = |y: f64| lower - (y - y0) / (y1 - y0) * (lower - upper);

    let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="13" font-weight="bold">{}</text>"#, left, top + 18.0, p.title);
    let _ = writeln!(
        svg,
        r#"<rect x="{left}" y="{upper}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        right - left,
        lower - upper
    );
    for (lo, hi, horizontal) in [(x0, x1, true), (y0, y1, false)] {
        let step = tick_step(hi - lo);
        let mut v = (lo / step).ceil() * step;
        while v <= hi + 1e-9 * step {
            let label = format_tick(v, step);
            if horizontal {
                let x = sx(v);
                let _ = writeln!(svg, r##"<line x1="{x:.2}" y1="{lower}" x2="{x:.2}" y2="{upper}" stroke="#e0e0e0"/>"##);
                let _ = writeln!(svg, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{label}</text>"#, lower + 14.0);
            } else {
                let y = sy(v);
                let _ = writeln!(svg, r##"<line x1="{left}" y1="{y:.2}" x2="{right}" y2="{y:.2}" stroke="#e0e0e0"/>"##);
                let _ = writeln!(svg, r#"<text x="{}" y="{:.2}" text-anchor="end">{label}</text>"#, left - 5.0, y + 4.0);
            }
            v += step;
        }
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (left + right) / 2.0, lower + 32.0, p.x_label);
    let (lx, ly) = (18.0, (upper + lower) / 2.0);
    let _ = writeln!(svg, r#"<text x="{lx}" y="{ly}" text-anchor="middle" transform="rotate(-90 {lx} {ly})">{}</text>"#, p.y_label);

    for b in p.bands {
        let y = sy(b.stop_line);
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{RED}" stroke-width="4"/>"#,
            sx(b.t0),
            sx(b.t1)
        );
    }
    match p.points.as_slice() {
        [] => {}
        [(x, y)] => {
            let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{LINE}"/>"#, sx(*x), sy(*y));
        }
        points => {
            let path: Vec<String> = points
                .iter()
                .filter(|q| q.1.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let _ = writeln!(svg, r#"<polyline fill="none" stroke="{LINE}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
        }
    }
}

fn format_tick(v: f64, step: f64) -> String {
    let decimals = if step >= 1.0 { 0 } else { (-step.log10().floor()) as usize };
    let v = if v.abs() < step * 1e-6 { 0.0 } else { v };
    format!("{v:.decimals$}")
}
