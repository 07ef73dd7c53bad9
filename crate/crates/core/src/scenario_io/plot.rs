//! SVG figure of a plan: top-down trajectory, altitude profile along the path,
//! and objective history with order steps circled.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::planner::{PlanResult, Scenario};
use crate::route_optimizer::check_permutation;
use crate::waypoint_optimizer::{IterationTrace, TraceBlock};

const PANEL_W: f64 = 380.0;
const PANEL_H: f64 = 340.0;
const GAP: f64 = 20.0;
const PAD: f64 = 48.0;

/// Maps a data range onto a pixel range.
#[derive(Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Axis {
    fn new(lo: f64, hi: f64, px_lo: f64, px_hi: f64) -> Self {
        let (lo, hi) = if hi - lo > 1e-12 * hi.abs().max(1.0) {
            (lo, hi)
        } else {
            let pad = 0.5 * hi.abs().max(1.0);
            (lo - pad, hi + pad)
        };
        Self {
            lo,
            hi,
            px_lo,
            px_hi,
        }
    }

    fn map(&self, v: f64) -> f64 {
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }
}

struct Panel {
    x0: f64,
    y0: f64,
}

impl Panel {
    fn at(index: usize) -> Self {
        Self {
            x0: GAP + index as f64 * (PANEL_W + GAP),
            y0: GAP,
        }
    }

    fn x_axis(&self, lo: f64, hi: f64) -> Axis {
        Axis::new(lo, hi, self.x0 + PAD, self.x0 + PANEL_W - 12.0)
    }

    fn y_axis(&self, lo: f64, hi: f64) -> Axis {
        Axis::new(lo, hi, self.y0 + PANEL_H - PAD, self.y0 + 30.0)
    }

    fn frame(
        &self,
        out: &mut String,
        title: &str,
        x: &Axis,
        y: &Axis,
        x_label: &str,
        y_label: &str,
    ) {
        let _ = writeln!(
            out,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#999"/>"##,
            x.px_lo,
            y.px_hi,
            x.px_hi - x.px_lo,
            y.px_lo - y.px_hi
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="14" text-anchor="middle">{title}</text>"#,
            self.x0 + PANEL_W / 2.0,
            self.y0 + 16.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{x_label}</text>"#,
            (x.px_lo + x.px_hi) / 2.0,
            y.px_lo + 32.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle" transform="rotate(-90 {:.2} {:.2})">{y_label}</text>"#,
            self.x0 + 12.0,
            (y.px_lo + y.px_hi) / 2.0,
            self.x0 + 12.0,
            (y.px_lo + y.px_hi) / 2.0
        );
        for (v, anchor) in [(x.lo, "start"), (x.hi, "end")] {
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="{anchor}">{}</text>"#,
                x.map(v),
                y.px_lo + 14.0,
                tick(v)
            );
        }
        for v in [y.lo, y.hi] {
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{}</text>"#,
                x.px_lo - 4.0,
                y.map(v) + 4.0,
                tick(v)
            );
        }
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.1}")
    }
}

fn polyline(out: &mut String, pts: &[(f64, f64)], stroke: &str) {
    let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    let _ = writeln!(
        out,
        r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="1.5"/>"#,
        coords.join(" ")
    );
}

fn dot(out: &mut String, x: f64, y: f64, r: f64, fill: &str) {
    let _ = writeln!(
        out,
        r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r:.2}" fill="{fill}"/>"#
    );
}

fn check_consistent(scn: &Scenario<f64>, result: &PlanResult<f64>) -> Result<()> {
    if result.waypoints.len() != scn.len() {
        return Err(Error::Inconsistent(format!(
            "result has {} waypoints for {} targets",
            result.waypoints.len(),
            scn.len()
        )));
    }
    check_permutation(&result.tour.order, scn.len()).map_err(|e| Error::Inconsistent(e.to_string()))
}

/// Renders the three-panel figure as a standalone SVG document.
pub fn render_svg(scn: &Scenario<f64>, result: &PlanResult<f64>) -> Result<String> {
    check_consistent(scn, result)?;
    let path: Vec<(f64, f64, f64)> = std::iter::once(scn.start())
        .chain(result.tour.order.iter().map(|&i| &result.waypoints[i]))
        .chain(std::iter::once(scn.end()))
        .map(|w| (w.q.x, w.q.y, w.z))
        .collect();

    let width = 3.0 * PANEL_W + 4.0 * GAP;
    let height = PANEL_H + 2.0 * GAP;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        "<!-- {} distance {:.6} m -->",
        result.scheme, result.distance
    );

    // Top-down view with a common scale on both axes.
    let panel = Panel::at(0);
    let (mut xlo, mut xhi, mut ylo, mut yhi) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for t in scn.targets() {
        xlo = xlo.min(t.center.x - t.radius);
        xhi = xhi.max(t.center.x + t.radius);
        ylo = ylo.min(t.center.y - t.radius);
        yhi = yhi.max(t.center.y + t.radius);
    }
    for &(x, y, _) in &path {
        xlo = xlo.min(x);
        xhi = xhi.max(x);
        ylo = ylo.min(y);
        yhi = yhi.max(y);
    }
    let span = (xhi - xlo).max(yhi - ylo).max(1.0);
    let (cx, cy) = ((xlo + xhi) / 2.0, (ylo + yhi) / 2.0);
    let xa = panel.x_axis(cx - span / 2.0, cx + span / 2.0);
    let ya = panel.y_axis(cy - span / 2.0, cy + span / 2.0);
    panel.frame(&mut out, "(a) Top view", &xa, &ya, "x (m)", "y (m)");
    let scale = (xa.px_hi - xa.px_lo) / (xa.hi - xa.lo);
    for t in scn.targets() {
        let _ = writeln!(
            out,
            r##"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="#cfe3f7" stroke="#4a7fb5"/>"##,
            xa.map(t.center.x),
            ya.map(t.center.y),
            t.radius * scale
        );
    }
    let top: Vec<(f64, f64)> = path
        .iter()
        .map(|&(x, y, _)| (xa.map(x), ya.map(y)))
        .collect();
    polyline(&mut out, &top, "#c0392b");
    for &(x, y) in &top[1..top.len() - 1] {
        dot(&mut out, x, y, 3.0, "#c0392b");
    }
    dot(&mut out, top[0].0, top[0].1, 4.5, "#27ae60");
    dot(
        &mut out,
        top[top.len() - 1].0,
        top[top.len() - 1].1,
        3.0,
        "#2c3e50",
    );

    // Altitude against distance flown.
    let panel = Panel::at(1);
    let mut progress = vec![0.0];
    for w in path.windows(2) {
        let (a, b) = (w[0], w[1]);
        let leg = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2) + (b.2 - a.2).powi(2)).sqrt();
        progress.push(progress[progress.len() - 1] + leg);
    }
    let zmax = path.iter().map(|p| p.2).fold(0.0, f64::max);
    let zmin = path.iter().map(|p| p.2).fold(0.0, f64::min);
    let xa = panel.x_axis(0.0, progress[progress.len() - 1]);
    let ya = panel.y_axis(zmin, zmax * 1.1);
    panel.frame(
        &mut out,
        "(b) Altitude profile",
        &xa,
        &ya,
        "distance flown (m)",
        "altitude (m)",
    );
    let prof: Vec<(f64, f64)> = progress
        .iter()
        .zip(&path)
        .map(|(&s, p)| (xa.map(s), ya.map(p.2)))
        .collect();
    polyline(&mut out, &prof, "#8e44ad");
    for &(x, y) in &prof[1..prof.len() - 1] {
        dot(&mut out, x, y, 3.0, "#8e44ad");
    }

    // Objective history.
    let panel = Panel::at(2);
    let objs: Vec<f64> = result.trace.objectives().collect();
    let lo = objs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = objs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let xa = panel.x_axis(0.0, (objs.len() - 1).max(1) as f64);
    let ya = panel.y_axis(lo, hi);
    panel.frame(
        &mut out,
        "(c) Convergence",
        &xa,
        &ya,
        "iteration",
        "distance (m)",
    );
    let conv: Vec<(f64, f64)> = objs
        .iter()
        .enumerate()
        .map(|(i, &v)| (xa.map(i as f64), ya.map(v)))
        .collect();
    if conv.len() > 1 {
        polyline(&mut out, &conv, "#2c3e50");
    }
    dot(&mut out, conv[0].0, conv[0].1, 2.5, "#2c3e50");
    for (r, &(x, y)) in result.trace.records.iter().zip(&conv[1..]) {
        if r.block == TraceBlock::Order {
            let _ = writeln!(
                out,
                r##"<circle cx="{x:.2}" cy="{y:.2}" r="5" fill="none" stroke="#e67e22" stroke-width="1.5"/>"##
            );
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Trace as CSV with the initial objective in row 0.
pub fn trace_csv(trace: &IterationTrace<f64>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(["iter", "block", "objective_m", "max_violation"])
        .map_err(csv_err)?;
    w.write_record(["0", "INIT", &trace.initial.to_string(), ""])
        .map_err(csv_err)?;
    for r in &trace.records {
        w.write_record([
            r.iter.to_string(),
            r.block.label().to_string(),
            r.objective.to_string(),
            r.max_violation.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}
