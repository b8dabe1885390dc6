//! Static SVG overlays of a prediction before and after refinement.

use std::fmt::Write as _;

use crate::types::{Trajectory, Waypoint};

const SIZE: f64 = 480.0;
const MARGIN: f64 = 24.0;

struct Frame {
    min: Waypoint,
    scale: f64,
}

impl Frame {
    fn fit<'a>(trajs: impl Iterator<Item = &'a Trajectory>) -> Frame {
        let (mut lo, mut hi) = (
            Waypoint::new(f64::MAX, f64::MAX),
            Waypoint::new(f64::MIN, f64::MIN),
        );
        for p in trajs.flat_map(|t| t.points.iter()) {
            lo = Waypoint::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Waypoint::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        if lo.x > hi.x {
            lo = Waypoint::default();
            hi = Waypoint::new(1.0, 1.0);
        }
        let extent = (hi.x - lo.x).max(hi.y - lo.y).max(1e-6);
        Frame {
            min: lo,
            scale: (SIZE - 2.0 * MARGIN) / extent,
        }
    }

    /// BEV forward (x) is drawn upward, left (y) to the left.
    fn project(&self, p: Waypoint) -> (f64, f64) {
        let u = SIZE - MARGIN - (p.y - self.min.y) * self.scale;
        let v = SIZE - MARGIN - (p.x - self.min.x) * self.scale;
        (u, v)
    }
}

fn polyline(out: &mut String, frame: &Frame, traj: &Trajectory, colour: &str, dash: &str) {
    let pts: Vec<String> = traj
        .points
        .iter()
        .map(|&p| {
            let (u, v) = frame.project(p);
            format!("{u:.2},{v:.2}")
        })
        .collect();
    let _ = writeln!(
        out,
        r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="2"{dash}/>"#,
        pts.join(" ")
    );
    for &p in &traj.points {
        let (u, v) = frame.project(p);
        let _ = writeln!(
            out,
            r#"<circle cx="{u:.2}" cy="{v:.2}" r="2.5" fill="{colour}"/>"#
        );
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Overlay of the unrefined prediction (red), refined prediction (blue)
/// and, when given, the ground truth (grey, dashed).
pub fn render_overlay(
    title: &str,
    raw: &Trajectory,
    refined: &Trajectory,
    gt: Option<&Trajectory>,
) -> String {
    let frame = Frame::fit([raw, refined].into_iter().chain(gt));
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="8" y="16" font-size="12" font-family="monospace">{}</text>"#,
        escape(title)
    );
    if let Some(gt) = gt {
        polyline(
            &mut out,
            &frame,
            gt,
            "#999999",
            r#" stroke-dasharray="4 3""#,
        );
    }
    polyline(&mut out, &frame, raw, "#d62728", "");
    polyline(&mut out, &frame, refined, "#1f77b4", "");
    out.push_str("</svg>\n");
    out
}
