//! SVG export of episode traces: a trajectory overlay and a subtask Gantt
//! chart. Output depends only on its inputs, so reruns give identical files.

use std::fmt::Write as _;

use crate::geometry::{Polygon, Pose, Vec2};
use crate::scenario::Scenario;
use crate::trace::Trace;

/// Pixels per metre.
const SCALE: f64 = 100.0;
const MARGIN: f64 = 20.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

struct Canvas {
    lo: Vec2,
    hi: Vec2,
    out: String,
}

impl Canvas {
    fn new(lo: Vec2, hi: Vec2) -> Self {
        let (w, h) = ((hi.x - lo.x) * SCALE + 2.0 * MARGIN, (hi.y - lo.y) * SCALE + 2.0 * MARGIN);
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#
        );
        let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
        Self { lo, hi, out }
    }

    fn px(&self, p: &Vec2) -> (f64, f64) {
        (MARGIN + (p.x - self.lo.x) * SCALE, MARGIN + (self.hi.y - p.y) * SCALE)
    }

    fn points(&self, pts: &[Vec2]) -> String {
        let v: Vec<String> = pts
            .iter()
            .map(|p| {
                let (x, y) = self.px(p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        v.join(" ")
    }

    fn polygon(&mut self, pts: &[Vec2], style: &str) {
        let pts = self.points(pts);
        let _ = writeln!(self.out, r#"<polygon points="{pts}" {style}/>"#);
    }

    fn polyline(&mut self, pts: &[Vec2], style: &str) {
        if pts.len() < 2 {
            return;
        }
        let pts = self.points(pts);
        let _ = writeln!(self.out, r#"<polyline points="{pts}" fill="none" {style}/>"#);
    }

    fn cross(&mut self, p: &Vec2, color: &str) {
        let (x, y) = self.px(p);
        let _ = writeln!(
            self.out,
            r#"<path d="M{:.2},{:.2}L{:.2},{:.2}M{:.2},{:.2}L{:.2},{:.2}" stroke="{color}" stroke-width="1.5"/>"#,
            x - 4.0,
            y - 4.0,
            x + 4.0,
            y + 4.0,
            x - 4.0,
            y + 4.0,
            x + 4.0,
            y - 4.0
        );
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

fn placed(poly: &Polygon, pose: &Pose) -> Vec<Vec2> {
    poly.vertices().iter().map(|v| pose.transform_point(v)).collect()
}

/// Workspace, obstacles, planned paths (dashed), executed object paths,
/// stage keyframes (crosses), and start (faint) and final (solid) poses.
pub fn trajectory_svg(sc: &Scenario, trace: &Trace) -> String {
    let (lo, hi) = match trace.header.workspace {
        Some([a, b, c, d]) => (Vec2::new(a, b), Vec2::new(c, d)),
        None => sc.bounds,
    };
    let mut cv = Canvas::new(lo, hi);
    let outline = [lo, Vec2::new(hi.x, lo.y), hi, Vec2::new(lo.x, hi.y)];
    cv.polygon(&outline, r##"fill="none" stroke="#000000" stroke-width="2""##);
    for o in &sc.obstacles {
        cv.polygon(o.vertices(), r##"fill="#9e9e9e" stroke="#616161""##);
    }
    for st in &trace.header.subtasks {
        let pts: Vec<Vec2> = st.poses.iter().map(Pose::position).collect();
        let style = format!(r#"stroke="{}" stroke-width="1" stroke-dasharray="4 3""#, color(st.object));
        cv.polyline(&pts, &style);
    }
    for (m, o) in sc.objects.iter().enumerate() {
        let style = format!(r#"fill="{}" fill-opacity="0.15" stroke="{}" stroke-opacity="0.4""#, color(m), color(m));
        cv.polygon(&placed(&o.model.poly, &o.start), &style);
        let path: Vec<Vec2> = trace.ticks.iter().filter_map(|t| t.objects.get(m)).map(Pose::position).collect();
        cv.polyline(&path, &format!(r#"stroke="{}" stroke-width="2""#, color(m)));
        if let Some(end) = trace.ticks.last().and_then(|t| t.objects.get(m)) {
            let style = format!(r#"fill="{}" fill-opacity="0.5" stroke="{}""#, color(m), color(m));
            cv.polygon(&placed(&o.model.poly, end), &style);
        }
    }
    let object_of = |label: &str| trace.header.subtasks.iter().find(|s| s.label == label).map_or(0, |s| s.object);
    for (label, k) in trace.keyframes() {
        cv.cross(&k.position(), color(object_of(&label)));
    }
    cv.finish()
}

/// One bar per subtask over the time it was running, labelled with its
/// robots.
pub fn gantt_svg(trace: &Trace) -> String {
    const ROW: f64 = 24.0;
    const LEFT: f64 = 80.0;
    const WIDTH: f64 = 600.0;
    let activity = trace.activity();
    let groups = trace.groups();
    let end = trace.ticks.last().map_or(0.0, |t| t.t).max(1e-9);
    let rows = activity.len().max(1);
    let h = ROW * (rows as f64 + 1.0) + 2.0 * MARGIN;
    let w = LEFT + WIDTH + 2.0 * MARGIN;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let axis_y = MARGIN + ROW * rows as f64;
    let _ = writeln!(
        out,
        r##"<line x1="{:.2}" y1="{axis_y:.2}" x2="{:.2}" y2="{axis_y:.2}" stroke="#000000"/>"##,
        MARGIN + LEFT,
        MARGIN + LEFT + WIDTH
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-family="monospace" font-size="11" text-anchor="end">{end:.1} s</text>"#,
        MARGIN + LEFT + WIDTH,
        axis_y + 16.0
    );
    let x = |t: f64| MARGIN + LEFT + WIDTH * t / end;
    let object_of = |label: &str| trace.header.subtasks.iter().find(|s| s.label == label).map_or(0, |s| s.object);
    for (i, (label, (a, b))) in activity.iter().enumerate() {
        let y = MARGIN + ROW * i as f64;
        let robots: Vec<String> = groups.get(label).map_or_else(Vec::new, |g| g.iter().map(|r| format!("r{r}")).collect());
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-family="monospace" font-size="12">{label}</text>"#,
            MARGIN,
            y + 16.0
        );
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
            x(*a),
            y + 4.0,
            (x(*b) - x(*a)).max(1.0),
            ROW - 8.0,
            color(object_of(label))
        );
        let _ = writeln!(
            out,
            r##"<text x="{:.2}" y="{:.2}" font-family="monospace" font-size="10" fill="#ffffff">{}</text>"##,
            x(*a) + 3.0,
            y + 15.0,
            robots.join(" ")
        );
    }
    out.push_str("</svg>\n");
    out
}
