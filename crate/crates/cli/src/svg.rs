//! Standalone SVG documents. Coordinates are printed with fixed precision so
//! output bytes depend only on the inputs.

use std::fmt::Write;

use textpoly_core::{Bbox, Point, TextPolygon};

/// Drawing area in scene coordinates (y up); flipped to SVG's y-down.
#[derive(Clone, Copy, Debug)]
pub struct Canvas {
    pub x0: f64,
    pub y0: f64,
    pub width: f64,
    pub height: f64,
}

impl Canvas {
    pub fn from_size(width: f64, height: f64) -> Self {
        Self { x0: 0.0, y0: 0.0, width, height }
    }

    /// Smallest canvas holding every point, padded by 5 %.
    pub fn fitting(points: impl IntoIterator<Item = Point>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let (mut lo, mut hi) = (first, first);
        for p in it {
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let pad = 0.05 * (hi.x - lo.x).max(hi.y - lo.y).max(1.0);
        Some(Self { x0: lo.x - pad, y0: lo.y - pad, width: hi.x - lo.x + 2.0 * pad, height: hi.y - lo.y + 2.0 * pad })
    }

    fn map(&self, p: Point) -> (f64, f64) {
        (p.x - self.x0, self.y0 + self.height - p.y)
    }
}

fn header(out: &mut String, c: &Canvas) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {:.2} {:.2}" width="{:.0}" height="{:.0}">"#,
        c.width,
        c.height,
        c.width.max(1.0),
        c.height.max(1.0)
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{:.2}" height="{:.2}" fill="white"/>"#, c.width, c.height);
}

fn polygon(out: &mut String, c: &Canvas, pts: &[Point], style: &str) {
    let coords: Vec<String> = pts
        .iter()
        .map(|p| {
            let (x, y) = c.map(*p);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let _ = writeln!(out, r#"<polygon points="{}" {style}/>"#, coords.join(" "));
}

fn box_outline(b: &Bbox) -> [Point; 4] {
    let (hw, hh) = (b.w / 2.0, b.h / 2.0);
    [
        Point::new(b.cx - hw, b.cy - hh),
        Point::new(b.cx + hw, b.cy - hh),
        Point::new(b.cx + hw, b.cy + hh),
        Point::new(b.cx - hw, b.cy + hh),
    ]
}

/// Geometry drawn for one cascade stage.
pub enum StageShapes<'a> {
    Boxes(&'a [Bbox]),
    Polygons(&'a [TextPolygon]),
}

/// Ground truth in green, stage geometry in blue; the top boundary of each
/// polygon is marked with a red dot at its first vertex.
pub fn stage_svg(canvas: &Canvas, title: &str, shapes: StageShapes<'_>, ground_truth: &[TextPolygon]) -> String {
    let mut out = String::new();
    header(&mut out, canvas);
    for g in ground_truth {
        polygon(&mut out, canvas, &g.outline(), r##"fill="#2ca02c" fill-opacity="0.25" stroke="#2ca02c" stroke-width="1""##);
    }
    match shapes {
        StageShapes::Boxes(boxes) => {
            for b in boxes {
                polygon(&mut out, canvas, &box_outline(b), r##"fill="none" stroke="#1f77b4" stroke-width="1""##);
            }
        }
        StageShapes::Polygons(polys) => {
            for p in polys {
                polygon(&mut out, canvas, &p.outline(), r##"fill="none" stroke="#1f77b4" stroke-width="1""##);
                let (x, y) = canvas.map(p.top[0]);
                let _ = writeln!(out, r##"<circle cx="{x:.2}" cy="{y:.2}" r="1.5" fill="#d62728"/>"##);
            }
        }
    }
    let _ = writeln!(out, r#"<text x="4" y="14" font-family="monospace" font-size="12">{}</text>"#, escape(title));
    out.push_str("</svg>\n");
    out
}

/// Precision against recall, one marker per `(recall, precision, label)`.
pub fn pr_curve_svg(points: &[(f64, f64, String)]) -> String {
    const SIZE: f64 = 320.0;
    const PAD: f64 = 40.0;
    let total = SIZE + 2.0 * PAD;
    let to_px = |r: f64, p: f64| (PAD + r * SIZE, PAD + (1.0 - p) * SIZE);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {total:.0} {total:.0}" width="{total:.0}" height="{total:.0}">"#
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{total:.0}" height="{total:.0}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<rect x="{PAD:.0}" y="{PAD:.0}" width="{SIZE:.0}" height="{SIZE:.0}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let v = k as f64 / 4.0;
        let (x, _) = to_px(v, 0.0);
        let (_, y) = to_px(0.0, v);
        let _ = writeln!(out, r#"<text x="{x:.1}" y="{:.1}" font-size="10" text-anchor="middle">{v:.2}</text>"#, PAD + SIZE + 14.0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{y:.1}" font-size="10" text-anchor="end">{v:.2}</text>"#, PAD - 4.0);
    }
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">recall</text>"#, PAD + SIZE / 2.0, total - 6.0);
    let _ = writeln!(
        out,
        r#"<text x="12" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 12 {:.1})">precision</text>"#,
        PAD + SIZE / 2.0,
        PAD + SIZE / 2.0
    );
    let path: Vec<String> = points
        .iter()
        .map(|(r, p, _)| {
            let (x, y) = to_px(*r, *p);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    if !path.is_empty() {
        let _ = writeln!(out, r##"<polyline points="{}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>"##, path.join(" "));
    }
    for (r, p, label) in points {
        let (x, y) = to_px(*r, *p);
        let _ = writeln!(out, r##"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="#1f77b4"><title>{}</title></circle>"##, escape(label));
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
