#![allow(dead_code)]

use proptest::prelude::*;
use textpoly_core::geom::{box_to_poly, Bbox, BezierDelta, Point, TextPolygon};
use textpoly_core::polyiou::Quad;

pub fn bbox() -> impl Strategy<Value = Bbox> {
    (-100.0..100.0f64, -100.0..100.0f64, 2.0..80.0f64, 2.0..80.0f64)
        .prop_map(|(cx, cy, w, h)| Bbox::new(cx, cy, w, h).unwrap())
}

pub fn bezier_delta() -> impl Strategy<Value = BezierDelta> {
    (proptest::array::uniform4((-0.5..0.5f64, -0.5..0.5f64)), -1.5..0.0f64)
        .prop_map(|(dp, dwp)| BezierDelta { dp: dp.map(|(x, y)| [x, y]), dwp })
}

/// Polygons produced by the box-to-polygon conversion.
pub fn text_polygon(samples: usize) -> impl Strategy<Value = TextPolygon> {
    (bbox(), bezier_delta()).prop_filter_map("degenerate centerline", move |(b, d)| box_to_poly(&b, &d, samples).ok())
}

/// Arbitrary pairs of point rows, not necessarily simple.
pub fn free_polygon(samples: usize) -> impl Strategy<Value = TextPolygon> {
    proptest::collection::vec((-50.0..50.0f64, -50.0..50.0f64), 2 * samples).prop_map(move |v| {
        let pts: Vec<Point> = v.into_iter().map(|(x, y)| Point::new(x, y)).collect();
        TextPolygon::new(pts[..samples].to_vec(), pts[samples..].to_vec()).unwrap()
    })
}

/// Convex quad inscribed in a circle with well separated corners.
pub fn convex_quad() -> impl Strategy<Value = Quad> {
    (
        -20.0..20.0f64,
        -20.0..20.0f64,
        2.0..30.0f64,
        0.0..std::f64::consts::TAU,
        proptest::array::uniform4(0.3..1.0f64),
    )
        .prop_map(|(cx, cy, r, start, gaps)| {
            let total: f64 = gaps.iter().sum();
            let mut angle = start;
            let mut pts = [Point::default(); 4];
            for (p, g) in pts.iter_mut().zip(gaps) {
                *p = Point::new(cx + r * angle.cos(), cy + r * angle.sin());
                angle += g / total * std::f64::consts::TAU;
            }
            Quad::new(pts)
        })
}

/// Mildly curved text lines: control points near an evenly spaced chord.
pub fn gentle_polygon(samples: usize) -> impl Strategy<Value = TextPolygon> {
    (
        bbox(),
        proptest::array::uniform4((-0.05..0.05f64, -0.15..0.15f64)),
        -1.5..-0.5f64,
    )
        .prop_filter_map("degenerate centerline", move |(b, jitter, dwp)| {
            let chord = [-0.5, -1.0 / 6.0, 1.0 / 6.0, 0.5];
            let mut dp = [[0.0; 2]; 4];
            for j in 0..4 {
                dp[j] = [chord[j] + jitter[j].0, jitter[j].1];
            }
            box_to_poly(&b, &BezierDelta { dp, dwp }, samples).ok()
        })
}
