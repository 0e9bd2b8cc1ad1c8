mod common;

use proptest::prelude::*;
use textpoly_core::geom::{Bbox, Point, TextPolygon};
use textpoly_core::polyalign::{polyalign, roialign_box, AlignVariant, FeatureMap, FeaturePyramid};

const STRIDE: f64 = 4.0;
const SIZE: usize = 64;

fn pyramid(f: impl Fn(f64, f64, usize) -> f64) -> FeaturePyramid {
    FeaturePyramid::new(vec![FeatureMap::from_fn(SIZE, SIZE, 2, STRIDE, f).unwrap()]).unwrap()
}

fn variant() -> impl Strategy<Value = AlignVariant> {
    prop_oneof![Just(AlignVariant::Vertex), Just(AlignVariant::Grid), Just(AlignVariant::Bezier)]
}

/// Polygons well inside the cell-centre hull, so no sample is clamped.
fn interior_polygon() -> impl Strategy<Value = TextPolygon> {
    common::text_polygon(6).prop_filter_map("leaves the interior", |p| {
        let lo = STRIDE * 2.0;
        let hi = STRIDE * (SIZE as f64 - 2.0);
        let moved = p.translate(Point::new(128.0, 128.0));
        let inside = moved.vertices().all(|v| v.x > lo && v.x < hi && v.y > lo && v.y < hi);
        inside.then_some(moved)
    })
}

proptest! {
    #[test]
    fn aggregation_is_linear_in_the_features(
        p in interior_polygon(),
        v in variant(),
        a in -3.0..3.0f64,
        b in -3.0..3.0f64,
    ) {
        let f = |x: f64, y: f64, c: usize| (x * 0.1).sin() + c as f64 * (y * 0.07).cos();
        let g = |x: f64, y: f64, c: usize| (x * y * 1e-3).cos() - c as f64;
        let fa = polyalign(&pyramid(f), &p, v).unwrap();
        let ga = polyalign(&pyramid(g), &p, v).unwrap();
        let ha = polyalign(&pyramid(|x, y, c| a * f(x, y, c) + b * g(x, y, c)), &p, v).unwrap();
        for ((h, f), g) in ha.as_slice().iter().zip(fa.as_slice()).zip(ga.as_slice()) {
            prop_assert!((h - (a * f + b * g)).abs() < 1e-9);
        }
    }

    #[test]
    fn vertex_variant_is_exact_on_affine_fields(
        p in interior_polygon(),
        coef in proptest::array::uniform3(-2.0..2.0f64),
    ) {
        let [a, b, c] = coef;
        let field = |q: Point| a * q.x + b * q.y + c;
        let feat = polyalign(&pyramid(|x, y, _| field(Point::new(x, y))), &p, AlignVariant::Vertex).unwrap();
        for s in 0..p.samples() {
            let rows = [p.top[s], p.top[s].midpoint(p.bot[s]), p.bot[s]];
            for (row, q) in rows.into_iter().enumerate() {
                prop_assert!((feat.get(s, row, 0) - field(q)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn every_variant_reproduces_constant_fields(p in interior_polygon(), v in variant(), k in -5.0..5.0f64) {
        let feat = polyalign(&pyramid(|_, _, c| k + c as f64), &p, v).unwrap();
        prop_assert_eq!(feat.shape(), [6, 3, 2]);
        for s in 0..6 {
            for row in 0..3 {
                prop_assert!((feat.get(s, row, 0) - k).abs() < 1e-9);
                prop_assert!((feat.get(s, row, 1) - k - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn roialign_averages_affine_fields_at_bin_centres(
        cx in 60.0..190.0f64,
        cy in 60.0..190.0f64,
        w in 8.0..50.0f64,
        h in 8.0..50.0f64,
        coef in proptest::array::uniform3(-2.0..2.0f64),
    ) {
        let [a, b, c] = coef;
        let pyr = pyramid(|x, y, _| a * x + b * y + c);
        let bbox = Bbox::new(cx, cy, w, h).unwrap();
        let out = roialign_box(&pyr, &bbox, 7, 7, 2).unwrap();
        for i in 0..7 {
            for j in 0..7 {
                let x = cx - w / 2.0 + (j as f64 + 0.5) * w / 7.0;
                let y = cy - h / 2.0 + (i as f64 + 0.5) * h / 7.0;
                prop_assert!((out[(i * 7 + j) * 2] - (a * x + b * y + c)).abs() < 1e-9);
            }
        }
    }
}
