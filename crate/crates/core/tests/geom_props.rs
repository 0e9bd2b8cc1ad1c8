mod common;

use proptest::prelude::*;
use textpoly_core::geom::{
    bernstein_basis, bezier_from_box, box_to_poly, buffer_polyline, fit_bezier, polygon_width, sample_polyline,
    vertex_tangent, Bbox, BezierCurve, Point,
};

proptest! {
    #[test]
    fn bernstein_is_a_partition_of_unity(t in 0.0..=1.0f64) {
        let b = bernstein_basis(t).unwrap();
        prop_assert!(b.iter().all(|v| *v >= 0.0));
        prop_assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bernstein_rejects_outside_unit_interval(t in prop_oneof![-10.0..-1e-9f64, (1.0 + 1e-9)..10.0f64]) {
        prop_assert!(bernstein_basis(t).is_err());
    }

    #[test]
    fn box_to_poly_commutes_with_scaling(
        b in common::bbox(),
        d in common::bezier_delta(),
        k in 0.1..10.0f64,
    ) {
        let Ok(p) = box_to_poly(&b, &d, 8) else { return Ok(()) };
        let scaled = Bbox::new(b.cx * k, b.cy * k, b.w * k, b.h * k).unwrap();
        let q = box_to_poly(&scaled, &d, 8).unwrap();
        let tol = 1e-9 * (1.0 + k * 200.0);
        for (a, b) in p.vertices().zip(q.vertices()) {
            prop_assert!((a * k - b).norm() < tol, "{a:?} * {k} vs {b:?}");
        }
    }

    #[test]
    fn box_to_poly_commutes_with_translation(
        b in common::bbox(),
        d in common::bezier_delta(),
        tx in -50.0..50.0f64,
        ty in -50.0..50.0f64,
    ) {
        let Ok(p) = box_to_poly(&b, &d, 8) else { return Ok(()) };
        let moved = Bbox::new(b.cx + tx, b.cy + ty, b.w, b.h).unwrap();
        let q = box_to_poly(&moved, &d, 8).unwrap();
        for (a, b) in p.translate(Point::new(tx, ty)).vertices().zip(q.vertices()) {
            prop_assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn buffering_centres_on_the_polyline(
        b in common::bbox(),
        d in common::bezier_delta(),
        samples in 2usize..16,
    ) {
        let curve = bezier_from_box(&b, &d).unwrap();
        let line = sample_polyline(&curve, samples).unwrap();
        let wp = polygon_width(&b, d.dwp).unwrap();
        let Ok(poly) = buffer_polyline(&line, wp) else { return Ok(()) };
        for (s, p) in line.verts.iter().enumerate() {
            let (t, bo) = (poly.top[s], poly.bot[s]);
            prop_assert!((t.midpoint(bo) - *p).norm() < 1e-9);
            prop_assert!(((t - bo).norm() - wp).abs() < 1e-9 * (1.0 + wp));
            // top lies to the left of the direction of travel
            let tangent = vertex_tangent(&line.verts, s).unwrap();
            prop_assert!(tangent.cross(t - bo) > 0.0);
        }
    }

    #[test]
    fn sampling_pins_endpoints(
        ctrl in proptest::array::uniform4((-100.0..100.0f64, -100.0..100.0f64)),
        samples in 2usize..20,
    ) {
        let curve = BezierCurve::new(ctrl.map(|(x, y)| Point::new(x, y)));
        let line = sample_polyline(&curve, samples).unwrap();
        prop_assert_eq!(line.verts.len(), samples);
        prop_assert_eq!(line.verts[0], curve.ctrl[0]);
        prop_assert_eq!(line.verts[samples - 1], curve.ctrl[3]);
    }

    #[test]
    fn fit_recovers_sampled_cubic(
        ctrl in proptest::array::uniform4((-100.0..100.0f64, -100.0..100.0f64)),
        samples in 4usize..20,
    ) {
        let curve = BezierCurve::new(ctrl.map(|(x, y)| Point::new(x, y)));
        let line = sample_polyline(&curve, samples).unwrap();
        let fit = fit_bezier(&line.verts).unwrap();
        for (a, b) in fit.ctrl.iter().zip(&curve.ctrl) {
            prop_assert!((*a - *b).norm() < 1e-6, "{a:?} vs {b:?}");
        }
    }
}
