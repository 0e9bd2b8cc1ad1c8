mod common;

use proptest::prelude::*;
use textpoly_core::geom::{Bbox, Point, TextPolygon};
use textpoly_core::refine::{
    apply_box_delta, apply_poly_delta, from_center_diff, inverse_box_delta, inverse_poly_delta, to_center_diff,
    BoxDelta, PolyDelta, DIFF_EPS,
};

fn poly_delta(samples: usize, limit: f64) -> impl Strategy<Value = PolyDelta> {
    proptest::collection::vec(-limit..limit, 4 * samples).prop_map(|v| PolyDelta::from_flat(&v).unwrap())
}

fn box_delta() -> impl Strategy<Value = BoxDelta> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(dx, dy, dw, dh)| BoxDelta { dx, dy, dw, dh })
}

/// Multiples of 1/8 in [-64, 64]: sums, halvings and differences are exact.
fn dyadic_polygon(samples: usize) -> impl Strategy<Value = TextPolygon> {
    proptest::collection::vec((-512i32..512, -512i32..512), 2 * samples).prop_map(move |v| {
        let pts: Vec<Point> = v.into_iter().map(|(x, y)| Point::new(x as f64 / 8.0, y as f64 / 8.0)).collect();
        TextPolygon::new(pts[..samples].to_vec(), pts[samples..].to_vec()).unwrap()
    })
}

fn sign(v: f64) -> i8 {
    (v > 0.0) as i8 - (v < 0.0) as i8
}

proptest! {
    #[test]
    fn center_diff_round_trip_is_exact_on_dyadic_input(p in dyadic_polygon(6)) {
        prop_assert_eq!(from_center_diff(&to_center_diff(&p)).unwrap(), p);
    }

    #[test]
    fn poly_update_preserves_difference_signs(p in common::free_polygon(5), d in poly_delta(5, 4.0)) {
        let cd = to_center_diff(&p);
        let next = apply_poly_delta(&cd, &d).unwrap();
        for (a, b) in cd.verts.iter().zip(&next.verts) {
            prop_assert_eq!(sign(a.dx), sign(b.dx));
            prop_assert_eq!(sign(a.dy), sign(b.dy));
        }
    }

    #[test]
    fn poly_update_commutes_with_translation_and_scale(
        p in common::free_polygon(4),
        d in poly_delta(4, 2.0),
        k in 0.1..10.0f64,
        tx in -100.0..100.0f64,
        ty in -100.0..100.0f64,
    ) {
        let map = |q: Point| Point::new(k * q.x + tx, k * q.y + ty);
        let step = |q: &TextPolygon| from_center_diff(&apply_poly_delta(&to_center_diff(q), &d).unwrap()).unwrap();
        let a = step(&p).map_points(map);
        let b = step(&p.map_points(map));
        let scale = 1.0 + a.vertices().map(|v| v.norm()).fold(0.0, f64::max);
        for (u, v) in a.vertices().zip(b.vertices()) {
            prop_assert!((u - v).norm() < 1e-9 * scale, "{u:?} vs {v:?}");
        }
    }

    #[test]
    fn sign_compatible_targets_are_reached_in_one_step(
        p in common::free_polygon(5),
        q in common::free_polygon(5),
    ) {
        let (cd, target) = (to_center_diff(&p), to_center_diff(&q));
        let compatible = cd.verts.iter().zip(&target.verts).all(|(a, b)| {
            a.dx.abs() >= DIFF_EPS && a.dy.abs() >= DIFF_EPS && a.dx * b.dx > 0.0 && a.dy * b.dy > 0.0
        });
        match inverse_poly_delta(&cd, &target) {
            Ok(d) => {
                prop_assert!(compatible);
                let reached = from_center_diff(&apply_poly_delta(&cd, &d).unwrap()).unwrap();
                for (u, v) in reached.vertices().zip(q.vertices()) {
                    prop_assert!((u - v).norm() < 1e-9);
                }
            }
            Err(_) => prop_assert!(!compatible),
        }
    }

    #[test]
    fn box_delta_inverse_round_trip(b in common::bbox(), d in box_delta()) {
        let next = apply_box_delta(&b, &d).unwrap();
        let back = inverse_box_delta(&b, &next).unwrap();
        for (x, y) in [(back.dx, d.dx), (back.dy, d.dy), (back.dw, d.dw), (back.dh, d.dh)] {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn box_update_commutes_with_scale(b in common::bbox(), d in box_delta(), k in 0.1..10.0f64) {
        let a = apply_box_delta(&b, &d).unwrap();
        let c = apply_box_delta(&Bbox::new(b.cx * k, b.cy * k, b.w * k, b.h * k).unwrap(), &d).unwrap();
        for (x, y) in [(a.cx * k, c.cx), (a.cy * k, c.cy), (a.w * k, c.w), (a.h * k, c.h)] {
            prop_assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()));
        }
    }
}
