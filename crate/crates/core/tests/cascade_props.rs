use proptest::prelude::*;
use textpoly_core::assign::oriented_l1_cost;
use textpoly_core::cascade::{run_cascade, CascadeConfig, StageKind};
use textpoly_core::geom::box_to_poly;
use textpoly_core::polyalign::AlignVariant;
use textpoly_core::refine::{default_bezier_delta, grid_proposals};
use textpoly_core::regressor::{OracleRegressor, ZeroRegressor};
use textpoly_core::synth::{generate_scene, scene_features, SceneParams};

fn config() -> ProptestConfig {
    ProptestConfig { cases: 24, ..ProptestConfig::default() }
}

fn variant() -> impl Strategy<Value = AlignVariant> {
    prop_oneof![Just(AlignVariant::Vertex), Just(AlignVariant::Grid), Just(AlignVariant::Bezier)]
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn oracle_cascade_lands_on_ground_truth(
        seed in any::<u64>(),
        n in 1usize..6,
        proposals in 6usize..30,
        samples in 4usize..12,
        variant in variant(),
        oea in any::<bool>(),
    ) {
        let params = SceneParams { width: 256, height: 192, n_instances: n, samples, ..Default::default() };
        let scene = generate_scene(seed, &params).unwrap();
        let pyr = scene_features(&scene, &[8.0, 16.0], 4).unwrap();
        let boxes = grid_proposals(256.0, 192.0, proposals).unwrap();
        let gts = scene.ground_truth();
        let oracle = OracleRegressor::new(&gts, &boxes, oea).unwrap();
        let config = CascadeConfig { proposals, samples, variant, ..Default::default() };
        let out = run_cascade(&config, &oracle, &pyr, &boxes).unwrap();
        for (i, p) in out.predictions.iter().enumerate() {
            if let Some(j) = oracle.assigned(i) {
                let residual = p.poly.vertices().zip(gts[j].vertices()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
                let (l1, _) = oriented_l1_cost(&p.poly, &gts[j]).unwrap();
                prop_assert!(residual < 1e-6 || l1 < 1e-6, "proposal {i}: residual {residual}");
            }
        }
    }

    #[test]
    fn zero_regressor_keeps_the_default_spread(seed in any::<u64>(), proposals in 1usize..20) {
        let params = SceneParams { width: 128, height: 128, n_instances: 2, ..Default::default() };
        let scene = generate_scene(seed, &params).unwrap();
        let pyr = scene_features(&scene, &[8.0], 3).unwrap();
        let boxes = grid_proposals(128.0, 128.0, proposals).unwrap();
        let config = CascadeConfig { proposals, ..Default::default() };
        let out = run_cascade(&config, &ZeroRegressor, &pyr, &boxes).unwrap();
        // zero deltas only pass through the center/difference form, which rounds
        for (p, b) in out.predictions.iter().zip(&boxes) {
            let expect = box_to_poly(b, &default_bezier_delta(b), 8).unwrap();
            for (u, v) in p.poly.vertices().zip(expect.vertices()) {
                prop_assert!((u - v).norm() < 1e-9);
            }
        }
        prop_assert_eq!(out.trace.len(), config.box_stages + config.poly_stages + 1);
        prop_assert_eq!(out.trace[config.box_stages].kind, StageKind::Transition);
    }
}
