//! Fixtures shared by the benchmarks.

use textpoly_core::refine::{default_bezier_delta, grid_proposals};
use textpoly_core::synth::{generate_scene, scene_features};
use textpoly_core::{Bbox, BezierDelta, CascadeConfig, FeaturePyramid, Scene, SceneParams, TextPolygon};

pub const STRIDES: [f64; 3] = [8.0, 16.0, 32.0];
pub const CHANNELS: usize = 4;

/// A synthetic scene with its pyramid and grid proposals.
pub struct Fixture {
    pub scene: Scene,
    pub pyramid: FeaturePyramid,
    pub proposals: Vec<Bbox>,
    pub config: CascadeConfig,
}

pub fn fixture(seed: u64, samples: usize, proposals: usize) -> Fixture {
    let params = SceneParams { samples, ..Default::default() };
    let scene = generate_scene(seed, &params).expect("default scene params are valid");
    let pyramid = scene_features(&scene, &STRIDES, CHANNELS).expect("fixed strides are valid");
    let config = CascadeConfig { samples, proposals, ..Default::default() };
    let proposals = grid_proposals(scene.size[0] as f64, scene.size[1] as f64, proposals).expect("positive count");
    Fixture { scene, pyramid, proposals, config }
}

/// A gently curved box polygon with `samples` vertices per side.
pub fn curved_polygon(samples: usize, shift: f64) -> TextPolygon {
    let bbox = Bbox::new(128.0 + shift, 96.0, 120.0, 40.0).expect("positive size");
    let mut delta: BezierDelta = default_bezier_delta(&bbox);
    delta.dp[1][1] += 0.3;
    delta.dp[2][1] -= 0.2;
    textpoly_core::geom::box_to_poly(&bbox, &delta, samples).expect("finite delta")
}
