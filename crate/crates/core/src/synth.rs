//! Deterministic synthetic scenes: curved text instances from random cubic
//! centerlines, plus analytic feature pyramids rendered from them.
//!
//! Every attempt to place an instance consumes exactly seven draws from the
//! scene's [`SeededRng`], in this order: length, two curvature values,
//! rotation, width fraction, centre x, centre y. Placement tests use the
//! instance's bounding disc about its centre, which does not change under
//! rotation, so two scenes that differ only in `rotation_deg` place their
//! instances at identical centres.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{buffer_polyline, sample_polyline, BezierCurve, Point, TextPolygon, DEFAULT_SAMPLES};
use crate::polyalign::{FeatureMap, FeaturePyramid};
use crate::rng::SeededRng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneParams {
    pub width: u32,
    pub height: u32,
    pub n_instances: usize,
    /// Control-point offsets perpendicular to the chord, as fractions of its length.
    pub curvature: [f64; 2],
    /// Rotation about the instance centre, degrees counterclockwise.
    pub rotation_deg: [f64; 2],
    /// Text height as a fraction of the centerline length.
    pub width_frac: [f64; 2],
    /// Chord length as a fraction of `min(width, height)`.
    pub length_frac: [f64; 2],
    pub samples: usize,
    /// Force the two inner control offsets to be opposite, making every
    /// instance symmetric under a half turn about its centre.
    pub point_symmetric: bool,
    pub max_attempts: usize,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            width: 512,
            height: 512,
            n_instances: 4,
            curvature: [-0.3, 0.3],
            rotation_deg: [-30.0, 30.0],
            width_frac: [0.08, 0.3],
            length_frac: [0.25, 0.5],
            samples: DEFAULT_SAMPLES,
            point_symmetric: false,
            max_attempts: 50,
        }
    }
}

impl SceneParams {
    pub fn validate(&self) -> Result<()> {
        let range = |name: &str, r: [f64; 2]| {
            if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
                return Err(Error::Config(format!("{name} range {r:?} is empty or non-finite")));
            }
            Ok(())
        };
        range("curvature", self.curvature)?;
        range("rotation_deg", self.rotation_deg)?;
        range("width_frac", self.width_frac)?;
        range("length_frac", self.length_frac)?;
        if self.width_frac[0] <= 0.0 || self.length_frac[0] <= 0.0 {
            return Err(Error::Config("width_frac and length_frac must be positive".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("image size must be positive".into()));
        }
        if self.samples < 2 {
            return Err(Error::Config(format!("samples must be at least 2, got {}", self.samples)));
        }
        if self.max_attempts == 0 {
            return Err(Error::Config("max_attempts must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    #[serde(flatten)]
    pub polygon: TextPolygon,
    pub ctrl: BezierCurve,
    pub width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub seed: u64,
    /// `[width, height]` in pixels.
    pub size: [u32; 2],
    pub instances: Vec<Instance>,
    /// Instances requested but not placed within the attempt budget.
    #[serde(default)]
    pub skipped: usize,
}

impl Scene {
    pub fn ground_truth(&self) -> Vec<TextPolygon> {
        self.instances.iter().map(|i| i.polygon.clone()).collect()
    }

    pub fn diagonal(&self) -> f64 {
        (self.size[0] as f64).hypot(self.size[1] as f64)
    }
}

struct Placed {
    centre: Point,
    radius: f64,
}

/// Centerline length estimate from a dense parameter-uniform sampling.
fn curve_length(curve: &BezierCurve) -> Result<f64> {
    Ok(sample_polyline(curve, 65)?.length())
}

pub fn generate_scene(seed: u64, params: &SceneParams) -> Result<Scene> {
    params.validate()?;
    let mut rng = SeededRng::new(seed);
    let (w, h) = (params.width as f64, params.height as f64);
    let mut placed: Vec<Placed> = Vec::new();
    let mut instances = Vec::new();
    let mut skipped = 0;
    for _ in 0..params.n_instances {
        let mut done = false;
        for _ in 0..params.max_attempts {
            let length = rng.range(params.length_frac[0], params.length_frac[1]) * w.min(h);
            let c1 = rng.range(params.curvature[0], params.curvature[1]);
            let c2_draw = rng.range(params.curvature[0], params.curvature[1]);
            let c2 = if params.point_symmetric { -c1 } else { c2_draw };
            let theta = rng.range(params.rotation_deg[0], params.rotation_deg[1]).to_radians();
            let width_frac = rng.range(params.width_frac[0], params.width_frac[1]);
            let centre = Point::new(rng.range(0.0, w), rng.range(0.0, h));

            let (sin, cos) = theta.sin_cos();
            let place = |p: Point| Point::new(p.x * cos - p.y * sin, p.x * sin + p.y * cos) + centre;
            let curve = BezierCurve::new(
                [
                    Point::new(-length / 2.0, 0.0),
                    Point::new(-length / 6.0, c1 * length),
                    Point::new(length / 6.0, c2 * length),
                    Point::new(length / 2.0, 0.0),
                ]
                .map(place),
            );
            let text_width = width_frac * curve_length(&curve)?;
            let polygon = buffer_polyline(&sample_polyline(&curve, params.samples)?, text_width)?;
            let radius = polygon
                .vertices()
                .map(|p| (p - centre).norm())
                .fold(0.0, f64::max);
            let inside = centre.x - radius >= 0.0
                && centre.x + radius <= w
                && centre.y - radius >= 0.0
                && centre.y + radius <= h;
            let clear = placed
                .iter()
                .all(|o| (o.centre - centre).norm() >= o.radius + radius);
            if inside && clear {
                placed.push(Placed { centre, radius });
                instances.push(Instance { polygon, ctrl: curve, width: text_width });
                done = true;
                break;
            }
        }
        if !done {
            skipped += 1;
        }
    }
    Ok(Scene {
        seed,
        size: [params.width, params.height],
        instances,
        skipped,
    })
}

fn point_in_outline(outline: &[Point], p: Point) -> bool {
    let n = outline.len();
    let mut inside = false;
    for i in 0..n {
        let (a, b) = (outline[i], outline[(i + 1) % n]);
        if (a.y <= p.y) != (b.y <= p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn distance_to_segment(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    let t = if len2 > 0.0 { ((p - a).dot(ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + ab * t)).norm()
}

/// Signed distance to the union of the outlines: negative inside, clamped to
/// `±clamp`.
pub fn signed_distance(outlines: &[Vec<Point>], p: Point, clamp: f64) -> f64 {
    let mut best = clamp;
    for outline in outlines {
        let n = outline.len();
        let d = (0..n)
            .map(|i| distance_to_segment(p, outline[i], outline[(i + 1) % n]))
            .fold(f64::INFINITY, f64::min);
        let sd = if point_in_outline(outline, p) { -d } else { d };
        best = best.min(sd);
    }
    best.clamp(-clamp, clamp)
}

/// Analytic pyramid for `scene`: channels cycle through signed distance,
/// x, y and a constant 1, evaluated at cell centres.
pub fn scene_features(scene: &Scene, strides: &[f64], channels: usize) -> Result<FeaturePyramid> {
    if channels == 0 {
        return Err(Error::domain("need at least one channel"));
    }
    let outlines: Vec<Vec<Point>> = scene.instances.iter().map(|i| i.polygon.outline()).collect();
    let diag = scene.diagonal();
    let levels = strides
        .iter()
        .map(|&stride| {
            if !(stride > 0.0) {
                return Err(Error::domain(format!("stride must be positive, got {stride}")));
            }
            let hh = ((scene.size[1] as f64 / stride).ceil() as usize).max(1);
            let ww = ((scene.size[0] as f64 / stride).ceil() as usize).max(1);
            let mut data = Vec::with_capacity(hh * ww * channels);
            for i in 0..hh {
                let y = (i as f64 + 0.5) * stride;
                for j in 0..ww {
                    let x = (j as f64 + 0.5) * stride;
                    let sd = signed_distance(&outlines, Point::new(x, y), diag);
                    let base = [sd, x, y, 1.0];
                    data.extend((0..channels).map(|c| base[c % 4]));
                }
            }
            FeatureMap::new(hh, ww, channels, stride, data)
        })
        .collect::<Result<Vec<_>>>()?;
    FeaturePyramid::new(levels)
}
