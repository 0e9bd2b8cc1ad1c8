//! Polygon IoU through paired quadrilaterals.
//!
//! Both polygons are sliced at every vertex pair into `S - 1` quads; quad `s`
//! of the prediction is compared only with quad `s` of the target. Convex
//! pairs are intersected exactly by Sutherland–Hodgman clipping. A raster
//! estimator serves as the independent reference and as the general-polygon
//! IoU used for evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Point, TextPolygon};

/// Tolerance for on-edge classification during clipping and convexity tests.
pub const CLIP_EPS: f64 = 1e-12;

/// Raster resolution used when a non-convex quad has to be measured.
pub const FALLBACK_RESOLUTION: usize = 512;

pub const MIN_RASTER_RESOLUTION: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quad {
    pub pts: [Point; 4],
}

impl Quad {
    pub fn new(pts: [Point; 4]) -> Self {
        Self { pts }
    }

    pub fn signed_area(&self) -> f64 {
        signed_area(&self.pts)
    }

    /// Same corners wound counterclockwise.
    pub fn ccw(&self) -> Quad {
        if self.signed_area() < 0.0 {
            let [a, b, c, d] = self.pts;
            Quad::new([d, c, b, a])
        } else {
            *self
        }
    }

    /// True when no turn goes clockwise after normalisation; degenerate
    /// (zero-area) quads count as convex.
    pub fn is_convex(&self) -> bool {
        let q = self.ccw();
        (0..4).all(|i| {
            let a = q.pts[i];
            let b = q.pts[(i + 1) % 4];
            let c = q.pts[(i + 2) % 4];
            let (e1, e2) = (b - a, c - b);
            e1.cross(e2) >= -CLIP_EPS * (e1.norm() * e2.norm()).max(1.0)
        }) && !self.is_bowtie()
    }

    /// Opposite edges crossing each other.
    fn is_bowtie(&self) -> bool {
        let [a, b, c, d] = self.pts;
        segments_cross(a, b, c, d) || segments_cross(b, c, d, a)
    }
}

fn segments_cross(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = (p2 - p1).cross(q1 - p1);
    let d2 = (p2 - p1).cross(q2 - p1);
    let d3 = (q2 - q1).cross(p1 - q1);
    let d4 = (q2 - q1).cross(p2 - q1);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

pub fn signed_area(pts: &[Point]) -> f64 {
    let n = pts.len();
    if n < 3 {
        return 0.0;
    }
    let twice: f64 = (0..n).map(|i| pts[i].cross(pts[(i + 1) % n])).sum();
    twice / 2.0
}

/// `|Σ (x_i y_{i+1} - x_{i+1} y_i)| / 2`.
pub fn shoelace_area(quad: &Quad) -> f64 {
    quad.signed_area().abs()
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadDecomposition {
    /// Quad `s` has corners `(top_s, top_{s+1}, bot_{s+1}, bot_s)`, rewound
    /// counterclockwise.
    pub quads: Vec<Quad>,
    /// Quads that are self-intersecting or otherwise non-convex.
    pub flagged: Vec<bool>,
}

pub fn decompose(poly: &TextPolygon) -> QuadDecomposition {
    let quads: Vec<Quad> = (0..poly.samples().saturating_sub(1))
        .map(|s| Quad::new([poly.top[s], poly.top[s + 1], poly.bot[s + 1], poly.bot[s]]))
        .collect();
    let flagged = quads.iter().map(|q| !q.is_convex()).collect();
    QuadDecomposition {
        quads: quads.iter().map(Quad::ccw).collect(),
        flagged,
    }
}

/// Clips convex CCW `subject` by convex CCW `clip`.
fn clip_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let mut output = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let edge = b - a;
        let scale = edge.norm().max(1.0);
        let side = |p: Point| edge.cross(p - a) / scale;
        let input = std::mem::take(&mut output);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let (sc, sp) = (side(cur), side(prev));
            let cur_in = sc >= -CLIP_EPS;
            let prev_in = sp >= -CLIP_EPS;
            if cur_in {
                if !prev_in {
                    output.push(prev.lerp(cur, sp / (sp - sc)));
                }
                output.push(cur);
            } else if prev_in {
                output.push(prev.lerp(cur, sp / (sp - sc)));
            }
        }
    }
    output
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Overlap {
    pub area: f64,
    /// False when a non-convex input forced the raster fallback.
    pub exact: bool,
}

/// Area of `a ∩ b`. Convex pairs are clipped exactly; anything else is
/// estimated by rasterisation and reported as inexact.
pub fn quad_intersection_area(a: &Quad, b: &Quad) -> Overlap {
    if a.is_convex() && b.is_convex() {
        let (a, b) = (a.ccw(), b.ccw());
        let forward = signed_area(&clip_convex(&a.pts, &b.pts)).abs();
        let backward = signed_area(&clip_convex(&b.pts, &a.pts)).abs();
        // both clipping orders agree up to rounding; averaging makes the
        // result symmetric in its arguments
        let area = 0.5 * (forward + backward);
        Overlap {
            area: area.min(shoelace_area(&a)).min(shoelace_area(&b)),
            exact: true,
        }
    } else {
        let area = raster_overlap(&a.pts, &b.pts, FALLBACK_RESOLUTION)
            .map(|r| r.intersection)
            .unwrap_or(0.0);
        Overlap { area, exact: false }
    }
}

/// IoU of two convex quads; zero when either is flagged or the union is empty.
pub fn quad_iou(a: &Quad, b: &Quad) -> f64 {
    if !a.is_convex() || !b.is_convex() {
        return 0.0;
    }
    let inter = quad_intersection_area(a, b).area;
    let union = shoelace_area(a) + shoelace_area(b) - inter;
    if union > 0.0 {
        (inter / union).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Per-id IoUs between the two decompositions.
pub fn paired_quad_ious(pred: &TextPolygon, gt: &TextPolygon) -> Result<Vec<f64>> {
    if pred.samples() != gt.samples() {
        return Err(Error::ShapeMismatch {
            expected: gt.samples(),
            actual: pred.samples(),
        });
    }
    let (dp, dg) = (decompose(pred), decompose(gt));
    Ok(dp
        .quads
        .iter()
        .zip(&dg.quads)
        .zip(dp.flagged.iter().zip(&dg.flagged))
        .map(|((a, b), (fa, fb))| if *fa || *fb { 0.0 } else { quad_iou(a, b) })
        .collect())
}

/// `1 - mean_s IoU(pred quad s, gt quad s)`, in `[0, 1]`.
pub fn poly_iou_loss(pred: &TextPolygon, gt: &TextPolygon) -> Result<f64> {
    let ious = paired_quad_ious(pred, gt)?;
    if ious.is_empty() {
        return Err(Error::domain("polygons need at least 2 vertex pairs"));
    }
    let mean = ious.iter().sum::<f64>() / ious.len() as f64;
    Ok((1.0 - mean).clamp(0.0, 1.0))
}

/// Central-difference gradient of [`poly_iou_loss`] with respect to the
/// predicted coordinates, in [`TextPolygon::to_flat`] order.
pub fn poly_iou_loss_grad(pred: &TextPolygon, gt: &TextPolygon, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) {
        return Err(Error::domain(format!("finite-difference step must be positive, got {step}")));
    }
    let base = pred.to_flat();
    let mut grad = Vec::with_capacity(base.len());
    let mut probe = base.clone();
    for k in 0..base.len() {
        probe[k] = base[k] + step;
        let hi = poly_iou_loss(&TextPolygon::from_flat(&probe)?, gt)?;
        probe[k] = base[k] - step;
        let lo = poly_iou_loss(&TextPolygon::from_flat(&probe)?, gt)?;
        probe[k] = base[k];
        grad.push((hi - lo) / (2.0 * step));
    }
    Ok(grad)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RasterOverlap {
    pub area_a: f64,
    pub area_b: f64,
    pub intersection: f64,
    pub union: f64,
}

impl RasterOverlap {
    pub fn iou(&self) -> f64 {
        if self.union > 0.0 {
            self.intersection / self.union
        } else {
            0.0
        }
    }
}

/// Sorted x-positions where the horizontal line at `y` crosses the outline.
fn crossings(poly: &[Point], y: f64, out: &mut Vec<f64>) {
    out.clear();
    let n = poly.len();
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        if (p.y <= y) != (q.y <= y) {
            out.push(p.x + (y - p.y) * (q.x - p.x) / (q.y - p.y));
        }
    }
    out.sort_by(f64::total_cmp);
}

/// Scanline rasterisation of both polygons over their joint bounding box
/// at `resolution × resolution` cells, sampled at cell centres with
/// even-odd fill.
pub fn raster_overlap(a: &[Point], b: &[Point], resolution: usize) -> Result<RasterOverlap> {
    if resolution < MIN_RASTER_RESOLUTION {
        return Err(Error::domain(format!(
            "raster resolution must be at least {MIN_RASTER_RESOLUTION}, got {resolution}"
        )));
    }
    let empty = RasterOverlap { area_a: 0.0, area_b: 0.0, intersection: 0.0, union: 0.0 };
    if a.len() < 3 && b.len() < 3 {
        return Ok(empty);
    }
    let (mut lo, mut hi) = (Point::new(f64::INFINITY, f64::INFINITY), Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
    for p in a.iter().chain(b) {
        lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let (w, h) = (hi.x - lo.x, hi.y - lo.y);
    if !(w > 0.0 && h > 0.0) || !w.is_finite() || !h.is_finite() {
        return Ok(empty);
    }
    let (dx, dy) = (w / resolution as f64, h / resolution as f64);
    let (mut xa, mut xb) = (Vec::new(), Vec::new());
    let (mut na, mut nb, mut ni, mut nu) = (0u64, 0u64, 0u64, 0u64);
    for r in 0..resolution {
        let y = lo.y + (r as f64 + 0.5) * dy;
        crossings(a, y, &mut xa);
        crossings(b, y, &mut xb);
        let (mut ia, mut ib) = (0, 0);
        for c in 0..resolution {
            let x = lo.x + (c as f64 + 0.5) * dx;
            while ia < xa.len() && xa[ia] <= x {
                ia += 1;
            }
            while ib < xb.len() && xb[ib] <= x {
                ib += 1;
            }
            let (in_a, in_b) = (ia % 2 == 1, ib % 2 == 1);
            na += in_a as u64;
            nb += in_b as u64;
            ni += (in_a && in_b) as u64;
            nu += (in_a || in_b) as u64;
        }
    }
    let cell = dx * dy;
    Ok(RasterOverlap {
        area_a: na as f64 * cell,
        area_b: nb as f64 * cell,
        intersection: ni as f64 * cell,
        union: nu as f64 * cell,
    })
}

/// Raster IoU of two general polygons; 0 for an empty union.
pub fn raster_iou(a: &[Point], b: &[Point], resolution: usize) -> Result<f64> {
    Ok(raster_overlap(a, b, resolution)?.iou())
}
