//! Planar primitives and the box → Bézier centerline → polygon transform.
//!
//! All coordinates are pixels in a y-up frame: "left of the direction of
//! travel" is the counterclockwise side. Image data with y pointing down must
//! go through [`Point::flip_y`] on ingestion.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of polygon vertex pairs used when no other value is configured.
pub const DEFAULT_SAMPLES: usize = 8;

/// Tangents shorter than this are treated as zero when buffering.
const TANGENT_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 2-D cross product.
    #[inline]
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Rotates by +90° (counterclockwise in the y-up frame).
    #[inline]
    pub fn perp(self) -> Point {
        Point::new(-self.y, self.x)
    }

    #[inline]
    pub fn midpoint(self, other: Point) -> Point {
        Point::new((self.x + other.x) / 2.0, (self.y + other.y) / 2.0)
    }

    #[inline]
    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }

    /// Converts between image (y-down) and internal (y-up) coordinates.
    #[inline]
    pub fn flip_y(self, image_h: f64) -> Point {
        Point::new(self.x, image_h - self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Point::new(x, y)
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point {
    type Output = Point;
    #[inline]
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    #[inline]
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    #[inline]
    fn mul(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

impl Neg for Point {
    type Output = Point;
    #[inline]
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Axis-aligned box in center/size form. Serialized as `[cx, cy, w, h]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct Bbox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl Bbox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        let b = Self { cx, cy, w, h };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.cx, self.cy, self.w, self.h]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::domain(format!("non-finite box {self:?}")));
        }
        if self.w <= 0.0 || self.h <= 0.0 {
            return Err(Error::domain(format!(
                "box size must be positive, got w={} h={}",
                self.w, self.h
            )));
        }
        Ok(())
    }

    pub fn center(&self) -> Point {
        Point::new(self.cx, self.cy)
    }

    /// Tightest box around `points`; fails when the extent is zero along an axis.
    pub fn enclosing(points: impl IntoIterator<Item = Point>) -> Result<Self> {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        Bbox::new(
            (lo.x + hi.x) / 2.0,
            (lo.y + hi.y) / 2.0,
            hi.x - lo.x,
            hi.y - lo.y,
        )
    }
}

impl TryFrom<[f64; 4]> for Bbox {
    type Error = Error;
    fn try_from([cx, cy, w, h]: [f64; 4]) -> Result<Self> {
        Bbox::new(cx, cy, w, h)
    }
}

impl From<Bbox> for [f64; 4] {
    fn from(b: Bbox) -> Self {
        [b.cx, b.cy, b.w, b.h]
    }
}

/// Cubic Bézier curve given by its four control points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BezierCurve {
    pub ctrl: [Point; 4],
}

impl BezierCurve {
    pub fn new(ctrl: [Point; 4]) -> Self {
        Self { ctrl }
    }

    /// Point on the curve at parameter `t ∈ [0, 1]`.
    pub fn eval(&self, t: f64) -> Result<Point> {
        let b = bernstein_basis(t)?;
        Ok(self.eval_with(&b))
    }

    fn eval_with(&self, b: &[f64; 4]) -> Point {
        let mut p = Point::default();
        for (c, w) in self.ctrl.iter().zip(b) {
            p = p + *c * *w;
        }
        p
    }

    /// First derivative with respect to `t`.
    pub fn derivative(&self, t: f64) -> Result<Point> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::domain(format!("bezier parameter {t} outside [0, 1]")));
        }
        let [p0, p1, p2, p3] = self.ctrl;
        let u = 1.0 - t;
        Ok((p1 - p0) * (3.0 * u * u) + (p2 - p1) * (6.0 * u * t) + (p3 - p2) * (3.0 * t * t))
    }

    /// Point reflection through `center` (a 180° rotation).
    pub fn rotate_half_turn(&self, center: Point) -> Self {
        Self::new(self.ctrl.map(|p| center * 2.0 - p))
    }
}

/// Ordered centerline vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polyline {
    pub verts: Vec<Point>,
}

impl Polyline {
    pub fn new(verts: Vec<Point>) -> Result<Self> {
        if verts.len() < 2 {
            return Err(Error::domain(format!(
                "polyline needs at least 2 vertices, got {}",
                verts.len()
            )));
        }
        Ok(Self { verts })
    }

    pub fn len(&self) -> usize {
        self.verts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.verts.is_empty()
    }

    /// Sum of segment lengths.
    pub fn length(&self) -> f64 {
        self.verts.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }
}

/// Text polygon as `S` paired boundary vertices.
///
/// Walking `s = 0..S`, `top[s]` lies on the left of the direction of travel
/// and `bot[s]` on the right. JSON form: `{"top": [[x, y], ...], "bot": [...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPolygon")]
pub struct TextPolygon {
    pub top: Vec<Point>,
    pub bot: Vec<Point>,
}

#[derive(Deserialize)]
struct RawPolygon {
    top: Vec<Point>,
    bot: Vec<Point>,
}

impl TryFrom<RawPolygon> for TextPolygon {
    type Error = Error;
    fn try_from(raw: RawPolygon) -> Result<Self> {
        TextPolygon::new(raw.top, raw.bot)
    }
}

impl TextPolygon {
    pub fn new(top: Vec<Point>, bot: Vec<Point>) -> Result<Self> {
        let p = Self { top, bot };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.top.len() != self.bot.len() {
            return Err(Error::ShapeMismatch {
                expected: self.top.len(),
                actual: self.bot.len(),
            });
        }
        if self.top.len() < 2 {
            return Err(Error::domain(format!(
                "polygon needs at least 2 vertex pairs, got {}",
                self.top.len()
            )));
        }
        if !self.vertices().all(Point::is_finite) {
            return Err(Error::domain("non-finite polygon vertex"));
        }
        Ok(())
    }

    /// Number of vertex pairs `S`.
    pub fn samples(&self) -> usize {
        self.top.len()
    }

    /// All `2S` vertices, top first.
    pub fn vertices(&self) -> impl Iterator<Item = Point> + '_ {
        self.top.iter().chain(self.bot.iter()).copied()
    }

    /// Closed outline: top in order, then bottom in reverse.
    pub fn outline(&self) -> Vec<Point> {
        self.top
            .iter()
            .copied()
            .chain(self.bot.iter().rev().copied())
            .collect()
    }

    pub fn centerline(&self) -> Vec<Point> {
        self.top
            .iter()
            .zip(&self.bot)
            .map(|(t, b)| t.midpoint(*b))
            .collect()
    }

    /// Flattened coordinates `[top x, top y]* [bot x, bot y]*`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.vertices().flat_map(|p| [p.x, p.y]).collect()
    }

    pub fn from_flat(coords: &[f64]) -> Result<Self> {
        if !coords.len().is_multiple_of(4) {
            return Err(Error::domain(format!(
                "flat polygon length {} is not a multiple of 4",
                coords.len()
            )));
        }
        let s = coords.len() / 4;
        let pts: Vec<Point> = coords.chunks(2).map(|c| Point::new(c[0], c[1])).collect();
        TextPolygon::new(pts[..s].to_vec(), pts[s..].to_vec())
    }

    pub fn translate(&self, by: Point) -> Self {
        Self {
            top: self.top.iter().map(|p| *p + by).collect(),
            bot: self.bot.iter().map(|p| *p + by).collect(),
        }
    }

    pub fn map_points(&self, f: impl Fn(Point) -> Point) -> Self {
        Self {
            top: self.top.iter().map(|p| f(*p)).collect(),
            bot: self.bot.iter().map(|p| f(*p)).collect(),
        }
    }
}

/// Control-point offsets relative to a reference box plus a log width factor.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BezierDelta {
    pub dp: [[f64; 2]; 4],
    pub dwp: f64,
}

impl BezierDelta {
    pub fn is_finite(&self) -> bool {
        self.dwp.is_finite() && self.dp.iter().flatten().all(|v| v.is_finite())
    }
}

/// Cubic Bernstein basis `B_j(t) = C(3, j) t^j (1 - t)^(3 - j)`.
pub fn bernstein_basis(t: f64) -> Result<[f64; 4]> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::domain(format!("bernstein parameter {t} outside [0, 1]")));
    }
    let u = 1.0 - t;
    Ok([u * u * u, 3.0 * t * u * u, 3.0 * t * t * u, t * t * t])
}

/// Places the control points inside `bbox`: `ctrl_j = center + (dx_j w, dy_j h)`.
pub fn bezier_from_box(bbox: &Bbox, delta: &BezierDelta) -> Result<BezierCurve> {
    bbox.validate()?;
    if !delta.is_finite() {
        return Err(Error::domain("non-finite bezier delta"));
    }
    Ok(BezierCurve::new(delta.dp.map(|[dx, dy]| {
        Point::new(bbox.cx + dx * bbox.w, bbox.cy + dy * bbox.h)
    })))
}

/// Samples `samples` points at `t_s = s / (samples - 1)`.
pub fn sample_polyline(curve: &BezierCurve, samples: usize) -> Result<Polyline> {
    if samples < 2 {
        return Err(Error::domain(format!("need at least 2 samples, got {samples}")));
    }
    let last = (samples - 1) as f64;
    let verts = (0..samples)
        .map(|s| {
            // endpoints are pinned exactly, independent of rounding in the basis
            if s == 0 {
                curve.ctrl[0]
            } else if s == samples - 1 {
                curve.ctrl[3]
            } else {
                curve.eval_with(&bernstein_basis(s as f64 / last).expect("t in [0, 1]"))
            }
        })
        .collect();
    Polyline::new(verts)
}

/// Polygon width `sqrt(w h) exp(dwp)`.
pub fn polygon_width(bbox: &Bbox, dwp: f64) -> Result<f64> {
    bbox.validate()?;
    if !dwp.is_finite() {
        return Err(Error::domain("non-finite width delta"));
    }
    Ok((bbox.w * bbox.h).sqrt() * dwp.exp())
}

/// Unit tangent at vertex `s`.
///
/// Central difference for interior vertices, one-sided at the ends. If that
/// difference vanishes, the nearest non-zero segment is used instead.
pub fn vertex_tangent(verts: &[Point], s: usize) -> Result<Point> {
    let n = verts.len();
    if n < 2 || s >= n {
        return Err(Error::domain(format!("vertex {s} out of range for {n} vertices")));
    }
    let primary = if s == 0 {
        verts[1] - verts[0]
    } else if s == n - 1 {
        verts[n - 1] - verts[n - 2]
    } else {
        verts[s + 1] - verts[s - 1]
    };
    let len = primary.norm();
    if len > TANGENT_EPS {
        return Ok(primary * (1.0 / len));
    }
    // segment i joins verts[i] and verts[i + 1]; search outward from s
    for d in 0..n {
        let forward = s + d;
        if forward < n - 1 {
            let seg = verts[forward + 1] - verts[forward];
            let l = seg.norm();
            if l > TANGENT_EPS {
                return Ok(seg * (1.0 / l));
            }
        }
        if let Some(back) = s.checked_sub(d + 1) {
            let seg = verts[back + 1] - verts[back];
            let l = seg.norm();
            if l > TANGENT_EPS {
                return Ok(seg * (1.0 / l));
            }
        }
    }
    Err(Error::degenerate(format!(
        "all {} centerline vertices coincide; tangent undefined",
        n
    )))
}

/// Offsets every vertex by `±wp / 2` along its unit left normal.
pub fn buffer_polyline(line: &Polyline, wp: f64) -> Result<TextPolygon> {
    if !(wp > 0.0 && wp.is_finite()) {
        return Err(Error::domain(format!("polygon width must be positive, got {wp}")));
    }
    if line.verts.len() < 2 {
        return Err(Error::domain("polyline needs at least 2 vertices"));
    }
    let half = wp / 2.0;
    let mut top = Vec::with_capacity(line.len());
    let mut bot = Vec::with_capacity(line.len());
    for (s, p) in line.verts.iter().enumerate() {
        let normal = vertex_tangent(&line.verts, s)?.perp();
        top.push(*p + normal * half);
        bot.push(*p - normal * half);
    }
    TextPolygon::new(top, bot)
}

/// Full transform: box + delta → Bézier → sampled centerline → buffered polygon.
pub fn box_to_poly(bbox: &Bbox, delta: &BezierDelta, samples: usize) -> Result<TextPolygon> {
    let curve = bezier_from_box(bbox, delta)?;
    let line = sample_polyline(&curve, samples)?;
    let wp = polygon_width(bbox, delta.dwp)?;
    buffer_polyline(&line, wp)
}

/// Least-squares cubic Bézier through `points` taken at `t_s = s / (n - 1)`.
///
/// Exact when the points were sampled from a cubic with the same spacing.
pub fn fit_bezier(points: &[Point]) -> Result<BezierCurve> {
    let n = points.len();
    if n < 2 {
        return Err(Error::domain(format!("need at least 2 points to fit, got {n}")));
    }
    let last = (n - 1) as f64;
    let basis = DMatrix::from_fn(n, 4, |s, j| {
        bernstein_basis(s as f64 / last).expect("t in [0, 1]")[j]
    });
    let svd = basis.svd(true, true);
    let xs = DVector::from_iterator(n, points.iter().map(|p| p.x));
    let ys = DVector::from_iterator(n, points.iter().map(|p| p.y));
    let cx = svd
        .solve(&xs, 1e-12)
        .map_err(|e| Error::degenerate(format!("bezier fit failed: {e}")))?;
    let cy = svd
        .solve(&ys, 1e-12)
        .map_err(|e| Error::degenerate(format!("bezier fit failed: {e}")))?;
    Ok(BezierCurve::new([0, 1, 2, 3].map(|j| Point::new(cx[j], cy[j]))))
}

/// Bézier delta that reproduces `curve` and width `wp` inside `bbox`.
pub fn bezier_delta_for(bbox: &Bbox, curve: &BezierCurve, wp: f64) -> Result<BezierDelta> {
    bbox.validate()?;
    if !(wp > 0.0) {
        return Err(Error::domain(format!("polygon width must be positive, got {wp}")));
    }
    Ok(BezierDelta {
        dp: curve
            .ctrl
            .map(|c| [(c.x - bbox.cx) / bbox.w, (c.y - bbox.cy) / bbox.h]),
        dwp: (wp / (bbox.w * bbox.h).sqrt()).ln(),
    })
}
