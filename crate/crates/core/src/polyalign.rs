//! Feature sampling at polygon footholds.
//!
//! A [`FeatureMap`] stores `H × W × C` values with cell `(i, j)` centred at
//! image position `((j + 0.5) stride, (i + 0.5) stride)`. Samples are
//! bilinear between cell centres and clamp to the outermost centres. Every
//! sampler sums its per-level results over the pyramid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{fit_bezier, Bbox, BezierCurve, Point, TextPolygon};

/// Offset of the two Bézier-variant samples from the cell centre, as a
/// fraction of the cell's extent along the text direction.
pub const BEZIER_SAMPLE_OFFSET: f64 = 0.25;

/// Band centres across the text, top to bottom, as fractions of the height.
const BANDS: [f64; 3] = [1.0 / 6.0, 0.5, 5.0 / 6.0];

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    height: usize,
    width: usize,
    channels: usize,
    stride: f64,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(height: usize, width: usize, channels: usize, stride: f64, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::domain(format!(
                "feature map dimensions must be positive, got {height}x{width}x{channels}"
            )));
        }
        if !(stride > 0.0 && stride.is_finite()) {
            return Err(Error::domain(format!("stride must be positive, got {stride}")));
        }
        let expected = height * width * channels;
        if data.len() != expected {
            return Err(Error::ShapeMismatch { expected, actual: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("non-finite feature value"));
        }
        Ok(Self { height, width, channels, stride, data })
    }

    /// Fills cell `(i, j, c)` with `f(x, y, c)` at the cell centre.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        stride: f64,
        f: impl Fn(f64, f64, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for i in 0..height {
            let y = (i as f64 + 0.5) * stride;
            for j in 0..width {
                let x = (j as f64 + 0.5) * stride;
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(height, width, channels, stride, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn stride(&self) -> f64 {
        self.stride
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> &[f64] {
        let base = (i * self.width + j) * self.channels;
        &self.data[base..base + self.channels]
    }

    /// Adds `weight ×` the interpolated value at cell-space `(u, v)` into `out`.
    ///
    /// Integer `(u, v)` is exactly cell `(row v, column u)`.
    pub fn accumulate_cell(&self, u: f64, v: f64, weight: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.channels);
        let u = if u.is_nan() { 0.0 } else { u.clamp(0.0, (self.width - 1) as f64) };
        let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, (self.height - 1) as f64) };
        let j0 = (u.floor() as usize).min(self.width - 1);
        let i0 = (v.floor() as usize).min(self.height - 1);
        let j1 = (j0 + 1).min(self.width - 1);
        let i1 = (i0 + 1).min(self.height - 1);
        let fu = u - j0 as f64;
        let fv = v - i0 as f64;
        let corners = [
            (i0, j0, (1.0 - fu) * (1.0 - fv)),
            (i0, j1, fu * (1.0 - fv)),
            (i1, j0, (1.0 - fu) * fv),
            (i1, j1, fu * fv),
        ];
        for (i, j, w) in corners {
            if w == 0.0 {
                continue;
            }
            for (o, val) in out.iter_mut().zip(self.at(i, j)) {
                *o += weight * w * val;
            }
        }
    }

    pub fn bilinear_cell(&self, u: f64, v: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.channels];
        self.accumulate_cell(u, v, 1.0, &mut out);
        out
    }

    /// Interpolated value at image position `(x, y)`.
    pub fn bilinear(&self, x: f64, y: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.channels];
        self.accumulate(Point::new(x, y), 1.0, &mut out);
        out
    }

    #[inline]
    pub fn accumulate(&self, p: Point, weight: f64, out: &mut [f64]) {
        self.accumulate_cell(p.x / self.stride - 0.5, p.y / self.stride - 0.5, weight, out);
    }
}

/// Feature maps ordered by strictly increasing stride, sharing one channel count.
#[derive(Clone, Debug, PartialEq)]
pub struct FeaturePyramid {
    levels: Vec<FeatureMap>,
}

impl FeaturePyramid {
    pub fn new(levels: Vec<FeatureMap>) -> Result<Self> {
        let first = levels
            .first()
            .ok_or_else(|| Error::domain("pyramid needs at least one level"))?;
        let channels = first.channels;
        if let Some(bad) = levels.iter().find(|l| l.channels != channels) {
            return Err(Error::ShapeMismatch { expected: channels, actual: bad.channels });
        }
        if levels.windows(2).any(|w| w[1].stride <= w[0].stride) {
            return Err(Error::domain("pyramid strides must strictly increase"));
        }
        Ok(Self { levels })
    }

    pub fn levels(&self) -> &[FeatureMap] {
        &self.levels
    }

    pub fn channels(&self) -> usize {
        self.levels[0].channels
    }

    /// Sum over levels of the interpolated value at `p`, added into `out`.
    pub fn accumulate(&self, p: Point, weight: f64, out: &mut [f64]) {
        for level in &self.levels {
            level.accumulate(p, weight, out);
        }
    }

    pub fn sample(&self, p: Point) -> Vec<f64> {
        let mut out = vec![0.0; self.channels()];
        self.accumulate(p, 1.0, &mut out);
        out
    }
}

/// `S × 3 × C` polygon RoI feature; rows are top, centre, bottom.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyRoiFeature {
    samples: usize,
    channels: usize,
    data: Vec<f64>,
}

impl PolyRoiFeature {
    fn zeros(samples: usize, channels: usize) -> Self {
        Self { samples, channels, data: vec![0.0; samples * 3 * channels] }
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.samples, 3, self.channels]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, s: usize, row: usize, c: usize) -> f64 {
        self.data[(s * 3 + row) * self.channels + c]
    }

    fn cell_mut(&mut self, s: usize, row: usize) -> &mut [f64] {
        let base = (s * 3 + row) * self.channels;
        &mut self.data[base..base + self.channels]
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlignVariant {
    #[default]
    Vertex,
    Grid,
    Bezier,
}

impl std::str::FromStr for AlignVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vertex" => Ok(Self::Vertex),
            "grid" => Ok(Self::Grid),
            "bezier" => Ok(Self::Bezier),
            other => Err(Error::Config(format!("unknown polyalign variant {other:?}"))),
        }
    }
}

/// Samples at each top vertex, centerline vertex and bottom vertex.
pub fn polyalign_vertex(pyramid: &FeaturePyramid, poly: &TextPolygon) -> PolyRoiFeature {
    let mut out = PolyRoiFeature::zeros(poly.samples(), pyramid.channels());
    for (s, (t, b)) in poly.top.iter().zip(&poly.bot).enumerate() {
        for (row, p) in [*t, t.midpoint(*b), *b].into_iter().enumerate() {
            pyramid.accumulate(p, 1.0, out.cell_mut(s, row));
        }
    }
    out
}

/// Point of the polygon strip at arc parameter `u ∈ [0, S - 1]` (piecewise
/// linear in the vertex index) and depth `v ∈ [0, 1]` from top to bottom.
fn strip_point(poly: &TextPolygon, u: f64, v: f64) -> Point {
    let last = poly.samples() - 1;
    let k = (u.floor() as usize).min(last - 1);
    let f = u - k as f64;
    let top = poly.top[k].lerp(poly.top[k + 1], f);
    let bot = poly.bot[k].lerp(poly.bot[k + 1], f);
    top.lerp(bot, v)
}

/// Samples at the centres of an `S × 3` lattice spanning the polygon.
///
/// Cell `s` covers arc parameter `[s, s + 1] (S - 1) / S`; rows are the
/// top, middle and bottom thirds of the strip.
pub fn polyalign_grid(pyramid: &FeaturePyramid, poly: &TextPolygon) -> PolyRoiFeature {
    let n = poly.samples();
    let mut out = PolyRoiFeature::zeros(n, pyramid.channels());
    let span = (n - 1) as f64 / n as f64;
    for s in 0..n {
        let u = (s as f64 + 0.5) * span;
        for (row, v) in BANDS.into_iter().enumerate() {
            pyramid.accumulate(strip_point(poly, u, v), 1.0, out.cell_mut(s, row));
        }
    }
    out
}

/// Bézier-grid sampling between two boundary curves.
///
/// Each of the `S × 3` cells averages two samples placed at
/// `±BEZIER_SAMPLE_OFFSET` of the cell extent along the local text direction.
pub fn polyalign_bezier(
    pyramid: &FeaturePyramid,
    top: &BezierCurve,
    bot: &BezierCurve,
    samples: usize,
) -> Result<PolyRoiFeature> {
    if samples == 0 {
        return Err(Error::domain("need at least one sample"));
    }
    let mut out = PolyRoiFeature::zeros(samples, pyramid.channels());
    let half = 0.5 / samples as f64;
    let at = |t: f64, v: f64| -> Result<Point> { Ok(top.eval(t)?.lerp(bot.eval(t)?, v)) };
    for s in 0..samples {
        let t = (s as f64 + 0.5) / samples as f64;
        let tangent = (top.derivative(t)? + bot.derivative(t)?) * 0.5;
        let len = tangent.norm();
        let axis = if len > 0.0 { tangent * (1.0 / len) } else { Point::default() };
        for (row, v) in BANDS.into_iter().enumerate() {
            let centre = at(t, v)?;
            let extent = (at(t + half, v)? - at(t - half, v)?).norm();
            let offset = axis * (BEZIER_SAMPLE_OFFSET * extent);
            let cell = out.cell_mut(s, row);
            pyramid.accumulate(centre - offset, 0.5, cell);
            pyramid.accumulate(centre + offset, 0.5, cell);
        }
    }
    Ok(out)
}

/// Runs the requested variant. The Bézier variant first fits cubic curves to
/// the top and bottom vertex rows.
pub fn polyalign(pyramid: &FeaturePyramid, poly: &TextPolygon, variant: AlignVariant) -> Result<PolyRoiFeature> {
    match variant {
        AlignVariant::Vertex => Ok(polyalign_vertex(pyramid, poly)),
        AlignVariant::Grid => Ok(polyalign_grid(pyramid, poly)),
        AlignVariant::Bezier => {
            let top = fit_bezier(&poly.top)?;
            let bot = fit_bezier(&poly.bot)?;
            polyalign_bezier(pyramid, &top, &bot, poly.samples())
        }
    }
}

/// Box RoIAlign: each of the `out_h × out_w` bins averages `sampling²`
/// samples on a regular sub-grid. Output is row-major `[row][col][channel]`.
pub fn roialign_box(
    pyramid: &FeaturePyramid,
    bbox: &Bbox,
    out_w: usize,
    out_h: usize,
    sampling: usize,
) -> Result<Vec<f64>> {
    bbox.validate()?;
    if out_w == 0 || out_h == 0 || sampling == 0 {
        return Err(Error::domain("roialign output size and sampling must be positive"));
    }
    let c = pyramid.channels();
    let mut out = vec![0.0; out_w * out_h * c];
    let (x0, y0) = (bbox.cx - bbox.w / 2.0, bbox.cy - bbox.h / 2.0);
    let (bin_w, bin_h) = (bbox.w / out_w as f64, bbox.h / out_h as f64);
    let weight = 1.0 / (sampling * sampling) as f64;
    for i in 0..out_h {
        for j in 0..out_w {
            let cell = &mut out[(i * out_w + j) * c..(i * out_w + j + 1) * c];
            for ii in 0..sampling {
                let y = y0 + (i as f64 + (ii as f64 + 0.5) / sampling as f64) * bin_h;
                for jj in 0..sampling {
                    let x = x0 + (j as f64 + (jj as f64 + 0.5) / sampling as f64) * bin_w;
                    pyramid.accumulate(Point::new(x, y), weight, cell);
                }
            }
        }
    }
    Ok(out)
}
