//! Box and polygon update rules used by every cascade stage.
//!
//! Polygon stages work on the center/difference form of each vertex pair:
//! the midpoint `(px, py)` and the top-minus-bottom vector `(dx, dy)`. A
//! [`VertexDelta`] moves the midpoint in units of `|dx|`, `|dy|` and rescales
//! the difference by `exp(·)`, so updates commute with translation and
//! uniform scaling and never flip which side is "top".

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Bbox, BezierDelta, Point, TextPolygon};

/// Magnitudes below this are treated as zero when inverting an update.
pub const DIFF_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoxDelta {
    pub dx: f64,
    pub dy: f64,
    pub dw: f64,
    pub dh: f64,
}

impl BoxDelta {
    pub fn is_finite(&self) -> bool {
        [self.dx, self.dy, self.dw, self.dh].iter().all(|v| v.is_finite())
    }
}

/// `(cx + dx w, cy + dy h, w e^dw, h e^dh)`.
pub fn apply_box_delta(bbox: &Bbox, d: &BoxDelta) -> Result<Bbox> {
    bbox.validate()?;
    if !d.is_finite() {
        return Err(Error::domain("non-finite box delta"));
    }
    Bbox::new(
        bbox.cx + d.dx * bbox.w,
        bbox.cy + d.dy * bbox.h,
        bbox.w * d.dw.exp(),
        bbox.h * d.dh.exp(),
    )
}

/// Delta taking `from` exactly onto `to`.
pub fn inverse_box_delta(from: &Bbox, to: &Bbox) -> Result<BoxDelta> {
    from.validate()?;
    to.validate()?;
    Ok(BoxDelta {
        dx: (to.cx - from.cx) / from.w,
        dy: (to.cy - from.cy) / from.h,
        dw: (to.w / from.w).ln(),
        dh: (to.h / from.h).ln(),
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CenterDiff {
    pub px: f64,
    pub py: f64,
    pub dx: f64,
    pub dy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PolyCenterDiff {
    pub verts: Vec<CenterDiff>,
}

/// Per-vertex polygon update: midpoint shifts `(cx, cy)` and log-scales `(dx, dy)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VertexDelta {
    pub cx: f64,
    pub cy: f64,
    pub dx: f64,
    pub dy: f64,
}

impl VertexDelta {
    pub fn to_array(self) -> [f64; 4] {
        [self.cx, self.cy, self.dx, self.dy]
    }

    pub fn from_array([cx, cy, dx, dy]: [f64; 4]) -> Self {
        Self { cx, cy, dx, dy }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PolyDelta {
    pub verts: Vec<VertexDelta>,
}

impl PolyDelta {
    pub fn zeros(samples: usize) -> Self {
        Self {
            verts: vec![VertexDelta::default(); samples],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.verts
            .iter()
            .all(|v| v.to_array().iter().all(|x| x.is_finite()))
    }

    /// Clamps every component to `[-limit, limit]`.
    pub fn clipped(&self, limit: f64) -> Self {
        Self {
            verts: self
                .verts
                .iter()
                .map(|v| VertexDelta::from_array(v.to_array().map(|x| x.clamp(-limit, limit))))
                .collect(),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.verts.iter().flat_map(|v| v.to_array()).collect()
    }

    pub fn from_flat(values: &[f64]) -> Result<Self> {
        if !values.len().is_multiple_of(4) {
            return Err(Error::domain(format!(
                "flat delta length {} is not a multiple of 4",
                values.len()
            )));
        }
        Ok(Self {
            verts: values
                .chunks(4)
                .map(|c| VertexDelta::from_array([c[0], c[1], c[2], c[3]]))
                .collect(),
        })
    }
}

pub fn to_center_diff(poly: &TextPolygon) -> PolyCenterDiff {
    PolyCenterDiff {
        verts: poly
            .top
            .iter()
            .zip(&poly.bot)
            .map(|(t, b)| CenterDiff {
                px: (t.x + b.x) / 2.0,
                py: (t.y + b.y) / 2.0,
                dx: t.x - b.x,
                dy: t.y - b.y,
            })
            .collect(),
    }
}

pub fn from_center_diff(cd: &PolyCenterDiff) -> Result<TextPolygon> {
    let (top, bot) = cd
        .verts
        .iter()
        .map(|v| {
            (
                Point::new(v.px + v.dx / 2.0, v.py + v.dy / 2.0),
                Point::new(v.px - v.dx / 2.0, v.py - v.dy / 2.0),
            )
        })
        .unzip();
    TextPolygon::new(top, bot)
}

/// One polygon refinement step.
///
/// ```text
/// px' = px + cx |dx|      dx' = dx exp(δdx)
/// py' = py + cy |dy|      dy' = dy exp(δdy)
/// ```
pub fn apply_poly_delta(cd: &PolyCenterDiff, d: &PolyDelta) -> Result<PolyCenterDiff> {
    if cd.verts.len() != d.verts.len() {
        return Err(Error::ShapeMismatch {
            expected: cd.verts.len(),
            actual: d.verts.len(),
        });
    }
    if !d.is_finite() {
        return Err(Error::domain("non-finite polygon delta"));
    }
    Ok(PolyCenterDiff {
        verts: cd
            .verts
            .iter()
            .zip(&d.verts)
            .map(|(v, d)| CenterDiff {
                px: v.px + d.cx * v.dx.abs(),
                py: v.py + d.cy * v.dy.abs(),
                dx: v.dx * d.dx.exp(),
                dy: v.dy * d.dy.exp(),
            })
            .collect(),
    })
}

fn same_nonzero_sign(a: f64, b: f64) -> bool {
    a.abs() >= DIFF_EPS && b.abs() >= DIFF_EPS && a.signum() == b.signum()
}

/// The unique delta with `apply_poly_delta(cd, δ) == target`.
///
/// Requires every difference component to share a non-zero sign with the
/// target: a single step can neither create, destroy nor flip one.
pub fn inverse_poly_delta(cd: &PolyCenterDiff, target: &PolyCenterDiff) -> Result<PolyDelta> {
    if cd.verts.len() != target.verts.len() {
        return Err(Error::ShapeMismatch {
            expected: cd.verts.len(),
            actual: target.verts.len(),
        });
    }
    let mut verts = Vec::with_capacity(cd.verts.len());
    for (s, (v, t)) in cd.verts.iter().zip(&target.verts).enumerate() {
        for (axis, a, b) in [("x", v.dx, t.dx), ("y", v.dy, t.dy)] {
            if !same_nonzero_sign(a, b) {
                return Err(Error::NotRepresentable {
                    vertex: s,
                    reason: format!("{axis} difference {a} cannot reach {b}"),
                });
            }
        }
        verts.push(VertexDelta {
            cx: (t.px - v.px) / v.dx.abs(),
            cy: (t.py - v.py) / v.dy.abs(),
            dx: (t.dx / v.dx).ln(),
            dy: (t.dy / v.dy).ln(),
        });
    }
    Ok(PolyDelta { verts })
}

/// Like [`inverse_poly_delta`], but components that cannot be represented
/// are left at zero instead of failing. Each axis is handled on its own:
/// the midpoint shift needs a non-zero current difference, the rescale a
/// matching sign.
pub fn closest_poly_delta(cd: &PolyCenterDiff, target: &PolyCenterDiff) -> Result<PolyDelta> {
    if cd.verts.len() != target.verts.len() {
        return Err(Error::ShapeMismatch {
            expected: cd.verts.len(),
            actual: target.verts.len(),
        });
    }
    let axis = |p: f64, d: f64, tp: f64, td: f64| -> (f64, f64) {
        let shift = if d.abs() >= DIFF_EPS { (tp - p) / d.abs() } else { 0.0 };
        let scale = if same_nonzero_sign(d, td) { (td / d).ln() } else { 0.0 };
        (shift, scale)
    };
    Ok(PolyDelta {
        verts: cd
            .verts
            .iter()
            .zip(&target.verts)
            .map(|(v, t)| {
                let (cx, dx) = axis(v.px, v.dx, t.px, t.dx);
                let (cy, dy) = axis(v.py, v.dy, t.py, t.dy);
                VertexDelta { cx, cy, dx, dy }
            })
            .collect(),
    })
}

/// Straight centerline along the longer side of `bbox`, width `min(w, h) / 2`.
pub fn default_bezier_delta(bbox: &Bbox) -> BezierDelta {
    let offsets = [-0.5, -1.0 / 6.0, 1.0 / 6.0, 0.5];
    let dp = if bbox.w >= bbox.h {
        offsets.map(|o| [o, 0.0])
    } else {
        offsets.map(|o| [0.0, o])
    };
    let wp = 0.5 * bbox.w.min(bbox.h);
    BezierDelta {
        dp,
        dwp: (wp / (bbox.w * bbox.h).sqrt()).ln(),
    }
}

/// `n` initial proposals tiling a `width × height` image in row-major order.
pub fn grid_proposals(width: f64, height: f64, n: usize) -> Result<Vec<Bbox>> {
    if n == 0 {
        return Err(Error::domain("need at least one proposal"));
    }
    if !(width > 0.0 && height > 0.0) {
        return Err(Error::domain(format!("bad image size {width}x{height}")));
    }
    let cols = ((n as f64 * width / height).sqrt().ceil() as usize).clamp(1, n);
    let rows = n.div_ceil(cols);
    let (cw, ch) = (width / cols as f64, height / rows as f64);
    (0..n)
        .map(|i| {
            let (r, c) = (i / cols, i % cols);
            Bbox::new((c as f64 + 0.5) * cw, (r as f64 + 0.5) * ch, cw, ch)
        })
        .collect()
}
