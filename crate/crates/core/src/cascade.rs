//! Multi-stage refinement: `K` box stages, one box → polygon transition and
//! `M` polygon stages.
//!
//! Each stage reads the previous stage's geometry as a plain value and
//! produces a new one; nothing flows backwards through a stage output. The
//! deltas themselves come from a pluggable [`Regressor`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assign::Prediction;
use crate::error::{Error, Result};
use crate::geom::{box_to_poly, Bbox, BezierDelta, TextPolygon, DEFAULT_SAMPLES};
use crate::polyalign::{polyalign, roialign_box, AlignVariant, FeaturePyramid, PolyRoiFeature};
use crate::refine::{
    apply_box_delta, apply_poly_delta, default_bezier_delta, from_center_diff, to_center_diff, BoxDelta,
    PolyDelta,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CascadeConfig {
    /// Box stages `K`.
    pub box_stages: usize,
    /// Polygon stages `M`.
    pub poly_stages: usize,
    /// Proposals `N`.
    pub proposals: usize,
    /// Vertex pairs per polygon `S`.
    pub samples: usize,
    /// Bound applied to every polygon delta component.
    pub delta_clip: f64,
    pub variant: AlignVariant,
    /// Box RoIAlign output is `roi_size × roi_size`.
    pub roi_size: usize,
    pub roi_sampling: usize,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self {
            box_stages: 3,
            poly_stages: 3,
            proposals: 300,
            samples: DEFAULT_SAMPLES,
            delta_clip: 4.0,
            variant: AlignVariant::Vertex,
            roi_size: 7,
            roi_sampling: 2,
        }
    }
}

impl CascadeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.box_stages == 0 || self.poly_stages == 0 {
            return Err(Error::Config(format!(
                "box and polygon stage counts must be at least 1, got K={} M={}",
                self.box_stages, self.poly_stages
            )));
        }
        if self.proposals == 0 {
            return Err(Error::Config("proposal count must be at least 1".into()));
        }
        if self.samples < 2 {
            return Err(Error::Config(format!("samples must be at least 2, got {}", self.samples)));
        }
        if !(self.delta_clip > 0.0) {
            return Err(Error::Config(format!("delta_clip must be positive, got {}", self.delta_clip)));
        }
        if self.roi_size == 0 || self.roi_sampling == 0 {
            return Err(Error::Config("roi_size and roi_sampling must be positive".into()));
        }
        Ok(())
    }

    pub fn box_feature_len(&self, channels: usize) -> usize {
        self.roi_size * self.roi_size * channels
    }

    pub fn poly_feature_len(&self, channels: usize) -> usize {
        self.samples * 3 * channels
    }
}

/// What a regressor sees at a box stage or at the transition.
#[derive(Clone, Copy, Debug)]
pub struct BoxInput<'a> {
    pub stage: usize,
    pub proposal: usize,
    pub bbox: &'a Bbox,
    pub features: &'a [f64],
}

/// What a regressor sees at a polygon stage or when scoring.
#[derive(Clone, Copy, Debug)]
pub struct PolyInput<'a> {
    pub stage: usize,
    pub proposal: usize,
    pub polygon: &'a TextPolygon,
    pub features: &'a PolyRoiFeature,
}

/// Source of per-stage deltas. Called concurrently for different proposals.
pub trait Regressor: Sync {
    fn box_delta(&self, input: &BoxInput<'_>) -> Result<BoxDelta>;

    /// Bézier delta at the transition; `None` means use
    /// [`default_bezier_delta`].
    fn bezier_delta(&self, input: &BoxInput<'_>) -> Result<Option<BezierDelta>> {
        let _ = input;
        Ok(None)
    }

    fn poly_delta(&self, input: &PolyInput<'_>) -> Result<PolyDelta>;

    /// Text confidence in `(0, 1)` for the final polygon.
    fn score(&self, input: &PolyInput<'_>) -> Result<f64>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageKind {
    Box,
    Transition,
    Poly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StageGeometry {
    Boxes(Vec<Bbox>),
    Polygons(Vec<TextPolygon>),
}

/// Geometry of every proposal after one stage. One JSON line each:
/// `{"stage": int, "kind": "box"|"transition"|"poly", "geometry": [...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: usize,
    pub kind: StageKind,
    pub geometry: StageGeometry,
}

impl StageRecord {
    pub fn polygons(&self) -> Option<&[TextPolygon]> {
        match &self.geometry {
            StageGeometry::Polygons(p) => Some(p),
            StageGeometry::Boxes(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CascadeOutput {
    pub predictions: Vec<Prediction>,
    pub trace: Vec<StageRecord>,
}

struct ProposalRun {
    boxes: Vec<Bbox>,
    polygons: Vec<TextPolygon>,
    score: f64,
}

pub fn box_features(pyramid: &FeaturePyramid, bbox: &Bbox, config: &CascadeConfig) -> Result<Vec<f64>> {
    roialign_box(pyramid, bbox, config.roi_size, config.roi_size, config.roi_sampling)
}

fn run_proposal(
    config: &CascadeConfig,
    regressor: &dyn Regressor,
    pyramid: &FeaturePyramid,
    proposal: usize,
    init: Bbox,
) -> Result<ProposalRun> {
    let mut bbox = init;
    let mut boxes = Vec::with_capacity(config.box_stages);
    for stage in 0..config.box_stages {
        let features = box_features(pyramid, &bbox, config)?;
        let delta = regressor.box_delta(&BoxInput { stage, proposal, bbox: &bbox, features: &features })?;
        bbox = apply_box_delta(&bbox, &delta)?;
        boxes.push(bbox);
    }

    let features = box_features(pyramid, &bbox, config)?;
    let input = BoxInput { stage: config.box_stages, proposal, bbox: &bbox, features: &features };
    let bezier = regressor
        .bezier_delta(&input)?
        .unwrap_or_else(|| default_bezier_delta(&bbox));
    let mut polygon = box_to_poly(&bbox, &bezier, config.samples)?;
    let mut polygons = Vec::with_capacity(config.poly_stages + 1);
    polygons.push(polygon.clone());

    for stage in 0..config.poly_stages {
        let features = polyalign(pyramid, &polygon, config.variant)?;
        let delta = regressor.poly_delta(&PolyInput { stage, proposal, polygon: &polygon, features: &features })?;
        if delta.verts.len() != config.samples {
            return Err(Error::Regressor(format!(
                "polygon delta has {} vertices, expected {}",
                delta.verts.len(),
                config.samples
            )));
        }
        let cd = apply_poly_delta(&to_center_diff(&polygon), &delta.clipped(config.delta_clip))?;
        polygon = from_center_diff(&cd)?;
        polygons.push(polygon.clone());
    }

    let features = polyalign(pyramid, &polygon, config.variant)?;
    let score = regressor.score(&PolyInput {
        stage: config.poly_stages,
        proposal,
        polygon: &polygon,
        features: &features,
    })?;
    if !(score > 0.0 && score < 1.0) {
        return Err(Error::Regressor(format!("score {score} outside (0, 1)")));
    }
    Ok(ProposalRun { boxes, polygons, score })
}

/// Runs every proposal through the cascade. Proposals are independent and
/// processed in parallel; results keep proposal order.
pub fn run_cascade(
    config: &CascadeConfig,
    regressor: &dyn Regressor,
    pyramid: &FeaturePyramid,
    init_boxes: &[Bbox],
) -> Result<CascadeOutput> {
    config.validate()?;
    if init_boxes.len() != config.proposals {
        return Err(Error::ShapeMismatch {
            expected: config.proposals,
            actual: init_boxes.len(),
        });
    }
    let runs: Vec<ProposalRun> = init_boxes
        .par_iter()
        .enumerate()
        .map(|(i, b)| run_proposal(config, regressor, pyramid, i, *b))
        .collect::<Result<_>>()?;

    let mut trace = Vec::with_capacity(config.box_stages + config.poly_stages + 1);
    for k in 0..config.box_stages {
        trace.push(StageRecord {
            stage: k,
            kind: StageKind::Box,
            geometry: StageGeometry::Boxes(runs.iter().map(|r| r.boxes[k]).collect()),
        });
    }
    for m in 0..=config.poly_stages {
        trace.push(StageRecord {
            stage: config.box_stages + m,
            kind: if m == 0 { StageKind::Transition } else { StageKind::Poly },
            geometry: StageGeometry::Polygons(runs.iter().map(|r| r.polygons[m].clone()).collect()),
        });
    }
    let predictions = runs
        .into_iter()
        .map(|r| Prediction {
            poly: r.polygons.last().expect("at least the transition polygon").clone(),
            score: r.score,
        })
        .collect();
    Ok(CascadeOutput { predictions, trace })
}
