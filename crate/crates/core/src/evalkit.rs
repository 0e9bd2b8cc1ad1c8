//! Detection precision / recall / F-score.
//!
//! Protocol: drop predictions scoring below `score_thresh`, visit the rest by
//! descending score (stable for ties) and let each claim the unclaimed ground
//! truth with the highest raster IoU, provided it reaches `iou_thresh`.
//! Scores are micro-averaged over scenes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assign::Prediction;
use crate::error::{Error, Result};
use crate::geom::TextPolygon;
use crate::polyiou::raster_iou;

pub const EVAL_RESOLUTION: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalThresholds {
    pub iou_thresh: f64,
    pub score_thresh: f64,
    pub resolution: usize,
}

impl Default for EvalThresholds {
    fn default() -> Self {
        Self { iou_thresh: 0.5, score_thresh: 0.3, resolution: EVAL_RESOLUTION }
    }
}

impl EvalThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_thresh > 0.0 && self.iou_thresh < 1.0) {
            return Err(Error::Config(format!("iou_thresh {} outside (0, 1)", self.iou_thresh)));
        }
        if !(0.0..=1.0).contains(&self.score_thresh) {
            return Err(Error::Config(format!("score_thresh {} outside [0, 1]", self.score_thresh)));
        }
        if self.resolution < crate::polyiou::MIN_RASTER_RESOLUTION {
            return Err(Error::Config(format!("raster resolution {} too small", self.resolution)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionMatch {
    /// `(prediction index, gt index, iou)` for every true positive.
    pub pairs: Vec<(usize, usize, f64)>,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

pub fn match_detections(
    preds: &[Prediction],
    gts: &[TextPolygon],
    thresholds: &EvalThresholds,
) -> Result<DetectionMatch> {
    thresholds.validate()?;
    let mut order: Vec<usize> = (0..preds.len())
        .filter(|&i| preds[i].score >= thresholds.score_thresh)
        .collect();
    order.sort_by(|&a, &b| preds[b].score.total_cmp(&preds[a].score));
    let outlines: Vec<_> = gts.iter().map(TextPolygon::outline).collect();
    let mut claimed = vec![false; gts.len()];
    let mut result = DetectionMatch::default();
    for i in order {
        let outline = preds[i].poly.outline();
        let mut best: Option<(usize, f64)> = None;
        for (j, g) in outlines.iter().enumerate() {
            if claimed[j] {
                continue;
            }
            let iou = raster_iou(&outline, g, thresholds.resolution)?;
            if iou >= thresholds.iou_thresh && best.is_none_or(|(_, b)| iou > b) {
                best = Some((j, iou));
            }
        }
        match best {
            Some((j, iou)) => {
                claimed[j] = true;
                result.pairs.push((i, j, iou));
                result.tp += 1;
            }
            None => result.fp += 1,
        }
    }
    result.fn_ = gts.len() - result.tp;
    Ok(result)
}

/// One scene's predictions and ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneEval {
    pub scene: String,
    pub predictions: Vec<Prediction>,
    pub ground_truth: Vec<TextPolygon>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneCounts {
    pub scene: String,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub p: f64,
    pub r: f64,
    pub f: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub per_scene: Vec<SceneCounts>,
}

/// `(P, R, F)` from counts; empty denominators give 0.
pub fn prf(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let p = ratio(tp, tp + fp);
    let r = ratio(tp, tp + fn_);
    let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    (p, r, f)
}

pub fn evaluate(scenes: &[SceneEval], thresholds: &EvalThresholds) -> Result<EvalReport> {
    thresholds.validate()?;
    let per_scene: Vec<SceneCounts> = scenes
        .par_iter()
        .map(|s| {
            let m = match_detections(&s.predictions, &s.ground_truth, thresholds)?;
            let (p, r, f) = prf(m.tp, m.fp, m.fn_);
            Ok(SceneCounts { scene: s.scene.clone(), tp: m.tp, fp: m.fp, fn_: m.fn_, p, r, f })
        })
        .collect::<Result<_>>()?;
    let (tp, fp, fn_) = per_scene
        .iter()
        .fold((0, 0, 0), |(a, b, c), s| (a + s.tp, b + s.fp, c + s.fn_));
    let (precision, recall, fscore) = prf(tp, fp, fn_);
    Ok(EvalReport { precision, recall, fscore, tp, fp, fn_, per_scene })
}
