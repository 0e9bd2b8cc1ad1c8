//! Concrete [`Regressor`]s.
//!
//! * [`ZeroRegressor`] predicts no change and abstains at the transition.
//! * [`OracleRegressor`] knows the ground truth and emits the delta that
//!   moves each assigned proposal onto its target.
//! * [`NoisyOracle`] perturbs the oracle with seeded Gaussian noise.
//! * [`LsqRegressor`] is a per-stage linear model fitted by ridge least
//!   squares on features gathered along its own trajectory.

use nalgebra::{DMatrix, DVector};

use crate::assign::{hungarian, oriented, oriented_l1_cost, Orientation};
use crate::cascade::{box_features, BoxInput, CascadeConfig, PolyInput, Regressor};
use crate::error::{Error, Result};
use crate::geom::{box_to_poly, bezier_delta_for, fit_bezier, Bbox, BezierDelta, TextPolygon};
use crate::polyalign::{polyalign, FeaturePyramid};
use crate::refine::{
    apply_box_delta, apply_poly_delta, closest_poly_delta, default_bezier_delta, from_center_diff,
    inverse_box_delta, to_center_diff, BoxDelta, PolyDelta, VertexDelta,
};
use crate::rng::SeededRng;

pub const MATCHED_SCORE: f64 = 0.99;
pub const UNMATCHED_SCORE: f64 = 0.01;

#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroRegressor;

impl Regressor for ZeroRegressor {
    fn box_delta(&self, _: &BoxInput<'_>) -> Result<BoxDelta> {
        Ok(BoxDelta::default())
    }

    fn poly_delta(&self, input: &PolyInput<'_>) -> Result<PolyDelta> {
        Ok(PolyDelta::zeros(input.polygon.samples()))
    }

    fn score(&self, _: &PolyInput<'_>) -> Result<f64> {
        Ok(0.5)
    }
}

/// Ground-truth-driven regressor.
///
/// Proposals are assigned one-to-one to ground truths by minimum L1
/// distance between box parameters; surplus proposals stay unassigned,
/// predict zero deltas and score [`UNMATCHED_SCORE`].
#[derive(Clone, Debug)]
pub struct OracleRegressor {
    targets: Vec<TextPolygon>,
    target_boxes: Vec<Bbox>,
    assignment: Vec<Option<usize>>,
    oea: bool,
}

impl OracleRegressor {
    pub fn new(ground_truth: &[TextPolygon], proposals: &[Bbox], oea: bool) -> Result<Self> {
        let target_boxes = ground_truth
            .iter()
            .map(|g| Bbox::enclosing(g.vertices()))
            .collect::<Result<Vec<_>>>()?;
        let cost: Vec<Vec<f64>> = proposals
            .iter()
            .map(|p| {
                target_boxes
                    .iter()
                    .map(|t| (p.cx - t.cx).abs() + (p.cy - t.cy).abs() + (p.w - t.w).abs() + (p.h - t.h).abs())
                    .collect()
            })
            .collect();
        let mut assignment = vec![None; proposals.len()];
        if !proposals.is_empty() && !ground_truth.is_empty() {
            for (i, j) in hungarian(&cost)? {
                assignment[i] = Some(j);
            }
        }
        Ok(Self { targets: ground_truth.to_vec(), target_boxes, assignment, oea })
    }

    /// Ground-truth index assigned to `proposal`.
    pub fn assigned(&self, proposal: usize) -> Option<usize> {
        self.assignment.get(proposal).copied().flatten()
    }

    pub fn assignment(&self) -> &[Option<usize>] {
        &self.assignment
    }

    fn target_for(&self, proposal: usize, current: &TextPolygon) -> Result<Option<TextPolygon>> {
        let Some(j) = self.assigned(proposal) else { return Ok(None) };
        let gt = &self.targets[j];
        if gt.samples() != current.samples() {
            return Err(Error::ShapeMismatch { expected: current.samples(), actual: gt.samples() });
        }
        let orientation = if self.oea { oriented_l1_cost(current, gt)?.1 } else { Orientation::Forward };
        Ok(Some(oriented(gt, orientation)))
    }
}

/// Bézier delta whose curve is the least-squares fit to the centerline of
/// `gt` and whose width is the mean top-to-bottom distance.
pub fn bezier_target(bbox: &Bbox, gt: &TextPolygon) -> Result<BezierDelta> {
    let curve = fit_bezier(&gt.centerline())?;
    let wp = gt.top.iter().zip(&gt.bot).map(|(t, b)| (*t - *b).norm()).sum::<f64>() / gt.samples() as f64;
    bezier_delta_for(bbox, &curve, wp)
}

impl Regressor for OracleRegressor {
    fn box_delta(&self, input: &BoxInput<'_>) -> Result<BoxDelta> {
        match self.assigned(input.proposal) {
            Some(j) => inverse_box_delta(input.bbox, &self.target_boxes[j]),
            None => Ok(BoxDelta::default()),
        }
    }

    fn bezier_delta(&self, input: &BoxInput<'_>) -> Result<Option<BezierDelta>> {
        match self.assigned(input.proposal) {
            Some(j) => bezier_target(input.bbox, &self.targets[j]).map(Some),
            None => Ok(None),
        }
    }

    fn poly_delta(&self, input: &PolyInput<'_>) -> Result<PolyDelta> {
        match self.target_for(input.proposal, input.polygon)? {
            Some(t) => closest_poly_delta(&to_center_diff(input.polygon), &to_center_diff(&t)),
            None => Ok(PolyDelta::zeros(input.polygon.samples())),
        }
    }

    fn score(&self, input: &PolyInput<'_>) -> Result<f64> {
        Ok(if self.assigned(input.proposal).is_some() { MATCHED_SCORE } else { UNMATCHED_SCORE })
    }
}

const NOISE_BOX: u64 = 0;
const NOISE_BEZIER: u64 = 1;
const NOISE_POLY: u64 = 2;

/// Oracle plus `sigma · N(0, 1)` on every delta component. Noise is keyed
/// by `(seed, proposal, stage kind, stage)` so it does not depend on
/// evaluation order.
#[derive(Clone, Debug)]
pub struct NoisyOracle {
    pub oracle: OracleRegressor,
    pub sigma: f64,
    pub seed: u64,
}

impl NoisyOracle {
    pub fn new(oracle: OracleRegressor, sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("noise sigma must be non-negative, got {sigma}")));
        }
        Ok(Self { oracle, sigma, seed })
    }

    fn rng(&self, proposal: usize, kind: u64, stage: usize) -> SeededRng {
        SeededRng::keyed(self.seed, &[proposal as u64, kind, stage as u64])
    }
}

impl Regressor for NoisyOracle {
    fn box_delta(&self, input: &BoxInput<'_>) -> Result<BoxDelta> {
        let d = self.oracle.box_delta(input)?;
        let mut r = self.rng(input.proposal, NOISE_BOX, input.stage);
        let s = self.sigma;
        Ok(BoxDelta {
            dx: d.dx + s * r.normal(),
            dy: d.dy + s * r.normal(),
            dw: d.dw + s * r.normal(),
            dh: d.dh + s * r.normal(),
        })
    }

    fn bezier_delta(&self, input: &BoxInput<'_>) -> Result<Option<BezierDelta>> {
        let Some(mut d) = self.oracle.bezier_delta(input)? else { return Ok(None) };
        let mut r = self.rng(input.proposal, NOISE_BEZIER, input.stage);
        for p in d.dp.iter_mut().flatten() {
            *p += self.sigma * r.normal();
        }
        d.dwp += self.sigma * r.normal();
        Ok(Some(d))
    }

    fn poly_delta(&self, input: &PolyInput<'_>) -> Result<PolyDelta> {
        let d = self.oracle.poly_delta(input)?;
        let mut r = self.rng(input.proposal, NOISE_POLY, input.stage);
        Ok(PolyDelta {
            verts: d
                .verts
                .iter()
                .map(|v| VertexDelta::from_array(v.to_array().map(|x| x + self.sigma * r.normal())))
                .collect(),
        })
    }

    fn score(&self, input: &PolyInput<'_>) -> Result<f64> {
        self.oracle.score(input)
    }
}

/// Linear map `y = W [x; 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearHead {
    weights: DMatrix<f64>,
}

impl LinearHead {
    /// Ridge least squares with `λ = 1e-6 · tr(XᵀX) / d`.
    pub fn fit(inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<Self> {
        Self::fit_weighted(inputs, targets, &vec![1.0; inputs.len()])
    }

    /// As [`LinearHead::fit`], minimising `Σ wᵢ ‖yᵢ − W xᵢ‖²`.
    pub fn fit_weighted(inputs: &[Vec<f64>], targets: &[Vec<f64>], weights: &[f64]) -> Result<Self> {
        let (Some(x0), Some(y0)) = (inputs.first(), targets.first()) else {
            return Err(Error::Regressor("no training samples".into()));
        };
        if inputs.len() != targets.len() || inputs.len() != weights.len() {
            return Err(Error::ShapeMismatch { expected: inputs.len(), actual: targets.len().min(weights.len()) });
        }
        let d = x0.len() + 1;
        let k = y0.len();
        let n = inputs.len();
        let root: Vec<f64> = weights.iter().map(|w| w.max(0.0).sqrt()).collect();
        let x = DMatrix::from_fn(n, d, |i, j| root[i] * if j + 1 == d { 1.0 } else { inputs[i][j] });
        let y = DMatrix::from_fn(n, k, |i, j| root[i] * targets[i][j]);
        let mut gram = x.transpose() * &x;
        let lambda = 1e-6 * gram.trace().max(1.0) / d as f64;
        for i in 0..d {
            gram[(i, i)] += lambda;
        }
        let rhs = x.transpose() * y;
        let solution = match gram.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => gram
                .svd(true, true)
                .solve(&rhs, 1e-12)
                .map_err(|e| Error::Regressor(format!("least squares failed: {e}")))?,
        };
        Ok(Self { weights: solution.transpose() })
    }

    pub fn input_len(&self) -> usize {
        self.weights.ncols() - 1
    }

    pub fn output_len(&self) -> usize {
        self.weights.nrows()
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_len() {
            return Err(Error::ShapeMismatch { expected: self.input_len(), actual: x.len() });
        }
        let v = DVector::from_iterator(x.len() + 1, x.iter().copied().chain(std::iter::once(1.0)));
        Ok((&self.weights * v).iter().copied().collect())
    }
}

/// One scene's worth of supervision for [`LsqRegressor::fit`].
#[derive(Clone, Debug)]
pub struct TrainingScene {
    pub pyramid: FeaturePyramid,
    pub ground_truth: Vec<TextPolygon>,
    pub proposals: Vec<Bbox>,
}

/// Bound on predicted box and Bézier components.
const LSQ_BOX_CLIP: f64 = 2.0;
const LSQ_BEZIER_CLIP: f64 = 2.0;

#[derive(Clone, Debug)]
pub struct LsqRegressor {
    config: CascadeConfig,
    box_heads: Vec<LinearHead>,
    bezier_head: LinearHead,
    poly_heads: Vec<LinearHead>,
    score_head: LinearHead,
}

struct Track {
    scene: usize,
    proposal: usize,
    bbox: Bbox,
    polygon: Option<TextPolygon>,
}

fn bezier_to_flat(d: &BezierDelta) -> Vec<f64> {
    d.dp.iter().flatten().copied().chain(std::iter::once(d.dwp)).collect()
}

fn bezier_from_flat(v: &[f64]) -> BezierDelta {
    BezierDelta { dp: [0, 1, 2, 3].map(|j| [v[2 * j], v[2 * j + 1]]), dwp: v[8] }
}

impl LsqRegressor {
    /// Fits each stage in order on the geometry produced by the heads fitted
    /// before it. Geometry heads see only proposals the oracle assigns; the
    /// score head sees all proposals with target 1 for assigned, 0 otherwise,
    /// class-balanced.
    pub fn fit(config: &CascadeConfig, scenes: &[TrainingScene]) -> Result<Self> {
        config.validate()?;
        let oracles = scenes
            .iter()
            .map(|s| OracleRegressor::new(&s.ground_truth, &s.proposals, true))
            .collect::<Result<Vec<_>>>()?;
        let mut tracks: Vec<Track> = scenes
            .iter()
            .enumerate()
            .flat_map(|(si, s)| {
                s.proposals.iter().enumerate().map(move |(pi, b)| Track { scene: si, proposal: pi, bbox: *b, polygon: None })
            })
            .collect();
        let all_tracks = tracks.len();
        let assigned = |t: &Track| oracles[t.scene].assigned(t.proposal).is_some();
        tracks.retain(|t| assigned(t));
        if tracks.is_empty() {
            return Err(Error::Regressor("no proposal is assigned to a ground truth".into()));
        }

        let mut box_heads = Vec::with_capacity(config.box_stages);
        for stage in 0..config.box_stages {
            let mut xs = Vec::with_capacity(tracks.len());
            let mut ys = Vec::with_capacity(tracks.len());
            for t in &tracks {
                let features = box_features(&scenes[t.scene].pyramid, &t.bbox, config)?;
                let input = BoxInput { stage, proposal: t.proposal, bbox: &t.bbox, features: &features };
                let d = oracles[t.scene].box_delta(&input)?;
                xs.push(features);
                ys.push(vec![d.dx, d.dy, d.dw, d.dh]);
            }
            let head = LinearHead::fit(&xs, &ys)?;
            for (t, x) in tracks.iter_mut().zip(&xs) {
                t.bbox = apply_box_delta(&t.bbox, &box_from_flat(&head.predict(x)?))?;
            }
            box_heads.push(head);
        }

        let mut xs = Vec::with_capacity(tracks.len());
        let mut ys = Vec::with_capacity(tracks.len());
        for t in &tracks {
            let features = box_features(&scenes[t.scene].pyramid, &t.bbox, config)?;
            let j = oracles[t.scene].assigned(t.proposal).expect("retained tracks are assigned");
            ys.push(bezier_to_flat(&bezier_target(&t.bbox, &scenes[t.scene].ground_truth[j])?));
            xs.push(features);
        }
        let bezier_head = LinearHead::fit(&xs, &ys)?;
        for (t, x) in tracks.iter_mut().zip(&xs) {
            let d = predicted_bezier(&bezier_head, x, &t.bbox, config.samples)?;
            t.polygon = Some(box_to_poly(&t.bbox, &d, config.samples)?);
        }

        let mut poly_heads = Vec::with_capacity(config.poly_stages);
        for stage in 0..config.poly_stages {
            let mut xs = Vec::with_capacity(tracks.len());
            let mut ys = Vec::with_capacity(tracks.len());
            for t in &tracks {
                let polygon = t.polygon.as_ref().expect("set at transition");
                let features = polyalign(&scenes[t.scene].pyramid, polygon, config.variant)?;
                let input = PolyInput { stage, proposal: t.proposal, polygon, features: &features };
                ys.push(oracles[t.scene].poly_delta(&input)?.clipped(config.delta_clip).to_flat());
                xs.push(features.as_slice().to_vec());
            }
            let head = LinearHead::fit(&xs, &ys)?;
            for (t, x) in tracks.iter_mut().zip(&xs) {
                let polygon = t.polygon.as_ref().expect("set at transition");
                let d = PolyDelta::from_flat(&head.predict(x)?)?.clipped(config.delta_clip);
                t.polygon = Some(from_center_diff(&apply_poly_delta(&to_center_diff(polygon), &d)?)?);
            }
            poly_heads.push(head);
        }

        // Score head: all proposals, run through the geometry heads just fitted.
        let partial = Self {
            config: config.clone(),
            box_heads,
            bezier_head,
            poly_heads,
            score_head: LinearHead { weights: DMatrix::zeros(1, 1) },
        };
        let mut xs = Vec::with_capacity(all_tracks);
        let mut ys = Vec::with_capacity(all_tracks);
        for (si, s) in scenes.iter().enumerate() {
            let out = crate::cascade::run_cascade(
                &CascadeConfig { proposals: s.proposals.len(), ..config.clone() },
                &partial,
                &s.pyramid,
                &s.proposals,
            )?;
            for (pi, p) in out.predictions.iter().enumerate() {
                let features = polyalign(&s.pyramid, &p.poly, config.variant)?;
                xs.push(features.as_slice().to_vec());
                ys.push(vec![if oracles[si].assigned(pi).is_some() { 1.0 } else { 0.0 }]);
            }
        }
        // positives are rare; give both classes equal total weight
        let positives = ys.iter().filter(|y| y[0] > 0.5).count().max(1) as f64;
        let negatives = (ys.len() as f64 - positives).max(1.0);
        let weights: Vec<f64> = ys.iter().map(|y| if y[0] > 0.5 { 0.5 / positives } else { 0.5 / negatives }).collect();
        let score_head = LinearHead::fit_weighted(&xs, &ys, &weights)?;
        Ok(Self { score_head, ..partial })
    }

    pub fn config(&self) -> &CascadeConfig {
        &self.config
    }
}

fn box_from_flat(v: &[f64]) -> BoxDelta {
    let c = |x: f64| x.clamp(-LSQ_BOX_CLIP, LSQ_BOX_CLIP);
    BoxDelta { dx: c(v[0]), dy: c(v[1]), dw: c(v[2]), dh: c(v[3]) }
}

/// Clamped head output, or the default spread if it would not buffer.
fn predicted_bezier(head: &LinearHead, x: &[f64], bbox: &Bbox, samples: usize) -> Result<BezierDelta> {
    let v: Vec<f64> = head.predict(x)?.iter().map(|x| x.clamp(-LSQ_BEZIER_CLIP, LSQ_BEZIER_CLIP)).collect();
    let d = bezier_from_flat(&v);
    Ok(if box_to_poly(bbox, &d, samples).is_ok() { d } else { default_bezier_delta(bbox) })
}

impl Regressor for LsqRegressor {
    fn box_delta(&self, input: &BoxInput<'_>) -> Result<BoxDelta> {
        let head = self
            .box_heads
            .get(input.stage)
            .ok_or_else(|| Error::Regressor(format!("no box head for stage {}", input.stage)))?;
        Ok(box_from_flat(&head.predict(input.features)?))
    }

    fn bezier_delta(&self, input: &BoxInput<'_>) -> Result<Option<BezierDelta>> {
        predicted_bezier(&self.bezier_head, input.features, input.bbox, self.config.samples).map(Some)
    }

    fn poly_delta(&self, input: &PolyInput<'_>) -> Result<PolyDelta> {
        let head = self
            .poly_heads
            .get(input.stage)
            .ok_or_else(|| Error::Regressor(format!("no polygon head for stage {}", input.stage)))?;
        PolyDelta::from_flat(&head.predict(input.features.as_slice())?)
    }

    fn score(&self, input: &PolyInput<'_>) -> Result<f64> {
        if self.score_head.weights.ncols() == 1 {
            return Ok(0.5);
        }
        let s = self.score_head.predict(input.features.as_slice())?[0];
        Ok(s.clamp(UNMATCHED_SCORE, MATCHED_SCORE))
    }
}
