use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use textpoly_core::assign::{match_predictions, oriented, set_prediction_loss};
use textpoly_core::cascade::{run_cascade, StageGeometry, StageRecord};
use textpoly_core::evalkit::{evaluate, EvalReport};
use textpoly_core::io::{load_pyramid, read_json, read_jsonl, save_pyramid, write_bytes, write_json, write_jsonl};
use textpoly_core::polyiou::poly_iou_loss;
use textpoly_core::refine::grid_proposals;
use textpoly_core::regressor::{LsqRegressor, NoisyOracle, OracleRegressor, TrainingScene};
use textpoly_core::synth::{generate_scene, scene_features};
use textpoly_core::{
    Bbox, EvalThresholds, GroundTruth, MatchWeights, Prediction, Regressor, Scene, SceneEval, TextPolygon,
};

use crate::config::{RegressorSpec, RunConfig};
use crate::svg::{pr_curve_svg, stage_svg, Canvas, StageShapes};
use crate::CliError;

/// Score thresholds evaluated for the P/R sweep.
pub const SWEEP: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

pub fn scene_name(seed: u64) -> String {
    format!("scene_{seed}")
}

fn scene_path(out: &Path, seed: u64) -> PathBuf {
    out.join("scenes").join(format!("{}.json", scene_name(seed)))
}

fn manifest_path(out: &Path, seed: u64) -> PathBuf {
    out.join("features").join(scene_name(seed)).join("manifest.json")
}

fn detections_path(out: &Path, seed: u64) -> PathBuf {
    out.join("detections").join(format!("{}.json", scene_name(seed)))
}

fn trace_path(out: &Path, seed: u64) -> PathBuf {
    out.join("traces").join(format!("{}.jsonl", scene_name(seed)))
}

fn write_config(config: &RunConfig) -> Result<(), CliError> {
    Ok(write_json(&config.out.join("config.json"), config)?)
}

fn require(path: &Path, what: &str) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Data(format!("missing {what} {}", path.display())))
    }
}

/// Writes one scene file and one feature pyramid per seed.
pub fn cmd_synth(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    config.validate()?;
    let written = config
        .seeds
        .par_iter()
        .map(|&seed| {
            let scene = generate_scene(seed, &config.scene)?;
            let pyramid = scene_features(&scene, &config.strides, config.channels)?;
            let path = scene_path(&config.out, seed);
            write_json(&path, &scene)?;
            save_pyramid(&config.out.join("features").join(scene_name(seed)), &pyramid)?;
            Ok(path)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    write_config(config)?;
    Ok(written)
}

/// Per-scene training objective of the final predictions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossSummary {
    pub scene: String,
    pub class_loss: f64,
    pub coord_loss: f64,
    /// Mean polygon IoU loss over matched pairs, before weighting.
    pub iou_loss: f64,
    pub total: f64,
}

fn loss_summary(scene: String, preds: &[Prediction], gts: &[TextPolygon], config: &RunConfig) -> Result<LossSummary, CliError> {
    let gts: Vec<GroundTruth> = gts.iter().map(|poly| GroundTruth { poly: poly.clone() }).collect();
    let weights = MatchWeights { oea: config.oea, ..Default::default() };
    let matching = match_predictions(preds, &gts, &weights)?;
    let set = set_prediction_loss(preds, &gts, &matching, &weights)?;
    let mut iou_loss = 0.0;
    for pair in &matching.pairs {
        iou_loss += poly_iou_loss(&preds[pair.pred].poly, &oriented(&gts[pair.gt].poly, pair.orientation))?;
    }
    if !matching.pairs.is_empty() {
        iou_loss /= matching.pairs.len() as f64;
    }
    Ok(LossSummary {
        scene,
        class_loss: set.class_loss,
        coord_loss: set.coord_loss,
        iou_loss,
        total: set.total + config.poly_iou_weight * iou_loss,
    })
}

fn load_scene(out: &Path, seed: u64) -> Result<Scene, CliError> {
    let path = scene_path(out, seed);
    require(&path, "scene")?;
    Ok(read_json(&path)?)
}

fn proposals_for(scene: &Scene, config: &RunConfig) -> Result<Vec<Bbox>, CliError> {
    Ok(grid_proposals(scene.size[0] as f64, scene.size[1] as f64, config.cascade.proposals)?)
}

fn fit_lsq(config: &RunConfig, train_seeds: &[u64]) -> Result<LsqRegressor, CliError> {
    let scenes = train_seeds
        .par_iter()
        .map(|&seed| {
            let scene = generate_scene(seed, &config.scene)?;
            let pyramid = scene_features(&scene, &config.strides, config.channels)?;
            let proposals = proposals_for(&scene, config)?;
            Ok(TrainingScene { pyramid, ground_truth: scene.ground_truth(), proposals })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(LsqRegressor::fit(&config.cascade, &scenes)?)
}

/// Runs the cascade on every scene and writes detections, traces and
/// `losses.json`.
pub fn cmd_run(config: &RunConfig) -> Result<Vec<LossSummary>, CliError> {
    config.validate()?;
    for &seed in &config.seeds {
        require(&scene_path(&config.out, seed), "scene")?;
        require(&manifest_path(&config.out, seed), "feature manifest")?;
    }
    let lsq = match &config.regressor {
        RegressorSpec::Lsq { train_seeds } => Some(fit_lsq(config, train_seeds)?),
        _ => None,
    };
    let losses = config
        .seeds
        .par_iter()
        .map(|&seed| {
            let scene = load_scene(&config.out, seed)?;
            let pyramid = load_pyramid(&manifest_path(&config.out, seed))?;
            let proposals = proposals_for(&scene, config)?;
            let gts = scene.ground_truth();
            let oracle;
            let noisy;
            let regressor: &dyn Regressor = match &config.regressor {
                RegressorSpec::Oracle => {
                    oracle = OracleRegressor::new(&gts, &proposals, config.oea)?;
                    &oracle
                }
                RegressorSpec::NoisyOracle { sigma, noise_seed } => {
                    let base = OracleRegressor::new(&gts, &proposals, config.oea)?;
                    noisy = NoisyOracle::new(base, *sigma, noise_seed ^ seed.rotate_left(32))?;
                    &noisy
                }
                RegressorSpec::Lsq { .. } => lsq.as_ref().expect("fitted above"),
            };
            let out = run_cascade(&config.cascade, regressor, &pyramid, &proposals)?;
            write_json(&detections_path(&config.out, seed), &out.predictions)?;
            write_jsonl(&trace_path(&config.out, seed), &out.trace)?;
            loss_summary(scene_name(seed), &out.predictions, &gts, config)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    write_json(&config.out.join("losses.json"), &losses)?;
    write_config(config)?;
    Ok(losses)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub score_thresh: f64,
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub iou_thresh: f64,
    pub score_thresh: f64,
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub sweep: Vec<SweepPoint>,
}

fn report_csv(report: &EvalReport) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Data(format!("csv: {e}"));
    w.write_record(["scene", "tp", "fp", "fn", "p", "r", "f"]).map_err(csv_err)?;
    let row = |name: &str, tp: usize, fp: usize, fn_: usize, p: f64, r: f64, f: f64| {
        [name.to_string(), tp.to_string(), fp.to_string(), fn_.to_string(), format!("{p:.6}"), format!("{r:.6}"), format!("{f:.6}")]
    };
    for s in &report.per_scene {
        w.write_record(row(&s.scene, s.tp, s.fp, s.fn_, s.p, s.r, s.f)).map_err(csv_err)?;
    }
    w.write_record(row("all", report.tp, report.fp, report.fn_, report.precision, report.recall, report.fscore))
        .map_err(csv_err)?;
    w.into_inner().map_err(|e| CliError::Data(format!("csv: {e}")))
}

/// Scores detections against scene ground truth; writes `report.csv` and
/// `summary.json` (including a score-threshold sweep).
pub fn cmd_eval(config: &RunConfig) -> Result<EvalSummary, CliError> {
    config.validate()?;
    let scenes = config
        .seeds
        .iter()
        .map(|&seed| {
            let path = detections_path(&config.out, seed);
            require(&path, "detections")?;
            Ok(SceneEval {
                scene: scene_name(seed),
                predictions: read_json(&path)?,
                ground_truth: load_scene(&config.out, seed)?.ground_truth(),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let report = evaluate(&scenes, &config.eval)?;
    let sweep = SWEEP
        .iter()
        .map(|&score_thresh| {
            let r = evaluate(&scenes, &EvalThresholds { score_thresh, ..config.eval })?;
            Ok(SweepPoint { score_thresh, precision: r.precision, recall: r.recall, fscore: r.fscore })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let summary = EvalSummary {
        iou_thresh: config.eval.iou_thresh,
        score_thresh: config.eval.score_thresh,
        precision: report.precision,
        recall: report.recall,
        fscore: report.fscore,
        tp: report.tp,
        fp: report.fp,
        fn_: report.fn_,
        sweep,
    };
    write_bytes(&config.out.join("report.csv"), &report_csv(&report)?)?;
    write_json(&config.out.join("summary.json"), &summary)?;
    write_config(config)?;
    Ok(summary)
}

/// One SVG per stage of `trace`, written into `dir`. Ground truth and the
/// scene canvas are used when given; only proposals listed in `keep` are
/// drawn when it is given.
pub fn plot_trace(
    trace: &Path,
    dir: &Path,
    scene: Option<&Scene>,
    keep: Option<&[bool]>,
) -> Result<Vec<PathBuf>, CliError> {
    let records: Vec<StageRecord> = read_jsonl(trace)?;
    if records.is_empty() {
        return Err(CliError::Data(format!("trace {} has no stages", trace.display())));
    }
    let filter = |i: usize| keep.is_none_or(|k| k.get(i).copied().unwrap_or(false));
    let gts = scene.map(Scene::ground_truth).unwrap_or_default();
    let canvas = match scene {
        Some(s) => Canvas::from_size(s.size[0] as f64, s.size[1] as f64),
        None => {
            let points = records.iter().flat_map(|r| match &r.geometry {
                StageGeometry::Boxes(b) => b.iter().flat_map(|b| [b.center()]).collect::<Vec<_>>(),
                StageGeometry::Polygons(p) => p.iter().flat_map(|p| p.vertices().collect::<Vec<_>>()).collect(),
            });
            Canvas::fitting(points).ok_or_else(|| CliError::Data(format!("trace {} has no geometry", trace.display())))?
        }
    };
    let mut written = Vec::with_capacity(records.len());
    for r in &records {
        let title = format!("stage {} ({:?})", r.stage, r.kind).to_lowercase();
        let doc = match &r.geometry {
            StageGeometry::Boxes(b) => {
                let kept: Vec<Bbox> = b.iter().enumerate().filter(|(i, _)| filter(*i)).map(|(_, b)| *b).collect();
                stage_svg(&canvas, &title, StageShapes::Boxes(&kept), &gts)
            }
            StageGeometry::Polygons(p) => {
                let kept: Vec<TextPolygon> =
                    p.iter().enumerate().filter(|(i, _)| filter(*i)).map(|(_, p)| p.clone()).collect();
                stage_svg(&canvas, &title, StageShapes::Polygons(&kept), &gts)
            }
        };
        let path = dir.join(format!("stage_{}.svg", r.stage));
        write_bytes(&path, doc.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

/// P/R curve from a `summary.json`.
pub fn plot_report(summary: &Path, path: &Path) -> Result<PathBuf, CliError> {
    let s: EvalSummary = read_json(summary)?;
    if s.sweep.is_empty() {
        return Err(CliError::Data(format!("report {} has no sweep points", summary.display())));
    }
    let points: Vec<(f64, f64, String)> =
        s.sweep.iter().map(|p| (p.recall, p.precision, format!("score >= {:.2}", p.score_thresh))).collect();
    write_bytes(path, pr_curve_svg(&points).as_bytes())?;
    Ok(path.to_path_buf())
}

/// With no explicit inputs, plots every trace of the configured seeds
/// (keeping proposals that pass the score threshold) and the P/R curve.
pub fn cmd_plot(config: &RunConfig, trace: Option<&Path>, report: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    config.validate()?;
    let plots = config.out.join("plots");
    let mut written = Vec::new();
    if trace.is_none() && report.is_none() {
        for &seed in &config.seeds {
            let path = trace_path(&config.out, seed);
            require(&path, "trace")?;
            let scene = load_scene(&config.out, seed)?;
            let dets = detections_path(&config.out, seed);
            let keep: Option<Vec<bool>> = if dets.exists() {
                let preds: Vec<Prediction> = read_json(&dets)?;
                Some(preds.iter().map(|p| p.score >= config.eval.score_thresh).collect())
            } else {
                None
            };
            written.extend(plot_trace(&path, &plots.join(scene_name(seed)), Some(&scene), keep.as_deref())?);
        }
        let summary = config.out.join("summary.json");
        require(&summary, "report")?;
        written.push(plot_report(&summary, &plots.join("pr_curve.svg"))?);
        return Ok(written);
    }
    if let Some(t) = trace {
        let stem = t.file_stem().and_then(|s| s.to_str()).unwrap_or("trace");
        require(t, "trace")?;
        written.extend(plot_trace(t, &plots.join(stem), None, None)?);
    }
    if let Some(r) = report {
        require(r, "report")?;
        written.push(plot_report(r, &plots.join("pr_curve.svg"))?);
    }
    Ok(written)
}
