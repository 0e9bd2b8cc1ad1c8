use std::path::Path;
use std::process::Command;

use textpoly_cli::{cmd_eval, cmd_plot, cmd_run, cmd_synth, CliError, RegressorSpec, RunConfig};
use textpoly_core::{CascadeConfig, Prediction, SceneParams};

fn small_config(out: &Path) -> RunConfig {
    RunConfig {
        cascade: CascadeConfig { proposals: 16, ..Default::default() },
        scene: SceneParams { width: 192, height: 192, n_instances: 3, ..Default::default() },
        strides: vec![8.0, 16.0],
        seeds: (0..3).collect(),
        out: out.to_path_buf(),
        ..Default::default()
    }
}

fn count_files(dir: &Path) -> usize {
    std::fs::read_dir(dir).map(|d| d.count()).unwrap_or(0)
}

#[test]
fn synth_writes_one_scene_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let config = RunConfig { seeds: (0..10).collect(), ..small_config(tmp.path()) };
    assert_eq!(cmd_synth(&config).unwrap().len(), 10);
    assert_eq!(count_files(&tmp.path().join("scenes")), 10);
    assert!(tmp.path().join("features/scene_9/manifest.json").exists());
    let saved: RunConfig = serde_json::from_slice(&std::fs::read(tmp.path().join("config.json")).unwrap()).unwrap();
    assert_eq!(saved, config);
}

#[test]
fn invalid_range_fails_before_writing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let mut config = small_config(&out);
    config.scene.rotation_deg = [30.0, -30.0];
    assert!(matches!(cmd_synth(&config), Err(CliError::Config(_))));
    assert!(!out.exists());
}

#[test]
fn zero_polygon_stages_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = small_config(tmp.path());
    config.cascade.poly_stages = 0;
    let err = cmd_run(&config).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn oracle_run_is_perfect_and_zero_noise_matches() {
    let tmp = tempfile::tempdir().unwrap();
    let config = small_config(tmp.path());
    cmd_synth(&config).unwrap();
    cmd_run(&config).unwrap();
    let s = cmd_eval(&config).unwrap();
    assert_eq!((s.precision, s.recall, s.fscore), (1.0, 1.0, 1.0));
    let oracle_dets = std::fs::read(tmp.path().join("detections/scene_1.json")).unwrap();

    let noisy = RunConfig { regressor: RegressorSpec::NoisyOracle { sigma: 0.0, noise_seed: 9 }, ..config.clone() };
    cmd_run(&noisy).unwrap();
    assert_eq!(std::fs::read(tmp.path().join("detections/scene_1.json")).unwrap(), oracle_dets);

    let report = std::fs::read_to_string(tmp.path().join("report.csv")).unwrap();
    assert!(report.starts_with("scene,tp,fp,fn,p,r,f\n"));
    assert!(report.contains("all,"));
    let recall: Vec<f64> = s.sweep.iter().map(|p| p.recall).collect();
    assert!(recall.windows(2).all(|w| w[1] <= w[0]), "{recall:?}");
}

#[test]
fn empty_detections_score_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let config = small_config(tmp.path());
    cmd_synth(&config).unwrap();
    cmd_run(&config).unwrap();
    for seed in &config.seeds {
        let path = tmp.path().join(format!("detections/scene_{seed}.json"));
        std::fs::write(&path, serde_json::to_vec(&Vec::<Prediction>::new()).unwrap()).unwrap();
    }
    let s = cmd_eval(&config).unwrap();
    assert_eq!((s.precision, s.recall, s.fscore), (0.0, 0.0, 0.0));
}

#[test]
fn run_without_scenes_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let err = cmd_run(&small_config(tmp.path())).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("scene_0.json"), "{err}");
}

#[test]
fn plots_one_svg_per_stage_and_a_pr_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let config = RunConfig { seeds: vec![4], ..small_config(tmp.path()) };
    cmd_synth(&config).unwrap();
    cmd_run(&config).unwrap();
    cmd_eval(&config).unwrap();
    let written = cmd_plot(&config, None, None).unwrap();
    let stages = config.cascade.box_stages + config.cascade.poly_stages + 1;
    assert_eq!(written.len(), stages + 1);
    assert_eq!(count_files(&tmp.path().join("plots/scene_4")), stages);
    assert!(tmp.path().join("plots/pr_curve.svg").exists());
    let first = std::fs::read(&written[0]).unwrap();
    cmd_plot(&config, None, None).unwrap();
    assert_eq!(std::fs::read(&written[0]).unwrap(), first);

    let only_report = cmd_plot(&config, None, Some(&tmp.path().join("summary.json"))).unwrap();
    assert_eq!(only_report.len(), 1);

    let empty = tmp.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let err = cmd_plot(&config, Some(&empty), None).unwrap_err();
    assert!(err.to_string().contains("no stages"), "{err}");
}

#[test]
fn lsq_regressor_runs_on_held_out_scenes() {
    let tmp = tempfile::tempdir().unwrap();
    let config = RunConfig {
        regressor: RegressorSpec::Lsq { train_seeds: (100..106).collect() },
        ..small_config(tmp.path())
    };
    cmd_synth(&config).unwrap();
    let losses = cmd_run(&config).unwrap();
    assert_eq!(losses.len(), 3);
    assert!(losses.iter().all(|l| l.total.is_finite()));
    cmd_eval(&config).unwrap();
}

#[test]
fn binary_exit_codes_and_config_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let bin = env!("CARGO_BIN_EXE_textpoly");
    let run = |args: &[&str]| Command::new(bin).args(args).output().unwrap();
    let o = out.to_str().unwrap();

    assert_eq!(run(&["synth", "--seeds", "0..2", "--out", o, "--iou-thresh", "1.5"]).status.code(), Some(2));
    assert_eq!(run(&["run", "--seeds", "0..2", "--out", o]).status.code(), Some(3));
    assert_eq!(run(&["synth", "--seeds", "nope"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));

    let first = run(&["synth", "--seeds", "0..2", "--out", o, "--variant", "grid", "--no-oea"]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let saved: RunConfig = serde_json::from_slice(&std::fs::read(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(saved.seeds, vec![0, 1]);
    assert!(!saved.oea);
    assert_eq!(saved.cascade.variant, textpoly_core::AlignVariant::Grid);

    // feeding the saved config back reproduces the same files
    let before = std::fs::read(out.join("scenes/scene_1.json")).unwrap();
    let cfg = out.join("config.json");
    let copy = tmp.path().join("saved.json");
    std::fs::copy(&cfg, &copy).unwrap();
    assert!(run(&["synth", "--config", copy.to_str().unwrap()]).status.success());
    assert_eq!(std::fs::read(out.join("scenes/scene_1.json")).unwrap(), before);
    assert_eq!(std::fs::read(&cfg).unwrap(), std::fs::read(&copy).unwrap());
}
