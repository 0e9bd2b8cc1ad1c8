use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use textpoly_core::{CascadeConfig, EvalThresholds, SceneParams};

use crate::CliError;

/// Which stand-in produces the per-stage deltas.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RegressorSpec {
    #[default]
    Oracle,
    NoisyOracle {
        sigma: f64,
        #[serde(default)]
        noise_seed: u64,
    },
    /// Linear heads fitted on scenes generated from `train_seeds`, which
    /// must not overlap the evaluation seeds.
    Lsq { train_seeds: Vec<u64> },
}

/// Everything a command needs. Written to `config.json` in the output
/// directory; feeding that file back through `--config` reproduces the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    #[serde(flatten)]
    pub cascade: CascadeConfig,
    pub oea: bool,
    /// Weight of the polygon IoU term in the reported loss.
    pub poly_iou_weight: f64,
    pub eval: EvalThresholds,
    pub scene: SceneParams,
    /// Feature pyramid strides, strictly increasing.
    pub strides: Vec<f64>,
    pub channels: usize,
    pub regressor: RegressorSpec,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            cascade: CascadeConfig::default(),
            oea: true,
            poly_iou_weight: 1.0,
            eval: EvalThresholds::default(),
            scene: SceneParams::default(),
            strides: vec![8.0, 16.0, 32.0],
            channels: 4,
            regressor: RegressorSpec::Oracle,
            seeds: (0..10).collect(),
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.cascade.validate()?;
        self.eval.validate()?;
        self.scene.validate()?;
        if self.cascade.samples != self.scene.samples {
            return Err(CliError::Config(format!(
                "cascade samples ({}) and scene samples ({}) differ",
                self.cascade.samples, self.scene.samples
            )));
        }
        if self.strides.is_empty()
            || self.strides.iter().any(|s| !(*s > 0.0 && s.is_finite()))
            || self.strides.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(CliError::Config(format!("strides must be positive and increasing, got {:?}", self.strides)));
        }
        if self.channels == 0 {
            return Err(CliError::Config("channels must be positive".into()));
        }
        if !(self.poly_iou_weight >= 0.0 && self.poly_iou_weight.is_finite()) {
            return Err(CliError::Config(format!("poly_iou_weight must be non-negative, got {}", self.poly_iou_weight)));
        }
        if self.seeds.is_empty() {
            return Err(CliError::Config("no seeds given".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(CliError::Config("seeds contain duplicates".into()));
        }
        match &self.regressor {
            RegressorSpec::Oracle => {}
            RegressorSpec::NoisyOracle { sigma, .. } => {
                if !(*sigma >= 0.0 && sigma.is_finite()) {
                    return Err(CliError::Config(format!("noise sigma must be non-negative, got {sigma}")));
                }
            }
            RegressorSpec::Lsq { train_seeds } => {
                if train_seeds.is_empty() {
                    return Err(CliError::Config("lsq regressor needs training seeds".into()));
                }
                if let Some(s) = train_seeds.iter().find(|s| self.seeds.contains(s)) {
                    return Err(CliError::Config(format!("training seed {s} is also an evaluation seed")));
                }
            }
        }
        Ok(())
    }
}

/// `"3"`, `"1,4,9"`, `"0..10"` (exclusive) or a mix: `"0..3,7"`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Config(format!("cannot parse seeds {text:?}"));
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once("..") {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
                if a >= b {
                    return Err(bad());
                }
                seeds.extend(a..b);
            }
            None => seeds.push(part.parse().map_err(|_| bad())?),
        }
    }
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_syntax() {
        assert_eq!(parse_seeds("0..3,7").unwrap(), vec![0, 1, 2, 7]);
        assert_eq!(parse_seeds("5").unwrap(), vec![5]);
        assert!(parse_seeds("3..3").is_err());
        assert!(parse_seeds("x").is_err());
        assert!(parse_seeds("").is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let c = RunConfig {
            regressor: RegressorSpec::NoisyOracle { sigma: 0.1, noise_seed: 3 },
            ..Default::default()
        };
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), c);
        let partial: RunConfig = serde_json::from_str(r#"{"poly_stages": 2, "variant": "grid"}"#).unwrap();
        assert_eq!(partial.cascade.poly_stages, 2);
        assert_eq!(partial.cascade.variant, textpoly_core::AlignVariant::Grid);
    }

    #[test]
    fn validation_rejects_bad_configs() {
        RunConfig::default().validate().unwrap();
        let zero_m = RunConfig { cascade: CascadeConfig { poly_stages: 0, ..Default::default() }, ..Default::default() };
        assert!(matches!(zero_m.validate(), Err(CliError::Config(_))));
        let overlap = RunConfig { regressor: RegressorSpec::Lsq { train_seeds: vec![3] }, ..Default::default() };
        assert!(matches!(overlap.validate(), Err(CliError::Config(_))));
        let strides = RunConfig { strides: vec![16.0, 8.0], ..Default::default() };
        assert!(matches!(strides.validate(), Err(CliError::Config(_))));
    }
}
