use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use textpoly_cli::{cmd_eval, cmd_plot, cmd_run, cmd_synth, parse_seeds, CliError, RegressorSpec, RunConfig};
use textpoly_core::AlignVariant;

#[derive(Parser)]
#[command(name = "textpoly", version, about = "Synthetic text-polygon detection experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Overrides applied on top of `--config` (or the defaults).
#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seeds: `7`, `1,2,3` or `0..10`.
    #[arg(long, global = true)]
    seeds: Option<String>,
    #[arg(long, global = true)]
    variant: Option<AlignVariant>,
    #[arg(long, global = true, overrides_with = "no_oea")]
    oea: bool,
    #[arg(long, global = true, overrides_with = "oea")]
    no_oea: bool,
    #[arg(long, global = true)]
    iou_thresh: Option<f64>,
    #[arg(long, global = true)]
    score_thresh: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// `oracle`, `noisy-oracle` or `lsq`.
    #[arg(long, global = true)]
    regressor: Option<String>,
    /// Noise level for `noisy-oracle`.
    #[arg(long, global = true)]
    sigma: Option<f64>,
    /// Training seeds for `lsq`.
    #[arg(long, global = true)]
    train_seeds: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate scenes and feature pyramids.
    Synth,
    /// Run the cascade on generated scenes.
    Run,
    /// Score detections.
    Eval,
    /// Draw stage overlays and the P/R curve as SVG.
    Plot {
        /// A single trace file instead of every configured seed.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// A single summary.json instead of the one in the output directory.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn build_config(c: &Common) -> Result<RunConfig, CliError> {
    let mut config: RunConfig = match &c.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = &c.seeds {
        config.seeds = parse_seeds(s)?;
    }
    if let Some(v) = c.variant {
        config.cascade.variant = v;
    }
    if c.oea {
        config.oea = true;
    }
    if c.no_oea {
        config.oea = false;
    }
    if let Some(t) = c.iou_thresh {
        config.eval.iou_thresh = t;
    }
    if let Some(t) = c.score_thresh {
        config.eval.score_thresh = t;
    }
    if let Some(o) = &c.out {
        config.out = o.clone();
    }
    if let Some(r) = &c.regressor {
        config.regressor = match r.as_str() {
            "oracle" => RegressorSpec::Oracle,
            "noisy-oracle" => RegressorSpec::NoisyOracle { sigma: c.sigma.unwrap_or(0.1), noise_seed: 0 },
            "lsq" => RegressorSpec::Lsq {
                train_seeds: parse_seeds(c.train_seeds.as_deref().unwrap_or("1000..1020"))?,
            },
            other => return Err(CliError::Config(format!("unknown regressor {other:?}"))),
        };
    } else if let (Some(s), RegressorSpec::NoisyOracle { sigma, .. }) = (c.sigma, &mut config.regressor) {
        *sigma = s;
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = build_config(&cli.common)?;
    match &cli.command {
        Command::Synth => {
            let paths = cmd_synth(&config)?;
            println!("wrote {} scenes to {}", paths.len(), config.out.display());
        }
        Command::Run => {
            let losses = cmd_run(&config)?;
            let mean = losses.iter().map(|l| l.total).sum::<f64>() / losses.len() as f64;
            println!("ran {} scenes, mean loss {mean:.6}", losses.len());
        }
        Command::Eval => {
            let s = cmd_eval(&config)?;
            println!("P={:.4} R={:.4} F={:.4} (tp={} fp={} fn={})", s.precision, s.recall, s.fscore, s.tp, s.fp, s.fn_);
        }
        Command::Plot { trace, report } => {
            let paths = cmd_plot(&config, trace.as_deref(), report.as_deref())?;
            println!("wrote {} plots", paths.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
