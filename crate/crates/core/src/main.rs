use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use flowfill::metrics::MetricScope;
use flowfill::pipeline::{
    cmd_complete_flow, cmd_evaluate, cmd_inpaint, cmd_synth_masks, Overrides, PipelineConfig, SynthShape,
};
use flowfill::Error;

#[derive(Parser)]
#[command(name = "flowfill", version, about = "Flow-guided video inpainting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Complete the flows inside the holes and write them as .flo files.
    CompleteFlow(Common),
    /// Fill the holes of every frame.
    Inpaint(Common),
    /// Generate hole masks for a sequence.
    SynthMasks {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        height: Option<usize>,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        frames: Option<u64>,
    },
    /// Score predicted frames against reference frames.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Directory holding the predicted frame_*.png.
        #[arg(long)]
        pred: PathBuf,
        /// Directory holding the reference frame_*.png.
        #[arg(long)]
        gt: PathBuf,
        /// Directory holding mask_*.png, needed for hole scope.
        #[arg(long)]
        masks: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    Full,
    Hole,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// JSON pipeline config; flags below take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    metric_scope: Option<ScopeArg>,
    /// Fill-loop iteration cap.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Forward-backward consistency threshold in pixels.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    hard_percent: Option<f64>,
    #[arg(long)]
    hard_weight: Option<f64>,
}

impl Common {
    fn config(self) -> flowfill::Result<PipelineConfig> {
        let base = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        Overrides {
            manifest: self.manifest,
            out: self.out,
            seed: self.seed,
            metric_scope: self.metric_scope.map(|s| match s {
                ScopeArg::Full => MetricScope::Full,
                ScopeArg::Hole => MetricScope::Hole,
            }),
            max_iters: self.max_iters,
            epsilon: self.epsilon,
            hard_percent: self.hard_percent,
            hard_weight: self.hard_weight,
        }
        .apply(base)
    }
}

fn run(cli: Cli) -> flowfill::Result<serde_json::Value> {
    match cli.command {
        Command::CompleteFlow(c) => {
            let metrics = cmd_complete_flow(&c.config()?)?;
            Ok(json!({ "status": "ok", "metrics": metrics }))
        }
        Command::Inpaint(c) => {
            let run = cmd_inpaint(&c.config()?)?;
            Ok(json!({
                "status": "ok",
                "frames": run.frames.len(),
                "fill_iterations": run.stats.fill.iterations,
            }))
        }
        Command::SynthMasks {
            common,
            width,
            height,
            frames,
        } => {
            let cfg = common.config()?;
            let shape = match (width, height, frames) {
                (Some(width), Some(height), Some(frames)) => Some(SynthShape {
                    width,
                    height,
                    frames: frames as usize,
                }),
                (None, None, None) => None,
                _ => return Err(Error::Config("--width, --height and --frames go together".into())),
            };
            let m = cmd_synth_masks(&cfg, shape)?;
            Ok(json!({ "status": "ok", "masks": m.mask_paths.len() }))
        }
        Command::Evaluate {
            common,
            pred,
            gt,
            masks,
        } => {
            let report = cmd_evaluate(&pred, &gt, masks.as_deref(), &common.config()?)?;
            Ok(serde_json::to_value(report)?)
        }
    }
}

fn error_line(e: &Error) -> serde_json::Value {
    let mut line = json!({ "error": e.kind(), "message": e.to_string() });
    match e {
        Error::File { path, .. } | Error::Io { path, .. } => {
            line["path"] = json!(path);
        }
        Error::FillExhausted {
            iterations, remaining, ..
        } => {
            line["iterations"] = json!(iterations);
            line["remaining"] = json!(remaining);
        }
        _ => {}
    }
    line
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": "usage", "message": e.to_string().trim_end() }));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::from(1)
        }
    }
}
