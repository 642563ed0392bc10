use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use swp_core::pipeline::{run_pipeline, run_stage, RunConfig, Stage};
use swp_core::synthetic::{write_orchard, SceneConfig};
use swp_core::Error;

/// Walnut stem water potential mapping from UAV rasters.
#[derive(Parser)]
#[command(name = "swpmap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Canopy masks from DSM and NExG thresholds.
    Segment(RunArgs),
    /// Masked thermal and vegetation index rasters.
    Indices(RunArgs),
    /// Per-cell medians of the index rasters.
    Extract(RunArgs),
    /// Join cell medians, trees, weather and SWP into dataset.csv.
    Dataset(RunArgs),
    /// Fit the final forest and its importance ranking.
    Train(RunArgs),
    /// Repeated split evaluation plus cross-validation.
    Eval(RunArgs),
    /// Partial dependence curves of the final forest.
    Pdp(RunArgs),
    /// Per-cell predictions over the whole orchard.
    PredictMap(RunArgs),
    /// Every stage in order.
    Run(RunArgs),
    /// Write a synthetic orchard campaign and its run config.
    Synth(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// full | norededge | single-date:<YYYY-MM-DD> | features:<a,b,..>
    #[arg(long)]
    variant: Option<String>,
    /// regression | classification
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trees per forest.
    #[arg(long)]
    trees: Option<usize>,
    /// Split-train-test repetitions.
    #[arg(long)]
    reps: Option<usize>,
    /// Extraction cell size in pixels.
    #[arg(long)]
    cell_px: Option<usize>,
}

impl RunArgs {
    fn overrides(&self) -> Vec<(String, String)> {
        let mut o = Vec::new();
        let mut set = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                o.push((k.to_string(), v));
            }
        };
        set("seed", self.seed.map(|v| v.to_string()));
        set("variant", self.variant.clone());
        set("task", self.task.clone());
        set("out", self.out.as_ref().map(|p| p.display().to_string()));
        set("trees", self.trees.map(|v| v.to_string()));
        set("reps", self.reps.map(|v| v.to_string()));
        set("cell_px", self.cell_px.map(|v| v.to_string()));
        o
    }

    fn load(&self) -> Result<RunConfig, Error> {
        RunConfig::load(self.config.as_deref(), &self.overrides())
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Reflectance noise standard deviation.
    #[arg(long)]
    noise: Option<f64>,
    /// Fraction of each crown in shadow.
    #[arg(long)]
    shadow_fraction: Option<f64>,
    /// SWP measurement noise in bars.
    #[arg(long)]
    swp_noise: Option<f64>,
}

fn run(cli: Cli) -> Result<(), Error> {
    let stage = |s: Stage, args: &RunArgs| run_stage(s, &args.load()?);
    match &cli.command {
        Command::Segment(a) => stage(Stage::Segment, a),
        Command::Indices(a) => stage(Stage::Indices, a),
        Command::Extract(a) => stage(Stage::Extract, a),
        Command::Dataset(a) => stage(Stage::Dataset, a),
        Command::Train(a) => stage(Stage::Train, a),
        Command::Eval(a) => stage(Stage::Eval, a),
        Command::Pdp(a) => stage(Stage::Pdp, a),
        Command::PredictMap(a) => stage(Stage::PredictMap, a),
        Command::Run(a) => run_pipeline(&a.load()?),
        Command::Synth(a) => {
            let mut config = SceneConfig {
                seed: a.seed,
                ..SceneConfig::default()
            };
            if let Some(n) = a.noise {
                config.noise_std = n;
            }
            if let Some(f) = a.shadow_fraction {
                config.shadow_fraction = f;
            }
            if let Some(s) = a.swp_noise {
                config.swp_noise_std = s;
            }
            write_orchard(&config, &a.out).map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = e.to_string().replace('\n', " ");
            eprintln!("error: {}: {line}", e.code());
            ExitCode::FAILURE
        }
    }
}
