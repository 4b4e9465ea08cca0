//! `ivussim`: IVUS simulation pipeline driver.
//!
//! Exit codes: 0 success, 1 validation or runtime failure, 2 usage error.

mod commands;
mod config;
mod corpus;
mod manifest;
mod par;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "ivussim", version, about = "Simulate IVUS images with pseudo B-mode speckle and stacked GAN refinement")]
#[command(arg_required_else_help = true, propagate_version = true)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML run configuration; defaults to the file named by IVUSSIM_CONFIG.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for per-image work. Output does not depend on it.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: u64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load an annotated dataset (or synthesize one) into a polar corpus.
    Ingest(commands::data::IngestArgs),
    /// Rotate and radially shift every tissue mask into 36 variants.
    Augment(commands::data::AugmentArgs),
    /// Pseudo B-mode simulation from tissue maps.
    #[command(name = "simulate-stage0")]
    SimulateStage0(commands::data::SimulateArgs),
    /// Train the Stage I refiner against real images.
    #[command(name = "train-stage1")]
    TrainStage1(commands::train::Stage1Args),
    /// Train the Stage II super-resolution GAN on a frozen Stage I refiner.
    #[command(name = "train-stage2")]
    TrainStage2(commands::train::Stage2Args),
    /// Run the full pipeline on tissue maps and report per-image latency.
    Generate(commands::generate::GenerateArgs),
    /// Region-wise JS divergence tables between real and simulated corpora.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Export randomized real/simulated pairs for a visual Turing test.
    #[command(name = "vtt-export")]
    VttExport(commands::evaluate::VttExportArgs),
    /// Score visual Turing test responses against the answer key.
    #[command(name = "vtt-score")]
    VttScore(commands::evaluate::VttScoreArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Augment(_) => "augment",
            Command::SimulateStage0(_) => "simulate-stage0",
            Command::TrainStage1(_) => "train-stage1",
            Command::TrainStage2(_) => "train-stage2",
            Command::Generate(_) => "generate",
            Command::Evaluate(_) => "evaluate",
            Command::VttExport(_) => "vtt-export",
            Command::VttScore(_) => "vtt-score",
        }
    }
}

/// Effective settings shared by every subcommand.
pub struct Ctx {
    pub config: RunConfig,
    pub seed: u64,
    pub jobs: usize,
    pub manifest: RunManifest,
}

fn run(cli: Cli) -> Result<()> {
    let (mut config, config_file) = RunConfig::load(cli.global.config.as_deref())?;
    if let Some(seed) = cli.global.seed {
        config.seed = seed;
    }
    let command = cli.command;
    match &command {
        Command::SimulateStage0(a) => a.apply(&mut config),
        Command::TrainStage1(a) => a.apply(&mut config),
        Command::TrainStage2(a) => a.apply(&mut config),
        Command::Generate(a) => a.apply(&mut config),
        Command::Evaluate(a) => a.apply(&mut config),
        Command::VttExport(a) => a.apply(&mut config),
        _ => {}
    }
    config.validate()?;
    let jobs = cli.global.jobs as usize;
    let manifest = RunManifest::new(command.name(), config.seed, jobs, config_file, &config);
    let mut ctx = Ctx { seed: config.seed, config, jobs, manifest };
    match command {
        Command::Ingest(a) => commands::data::ingest(&mut ctx, a),
        Command::Augment(a) => commands::data::augment(&mut ctx, a),
        Command::SimulateStage0(a) => commands::data::simulate_stage0(&mut ctx, a),
        Command::TrainStage1(a) => commands::train::stage1(&mut ctx, a),
        Command::TrainStage2(a) => commands::train::stage2(&mut ctx, a),
        Command::Generate(a) => commands::generate::generate(&mut ctx, a),
        Command::Evaluate(a) => commands::evaluate::evaluate(&mut ctx, a),
        Command::VttExport(a) => commands::evaluate::vtt_export(&mut ctx, a),
        Command::VttScore(a) => commands::evaluate::vtt_score(&mut ctx, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).format_timestamp(None).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
