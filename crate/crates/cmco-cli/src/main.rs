//! `cmco` command line: gen, train, calibrate, evaluate, report.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 numeric
//! failure, 4 artifact/config provenance mismatch.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cmco::error::CmcoError;
use cmco_cli::config::PipelineConfig;
use cmco_cli::stages;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    Antiderivative,
    Heat1d,
    ProxyField,
}

#[derive(Debug, Parser)]
#[command(
    name = "cmco",
    about = "Sequence-to-field operator surrogate with conformal MC-dropout intervals"
)]
struct Cli {
    /// Pipeline configuration JSON; defaults come from --preset when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Built-in task preset used when no --config is given.
    #[arg(long, global = true, value_enum, default_value = "antiderivative")]
    preset: Preset,

    /// Override the pipeline seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the miscoverage level alpha.
    #[arg(long, global = true)]
    alpha: Option<f64>,

    /// Override the Gaussian multiplier z.
    #[arg(long, global = true)]
    z: Option<f64>,

    /// Override the number of MC-dropout passes.
    #[arg(long, global = true)]
    passes: Option<usize>,

    /// Override the dataset directory.
    #[arg(long, global = true)]
    data: Option<PathBuf>,

    /// Override the checkpoint directory.
    #[arg(long, global = true)]
    ckpt: Option<PathBuf>,

    /// Override the current stage's output location.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic dataset and write train/calibration/test splits.
    Gen,
    /// Train the operator on the train split and write a checkpoint.
    Train,
    /// Compute conformal quantiles on the calibration split.
    Calibrate,
    /// Evaluate intervals on the test split; write reports and summary.
    Evaluate,
    /// Emit plot-ready histogram, scatter, and field-dump CSVs.
    Report,
}

fn build_config(cli: &Cli) -> Result<PipelineConfig, CmcoError> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => match cli.preset {
            Preset::Antiderivative => PipelineConfig::default(),
            Preset::Heat1d => PipelineConfig::heat1d_preset(),
            Preset::ProxyField => PipelineConfig::proxy_preset(),
        },
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(alpha) = cli.alpha {
        cfg.uq.alpha = alpha;
    }
    if let Some(z) = cli.z {
        cfg.uq.z = z;
    }
    if let Some(passes) = cli.passes {
        cfg.uq.passes = passes;
    }
    if let Some(data) = &cli.data {
        cfg.paths.data_dir = data.clone();
    }
    if let Some(ckpt) = &cli.ckpt {
        cfg.paths.checkpoint = ckpt.clone();
    }
    if let Some(out) = &cli.out {
        match cli.command {
            Command::Gen => cfg.paths.data_dir = out.clone(),
            Command::Train => cfg.paths.checkpoint = out.clone(),
            Command::Calibrate => cfg.paths.calibration = out.clone(),
            Command::Evaluate | Command::Report => cfg.paths.report_dir = out.clone(),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn exit_code_for(err: &CmcoError) -> u8 {
    match err {
        CmcoError::NumericFailure(_) | CmcoError::GradCheckFailure(_) => 3,
        CmcoError::ProvenanceMismatch(_) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = || -> Result<(), CmcoError> {
        // Validate the thread setting up front so a bad value fails fast.
        cmco_cli::threads::thread_count()?;
        let cfg = build_config(&cli)?;
        match cli.command {
            Command::Gen => stages::cmd_gen(&cfg),
            Command::Train => stages::cmd_train(&cfg),
            Command::Calibrate => stages::cmd_calibrate(&cfg),
            Command::Evaluate => stages::cmd_evaluate(&cfg),
            Command::Report => stages::cmd_report(&cfg),
        }
    };
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
