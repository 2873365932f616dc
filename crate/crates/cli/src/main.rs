//! `ordscore`: drive the severity-scoring experiment pipeline from a JSON
//! config. Each verb runs the pipeline through one stage, reusing whatever
//! earlier stages already exist in the output directory; `run` goes all the
//! way to the report, and `compare` merges finished experiment directories
//! into joint significance grids.
//!
//! Exit codes: 0 success, 2 config or input error, 3 numeric or training
//! error, 4 resume conflict (output directory holds a different experiment).

use clap::{Args, Parser, Subcommand};
use ordscore::runner::{
    compare_reports, run_experiment, write_json_file, ExperimentConfig, Stage, StageOutcome,
};
use ordscore::{Error, Result};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "ordscore", version, about = "Ordinal severity scoring experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override the master seed from the config.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory (default: the config's out_dir, else
    /// $ORDSCORE_OUT/run-<fingerprint>, else ./ordscore-out/run-<fingerprint>).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the benchmark: datasets, rater panels, and the shifted test set.
    Generate(CommonOpts),
    /// Train all eight model variants (four heads, plain and MC dropout).
    Train(CommonOpts),
    /// Score every evaluation set with every trained model.
    Predict(CommonOpts),
    /// Compute metrics, bootstrap intervals, and the results table.
    Evaluate(CommonOpts),
    /// Run the full pipeline through the report.
    Run(CommonOpts),
    /// Merge significance grids from finished experiment directories.
    Compare {
        /// Experiment output directories (each holding report/report.json).
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[command(flatten)]
        opts: CommonOpts,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: &Command) -> Result<()> {
    match command {
        Command::Generate(opts) => pipeline(opts, Stage::Benchmark),
        Command::Train(opts) => pipeline(opts, Stage::Train),
        Command::Predict(opts) => pipeline(opts, Stage::Predict),
        Command::Evaluate(opts) => pipeline(opts, Stage::Evaluate),
        Command::Run(opts) => pipeline(opts, Stage::Report),
        Command::Compare { reports, opts } => compare(reports, opts),
    }
}

fn pipeline(opts: &CommonOpts, upto: Stage) -> Result<()> {
    let path = opts
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config is required for this command".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = opts.seed {
        cfg.master_seed = seed;
    }
    let products = run_experiment(&cfg, opts.out.as_deref(), upto)?;
    for status in &products.stages {
        let outcome = match status.outcome {
            StageOutcome::Computed => "computed",
            StageOutcome::Loaded => "reused",
        };
        println!("stage {:<9} {outcome}", status.stage.name());
    }
    println!("fingerprint {}", products.fingerprint);
    println!("output tree {}", products.out_dir.display());
    if products.report.is_some() {
        println!("report      {}", products.out_dir.join("report").join("report.json").display());
        println!("table       {}", products.out_dir.join("evaluate").join("table2.csv").display());
    }
    Ok(())
}

fn compare(reports: &[PathBuf], opts: &CommonOpts) -> Result<()> {
    let grids = compare_reports(reports)?;
    let out = opts.out.clone().unwrap_or_else(|| PathBuf::from("ordscore-compare"));
    std::fs::create_dir_all(&out)?;
    for grid in &grids {
        let path = out.join(format!("grid_{}.json", grid.metric));
        write_json_file(&path, grid)?;
        let significant: usize = grid
            .significant
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().take(i).filter(|&&s| s).count())
            .sum();
        println!(
            "{}: {significant} of {} pairs significant at alpha {}; wrote {}",
            grid.metric,
            grid.pair_count(),
            grid.alpha,
            path.display()
        );
    }
    Ok(())
}
