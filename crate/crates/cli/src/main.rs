use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sdrnn::config::KeyValues;
use sdrnn::data::GenConfig;
use sdrnn::model::Arch;
use sdrnn::numerics::Activation;
use sdrnn::train::{default_grid, TrainConfig};
use sdrnn_cli::commands::{self, BenchmarkInputs, TrainInputs, BENCHMARK_SPLITS, GRADCHECK_TOLERANCE};

const EXIT_THRESHOLD: u8 = 3;

#[derive(Parser)]
#[command(name = "sdrnn", version, about = "Clinical endpoint prediction from static and sequential patient data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Seed for generation, splitting and initialization.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Flat `key = value` settings file; unknown keys are errors.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct Cohort {
    /// Cohort file (JSON lines).
    #[arg(long)]
    cohort: PathBuf,
    /// Vocabulary file (JSON).
    #[arg(long)]
    vocab: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort and its vocabulary.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Split, preprocess and train one model; writes a checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Cohort,
        #[arg(long, default_value = "gru")]
        arch: Arch,
        /// Encode labs as standardized values with mean imputation.
        #[arg(long)]
        degraded_preprocessing: bool,
        /// Search the default hyperparameter grid around the configuration.
        #[arg(long)]
        grid: bool,
    },
    /// Score a checkpoint on the test part of the split for `--seed`.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        cohort: PathBuf,
        /// Vocabulary the cohort was written with; must match the checkpoint.
        #[arg(long)]
        vocab: Option<PathBuf>,
    },
    /// Train every model on shared repeated splits and tabulate the scores.
    Benchmark {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Cohort,
        /// Comma-separated models.
        #[arg(long, value_delimiter = ',', default_values_t = [Arch::Gru, Arch::Lstm, Arch::Rnn, Arch::Tle, Arch::Logreg, Arch::Random])]
        arch: Vec<Arch>,
        #[arg(long, default_value_t = BENCHMARK_SPLITS)]
        splits: usize,
        #[arg(long)]
        degraded_preprocessing: bool,
        #[arg(long)]
        grid: bool,
    },
    /// Compare analytic gradients with central finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated models.
        #[arg(long, value_delimiter = ',', default_values_t = [Arch::Rnn, Arch::Lstm, Arch::Gru, Arch::Tle, Arch::Logreg, Arch::Static])]
        arch: Vec<Arch>,
        /// Activation of the plain RNN cell.
        #[arg(long, default_value = "tanh")]
        activation: Activation,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Per-visit probabilities for every patient in a cohort.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        cohort: PathBuf,
    },
}

fn train_config(path: Option<&Path>) -> sdrnn::Result<TrainConfig> {
    let mut cfg = TrainConfig::default();
    if let Some(path) = path {
        let mut kv = KeyValues::read(path)?;
        cfg.apply(&mut kv)?;
        kv.finish()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> sdrnn::Result<ExitCode> {
    match cli.command {
        Command::Synth { common } => {
            let mut cfg = GenConfig::default();
            if let Some(path) = &common.config {
                let mut kv = KeyValues::read(path)?;
                cfg.apply(&mut kv)?;
                kv.finish()?;
            }
            cfg.validate()?;
            let summary = commands::synth(&cfg, common.seed, &common.out)?;
            print!("{}", commands::summary_text(&summary));
        }
        Command::Train { common, data, arch, degraded_preprocessing, grid } => {
            let config = train_config(common.config.as_deref())?;
            let grid = grid.then(|| default_grid(&config));
            let inputs = TrainInputs {
                cohort: &data.cohort,
                vocab: &data.vocab,
                arch,
                config,
                grid,
                seed: common.seed,
                degraded: degraded_preprocessing,
            };
            let checkpoint = commands::train(&inputs, &common.out)?;
            println!("trained {} ({})", arch, checkpoint.config.label());
        }
        Command::Evaluate { common, checkpoint, cohort, vocab } => {
            commands::evaluate_checkpoint(&checkpoint, &cohort, vocab.as_deref(), common.seed, &common.out)?;
            print!("{}", std::fs::read_to_string(common.out.join("report.tsv"))?);
        }
        Command::Benchmark { common, data, arch, splits, degraded_preprocessing, grid } => {
            let config = train_config(common.config.as_deref())?;
            let grid = grid.then(|| default_grid(&config));
            let inputs = BenchmarkInputs {
                cohort: &data.cohort,
                vocab: &data.vocab,
                archs: arch,
                config,
                grid,
                splits,
                seed: common.seed,
                degraded: degraded_preprocessing,
            };
            let outcome = commands::benchmark(&inputs, &common.out)?;
            print!("{}", commands::comparison_table(&outcome.reports));
        }
        Command::Gradcheck { seed, arch, activation, inject_fault } => {
            let results = arch
                .iter()
                .map(|&a| Ok((a, commands::gradcheck(a, activation, seed, inject_fault)?)))
                .collect::<sdrnn::Result<Vec<_>>>()?;
            print!("{}", commands::gradcheck_text(&results));
            if let Some((a, r)) = results.iter().find(|(_, r)| !r.passes(GRADCHECK_TOLERANCE)) {
                eprintln!("gradient check failed for {a}: max relative error {:.3e}", r.max_rel_error);
                return Ok(ExitCode::from(EXIT_THRESHOLD));
            }
        }
        Command::Predict { common, checkpoint, cohort } => {
            let rows = commands::predict(&checkpoint, &cohort, &common.out)?;
            println!("wrote {rows} rows to {}", common.out.join("predictions.tsv").display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
