//! `netsig`: sample subgraphs from parent networks, embed them as
//! structured images, featurize, train, evaluate, run the label-transfer
//! pipeline, draw per-class principal components and run sweeps.

mod artifacts;
mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use netsig_core::learn::{Learner, Representation};

use config::RunConfig;
use error::{CliError, EXIT_CODES};

#[derive(Parser)]
#[command(name = "netsig", version, about = "Subgraph classification by parent network", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Random-walk samples per class -> dataset.txt, index.json
    Sample(Flags),
    /// Dataset -> one PGM image per sample
    Embed(Flags),
    /// Dataset -> classical feature CSV
    Featurize(Flags),
    /// Upstream inputs -> model.bin
    Train(Flags),
    /// Model + inputs -> test-third metrics.csv, confusion.csv
    Eval(Flags),
    /// Recognizer labels + k-NN -> transfer metrics
    Transfer(Flags),
    /// Top principal component image per class
    Pca(Flags),
    /// Whole experiments straight from the manifest (size, representation, k, fraction, hybrid)
    Sweep(Flags),
}

#[derive(Args, Clone, Debug)]
#[command(after_help = EXIT_CODES)]
struct Flags {
    /// JSON run config; flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default netsig-out)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dataset manifest (JSON)
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Subgraph size
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    samples_per_class: Option<usize>,
    /// Neighbors for k-NN transfer
    #[arg(long)]
    k: Option<usize>,
    /// Training fraction for transfer
    #[arg(long)]
    fraction: Option<f64>,
    /// image, random_image, classical or wl
    #[arg(long, value_parser = parse_representation)]
    representation: Option<Representation>,
    /// linear, mlp or cnn
    #[arg(long, value_parser = parse_learner)]
    learner: Option<Learner>,
    /// Comma-separated subset of manifest classes
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<String>>,
    /// Sweep selector
    #[arg(long)]
    experiment: Option<String>,
    /// Recognizer records (JSON Lines) instead of the built-in stub
    #[arg(long)]
    records: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
}

fn parse_representation(s: &str) -> Result<Representation, String> {
    s.parse().map_err(|e: netsig_core::Error| e.to_string())
}

fn parse_learner(s: &str) -> Result<Learner, String> {
    s.parse().map_err(|e: netsig_core::Error| e.to_string())
}

impl Flags {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! apply {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    c.$field = v.clone().into();
                }
            )*};
        }
        apply!(seed, n, samples_per_class, k, fraction, representation, learner, experiment, epochs, learning_rate);
        apply!(out, manifest, classes, records);
        if !(c.fraction > 0.0 && c.fraction < 1.0) {
            return Err(CliError::Config(format!("fraction {} must lie in (0, 1)", c.fraction)));
        }
        if c.scale == 0 {
            return Err(CliError::Config("scale must be >= 1".into()));
        }
        Ok(c)
    }
}

fn run(command: Command) -> Result<(), CliError> {
    let print = |r: &netsig_core::eval::ExperimentResult| {
        println!(
            "{}",
            serde_json::json!({ "experiment": r.experiment, "accuracy": r.accuracy, "seeds": r.seeds })
        );
    };
    match command {
        Command::Sample(f) => commands::sample(&f.resolve()?),
        Command::Embed(f) => commands::embed(&f.resolve()?),
        Command::Featurize(f) => commands::featurize(&f.resolve()?),
        Command::Train(f) => commands::train(&f.resolve()?),
        Command::Eval(f) => commands::eval(&f.resolve()?).map(|r| print(&r)),
        Command::Transfer(f) => commands::transfer(&f.resolve()?).map(|r| print(&r)),
        Command::Pca(f) => commands::pca(&f.resolve()?),
        Command::Sweep(f) => commands::sweep(&f.resolve()?).map(|rs| rs.iter().for_each(print)),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("NETSIG_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            let first = e.to_string().lines().next().unwrap_or_default().to_string();
            let err = CliError::Usage(first.trim_start_matches("error: ").to_string());
            eprintln!("{}", err.json_line());
            return ExitCode::from(err.code() as u8);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.json_line());
            ExitCode::from(err.code() as u8)
        }
    }
}
