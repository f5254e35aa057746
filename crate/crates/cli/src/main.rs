//! `segpipe`: one subcommand per pipeline phase.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data or format
//! error, 3 training diverged.

mod commands;
mod config;
mod data;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::parser::ValueSource;
use clap::{ArgMatches, CommandFactory, FromArgMatches, Parser, Subcommand};

use crate::commands::*;
use crate::config::{load_config, PipelineConfig};
use crate::error::{CliError, CliResult, EXIT_OK, EXIT_USAGE};

#[derive(Parser, Debug)]
#[command(name = "segpipe", version, about = "K-means pseudo-labelling, CNN training and IOU evaluation for street-scene segmentation")]
struct Cli {
    /// JSON settings file; command-line flags override its values
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Print the resolved settings as JSON and exit
    #[arg(long, global = true)]
    print_config: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic street scenes with exact label maps
    Gen(GenArgs),
    /// Fit K-means to the colors of one or more images
    Cluster(ClusterArgs),
    /// Label every image in a directory with a shared K-means model
    Labelgen(LabelgenArgs),
    /// Paint a label map with centroid or palette colors
    Recolor(RecolorArgs),
    /// Write flipped and rotated copies of labelled samples
    Augment(AugmentArgs),
    /// Split labelled samples into training and validation sets
    Split(SplitArgs),
    /// Train the segmentation network and save a checkpoint
    Train(TrainArgs),
    /// Per-class IOU and mean IOU of predictions against ground truth
    Eval(EvalArgs),
    /// Measure batch-size-1 inference throughput
    Bench(BenchArgs),
    /// Predict label maps for images
    Infer(InferArgs),
}

/// True when the user typed the flag, as opposed to clap filling its default.
pub fn given(m: &ArgMatches, id: &str) -> bool {
    matches!(m.value_source(id), Some(ValueSource::CommandLine | ValueSource::EnvVariable))
}

fn run(argv: Vec<String>) -> CliResult<()> {
    let matches = Cli::command().try_get_matches_from(argv).map_err(|e| {
        match e.kind() {
            clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                let _ = e.print();
                std::process::exit(EXIT_OK);
            }
            _ => CliError::Usage(e.render().to_string()),
        }
    })?;
    let cli = Cli::from_arg_matches(&matches).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => PipelineConfig::default(),
    };
    let sub = matches.subcommand().map(|(_, m)| m);
    if let (Some(cmd), Some(m)) = (&cli.command, sub) {
        apply_flags(cmd, m, &mut cfg);
    }
    if cli.print_config {
        println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
        return Ok(());
    }
    let Some(cmd) = cli.command else {
        return Err(CliError::Usage(format!(
            "a subcommand is required\n\n{}",
            Cli::command().render_usage()
        )));
    };
    match cmd {
        Command::Gen(a) => gen(&a, &cfg),
        Command::Cluster(a) => cluster(&a, &cfg),
        Command::Labelgen(a) => labelgen(&a, &cfg),
        Command::Recolor(a) => recolor(&a, &cfg),
        Command::Augment(a) => augment(&a, &cfg),
        Command::Split(a) => split(&a, &cfg),
        Command::Train(a) => train(&a, &cfg),
        Command::Eval(a) => eval(&a, &cfg),
        Command::Bench(a) => bench(&a, &cfg),
        Command::Infer(a) => infer(&a, &cfg),
    }
}

fn apply_flags(cmd: &Command, m: &ArgMatches, cfg: &mut PipelineConfig) {
    match cmd {
        Command::Gen(a) => a.apply(m, cfg),
        Command::Cluster(a) => a.apply(m, cfg),
        Command::Labelgen(a) => a.apply(m, cfg),
        Command::Recolor(a) => a.apply(m, cfg),
        Command::Augment(a) => a.apply(m, cfg),
        Command::Split(a) => a.apply(m, cfg),
        Command::Train(a) => a.apply(m, cfg),
        Command::Eval(a) => a.apply(m, cfg),
        Command::Bench(a) => a.apply(m, cfg),
        Command::Infer(a) => a.apply(m, cfg),
    }
}

fn main() -> ExitCode {
    match run(std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Usage(msg) => eprint!("{}", msg.trim_end().to_string() + "\n"),
                other => eprintln!("error: {other}"),
            }
            let code = e.exit_code();
            debug_assert!(code != EXIT_OK);
            ExitCode::from(code.clamp(EXIT_USAGE, 255) as u8)
        }
    }
}
