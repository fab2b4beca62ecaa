//! `washtrade`: batch pipeline turning marketplace event exports into wash
//! trading findings, trader groups, and analysis artifacts.
//!
//! Stages run as subcommands sharing one artifact directory; each writes a
//! manifest with input digests and the effective settings, so identical
//! inputs reproduce identical outputs byte for byte.

mod config;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use washtrade_core::error::DataError;

use config::{load_file_config, resolve, FileConfig, GlobalOpts};

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, bad config, bad data, or stages run out of order.
    Validation(String),
    /// The environment failed us: unreadable or unwritable files.
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(msg) | CliError::Io(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> CliError {
        match e {
            DataError::Io { .. } | DataError::Csv { .. } => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Validation(_) => ExitCode::from(1),
            CliError::Io(_) => ExitCode::from(2),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "washtrade",
    version,
    about = "Detect NFT wash trading in marketplace event data"
)]
struct Cli {
    #[command(flatten)]
    opts: GlobalOpts,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean raw events: dedupe, repair timestamps, collapse marketplace
    /// hops.
    Preprocess,
    /// Window each token's history and run all three detectors.
    Detect,
    /// Mine frequent co-flagged address sets into pairs and groups.
    Mine,
    /// Aggregate findings into the analysis report and plot CSVs.
    Analyze,
    /// Generate a labeled synthetic corpus from a scenario spec.
    Synth {
        /// Scenario spec JSON.
        #[arg(long, value_name = "FILE")]
        spec: PathBuf,
    },
    /// Write DOT graphs for flagged round-trip windows.
    ExportGraph {
        /// Only this collection.
        #[arg(long, value_name = "SLUG")]
        collection: Option<String>,
        /// Only this token.
        #[arg(long, value_name = "ID")]
        token_id: Option<String>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file_config = match &cli.opts.config {
        Some(path) => load_file_config(path)?,
        None => FileConfig::default(),
    };
    let cfg = resolve(&cli.opts, file_config)?;

    if let Some(jobs) = cfg.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    }

    match &cli.command {
        Command::Preprocess => stages::preprocess(&cfg),
        Command::Detect => stages::detect(&cfg),
        Command::Mine => stages::mine(&cfg),
        Command::Analyze => stages::analyze(&cfg),
        Command::Synth { spec } => stages::synth(&cfg, spec),
        Command::ExportGraph {
            collection,
            token_id,
        } => stages::export_graph(&cfg, collection.as_deref(), token_id.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are successful exits; everything else is a
            // validation failure.
            let code = if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
            let _ = e.print();
            return code;
        }
    };

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
