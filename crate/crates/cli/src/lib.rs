//! `defchars` command-line front end.
//!
//! The binary is a thin wrapper around [`run`], which takes its arguments and
//! output streams explicitly so commands can be driven from tests.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod manifest;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INTERNAL,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<defchars::Error> for CliError {
    fn from(e: defchars::Error) -> Self {
        use defchars::Error as E;
        let code = match &e {
            E::MalformedImage(_)
            | E::EmptyMask
            | E::EmptyRegion
            | E::DimensionMismatch { .. }
            | E::TooSmall { .. }
            | E::ZeroLengthEdge(_)
            | E::DegenerateBox
            | E::FormatVersionMismatch(_)
            | E::ChecksumMismatch { .. }
            | E::MalformedStore(_)
            | E::Io { .. } => EXIT_INPUT,
            E::KindMismatch { .. }
            | E::UnknownMetric(_)
            | E::UnknownFeature(_)
            | E::InvalidArgument(_)
            | E::MixedKinds => EXIT_CONFIG,
            _ => EXIT_INTERNAL,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::internal(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "defchars", version, about = "Index, query and evaluate mask-annotated image patterns")]
pub struct Cli {
    /// JSON file with default values for any flag; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract features for every pattern in a manifest and save a store.
    Index(IndexArgs),
    /// Rank the entries of a store against one annotated pattern.
    Query(QueryArgs),
    /// Run the leave-one-out benchmark over a feature x metric x size grid.
    Evaluate(EvaluateArgs),
    /// Print the raw and normalized DefChars of one annotated pattern.
    Extract(ExtractArgs),
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// defchars, raw or lbp.
    #[arg(long)]
    pub feature: Option<String>,
    /// Resize side for raw and lbp.
    #[arg(long)]
    pub size: Option<String>,
    /// Output store directory.
    #[arg(long)]
    pub store: Option<PathBuf>,
}

/// A single pattern given on the command line.
#[derive(Debug, Args)]
pub struct PatternArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Binary mask PNG of the pattern.
    #[arg(long, conflicts_with = "polygon", required_unless_present = "polygon")]
    pub mask: Option<PathBuf>,
    /// Polygon JSON: `[[x, y], ...]` or `{"rings": [...]}`.
    #[arg(long)]
    pub polygon: Option<PathBuf>,
    /// Masks of other patterns in the same image, for the neighbour feature.
    #[arg(long = "sibling-mask")]
    pub sibling_masks: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[command(flatten)]
    pub pattern: PatternArgs,
    #[arg(long)]
    pub metric: Option<String>,
    /// Number of results.
    #[arg(long)]
    pub k: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Comma-separated features; all three by default.
    #[arg(long)]
    pub feature: Option<String>,
    /// Comma-separated metrics; every compatible metric by default.
    #[arg(long)]
    pub metric: Option<String>,
    /// Comma-separated resize sides; 8,20,50,100 by default.
    #[arg(long)]
    pub size: Option<String>,
    /// Comma-separated K values.
    #[arg(long)]
    pub k: Option<String>,
    /// Report directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub pattern: PatternArgs,
}

/// Parse `args` (including the program name) and run the command. Returns
/// the process exit code.
pub fn run<I, T>(args: I, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_CONFIG
                }
            };
        }
    };
    match execute(cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.code
        }
    }
}

fn execute(cli: Cli, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> CliResult<()> {
    let file = match &cli.config {
        Some(path) => config::FileConfig::load(path)?,
        None => config::FileConfig::default(),
    };
    let threads = cli.threads.or(file.threads);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::config("--threads must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::internal(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Index(a) => commands::index(&config::IndexConfig::resolve(a, &file)?, out, err),
        Command::Query(a) => commands::query(&config::QueryConfig::resolve(a, &file)?, &a.pattern, out),
        Command::Evaluate(a) => commands::evaluate(&config::EvaluateConfig::resolve(a, &file)?, out, err),
        Command::Extract(a) => commands::extract(&a.pattern, out),
    })
}
