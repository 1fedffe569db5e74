//! Command-line front end: `analyze`, `semigroup`, `simulate` and `verify`.
//!
//! Exit codes: 0 success / embeddable, 1 input or runtime error, 2 not
//! embeddable, 3 singular (not embeddable), 4 failed verification checks.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub mod analyze;
pub mod semigroup;
pub mod simulate;
pub mod spec;
pub mod verify;

pub use spec::{Model, ModelSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NOT_EMBEDDABLE: i32 = 2;
pub const EXIT_SINGULAR: i32 = 3;
pub const EXIT_VERIFY_FAILED: i32 = 4;

pub const TOOL_NAME: &str = "coupon-embed";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable capping the worker threads used for trials and large transforms.
pub const THREADS_ENV: &str = "COUPON_EMBED_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    pub fn with_code(code: i32, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }
}

impl From<coupon_embed::Error> for CliError {
    fn from(e: coupon_embed::Error) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::input(format!("i/o error: {e}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = TOOL_NAME, version, about = "Embeddability analysis and simulation of multiple coupon collection processes")]
pub struct Cli {
    /// Suppress the report; only the exit code is meaningful.
    #[arg(long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide whether M_p is embeddable and report its logarithm.
    Analyze(AnalyzeArgs),
    /// Tabulate p(t) = Exp(t r) over a set of times.
    Semigroup(SemigroupArgs),
    /// Monte Carlo estimates compared with the exact laws.
    Simulate(SimulateArgs),
    /// Run the cross-checks between independent computation routes.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// JSON model specification.
    pub spec: PathBuf,
    /// Rates below −tolerance count as negative.
    #[arg(long, default_value_t = coupon_embed::embedding::DEFAULT_VERDICT_TOL)]
    pub tolerance: f64,
    /// p_∅ at or below this value counts as singular.
    #[arg(long, default_value_t = coupon_embed::embedding::DEFAULT_SINGULAR_TOL)]
    pub singular_tolerance: f64,
    /// Include correlation functions C_K for |K| up to this size (max 10).
    #[arg(long, num_args = 0..=1, default_missing_value = "4")]
    pub correlations: Option<usize>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub output: OutputFormat,
}

#[derive(Debug, Args)]
pub struct SemigroupArgs {
    pub spec: PathBuf,
    /// A single time (repeatable).
    #[arg(long = "time")]
    pub times: Vec<f64>,
    /// Evenly spaced grid `t0..t1:steps` (steps intervals, steps + 1 points).
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, default_value_t = coupon_embed::embedding::DEFAULT_VERDICT_TOL)]
    pub tolerance: f64,
    #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
    pub output: TableFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimMode {
    Discrete,
    Continuous,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub spec: PathBuf,
    #[arg(long, value_enum, default_value_t = SimMode::Discrete)]
    pub mode: SimMode,
    /// Steps of the discrete chain.
    #[arg(long, default_value_t = 1)]
    pub steps: usize,
    /// Time horizon of the continuous chain.
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = coupon_embed::embedding::DEFAULT_VERDICT_TOL)]
    pub tolerance: f64,
    /// Also estimate the collection time min{n : X_n = S} (discrete mode).
    #[arg(long)]
    pub collection_time: bool,
    /// Write one sample trajectory as CSV.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub output: OutputFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Level {
    Quick,
    Full,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// JSON model specification (omit when using --random).
    #[arg(required_unless_present = "random", conflicts_with = "random")]
    pub spec: Option<PathBuf>,
    /// Random instances: N COUNT SEED.
    #[arg(long, num_args = 3, value_names = ["N", "COUNT", "SEED"])]
    pub random: Option<Vec<u64>>,
    #[arg(long, value_enum, default_value_t = Level::Quick)]
    pub level: Level,
    /// Corrupt the generator matrix before checking it (harness self-test).
    #[arg(long)]
    pub inject_fault: bool,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub output: OutputFormat,
}

/// Tool identification embedded in every JSON document.
#[derive(Debug, Clone, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
}

pub fn tool_info() -> ToolInfo {
    ToolInfo {
        name: TOOL_NAME,
        version: TOOL_VERSION,
    }
}

/// A subset written both ways: its mask and its 1-based elements.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetRef {
    pub mask: u32,
    pub elements: Vec<usize>,
}

impl From<coupon_embed::Subset> for SubsetRef {
    fn from(s: coupon_embed::Subset) -> Self {
        SubsetRef {
            mask: s.mask(),
            elements: s.elements(),
        }
    }
}

/// One value per subset, listed by cardinality then mask.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetValue {
    pub mask: u32,
    pub elements: Vec<usize>,
    pub value: f64,
}

pub fn by_cardinality(v: &coupon_embed::SubsetVector) -> Vec<SubsetValue> {
    coupon_embed::lattice::subsets_by_cardinality(v.n())
        .into_iter()
        .map(|k| SubsetValue {
            mask: k.mask(),
            elements: k.elements(),
            value: v[k],
        })
        .collect()
}

pub(crate) fn json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

/// Caps the global rayon pool when `COUPON_EMBED_THREADS` is set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::input(format!("{THREADS_ENV} must be a positive integer, got {value:?}")))?;
    // A second initialisation in the same process is harmless.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

/// Result of a command: the exit code and what to print on stdout.
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
}

pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Analyze(args) => analyze::run(args),
        Command::Semigroup(args) => semigroup::run(args),
        Command::Simulate(args) => simulate::run(args),
        Command::Verify(args) => verify::run(args),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {}", e.message);
        return e.code;
    }
    match execute(&cli) {
        Ok(outcome) => {
            if !cli.quiet {
                let mut out = std::io::stdout().lock();
                let _ = out.write_all(outcome.stdout.as_bytes());
                let _ = out.flush();
            }
            outcome.code
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
