//! The `rescap` command line.
//!
//! Every command except `replay` writes a run manifest next to its primary
//! output. The manifest holds the full parameter set, so `rescap replay`
//! can rerun the command and check that the outputs come out byte for byte
//! the same.

mod commands;
mod manifest;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learner::LearnerError;
use crate::line_model::{LineError, PRESET_NAMES};
use crate::oracle::OracleError;
use crate::phm::PhmError;

pub use manifest::{sha256_file, FileHash, RunManifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_SCHEMA: i32 = 4;
pub const EXIT_BUDGET: i32 = 5;
pub const EXIT_NOT_ENOUGH_DATA: i32 = 6;
pub const EXIT_SOLVER: i32 = 7;
pub const EXIT_REPLAY_MISMATCH: i32 = 8;

const EXIT_CODES_HELP: &str = "\
Exit codes:
  0  success (oracle query: feasible)
  1  oracle query: infeasible
  2  usage error or invalid parameter combination
  3  file I/O error
  4  invalid input: schema violation, dimension mismatch or unusable line
  5  oracle budget exhausted or too small
  6  not enough usable observations to fit a forecast
  7  LP solver failure
  8  replay produced different outputs or inputs changed

Environment:
  RESCAP_THREADS  worker threads when --threads is not given (default 1)";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Schema(String),
    #[error("{0}")]
    Budget(String),
    #[error("{0}")]
    NotEnoughData(String),
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    ReplayMismatch(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io { .. } => EXIT_IO,
            CliError::Schema(_) => EXIT_SCHEMA,
            CliError::Budget(_) => EXIT_BUDGET,
            CliError::NotEnoughData(_) => EXIT_NOT_ENOUGH_DATA,
            CliError::Solver(_) => EXIT_SOLVER,
            CliError::ReplayMismatch(_) => EXIT_REPLAY_MISMATCH,
        }
    }
}

impl From<LineError> for CliError {
    fn from(e: LineError) -> Self {
        CliError::Schema(e.to_string())
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::BudgetExhausted(_) => CliError::Budget(e.to_string()),
            OracleError::Lp(_) => CliError::Solver(e.to_string()),
            OracleError::Line(e) => e.into(),
            OracleError::OriginInfeasible => CliError::Schema(e.to_string()),
        }
    }
}

impl From<LearnerError> for CliError {
    fn from(e: LearnerError) -> Self {
        match e {
            LearnerError::Oracle(e) => e.into(),
            LearnerError::SingleClass { .. } | LearnerError::BudgetTooSmall { .. } => {
                CliError::Budget(e.to_string())
            }
            LearnerError::TestSetRejection { .. } | LearnerError::Invalid(_) => {
                CliError::Usage(e.to_string())
            }
            LearnerError::DimensionMismatch { .. }
            | LearnerError::MonotonicityConflict { .. }
            | LearnerError::Parse(_)
            | LearnerError::Csv(_) => CliError::Schema(e.to_string()),
        }
    }
}

impl From<PhmError> for CliError {
    fn from(e: PhmError) -> Self {
        match e {
            PhmError::NotEnoughData { .. } | PhmError::SingularDesign { .. } => {
                CliError::NotEnoughData(e.to_string())
            }
            PhmError::Invalid(_) | PhmError::Parse(_) => CliError::Schema(e.to_string()),
            PhmError::Learner(e) => e.into(),
            PhmError::Oracle(e) => e.into(),
        }
    }
}

#[derive(Debug, Clone, Parser)]
#[command(
    name = "rescap",
    version,
    about = "Learn the resilience capacity of a production line and forecast remaining useful life",
    after_help = EXIT_CODES_HELP
)]
pub struct Cli {
    /// Worker threads; outputs do not depend on this.
    #[arg(long, global = true, env = "RESCAP_THREADS", default_value_t = 1)]
    pub threads: usize,
    /// Manifest path (default: `<primary output>.manifest.json`).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Line configurations.
    #[command(subcommand)]
    Line(LineCmd),
    /// Exact feasibility queries.
    #[command(subcommand)]
    Oracle(OracleCmd),
    /// Learn, evaluate and measure capacity models.
    #[command(subcommand)]
    Capacity(CapacityCmd),
    /// Remaining-useful-life runs.
    #[command(subcommand)]
    Phm(PhmCmd),
    /// Accuracy against oracle budget for both learning methods.
    Sweep(SweepArgs),
    /// Rerun a command from its manifest and compare the outputs.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineCmd {
    /// Write a preset or a validated custom line as JSON.
    Generate(LineGenerateArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[command(group(ArgGroup::new("source").required(true).args(["preset", "from"])))]
pub struct LineGenerateArgs {
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PRESET_NAMES))]
    pub preset: Option<String>,
    /// Custom line JSON to validate and normalize.
    #[arg(long, value_name = "FILE")]
    pub from: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleCmd {
    /// Label one degradation vector; the exit code mirrors the label.
    Query(OracleQueryArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct OracleQueryArgs {
    #[arg(long, value_name = "FILE")]
    pub line: PathBuf,
    /// Comma-separated degradation values in [0, 1], one per machine.
    #[arg(long, allow_hyphen_values = true)]
    pub d: String,
    /// Optional JSON record of the answer.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Active,
    Baseline,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Active => "active",
            Method::Baseline => "baseline",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityCmd {
    /// Learn a capacity model under an oracle budget.
    Learn(LearnArgs),
    /// Classification report on an oracle-labeled test set.
    Eval(EvalArgs),
    /// Monte-Carlo volume of a model or of the exact capacity.
    Volume(VolumeArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct LearnArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    /// Oracle calls available.
    #[arg(long)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "FILE")]
    pub line: PathBuf,
    /// Model JSON.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Also write the labeled training samples as CSV.
    #[arg(long, value_name = "FILE")]
    pub samples: Option<PathBuf>,
    /// Trees in the forest (active only).
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    /// Retrain after this many new queries (active only).
    #[arg(long, default_value_t = 1)]
    pub retrain_every: usize,
    /// Count the axis-maximization solves against the budget (active only).
    #[arg(long)]
    pub charge_seeds: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub line: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub test_size: usize,
    /// Equal numbers of feasible and infeasible test points.
    #[arg(long)]
    pub balanced: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report JSON.
    #[arg(long, value_name = "FILE")]
    pub report: PathBuf,
    /// Also write the test set as CSV.
    #[arg(long, value_name = "FILE")]
    pub test_out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[command(group(ArgGroup::new("target").required(true).multiple(true).args(["model", "line"])))]
pub struct VolumeArgs {
    /// Model to measure; without it the exact capacity of --line is measured.
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub line: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Optional JSON record of the estimate.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhmCmd {
    /// Simulated diagnosis, periodic refits and RUL summaries against the truth.
    Simulate(PhmArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct PhmArgs {
    #[arg(long, value_name = "FILE")]
    pub line: PathBuf,
    /// Capacity model; without it the exact oracle is the classifier.
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Degradation truth parameters as JSON.
    #[arg(long, value_name = "FILE")]
    pub truth: PathBuf,
    /// Standard deviation of the diagnosis noise.
    #[arg(long, default_value_t = 0.01)]
    pub obs_noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// RUL table as CSV.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Spacing of the observations, which start at t = 0.
    #[arg(long, default_value_t = 1.0)]
    pub obs_step: f64,
    /// Last observation time.
    #[arg(long, default_value_t = 45.0)]
    pub obs_end: f64,
    /// First refit time.
    #[arg(long, default_value_t = 5.0)]
    pub refit_start: f64,
    /// Spacing of the refits, which run up to --obs-end.
    #[arg(long, default_value_t = 5.0)]
    pub refit_step: f64,
    /// RUL grid step.
    #[arg(long, default_value_t = 1.0)]
    pub dt: f64,
    /// RUL grid points after each refit.
    #[arg(long, default_value_t = 100)]
    pub horizon_steps: usize,
    /// Monte-Carlo trajectories per refit.
    #[arg(long, default_value_t = 200)]
    pub n_mc: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[arg(long, value_name = "FILE")]
    pub line: PathBuf,
    /// Comma-separated oracle budgets.
    #[arg(long, value_delimiter = ',', required = true)]
    pub budgets: Vec<usize>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "active,baseline")]
    pub methods: Vec<Method>,
    /// Comma-separated learner seeds.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    pub seeds: Vec<u64>,
    #[arg(long, default_value_t = 2000)]
    pub test_size: usize,
    #[arg(long, default_value_t = 0)]
    pub test_seed: u64,
    /// Equal numbers of feasible and infeasible test points.
    #[arg(long)]
    pub balanced: bool,
    /// CSV with columns budget, method, seed, accuracy.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    #[arg(value_name = "MANIFEST")]
    pub manifest: PathBuf,
    /// Where the rerun writes its outputs (default: `<MANIFEST>.replay`).
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

impl Command {
    /// Subcommand path, e.g. `capacity learn`.
    pub fn name(&self) -> &'static str {
        match self {
            Command::Line(LineCmd::Generate(_)) => "line generate",
            Command::Oracle(OracleCmd::Query(_)) => "oracle query",
            Command::Capacity(CapacityCmd::Learn(_)) => "capacity learn",
            Command::Capacity(CapacityCmd::Eval(_)) => "capacity eval",
            Command::Capacity(CapacityCmd::Volume(_)) => "capacity volume",
            Command::Phm(PhmCmd::Simulate(_)) => "phm simulate",
            Command::Sweep(_) => "sweep",
            Command::Replay(_) => "replay",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Command::Capacity(CapacityCmd::Learn(a)) => Some(a.seed),
            Command::Capacity(CapacityCmd::Eval(a)) => Some(a.seed),
            Command::Capacity(CapacityCmd::Volume(a)) => Some(a.seed),
            Command::Phm(PhmCmd::Simulate(a)) => Some(a.seed),
            Command::Sweep(a) => Some(a.test_seed),
            _ => None,
        }
    }

    /// Files read by the command, by role.
    pub fn inputs(&self) -> Vec<(&'static str, &Path)> {
        let mut v: Vec<(&'static str, &Path)> = Vec::new();
        match self {
            Command::Line(LineCmd::Generate(a)) => v.extend(a.from.as_deref().map(|p| ("from", p))),
            Command::Oracle(OracleCmd::Query(a)) => v.push(("line", &a.line)),
            Command::Capacity(CapacityCmd::Learn(a)) => v.push(("line", &a.line)),
            Command::Capacity(CapacityCmd::Eval(a)) => {
                v.push(("model", &a.model));
                v.push(("line", &a.line));
            }
            Command::Capacity(CapacityCmd::Volume(a)) => {
                v.extend(a.model.as_deref().map(|p| ("model", p)));
                v.extend(a.line.as_deref().map(|p| ("line", p)));
            }
            Command::Phm(PhmCmd::Simulate(a)) => {
                v.push(("line", &a.line));
                v.extend(a.model.as_deref().map(|p| ("model", p)));
                v.push(("truth", &a.truth));
            }
            Command::Sweep(a) => v.push(("line", &a.line)),
            Command::Replay(a) => v.push(("manifest", &a.manifest)),
        }
        v
    }

    /// Files written by the command, by role; the first is the primary one.
    pub fn outputs(&self) -> Vec<(&'static str, &Path)> {
        let mut v: Vec<(&'static str, &Path)> = Vec::new();
        match self {
            Command::Line(LineCmd::Generate(a)) => v.push(("out", &a.out)),
            Command::Oracle(OracleCmd::Query(a)) => v.extend(a.out.as_deref().map(|p| ("out", p))),
            Command::Capacity(CapacityCmd::Learn(a)) => {
                v.push(("out", &a.out));
                v.extend(a.samples.as_deref().map(|p| ("samples", p)));
            }
            Command::Capacity(CapacityCmd::Eval(a)) => {
                v.push(("report", &a.report));
                v.extend(a.test_out.as_deref().map(|p| ("test_out", p)));
            }
            Command::Capacity(CapacityCmd::Volume(a)) => v.extend(a.out.as_deref().map(|p| ("out", p))),
            Command::Phm(PhmCmd::Simulate(a)) => v.push(("out", &a.out)),
            Command::Sweep(a) => v.push(("out", &a.out)),
            Command::Replay(_) => {}
        }
        v
    }

    /// Points every output into `dir`, keeping file names apart by role.
    pub fn redirect_outputs(&mut self, dir: &Path) {
        let move_to = |p: &mut PathBuf, role: &str| {
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            *p = dir.join(format!("{role}-{name}"));
        };
        let move_opt = |p: &mut Option<PathBuf>, role: &str| {
            if let Some(p) = p {
                move_to(p, role);
            }
        };
        match self {
            Command::Line(LineCmd::Generate(a)) => move_to(&mut a.out, "out"),
            Command::Oracle(OracleCmd::Query(a)) => move_opt(&mut a.out, "out"),
            Command::Capacity(CapacityCmd::Learn(a)) => {
                move_to(&mut a.out, "out");
                move_opt(&mut a.samples, "samples");
            }
            Command::Capacity(CapacityCmd::Eval(a)) => {
                move_to(&mut a.report, "report");
                move_opt(&mut a.test_out, "test_out");
            }
            Command::Capacity(CapacityCmd::Volume(a)) => move_opt(&mut a.out, "out"),
            Command::Phm(PhmCmd::Simulate(a)) => move_to(&mut a.out, "out"),
            Command::Sweep(a) => move_to(&mut a.out, "out"),
            Command::Replay(_) => {}
        }
    }

    /// Manifest location when `--manifest` is not given.
    pub fn default_manifest_path(&self) -> PathBuf {
        match self.outputs().first() {
            Some((_, p)) => {
                let mut s = p.as_os_str().to_os_string();
                s.push(".manifest.json");
                PathBuf::from(s)
            }
            None => PathBuf::from(format!("rescap-{}.manifest.json", self.name().replace(' ', "-"))),
        }
    }
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool, CliError> {
    if threads == 0 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {threads} threads: {e}")))
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli, argv: Vec<String>) -> Result<i32, CliError> {
    let pool = thread_pool(cli.threads)?;
    if let Command::Replay(args) = &cli.command {
        return pool.install(|| commands::replay(args));
    }
    let start = Instant::now();
    let inputs = manifest::hash_all(&cli.command.inputs())?;
    let code = pool.install(|| commands::execute(&cli.command))?;
    let outputs = manifest::hash_all(&cli.command.outputs())?;
    let path = cli
        .manifest
        .clone()
        .unwrap_or_else(|| cli.command.default_manifest_path());
    let m = RunManifest {
        tool: "rescap".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        argv,
        seed: cli.command.seed(),
        threads: cli.threads,
        command: cli.command,
        inputs,
        outputs,
        exit_code: code,
        duration_secs: start.elapsed().as_secs_f64(),
    };
    m.write(&path)?;
    Ok(code)
}

/// Parses `args` (program name first), runs, and reports errors on stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let argv = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match run(cli, argv) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn commands_round_trip_through_json() {
        let cli = Cli::try_parse_from([
            "rescap", "sweep", "--line", "l.json", "--budgets", "41,81", "--out", "s.csv",
        ])
        .unwrap();
        let text = serde_json::to_string(&cli.command).unwrap();
        let back: Command = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cli.command);
        assert_eq!(back.name(), "sweep");
        assert_eq!(back.default_manifest_path(), PathBuf::from("s.csv.manifest.json"));
    }

    #[test]
    fn redirect_keeps_roles_apart() {
        let mut cmd = Cli::try_parse_from([
            "rescap", "capacity", "learn", "--method", "active", "--budget", "10", "--line",
            "a/l.json", "--out", "a/m.json", "--samples", "a/m.json",
        ])
        .unwrap()
        .command;
        cmd.redirect_outputs(Path::new("r"));
        let outs: Vec<PathBuf> = cmd.outputs().iter().map(|(_, p)| p.to_path_buf()).collect();
        assert_eq!(outs, vec![PathBuf::from("r/out-m.json"), PathBuf::from("r/samples-m.json")]);
        assert_eq!(cmd.inputs()[0].1, Path::new("a/l.json"));
    }

    #[test]
    fn error_classes_have_distinct_codes() {
        let codes = [
            CliError::Usage(String::new()).exit_code(),
            CliError::io(Path::new("x"), std::io::Error::other("x")).exit_code(),
            CliError::Schema(String::new()).exit_code(),
            CliError::Budget(String::new()).exit_code(),
            CliError::NotEnoughData(String::new()).exit_code(),
            CliError::Solver(String::new()).exit_code(),
            CliError::ReplayMismatch(String::new()).exit_code(),
        ];
        let mut sorted = codes.to_vec();
        sorted.dedup();
        assert_eq!(sorted, vec![2, 3, 4, 5, 6, 7, 8]);
        let budget: CliError = OracleError::BudgetExhausted(3).into();
        assert_eq!(budget.exit_code(), EXIT_BUDGET);
        let data: CliError = PhmError::NotEnoughData { machine: 0, usable: 1 }.into();
        assert_eq!(data.exit_code(), EXIT_NOT_ENOUGH_DATA);
    }
}
