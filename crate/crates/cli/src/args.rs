//! Command-line arguments and the flat `key = value` configuration file.

use std::ffi::OsString;
use std::path::PathBuf;
use std::str::FromStr;

use axcirc::Family;
use clap::{Args, Parser, Subcommand};

use crate::error::{CliError, CliResult};
use crate::ingest::{AngleUnit, Categorical, IngestConfig};

#[derive(Debug, Parser)]
#[command(
    name = "axcirc",
    version,
    about = "Mixtures of copula-based circular-axial distributions",
    args_override_self = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one mixture and export estimates, classes and plot data.
    Fit(FitArgs),
    /// Fit a grid of family pairs and component counts and rank by BIC.
    Select(SelectArgs),
    /// Simulate a dataset from a scenario.
    Simulate(SimulateArgs),
    /// Fit a mixture and compute parametric-bootstrap intervals.
    Bootstrap(BootstrapArgs),
    /// Run a parameter-recovery study over simulated replicas.
    Recovery(RecoveryArgs),
    /// Evaluate the log-likelihood of a saved model on a dataset.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Column holding the circular angle.
    #[arg(long, default_value = "x")]
    pub circular: String,
    /// Column holding the axial angle.
    #[arg(long, default_value = "y")]
    pub axial: String,
    #[arg(long, value_enum, default_value = "degrees")]
    pub unit: AngleUnit,
    /// Numeric covariate columns.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
    /// Categorical covariates as COLUMN:REFERENCE.
    #[arg(long, value_delimiter = ',')]
    pub categorical: Vec<Categorical>,
    #[arg(long, default_value = ",")]
    pub delimiter: char,
}

impl DataArgs {
    pub fn ingest_config(&self) -> CliResult<IngestConfig> {
        if !self.delimiter.is_ascii() {
            return Err(CliError::Usage(format!("delimiter {:?} must be a single ASCII character", self.delimiter)));
        }
        Ok(IngestConfig {
            circular: self.circular.clone(),
            axial: self.axial.clone(),
            unit: self.unit,
            covariates: self.covariates.clone(),
            categorical: self.categorical.clone(),
            delimiter: self.delimiter as u8,
        })
    }
}

#[derive(Debug, Args)]
pub struct EmArgs {
    #[arg(long, default_value_t = 20)]
    pub restarts: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    /// EM iterations before restarts are screened (0 disables screening).
    #[arg(long, default_value_t = 10)]
    pub screen_iterations: usize,
    /// Restarts continued to convergence after screening.
    #[arg(long, default_value_t = 3)]
    pub finalists: usize,
}

impl EmArgs {
    pub fn fit_config(&self, seed: u64) -> axcirc::FitConfig {
        axcirc::FitConfig {
            restarts: self.restarts,
            tol: self.tol,
            max_iter: self.max_iter,
            seed,
            screen_iterations: self.screen_iterations,
            finalists: self.finalists,
            warm_starts: Vec::new(),
        }
    }
}

/// A (circular, axial) family pair written `VM-AX`, `VM-AXWC`, `WC-AX` or `WC-AXWC`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FamilyPair(pub Family, pub Family);

impl FamilyPair {
    pub const ALL: [FamilyPair; 4] = [
        FamilyPair(Family::VonMisesCircular, Family::VonMisesAxial),
        FamilyPair(Family::VonMisesCircular, Family::WrappedCauchyAxial),
        FamilyPair(Family::WrappedCauchyCircular, Family::VonMisesAxial),
        FamilyPair(Family::WrappedCauchyCircular, Family::WrappedCauchyAxial),
    ];

    pub fn families(self) -> (Family, Family) {
        (self.0, self.1)
    }
}

impl std::fmt::Display for FamilyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}-{}", self.0.code(), self.1.code())
    }
}

impl FromStr for FamilyPair {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (c, a) = s.split_once('-').ok_or_else(|| format!("expected CIRCULAR-AXIAL such as VM-AX, got {s:?}"))?;
        let c = Family::from_str(c).map_err(|e| e.to_string())?;
        let a = Family::from_str(a).map_err(|e| e.to_string())?;
        if !c.is_circular() || a.is_circular() {
            return Err(format!("{s:?} is not a circular-axial family pair"));
        }
        Ok(FamilyPair(c, a))
    }
}

/// A family pair or every pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyChoice {
    All,
    Pair(FamilyPair),
}

impl FromStr for FamilyChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("all") {
            Ok(FamilyChoice::All)
        } else {
            s.parse().map(FamilyChoice::Pair)
        }
    }
}

/// Distinct pairs named by `choices`, in the order given.
pub fn expand_families(choices: &[FamilyChoice]) -> Vec<FamilyPair> {
    let mut out: Vec<FamilyPair> = Vec::new();
    for c in choices {
        let pairs = match c {
            FamilyChoice::All => FamilyPair::ALL.to_vec(),
            FamilyChoice::Pair(p) => vec![*p],
        };
        for p in pairs {
            if !out.contains(&p) {
                out.push(p);
            }
        }
    }
    out
}

/// Component counts written as `1,2,3` or the inclusive range `1..4`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentRange(pub Vec<usize>);

impl FromStr for ComponentRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("expected a list like 1,2,3 or a range like 1..4, got {s:?}");
        let v: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
            let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            (a..=b).collect()
        } else {
            s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
        };
        if v.is_empty() || v.contains(&0) {
            return Err(bad());
        }
        Ok(ComponentRange(v))
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub em: EmArgs,
    #[arg(long, default_value = "VM-AX")]
    pub families: FamilyPair,
    /// Number of mixture components.
    #[arg(short = 'J', long, default_value_t = 2)]
    pub components: usize,
    /// Plot grid resolution per axis (0 skips plot data).
    #[arg(long, default_value_t = 100)]
    pub grid: usize,
    #[arg(long, default_value_t = 16)]
    pub circular_bins: usize,
    #[arg(long, default_value_t = 8)]
    pub axial_bins: usize,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub em: EmArgs,
    /// Family pairs to compare, or `all` (the default).
    #[arg(long, value_delimiter = ',', default_value = "all")]
    pub families: Vec<FamilyChoice>,
    #[arg(short = 'J', long, default_value = "1..3")]
    pub components: ComponentRange,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Built-in scenario name, e.g. "VM-AX J=2".
    #[arg(long, default_value = "VM-AX J=2", conflicts_with = "scenario_file")]
    pub scenario: String,
    /// Scenario in JSON form.
    #[arg(long)]
    pub scenario_file: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub replica: usize,
    /// Sample size (default: the scenario's).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_enum, default_value = "degrees")]
    pub unit: AngleUnit,
}

#[derive(Debug, Args)]
pub struct BootstrapArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub em: EmArgs,
    #[arg(long, default_value = "VM-AX")]
    pub families: FamilyPair,
    #[arg(short = 'J', long, default_value_t = 2)]
    pub components: usize,
    /// Bootstrap replicates.
    #[arg(short = 'B', long, default_value_t = 1000)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Data-driven restarts per refit, in addition to the warm start.
    #[arg(long, default_value_t = 4)]
    pub boot_restarts: usize,
    #[arg(long, default_value_t = 3)]
    pub boot_screen_iterations: usize,
    #[arg(long, default_value_t = 1)]
    pub boot_finalists: usize,
}

#[derive(Debug, Args)]
pub struct RecoveryArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub em: EmArgs,
    /// Built-in scenario names, or "all".
    #[arg(long, value_delimiter = ',', default_value = "VM-AX J=2", conflicts_with = "scenario_file")]
    pub scenario: Vec<String>,
    #[arg(long)]
    pub scenario_file: Option<PathBuf>,
    /// Replicas per scenario (default: the scenario's).
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    /// A result.json written by fit or bootstrap.
    #[arg(long)]
    pub model: PathBuf,
}

/// Expands `--config FILE` into flags placed right after the subcommand, so
/// that flags given on the command line take precedence.
pub fn expand_config(args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let mut out = Vec::with_capacity(args.len());
    let mut config = None;
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            let path = it.next().ok_or_else(|| CliError::Usage("--config requires a file".into()))?;
            config = Some(PathBuf::from(path));
        } else if let Some(p) = s.strip_prefix("--config=") {
            config = Some(PathBuf::from(p));
        } else {
            out.push(a);
        }
    }
    let Some(path) = config else { return Ok(out) };
    if out.len() < 2 {
        return Err(CliError::Usage("--config must follow a subcommand".into()));
    }
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    // flags given on the command line replace the config entry as a whole
    let given: Vec<String> = out[2..].iter().filter_map(|a| flag_name(&a.to_string_lossy())).collect();
    let flags = parse_config(&text)?.into_iter().filter(|f| flag_name(f).is_none_or(|k| !given.contains(&k)));
    out.splice(2..2, flags.map(OsString::from));
    Ok(out)
}

fn flag_name(arg: &str) -> Option<String> {
    match arg {
        "-J" => Some("components".into()),
        "-B" => Some("replicates".into()),
        _ => arg.strip_prefix("--").map(|k| k.split('=').next().unwrap_or(k).to_string()),
    }
}

/// `key = value` lines; `#` starts a comment. Keys are long flag names with
/// `-` or `_` separators.
pub fn parse_config(text: &str) -> CliResult<Vec<String>> {
    let mut flags = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", no + 1)))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() || key == "config" {
            return Err(CliError::Usage(format!("config line {}: invalid key {:?}", no + 1, k.trim())));
        }
        flags.push(format!("--{key}={}", v.trim()));
    }
    Ok(flags)
}
