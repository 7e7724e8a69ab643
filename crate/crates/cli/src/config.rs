//! Command-line definition, JSON configuration files, and the merge rule:
//! explicit flags override file values, and every run echoes its fully
//! resolved configuration to standard error before doing any work.
//!
//! A configuration file is a JSON object with optional shared keys
//! (`seed`, `format`, `out`) and one optional section per command, whose
//! keys match the long flag names with dashes replaced by underscores:
//!
//! ```json
//! {
//!   "seed": 7,
//!   "format": "csv",
//!   "solve": { "n": 32, "rho1": 0.5, "h1": "1+0.5*cos(2*pi*x)" }
//! }
//! ```

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::AppError;

/// Degree tables and verification solvers for the two-parameter mean field
/// equation on the flat unit torus.
#[derive(Debug, Parser)]
#[command(name = "mfe", version, about)]
pub struct Cli {
    /// JSON configuration file; explicit flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Seed for randomized subroutines; echoed with the resolved config.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,

    /// Report format on standard output.
    #[arg(long, global = true, value_enum, value_name = "FMT")]
    pub format: Option<Format>,

    /// Directory for artifact files (traces, field binaries, sidecars).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

/// Report format for standard output. Artifact files keep their fixed
/// formats (CSV traces, binary fields, JSON sidecars) regardless.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    /// Aligned human-readable table.
    Table,
    /// Comma-separated values with a header row.
    Csv,
    /// JSON.
    Json,
}

/// The four subcommands.
#[derive(Debug, Subcommand)]
pub enum Command {
    /// Leray-Schauder degree tables from exact generating-function
    /// arithmetic. Couplings are in units of 8*pi.
    Degree(DegreeArgs),
    /// Damped Newton solves of the mean field equation (scalar or 2x2
    /// system form) with an optional continuation sweep in rho1.
    Solve(SolveArgs),
    /// Concentration-ansatz expansion checks over a ladder of bubble
    /// heights.
    Bubble(BubbleArgs),
    /// Joint Newton solve of the reduced point-field (shadow) system with
    /// a non-degeneracy certificate.
    Shadow(ShadowArgs),
}

/// Flags for `mfe degree`.
#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegreeArgs {
    /// Euler characteristics, comma-separated even integers.
    #[arg(long, value_name = "LIST")]
    pub chi: Option<String>,

    /// First-coupling grid in units of 8*pi (integers, fractions like 3/2,
    /// or finite decimals like 1.5), comma-separated.
    #[arg(long, value_name = "LIST")]
    pub rho1: Option<String>,

    /// Second-coupling grid in units of 8*pi; required unless --alpha is
    /// given.
    #[arg(long, value_name = "LIST")]
    pub rho2: Option<String>,

    /// Singular-source weights: switches to the one-parameter singular
    /// equation over the --rho1 grid (incompatible with --rho2).
    #[arg(long, value_name = "LIST")]
    pub alpha: Option<String>,
}

/// Flags for `mfe solve`.
#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveArgs {
    /// Grid resolution per axis (a power of two).
    #[arg(long, value_name = "N")]
    pub n: Option<usize>,

    /// First coupling in units of 8*pi.
    #[arg(long, value_name = "REAL")]
    pub rho1: Option<f64>,

    /// Second coupling in units of 8*pi.
    #[arg(long, value_name = "REAL")]
    pub rho2: Option<f64>,

    /// First weight function (expression in x, y, pi, cos, sin, exp, +,
    /// -, *).
    #[arg(long, value_name = "EXPR", conflicts_with = "h1_file")]
    pub h1: Option<String>,

    /// Second weight function.
    #[arg(long, value_name = "EXPR", conflicts_with = "h2_file")]
    pub h2: Option<String>,

    /// Read the first weight from a field file (.csv or .bin) instead.
    #[arg(long, value_name = "PATH")]
    pub h1_file: Option<PathBuf>,

    /// Read the second weight from a field file instead.
    #[arg(long, value_name = "PATH")]
    pub h2_file: Option<PathBuf>,

    /// Solve the equivalent 2x2 system instead of the scalar equation.
    #[arg(long)]
    #[serde(default)]
    pub system: bool,

    /// Continuation targets for rho1 (units of 8*pi), comma-separated;
    /// scalar mode only.
    #[arg(long, value_name = "LIST")]
    pub continue_to: Option<String>,

    /// Record the Morse index (negative-eigenvalue count) in the trace;
    /// dense eigensolve, so n <= 48.
    #[arg(long)]
    #[serde(default)]
    pub morse: bool,

    /// Radius of the local-mass diagnostic around the solution maximum.
    #[arg(long, value_name = "REAL")]
    pub mass_radius: Option<f64>,

    /// Residual tolerance (sup norm).
    #[arg(long, value_name = "REAL")]
    pub tol: Option<f64>,

    /// Newton iteration budget.
    #[arg(long, value_name = "N")]
    pub max_iter: Option<usize>,

    /// Abort (exit 4, partial trace) when the iterate's sup norm exceeds
    /// this guard.
    #[arg(long, value_name = "REAL")]
    pub blowup_guard: Option<f64>,
}

/// Which bubble expansion to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BubbleCheck {
    /// Concentrated-mass expansion of the glued ansatz.
    Mass,
    /// Residual projections onto the center, height, and amplitude
    /// directions.
    Projections,
}

/// Flags for `mfe bubble`.
#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BubbleArgs {
    /// Which expansion to verify.
    #[arg(long, value_enum, value_name = "KIND")]
    pub check: Option<BubbleCheck>,

    /// Bubble heights, comma-separated and increasing (at least three).
    #[arg(long, value_name = "LIST")]
    pub lambdas: Option<String>,

    /// Grid resolution for the far field (a power of two).
    #[arg(long, value_name = "N")]
    pub n: Option<usize>,

    /// Bubble center as `X,Y`.
    #[arg(long, value_name = "X,Y")]
    pub q: Option<String>,

    /// First coupling in units of 8*pi.
    #[arg(long, value_name = "REAL")]
    pub rho1: Option<f64>,

    /// Cutoff radius of the gluing region (0 < r0 <= 1/4).
    #[arg(long, value_name = "REAL")]
    pub r0: Option<f64>,

    /// First weight function.
    #[arg(long, value_name = "EXPR")]
    pub h1: Option<String>,

    /// Shadow component entering the effective density h1*exp(-w).
    #[arg(long, value_name = "EXPR")]
    pub w: Option<String>,
}

/// Flags for `mfe shadow`.
#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShadowArgs {
    /// Grid resolution per axis (a power of two, at most 48).
    #[arg(long, value_name = "N")]
    pub n: Option<usize>,

    /// Second coupling in units of 8*pi.
    #[arg(long, value_name = "REAL")]
    pub rho2: Option<f64>,

    /// First weight function (its critical points drive the point part).
    #[arg(long, value_name = "EXPR")]
    pub h1: Option<String>,

    /// Second weight function.
    #[arg(long, value_name = "EXPR")]
    pub h2: Option<String>,

    /// Starting point as `X,Y`.
    #[arg(long, value_name = "X,Y")]
    pub p: Option<String>,

    /// Solve the decoupled end of the deformation: the point equation
    /// drops its dependence on the field.
    #[arg(long)]
    #[serde(default)]
    pub decoupled: bool,

    /// Residual tolerance for both parts.
    #[arg(long, value_name = "REAL")]
    pub tol: Option<f64>,

    /// Newton iteration budget.
    #[arg(long, value_name = "N")]
    pub max_iter: Option<usize>,
}

/// JSON configuration file contents.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    /// Shared seed.
    pub seed: Option<u64>,
    /// Shared output format.
    pub format: Option<Format>,
    /// Shared artifact directory.
    pub out: Option<PathBuf>,
    /// Section for `mfe degree`.
    pub degree: Option<DegreeArgs>,
    /// Section for `mfe solve`.
    pub solve: Option<SolveArgs>,
    /// Section for `mfe bubble`.
    pub bubble: Option<BubbleArgs>,
    /// Section for `mfe shadow`.
    pub shadow: Option<ShadowArgs>,
}

impl FileConfig {
    /// Load and parse a configuration file.
    pub fn load(path: &std::path::Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            AppError::input(format!("cannot read config {}: {e}", path.display()))
        })?;
        serde_json::from_str(&text)
            .map_err(|e| AppError::input(format!("config {}: {e}", path.display())))
    }
}

/// Shared settings after merging flags over the file.
#[derive(Debug, Clone, Serialize)]
pub struct CommonConfig {
    /// Seed for randomized subroutines.
    pub seed: u64,
    /// Output format for standard output.
    pub format: Format,
    /// Artifact directory; commands that always write artifacts fall back
    /// to the current directory when absent.
    pub out: Option<PathBuf>,
}

impl CommonConfig {
    /// Merge shared flags over shared file values and apply defaults.
    pub fn resolve(cli: &Cli, file: &FileConfig) -> Self {
        Self {
            seed: cli.seed.or(file.seed).unwrap_or(0),
            format: cli.format.or(file.format).unwrap_or(Format::Table),
            out: cli.out.clone().or_else(|| file.out.clone()),
        }
    }
}

fn or_owned<T: Clone>(flag: &Option<T>, file: Option<&Option<T>>) -> Option<T> {
    flag.clone()
        .or_else(|| file.and_then(|f| f.clone()))
}

impl DegreeArgs {
    /// Merge explicit flags over the file section.
    pub fn merge(&self, file: Option<&DegreeArgs>) -> DegreeArgs {
        DegreeArgs {
            chi: or_owned(&self.chi, file.map(|f| &f.chi)),
            rho1: or_owned(&self.rho1, file.map(|f| &f.rho1)),
            rho2: or_owned(&self.rho2, file.map(|f| &f.rho2)),
            alpha: or_owned(&self.alpha, file.map(|f| &f.alpha)),
        }
    }
}

impl SolveArgs {
    /// Merge explicit flags over the file section. A weight given on the
    /// command line (as expression or file) displaces both file-config
    /// variants of that weight, so the two sources cannot conflict.
    pub fn merge(&self, file: Option<&SolveArgs>) -> SolveArgs {
        let h1_pair = if self.h1.is_some() || self.h1_file.is_some() {
            (self.h1.clone(), self.h1_file.clone())
        } else {
            (
                file.and_then(|f| f.h1.clone()),
                file.and_then(|f| f.h1_file.clone()),
            )
        };
        let h2_pair = if self.h2.is_some() || self.h2_file.is_some() {
            (self.h2.clone(), self.h2_file.clone())
        } else {
            (
                file.and_then(|f| f.h2.clone()),
                file.and_then(|f| f.h2_file.clone()),
            )
        };
        SolveArgs {
            n: or_owned(&self.n, file.map(|f| &f.n)),
            rho1: or_owned(&self.rho1, file.map(|f| &f.rho1)),
            rho2: or_owned(&self.rho2, file.map(|f| &f.rho2)),
            h1: h1_pair.0,
            h2: h2_pair.0,
            h1_file: h1_pair.1,
            h2_file: h2_pair.1,
            system: self.system || file.map(|f| f.system).unwrap_or(false),
            continue_to: or_owned(&self.continue_to, file.map(|f| &f.continue_to)),
            morse: self.morse || file.map(|f| f.morse).unwrap_or(false),
            mass_radius: or_owned(&self.mass_radius, file.map(|f| &f.mass_radius)),
            tol: or_owned(&self.tol, file.map(|f| &f.tol)),
            max_iter: or_owned(&self.max_iter, file.map(|f| &f.max_iter)),
            blowup_guard: or_owned(&self.blowup_guard, file.map(|f| &f.blowup_guard)),
        }
    }
}

impl BubbleArgs {
    /// Merge explicit flags over the file section.
    pub fn merge(&self, file: Option<&BubbleArgs>) -> BubbleArgs {
        BubbleArgs {
            check: or_owned(&self.check, file.map(|f| &f.check)),
            lambdas: or_owned(&self.lambdas, file.map(|f| &f.lambdas)),
            n: or_owned(&self.n, file.map(|f| &f.n)),
            q: or_owned(&self.q, file.map(|f| &f.q)),
            rho1: or_owned(&self.rho1, file.map(|f| &f.rho1)),
            r0: or_owned(&self.r0, file.map(|f| &f.r0)),
            h1: or_owned(&self.h1, file.map(|f| &f.h1)),
            w: or_owned(&self.w, file.map(|f| &f.w)),
        }
    }
}

impl ShadowArgs {
    /// Merge explicit flags over the file section.
    pub fn merge(&self, file: Option<&ShadowArgs>) -> ShadowArgs {
        ShadowArgs {
            n: or_owned(&self.n, file.map(|f| &f.n)),
            rho2: or_owned(&self.rho2, file.map(|f| &f.rho2)),
            h1: or_owned(&self.h1, file.map(|f| &f.h1)),
            h2: or_owned(&self.h2, file.map(|f| &f.h2)),
            p: or_owned(&self.p, file.map(|f| &f.p)),
            decoupled: self.decoupled || file.map(|f| f.decoupled).unwrap_or(false),
            tol: or_owned(&self.tol, file.map(|f| &f.tol)),
            max_iter: or_owned(&self.max_iter, file.map(|f| &f.max_iter)),
        }
    }
}

/// Echo the fully resolved configuration as one JSON line on standard
/// error.
pub fn echo_config<P: Serialize>(
    command: &str,
    common: &CommonConfig,
    params: &P,
) -> Result<(), AppError> {
    #[derive(Serialize)]
    struct Echo<'a, P: Serialize> {
        command: &'a str,
        #[serde(flatten)]
        common: &'a CommonConfig,
        params: &'a P,
    }
    let line = serde_json::to_string(&Echo {
        command,
        common,
        params,
    })?;
    eprintln!("{line}");
    Ok(())
}

/// Parse a comma-separated list of reals.
pub fn parse_f64_list(src: &str, what: &str) -> Result<Vec<f64>, AppError> {
    let mut out = Vec::new();
    for item in src.split(',') {
        let v: f64 = item
            .trim()
            .parse()
            .map_err(|_| AppError::input(format!("malformed {what} entry `{item}`")))?;
        if !v.is_finite() {
            return Err(AppError::input(format!("non-finite {what} entry `{item}`")));
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(AppError::input(format!("empty {what} list")));
    }
    Ok(out)
}

/// Parse a point given as `X,Y`.
pub fn parse_point(src: &str, what: &str) -> Result<(f64, f64), AppError> {
    let xs = parse_f64_list(src, what)?;
    if xs.len() != 2 {
        return Err(AppError::input(format!(
            "{what} must be two comma-separated reals, got `{src}`"
        )));
    }
    Ok((xs[0], xs[1]))
}

/// Parse a comma-separated list of integers.
pub fn parse_i64_list(src: &str, what: &str) -> Result<Vec<i64>, AppError> {
    let mut out = Vec::new();
    for item in src.split(',') {
        let v: i64 = item
            .trim()
            .parse()
            .map_err(|_| AppError::input(format!("malformed {what} entry `{item}`")))?;
        out.push(v);
    }
    if out.is_empty() {
        return Err(AppError::input(format!("empty {what} list")));
    }
    Ok(out)
}
