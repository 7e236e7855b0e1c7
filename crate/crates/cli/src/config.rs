//! Command-line configuration. Every flag set is also a JSON document, so a
//! run can be saved with `--dump-config` and replayed with `--config`.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::PathBuf;

#[derive(Parser, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[command(name = "sqfree", version, about = "Conditional squarefreeness certificates and supporting experiments")]
pub struct RunConfig {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Global {
    /// Master seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Largest prime the explicit-formula sums may visit.
    #[arg(long, global = true, default_value_t = sqfree::explicit::DEFAULT_PRIME_BUDGET)]
    pub prime_budget: u64,
    /// Wall-clock limit in seconds; long runs stop and report partial results.
    #[arg(long, global = true)]
    pub time_limit: Option<f64>,
    #[arg(long, global = true, default_value_t = 1e-3)]
    pub slack: f64,
    /// Output file (default: stdout).
    #[arg(long, short = 'o', global = true)]
    pub out: Option<PathBuf>,
    /// Replay a configuration saved with --dump-config; other flags are ignored.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Print the parsed configuration as JSON and exit.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub dump_config: bool,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Certify N squarefree (or not squarefull) and write the certificate.
    Certify(CertifyArgs),
    /// Re-check a certificate file.
    Verify(VerifyArgs),
    /// Rank quadratic twists q by their short-sum bound.
    ScanTwists(ScanArgs),
    /// Build and reduce the twist lattice and list the extracted characters.
    Lattice(LatticeArgs),
    /// Solve the binned zero-count linear program.
    Lp(LpArgs),
    /// Random-matrix experiments.
    Rmt(RmtArgs),
    /// Scan the theta-series symmetry for |d|.
    Theta(ThetaArgs),
    /// Lower bound as a function of X, as CSV.
    Curve(CurveArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Squarefree,
    NotSquarefull,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyArg {
    Triangle,
    Bessel,
    GAlpha,
    Sinc,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyOpts {
    #[arg(long, value_enum, default_value_t = FamilyArg::Triangle)]
    pub family: FamilyArg,
    /// Order nu for the Bessel family.
    #[arg(long, default_value_t = 1.0)]
    pub nu: f64,
    /// Power k for the sinc family.
    #[arg(long, default_value_t = 2)]
    pub k: u32,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyArgs {
    /// Positive integer, decimal, underscores allowed.
    pub n: String,
    #[arg(long, value_enum, default_value_t = ModeArg::Squarefree)]
    pub mode: ModeArg,
    /// Evaluate one test function of support X with q = 1 instead of searching.
    #[arg(long = "X")]
    pub x: Option<f64>,
    #[command(flatten)]
    pub family: FamilyOpts,
    #[arg(long, default_value_t = 1 << 20)]
    pub q_max: u64,
    #[arg(long, default_value_t = 24)]
    pub rounds: usize,
    /// X = x_scale * log Q in the search rounds.
    #[arg(long, default_value_t = 1.0)]
    pub x_scale: f64,
    #[arg(long, default_value_t = 1_000_000_000)]
    pub trial_max: u64,
    #[arg(long, default_value_t = 4)]
    pub refine_count: usize,
    /// Step-function half-width M used in refinement.
    #[arg(long = "M", default_value_t = 48)]
    pub m: usize,
    /// Use the Bessel family with X = 4 nu log Q.
    #[arg(long)]
    pub theoretical: bool,
    /// Write the per-round trace as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyArgs {
    pub certificate: PathBuf,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanArgs {
    /// Discriminant d, or an odd N (mapped to +-N).
    #[arg(allow_hyphen_values = true)]
    pub d: String,
    #[arg(long, default_value_t = 10_000)]
    pub qmax: u64,
    #[arg(long, default_value_t = 1)]
    pub stages: usize,
    /// X of the last stage; earlier stages use equal fractions of it.
    #[arg(long, default_value_t = 1e4f64.ln())]
    pub x_short: f64,
    /// Fraction kept after each stage.
    #[arg(long, default_value_t = 0.01)]
    pub keep: f64,
    /// Lineup primes: "auto", "none", or a comma-separated list.
    #[arg(long, default_value = "none")]
    pub lineup: String,
    /// Also require chi_{qd}(-1) = 1.
    #[arg(long)]
    pub parity: bool,
    #[arg(long, default_value_t = 50)]
    pub top: usize,
    /// Resume from / save progress to this file.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeArgs {
    #[arg(allow_hyphen_values = true)]
    pub d: String,
    #[arg(long = "P", default_value_t = 50)]
    pub p: u64,
    #[arg(long = "Q", default_value_t = 50)]
    pub q: u64,
    /// Scale exponent M of the lattice entries.
    #[arg(long = "M", default_value_t = 24)]
    pub m: u32,
    /// LLL parameter as "num/den".
    #[arg(long, default_value = "99/100")]
    pub delta: String,
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    /// Also write the reduced basis (one row per line).
    #[arg(long)]
    pub reduced: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpArgs {
    #[arg(allow_hyphen_values = true)]
    pub d: String,
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    pub q: String,
    #[arg(long = "X", default_value_t = 3.5)]
    pub x: f64,
    /// Sinc powers 1..=k serve as test functions.
    #[arg(long, default_value_t = 4)]
    pub k: u32,
    #[arg(long = "T", default_value_t = 4.0)]
    pub t: f64,
    #[arg(long = "V", default_value_t = 40)]
    pub v: usize,
    #[arg(long, default_value_t = 0)]
    pub int_bins: usize,
    /// Comma-separated both|lower|upper per test function (default: both).
    #[arg(long)]
    pub directions: Option<String>,
    #[arg(long, default_value_t = sqfree::lp::DEFAULT_NODE_BUDGET)]
    pub node_budget: usize,
    /// Also write the program in LP format.
    #[arg(long)]
    pub export: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmtArgs {
    #[command(subcommand)]
    pub op: RmtOp,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleArg {
    Usp,
    U,
    So,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum RmtOp {
    /// P(theta_1 > s) by Monte Carlo.
    GapProb {
        #[arg(long, value_enum)]
        ensemble: EnsembleArg,
        #[arg(long = "N")]
        n: usize,
        #[arg(long)]
        s: f64,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// USp(2N) gap probabilities against the two-sided bounds, as CSV.
    Sandwich {
        #[arg(long = "N", value_delimiter = ',', default_value = "1,2,3,4")]
        n: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        points: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Normalized maximum of M gap statistics.
    MaxGap {
        #[arg(long, value_enum)]
        ensemble: EnsembleArg,
        #[arg(long = "N")]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = 30)]
        trials: usize,
        #[arg(long, default_value_t = sqfree::rmt::DEFAULT_M_CAP)]
        m_cap: u64,
        #[arg(long)]
        no_shortcut: bool,
        #[arg(long)]
        all_spacings: bool,
    },
    /// U(2N+1) against SO(2N+2) x USp(2N).
    Factorization {
        #[arg(long = "N")]
        n: usize,
        #[arg(long)]
        s: f64,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
    },
    /// Tail frequencies of the random prime model.
    PrimeModel {
        #[arg(long = "X", default_value_t = 1e4f64.ln())]
        x: f64,
        #[arg(long, value_delimiter = ',', default_value = "20,50,100")]
        n: Vec<u64>,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
    },
    /// U(N) gap probability P(theta_1 > 2s) beside the asymptotic model, as CSV.
    UCurve {
        #[arg(long = "N")]
        n: usize,
        #[arg(long, default_value_t = 0.05)]
        s_from: f64,
        #[arg(long, default_value_t = 0.8)]
        s_to: f64,
        #[arg(long, default_value_t = 16)]
        points: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0.0)]
        c0: f64,
    },
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaArgs {
    #[arg(allow_hyphen_values = true)]
    pub d: String,
    #[arg(long, default_value_t = 1.0)]
    pub lo: f64,
    /// Upper end of the grid (default 2 sqrt|d|, at most 400).
    #[arg(long)]
    pub hi: Option<f64>,
    #[arg(long, default_value_t = 64)]
    pub points: usize,
    #[arg(long, default_value_t = 1 << 24)]
    pub terms_budget: u64,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveArgs {
    #[arg(allow_hyphen_values = true)]
    pub d: String,
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    pub q: String,
    #[command(flatten)]
    pub family: FamilyOpts,
    #[arg(long, default_value_t = 1.0)]
    pub x_from: f64,
    #[arg(long, default_value_t = 12.0)]
    pub x_to: f64,
    #[arg(long, default_value_t = 23)]
    pub points: usize,
}

impl RunConfig {
    /// sha256 of the JSON form without output locations, first 16 hex digits.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.global.out = None;
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&c).expect("config serializes"));
        h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
