use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use eklab::sample::ScoreKind;
use eklab::{FnSpec, Population};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "eklab", version, about = "Erdős–Kac experiments for s(n) and related arithmetic functions")]
pub struct Cli {
    /// Worker threads [default: available parallelism]
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Manifest path [default: <out>.manifest.json, or stderr when writing to stdout]
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate σ, φ, τ, ω and the largest prime factor over [lo, hi]
    Sieve(SieveArgs),
    /// Histogram of standardized ω(f(n)) scores against the Gaussian
    Ekhist(EkhistArgs),
    /// Empirical vs model vs Gaussian moments of the window count
    Moments(MomentsArgs),
    /// Count n in Ω with d | f(n), directly and through n = mP
    Dcount(DcountArgs),
    /// Maximal prime-counting error in progressions mod q up to T
    Eqerror(EqerrorArgs),
    /// Evaluate the small-prime and gcd hypothesis sums
    Hypotheses(HypothesesArgs),
    /// Monte-Carlo draws of the independent Bernoulli model
    SampleModel(SampleModelArgs),
    /// Run the standard tables for several functions into a bundle directory
    Report(ReportArgs),
}

/// Window and smoothness cutoffs shared by the sampling commands.
#[derive(Debug, Clone, Copy, Args, Serialize)]
pub struct WindowArgs {
    /// Lower window cutoff y [default: (log x)^2]
    #[arg(long)]
    pub y: Option<f64>,
    /// Upper window cutoff z [default: x^(1/max(log3 x, l3-floor))]
    #[arg(long)]
    pub z: Option<f64>,
    #[arg(long = "l3-floor", default_value_t = 1.5)]
    pub l3_floor: f64,
    /// Floor for log4 x in the smoothness cutoff L = x^(1/max(log4 x, l4-floor))
    #[arg(long = "l4-floor", default_value_t = 3.0)]
    pub l4_floor: f64,
}

impl Default for WindowArgs {
    fn default() -> Self {
        WindowArgs {
            y: None,
            z: None,
            l3_floor: 1.5,
            l4_floor: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreArg {
    /// (ω − log log x)/sqrt(log log x)
    Loglog,
    /// (ω − μ)/σ with the window's μ, σ
    Window,
    /// (X − μ)/σ, the window count alone
    WindowCount,
}

impl From<ScoreArg> for ScoreKind {
    fn from(s: ScoreArg) -> Self {
        match s {
            ScoreArg::Loglog => ScoreKind::LogLog,
            ScoreArg::Window => ScoreKind::Window,
            ScoreArg::WindowCount => ScoreKind::WindowCount,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Span {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Args)]
pub struct SieveArgs {
    #[arg(long, value_parser = parse_scale)]
    pub lo: u64,
    /// Inclusive upper end
    #[arg(long, value_parser = parse_scale)]
    pub hi: u64,
    /// CSV destination [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EkhistArgs {
    #[arg(long, value_parser = parse_scale)]
    pub x: u64,
    #[arg(long = "fn", value_parser = parse_fn, default_value = "s")]
    pub function: FnSpec,
    /// omega (the restricted space Ω) or all (every 1 < n <= x)
    #[arg(long, value_parser = parse_population, default_value = "omega")]
    pub population: Population,
    #[arg(long, value_enum, default_value = "loglog")]
    pub score: ScoreArg,
    #[arg(long, default_value_t = 40)]
    pub bins: usize,
    /// Histogram range as lo,hi
    #[arg(long, value_parser = parse_span, default_value = "-4,4", allow_hyphen_values = true)]
    pub range: Span,
    #[arg(long, default_value_t = 4)]
    pub kmax: usize,
    #[command(flatten)]
    pub window: WindowArgs,
    /// Write every per-n record to this CSV
    #[arg(long)]
    pub dump: Option<PathBuf>,
    /// Histogram CSV; the JSON summary goes beside it with a .json extension
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MomentsArgs {
    #[arg(long, value_parser = parse_scale)]
    pub x: u64,
    #[arg(long, default_value_t = 4)]
    pub kmax: usize,
    #[arg(long = "fn", value_parser = parse_fn, default_value = "s")]
    pub function: FnSpec,
    #[command(flatten)]
    pub window: WindowArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("moduli").required(true).args(["d", "auto"])))]
pub struct DcountArgs {
    #[arg(long, value_parser = parse_scale)]
    pub x: u64,
    /// Comma-separated squarefree moduli
    #[arg(long, value_delimiter = ',', value_parser = parse_scale)]
    pub d: Vec<u64>,
    /// Enumerate products of window primes: k=K,cap=C,limit=N
    #[arg(long, num_args = 0.., value_delimiter = ',')]
    pub auto: Option<Vec<String>>,
    #[arg(long = "fn", value_parser = parse_fn, default_value = "s")]
    pub function: FnSpec,
    #[command(flatten)]
    pub window: WindowArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EqerrorArgs {
    #[arg(long, value_parser = parse_scale)]
    pub q: u64,
    #[arg(long = "T", value_parser = parse_scale)]
    pub t: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HypothesesArgs {
    #[arg(long = "fn", value_parser = parse_fn, default_value = "s")]
    pub function: FnSpec,
    #[arg(long, value_parser = parse_scale)]
    pub x: u64,
    /// Largest ω(d) in the gcd sum
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Largest d in the gcd sum
    #[arg(long, value_parser = parse_scale, default_value = "1000000")]
    pub cap: u64,
    #[command(flatten)]
    pub window: WindowArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleModelArgs {
    /// Scale used for the default window cutoffs
    #[arg(long, value_parser = parse_scale, default_value = "10000000")]
    pub x: u64,
    #[arg(long, value_parser = parse_scale, default_value = "100000")]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub kmax: usize,
    #[arg(long, default_value_t = 40)]
    pub bins: usize,
    #[arg(long, value_parser = parse_span, default_value = "-4,4", allow_hyphen_values = true)]
    pub range: Span,
    #[command(flatten)]
    pub window: WindowArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Scale; 1e5, 1e6 and 1e7 are the standard presets
    #[arg(long, value_parser = parse_scale, default_value = "100000")]
    pub x: u64,
    /// Functions to tabulate
    #[arg(long = "fns", value_delimiter = ',', value_parser = parse_fn, default_value = "s,beta,cototient,n+tau")]
    pub functions: Vec<FnSpec>,
    #[arg(long, value_parser = parse_population, default_value = "omega")]
    pub population: Population,
    #[arg(long, value_enum, default_value = "loglog")]
    pub score: ScoreArg,
    #[arg(long, default_value_t = 40)]
    pub bins: usize,
    #[arg(long, value_parser = parse_span, default_value = "-4,4", allow_hyphen_values = true)]
    pub range: Span,
    #[arg(long, default_value_t = 4)]
    pub kmax: usize,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, value_parser = parse_scale, default_value = "1000000")]
    pub cap: u64,
    #[command(flatten)]
    pub window: WindowArgs,
    /// Bundle directory
    #[arg(long)]
    pub out: PathBuf,
}

/// Integers written plainly, with underscores, or as `1e7` / `10^7`.
pub fn parse_scale(s: &str) -> Result<u64, String> {
    let t = s.trim().replace('_', "");
    if let Ok(v) = t.parse::<u64>() {
        return Ok(v);
    }
    let pow = |base: &str, exp: &str| -> Option<u64> {
        let b: u64 = base.parse().ok()?;
        let e: u32 = exp.parse().ok()?;
        b.checked_mul(10u64.checked_pow(e)?)
    };
    let split = t.split_once(['e', 'E']).and_then(|(b, e)| pow(b, e));
    let caret = t.strip_prefix("10^").and_then(|e| pow("1", e));
    split.or(caret).ok_or_else(|| format!("expected a non-negative integer such as 1000000 or 1e6, got {s:?}"))
}

pub fn parse_fn(s: &str) -> Result<FnSpec, String> {
    s.parse::<FnSpec>().map_err(|e| e.to_string())
}

pub fn parse_population(s: &str) -> Result<Population, String> {
    s.parse::<Population>().map_err(|e| e.to_string())
}

pub fn parse_span(s: &str) -> Result<Span, String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected lo,hi, got {s:?}"))?;
    let lo: f64 = a.trim().parse().map_err(|_| format!("bad lower end {a:?}"))?;
    let hi: f64 = b.trim().parse().map_err(|_| format!("bad upper end {b:?}"))?;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(format!("need finite lo < hi, got {s:?}"));
    }
    Ok(Span { lo, hi })
}
