//! Computations shared by several subcommands and the report bundle.

use std::io::Write;

use eklab::arith::segment_size_from_env;
use eklab::model::{iterated_log, model_moments, WindowSummary};
use eklab::sample::{score_ecdf, ScoreKind};
use eklab::stats::{histogram, ks_distance, HistogramBin};
use eklab::{build_window, run_sample, FnSpec, LogFloors, MomentReport, Population, RunOptions, SampleConfig, SampleRecord, SampleSummary, WindowOverrides};
use serde::Serialize;

use crate::args::{Span, WindowArgs};
use crate::error::{CliError, CliResult};
use crate::output::csv_float;

pub fn segment_size() -> CliResult<u64> {
    segment_size_from_env().map_err(|e| CliError::env(eklab::arith::SEGMENT_SIZE_ENV, e.to_string()))
}

pub fn floors(w: &WindowArgs) -> LogFloors {
    LogFloors {
        l3: w.l3_floor,
        l4: w.l4_floor,
    }
}

pub fn config(x: u64, spec: FnSpec, population: Population, w: &WindowArgs) -> CliResult<SampleConfig> {
    let window = build_window(x as f64, WindowOverrides { y: w.y, z: w.z }, floors(w))?;
    Ok(SampleConfig::new(x, spec, window, floors(w), population)?)
}

/// Resolved parameters as recorded in manifests.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConfig {
    pub x: u64,
    #[serde(rename = "fn")]
    pub function: String,
    pub population: Population,
    pub y: f64,
    pub z: f64,
    pub smooth_cutoff: f64,
    pub l3_floor: f64,
    pub l4_floor: f64,
    pub window_primes: usize,
}

impl ResolvedConfig {
    pub fn of(cfg: &SampleConfig, w: &WindowArgs) -> Self {
        ResolvedConfig {
            x: cfg.x,
            function: cfg.spec.to_string(),
            population: cfg.population,
            y: cfg.window.y,
            z: cfg.window.z,
            smooth_cutoff: cfg.smooth,
            l3_floor: w.l3_floor,
            l4_floor: w.l4_floor,
            window_primes: cfg.window.primes.len(),
        }
    }
}

pub const DUMP_HEADER: &str = "n,in_omega,m,big_p,f_value,degenerate,omega_f,omega_prime_f,x_window,x_small,x_large,score\n";

fn dump_row(r: &SampleRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}\n",
        r.n,
        r.in_omega as u8,
        r.m,
        r.big_p,
        r.f_value,
        r.degenerate as u8,
        r.omega_f,
        r.omega_prime_f,
        r.x_window,
        r.x_small,
        r.x_large,
        r.score.map(csv_float).unwrap_or_default()
    )
}

/// Runs the sample over `1 < n <= x`, optionally dumping every record.
pub fn sample(cfg: &SampleConfig, dump: Option<&mut dyn Write>) -> CliResult<SampleSummary> {
    let opts = RunOptions {
        segment_size: segment_size()?,
        ..RunOptions::default()
    };
    match dump {
        None => Ok(run_sample(cfg, opts, None)?),
        Some(w) => {
            let io = |e: std::io::Error| eklab::Error::Resource(format!("writing record dump: {e}"));
            w.write_all(DUMP_HEADER.as_bytes()).map_err(io)?;
            let mut sink = |r: &SampleRecord| w.write_all(dump_row(r).as_bytes()).map_err(io);
            Ok(run_sample(cfg, opts, Some(&mut sink))?)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KsTable {
    pub loglog: f64,
    pub window: f64,
    pub window_count: f64,
}

/// JSON summary of one sampling run.
#[derive(Debug, Clone, Serialize)]
pub struct SampleReport {
    pub x: u64,
    #[serde(rename = "fn")]
    pub function: String,
    pub population: Population,
    pub score: ScoreKind,
    pub smooth_cutoff: f64,
    pub loglog_x: f64,
    pub log3_x: f64,
    pub log4_x: f64,
    pub window: WindowSummary,
    pub mu: f64,
    pub sigma2: f64,
    pub x_count: u64,
    pub omega_count: u64,
    /// #Ω / x
    pub omega_density: f64,
    /// Scored (non-degenerate) records in the chosen population.
    pub scored: u64,
    pub degenerate: u64,
    /// Mean ω(f(n)) over the chosen population.
    pub mean_omega: f64,
    /// KS distance of the chosen score over the chosen population.
    pub ks_distance: f64,
    pub ks: KsTable,
    /// Moments of the window count over Ω.
    pub moments: MomentReport,
    /// Mean X^(s)(n) over Ω.
    pub small_prime_expectation: f64,
    /// Mean X^(l)(n) over Ω.
    pub large_prime_mean: f64,
    /// (1/x) Σ (ω′(f(n)) − ω(f(n))) over every scored n <= x.
    pub omega_prime_excess_per_x: f64,
}

pub struct Analysis {
    pub report: SampleReport,
    pub histogram: Vec<HistogramBin>,
}

pub fn analyse(cfg: &SampleConfig, summary: &SampleSummary, score: ScoreKind, kmax: usize, bins: usize, range: Span) -> CliResult<Analysis> {
    let stats = summary.population(cfg.population);
    if stats.scored() == 0 {
        return Err(CliError::param("x", "no scored records in the chosen population"));
    }
    let ks_of = |kind| -> CliResult<f64> { Ok(ks_distance(&score_ecdf(stats, cfg, kind)?)) };
    let ks = KsTable {
        loglog: ks_of(ScoreKind::LogLog)?,
        window: ks_of(ScoreKind::Window)?,
        window_count: ks_of(ScoreKind::WindowCount)?,
    };
    let chosen = score_ecdf(stats, cfg, score)?;
    let hist = histogram(&chosen, bins, range.lo, range.hi)?;

    let w = &cfg.window;
    let empirical = summary.omega.window_power_sums.standardized_moments(w.mu, w.sigma(), kmax)?[1..].to_vec();
    let moments = MomentReport::new(empirical, model_moments(w, kmax)?);

    let omega_sum: u64 = stats.omega_hist.iter().enumerate().map(|(v, &c)| v as u64 * c).sum();
    let xf = cfg.x as f64;
    let report = SampleReport {
        x: cfg.x,
        function: cfg.spec.to_string(),
        population: cfg.population,
        score,
        smooth_cutoff: cfg.smooth,
        loglog_x: iterated_log(xf, 2),
        log3_x: iterated_log(xf, 3),
        log4_x: iterated_log(xf, 4),
        window: w.summary(),
        mu: w.mu,
        sigma2: w.sigma2,
        x_count: summary.x_count(),
        omega_count: summary.omega_count(),
        omega_density: summary.omega_count() as f64 / xf,
        scored: stats.scored(),
        degenerate: stats.degenerate,
        mean_omega: omega_sum as f64 / stats.scored() as f64,
        ks_distance: ks_distance(&chosen),
        ks,
        moments,
        small_prime_expectation: summary.omega.small_prime_expectation()?,
        large_prime_mean: summary.omega.x_large_sum as f64 / summary.omega.scored() as f64,
        omega_prime_excess_per_x: summary.all.omega_prime_excess as f64 / xf,
    };
    Ok(Analysis { report, histogram: hist })
}

pub const HISTOGRAM_HEADER: &str = "bin_lo,bin_hi,count,normal_mass\n";

pub fn histogram_csv(bins: &[HistogramBin]) -> Vec<u8> {
    let mut s = String::from(HISTOGRAM_HEADER);
    for b in bins {
        s.push_str(&format!(
            "{},{},{},{}\n",
            csv_float(b.bin_lo),
            csv_float(b.bin_hi),
            b.count,
            csv_float(b.normal_mass)
        ));
    }
    s.into_bytes()
}

/// Gnuplot script drawing the in-range bins as a density against φ(u).
pub fn gnuplot_script(csv_name: &str, title: &str, bins: &[HistogramBin], total: u64) -> String {
    let inner = bins.len().saturating_sub(2);
    format!(
        "# histogram of standardized scores against the standard normal density\n\
         set datafile separator ','\n\
         set terminal pngcairo size 900,600\n\
         set output '{stem}.png'\n\
         set title '{title}'\n\
         set xlabel 'standardized score'\n\
         set ylabel 'density'\n\
         set style fill transparent solid 0.5\n\
         total = {total}\n\
         phi(u) = exp(-u*u/2) / sqrt(2*pi)\n\
         plot '{csv_name}' skip 2 every ::0::{last} using (($1+$2)/2):($3/(total*($2-$1))):($2-$1) with boxes title 'empirical', \\\n\
         \x20    phi(x) with lines lw 2 title 'N(0,1)'\n",
        stem = csv_name.trim_end_matches(".csv"),
        last = inner.saturating_sub(1),
    )
}
