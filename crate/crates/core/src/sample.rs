//! The sample space Ω and the per-n records of a run.
//!
//! `n <= x` lies in Ω when it is composite, its largest prime factor `P`
//! exceeds the smoothness cutoff `L`, and `P² ∤ n`; then `n = mP` with
//! `m > 1` and `P ∤ m`. Every `1 < n <= x` produces a record; records are
//! folded into [`SampleSummary`] values, which merge exactly, so a run's
//! result does not depend on how the range was split across workers.

use rayon::prelude::*;
use serde::Serialize;

use crate::arith::{f_value, linear_form, ArithPoint, Family, FnSpec, Sieve, SieveBlock};
use crate::error::{Error, Result};
use crate::factor::factorize;
use crate::model::{floor_real, iterated_log, LogFloors, PrimeWindow, MAX_MOMENT};
use crate::stats::Ecdf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Population {
    /// The restricted space Ω.
    OmegaSpace,
    /// Every `1 < n <= x`.
    AllN,
}

impl std::str::FromStr for Population {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "omega" | "omega-space" => Ok(Population::OmegaSpace),
            "all" | "all-n" => Ok(Population::AllN),
            _ => Err(Error::param("population", format!("expected `omega` or `all`, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SampleConfig {
    pub x: u64,
    pub spec: FnSpec,
    pub window: PrimeWindow,
    /// Smoothness cutoff L: members of Ω have `P⁺(n) > L`.
    pub smooth: f64,
    pub population: Population,
}

impl SampleConfig {
    /// Uses the default `L = x^{1/max(log₄x, l4)}`.
    pub fn new(x: u64, spec: FnSpec, window: PrimeWindow, floors: LogFloors, population: Population) -> Result<Self> {
        if !(floors.l4 >= 2.0) {
            return Err(Error::param("l4_floor", format!("must be >= 2, got {}", floors.l4)));
        }
        let xf = x as f64;
        let l4 = iterated_log(xf, 4);
        // NaN-aware: f64::max ignores a NaN operand
        let smooth = xf.powf(1.0 / l4.max(floors.l4));
        Self::with_smooth(x, spec, window, smooth, population)
    }

    pub fn with_smooth(x: u64, spec: FnSpec, window: PrimeWindow, smooth: f64, population: Population) -> Result<Self> {
        if x < 4 {
            return Err(Error::param("x", format!("need x >= 4, got {x}")));
        }
        if !(smooth > 2.0 && smooth * smooth <= x as f64 * (1.0 + 1e-12)) {
            return Err(Error::param(
                "l4_floor",
                format!("smoothness cutoff L = {smooth} must satisfy 2 < L <= sqrt(x)"),
            ));
        }
        Ok(SampleConfig {
            x,
            spec,
            window,
            smooth,
            population,
        })
    }

    /// `floor(L)`; for a prime P, `P > L ⇔ P > smooth_floor()`.
    pub fn smooth_floor(&self) -> u64 {
        floor_real(self.smooth)
    }

    /// Largest m admitting some prime `P > L` with `mP <= x`.
    pub fn m_max(&self) -> u64 {
        self.x / (self.smooth_floor() + 1)
    }

    /// Centering constant of the headline score, `log log x`.
    pub fn loglog_x(&self) -> f64 {
        iterated_log(self.x as f64, 2)
    }
}

/// Ω membership from sieve data alone.
pub fn in_omega(point: &ArithPoint, cfg: &SampleConfig) -> bool {
    let n = point.n;
    let big_p = point.lpf;
    let composite = n >= 4 && big_p != n;
    let above_m0 = cfg.spec.family != Family::PhiShift || n / big_p > cfg.spec.m0;
    composite && big_p > cfg.smooth_floor() && !point.lpf_sq_divides && above_m0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRecord {
    pub n: u64,
    pub in_omega: bool,
    /// n / P⁺(n)
    pub m: u64,
    /// P⁺(n)
    pub big_p: u64,
    pub f_value: i64,
    /// f(n) = 0; such records carry no counts and are never scored.
    pub degenerate: bool,
    pub omega_f: u32,
    pub omega_prime_f: u32,
    pub x_window: u32,
    pub x_small: u32,
    pub x_large: u32,
    /// `(ω(f(n)) − log log x)/sqrt(log log x)`
    pub score: Option<f64>,
}

/// Builds the record for `n` from its sieve data.
pub fn classify(point: &ArithPoint, cfg: &SampleConfig) -> Result<SampleRecord> {
    let n = point.n;
    if n < 2 || n > cfg.x {
        return Err(Error::domain(format!("n = {n} outside 1 < n <= {}", cfg.x)));
    }
    let member = in_omega(point, cfg);
    let point = if cfg.spec.needs_prime_sums() {
        point.with_prime_sums()
    } else {
        *point
    };
    let f = f_value(&cfg.spec, &point)?;
    let big_p = point.lpf;
    let m = n / big_p;

    if member {
        let lf = linear_form(&cfg.spec, &ArithPoint::of(m)?)?;
        if lf.eval(big_p) != Some(f) {
            return Err(Error::Assertion(format!(
                "{}: f({n}) = {f} but P·a(m) + b(m) = {:?} for m = {m}, P = {big_p}",
                cfg.spec,
                lf.eval(big_p)
            )));
        }
    }

    let mut rec = SampleRecord {
        n,
        in_omega: member,
        m,
        big_p,
        f_value: f,
        degenerate: f == 0,
        omega_f: 0,
        omega_prime_f: 0,
        x_window: 0,
        x_small: 0,
        x_large: 0,
        score: None,
    };
    if f == 0 {
        return Ok(rec);
    }
    let fac = factorize(f.unsigned_abs());
    let y_floor = cfg.window.y_floor();
    for p in fac.primes() {
        if p <= y_floor {
            rec.x_small += 1;
        } else if cfg.window.contains(p) {
            rec.x_window += 1;
        } else {
            rec.x_large += 1;
        }
    }
    rec.omega_f = fac.omega();
    rec.omega_prime_f = fac.omega_prime();
    if rec.x_small + rec.x_window + rec.x_large != rec.omega_f {
        return Err(Error::Assertion(format!("prime-range partition fails at n = {n}")));
    }
    let ll = cfg.loglog_x();
    rec.score = Some((rec.omega_f as f64 - ll) / ll.sqrt());
    Ok(rec)
}

/// Exact power sums `Σ X^j`, `j = 0..=8`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PowerSums {
    pub sums: [u128; MAX_MOMENT + 1],
}

impl PowerSums {
    pub fn add(&mut self, v: u32) {
        let mut pw: u128 = 1;
        for s in self.sums.iter_mut() {
            *s += pw;
            pw *= v as u128;
        }
    }

    pub fn merge(&mut self, other: &PowerSums) {
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            *a += b;
        }
    }

    pub fn count(&self) -> u64 {
        self.sums[0] as u64
    }

    /// `E[((X − μ)/σ)^j]` for `j = 0..=k_max`, by binomial expansion of the
    /// exact power sums.
    pub fn standardized_moments(&self, mu: f64, sigma: f64, k_max: usize) -> Result<Vec<f64>> {
        if k_max > MAX_MOMENT {
            return Err(Error::param("kmax", format!("must be <= {MAX_MOMENT}, got {k_max}")));
        }
        let count = self.sums[0];
        if count == 0 {
            return Err(Error::domain("no scored records in Ω"));
        }
        let raw: Vec<f64> = self.sums.iter().map(|&s| s as f64 / count as f64).collect();
        Ok((0..=k_max)
            .map(|j| {
                let mut binom = 1.0;
                let mut acc = 0.0;
                for i in 0..=j {
                    acc += binom * (-mu).powi((j - i) as i32) * raw[i];
                    binom = binom * (j - i) as f64 / (i + 1) as f64;
                }
                acc / sigma.powi(j as i32)
            })
            .collect())
    }
}

fn add_at(hist: &mut Vec<u64>, i: usize, c: u64) {
    if hist.len() <= i {
        hist.resize(i + 1, 0);
    }
    hist[i] += c;
}

fn merge_hist(a: &mut Vec<u64>, b: &[u64]) {
    for (i, &c) in b.iter().enumerate() {
        add_at(a, i, c);
    }
}

/// Additive statistics of one population.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PopulationStats {
    pub count: u64,
    pub degenerate: u64,
    /// `omega_hist[w]` = number of scored records with ω(f(n)) = w.
    pub omega_hist: Vec<u64>,
    /// Same for the window count X(n).
    pub window_hist: Vec<u64>,
    pub x_small_sum: u64,
    pub x_large_sum: u64,
    /// Σ (ω′(f(n)) − ω(f(n)))
    pub omega_prime_excess: u64,
    #[serde(skip)]
    pub window_power_sums: PowerSums,
}

impl PopulationStats {
    fn push(&mut self, rec: &SampleRecord) {
        self.count += 1;
        if rec.degenerate {
            self.degenerate += 1;
            return;
        }
        add_at(&mut self.omega_hist, rec.omega_f as usize, 1);
        add_at(&mut self.window_hist, rec.x_window as usize, 1);
        self.x_small_sum += rec.x_small as u64;
        self.x_large_sum += rec.x_large as u64;
        self.omega_prime_excess += (rec.omega_prime_f - rec.omega_f) as u64;
        self.window_power_sums.add(rec.x_window);
    }

    pub fn merge(&mut self, other: &PopulationStats) {
        self.count += other.count;
        self.degenerate += other.degenerate;
        merge_hist(&mut self.omega_hist, &other.omega_hist);
        merge_hist(&mut self.window_hist, &other.window_hist);
        self.x_small_sum += other.x_small_sum;
        self.x_large_sum += other.x_large_sum;
        self.omega_prime_excess += other.omega_prime_excess;
        self.window_power_sums.merge(&other.window_power_sums);
    }

    pub fn scored(&self) -> u64 {
        self.count - self.degenerate
    }

    /// Mean of X^(s) over the scored records.
    pub fn small_prime_expectation(&self) -> Result<f64> {
        if self.scored() == 0 {
            return Err(Error::domain("empty population"));
        }
        Ok(self.x_small_sum as f64 / self.scored() as f64)
    }
}

/// Result of a run: both populations, folded over all `1 < n <= x`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SampleSummary {
    pub all: PopulationStats,
    pub omega: PopulationStats,
}

impl SampleSummary {
    pub fn push(&mut self, rec: &SampleRecord) {
        self.all.push(rec);
        if rec.in_omega {
            self.omega.push(rec);
        }
    }

    pub fn merge(&mut self, other: &SampleSummary) {
        self.all.merge(&other.all);
        self.omega.merge(&other.omega);
    }

    pub fn omega_count(&self) -> u64 {
        self.omega.count
    }

    pub fn x_count(&self) -> u64 {
        self.all.count
    }

    pub fn population(&self, which: Population) -> &PopulationStats {
        match which {
            Population::OmegaSpace => &self.omega,
            Population::AllN => &self.all,
        }
    }
}

/// How ω(f(n)) or X(n) is turned into a score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    /// `(ω(f(n)) − log log x)/sqrt(log log x)`
    LogLog,
    /// `(ω(f(n)) − μ)/σ` with the window's μ, σ
    Window,
    /// `(X(n) − μ)/σ`
    WindowCount,
}

/// Empirical distribution of the chosen score over a population.
pub fn score_ecdf(stats: &PopulationStats, cfg: &SampleConfig, kind: ScoreKind) -> Result<Ecdf> {
    let (center, scale, hist) = match kind {
        ScoreKind::LogLog => {
            let ll = cfg.loglog_x();
            (ll, ll.sqrt(), &stats.omega_hist)
        }
        ScoreKind::Window => (cfg.window.mu, cfg.window.sigma(), &stats.omega_hist),
        ScoreKind::WindowCount => (cfg.window.mu, cfg.window.sigma(), &stats.window_hist),
    };
    Ecdf::from_weighted(
        hist.iter()
            .enumerate()
            .map(|(v, &c)| ((v as f64 - center) / scale, c)),
    )
}

/// `E[X̃^j]` for `j = 1..=k_max` over the in-Ω records.
pub fn empirical_moments(records: &[SampleRecord], window: &PrimeWindow, k_max: usize) -> Result<Vec<f64>> {
    let mut sums = PowerSums::default();
    for r in records.iter().filter(|r| r.in_omega && !r.degenerate) {
        sums.add(r.x_window);
    }
    Ok(sums.standardized_moments(window.mu, window.sigma(), k_max)?[1..].to_vec())
}

/// Mean over in-Ω records of `#{p <= y : p | f(n)}`, recomputed from the
/// stored values.
pub fn small_prime_expectation(records: &[SampleRecord], y: f64) -> Result<f64> {
    let members: Vec<&SampleRecord> = records.iter().filter(|r| r.in_omega && !r.degenerate).collect();
    if members.is_empty() {
        return Err(Error::domain("Ω is empty"));
    }
    let total: u64 = members
        .iter()
        .map(|r| factorize(r.f_value.unsigned_abs()).primes().filter(|&p| (p as f64) <= y).count() as u64)
        .sum();
    Ok(total as f64 / members.len() as f64)
}

/// Tuning for [`run_sample`].
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub segment_size: u64,
    /// Segments processed concurrently per batch; bounds memory, not results.
    pub batch: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            segment_size: crate::arith::DEFAULT_SEGMENT_SIZE,
            batch: rayon::current_num_threads().max(1),
        }
    }
}

fn process_block(block: &SieveBlock, cfg: &SampleConfig, keep: bool) -> Result<(SampleSummary, Vec<SampleRecord>)> {
    let mut summary = SampleSummary::default();
    let mut kept = Vec::new();
    for n in block.lo..block.hi {
        let rec = classify(&block.point(n)?, cfg)?;
        summary.push(&rec);
        if keep {
            kept.push(rec);
        }
    }
    Ok((summary, kept))
}

/// Processes every `1 < n <= x` on the current rayon pool. `sink`, when
/// given, receives all records in increasing n.
pub fn run_sample(
    cfg: &SampleConfig,
    opts: RunOptions,
    mut sink: Option<&mut dyn FnMut(&SampleRecord) -> Result<()>>,
) -> Result<SampleSummary> {
    let sieve = Sieve::new(cfg.x + 1, opts.segment_size)?;
    let segments = sieve.segments(2, cfg.x + 1);
    let keep = sink.is_some();
    let mut total = SampleSummary::default();
    for batch in segments.chunks(opts.batch.max(1)) {
        let parts: Vec<Result<(SampleSummary, Vec<SampleRecord>)>> = batch
            .par_iter()
            .map(|&(lo, hi)| process_block(&sieve.block(lo, hi)?, cfg, keep))
            .collect();
        for part in parts {
            let (summary, records) = part?;
            total.merge(&summary);
            if let Some(sink) = sink.as_mut() {
                for r in &records {
                    sink(r)?;
                }
            }
        }
    }
    Ok(total)
}

/// Runs the sample and keeps every record in memory (small x only).
pub fn collect_records(cfg: &SampleConfig, opts: RunOptions) -> Result<(SampleSummary, Vec<SampleRecord>)> {
    let mut records = Vec::new();
    let mut sink = |r: &SampleRecord| {
        records.push(r.clone());
        Ok(())
    };
    let summary = run_sample(cfg, opts, Some(&mut sink))?;
    Ok((summary, records))
}
