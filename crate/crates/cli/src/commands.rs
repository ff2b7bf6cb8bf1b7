use std::path::{Path, PathBuf};
use std::time::Instant;

use eklab::census::{dcount_many, discrepancy_census, enumerate_ds, hypothesis_sums, progression_error, DCountReport, DiscrepancyCensus, HypothesisSums};
use eklab::factor::factorize;
use eklab::model::{model_moments, sample_model, WindowSummary};
use eklab::sample::PowerSums;
use eklab::stats::{histogram, ks_distance, Ecdf, HistogramBin};
use eklab::{build_window, ArithPoint, MomentReport, Population, Sieve, WindowOverrides};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::analysis::{self, ResolvedConfig, SampleReport};
use crate::args::{DcountArgs, EkhistArgs, EqerrorArgs, HypothesesArgs, MomentsArgs, SampleModelArgs, SieveArgs};
use crate::error::{CliError, CliResult};
use crate::output::{emit_bytes, emit_with, json_bytes, manifest_beside, OutputDigest, RunManifest, Target};

/// What every subcommand needs to finish its manifest.
pub struct Invocation<'a> {
    pub argv: &'a [String],
    pub manifest: Option<&'a Path>,
    pub started: Instant,
}

impl Invocation<'_> {
    fn finish(&self, name: &str, params: serde_json::Value, target: &Target, outputs: Vec<OutputDigest>) -> CliResult<()> {
        let mut m = RunManifest::new(name, self.argv, params, analysis::segment_size()?, self.started);
        m.outputs = outputs;
        let path = self.manifest.map(Path::to_path_buf).or_else(|| manifest_beside(target));
        m.write(path.as_deref())
    }
}

pub const SIEVE_HEADER: &str = "n,sigma,phi,tau,omega,lpf,lpf_sq_divides\n";

pub fn sieve(a: &SieveArgs, inv: &Invocation) -> CliResult<()> {
    if a.lo < 2 {
        return Err(CliError::param("lo", format!("must be at least 2, got {}", a.lo)));
    }
    if a.hi < a.lo {
        return Err(CliError::param("hi", format!("must be at least --lo = {}, got {}", a.lo, a.hi)));
    }
    if a.hi >= 1 << 63 {
        return Err(CliError::param("hi", "must be below 2^63"));
    }
    let seg = analysis::segment_size()?;
    let sieve = Sieve::new(a.hi + 1, seg)?;
    let segments = sieve.segments(a.lo, a.hi + 1);
    let target = Target::from_option(a.out.as_deref());
    let label = target.label();
    let digest = emit_with(&target, |w| {
        w.write_all(SIEVE_HEADER.as_bytes()).map_err(|e| CliError::io(&label, e))?;
        for batch in segments.chunks(rayon::current_num_threads().max(1)) {
            let parts: Vec<CliResult<String>> = batch
                .par_iter()
                .map(|&(lo, hi)| {
                    let block = sieve.block(lo, hi)?;
                    let mut s = String::with_capacity(block.len() * 32);
                    for n in lo..hi {
                        let p = block.point(n)?;
                        s.push_str(&format!(
                            "{},{},{},{},{},{},{}\n",
                            n, p.sigma, p.phi, p.tau, p.omega, p.lpf, p.lpf_sq_divides as u8
                        ));
                    }
                    Ok(s)
                })
                .collect();
            for part in parts {
                w.write_all(part?.as_bytes()).map_err(|e| CliError::io(&label, e))?;
            }
        }
        Ok(())
    })?;
    inv.finish("sieve", json!({ "lo": a.lo, "hi": a.hi }), &target, vec![digest])
}

/// The summary JSON sits beside the histogram CSV.
fn summary_path(out: &Path) -> PathBuf {
    if out.extension().is_some_and(|e| e == "json") {
        let mut s = out.as_os_str().to_owned();
        s.push(".summary.json");
        PathBuf::from(s)
    } else {
        out.with_extension("json")
    }
}

#[derive(Serialize)]
struct WithHistogram<'a> {
    #[serde(flatten)]
    report: &'a SampleReport,
    histogram: &'a [HistogramBin],
}

pub fn ekhist(a: &EkhistArgs, inv: &Invocation) -> CliResult<()> {
    if a.bins == 0 {
        return Err(CliError::param("bins", "need at least one bin"));
    }
    let cfg = analysis::config(a.x, a.function, a.population, &a.window)?;
    let mut outputs = Vec::new();
    let summary = match &a.dump {
        Some(path) => {
            let mut summary = None;
            outputs.push(emit_with(&Target::File(path.clone()), |w| {
                summary = Some(analysis::sample(&cfg, Some(w))?);
                Ok(())
            })?);
            summary.expect("dump writer ran")
        }
        None => analysis::sample(&cfg, None)?,
    };
    let result = analysis::analyse(&cfg, &summary, a.score.into(), a.kmax, a.bins, a.range)?;
    let target = Target::from_option(a.out.as_deref());
    match &target {
        Target::File(path) => {
            outputs.push(emit_bytes(&target, &analysis::histogram_csv(&result.histogram))?);
            outputs.push(emit_bytes(&Target::File(summary_path(path)), &json_bytes(&result.report))?);
        }
        Target::Stdout => {
            let body = WithHistogram {
                report: &result.report,
                histogram: &result.histogram,
            };
            outputs.push(emit_bytes(&target, &json_bytes(&body))?);
        }
    }
    let params = json!({
        "config": ResolvedConfig::of(&cfg, &a.window),
        "score": a.score,
        "bins": a.bins,
        "range": a.range,
        "kmax": a.kmax,
    });
    inv.finish("ekhist", params, &target, outputs)
}

#[derive(Debug, Serialize)]
pub struct MomentsOutput {
    pub x: u64,
    #[serde(rename = "fn")]
    pub function: String,
    pub smooth_cutoff: f64,
    pub omega_count: u64,
    pub window: WindowSummary,
    pub moments: MomentReport,
}

pub fn moments(a: &MomentsArgs, inv: &Invocation) -> CliResult<()> {
    let cfg = analysis::config(a.x, a.function, Population::OmegaSpace, &a.window)?;
    // validate before the expensive pass
    model_moments(&cfg.window, a.kmax)?;
    let summary = analysis::sample(&cfg, None)?;
    let w = &cfg.window;
    let empirical = summary.omega.window_power_sums.standardized_moments(w.mu, w.sigma(), a.kmax)?[1..].to_vec();
    let out = MomentsOutput {
        x: cfg.x,
        function: cfg.spec.to_string(),
        smooth_cutoff: cfg.smooth,
        omega_count: summary.omega_count(),
        window: w.summary(),
        moments: MomentReport::new(empirical, model_moments(w, a.kmax)?),
    };
    let target = Target::from_option(a.out.as_deref());
    let digest = emit_bytes(&target, &json_bytes(&out))?;
    let params = json!({ "config": ResolvedConfig::of(&cfg, &a.window), "kmax": a.kmax });
    inv.finish("moments", params, &target, vec![digest])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AutoSpec {
    pub k: usize,
    pub cap: u64,
    pub limit: usize,
}

impl Default for AutoSpec {
    fn default() -> Self {
        AutoSpec {
            k: 2,
            cap: 1_000_000,
            limit: 24,
        }
    }
}

pub fn parse_auto(tokens: &[String]) -> CliResult<AutoSpec> {
    let mut spec = AutoSpec::default();
    for tok in tokens.iter().flat_map(|t| t.split_whitespace()) {
        let (key, value) = tok
            .split_once('=')
            .ok_or_else(|| CliError::param("auto", format!("expected key=value, got {tok:?}")))?;
        let bad = |_| CliError::param("auto", format!("bad value in {tok:?}"));
        match key {
            "k" => spec.k = value.parse().map_err(bad)?,
            "cap" => spec.cap = crate::args::parse_scale(value).map_err(|m| CliError::param("auto", m))?,
            "limit" => spec.limit = value.parse().map_err(bad)?,
            _ => return Err(CliError::param("auto", format!("unknown key {key:?} (expected k, cap, limit)"))),
        }
    }
    if spec.k == 0 || spec.limit == 0 {
        return Err(CliError::param("auto", "k and limit must be positive"));
    }
    Ok(spec)
}

#[derive(Debug, Serialize)]
pub struct DcountOutput {
    pub x: u64,
    #[serde(rename = "fn")]
    pub function: String,
    pub smooth_cutoff: f64,
    pub window: WindowSummary,
    pub omega_count: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auto: Option<AutoSpec>,
    /// Size of the full enumerated d-list before spreading.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub enumerated: Option<usize>,
    pub reports: Vec<DCountReport>,
    pub total_discrepancy: f64,
    pub all_identities_hold: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub census: Option<DiscrepancyCensus>,
}

pub fn dcount_output(a: &DcountArgs) -> CliResult<DcountOutput> {
    let cfg = analysis::config(a.x, a.function, Population::OmegaSpace, &a.window)?;
    let seg = analysis::segment_size()?;
    let (ds, auto, enumerated) = match &a.auto {
        Some(tokens) => {
            let spec = parse_auto(tokens)?;
            let list = enumerate_ds(&cfg.window, spec.k, spec.cap)?;
            if list.entries.is_empty() {
                return Err(CliError::param("auto", "no window products below the cap"));
            }
            (list.spread(spec.limit), Some(spec), Some(list.entries.len()))
        }
        None => {
            for &d in &a.d {
                if d < 2 || !factorize(d).is_squarefree() {
                    return Err(CliError::param("d", format!("{d} is not a squarefree integer > 1")));
                }
            }
            (a.d.clone(), None, None)
        }
    };
    let reports = dcount_many(&ds, &cfg, seg)?;
    let census = match auto {
        Some(spec) => Some(discrepancy_census(&cfg, spec.k, spec.cap, seg)?),
        None => None,
    };
    Ok(DcountOutput {
        x: cfg.x,
        function: cfg.spec.to_string(),
        smooth_cutoff: cfg.smooth,
        window: cfg.window.summary(),
        omega_count: reports.first().map_or(0, |r| r.omega_count),
        auto,
        enumerated,
        total_discrepancy: reports.iter().map(|r| r.discrepancy).sum(),
        all_identities_hold: reports.iter().all(|r| r.identity_holds),
        reports,
        census,
    })
}

pub fn dcount(a: &DcountArgs, inv: &Invocation) -> CliResult<()> {
    let out = dcount_output(a)?;
    let target = Target::from_option(a.out.as_deref());
    let digest = emit_bytes(&target, &json_bytes(&out))?;
    let params = json!({ "x": a.x, "fn": a.function.to_string(), "window": a.window, "d": out.reports.iter().map(|r| r.d).collect::<Vec<_>>() });
    inv.finish("dcount", params, &target, vec![digest])?;
    if let Some(r) = out.reports.iter().find(|r| !r.identity_holds) {
        return Err(CliError::Assertion(format!("d = {}: lhs = {} but rhs = {}", r.d, r.lhs, r.rhs)));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct EqerrorOutput {
    pub q: u64,
    pub t_max: u64,
    pub phi_q: u64,
    pub e: f64,
}

pub fn eqerror(a: &EqerrorArgs, inv: &Invocation) -> CliResult<()> {
    let e = progression_error(a.t, a.q)?;
    let out = EqerrorOutput {
        q: a.q,
        t_max: a.t,
        phi_q: ArithPoint::of(a.q)?.phi,
        e,
    };
    let target = Target::from_option(a.out.as_deref());
    let digest = emit_bytes(&target, &json_bytes(&out))?;
    inv.finish("eqerror", json!({ "q": a.q, "T": a.t }), &target, vec![digest])
}

#[derive(Debug, Serialize)]
pub struct HypothesesOutput {
    #[serde(flatten)]
    pub sums: HypothesisSums,
    pub window: WindowSummary,
    pub sum29_over_log2_x: f64,
    pub sum30_over_log2_x: f64,
}

pub fn hypotheses_output(function: &eklab::FnSpec, x: u64, k: usize, cap: u64, w: &crate::args::WindowArgs) -> CliResult<HypothesesOutput> {
    let window = build_window(x as f64, WindowOverrides { y: w.y, z: w.z }, analysis::floors(w))?;
    let sums = hypothesis_sums(function, x, k, &window, cap, analysis::segment_size()?)?;
    Ok(HypothesesOutput {
        sum29_over_log2_x: sums.sum29 / sums.log2_x,
        sum30_over_log2_x: sums.sum30 / sums.log2_x,
        window: window.summary(),
        sums,
    })
}

pub fn hypotheses(a: &HypothesesArgs, inv: &Invocation) -> CliResult<()> {
    let out = hypotheses_output(&a.function, a.x, a.k, a.cap, &a.window)?;
    let target = Target::from_option(a.out.as_deref());
    let digest = emit_bytes(&target, &json_bytes(&out))?;
    let params = json!({ "x": a.x, "fn": a.function.to_string(), "k": a.k, "cap": a.cap, "window": a.window });
    inv.finish("hypotheses", params, &target, vec![digest])
}

#[derive(Debug, Serialize)]
pub struct SampleModelOutput {
    pub window: WindowSummary,
    pub trials: u64,
    pub seed: u64,
    pub sample_mean: f64,
    pub sample_variance: f64,
    pub ks_distance: f64,
    /// Sample moments of the standardized draws against the exact model.
    pub moments: MomentReport,
    pub histogram: Vec<HistogramBin>,
}

pub const MAX_TRIALS: u64 = 100_000_000;

pub fn sample_model_output(a: &SampleModelArgs) -> CliResult<SampleModelOutput> {
    if a.trials == 0 || a.trials > MAX_TRIALS {
        return Err(CliError::param("trials", format!("must lie in 1..={MAX_TRIALS}, got {}", a.trials)));
    }
    if a.bins == 0 {
        return Err(CliError::param("bins", "need at least one bin"));
    }
    let w = build_window(a.x as f64, WindowOverrides { y: a.window.y, z: a.window.z }, analysis::floors(&a.window))?;
    let model = model_moments(&w, a.kmax)?;
    let draws = sample_model(&w, a.trials as usize, a.seed)?;
    let mut sums = PowerSums::default();
    let mut counts: Vec<u64> = Vec::new();
    for &v in &draws {
        sums.add(v);
        if counts.len() <= v as usize {
            counts.resize(v as usize + 1, 0);
        }
        counts[v as usize] += 1;
    }
    let (mu, sigma) = (w.mu, w.sigma());
    let ecdf = Ecdf::from_weighted(counts.iter().enumerate().map(|(v, &c)| ((v as f64 - mu) / sigma, c)))?;
    let n = a.trials as f64;
    let mean = sums.sums[1] as f64 / n;
    Ok(SampleModelOutput {
        window: w.summary(),
        trials: a.trials,
        seed: a.seed,
        sample_mean: mean,
        sample_variance: sums.sums[2] as f64 / n - mean * mean,
        ks_distance: ks_distance(&ecdf),
        moments: MomentReport::new(sums.standardized_moments(mu, sigma, a.kmax)?[1..].to_vec(), model),
        histogram: histogram(&ecdf, a.bins, a.range.lo, a.range.hi)?,
    })
}

pub fn sample_model_cmd(a: &SampleModelArgs, inv: &Invocation) -> CliResult<()> {
    let out = sample_model_output(a)?;
    let target = Target::from_option(a.out.as_deref());
    let digest = emit_bytes(&target, &json_bytes(&out))?;
    let params = json!({ "x": a.x, "trials": a.trials, "seed": a.seed, "kmax": a.kmax, "bins": a.bins, "range": a.range, "window": a.window });
    inv.finish("sample-model", params, &target, vec![digest])
}
