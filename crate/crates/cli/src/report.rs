//! One-shot bundle: histogram, moments and hypothesis sums for several
//! functions at one scale.

use std::path::Path;

use eklab::FnSpec;
use serde::Serialize;
use serde_json::json;

use crate::analysis::{self, ResolvedConfig, SampleReport};
use crate::args::ReportArgs;
use crate::commands::{hypotheses_output, Invocation, MomentsOutput};
use crate::error::{CliError, CliResult};
use crate::output::{emit_bytes, json_bytes, OutputDigest, RunManifest, Target};

/// Directory-safe name for a function.
pub fn slug(spec: &FnSpec) -> String {
    spec.to_string().replace('+', "_plus_").replace('-', "_minus_")
}

#[derive(Debug, Serialize)]
struct IndexEntry {
    #[serde(rename = "fn")]
    function: String,
    dir: String,
    omega_count: u64,
    omega_density: f64,
    ks_distance: f64,
    moment_diffs: Vec<f64>,
    small_prime_expectation: f64,
    sum29: f64,
    sum30: f64,
    partial: bool,
}

#[derive(Debug, Serialize)]
struct Index {
    x: u64,
    entries: Vec<IndexEntry>,
}

struct Bundle<'a> {
    root: &'a Path,
    outputs: Vec<OutputDigest>,
}

impl Bundle<'_> {
    fn write(&mut self, rel: &str, bytes: &[u8]) -> CliResult<()> {
        let mut d = emit_bytes(&Target::File(self.root.join(rel)), bytes)?;
        d.path = rel.to_string();
        self.outputs.push(d);
        Ok(())
    }
}

fn one_function(a: &ReportArgs, spec: FnSpec, bundle: &mut Bundle) -> CliResult<(IndexEntry, ResolvedConfig)> {
    let dir = slug(&spec);
    let stage = |s: &str| format!("{spec} {s}");

    let cfg = analysis::config(a.x, spec, a.population, &a.window).map_err(|e| e.in_stage(stage("setup")))?;
    let summary = analysis::sample(&cfg, None).map_err(|e| e.in_stage(stage("ekhist")))?;
    let result = analysis::analyse(&cfg, &summary, a.score.into(), a.kmax, a.bins, a.range).map_err(|e| e.in_stage(stage("ekhist")))?;
    let report: &SampleReport = &result.report;
    bundle.write(&format!("{dir}/histogram.csv"), &analysis::histogram_csv(&result.histogram))?;
    bundle.write(&format!("{dir}/summary.json"), &json_bytes(report))?;
    let moments = MomentsOutput {
        x: cfg.x,
        function: spec.to_string(),
        smooth_cutoff: cfg.smooth,
        omega_count: report.omega_count,
        window: cfg.window.summary(),
        moments: report.moments.clone(),
    };
    bundle.write(&format!("{dir}/moments.json"), &json_bytes(&moments))?;
    let scored = summary.population(cfg.population).scored();
    let title = format!("{spec}, x = {}", a.x);
    bundle.write(&format!("{dir}/plot.gp"), analysis::gnuplot_script("histogram.csv", &title, &result.histogram, scored).as_bytes())?;

    let hyp = hypotheses_output(&spec, a.x, a.k, a.cap, &a.window).map_err(|e| e.in_stage(stage("hypotheses")))?;
    bundle.write(&format!("{dir}/hypotheses.json"), &json_bytes(&hyp))?;

    let entry = IndexEntry {
        function: spec.to_string(),
        dir,
        omega_count: report.omega_count,
        omega_density: report.omega_density,
        ks_distance: report.ks_distance,
        moment_diffs: report.moments.diffs.clone(),
        small_prime_expectation: report.small_prime_expectation,
        sum29: hyp.sums.sum29,
        sum30: hyp.sums.sum30,
        partial: hyp.sums.partial,
    };
    Ok((entry, ResolvedConfig::of(&cfg, &a.window)))
}

pub fn report(a: &ReportArgs, inv: &Invocation) -> CliResult<()> {
    if a.functions.is_empty() {
        return Err(CliError::param("fns", "need at least one function"));
    }
    if a.bins == 0 {
        return Err(CliError::param("bins", "need at least one bin"));
    }
    std::fs::create_dir_all(&a.out).map_err(|e| CliError::io(&a.out, e))?;
    let mut bundle = Bundle {
        root: &a.out,
        outputs: Vec::new(),
    };
    let mut entries = Vec::new();
    let mut configs = Vec::new();
    for &spec in &a.functions {
        let (entry, config) = one_function(a, spec, &mut bundle)?;
        entries.push(entry);
        configs.push(config);
    }
    bundle.write("report.json", &json_bytes(&Index { x: a.x, entries }))?;

    let params = json!({
        "configs": configs,
        "score": a.score,
        "bins": a.bins,
        "range": a.range,
        "kmax": a.kmax,
        "k": a.k,
        "cap": a.cap,
    });
    let mut m = RunManifest::new("report", inv.argv, params, analysis::segment_size()?, inv.started);
    m.outputs = bundle.outputs;
    let path = inv.manifest.map(Path::to_path_buf).unwrap_or_else(|| a.out.join("manifest.json"));
    m.write(Some(&path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs() {
        assert_eq!(slug(&"n+tau".parse().unwrap()), "n_plus_tau");
        assert_eq!(slug(&"phi-3".parse().unwrap()), "phi_minus_3");
        assert_eq!(slug(&"cototient".parse().unwrap()), "cototient");
    }
}
