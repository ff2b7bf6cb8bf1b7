use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn eklab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eklab")).args(args).env_remove("EKLAB_SEGMENT_SIZE").output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn bad_input_exits_two_and_names_the_flag() {
    let cases: &[(&[&str], &str)] = &[
        (&["ekhist", "--x", "abc"], "--x"),
        (&["--threads", "0", "eqerror", "--q", "3", "--T", "10"], "--threads"),
        (&["dcount", "--x", "1e4", "--d", "4"], "--d"),
        (&["dcount", "--x", "1e4", "--auto", "k=zero"], "--auto"),
        (&["sieve", "--lo", "5", "--hi", "3"], "--hi"),
        (&["sample-model", "--trials", "0"], "--trials"),
        (&["ekhist", "--x", "1e4", "--bins", "0"], "--bins"),
        (&["eqerror", "--q", "1", "--T", "10"], "--q"),
    ];
    for (args, flag) in cases {
        let out = eklab(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", stderr(&out));
        assert!(stderr(&out).contains(flag), "{args:?}: {}", stderr(&out));
    }
    assert_eq!(eklab(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn bad_segment_size_names_the_variable() {
    let out = Command::new(env!("CARGO_BIN_EXE_eklab"))
        .args(["moments", "--x", "1e4"])
        .env("EKLAB_SEGMENT_SIZE", "abc")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("EKLAB_SEGMENT_SIZE"));
}

#[test]
fn sieve_csv_rows() {
    let out = eklab(&["sieve", "--lo", "2", "--hi", "12"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,sigma,phi,tau,omega,lpf,lpf_sq_divides");
    assert_eq!(lines.len(), 12);
    assert_eq!(lines[1], "2,3,1,2,1,2,0");
    assert_eq!(lines[3], "4,7,2,3,1,2,1");
    assert_eq!(lines[11], "12,28,4,6,2,3,0");
    // the manifest goes to stderr when the data goes to stdout
    let manifest: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(manifest["subcommand"], "sieve");
}

#[test]
fn sieve_is_independent_of_segment_size() {
    let run = |seg: &str| {
        Command::new(env!("CARGO_BIN_EXE_eklab"))
            .args(["sieve", "--lo", "2", "--hi", "5000"])
            .env("EKLAB_SEGMENT_SIZE", seg)
            .output()
            .unwrap()
            .stdout
    };
    assert_eq!(run("64"), run("1048576"));
}

#[test]
fn dcount_identity_holds() {
    let v = stdout_json(&eklab(&["dcount", "--x", "1e4", "--fn", "cototient", "--d", "3,5,15,101"]));
    assert_eq!(v["all_identities_hold"], true);
    let reports = v["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 4);
    for r in reports {
        assert_eq!(r["lhs"], r["rhs"]);
    }
}

#[test]
fn dcount_auto_adds_a_census() {
    let v = stdout_json(&eklab(&["dcount", "--x", "1e4", "--auto", "k=2,limit=5"]));
    assert_eq!(v["reports"].as_array().unwrap().len(), 5);
    assert!(v["census"]["d_count"].as_u64().unwrap() >= 5);
}

/// max over t <= T and a coprime to q of |π(t;q,a) − π(t)/φ(q)|, by brute force.
fn progression_error_naive(q: u64, t_max: u64) -> f64 {
    let is_prime = |p: u64| p > 1 && (2..p).all(|d| p % d != 0);
    let gcd = |mut a: u64, mut b: u64| {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a
    };
    let residues: Vec<u64> = (0..q).filter(|&a| gcd(a, q) == 1).collect();
    let phi = residues.len() as f64;
    let mut counts = vec![0u64; q as usize];
    let mut total = 0u64;
    let mut worst: f64 = 0.0;
    for t in 1..=t_max {
        if is_prime(t) {
            total += 1;
            counts[(t % q) as usize] += 1;
        }
        for &a in &residues {
            worst = worst.max((counts[a as usize] as f64 - total as f64 / phi).abs());
        }
    }
    worst
}

#[test]
fn eqerror_matches_brute_force() {
    for (q, t) in [(3u64, 10u64), (4, 100), (7, 500), (12, 1000)] {
        let v = stdout_json(&eklab(&["eqerror", "--q", &q.to_string(), "--T", &t.to_string()]));
        let got = v["e"].as_f64().unwrap();
        assert!((got - progression_error_naive(q, t)).abs() < 1e-12, "q = {q}, T = {t}: {got}");
    }
}

#[test]
fn ekhist_writes_csv_summary_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("h.csv");
    let out = eklab(&["ekhist", "--x", "2e4", "--bins", "10", "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let summary: Value = serde_json::from_slice(&std::fs::read(dir.path().join("h.json")).unwrap()).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    let counts: u64 = text.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(counts, summary["scored"].as_u64().unwrap());
    // ten in-range bins plus the two tails
    assert_eq!(text.lines().count(), 1 + 12);
    let manifest: Value = serde_json::from_slice(&std::fs::read(dir.path().join("h.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn report_bundle_layout_and_repeatability() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = eklab(&["report", "--x", "2e4", "--fns", "s,n+tau", "--out", out_dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", stderr(&out));
        out_dir
    };
    let a = run("a");
    for f in ["histogram.csv", "summary.json", "moments.json", "plot.gp", "hypotheses.json"] {
        assert!(a.join("s").join(f).is_file(), "s/{f}");
        assert!(a.join("n_plus_tau").join(f).is_file(), "n_plus_tau/{f}");
    }
    let index = read_json(&a.join("report.json"));
    assert_eq!(index["entries"].as_array().unwrap().len(), 2);
    assert_eq!(index["entries"][1]["fn"], "n+tau");

    let b = run("b");
    let (ma, mb) = (read_json(&a.join("manifest.json")), read_json(&b.join("manifest.json")));
    assert_eq!(ma["outputs"], mb["outputs"]);
}

#[test]
fn sample_model_is_seeded() {
    let args = ["sample-model", "--x", "1e6", "--trials", "20000", "--seed", "3"];
    let (a, b) = (stdout_json(&eklab(&args)), stdout_json(&eklab(&args)));
    assert_eq!(a["histogram"], b["histogram"]);
    assert_eq!(a["sample_mean"], b["sample_mean"]);
}
