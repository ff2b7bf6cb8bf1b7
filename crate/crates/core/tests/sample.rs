use eklab::arith::FnSpec;
use eklab::factor::factorize;
use eklab::model::{build_window, LogFloors, PrimeWindow, WindowOverrides};
use eklab::sample::{
    collect_records, empirical_moments, run_sample, small_prime_expectation, Population, PowerSums, RunOptions,
    SampleConfig,
};

fn toy_window(x: u64) -> PrimeWindow {
    build_window(x as f64, WindowOverrides { y: Some(10.0), z: Some(100.0) }, LogFloors::default()).unwrap()
}

fn opts(segment_size: u64) -> RunOptions {
    RunOptions { segment_size, batch: 3 }
}

/// Ω membership straight from the definition.
fn in_omega_naive(n: u64, smooth: f64) -> bool {
    let fac = factorize(n);
    let (p, e) = *fac.factors().last().unwrap();
    p != n && p as f64 > smooth && e == 1
}

fn divisor_sum(n: u64) -> u64 {
    let mut total = 0;
    let mut d = 1;
    while d * d <= n {
        if n % d == 0 {
            total += d;
            if d * d != n {
                total += n / d;
            }
        }
        d += 1;
    }
    total
}

#[test]
fn omega_count_matches_brute_force() {
    for x in [100u64, 1000, 12_345] {
        let cfg = SampleConfig::with_smooth(x, FnSpec::s(), toy_window(x), (x as f64).cbrt(), Population::OmegaSpace).unwrap();
        let want = (2..=x).filter(|&n| in_omega_naive(n, cfg.smooth)).count() as u64;
        for seg in [7, 64, 1 << 20] {
            let summary = run_sample(&cfg, opts(seg), None).unwrap();
            assert_eq!(summary.omega_count(), want, "x = {x}");
            assert_eq!(summary.x_count(), x - 1);
        }
    }
}

#[test]
fn records_satisfy_invariants() {
    let x = 20_000;
    let w = build_window(x as f64, WindowOverrides { y: Some(12.0), z: Some(300.0) }, LogFloors::default()).unwrap();
    for spec in ["s", "beta", "A", "cototient", "n+tau", "n-tau", "n+omega", "n-omega", "phi+4", "phi-3"] {
        let spec: FnSpec = spec.parse().unwrap();
        let cfg = SampleConfig::with_smooth(x, spec, w.clone(), 20.0, Population::AllN).unwrap();
        let (summary, records) = collect_records(&cfg, opts(4096)).unwrap();
        assert_eq!(records.len() as u64, x - 1);
        assert_eq!(summary.all.count, x - 1);
        for (r, n) in records.iter().zip(2..) {
            assert_eq!(r.n, n);
            assert_eq!(r.m * r.big_p, n);
            if r.degenerate {
                assert_eq!(r.f_value, 0);
                assert!(!r.in_omega);
                continue;
            }
            assert_eq!(r.x_small + r.x_window + r.x_large, r.omega_f);
            assert!(r.omega_prime_f >= r.omega_f);
            let fac = factorize(r.f_value.unsigned_abs());
            assert_eq!(r.omega_f, fac.omega());
            assert_eq!(r.x_window, fac.primes().filter(|&p| p > 12 && p <= 300).count() as u32);
            if r.in_omega {
                assert!(r.m > 1 && r.big_p as f64 > 20.0 && r.m % r.big_p != 0);
                if spec.family == eklab::Family::PhiShift {
                    assert!(r.m > spec.m0);
                }
            }
        }
    }
}

#[test]
fn all_population_at_100() {
    let w = build_window(100.0, WindowOverrides { y: Some(2.5), z: Some(50.0) }, LogFloors::default()).unwrap();
    let cfg = SampleConfig::with_smooth(100, FnSpec::s(), w, 100f64.cbrt(), Population::AllN).unwrap();
    let (summary, records) = collect_records(&cfg, RunOptions::default()).unwrap();
    assert_eq!(records.len(), 99);
    assert_eq!(summary.all.count, 99);
    let r17 = &records[15];
    assert_eq!((r17.n, r17.f_value, r17.omega_f), (17, 1, 0));
    assert!(!r17.in_omega);
}

#[test]
fn power_sums_match_naive_loop() {
    let x = 100_000;
    let w = toy_window(x);
    let cfg = SampleConfig::new(x, FnSpec::s(), w.clone(), LogFloors::default(), Population::OmegaSpace).unwrap();
    let (summary, records) = collect_records(&cfg, opts(1 << 14)).unwrap();

    let mut naive = [0u128; 9];
    for n in 2..=x {
        if !in_omega_naive(n, cfg.smooth) {
            continue;
        }
        let s = divisor_sum(n) - n;
        let v = factorize(s).primes().filter(|&p| p > 10 && p < 100).count() as u128;
        for (j, acc) in naive.iter_mut().enumerate() {
            *acc += v.pow(j as u32);
        }
    }
    assert_eq!(summary.omega.window_power_sums.sums, naive);

    let from_records = empirical_moments(&records, &w, 8).unwrap();
    let from_summary = summary.omega.window_power_sums.standardized_moments(w.mu, w.sigma(), 8).unwrap();
    assert_eq!(from_records, from_summary[1..].to_vec());
}

#[test]
fn constant_sample_moments() {
    let mut sums = PowerSums::default();
    for _ in 0..10 {
        sums.add(2);
    }
    let (mu, sigma) = (0.7, 0.9);
    let m = sums.standardized_moments(mu, sigma, 4).unwrap();
    let t: f64 = (2.0 - mu) / sigma;
    assert_eq!(m[0], 1.0);
    for j in 1..=4 {
        assert!((m[j] - t.powi(j as i32)).abs() < 1e-12);
    }
}

#[test]
fn small_prime_expectation_checks() {
    let x = 100_000;
    let w = toy_window(x);
    let cfg = SampleConfig::new(x, FnSpec::s(), w, LogFloors::default(), Population::OmegaSpace).unwrap();
    let (summary, records) = collect_records(&cfg, opts(1 << 15)).unwrap();

    let mut total = 0u64;
    let mut members = 0u64;
    for n in 2..=x {
        if !in_omega_naive(n, cfg.smooth) {
            continue;
        }
        members += 1;
        let s = divisor_sum(n) - n;
        total += [2u64, 3, 5, 7].iter().filter(|&&p| s % p == 0).count() as u64;
    }
    let want = total as f64 / members as f64;
    assert!((small_prime_expectation(&records, 10.0).unwrap() - want).abs() < 1e-12);
    assert!((summary.omega.small_prime_expectation().unwrap() - want).abs() < 1e-12);

    assert_eq!(small_prime_expectation(&records, 1.5).unwrap(), 0.0);
    let mut prev = 0.0;
    for y in [2.0, 3.0, 10.0, 50.0, 1000.0] {
        let v = small_prime_expectation(&records, y).unwrap();
        assert!(v >= prev);
        prev = v;
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let x = 300_000;
    let w = build_window(x as f64, WindowOverrides { y: Some(20.0), z: Some(2000.0) }, LogFloors::default()).unwrap();
    let cfg = SampleConfig::new(x, "cototient".parse().unwrap(), w, LogFloors::default(), Population::OmegaSpace).unwrap();
    let run = |threads: usize, seg: u64| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| collect_records(&cfg, RunOptions { segment_size: seg, batch: threads }).unwrap())
    };
    let (s1, r1) = run(1, 1 << 16);
    let (s4, r4) = run(4, 1 << 13);
    assert_eq!(s1, s4);
    assert_eq!(r1, r4);
}
