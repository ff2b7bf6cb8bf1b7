use approx::assert_abs_diff_eq;
use eklab::arith::primes_in;
use eklab::model::{build_window, model_moments, normal_moments, sample_model, LogFloors, PrimeWindow, WindowOverrides};

fn window_of(primes: &[u64]) -> PrimeWindow {
    PrimeWindow::from_primes(1e6, 2.5, 1e6, primes.to_vec()).unwrap()
}

/// Standardized moments of Y = Σ Y_p by summing over all 2^|P| outcomes.
fn enumerate_moments(primes: &[u64], k_max: usize) -> Vec<f64> {
    let mu: f64 = primes.iter().map(|&p| 1.0 / p as f64).sum();
    let var: f64 = primes.iter().map(|&p| (1.0 / p as f64) * (1.0 - 1.0 / p as f64)).sum();
    let sd = var.sqrt();
    let mut out = vec![0.0; k_max];
    for mask in 0u32..(1 << primes.len()) {
        let mut prob = 1.0;
        let mut y = 0.0;
        for (i, &p) in primes.iter().enumerate() {
            let q = 1.0 / p as f64;
            if mask >> i & 1 == 1 {
                prob *= q;
                y += 1.0;
            } else {
                prob *= 1.0 - q;
            }
        }
        let t = (y - mu) / sd;
        for (j, o) in out.iter_mut().enumerate() {
            *o += prob * t.powi(j as i32 + 1);
        }
    }
    out
}

#[test]
fn cumulants_match_enumeration() {
    let all = primes_in(3, 200);
    let windows: Vec<Vec<u64>> = vec![
        vec![3],
        vec![3, 5],
        vec![101],
        vec![7, 11, 13, 197],
        all[..15].to_vec(),
        all[20..35].to_vec(),
        all.iter().copied().step_by(3).take(12).collect(),
    ];
    for primes in windows {
        let got = model_moments(&window_of(&primes), 6).unwrap();
        let want = enumerate_moments(&primes, 6);
        for j in 0..6 {
            assert_abs_diff_eq!(got[j], want[j], epsilon = 1e-10);
        }
    }
}

#[test]
fn toy_window_skewness() {
    let m = model_moments(&window_of(&[3, 5]), 3).unwrap();
    let sigma3 = (86.0f64 / 225.0).powf(1.5);
    assert_abs_diff_eq!(m[2], (2.0 / 27.0 + 12.0 / 125.0) / sigma3, epsilon = 1e-12);
    assert_abs_diff_eq!(m[2], 0.7197, epsilon = 5e-5);
}

#[test]
fn moments_approach_gaussian() {
    let mut prev: Option<(f64, f64)> = None;
    for j in 2..=6 {
        let w = build_window(1e12, WindowOverrides { y: Some(10.0), z: Some(10f64.powi(j)) }, LogFloors::default()).unwrap();
        let m = model_moments(&w, 4).unwrap();
        assert_abs_diff_eq!(m[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m[1], 1.0, epsilon = 1e-12);
        let cur = (m[2].abs(), (m[3] - 3.0).abs());
        if let Some(p) = prev {
            assert!(cur.0 < p.0 && cur.1 < p.1, "z = 10^{j}: {cur:?} vs {p:?}");
        }
        prev = Some(cur);
    }
}

#[test]
fn window_mean_tracks_loglog() {
    // |Σ 1/p − (log log z − log log y)| is a difference of two Mertens
    // remainders; 0.2 is generous once y ≈ 190 and z >= 10⁴.
    for x in [1e6, 1e7, 1e8, 1e9] {
        let w = build_window(x, WindowOverrides::default(), LogFloors::default()).unwrap();
        assert!(w.z > 1e4 - 1e-6);
        let approx = w.z.ln().ln() - w.y.ln().ln();
        assert!((w.mu - approx).abs() < 0.2, "x = {x}: mu = {} vs {approx}", w.mu);
        assert!(w.mu > w.sigma2 && w.mu - w.sigma2 < 0.5);
    }
}

#[test]
fn window_primes_complete() {
    let w = build_window(1e7, WindowOverrides::default(), LogFloors::default()).unwrap();
    let want: Vec<u64> = (260..=46_415u64).filter(|&p| (2..p).take_while(|q| q * q <= p).all(|q| p % q != 0)).collect();
    assert_eq!(w.primes, want);
}

#[test]
fn normal_reference() {
    assert_eq!(normal_moments(8), vec![0.0, 1.0, 0.0, 3.0, 0.0, 15.0, 0.0, 105.0]);
}

#[test]
fn monte_carlo_mean() {
    let w = window_of(&[3, 5]);
    let draws = sample_model(&w, 1_000_000, 2024).unwrap();
    let mean = draws.iter().map(|&v| v as f64).sum::<f64>() / draws.len() as f64;
    assert!((mean - 8.0 / 15.0).abs() < 0.005, "{mean}");
    assert!(draws.iter().all(|&v| v <= 2));

    let w = build_window(1e7, WindowOverrides::default(), LogFloors::default()).unwrap();
    let trials = 200_000;
    let draws = sample_model(&w, trials, 99).unwrap();
    let mean = draws.iter().map(|&v| v as f64).sum::<f64>() / trials as f64;
    assert!((mean - w.mu).abs() < 5.0 * w.sigma() / (trials as f64).sqrt());
    assert_eq!(draws, sample_model(&w, trials, 99).unwrap());
    assert_ne!(draws, sample_model(&w, trials, 100).unwrap());

    let one = sample_model(&w, 1, 5).unwrap();
    assert!(one[0] as usize <= w.primes.len());
}
