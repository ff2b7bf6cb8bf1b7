//! The independent-Bernoulli model: the prime window `(y, z]`, the sum
//! `Y = Σ Y_p` with `Y_p ~ Bernoulli(1/p)`, and its exact standardized
//! moments.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::Serialize;

use crate::arith::primes_in;
use crate::error::{Error, Result};

/// Largest moment order handled anywhere.
pub const MAX_MOMENT: usize = 8;

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for v in iter {
            s.add(v);
        }
        s
    }
}

/// Floors for the iterated logarithms in the default cutoffs. The literal
/// exponents `1/log₃x` and `1/log₄x` exceed 1 for every feasible x, so each
/// iterated log is replaced by `max(log_k x, floor)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogFloors {
    pub l3: f64,
    pub l4: f64,
}

impl Default for LogFloors {
    fn default() -> Self {
        LogFloors { l3: 1.5, l4: 3.0 }
    }
}

/// Optional explicit cutoffs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct WindowOverrides {
    pub y: Option<f64>,
    pub z: Option<f64>,
}

/// `floor(v)`, nudged so that values a few ulps below an integer round up.
pub(crate) fn floor_real(v: f64) -> u64 {
    (v + v.abs() * 1e-12).floor() as u64
}

/// Iterated natural logarithm `log_k x`; `NaN` once an argument is <= 0.
pub fn iterated_log(x: f64, k: u32) -> f64 {
    (0..k).fold(x, |v, _| if v > 0.0 { v.ln() } else { f64::NAN })
}

/// The primes in `(y, z]` and the Bernoulli-model mean and variance.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimeWindow {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub primes: Vec<u64>,
    pub mu: f64,
    pub sigma2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowSummary {
    pub y: f64,
    pub z: f64,
    pub count: usize,
    pub mu: f64,
    pub sigma2: f64,
}

impl PrimeWindow {
    /// A window over an explicit prime list (used for model-only studies).
    pub fn from_primes(x: f64, y: f64, z: f64, mut primes: Vec<u64>) -> Result<Self> {
        primes.sort_unstable();
        primes.dedup();
        if primes.is_empty() {
            return Err(Error::param("z", "prime window is empty"));
        }
        if primes[0] < 3 {
            return Err(Error::param("y", "window primes must exceed 2"));
        }
        let mu = primes.iter().map(|&p| 1.0 / p as f64).collect::<CompensatedSum>().value();
        let sigma2 = primes
            .iter()
            .map(|&p| {
                let q = 1.0 / p as f64;
                q * (1.0 - q)
            })
            .collect::<CompensatedSum>()
            .value();
        Ok(PrimeWindow {
            x,
            y,
            z,
            primes,
            mu,
            sigma2,
        })
    }

    /// Integer form of the lower cutoff: `p > y ⇔ p > y_floor()`.
    pub fn y_floor(&self) -> u64 {
        floor_real(self.y)
    }

    pub fn z_floor(&self) -> u64 {
        floor_real(self.z)
    }

    /// Membership in the window's prime list.
    pub fn contains(&self, p: u64) -> bool {
        self.primes.binary_search(&p).is_ok()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    pub fn summary(&self) -> WindowSummary {
        WindowSummary {
            y: self.y,
            z: self.z,
            count: self.primes.len(),
            mu: self.mu,
            sigma2: self.sigma2,
        }
    }
}

/// Builds the window for scale `x`: `y = (log x)²`, `z = x^{1/max(log₃x, l3)}`
/// unless overridden.
pub fn build_window(x: f64, overrides: WindowOverrides, floors: LogFloors) -> Result<PrimeWindow> {
    if !(x.is_finite() && x > 2.0) {
        return Err(Error::param("x", format!("scale must be a finite number > 2, got {x}")));
    }
    let needs_defaults = overrides.y.is_none() || overrides.z.is_none();
    let l3 = iterated_log(x, 3);
    if needs_defaults && !(l3 > 0.0) {
        return Err(Error::param(
            "x",
            format!("log log log x <= 0 at x = {x}; pass explicit y and z cutoffs"),
        ));
    }
    if !(floors.l3 >= 1.0) {
        return Err(Error::param("l3_floor", format!("must be >= 1, got {}", floors.l3)));
    }
    let y = overrides.y.unwrap_or_else(|| x.ln().powi(2));
    let z = overrides.z.unwrap_or_else(|| x.powf(1.0 / l3.max(floors.l3)));
    if !(y > 2.0) {
        return Err(Error::param("y", format!("lower cutoff must exceed 2, got {y}")));
    }
    if !(y < z) {
        return Err(Error::param("y", format!("lower cutoff {y} must be below upper cutoff {z}")));
    }
    if z > x {
        return Err(Error::param("z", format!("upper cutoff {z} exceeds x = {x}")));
    }
    let primes = primes_in(floor_real(y) + 1, floor_real(z) + 1);
    if primes.is_empty() {
        return Err(Error::param("z", format!("no primes in ({y}, {z}]")));
    }
    PrimeWindow::from_primes(x, y, z, primes)
}

/// Cumulant polynomials of Bernoulli(q): `κ₁ = q`, `κ_{j+1} = q(1−q)·dκ_j/dq`.
/// Entry `j` holds the coefficients of `κ_j` in ascending powers of q.
fn bernoulli_cumulant_polys(k_max: usize) -> Vec<Vec<f64>> {
    let mut polys = vec![Vec::new(), vec![0.0, 1.0]];
    for j in 1..k_max {
        let prev = &polys[j];
        let deriv: Vec<f64> = prev.iter().enumerate().skip(1).map(|(i, c)| i as f64 * c).collect();
        // multiply by q − q²
        let mut next = vec![0.0; deriv.len() + 2];
        for (i, c) in deriv.iter().enumerate() {
            next[i + 1] += c;
            next[i + 2] -= c;
        }
        polys.push(next);
    }
    polys
}

fn eval_poly(coeffs: &[f64], q: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * q + c)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Cumulants `κ_1..=κ_k_max` of Y (index 0 unused).
pub fn model_cumulants(window: &PrimeWindow, k_max: usize) -> Vec<f64> {
    let polys = bernoulli_cumulant_polys(k_max);
    let mut out = vec![0.0; k_max + 1];
    for (j, poly) in polys.iter().enumerate().skip(1) {
        out[j] = window
            .primes
            .iter()
            .map(|&p| eval_poly(poly, 1.0 / p as f64))
            .collect::<CompensatedSum>()
            .value();
    }
    out
}

/// Central moments from cumulants; `kappa[1]` is ignored.
pub fn central_moments_from_cumulants(kappa: &[f64]) -> Vec<f64> {
    let k_max = kappa.len() - 1;
    let mut m = vec![0.0; k_max + 1];
    m[0] = 1.0;
    for n in 2..=k_max {
        m[n] = (2..=n).map(|k| binomial(n - 1, k - 1) * kappa[k] * m[n - k]).sum();
    }
    m
}

/// `E[Ỹ^j]` for `j = 1..=k_max`, exact up to rounding.
pub fn model_moments(window: &PrimeWindow, k_max: usize) -> Result<Vec<f64>> {
    if !(1..=MAX_MOMENT).contains(&k_max) {
        return Err(Error::param("kmax", format!("must lie in 1..={MAX_MOMENT}, got {k_max}")));
    }
    let kappa = model_cumulants(window, k_max.max(2));
    let central = central_moments_from_cumulants(&kappa);
    let sigma = window.sigma();
    Ok((1..=k_max).map(|j| central[j] / sigma.powi(j as i32)).collect())
}

/// `E[N^j]` for the standard normal, `j = 1..=k_max`.
pub fn normal_moments(k_max: usize) -> Vec<f64> {
    (1..=k_max)
        .map(|j| {
            if j % 2 == 1 {
                0.0
            } else {
                (1..j).step_by(2).map(|i| i as f64).product()
            }
        })
        .collect()
}

/// Monte-Carlo draws of Y. Successes of each `Y_p` are placed by
/// geometric skipping across trials, so the cost is about `trials·μ`.
pub fn sample_model(window: &PrimeWindow, trials: usize, seed: u64) -> Result<Vec<u32>> {
    if trials == 0 {
        return Err(Error::param("trials", "need at least one trial"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u32; trials];
    for &p in &window.primes {
        let gap = Geometric::new(1.0 / p as f64).map_err(|e| Error::Domain(e.to_string()))?;
        let mut i = gap.sample(&mut rng);
        while i < trials as u64 {
            counts[i as usize] += 1;
            i = i.saturating_add(1 + gap.sample(&mut rng));
        }
    }
    Ok(counts)
}

/// Moment comparison for `j = 1..=k_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub k_max: usize,
    pub empirical: Vec<f64>,
    pub model: Vec<f64>,
    pub normal: Vec<f64>,
    pub diffs: Vec<f64>,
}

impl MomentReport {
    pub fn new(empirical: Vec<f64>, model: Vec<f64>) -> Self {
        let k_max = empirical.len();
        let diffs = empirical.iter().zip(&model).map(|(e, m)| e - m).collect();
        MomentReport {
            k_max,
            normal: normal_moments(k_max),
            empirical,
            model,
            diffs,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn window(y: f64, z: f64) -> PrimeWindow {
        build_window(
            1e7,
            WindowOverrides {
                y: Some(y),
                z: Some(z),
            },
            LogFloors::default(),
        )
        .unwrap()
    }

    #[test]
    fn default_cutoffs() {
        let w = build_window(1e7, WindowOverrides::default(), LogFloors::default()).unwrap();
        assert_abs_diff_eq!(w.y, 259.793_007_413_441_5, epsilon = 1e-9);
        assert_abs_diff_eq!(iterated_log(1e7, 3), 1.022_430_277_958_143, epsilon = 1e-12);
        // the floor wins: z = x^(2/3)
        assert_abs_diff_eq!(w.z, 1e7f64.powf(2.0 / 3.0), epsilon = 1e-9);
        assert!(w.primes.iter().all(|&p| p as f64 > w.y && p as f64 <= w.z));
    }

    #[test]
    fn toy_window() {
        let w = window(10.0, 100.0);
        assert_eq!(w.primes.len(), 21);
        assert_eq!(w.primes[0], 11);
        assert_eq!(*w.primes.last().unwrap(), 97);
        let mu: f64 = w.primes.iter().map(|&p| 1.0 / p as f64).sum();
        assert_abs_diff_eq!(w.mu, mu, epsilon = 1e-14);
        assert!(w.mu > w.sigma2 && w.sigma2 > 0.0);
        assert!(w.mu - w.sigma2 < 0.5);
    }

    #[test]
    fn window_errors() {
        let o = |y, z| WindowOverrides { y: Some(y), z: Some(z) };
        assert!(matches!(
            build_window(1e7, o(50.0, 50.0), LogFloors::default()),
            Err(Error::Parameter { param: "y", .. })
        ));
        assert!(build_window(1e7, o(24.0, 28.0), LogFloors::default()).is_err());
        assert!(matches!(
            build_window(10.0, WindowOverrides::default(), LogFloors::default()),
            Err(Error::Parameter { param: "x", .. })
        ));
        assert!(build_window(10.0, o(2.5, 7.0), LogFloors::default()).is_ok());
    }

    #[test]
    fn cumulant_polynomials() {
        let polys = bernoulli_cumulant_polys(4);
        let q = 0.3;
        assert_abs_diff_eq!(eval_poly(&polys[2], q), q * (1.0 - q), epsilon = 1e-15);
        assert_abs_diff_eq!(eval_poly(&polys[3], q), q * (1.0 - q) * (1.0 - 2.0 * q), epsilon = 1e-15);
        assert_abs_diff_eq!(eval_poly(&polys[4], q), q * (1.0 - q) * (1.0 - 6.0 * q + 6.0 * q * q), epsilon = 1e-15);
    }

    #[test]
    fn toy_skewness() {
        let w = window(2.5, 5.0);
        assert_eq!(w.primes, vec![3, 5]);
        assert_abs_diff_eq!(w.mu, 8.0 / 15.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w.sigma2, 86.0 / 225.0, epsilon = 1e-15);
        let m = model_moments(&w, 3).unwrap();
        let expected = (2.0 / 27.0 + 12.0 / 125.0) / (86.0f64 / 225.0).powf(1.5);
        assert_abs_diff_eq!(m[2], expected, epsilon = 1e-12);
        assert_abs_diff_eq!(m[2], 0.7197, epsilon = 1e-4);
    }

    #[test]
    fn singleton_skewness() {
        for p in [3u64, 7, 101] {
            let w = window(p as f64 - 0.5, p as f64);
            let q = 1.0 / p as f64;
            let m = model_moments(&w, 3).unwrap();
            assert_abs_diff_eq!(m[2], (1.0 - 2.0 * q) / (q * (1.0 - q)).sqrt(), epsilon = 1e-12);
        }
    }

    #[test]
    fn standardization_is_exact() {
        let w = window(10.0, 10_000.0);
        let m = model_moments(&w, 8).unwrap();
        assert_abs_diff_eq!(m[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m[1], 1.0, epsilon = 1e-12);
        assert!(model_moments(&w, 0).is_err());
        assert!(model_moments(&w, 9).is_err());
    }

    #[test]
    fn normal_reference() {
        assert_eq!(normal_moments(8), vec![0.0, 1.0, 0.0, 3.0, 0.0, 15.0, 0.0, 105.0]);
    }

    #[test]
    fn sampling_is_reproducible() {
        let w = window(10.0, 100.0);
        let a = sample_model(&w, 1000, 7).unwrap();
        assert_eq!(a, sample_model(&w, 1000, 7).unwrap());
        assert_ne!(a, sample_model(&w, 1000, 8).unwrap());
        let one = sample_model(&w, 1, 3).unwrap();
        assert!(one[0] as usize <= w.primes.len());
        assert!(sample_model(&w, 0, 3).is_err());
    }

    #[test]
    fn compensated_sum() {
        let mut s = CompensatedSum::default();
        for v in [1.0, 1e100, 1.0, -1e100] {
            s.add(v);
        }
        assert_eq!(s.value(), 2.0);
    }
}
