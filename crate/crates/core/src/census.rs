//! Exact finite versions of the counting arguments behind the moment
//! comparison: counts of `n ∈ Ω` with `d | f(n)` evaluated two ways,
//! d-compatibility of m, the progression error `E(T; q)`, and the two
//! hypothesis sums over `a(m)`, `b(m)`.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::arith::{f_value, linear_form, primes_in, primes_up_to, ArithPoint, Family, FnSpec, LinearForm, Sieve};
use crate::error::{Error, Result};
use crate::factor::{factorize, gcd};
use crate::model::{iterated_log, CompensatedSum, PrimeWindow};
use crate::sample::{in_omega, SampleConfig};

/// Exact two-sided evaluation scans every n <= x; keep it at desk scale.
pub const MAX_EXACT_X: u64 = 10_000_000;
pub const MAX_PROGRESSION_T: u64 = 100_000_000;
/// m-values per work unit on the m side; fixed so float reductions are
/// independent of the thread count.
const M_CHUNK: u64 = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MClass {
    /// gcd(d, a(m)·b(m)) = 1
    Ideal,
    /// every p | d divides both or neither of a(m), b(m), and some divides both
    CompatNotIdeal,
    Incompatible,
}

/// Classification from the coefficients; `d` must be squarefree.
pub fn classify_coefficients(d: u64, lf: LinearForm) -> MClass {
    let ga = gcd(d, lf.a.unsigned_abs());
    let gb = gcd(d, lf.b.unsigned_abs());
    match (ga == gb, ga == 1) {
        (true, true) => MClass::Ideal,
        (true, false) => MClass::CompatNotIdeal,
        (false, _) => MClass::Incompatible,
    }
}

fn squarefree_primes(d: u64) -> Result<Vec<u64>> {
    if d < 2 {
        return Err(Error::domain(format!("modulus d must exceed 1, got {d}")));
    }
    let fac = factorize(d);
    if !fac.is_squarefree() {
        return Err(Error::domain(format!("d = {d} is not squarefree")));
    }
    Ok(fac.primes().collect())
}

/// Classifies m against d for the family `spec`.
pub fn classify_m(d: u64, m: u64, spec: &FnSpec) -> Result<MClass> {
    squarefree_primes(d)?;
    let point = ArithPoint::of(m)?.with_prime_sums();
    Ok(classify_coefficients(d, linear_form(spec, &point)?))
}

/// Admissible primes P for one m: `P·a + b ≡ 0 (mod d)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Congruence {
    /// Some p | d divides a but not b.
    Unsolvable,
    /// `P ≡ residue (mod modulus)`, with `modulus = d / gcd(d, a)`.
    Class { modulus: u64, residue: u64 },
}

fn mod_i64(v: i64, p: u64) -> u64 {
    v.rem_euclid(p as i64) as u64
}

fn inv_mod_prime(a: u64, p: u64) -> u64 {
    let mut acc = 1u128;
    let mut base = a as u128 % p as u128;
    let mut e = p - 2;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base % p as u128;
        }
        base = base * base % p as u128;
        e >>= 1;
    }
    acc as u64
}

/// Solves `P·a + b ≡ 0` modulo the squarefree `d = Π primes`.
pub fn solve_congruence(primes: &[u64], lf: LinearForm) -> Congruence {
    let (mut residue, mut modulus) = (0u128, 1u128);
    for &p in primes {
        let a = mod_i64(lf.a, p);
        let b = mod_i64(lf.b, p);
        if a == 0 {
            if b != 0 {
                return Congruence::Unsolvable;
            }
            continue;
        }
        let target = ((p - b) % p) as u128 * inv_mod_prime(a, p) as u128 % p as u128;
        // CRT: residue + modulus·t ≡ target (mod p)
        let cur = residue % p as u128;
        let diff = (target + p as u128 - cur) % p as u128;
        let t = diff * inv_mod_prime((modulus % p as u128) as u64, p) as u128 % p as u128;
        residue += modulus * t;
        modulus *= p as u128;
    }
    Congruence::Class {
        modulus: modulus as u64,
        residue: residue as u64,
    }
}

/// Tallies of the m-range `1 < m <= m_max` against one d.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DClass {
    pub ideal: u64,
    pub compat_not_ideal: u64,
    pub incompatible: u64,
    /// Σ gcd(d, a(m))/(m·d) over the compatible, non-ideal m
    pub gcd_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DCountReport {
    pub d: u64,
    /// #{n ∈ Ω : d | f(n)} by direct scan
    pub lhs: u64,
    /// Σ_m #{P ∈ (L_m, x/m] prime : P·a(m) + b(m) ≡ 0 (mod d)}
    pub rhs: u64,
    pub omega_count: u64,
    pub expected: f64,
    pub discrepancy: f64,
    pub identity_holds: bool,
    pub classes: DClass,
}

struct Target {
    d: u64,
    primes: Vec<u64>,
}

fn check_exact_x(x: u64) -> Result<()> {
    if x > MAX_EXACT_X {
        return Err(Error::param("x", format!("exact census limited to x <= {MAX_EXACT_X}, got {x}")));
    }
    Ok(())
}

/// Counts `d | f(n)` over Ω for every d, plus #Ω. Parallel over segments.
fn lhs_counts(ds: &[Target], cfg: &SampleConfig, segment_size: u64) -> Result<(Vec<u64>, u64)> {
    let sieve = Sieve::new(cfg.x + 1, segment_size)?;
    let parts: Vec<Result<(Vec<u64>, u64)>> = sieve
        .segments(2, cfg.x + 1)
        .par_iter()
        .map(|&(lo, hi)| {
            let block = sieve.block(lo, hi)?;
            let mut counts = vec![0u64; ds.len()];
            let mut members = 0u64;
            for n in lo..hi {
                let point = block.point(n)?;
                if !in_omega(&point, cfg) {
                    continue;
                }
                members += 1;
                let point = if cfg.spec.needs_prime_sums() {
                    point.with_prime_sums()
                } else {
                    point
                };
                let f = f_value(&cfg.spec, &point)?;
                for (c, t) in counts.iter_mut().zip(ds) {
                    if mod_i64(f, t.d) == 0 {
                        *c += 1;
                    }
                }
            }
            Ok((counts, members))
        })
        .collect();
    let mut counts = vec![0u64; ds.len()];
    let mut members = 0;
    for part in parts {
        let (c, m) = part?;
        members += m;
        for (a, b) in counts.iter_mut().zip(c) {
            *a += b;
        }
    }
    Ok((counts, members))
}

struct MSide {
    rhs: Vec<u64>,
    classes: Vec<DClass>,
}

/// The m-side: for each m, the admissible residue class of P mod d and a
/// count of primes in `(L_m, x/m]` lying in it.
fn rhs_counts(ds: &[Target], cfg: &SampleConfig) -> Result<Vec<u64>> {
    Ok(m_side(ds, cfg)?.rhs)
}

fn m_side(ds: &[Target], cfg: &SampleConfig) -> Result<MSide> {
    let primes = primes_up_to(cfg.x / 2);
    let m_max = cfg.m_max();
    let l_floor = cfg.smooth_floor();
    let chunks: Vec<(u64, u64)> = (2..=m_max)
        .step_by(M_CHUNK as usize)
        .map(|lo| (lo, (lo + M_CHUNK).min(m_max + 1)))
        .collect();
    let parts: Vec<Result<MSide>> = chunks
        .par_iter()
        .map(|&(lo, hi)| {
            let mut rhs = vec![0u64; ds.len()];
            let mut classes = vec![DClass::default(); ds.len()];
            let mut gcd_sums = vec![CompensatedSum::default(); ds.len()];
            let mut congruences = Vec::with_capacity(ds.len());
            for m in lo..hi {
                if cfg.spec.family == Family::PhiShift && m <= cfg.spec.m0 {
                    continue;
                }
                let point = ArithPoint::of(m)?;
                let lf = linear_form(&cfg.spec, &point)?;
                for (k, t) in ds.iter().enumerate() {
                    match classify_coefficients(t.d, lf) {
                        MClass::Ideal => classes[k].ideal += 1,
                        MClass::CompatNotIdeal => {
                            classes[k].compat_not_ideal += 1;
                            let g = gcd(t.d, lf.a.unsigned_abs());
                            gcd_sums[k].add(g as f64 / (m as f64 * t.d as f64));
                        }
                        MClass::Incompatible => classes[k].incompatible += 1,
                    }
                }
                let l_m = l_floor.max(point.lpf);
                let upper = cfg.x / m;
                if upper <= l_m {
                    continue;
                }
                congruences.clear();
                congruences.extend(ds.iter().map(|t| solve_congruence(&t.primes, lf)));
                let start = primes.partition_point(|&p| p <= l_m);
                let end = primes.partition_point(|&p| p <= upper);
                for &big_p in &primes[start..end] {
                    for (c, cong) in rhs.iter_mut().zip(&congruences) {
                        if let Congruence::Class { modulus, residue } = *cong {
                            if big_p % modulus == residue {
                                *c += 1;
                            }
                        }
                    }
                }
            }
            for (c, s) in classes.iter_mut().zip(&gcd_sums) {
                c.gcd_sum = s.value();
            }
            Ok(MSide { rhs, classes })
        })
        .collect();
    let mut rhs = vec![0u64; ds.len()];
    let mut classes = vec![DClass::default(); ds.len()];
    let mut gcd_sums = vec![CompensatedSum::default(); ds.len()];
    for part in parts {
        let part = part?;
        for k in 0..ds.len() {
            rhs[k] += part.rhs[k];
            classes[k].ideal += part.classes[k].ideal;
            classes[k].compat_not_ideal += part.classes[k].compat_not_ideal;
            classes[k].incompatible += part.classes[k].incompatible;
            gcd_sums[k].add(part.classes[k].gcd_sum);
        }
    }
    for (c, s) in classes.iter_mut().zip(&gcd_sums) {
        c.gcd_sum = s.value();
    }
    Ok(MSide { rhs, classes })
}

/// Evaluates both sides of the divisibility count for each d.
pub fn dcount_many(ds: &[u64], cfg: &SampleConfig, segment_size: u64) -> Result<Vec<DCountReport>> {
    check_exact_x(cfg.x)?;
    let targets: Vec<Target> = ds
        .iter()
        .map(|&d| Ok(Target { d, primes: squarefree_primes(d)? }))
        .collect::<Result<_>>()?;
    let (lhs, omega_count) = lhs_counts(&targets, cfg, segment_size)?;
    let side = m_side(&targets, cfg)?;
    Ok(targets
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let frac = if omega_count == 0 { 0.0 } else { lhs[k] as f64 / omega_count as f64 };
            DCountReport {
                d: t.d,
                lhs: lhs[k],
                rhs: side.rhs[k],
                omega_count,
                expected: omega_count as f64 / t.d as f64,
                discrepancy: (frac - 1.0 / t.d as f64).abs(),
                identity_holds: lhs[k] == side.rhs[k],
                classes: side.classes[k].clone(),
            }
        })
        .collect())
}

pub fn dcount(d: u64, cfg: &SampleConfig, segment_size: u64) -> Result<DCountReport> {
    Ok(dcount_many(&[d], cfg, segment_size)?.remove(0))
}

/// The m-side count alone (used to cross-check against other lhs routes).
pub fn dcount_rhs(ds: &[u64], cfg: &SampleConfig) -> Result<Vec<u64>> {
    check_exact_x(cfg.x)?;
    let targets: Vec<Target> = ds
        .iter()
        .map(|&d| Ok(Target { d, primes: squarefree_primes(d)? }))
        .collect::<Result<_>>()?;
    rhs_counts(&targets, cfg)
}

/// Squarefree products of at most `k` window primes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DList {
    /// `(d, primes of d)`, ascending in d.
    pub entries: Vec<(u64, Vec<u64>)>,
    /// Some admissible product exceeded the cap and was left out.
    pub truncated: bool,
}

impl DList {
    pub fn values(&self) -> Vec<u64> {
        self.entries.iter().map(|(d, _)| *d).collect()
    }

    /// `limit` entries spread evenly over the ascending list.
    pub fn spread(&self, limit: usize) -> Vec<u64> {
        let n = self.entries.len();
        if limit >= n {
            return self.values();
        }
        (0..limit).map(|i| self.entries[i * (n - 1) / (limit - 1).max(1)].0).collect()
    }
}

/// All products of `1..=k` distinct window primes not exceeding `cap`.
pub fn enumerate_ds(window: &PrimeWindow, k: usize, cap: u64) -> Result<DList> {
    if k == 0 {
        return Err(Error::param("k", "need k >= 1"));
    }
    fn rec(primes: &[u64], from: usize, k: usize, cur: u64, chosen: &mut Vec<u64>, cap: u64, out: &mut DList) {
        for i in from..primes.len() {
            let Some(next) = cur.checked_mul(primes[i]).filter(|&v| v <= cap) else {
                out.truncated = true;
                // primes ascend, so larger i only grows the product
                return;
            };
            chosen.push(primes[i]);
            out.entries.push((next, chosen.clone()));
            if chosen.len() < k {
                rec(primes, i + 1, k, next, chosen, cap, out);
            }
            chosen.pop();
        }
    }
    let mut out = DList {
        entries: Vec::new(),
        truncated: false,
    };
    rec(&window.primes, 0, k, 1, &mut Vec::new(), cap, &mut out);
    out.entries.sort_unstable();
    Ok(out)
}

/// Σ_d |#{n ∈ Ω : d | f(n)}/#Ω − 1/d| over a d-list, from one factoring
/// pass over Ω.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscrepancyCensus {
    pub d_count: usize,
    pub truncated: bool,
    pub omega_count: u64,
    pub total_discrepancy: f64,
    /// `(log log x)^2 / log x`, the scale of the expected decay
    pub reference_scale: f64,
}

pub fn discrepancy_census(cfg: &SampleConfig, k: usize, cap: u64, segment_size: u64) -> Result<DiscrepancyCensus> {
    check_exact_x(cfg.x)?;
    let list = enumerate_ds(&cfg.window, k, cap)?;
    let sieve = Sieve::new(cfg.x + 1, segment_size)?;
    let parts: Vec<Result<(HashMap<u64, u64>, u64)>> = sieve
        .segments(2, cfg.x + 1)
        .par_iter()
        .map(|&(lo, hi)| {
            let block = sieve.block(lo, hi)?;
            let mut counts: HashMap<u64, u64> = HashMap::new();
            let mut members = 0;
            for n in lo..hi {
                let point = block.point(n)?;
                if !in_omega(&point, cfg) {
                    continue;
                }
                members += 1;
                let point = if cfg.spec.needs_prime_sums() { point.with_prime_sums() } else { point };
                let f = f_value(&cfg.spec, &point)?;
                let hits: Vec<u64> = factorize(f.unsigned_abs()).primes().filter(|&p| cfg.window.contains(p)).collect();
                for_each_subset_product(&hits, k, cap, &mut |d| *counts.entry(d).or_default() += 1);
            }
            Ok((counts, members))
        })
        .collect();
    let mut counts: HashMap<u64, u64> = HashMap::new();
    let mut omega_count = 0;
    for part in parts {
        let (c, m) = part?;
        omega_count += m;
        for (d, v) in c {
            *counts.entry(d).or_default() += v;
        }
    }
    if omega_count == 0 {
        return Err(Error::domain("Ω is empty"));
    }
    let total: CompensatedSum = list
        .entries
        .iter()
        .map(|(d, _)| {
            let c = counts.get(d).copied().unwrap_or(0);
            (c as f64 / omega_count as f64 - 1.0 / *d as f64).abs()
        })
        .collect();
    let xf = cfg.x as f64;
    Ok(DiscrepancyCensus {
        d_count: list.entries.len(),
        truncated: list.truncated,
        omega_count,
        total_discrepancy: total.value(),
        reference_scale: iterated_log(xf, 2).powi(2) / xf.ln(),
    })
}

fn for_each_subset_product(primes: &[u64], k: usize, cap: u64, f: &mut dyn FnMut(u64)) {
    fn rec(primes: &[u64], from: usize, left: usize, cur: u64, cap: u64, f: &mut dyn FnMut(u64)) {
        for i in from..primes.len() {
            let Some(next) = cur.checked_mul(primes[i]).filter(|&v| v <= cap) else {
                return;
            };
            f(next);
            if left > 1 {
                rec(primes, i + 1, left - 1, next, cap, f);
            }
        }
    }
    rec(primes, 0, k, 1, cap, f);
}

/// `E(T; q) = max_{2<=t<=T} max_{(a,q)=1} |π(t; q, a) − π(t)/φ(q)|`.
pub fn progression_error(t_max: u64, q: u64) -> Result<f64> {
    if q < 2 {
        return Err(Error::param("q", format!("need q >= 2, got {q}")));
    }
    if !(2..=MAX_PROGRESSION_T).contains(&t_max) {
        return Err(Error::param("T", format!("need 2 <= T <= {MAX_PROGRESSION_T}, got {t_max}")));
    }
    if q > MAX_PROGRESSION_T {
        return Err(Error::param("q", format!("need q <= {MAX_PROGRESSION_T}, got {q}")));
    }
    let phi_q = ArithPoint::of(q)?.phi;
    let phi = phi_q as f64;
    // class counts; hist[v] = number of coprime classes holding v primes
    let mut counts = vec![0u32; q as usize];
    let mut hist: Vec<u64> = vec![phi_q];
    let (mut min_c, mut max_c) = (0usize, 0usize);
    let mut pi = 0u64;
    let mut worst: f64 = 0.0;
    let seg = crate::arith::DEFAULT_SEGMENT_SIZE;
    let mut lo = 2;
    while lo <= t_max {
        let hi = (lo + seg).min(t_max + 1);
        for p in primes_in(lo, hi) {
            pi += 1;
            let r = (p % q) as usize;
            if gcd(r as u64, q) == 1 {
                let v = counts[r] as usize;
                counts[r] += 1;
                hist[v] -= 1;
                if hist.len() <= v + 1 {
                    hist.push(0);
                }
                hist[v + 1] += 1;
                max_c = max_c.max(v + 1);
                while hist[min_c] == 0 {
                    min_c += 1;
                }
            }
            let mean = pi as f64 / phi;
            worst = worst.max(max_c as f64 - mean).max(mean - min_c as f64);
        }
        lo = hi;
    }
    Ok(worst)
}

/// Hypothesis sums over the m-range.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisSums {
    pub spec: String,
    pub x: u64,
    pub k: usize,
    /// Σ_{p <= y} Σ_{m <= x, p | a(m), p | b(m)} 1/m
    pub sum29: f64,
    /// Σ_d Σ_{1 < m < x compatible, not ideal} gcd(d, a(m))/(m·d)
    pub sum30: f64,
    pub d_count: usize,
    pub d_cap: u64,
    /// The d-list omitted admissible d above the cap.
    pub partial: bool,
    pub log_x: f64,
    pub log2_x: f64,
}

pub fn hypothesis_sums(
    spec: &FnSpec,
    x: u64,
    k: usize,
    window: &PrimeWindow,
    cap: u64,
    segment_size: u64,
) -> Result<HypothesisSums> {
    check_exact_x(x)?;
    if x < 2 {
        return Err(Error::param("x", "need x >= 2"));
    }
    let list = enumerate_ds(window, k, cap)?;
    // d's containing each window prime
    let mut by_prime: HashMap<u64, Vec<usize>> = HashMap::new();
    for (i, (_, ps)) in list.entries.iter().enumerate() {
        for &p in ps {
            by_prime.entry(p).or_default().push(i);
        }
    }
    let y_floor = window.y_floor();
    let sieve = Sieve::new(x + 1, segment_size)?;
    let parts: Vec<Result<(CompensatedSum, CompensatedSum)>> = sieve
        .segments(2, x + 1)
        .par_iter()
        .map(|&(lo, hi)| {
            let block = sieve.block(lo, hi)?;
            let mut s29 = CompensatedSum::default();
            let mut s30 = CompensatedSum::default();
            for m in lo..hi {
                if spec.family == Family::PhiShift && m <= spec.m0 {
                    continue;
                }
                let mut point = block.point(m)?;
                if spec.needs_prime_sums() {
                    point = point.with_prime_sums();
                }
                let lf = linear_form(spec, &point)?;
                let g = gcd(lf.a.unsigned_abs(), lf.b.unsigned_abs());
                if g == 1 {
                    continue;
                }
                let common: Vec<u64> = factorize(g).primes().collect();
                let small = common.iter().filter(|&&p| p <= y_floor).count();
                if small > 0 {
                    s29.add(small as f64 / m as f64);
                }
                if m >= x {
                    continue;
                }
                let in_window: Vec<u64> = common.iter().copied().filter(|&p| window.contains(p)).collect();
                for &p in &in_window {
                    for &i in by_prime.get(&p).into_iter().flatten() {
                        let (d, ps) = &list.entries[i];
                        // count each d once, at its smallest common prime
                        if ps.iter().any(|q| *q < p && in_window.contains(q)) {
                            continue;
                        }
                        if classify_coefficients(*d, lf) == MClass::CompatNotIdeal {
                            let gd = gcd(*d, lf.a.unsigned_abs());
                            s30.add(gd as f64 / (m as f64 * *d as f64));
                        }
                    }
                }
            }
            Ok((s29, s30))
        })
        .collect();
    let mut sum29 = CompensatedSum::default();
    let mut sum30 = CompensatedSum::default();
    for part in parts {
        let (a, b) = part?;
        sum29.add(a.value());
        sum30.add(b.value());
    }
    let xf = x as f64;
    Ok(HypothesisSums {
        spec: spec.to_string(),
        x,
        k,
        sum29: sum29.value(),
        sum30: sum30.value(),
        d_count: list.entries.len(),
        d_cap: cap,
        partial: list.truncated,
        log_x: xf.ln(),
        log2_x: iterated_log(xf, 2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classify_examples() {
        let s = FnSpec::s();
        assert_eq!(classify_m(5, 9, &s).unwrap(), MClass::Ideal);
        assert_eq!(classify_m(5, 95, &s).unwrap(), MClass::CompatNotIdeal);
        assert_eq!(classify_m(5, 14, &s).unwrap(), MClass::Incompatible);
        assert!(classify_m(9, 14, &s).is_err());
        assert!(classify_m(1, 14, &s).is_err());
    }

    #[test]
    fn congruence_cases() {
        // a ≡ 0, b ≢ 0 (mod 3): no admissible P
        let lf = LinearForm { a: 6, b: 4 };
        assert_eq!(solve_congruence(&[3, 5], lf), Congruence::Unsolvable);
        // p | a and p | b: no restriction mod p
        let lf = LinearForm { a: 3, b: 6 };
        assert_eq!(solve_congruence(&[3], lf), Congruence::Class { modulus: 1, residue: 0 });
        let lf = LinearForm { a: 7, b: -3 };
        match solve_congruence(&[3, 5, 11], lf) {
            Congruence::Class { modulus, residue } => {
                assert_eq!(modulus, 165);
                assert_eq!((residue as i64 * 7 - 3).rem_euclid(165), 0);
            }
            c => panic!("{c:?}"),
        }
    }

    #[test]
    fn progression_error_examples() {
        assert_eq!(progression_error(2, 3).unwrap(), 0.5);
        // primes 2, 3, 5: at t = 5 class 1 mod 3 is still empty against π/φ = 1.5
        assert_eq!(progression_error(10, 3).unwrap(), 1.5);
        assert!(progression_error(1, 3).is_err());
        assert!(progression_error(10, 1).is_err());
    }

    #[test]
    fn spread_selection() {
        let list = DList {
            entries: (1..=10).map(|d| (d, vec![d])).collect(),
            truncated: false,
        };
        assert_eq!(list.spread(3), vec![1, 5, 10]);
        assert_eq!(list.spread(20).len(), 10);
    }
}
