//! Arithmetic functions: segmented-sieve bulk evaluation of σ, φ, τ, ω and
//! the largest prime factor, pointwise evaluation through factorization,
//! and the linear forms `f(mP) = P·a(m) + b(m)` of each function family.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor::{factorize, Factorization};

/// Default number of integers per sieve segment.
pub const DEFAULT_SEGMENT_SIZE: u64 = 1 << 20;
/// Largest segment a single block may allocate (about 2.5 GiB of tables).
pub const MAX_SEGMENT_SIZE: u64 = 1 << 26;
/// Environment variable overriding [`DEFAULT_SEGMENT_SIZE`].
pub const SEGMENT_SIZE_ENV: &str = "EKLAB_SEGMENT_SIZE";

/// Segment length from `EKLAB_SEGMENT_SIZE`, else the default.
pub fn segment_size_from_env() -> Result<u64> {
    match std::env::var(SEGMENT_SIZE_ENV) {
        Ok(raw) => {
            let size: u64 = raw.trim().parse().map_err(|_| {
                Error::param("segment_size", format!("{SEGMENT_SIZE_ENV}={raw:?} is not an integer"))
            })?;
            if size == 0 || size > MAX_SEGMENT_SIZE {
                return Err(Error::param(
                    "segment_size",
                    format!("must lie in 1..={MAX_SEGMENT_SIZE}, got {size}"),
                ));
            }
            Ok(size)
        }
        Err(_) => Ok(DEFAULT_SEGMENT_SIZE),
    }
}

/// Primes `<= limit` by a plain sieve of Eratosthenes.
pub fn primes_up_to(limit: u64) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let limit = limit as usize;
    let mut composite = vec![false; limit + 1];
    let mut primes = Vec::new();
    for i in 2..=limit {
        if !composite[i] {
            primes.push(i as u64);
            if let Some(sq) = i.checked_mul(i) {
                for j in (sq..=limit).step_by(i) {
                    composite[j] = true;
                }
            }
        }
    }
    primes
}

/// Primes in the half-open range `[lo, hi)`, sieved in segments.
pub fn primes_in(lo: u64, hi: u64) -> Vec<u64> {
    if hi <= 2 || lo >= hi {
        return Vec::new();
    }
    let lo = lo.max(2);
    let base = primes_up_to(isqrt(hi - 1));
    let mut out = Vec::new();
    let seg = DEFAULT_SEGMENT_SIZE;
    let mut start = lo;
    while start < hi {
        let end = hi.min(start.saturating_add(seg));
        let mut composite = vec![false; (end - start) as usize];
        for &p in &base {
            if p * p >= end {
                break;
            }
            let first = (p * p).max(start.div_ceil(p) * p);
            for n in (first..end).step_by(p as usize) {
                composite[(n - start) as usize] = true;
            }
        }
        out.extend(
            composite
                .iter()
                .enumerate()
                .filter(|(_, &c)| !c)
                .map(|(i, _)| start + i as u64),
        );
        start = end;
    }
    out
}

pub(crate) fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r.checked_mul(r).is_none_or(|sq| sq > n) {
        r -= 1;
    }
    while (r + 1).checked_mul(r + 1).is_some_and(|sq| sq <= n) {
        r += 1;
    }
    r
}

/// The arithmetic functions whose Erdős–Kac behaviour is studied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    /// s(n) = σ(n) − n
    S,
    /// β(n), sum of distinct prime divisors
    Beta,
    /// A(n), sum of prime divisors with multiplicity
    BigA,
    /// n − φ(n)
    Cototient,
    NPlusTau,
    NMinusTau,
    NPlusOmega,
    NMinusOmega,
    /// φ(n) + a for a fixed nonzero shift a
    PhiShift,
}

/// A function family together with its shift and vanishing threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FnSpec {
    pub family: Family,
    /// The `a` of φ(n) + a; zero for all other families.
    pub shift: i64,
    /// `b(m)` may vanish only for `m <= m0`.
    pub m0: u64,
}

impl FnSpec {
    pub fn new(family: Family) -> Result<Self> {
        if family == Family::PhiShift {
            return Err(Error::domain("PhiShift needs a shift; use FnSpec::phi_shift"));
        }
        Ok(FnSpec {
            family,
            shift: 0,
            m0: 0,
        })
    }

    pub fn s() -> Self {
        FnSpec {
            family: Family::S,
            shift: 0,
            m0: 0,
        }
    }

    /// φ(n) + a. `m0` is the largest m with φ(m) = a (0 if a is not a totient).
    pub fn phi_shift(shift: i64) -> Result<Self> {
        if shift == 0 {
            return Err(Error::domain("shift of φ(n) + a must be nonzero"));
        }
        let m0 = if shift > 0 {
            inverse_totient(shift as u64).last().copied().unwrap_or(0)
        } else {
            0
        };
        Ok(FnSpec {
            family: Family::PhiShift,
            shift,
            m0,
        })
    }

    pub fn all_families_with_shift(shift: i64) -> Vec<FnSpec> {
        use Family::*;
        let mut v: Vec<FnSpec> = [S, Beta, BigA, Cototient, NPlusTau, NMinusTau, NPlusOmega, NMinusOmega]
            .into_iter()
            .map(|f| FnSpec::new(f).unwrap())
            .collect();
        v.push(FnSpec::phi_shift(shift).unwrap());
        v
    }

    /// Whether evaluating this family needs β or A.
    pub fn needs_prime_sums(&self) -> bool {
        matches!(self.family, Family::Beta | Family::BigA)
    }
}

impl fmt::Display for FnSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::S => write!(f, "s"),
            Family::Beta => write!(f, "beta"),
            Family::BigA => write!(f, "A"),
            Family::Cototient => write!(f, "cototient"),
            Family::NPlusTau => write!(f, "n+tau"),
            Family::NMinusTau => write!(f, "n-tau"),
            Family::NPlusOmega => write!(f, "n+omega"),
            Family::NMinusOmega => write!(f, "n-omega"),
            Family::PhiShift => write!(f, "phi{:+}", self.shift),
        }
    }
}

impl FromStr for FnSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let family = match s {
            "s" => Family::S,
            "beta" => Family::Beta,
            "A" | "bigA" | "big-a" => Family::BigA,
            "cototient" | "n-phi" => Family::Cototient,
            "n+tau" => Family::NPlusTau,
            "n-tau" => Family::NMinusTau,
            "n+omega" => Family::NPlusOmega,
            "n-omega" => Family::NMinusOmega,
            _ => {
                if let Some(rest) = s.strip_prefix("phi") {
                    let shift: i64 = rest
                        .strip_prefix('+')
                        .unwrap_or(rest)
                        .parse()
                        .map_err(|_| Error::domain(format!("bad shift in {s:?}")))?;
                    return FnSpec::phi_shift(shift);
                }
                return Err(Error::domain(format!(
                    "unknown function {s:?} (expected s, beta, A, cototient, n+tau, n-tau, n+omega, n-omega, phi+<a>)"
                )));
            }
        };
        FnSpec::new(family)
    }
}

/// All m with φ(m) = `target`, ascending.
pub fn inverse_totient(target: u64) -> Vec<u64> {
    if target == 0 {
        return Vec::new();
    }
    // candidate primes p have (p − 1) | target
    let fac = factorize(target);
    let mut divisors = vec![1u64];
    for &(p, e) in fac.factors() {
        let len = divisors.len();
        let mut pk = 1;
        for _ in 0..e {
            pk *= p;
            for i in 0..len {
                divisors.push(divisors[i] * pk);
            }
        }
    }
    let mut candidates: Vec<u64> = divisors
        .into_iter()
        .filter_map(|d| d.checked_add(1))
        .filter(|&p| crate::factor::is_prime(p))
        .collect();
    candidates.sort_unstable();

    fn search(rem: u64, from: usize, cands: &[u64], m: u64, out: &mut Vec<u64>) {
        if rem == 1 {
            out.push(m);
        }
        for (i, &p) in cands.iter().enumerate().skip(from) {
            if rem % (p - 1) != 0 {
                continue;
            }
            let mut r = rem / (p - 1);
            let mut pk = p;
            loop {
                if let Some(next) = m.checked_mul(pk) {
                    search(r, i + 1, cands, next, out);
                }
                if r % p != 0 {
                    break;
                }
                r /= p;
                pk = match pk.checked_mul(p) {
                    Some(v) => v,
                    None => break,
                };
            }
        }
    }

    let mut out = Vec::new();
    search(target, 0, &candidates, 1, &mut out);
    out.sort_unstable();
    out.dedup();
    out
}

/// Values of the multiplicative functions at one integer. `beta`/`big_a`
/// are filled only when the point came from a factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArithPoint {
    pub n: u64,
    pub sigma: u64,
    pub phi: u64,
    pub tau: u64,
    pub omega: u32,
    pub lpf: u64,
    pub lpf_sq_divides: bool,
    pub beta: Option<u64>,
    pub big_a: Option<u64>,
}

impl ArithPoint {
    pub fn from_factorization(fac: &Factorization) -> Result<Self> {
        let n = fac.value();
        if n == 0 {
            return Err(Error::domain("arithmetic functions are defined for n >= 1"));
        }
        let overflow = || Error::Overflow(format!("σ({n}) exceeds 64 bits"));
        let (mut sigma, mut phi, mut tau) = (1u64, 1u64, 1u64);
        let (mut beta, mut big_a) = (0u64, 0u64);
        for &(p, e) in fac.factors() {
            let mut term = 1u64;
            let mut pk = 1u64;
            for _ in 0..e {
                pk = pk.checked_mul(p).ok_or_else(overflow)?;
                term = term.checked_add(pk).ok_or_else(overflow)?;
            }
            sigma = sigma.checked_mul(term).ok_or_else(overflow)?;
            phi *= pk / p * (p - 1);
            tau *= e as u64 + 1;
            beta += p;
            big_a += e as u64 * p;
        }
        let last = fac.factors().last();
        Ok(ArithPoint {
            n,
            sigma,
            phi,
            tau,
            omega: fac.omega(),
            lpf: last.map_or(1, |&(p, _)| p),
            lpf_sq_divides: last.is_some_and(|&(_, e)| e >= 2),
            beta: Some(beta),
            big_a: Some(big_a),
        })
    }

    /// Pointwise evaluation by factoring `n`.
    pub fn of(n: u64) -> Result<Self> {
        Self::from_factorization(&factorize(n))
    }

    /// Fills β and A by factoring, if absent.
    pub fn with_prime_sums(mut self) -> Self {
        if self.beta.is_none() || self.big_a.is_none() {
            let fac = factorize(self.n);
            self.beta = Some(fac.primes().sum());
            self.big_a = Some(fac.factors().iter().map(|&(p, e)| e as u64 * p).sum());
        }
        self
    }
}

/// Precomputed arithmetic data for the integers in `[lo, hi)`.
#[derive(Debug, Clone)]
pub struct SieveBlock {
    pub lo: u64,
    pub hi: u64,
    pub sigma: Vec<u64>,
    pub phi: Vec<u64>,
    pub tau: Vec<u64>,
    pub omega_small: Vec<u8>,
    pub lpf: Vec<u64>,
    lpf_sq: Vec<u64>,
}

impl SieveBlock {
    pub fn len(&self) -> usize {
        (self.hi - self.lo) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.hi == self.lo
    }

    pub fn contains(&self, n: u64) -> bool {
        (self.lo..self.hi).contains(&n)
    }

    /// True iff P⁺(n)² divides n.
    pub fn lpf_sq_divides(&self, n: u64) -> bool {
        let i = (n - self.lo) as usize;
        self.lpf_sq[i / 64] >> (i % 64) & 1 == 1
    }

    fn index(&self, n: u64) -> Result<usize> {
        if !self.contains(n) {
            return Err(Error::domain(format!(
                "{n} outside sieve block [{}, {})",
                self.lo, self.hi
            )));
        }
        Ok((n - self.lo) as usize)
    }

    pub fn point(&self, n: u64) -> Result<ArithPoint> {
        let i = self.index(n)?;
        Ok(ArithPoint {
            n,
            sigma: self.sigma[i],
            phi: self.phi[i],
            tau: self.tau[i],
            omega: self.omega_small[i] as u32,
            lpf: self.lpf[i],
            lpf_sq_divides: self.lpf_sq_divides(n),
            beta: None,
            big_a: None,
        })
    }
}

/// Sieve driver: owns the base primes up to `sqrt(max_hi)`.
#[derive(Debug, Clone)]
pub struct Sieve {
    max_hi: u64,
    segment_size: u64,
    base_primes: Vec<u64>,
}

impl Sieve {
    pub fn new(max_hi: u64, segment_size: u64) -> Result<Self> {
        if max_hi > 1 << 63 {
            return Err(Error::domain(format!("sieve bound {max_hi} exceeds 2^63")));
        }
        if segment_size == 0 || segment_size > MAX_SEGMENT_SIZE {
            return Err(Error::Resource(format!(
                "segment size {segment_size} outside 1..={MAX_SEGMENT_SIZE}"
            )));
        }
        let root = isqrt(max_hi.saturating_sub(1));
        if root > u32::MAX as u64 {
            return Err(Error::Resource(format!("base primes up to {root} do not fit in memory")));
        }
        Ok(Sieve {
            max_hi,
            segment_size,
            base_primes: primes_up_to(root),
        })
    }

    pub fn segment_size(&self) -> u64 {
        self.segment_size
    }

    /// Disjoint segments covering `[lo, hi)`.
    pub fn segments(&self, lo: u64, hi: u64) -> Vec<(u64, u64)> {
        let mut out = Vec::new();
        let mut start = lo;
        while start < hi {
            let end = hi.min(start + self.segment_size);
            out.push((start, end));
            start = end;
        }
        out
    }

    pub fn block(&self, lo: u64, hi: u64) -> Result<SieveBlock> {
        if lo < 2 {
            return Err(Error::domain(format!("sieve block must start at lo >= 2, got {lo}")));
        }
        if lo >= hi {
            return Err(Error::domain(format!("empty sieve block [{lo}, {hi})")));
        }
        if hi > self.max_hi {
            return Err(Error::domain(format!(
                "block end {hi} beyond sieve bound {}",
                self.max_hi
            )));
        }
        if hi - lo > self.segment_size {
            return Err(Error::Resource(format!(
                "segment of {} entries exceeds the configured size {}",
                hi - lo,
                self.segment_size
            )));
        }
        let len = (hi - lo) as usize;
        let mut rem: Vec<u64> = (lo..hi).collect();
        let mut sigma = vec![1u64; len];
        let mut phi = vec![1u64; len];
        let mut tau = vec![1u64; len];
        let mut omega = vec![0u8; len];
        let mut lpf = vec![1u64; len];
        let mut lpf_exp = vec![0u8; len];
        let overflow = |n: u64| Error::Overflow(format!("σ({n}) exceeds 64 bits"));

        for &p in &self.base_primes {
            if p * p >= hi {
                break;
            }
            let first = lo.div_ceil(p) * p;
            for n in (first..hi).step_by(p as usize) {
                let i = (n - lo) as usize;
                let mut e = 0u8;
                let mut pk = 1u64;
                let mut term = 1u64;
                while rem[i] % p == 0 {
                    rem[i] /= p;
                    e += 1;
                    pk *= p;
                    term += pk;
                }
                sigma[i] = sigma[i].checked_mul(term).ok_or_else(|| overflow(n))?;
                phi[i] *= pk / p * (p - 1);
                tau[i] *= e as u64 + 1;
                omega[i] += 1;
                lpf[i] = p;
                lpf_exp[i] = e;
            }
        }
        let mut lpf_sq = vec![0u64; len.div_ceil(64)];
        for i in 0..len {
            let q = rem[i];
            if q > 1 {
                let n = lo + i as u64;
                sigma[i] = sigma[i].checked_mul(q + 1).ok_or_else(|| overflow(n))?;
                phi[i] *= q - 1;
                tau[i] *= 2;
                omega[i] += 1;
                lpf[i] = q;
                lpf_exp[i] = 1;
            }
            if lpf_exp[i] >= 2 {
                lpf_sq[i / 64] |= 1 << (i % 64);
            }
        }
        Ok(SieveBlock {
            lo,
            hi,
            sigma,
            phi,
            tau,
            omega_small: omega,
            lpf,
            lpf_sq,
        })
    }
}

/// Sieves the single block `[lo, hi)` with the segment size from the
/// environment.
pub fn sieve_block(lo: u64, hi: u64) -> Result<SieveBlock> {
    if lo < 2 {
        return Err(Error::domain(format!("sieve block must start at lo >= 2, got {lo}")));
    }
    Sieve::new(hi, segment_size_from_env()?)?.block(lo, hi)
}

/// s(n) = σ(n) − n read from a block.
pub fn s_of(n: u64, block: &SieveBlock) -> Result<u64> {
    if n < 2 {
        return Err(Error::domain(format!("s(n) requires n >= 2, got {n}")));
    }
    let p = block.point(n)?;
    Ok(p.sigma - n)
}

/// β(n), the sum of the distinct primes dividing n.
pub fn beta(n: u64) -> Result<u64> {
    if n < 2 {
        return Err(Error::domain(format!("β(n) requires n >= 2, got {n}")));
    }
    Ok(factorize(n).primes().sum())
}

/// A(n), the sum of prime divisors counted with multiplicity.
pub fn big_a(n: u64) -> Result<u64> {
    if n < 2 {
        return Err(Error::domain(format!("A(n) requires n >= 2, got {n}")));
    }
    Ok(factorize(n).factors().iter().map(|&(p, e)| e as u64 * p).sum())
}

fn to_i64(v: u64) -> Result<i64> {
    i64::try_from(v).map_err(|_| Error::Overflow(format!("{v} does not fit in i64")))
}

fn prime_sums(spec: &FnSpec, point: &ArithPoint) -> Result<(u64, u64)> {
    match (point.beta, point.big_a) {
        (Some(b), Some(a)) => Ok((b, a)),
        _ => Err(Error::domain(format!(
            "{spec} needs β/A at {}; call with_prime_sums first",
            point.n
        ))),
    }
}

/// Direct evaluation of f(n).
pub fn f_value(spec: &FnSpec, point: &ArithPoint) -> Result<i64> {
    let n = to_i64(point.n)?;
    let sigma = to_i64(point.sigma)?;
    let phi = to_i64(point.phi)?;
    let tau = point.tau as i64;
    let omega = point.omega as i64;
    let v = match spec.family {
        Family::S => Some(sigma - n),
        Family::Beta => Some(to_i64(prime_sums(spec, point)?.0)?),
        Family::BigA => Some(to_i64(prime_sums(spec, point)?.1)?),
        Family::Cototient => Some(n - phi),
        Family::NPlusTau => n.checked_add(tau),
        Family::NMinusTau => Some(n - tau),
        Family::NPlusOmega => n.checked_add(omega),
        Family::NMinusOmega => Some(n - omega),
        Family::PhiShift => phi.checked_add(spec.shift),
    };
    v.ok_or_else(|| Error::Overflow(format!("{spec} at {}", point.n)))
}

/// Coefficients of `f(mP) = P·a(m) + b(m)`, valid for every prime P ∤ m.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LinearForm {
    pub a: i64,
    pub b: i64,
}

impl LinearForm {
    /// `b(m) = 0`: only possible for φ(n) + a at m <= m0.
    pub fn is_degenerate(&self) -> bool {
        self.a == 0 || self.b == 0
    }

    /// P·a + b, or `None` on overflow.
    pub fn eval(&self, prime: u64) -> Option<i64> {
        i64::try_from(prime).ok()?.checked_mul(self.a)?.checked_add(self.b)
    }
}

/// The linear form of `spec` at `m` (`m >= 2`).
pub fn linear_form(spec: &FnSpec, point: &ArithPoint) -> Result<LinearForm> {
    let m = point.n;
    if m < 2 {
        return Err(Error::domain(format!("linear form requires m >= 2, got {m}")));
    }
    let mi = to_i64(m)?;
    let sigma = to_i64(point.sigma)?;
    let phi = to_i64(point.phi)?;
    let tau = point.tau as i64;
    let omega = point.omega as i64;
    let (a, b) = match spec.family {
        Family::S => (sigma - mi, sigma),
        Family::Beta => (1, to_i64(prime_sums(spec, point)?.0)?),
        Family::BigA => (1, to_i64(prime_sums(spec, point)?.1)?),
        Family::Cototient => (mi - phi, phi),
        Family::NPlusTau => (mi, 2 * tau),
        Family::NMinusTau => (mi, -2 * tau),
        Family::NPlusOmega => (mi, omega + 1),
        Family::NMinusOmega => (mi, -(omega + 1)),
        Family::PhiShift => (phi, spec.shift - phi),
    };
    Ok(LinearForm { a, b })
}
