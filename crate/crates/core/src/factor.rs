//! Exact factorization of 64-bit integers.
//!
//! Values are stripped of primes below 1000 by trial division; whatever
//! composite cofactor remains is split with Brent's variant of Pollard rho,
//! using 128-bit intermediate products. Primality is decided by
//! Miller–Rabin with witness sets that are deterministic below 2^64.

use std::sync::OnceLock;

use crate::model::PrimeWindow;

const TRIAL_LIMIT: u64 = 1000;

/// Primes below [`TRIAL_LIMIT`], built once.
fn trial_primes() -> &'static [u64] {
    static TABLE: OnceLock<Vec<u64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut composite = vec![false; TRIAL_LIMIT as usize];
        let mut primes = Vec::new();
        for i in 2..TRIAL_LIMIT as usize {
            if !composite[i] {
                primes.push(i as u64);
                for j in (i * i..TRIAL_LIMIT as usize).step_by(i) {
                    composite[j] = true;
                }
            }
        }
        primes
    })
}

#[inline]
fn mul_mod(a: u64, b: u64, n: u64) -> u64 {
    ((a as u128 * b as u128) % n as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, n: u64) -> u64 {
    let mut acc = 1 % n;
    base %= n;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, n);
        }
        base = mul_mod(base, base, n);
        exp >>= 1;
    }
    acc
}

pub(crate) fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// One strong-probable-prime round; `n` odd, `n > 3`.
fn sprp(n: u64, witness: u64) -> bool {
    let a = witness % n;
    if a == 0 {
        return true;
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    let mut x = pow_mod(a, d, n);
    if x == 1 || x == n - 1 {
        return true;
    }
    for _ in 1..s {
        x = mul_mod(x, x, n);
        if x == n - 1 {
            return true;
        }
    }
    false
}

/// Deterministic primality test for every `u64`.
pub fn is_prime(v: u64) -> bool {
    if v < 2 {
        return false;
    }
    for &p in trial_primes().iter().take(12) {
        if v == p {
            return true;
        }
        if v % p == 0 {
            return false;
        }
    }
    // no factor below 41
    if v < 41 * 41 {
        return true;
    }
    let witnesses: &[u64] = if v < 4_759_123_141 {
        &[2, 7, 61]
    } else {
        &[2, 325, 9375, 28178, 450775, 9780504, 1795265022]
    };
    witnesses.iter().all(|&a| sprp(v, a))
}

/// Brent's cycle-finding rho on `x -> x^2 + c (mod n)`. Returns a proper
/// divisor, or `None` when this `c` degenerates.
fn brent_rho(n: u64, c: u64) -> Option<u64> {
    const BATCH: u64 = 128;
    let f = |v: u64| ((mul_mod(v, v, n) as u128 + c as u128) % n as u128) as u64;
    let mut y = 2 % n;
    let mut x = y;
    let mut ys = y;
    let mut q = 1u64;
    let mut g = 1u64;
    let mut r = 1u64;
    while g == 1 {
        x = y;
        for _ in 0..r {
            y = f(y);
        }
        let mut k = 0;
        while k < r && g == 1 {
            ys = y;
            for _ in 0..BATCH.min(r - k) {
                y = f(y);
                q = mul_mod(q, x.abs_diff(y), n);
            }
            g = gcd(q, n);
            k += BATCH;
        }
        r <<= 1;
    }
    if g == n {
        // the batch overshot; replay it one step at a time
        loop {
            ys = f(ys);
            g = gcd(x.abs_diff(ys), n);
            if g > 1 {
                break;
            }
        }
    }
    (g != n).then_some(g)
}

/// Finds a nontrivial divisor of the odd composite `n`. The polynomial
/// constant is derived from `n` so results never depend on call order.
fn split(n: u64) -> u64 {
    let mut c = 1 + n % 61;
    loop {
        if let Some(g) = brent_rho(n, c) {
            return g;
        }
        c += 1;
    }
}

/// Prime factorization of a 64-bit value: `(prime, exponent)` pairs in
/// strictly increasing prime order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Factorization {
    value: u64,
    factors: Vec<(u64, u32)>,
}

impl Factorization {
    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn factors(&self) -> &[(u64, u32)] {
        &self.factors
    }

    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.factors.iter().map(|&(p, _)| p)
    }

    /// Number of distinct prime factors.
    pub fn omega(&self) -> u32 {
        self.factors.len() as u32
    }

    /// Prime factors counted with multiplicity.
    pub fn omega_prime(&self) -> u32 {
        self.factors.iter().map(|&(_, e)| e).sum()
    }

    /// Largest prime factor, with the convention `P+(1) = 1`.
    pub fn largest_prime(&self) -> u64 {
        self.factors.last().map_or(1, |&(p, _)| p)
    }

    pub fn is_squarefree(&self) -> bool {
        self.factors.iter().all(|&(_, e)| e == 1)
    }
}

/// Factors `v` completely. `factorize(0)` and `factorize(1)` both return
/// the empty product.
pub fn factorize(v: u64) -> Factorization {
    let mut factors: Vec<(u64, u32)> = Vec::new();
    if v <= 1 {
        return Factorization { value: v, factors };
    }
    let mut rem = v;
    for &p in trial_primes() {
        if p * p > rem {
            break;
        }
        if rem % p == 0 {
            let mut e = 0;
            while rem % p == 0 {
                rem /= p;
                e += 1;
            }
            factors.push((p, e));
        }
    }
    if rem > 1 {
        if rem < TRIAL_LIMIT * TRIAL_LIMIT {
            factors.push((rem, 1));
        } else {
            let mut large = Vec::new();
            let mut stack = vec![rem];
            while let Some(n) = stack.pop() {
                if is_prime(n) {
                    large.push(n);
                } else {
                    let g = split(n);
                    stack.push(g);
                    stack.push(n / g);
                }
            }
            large.sort_unstable();
            for p in large {
                match factors.last_mut() {
                    Some((q, e)) if *q == p => *e += 1,
                    _ => factors.push((p, 1)),
                }
            }
        }
    }
    Factorization { value: v, factors }
}

/// Counts the distinct primes `p | v` lying in the window `(y, z]`.
pub fn omega_in_window(v: u64, window: &PrimeWindow) -> u32 {
    factorize(v).primes().filter(|&p| window.contains(p)).count() as u32
}
