//! Distribution comparisons against the standard normal: Φ, empirical CDFs,
//! the Kolmogorov–Smirnov distance and binned histograms.

use serde::Serialize;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Standard normal CDF.
pub fn normal_cdf(u: f64) -> f64 {
    0.5 * erfc(-u / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Empirical distribution stored as sorted distinct atoms with
/// multiplicities, so integer-valued statistics over 10⁸ points stay small.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    atoms: Vec<(f64, u64)>,
    n: u64,
}

impl Ecdf {
    pub fn new(scores: &[f64]) -> Result<Self> {
        Self::from_weighted(scores.iter().map(|&s| (s, 1)))
    }

    /// Builds from `(value, count)` pairs; zero counts are dropped.
    pub fn from_weighted(pairs: impl IntoIterator<Item = (f64, u64)>) -> Result<Self> {
        let mut atoms: Vec<(f64, u64)> = pairs.into_iter().filter(|&(_, c)| c > 0).collect();
        if atoms.iter().any(|(v, _)| v.is_nan()) {
            return Err(Error::domain("NaN score"));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, u64)> = Vec::with_capacity(atoms.len());
        for (v, c) in atoms {
            match merged.last_mut() {
                Some((w, d)) if *w == v => *d += c,
                _ => merged.push((v, c)),
            }
        }
        let n = merged.iter().map(|&(_, c)| c).sum();
        if n == 0 {
            return Err(Error::domain("empirical CDF needs at least one score"));
        }
        Ok(Ecdf { atoms: merged, n })
    }

    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn atoms(&self) -> &[(f64, u64)] {
        &self.atoms
    }

    /// Fraction of scores `<= u`.
    pub fn eval(&self, u: f64) -> f64 {
        let idx = self.atoms.partition_point(|&(v, _)| v <= u);
        let below: u64 = self.atoms[..idx].iter().map(|&(_, c)| c).sum();
        below as f64 / self.n as f64
    }
}

/// `sup_u |F_n(u) − Φ(u)|`, checked on both sides of every jump.
pub fn ks_distance(e: &Ecdf) -> f64 {
    let n = e.n as f64;
    let mut below = 0u64;
    let mut d: f64 = 0.0;
    for &(v, c) in &e.atoms {
        let phi = normal_cdf(v);
        let left = below as f64 / n;
        below += c;
        let right = below as f64 / n;
        d = d.max((phi - left).abs()).max((right - phi).abs());
    }
    d
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: u64,
    pub normal_mass: f64,
}

/// Histogram over `[lo, hi)` with `bins` equal-width bins, plus flanking
/// overflow bins `(-inf, lo)` and `[hi, inf)`. Normal masses are matched
/// bin by bin.
pub fn histogram(e: &Ecdf, bins: usize, lo: f64, hi: f64) -> Result<Vec<HistogramBin>> {
    if bins == 0 {
        return Err(Error::param("bins", "need at least one bin"));
    }
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::param("range", format!("need finite lo < hi, got ({lo}, {hi})")));
    }
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
    edges[bins] = hi;
    let mut out = Vec::with_capacity(bins + 2);
    out.push(HistogramBin {
        bin_lo: f64::NEG_INFINITY,
        bin_hi: lo,
        count: 0,
        normal_mass: normal_cdf(lo),
    });
    for w in edges.windows(2) {
        out.push(HistogramBin {
            bin_lo: w[0],
            bin_hi: w[1],
            count: 0,
            normal_mass: normal_cdf(w[1]) - normal_cdf(w[0]),
        });
    }
    out.push(HistogramBin {
        bin_lo: hi,
        bin_hi: f64::INFINITY,
        count: 0,
        normal_mass: 1.0 - normal_cdf(hi),
    });
    for &(v, c) in &e.atoms {
        let slot = if v < lo {
            0
        } else if v >= hi {
            bins + 1
        } else {
            // partition_point guards against rounding in (v − lo)/width
            1 + edges[1..bins].partition_point(|&edge| edge <= v)
        };
        out[slot].count += c;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cdf_reference_values() {
        // high-precision reference values of Φ
        let table = [
            (0.0, 0.5),
            (1.0, 0.841_344_746_068_542_9),
            (1.96, 0.975_002_104_851_78),
            (-2.5, 0.006_209_665_325_776_132),
            (3.0, 0.998_650_101_968_369_9),
            (-6.0, 9.865_876_450_376_98e-10),
        ];
        for (u, phi) in table {
            assert_abs_diff_eq!(normal_cdf(u), phi, epsilon = 1e-10);
            assert!((normal_cdf(u) - phi).abs() <= 1e-9 * phi);
        }
    }

    #[test]
    fn cdf_symmetry_and_monotonicity() {
        let mut prev = 0.0;
        for i in 0..10_000 {
            let u = -8.0 + 16.0 * i as f64 / 9_999.0;
            let v = normal_cdf(u);
            assert!(v >= prev);
            assert_abs_diff_eq!(v, 1.0 - normal_cdf(-u), epsilon = 1e-7);
            prev = v;
        }
    }

    #[test]
    fn single_score_ks() {
        let e = Ecdf::new(&[0.0]).unwrap();
        assert_abs_diff_eq!(ks_distance(&e), 0.5, epsilon = 1e-15);
        assert!(Ecdf::new(&[]).is_err());
        assert!(Ecdf::new(&[f64::NAN]).is_err());
    }

    #[test]
    fn ecdf_limits() {
        let e = Ecdf::new(&[1.0, -1.0, 1.0, 2.0]).unwrap();
        assert_eq!(e.eval(f64::NEG_INFINITY), 0.0);
        assert_eq!(e.eval(1.0), 0.75);
        assert_eq!(e.eval(f64::INFINITY), 1.0);
        assert_eq!(e.len(), 4);
    }

    #[test]
    fn weighted_matches_expanded() {
        let e1 = Ecdf::from_weighted([(0.5, 3), (-1.0, 2), (0.5, 1)]).unwrap();
        let e2 = Ecdf::new(&[0.5, 0.5, -1.0, 0.5, -1.0, 0.5]).unwrap();
        assert_eq!(e1, e2);
        assert_eq!(ks_distance(&e1), ks_distance(&e2));
    }

    #[test]
    fn histogram_overflow_and_symmetry() {
        let e = Ecdf::new(&[-10.0, -9.0]).unwrap();
        let h = histogram(&e, 4, -1.0, 1.0).unwrap();
        assert_eq!(h.len(), 6);
        assert_eq!(h[0].count, 2);

        let e = Ecdf::new(&[-3.0, 0.0, 2.5]).unwrap();
        let h = histogram(&e, 1, -1e6, 1e6).unwrap();
        assert_eq!(h[1].count, 3);

        let h = histogram(&e, 40, -4.0, 4.0).unwrap();
        for i in 0..h.len() {
            assert_abs_diff_eq!(h[i].normal_mass, h[h.len() - 1 - i].normal_mass, epsilon = 1e-15);
        }
        let total: f64 = h.iter().map(|b| b.normal_mass).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        assert!(histogram(&e, 0, -1.0, 1.0).is_err());
        assert!(histogram(&e, 3, 1.0, 1.0).is_err());
    }

    #[test]
    fn histogram_edges_are_half_open() {
        let e = Ecdf::new(&[-1.0, -0.5, 0.0, 0.5, 1.0]).unwrap();
        let h = histogram(&e, 4, -1.0, 1.0).unwrap();
        let counts: Vec<u64> = h.iter().map(|b| b.count).collect();
        assert_eq!(counts, vec![0, 1, 1, 1, 1, 1]);
    }
}
