//! Computational companion to the Erdős–Kac law for `ω(s(n))`, where
//! `s(n) = σ(n) − n`, and for a family of related arithmetic functions.
//!
//! * [`arith`]: segmented sieving of σ, φ, τ, ω and P⁺, the function
//!   families and their linear forms `f(mP) = P·a(m) + b(m)`.
//! * [`factor`]: deterministic 64-bit primality and factorization.
//! * [`model`]: the prime window and the independent-Bernoulli model.
//! * [`sample`]: the sample space Ω and mergeable per-run summaries.
//! * [`census`]: exact two-sided divisibility counts and hypothesis sums.
//! * [`stats`]: normal CDF, empirical CDFs, KS distance, histograms.

pub mod arith;
pub mod census;
pub mod error;
pub mod factor;
pub mod model;
pub mod sample;
pub mod stats;

pub use arith::{f_value, linear_form, sieve_block, ArithPoint, Family, FnSpec, LinearForm, Sieve, SieveBlock};
pub use error::{Error, Result};
pub use factor::{factorize, is_prime, omega_in_window, Factorization};
pub use model::{build_window, LogFloors, MomentReport, PrimeWindow, WindowOverrides};
pub use sample::{run_sample, Population, RunOptions, SampleConfig, SampleRecord, SampleSummary};
