//! One randomized or deterministic suite per subcommand.
//!
//! Every suite draws trial `i` from `stream(seed, i)`, evaluates trials in
//! parallel and folds the results in index order, so reports do not depend on
//! the thread count.

use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use phess_core::linalg::SymMatrix;
use phess_core::rng::{normal, stream, Rng};
use phess_core::spectral::orthonormalize;
use phess_core::subsolution::sample_in_cone;

pub mod alexandrov;
pub mod concavity;
pub mod derivs;
pub mod identities;
pub mod inequalities;
pub mod key_lemma;
pub mod pseudo;
pub mod solve;
pub mod subsolution;

/// What every suite result exposes to the report writer.
pub trait SuiteResult: Serialize {
    /// Number of invariant violations beyond tolerance.
    fn violations(&self) -> usize;
    /// Full input of the first violation, for replay.
    fn counterexample(&self) -> Option<Value>;
    /// Flat per-case rows for CSV output.
    fn rows(&self) -> Vec<Value>;
}

/// Maps `f` over trial indices 0..count in parallel, keeping index order.
pub fn par_trials<T: Send>(count: usize, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    (0..count as u64).into_par_iter().map(f).collect()
}

/// Index of trial `t` of group `g`, so groups use disjoint streams.
pub fn trial_index(g: usize, t: usize) -> u64 {
    ((g as u64) << 32) | t as u64
}

pub fn trial_rng(seed: u64, index: u64) -> Rng {
    stream(seed, index)
}

/// |lhs − rhs| or the slack, scaled by max(1, |lhs|, |rhs|).
pub fn relative(x: f64, lhs: f64, rhs: f64) -> f64 {
    x / 1f64.max(lhs.abs()).max(rhs.abs())
}

/// A point of Γ_p scaled to unit ∞-norm.
pub fn unit_cone_vector(n: usize, p: usize, rng: &mut Rng) -> Vec<f64> {
    let mut mu = sample_in_cone(n, p, rng);
    let m = mu.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    mu.iter_mut().for_each(|v| *v /= m);
    mu
}

/// Symmetric matrix with standard normal entries.
pub fn random_symmetric(n: usize, rng: &mut Rng) -> SymMatrix {
    let rows: Vec<f64> = (0..n * n).map(|_| normal(rng)).collect();
    SymMatrix::symmetrize(n, &rows)
}

/// Random orthogonal matrix, row-major.
pub fn random_orthogonal(n: usize, rng: &mut Rng) -> Vec<f64> {
    let m: Vec<f64> = (0..n * n).map(|_| normal(rng)).collect();
    orthonormalize(n, &m)
}

/// Positive diagonal entries e^{z/2}, z standard normal.
pub fn random_positive(n: usize, rng: &mut Rng) -> Vec<f64> {
    (0..n).map(|_| (0.5 * normal(rng)).exp()).collect()
}

pub fn uniform_usize(rng: &mut Rng, lo: usize, hi: usize) -> usize {
    rng.gen_range(lo..=hi)
}

/// Extreme value of a statistic with the first trial index attaining it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extreme {
    pub value: f64,
    pub index: Option<u64>,
}

impl Extreme {
    /// Tracker for a minimum.
    pub fn min() -> Self {
        Extreme { value: f64::INFINITY, index: None }
    }

    /// Tracker for a maximum.
    pub fn max() -> Self {
        Extreme { value: f64::NEG_INFINITY, index: None }
    }

    pub fn lower(&mut self, value: f64, index: u64) {
        if self.index.is_none() || value < self.value {
            *self = Extreme { value, index: Some(index) };
        }
    }

    pub fn raise(&mut self, value: f64, index: u64) {
        if self.index.is_none() || value > self.value {
            *self = Extreme { value, index: Some(index) };
        }
    }
}
