//! Falsification of the large-μ_1 concavity inequality and the threshold search.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use phess_core::concavity::{
    evaluate, find_threshold, hypothesis_check, sample_large_mu1, CVec, ConcavityInstance, Mode, ThresholdConfig,
    ThresholdResult,
};
use phess_core::{Error, Result};

use super::{par_trials, relative, trial_index, trial_rng, Extreme, SuiteResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FuzzConfig {
    /// Dimensions, cycled through by trial index.
    pub n_values: Vec<usize>,
    pub taus: Vec<f64>,
    /// Positions of a inside ((1−τ)/(1+τ), n−1], as fractions.
    pub a_fractions: Vec<f64>,
    pub samples: usize,
    /// Redraws per trial before the trial is counted as unsampled.
    pub max_draws: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        FuzzConfig {
            n_values: vec![3, 4, 5],
            taus: vec![0.0, 0.25, 0.5],
            a_fractions: vec![1.0 / 3.0, 2.0 / 3.0],
            samples: 100_000,
            max_draws: 1000,
            tol: 1e-9,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FuzzGroup {
    pub n: usize,
    pub samples: usize,
    pub worst_residual: f64,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FuzzResult {
    pub groups: Vec<FuzzGroup>,
    /// Trials whose draws all failed the hypothesis.
    pub unsampled: usize,
    /// Draws rejected by the hypothesis check.
    pub rejected_draws: usize,
    /// Smallest residual scaled by max(1, |lhs|, |rhs|).
    pub worst_residual: f64,
    pub worst_index: Option<u64>,
    pub max_imag: f64,
    pub violations: usize,
    /// Also reported at the top of the envelope.
    #[serde(skip)]
    pub counterexample: Option<Value>,
}

impl SuiteResult for FuzzResult {
    fn violations(&self) -> usize {
        self.violations
    }
    fn counterexample(&self) -> Option<Value> {
        self.counterexample.clone()
    }
    fn rows(&self) -> Vec<Value> {
        self.groups.iter().map(|g| serde_json::to_value(g).unwrap()).collect()
    }
}

/// A hypothesis-satisfying instance for trial `index`, with the rejected draw count.
fn draw(cfg: &FuzzConfig, index: u64) -> (Option<ConcavityInstance>, usize) {
    let mut rng = trial_rng(cfg.seed, index);
    let n = cfg.n_values[index as usize % cfg.n_values.len()];
    let tau = *cfg.taus.choose(&mut rng).unwrap();
    let r = (1.0 - tau) / (1.0 + tau);
    let a = r + cfg.a_fractions.choose(&mut rng).unwrap() * ((n - 1) as f64 - r);
    let eps = 10f64.powf(rng.gen_range(-1.0..0.5));
    for k in 0..cfg.max_draws {
        let mu = sample_large_mu1(n, tau, eps, a, &mut rng);
        let w = CVec::random_unit(n, &mut rng);
        let inst = ConcavityInstance { mu, w, tau, eps, mode: Mode::LargeMu1 { a } };
        if hypothesis_check(&inst) {
            return (Some(inst), k);
        }
    }
    (None, cfg.max_draws)
}

pub fn fuzz(cfg: &FuzzConfig) -> Result<FuzzResult> {
    if cfg.n_values.is_empty() || cfg.n_values.iter().any(|&n| n < 3) || cfg.taus.is_empty() || !(cfg.tol >= 0.0) {
        return Err(Error::InvalidInput("need dimensions >= 3, at least one tau and tol >= 0".into()));
    }
    if cfg.taus.iter().any(|t| !(0.0..=1.0).contains(t))
        || cfg.a_fractions.is_empty()
        || cfg.a_fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0))
    {
        return Err(Error::InvalidInput("need tau in [0, 1] and a fractions in (0, 1]".into()));
    }
    let res = par_trials(cfg.samples, |t| {
        let index = trial_index(0, t as usize);
        let (inst, rejected) = draw(cfg, index);
        let ev = inst.as_ref().map(|i| evaluate(i).map(|e| (i.mu.len(), e))).transpose();
        ev.map(|e| (index, rejected, e))
    });
    let mut groups: Vec<FuzzGroup> = cfg
        .n_values
        .iter()
        .map(|&n| FuzzGroup { n, samples: 0, worst_residual: f64::INFINITY, violations: 0 })
        .collect();
    let mut worst = Extreme::min();
    let (mut unsampled, mut rejected_draws, mut violations) = (0, 0, 0);
    let mut max_imag = 0.0f64;
    let mut counterexample = None;
    for r in res {
        let (index, rejected, ev) = r?;
        rejected_draws += rejected;
        let Some((n, e)) = ev else {
            unsampled += 1;
            continue;
        };
        let s = relative(e.residual, e.lhs, e.rhs);
        let g = &mut groups[index as usize % cfg.n_values.len()];
        debug_assert_eq!(g.n, n);
        g.samples += 1;
        g.worst_residual = g.worst_residual.min(s);
        worst.lower(s, index);
        max_imag = max_imag.max(e.imag);
        if !(s >= -cfg.tol) {
            g.violations += 1;
            violations += 1;
            if counterexample.is_none() {
                counterexample = Some(json!({"instance": draw(cfg, index).0, "evaluation": e}));
            }
        }
    }
    Ok(FuzzResult {
        groups,
        unsampled,
        rejected_draws,
        worst_residual: worst.value,
        worst_index: worst.index,
        max_imag,
        violations,
        counterexample,
    })
}

/// `find-m` wraps the threshold search; a persistent violation is reported as one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FindMResult {
    pub threshold: Option<ThresholdResult>,
    pub failure: Option<String>,
}

impl SuiteResult for FindMResult {
    fn violations(&self) -> usize {
        usize::from(self.failure.is_some())
    }
    fn counterexample(&self) -> Option<Value> {
        self.failure.as_ref().map(|f| json!({ "search_failure": f }))
    }
    fn rows(&self) -> Vec<Value> {
        self.threshold.iter().map(|t| serde_json::to_value(t).unwrap()).collect()
    }
}

pub fn default_find_m() -> ThresholdConfig {
    ThresholdConfig {
        n: 3,
        p: 2,
        tau: 0.5,
        eps: 1.0,
        sigma_band: [0.5, 2.0],
        trials: 10_000,
        seed: 0,
        mu1_floor: None,
        adversarial: false,
    }
}

pub fn find_m(cfg: &ThresholdConfig) -> Result<FindMResult> {
    match find_threshold(cfg) {
        Ok(t) => Ok(FindMResult { threshold: Some(t), failure: None }),
        Err(Error::Search(msg)) => Ok(FindMResult { threshold: None, failure: Some(msg) }),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_fuzz_is_clean_and_sampled() {
        let cfg = FuzzConfig { samples: 600, seed: 8, ..Default::default() };
        let r = fuzz(&cfg).unwrap();
        assert_eq!(r.violations, 0, "{:?}", r.counterexample);
        assert_eq!(r.unsampled, 0);
        assert_eq!(r.groups.iter().map(|g| g.samples).sum::<usize>(), 600);
        assert!(r.max_imag <= 1e-12);
    }

    #[test]
    fn find_m_runs_small() {
        let cfg = ThresholdConfig { trials: 200, seed: 1, ..default_find_m() };
        let r = find_m(&cfg).unwrap();
        assert!(r.threshold.unwrap().m_hat.is_finite());
    }
}
