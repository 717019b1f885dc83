//! σ-identity family over random vectors for every (n, p).

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use phess_core::rng::normal;
use phess_core::symfun::identity_residuals_with;
use phess_core::Result;

use super::{par_trials, trial_index, trial_rng, Extreme, SuiteResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentitiesConfig {
    pub n_min: usize,
    pub n_max: usize,
    /// Random vectors per (n, p).
    pub trials: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for IdentitiesConfig {
    fn default() -> Self {
        IdentitiesConfig { n_min: 2, n_max: 8, trials: 10_000, tol: 1e-10, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityGroup {
    pub n: usize,
    pub p: i64,
    pub max_residual: f64,
    pub worst_identity: String,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentitiesResult {
    pub groups: Vec<IdentityGroup>,
    pub max_residual: f64,
    pub evaluations: usize,
    pub violations: usize,
    /// Also reported at the top of the envelope.
    #[serde(skip)]
    pub counterexample: Option<Value>,
}

impl SuiteResult for IdentitiesResult {
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

/// One trial: entries N(0,1)·10^{U(−1,1)}, expansion list a random ordered subset
/// of size ≥ 2.
fn draw(n: usize, seed: u64, index: u64) -> (Vec<f64>, Vec<usize>) {
    let mut rng = trial_rng(seed, index);
    let scale = 10f64.powf(rng.gen_range(-1.0..1.0));
    let mu: Vec<f64> = (0..n).map(|_| scale * normal(&mut rng)).collect();
    let mut idx: Vec<usize> = (1..=n).collect();
    idx.shuffle(&mut rng);
    let k = rng.gen_range(2..=n);
    idx.truncate(k);
    (mu, idx)
}

pub fn run(cfg: &IdentitiesConfig) -> Result<IdentitiesResult> {
    if cfg.n_min < 2 || cfg.n_max < cfg.n_min || !(cfg.tol >= 0.0) {
        return Err(phess_core::Error::InvalidInput("need 2 <= n_min <= n_max and tol >= 0".into()));
    }
    let mut groups = Vec::new();
    let mut violations = 0;
    let mut counterexample = None;
    let mut overall = 0.0f64;
    let mut evaluations = 0;
    let mut g = 0;
    for n in cfg.n_min..=cfg.n_max {
        for p in 0..=n as i64 {
            let gi = g;
            g += 1;
            let res = par_trials(cfg.trials, |t| {
                let index = trial_index(gi, t as usize);
                let (mu, idx) = draw(n, cfg.seed, index);
                identity_residuals_with(p, &mu, &idx).map(|r| {
                    let (name, v) = r.into_iter().fold((String::new(), 0.0f64), |(bn, bv), (k, v)| {
                        if v > bv || bn.is_empty() {
                            (k, v)
                        } else {
                            (bn, bv)
                        }
                    });
                    (index, name, v)
                })
            });
            let mut worst = Extreme::max();
            let mut worst_name = String::new();
            let mut group_viol = 0;
            for r in res {
                let (index, name, v) = r?;
                evaluations += 1;
                if v > worst.value || worst.index.is_none() {
                    worst_name = name.clone();
                }
                worst.raise(v, index);
                if !(v <= cfg.tol) {
                    group_viol += 1;
                    if counterexample.is_none() {
                        let (mu, idx) = draw(n, cfg.seed, index);
                        counterexample = Some(json!({
                            "n": n, "p": p, "mu": mu, "expansion": idx,
                            "identity": name, "residual": v, "trial_index": index,
                        }));
                    }
                }
            }
            overall = overall.max(worst.value);
            violations += group_viol;
            groups.push(IdentityGroup {
                n,
                p,
                max_residual: worst.value,
                worst_identity: worst_name,
                violations: group_viol,
            });
        }
    }
    Ok(IdentitiesResult { groups, max_residual: overall, evaluations, violations, counterexample })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_is_clean_and_deterministic() {
        let cfg = IdentitiesConfig { n_min: 2, n_max: 4, trials: 200, tol: 1e-10, seed: 3 };
        let a = run(&cfg).unwrap();
        assert_eq!(a.violations, 0);
        assert_eq!(a.groups.len(), 3 + 4 + 5);
        assert_eq!(a, run(&cfg).unwrap());
    }
}
