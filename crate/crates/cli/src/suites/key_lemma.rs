//! The key-lemma conclusion on random configurations whose hypothesis is verified
//! by ray sampling.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use phess_core::subsolution::{key_lemma_check, sample_key_lemma_config, KeyLemmaConfig, KeyLemmaReport};
use phess_core::{Error, Result};

use super::{par_trials, relative, trial_index, trial_rng, uniform_usize, Extreme, SuiteResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KeyLemmaSuiteConfig {
    pub n_min: usize,
    pub n_max: usize,
    pub p_max: usize,
    pub configs: usize,
    /// Random rays per hypothesis probe.
    pub ray_samples: usize,
    /// Redraws of a configuration whose hypothesis is undetermined.
    pub max_redraws: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for KeyLemmaSuiteConfig {
    fn default() -> Self {
        KeyLemmaSuiteConfig {
            n_min: 2,
            n_max: 4,
            p_max: 3,
            configs: 1000,
            ray_samples: 2000,
            max_redraws: 20,
            tol: 1e-9,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyLemmaGroup {
    pub n: usize,
    pub p: usize,
    pub configs: usize,
    pub worst_slack: f64,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyLemmaSuiteResult {
    pub groups: Vec<KeyLemmaGroup>,
    /// Configurations with a verified hypothesis.
    pub verified: usize,
    /// Configurations whose hypothesis stayed undetermined after every redraw.
    pub undetermined: usize,
    /// Smallest (lhs − rhs) / max(1, |lhs|, |rhs|).
    pub worst_slack: f64,
    pub worst_index: Option<u64>,
    pub violations: usize,
    /// Also reported at the top of the envelope.
    #[serde(skip)]
    pub counterexample: Option<Value>,
}

impl SuiteResult for KeyLemmaSuiteResult {
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

/// First configuration of trial `t` with a verified hypothesis, if any.
fn draw(cfg: &KeyLemmaSuiteConfig, t: usize) -> Result<Option<(KeyLemmaConfig, KeyLemmaReport)>> {
    let mut rng = trial_rng(cfg.seed, trial_index(0, t));
    let n = uniform_usize(&mut rng, cfg.n_min, cfg.n_max);
    let p = uniform_usize(&mut rng, 1, n.min(cfg.p_max));
    for r in 0..cfg.max_redraws {
        let kc = sample_key_lemma_config(n, p, cfg.ray_samples, cfg.seed, trial_index(r + 1, t))?;
        let rep = key_lemma_check(&kc)?;
        if rep.hypothesis_ok {
            return Ok(Some((kc, rep)));
        }
    }
    Ok(None)
}

pub fn run(cfg: &KeyLemmaSuiteConfig) -> Result<KeyLemmaSuiteResult> {
    if cfg.n_min < 1 || cfg.n_max < cfg.n_min || cfg.p_max < 1 || cfg.max_redraws < 1 || !(cfg.tol >= 0.0) {
        return Err(Error::InvalidInput("need 1 <= n_min <= n_max, p_max >= 1, max_redraws >= 1, tol >= 0".into()));
    }
    let res = par_trials(cfg.configs, |t| draw(cfg, t as usize));
    let mut groups: Vec<KeyLemmaGroup> = Vec::new();
    for n in cfg.n_min..=cfg.n_max {
        for p in 1..=n.min(cfg.p_max) {
            groups.push(KeyLemmaGroup { n, p, configs: 0, worst_slack: f64::INFINITY, violations: 0 });
        }
    }
    let mut worst = Extreme::min();
    let (mut verified, mut undetermined, mut violations) = (0, 0, 0);
    let mut counterexample = None;
    for (t, r) in res.into_iter().enumerate() {
        let Some((kc, rep)) = r? else {
            undetermined += 1;
            continue;
        };
        verified += 1;
        let s = relative(rep.slack, rep.lhs, rep.rhs);
        let index = t as u64;
        worst.lower(s, index);
        let g = groups.iter_mut().find(|g| g.n == kc.n && g.p == kc.p).expect("group exists");
        g.configs += 1;
        g.worst_slack = g.worst_slack.min(s);
        if !(s >= -cfg.tol) {
            g.violations += 1;
            violations += 1;
            if counterexample.is_none() {
                counterexample = Some(json!({"config": kc, "report": rep, "trial": t}));
            }
        }
    }
    Ok(KeyLemmaSuiteResult {
        groups,
        verified,
        undetermined,
        worst_slack: worst.value,
        worst_index: worst.index,
        violations,
        counterexample,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_is_verified_and_clean() {
        let cfg = KeyLemmaSuiteConfig { configs: 40, ray_samples: 200, seed: 4, ..Default::default() };
        let r = run(&cfg).unwrap();
        assert_eq!(r.violations, 0, "{:?}", r.counterexample);
        assert_eq!(r.verified + r.undetermined, 40);
        assert!(r.verified >= 36);
    }
}
