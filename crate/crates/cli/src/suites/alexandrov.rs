//! The generalized Alexandrov inequality on an equality case and a convex corpus.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use phess_core::solver::{alexandrov_check, convex_corpus, AlexandrovField, AlexandrovProblem, QUADRATURE_TOL};
use phess_core::Result;

use super::{par_trials, SuiteResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlexandrovConfig {
    pub resolution: usize,
    /// Run the quadratic equality case, where lhs/rhs must lie within tolerance of 1.
    pub equality: bool,
    /// Run the built-in convex corpus.
    pub corpus: bool,
    /// Further problems, checked for lhs ≤ rhs·(1 + tolerance).
    pub problems: Vec<AlexandrovProblem>,
    pub seed: u64,
}

impl Default for AlexandrovConfig {
    fn default() -> Self {
        AlexandrovConfig { resolution: 129, equality: true, corpus: true, problems: Vec::new(), seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlexandrovCase {
    pub case: usize,
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub holds: bool,
    pub contact_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlexandrovSuiteResult {
    pub cases: Vec<AlexandrovCase>,
    pub equality_ratio: Option<f64>,
    pub max_ratio: f64,
    pub violations: usize,
    /// Also reported at the top of the envelope.
    #[serde(skip)]
    pub counterexample: Option<Value>,
}

impl SuiteResult for AlexandrovSuiteResult {
    fn violations(&self) -> usize {
        self.violations
    }
    fn counterexample(&self) -> Option<Value> {
        self.counterexample.clone()
    }
    fn rows(&self) -> Vec<Value> {
        self.cases.iter().map(|c| serde_json::to_value(c).unwrap()).collect()
    }
}

/// w = |y|² on the unit disc with ε equal to the boundary gap, where every grid
/// node with |Dw| < ε/d lies in the contact set and both sides agree.
pub fn equality_case(resolution: usize) -> AlexandrovProblem {
    AlexandrovProblem {
        center: vec![0.0, 0.0],
        radius: 1.0,
        eps: 1.0,
        field: AlexandrovField::Paraboloid { c: 1.0 },
        resolution,
        tolerance: QUADRATURE_TOL,
    }
}

pub fn run(cfg: &AlexandrovConfig) -> Result<AlexandrovSuiteResult> {
    let mut problems: Vec<(String, AlexandrovProblem)> = Vec::new();
    if cfg.equality {
        problems.push(("equality".into(), equality_case(cfg.resolution)));
    }
    if cfg.corpus {
        for (k, p) in convex_corpus(cfg.resolution).into_iter().enumerate() {
            problems.push((format!("corpus_{k:02}"), p));
        }
    }
    for (k, p) in cfg.problems.iter().enumerate() {
        problems.push((format!("custom_{k:02}"), p.clone()));
    }
    let reports = par_trials(problems.len(), |i| alexandrov_check(&problems[i as usize].1));
    let mut cases = Vec::new();
    let (mut violations, mut max_ratio) = (0, 0.0f64);
    let mut equality_ratio = None;
    let mut counterexample = None;
    for (i, ((label, prob), rep)) in problems.iter().zip(reports).enumerate() {
        let rep = rep?;
        let ok = if label == "equality" {
            equality_ratio = Some(rep.ratio);
            (rep.ratio - 1.0).abs() <= prob.tolerance
        } else {
            rep.holds
        };
        max_ratio = max_ratio.max(rep.ratio);
        if !ok {
            violations += 1;
            if counterexample.is_none() {
                counterexample = Some(json!({"label": label, "problem": prob, "report": rep}));
            }
        }
        cases.push(AlexandrovCase {
            case: i,
            label: label.clone(),
            lhs: rep.lhs,
            rhs: rep.rhs,
            ratio: rep.ratio,
            holds: ok,
            contact_nodes: rep.contact_nodes,
        });
    }
    Ok(AlexandrovSuiteResult { cases, equality_ratio, max_ratio, violations, counterexample })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_equality_case_is_close() {
        let cfg = AlexandrovConfig { resolution: 65, corpus: false, ..Default::default() };
        let r = run(&cfg).unwrap();
        assert!((r.equality_ratio.unwrap() - 1.0).abs() < 0.05);
        assert_eq!(r.cases.len(), 1);
    }
}
