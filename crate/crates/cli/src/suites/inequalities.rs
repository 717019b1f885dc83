//! Cone and eigenvalue inequalities over admissible random samples.
//!
//! Vector samples are scaled to unit ∞-norm; Newton–Maclaurin slacks are divided
//! by max(1, |lhs|, |rhs|) because the ratios grow without bound near ∂Γ_p.

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use phess_core::cone::{maclaurin_report, superadditivity_slack, tech_ineq_report, ConeSpec, TechKind};
use phess_core::linalg::SymMatrix;
use phess_core::rng::Rng;
use phess_core::spectral::{conjugate_diag, midpoint_concavity_check, schur_horn_check, weyl_check};
use phess_core::{Error, Result};

use super::{
    par_trials, random_orthogonal, random_positive, random_symmetric, relative, trial_index, trial_rng,
    uniform_usize, unit_cone_vector, Extreme, SuiteResult,
};

/// Names of the checked families, in report order.
pub const COMPONENTS: [&str; 7] = [
    "newton_maclaurin",
    "maclaurin",
    "superadditivity",
    "technical",
    "weyl",
    "schur_horn",
    "midpoint_concavity",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InequalitiesConfig {
    pub n_min: usize,
    pub n_max: usize,
    /// Samples per family.
    pub samples: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for InequalitiesConfig {
    fn default() -> Self {
        InequalitiesConfig { n_min: 2, n_max: 6, samples: 10_000, tol: 1e-10, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentSummary {
    pub name: String,
    pub samples: usize,
    pub worst_slack: f64,
    pub worst_index: Option<u64>,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalitiesResult {
    pub components: Vec<ComponentSummary>,
    pub worst_slack: f64,
    pub violations: usize,
    /// Also reported at the top of the envelope.
    #[serde(skip)]
    pub counterexample: Option<Value>,
}

impl SuiteResult for InequalitiesResult {
    fn violations(&self) -> usize {
        self.violations
    }
    fn counterexample(&self) -> Option<Value> {
        self.counterexample.clone()
    }
    fn rows(&self) -> Vec<Value> {
        self.components.iter().map(|c| serde_json::to_value(c).unwrap()).collect()
    }
}

/// Worst slack of one sample of family `c`, with its replayable input.
fn sample(c: usize, cfg: &InequalitiesConfig, index: u64) -> Result<(f64, Value)> {
    let mut rng = trial_rng(cfg.seed, index);
    let n = uniform_usize(&mut rng, cfg.n_min, cfg.n_max);
    match COMPONENTS[c] {
        "newton_maclaurin" | "maclaurin" => {
            let p = uniform_usize(&mut rng, 1, n);
            let mu = unit_cone_vector(n, p, &mut rng);
            let only_maclaurin = COMPONENTS[c] == "maclaurin";
            let worst = maclaurin_report(&mu, ConeSpec::new(n, p)?)?
                .iter()
                .filter(|e| !only_maclaurin || (e.k == 0 && e.m == 0))
                .map(|e| relative(e.slack, e.lhs, e.rhs))
                .fold(f64::INFINITY, f64::min);
            Ok((worst, json!({"n": n, "p": p, "mu": mu})))
        }
        "superadditivity" => {
            let p = uniform_usize(&mut rng, 1, n);
            let mu = unit_cone_vector(n, p, &mut rng);
            let nu = unit_cone_vector(n, p, &mut rng);
            let s = superadditivity_slack(&mu, &nu, ConeSpec::new(n, p)?)?;
            Ok((s, json!({"n": n, "p": p, "mu": mu, "nu": nu})))
        }
        "technical" => {
            let n = n.max(2);
            let p = uniform_usize(&mut rng, 2, n);
            let mut mu = unit_cone_vector(n, p, &mut rng);
            mu.sort_by(f64::total_cmp);
            let worst = tech_ineq_report(&mu, ConeSpec::new(n, p)?)?
                .values()
                .filter(|e| e.kind != TechKind::Ratio)
                .map(|e| e.value)
                .fold(f64::INFINITY, f64::min);
            Ok((worst, json!({"n": n, "p": p, "mu": mu})))
        }
        "weyl" => {
            let a = SymMatrix::diag(&random_positive(n, &mut rng));
            let b = random_symmetric(n, &mut rng);
            let cm = random_symmetric(n, &mut rng);
            let q = uniform_usize(&mut rng, 1, n);
            let (lo, hi) = weyl_check(&a, &b, &cm, q)?;
            Ok((lo.min(hi), json!({"a": a, "b": b, "c": cm, "q": q})))
        }
        "schur_horn" => {
            let p = uniform_usize(&mut rng, 1, n);
            let mu = unit_cone_vector(n, p, &mut rng);
            let b = conjugate_diag(&mu, &random_orthogonal(n, &mut rng));
            let (diag_ok, gap) = schur_horn_check(&b, p)?;
            let slack = if diag_ok { gap } else { f64::NEG_INFINITY };
            Ok((slack, json!({"p": p, "b": b})))
        }
        "midpoint_concavity" => {
            let p = uniform_usize(&mut rng, 1, n);
            let a = random_positive(n, &mut rng);
            // λ(A, B) is the spectrum of A^{1/2}BA^{1/2}; pull admissible spectra back.
            let pull = |rng: &mut Rng| {
                let mu = unit_cone_vector(n, p, rng);
                let c = conjugate_diag(&mu, &random_orthogonal(n, rng));
                let mut s = vec![0.0; n * n];
                for j in 0..n {
                    s[j * n + j] = 1.0 / a[j].sqrt();
                }
                c.congruence(&s)
            };
            let b1 = pull(&mut rng);
            let b2 = pull(&mut rng);
            let t = rng.gen_range(0.0..=1.0);
            let am = SymMatrix::diag(&a);
            let s = midpoint_concavity_check(&am, &b1, &b2, p, t)?;
            Ok((s, json!({"p": p, "a": am, "b1": b1, "b2": b2, "t": t})))
        }
        _ => unreachable!(),
    }
}

pub fn run(cfg: &InequalitiesConfig) -> Result<InequalitiesResult> {
    if cfg.n_min < 2 || cfg.n_max < cfg.n_min || !(cfg.tol >= 0.0) {
        return Err(Error::InvalidInput("need 2 <= n_min <= n_max and tol >= 0".into()));
    }
    let mut components = Vec::new();
    let mut violations = 0;
    let mut counterexample = None;
    let mut overall = f64::INFINITY;
    for c in 0..COMPONENTS.len() {
        let res = par_trials(cfg.samples, |t| {
            let index = trial_index(c, t as usize);
            sample(c, cfg, index).map(|(s, _)| (index, s))
        });
        let mut worst = Extreme::min();
        let mut viol = 0;
        for r in res {
            let (index, s) = r?;
            worst.lower(s, index);
            if !(s >= -cfg.tol) {
                viol += 1;
                if counterexample.is_none() {
                    let input = sample(c, cfg, index)?.1;
                    counterexample = Some(json!({
                        "family": COMPONENTS[c], "trial_index": index, "slack": s, "input": input,
                    }));
                }
            }
        }
        overall = overall.min(worst.value);
        violations += viol;
        components.push(ComponentSummary {
            name: COMPONENTS[c].to_string(),
            samples: cfg.samples,
            worst_slack: worst.value,
            worst_index: worst.index,
            violations: viol,
        });
    }
    Ok(InequalitiesResult { components, worst_slack: overall, violations, counterexample })
}
