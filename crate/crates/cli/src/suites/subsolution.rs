//! The ball subsolution over a parameter matrix, and the rank-one σ_p expansion.

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use phess_core::rng::normal;
use phess_core::subsolution::{construct, rank_one_sigma, BallProblem, BallSpec, PhiTildeSpec, PsiSpec};
use phess_core::{Error, Result};

use super::{par_trials, relative, trial_index, trial_rng, uniform_usize, Extreme, SuiteResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubsolutionConfig {
    pub dims: Vec<usize>,
    /// Orders; pairs with p > n are skipped.
    pub orders: Vec<usize>,
    pub phi_tilde: Vec<f64>,
    pub alphas: Vec<f64>,
    pub radius: f64,
    pub resolution: usize,
    /// Rank-one samples; zero skips that part.
    pub rank_one_samples: usize,
    pub rank_one_n_max: usize,
    pub rank_one_tol: f64,
    pub seed: u64,
}

impl Default for SubsolutionConfig {
    fn default() -> Self {
        SubsolutionConfig {
            dims: vec![2, 3],
            orders: vec![1, 2, 3],
            phi_tilde: vec![0.05, 0.1],
            alphas: vec![0.25, 0.5],
            radius: 1.0,
            resolution: 129,
            rank_one_samples: 10_000,
            rank_one_n_max: 8,
            rank_one_tol: 1e-9,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsolutionCase {
    pub n: usize,
    pub p: usize,
    pub phi_tilde: f64,
    pub alpha: f64,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub eps1: Option<f64>,
    pub eps2: Option<f64>,
    pub worst_slack: Option<f64>,
    pub nodes_checked: usize,
    /// Construction failure, e.g. an inadmissible node.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsolutionReport {
    pub cases: Vec<SubsolutionCase>,
    pub worst_slack: f64,
    pub rank_one_samples: usize,
    /// Largest |lhs − rhs| / max(1, |lhs|, |rhs|).
    pub rank_one_max_error: f64,
    pub rank_one_worst_index: Option<u64>,
    pub violations: usize,
    /// Also reported at the top of the envelope.
    #[serde(skip)]
    pub counterexample: Option<Value>,
}

impl SuiteResult for SubsolutionReport {
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

/// The matrix of ball problems, in report order.
pub fn matrix(cfg: &SubsolutionConfig) -> Vec<BallSpec> {
    let mut out = Vec::new();
    for &n in &cfg.dims {
        for &p in cfg.orders.iter().filter(|&&p| p <= n) {
            for &c in &cfg.phi_tilde {
                for &alpha in &cfg.alphas {
                    out.push(BallSpec {
                        n,
                        radius: cfg.radius,
                        resolution: cfg.resolution,
                        p,
                        alpha,
                        psi: PsiSpec::Zero,
                        phi_tilde: PhiTildeSpec::Constant { c },
                    });
                }
            }
        }
    }
    out
}

fn run_case(spec: &BallSpec) -> Result<SubsolutionCase> {
    let c = match spec.phi_tilde {
        PhiTildeSpec::Constant { c } => c,
        _ => unreachable!("matrix uses constant weights"),
    };
    let mut case = SubsolutionCase {
        n: spec.n,
        p: spec.p,
        phi_tilde: c,
        alpha: spec.alpha,
        a: None,
        b: None,
        eps1: None,
        eps2: None,
        worst_slack: None,
        nodes_checked: 0,
        failure: None,
    };
    match construct(&BallProblem::from_spec(spec)?) {
        Ok(r) => {
            case.a = Some(r.a);
            case.b = Some(r.b);
            case.eps1 = Some(r.eps1);
            case.eps2 = Some(r.eps2);
            case.worst_slack = Some(r.worst_slack);
            case.nodes_checked = r.nodes_checked;
        }
        Err(e @ Error::Construction { .. }) => case.failure = Some(e.to_string()),
        Err(e) => return Err(e),
    }
    Ok(case)
}

/// Rank-one trial: μ with entries N(0,1), B = ±10^{U(−1,1)}, ν with entries N(0,1).
fn draw_rank_one(cfg: &SubsolutionConfig, index: u64) -> (Vec<f64>, f64, Vec<f64>, usize) {
    let mut rng = trial_rng(cfg.seed, index);
    let n = uniform_usize(&mut rng, 1, cfg.rank_one_n_max);
    let p = uniform_usize(&mut rng, 1, n);
    let mu: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
    let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
    let b = sign * 10f64.powf(rng.gen_range(-1.0..1.0));
    let nu: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
    (mu, b, nu, p)
}

pub fn run(cfg: &SubsolutionConfig) -> Result<SubsolutionReport> {
    if cfg.rank_one_n_max < 1 || !(cfg.rank_one_tol >= 0.0) {
        return Err(Error::InvalidInput("need rank_one_n_max >= 1 and rank_one_tol >= 0".into()));
    }
    let specs = matrix(cfg);
    let cases = par_trials(specs.len(), |i| run_case(&specs[i as usize]))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut violations = 0;
    let mut counterexample = None;
    let mut worst_slack = f64::INFINITY;
    for (spec, case) in specs.iter().zip(&cases) {
        let s = case.worst_slack.unwrap_or(f64::NEG_INFINITY);
        worst_slack = worst_slack.min(s);
        if !(s >= 0.0) {
            violations += 1;
            if counterexample.is_none() {
                counterexample = Some(json!({"ball": spec, "case": case}));
            }
        }
    }

    let errs = par_trials(cfg.rank_one_samples, |t| {
        let index = trial_index(1, t as usize);
        let (mu, b, nu, p) = draw_rank_one(cfg, index);
        rank_one_sigma(&mu, b, &nu, p).map(|r| (index, relative((r.lhs - r.rhs).abs(), r.lhs, r.rhs), r))
    });
    let mut worst = Extreme::max();
    for e in errs {
        let (index, err, r) = e?;
        worst.raise(err, index);
        if !(err <= cfg.rank_one_tol) {
            violations += 1;
            if counterexample.is_none() {
                let (mu, b, nu, p) = draw_rank_one(cfg, index);
                counterexample = Some(json!({
                    "rank_one": {"mu": mu, "b": b, "nu": nu, "p": p, "lhs": r.lhs, "rhs": r.rhs},
                }));
            }
        }
    }
    Ok(SubsolutionReport {
        cases,
        worst_slack,
        rank_one_samples: cfg.rank_one_samples,
        rank_one_max_error: worst.value.max(0.0),
        rank_one_worst_index: worst.index,
        violations,
        counterexample,
    })
}
