//! Newton solves on the torus, with monitors, error against a manufactured solution
//! and an optional residual-order study.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use phess_core::solver::{
    manufactured_field, monitors, newton_solve, residual_field, smooth_perturbation, EquationSpec, GridFn,
    MonitorReport, NewtonStep, RhsField, TorusGrid,
};
use phess_core::{Error, Result};

use super::SuiteResult;

/// Starting field of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Initial {
    Constant { c: f64 },
    /// The manufactured field plus a smooth perturbation of max amplitude
    /// `relative`·max|u*|.
    Perturbed { relative: f64 },
    /// A grid field in the CSV grid format.
    Csv { path: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub grid: TorusGrid,
    pub equation: EquationSpec,
    pub initial: Initial,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Sizes per axis for the residual-order study; used only with a manufactured
    /// right-hand side.
    #[serde(default)]
    pub order_sizes: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SolveConfig {
    /// The manufactured problem on 64² from a 5% perturbation, with the order
    /// study over 32, 64 and 128 nodes per axis.
    fn default() -> Self {
        SolveConfig {
            grid: TorusGrid::cube(2, 64).expect("valid grid"),
            equation: EquationSpec::manufactured(2, 0.3),
            initial: Initial::Perturbed { relative: 0.05 },
            tol: default_tol(),
            max_iters: default_max_iters(),
            order_sizes: vec![32, 64, 128],
            seed: 0,
        }
    }
}

fn default_tol() -> f64 {
    1e-9
}

fn default_max_iters() -> usize {
    12
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderLevel {
    pub size: usize,
    pub residual_inf: f64,
    /// log₂ of the residual ratio to the previous size.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    pub converged: bool,
    pub iterations: usize,
    pub residual_inf: f64,
    pub compatibility_defect: f64,
    pub gauged: bool,
    pub trace: Vec<NewtonStep>,
    pub monitors: Option<MonitorReport>,
    /// max |u − u*| after removing means when the problem is gauged.
    pub error_vs_exact: Option<f64>,
    pub order_study: Vec<OrderLevel>,
    pub failure: Option<String>,
    #[serde(skip)]
    pub solution: Option<GridFn>,
}

impl SuiteResult for SolveResult {
    fn violations(&self) -> usize {
        usize::from(!self.converged)
    }
    fn counterexample(&self) -> Option<Value> {
        self.failure.as_ref().map(|f| json!({ "failure": f }))
    }
    fn rows(&self) -> Vec<Value> {
        let mut rows: Vec<Value> =
            self.trace.iter().map(|s| with_kind("trace", serde_json::to_value(s).unwrap())).collect();
        if let Some(m) = &self.monitors {
            rows.push(with_kind("monitors", serde_json::to_value(m).unwrap()));
        }
        rows.extend(self.order_study.iter().map(|o| with_kind("order", serde_json::to_value(o).unwrap())));
        rows
    }
}

fn with_kind(kind: &str, mut v: Value) -> Value {
    v.as_object_mut().unwrap().insert("row".into(), Value::from(kind));
    v
}

fn amplitude(spec: &EquationSpec) -> Option<f64> {
    match spec.rhs {
        RhsField::Manufactured { amplitude } => Some(amplitude),
        _ => None,
    }
}

fn initial_field(cfg: &SolveConfig) -> Result<GridFn> {
    match &cfg.initial {
        Initial::Constant { c } => Ok(cfg.grid.sample(|_| *c)),
        Initial::Perturbed { relative } => {
            let amp = amplitude(&cfg.equation)
                .ok_or_else(|| Error::InvalidInput("a perturbed start needs a manufactured right-hand side".into()))?;
            let exact = manufactured_field(&cfg.grid, amp);
            let delta = smooth_perturbation(&cfg.grid, relative * exact.max_abs(), cfg.seed);
            let values = exact.values.iter().zip(&delta.values).map(|(a, b)| a + b).collect();
            GridFn::new(cfg.grid.clone(), values)
        }
        Initial::Csv { path } => {
            let u = GridFn::from_csv(&std::fs::read_to_string(path)?)?;
            if u.grid.sizes() != cfg.grid.sizes() {
                return Err(Error::InvalidInput("initial CSV grid differs from the problem grid".into()));
            }
            Ok(u)
        }
    }
}

/// ‖R(u*)‖∞ of the manufactured field on cubes of the given sizes.
pub fn order_study(spec: &EquationSpec, d: usize, sizes: &[usize]) -> Result<Vec<OrderLevel>> {
    let amp = amplitude(spec)
        .ok_or_else(|| Error::InvalidInput("the order study needs a manufactured right-hand side".into()))?;
    let mut out: Vec<OrderLevel> = Vec::new();
    for &m in sizes {
        let grid = TorusGrid::cube(d, m)?;
        let r = residual_field(&manufactured_field(&grid, amp), spec)?.max_abs();
        let order = out.last().map(|prev| (prev.residual_inf / r).log2() / (m as f64 / prev.size as f64).log2());
        out.push(OrderLevel { size: m, residual_inf: r, order });
    }
    Ok(out)
}

pub fn run(cfg: &SolveConfig) -> Result<SolveResult> {
    let u0 = initial_field(cfg)?;
    let study = order_study_if_any(cfg)?;
    let mut res = SolveResult {
        converged: false,
        iterations: 0,
        residual_inf: f64::NAN,
        compatibility_defect: 0.0,
        gauged: !cfg.equation.t_dependent(),
        trace: Vec::new(),
        monitors: None,
        error_vs_exact: None,
        order_study: study,
        failure: None,
        solution: None,
    };
    match newton_solve(&cfg.equation, &u0, cfg.tol, cfg.max_iters) {
        Ok(out) => {
            let u = out.solution().clone();
            res.converged = true;
            res.iterations = out.iterations;
            res.residual_inf = out.residual_inf;
            res.compatibility_defect = out.compatibility_defect;
            res.gauged = out.gauged;
            res.trace = out.trace;
            res.monitors = Some(monitors(&u, &cfg.equation)?);
            if let Some(amp) = amplitude(&cfg.equation) {
                let exact = manufactured_field(&cfg.grid, amp);
                let shift = if res.gauged { u.mean() - exact.mean() } else { 0.0 };
                let err = u.values.iter().zip(&exact.values).fold(0.0f64, |m, (a, b)| m.max((a - shift - b).abs()));
                res.error_vs_exact = Some(err);
            }
            res.solution = Some(u);
        }
        Err(e @ Error::NonConvergence { .. }) => res.failure = Some(e.to_string()),
        Err(e) => return Err(e),
    }
    Ok(res)
}

fn order_study_if_any(cfg: &SolveConfig) -> Result<Vec<OrderLevel>> {
    if cfg.order_sizes.is_empty() || amplitude(&cfg.equation).is_none() {
        Ok(Vec::new())
    } else {
        order_study(&cfg.equation, cfg.grid.dim(), &cfg.order_sizes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manufactured(size: usize) -> SolveConfig {
        SolveConfig {
            grid: TorusGrid::cube(2, size).unwrap(),
            equation: EquationSpec::manufactured(2, 0.3),
            initial: Initial::Perturbed { relative: 0.05 },
            tol: 1e-9,
            max_iters: 12,
            order_sizes: vec![16, 32],
            seed: 1,
        }
    }

    #[test]
    fn perturbed_manufactured_solve_converges() {
        let r = run(&manufactured(16)).unwrap();
        assert!(r.converged, "{:?}", r.failure);
        assert!(r.iterations <= 12);
        assert!(r.error_vs_exact.unwrap() < 0.05);
        assert!(r.order_study[1].order.unwrap() > 1.8);
        assert!(r.trace.iter().all(|s| s.margin > 0.0));
    }

    #[test]
    fn config_parses_with_defaults() {
        let text = r#"{"grid": {"sizes": [16, 16]},
            "equation": {"p": 2, "a_field": {"kind": "conformal", "c": 1.0},
                         "rhs": {"kind": "manufactured", "amplitude": 0.3}},
            "initial": {"kind": "perturbed", "relative": 0.05}}"#;
        let cfg: SolveConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.max_iters, 12);
        assert_eq!(cfg.tol, 1e-9);
    }
}
