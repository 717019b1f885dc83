//! Pointwise pseudo-solution conditions for a grid field and a comparison field.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use phess_core::solver::{
    manufactured_field, pseudo_check, EquationSpec, GridFn, PseudoCheckConfig, PseudoConstants, PseudoReport,
    TorusGrid,
};
use phess_core::{Error, Result};

use super::SuiteResult;

/// Source of u or ū.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSource {
    /// amplitude·Π cos x_a.
    Manufactured { amplitude: f64 },
    /// A grid field in the CSV grid format.
    Csv { path: String },
    /// ū equal to u.
    SameAsU,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PseudoSuiteConfig {
    pub grid: TorusGrid,
    pub equation: EquationSpec,
    pub u: FieldSource,
    pub ubar: FieldSource,
    pub constants: PseudoConstants,
    #[serde(default)]
    pub seed: u64,
}

impl Default for PseudoSuiteConfig {
    /// Manufactured u with ū = u and M₂ = δ₂ⁿ.
    fn default() -> Self {
        PseudoSuiteConfig {
            grid: TorusGrid::cube(2, 32).expect("valid grid"),
            equation: EquationSpec::manufactured(2, 0.2),
            u: FieldSource::Manufactured { amplitude: 0.2 },
            ubar: FieldSource::SameAsU,
            constants: PseudoConstants { delta1: 1e-3, m1: 10.0, delta2: 0.3, m2: 0.09 },
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PseudoSuiteResult {
    pub report: PseudoReport,
    pub violations: usize,
    /// Also reported at the top of the envelope.
    #[serde(skip)]
    pub counterexample: Option<Value>,
}

impl SuiteResult for PseudoSuiteResult {
    fn violations(&self) -> usize {
        self.violations
    }
    fn counterexample(&self) -> Option<Value> {
        self.counterexample.clone()
    }
    fn rows(&self) -> Vec<Value> {
        let r = &self.report;
        vec![json!({
            "sub_worst_slack": r.sub_worst_slack,
            "sub_violations": r.sub_violations.len(),
            "super_qualifying": r.super_qualifying,
            "super_worst_slack": r.super_worst_slack,
            "super_violations": r.super_violations.len(),
        })]
    }
}

fn load(src: &FieldSource, grid: &TorusGrid, u: Option<&GridFn>) -> Result<GridFn> {
    match src {
        FieldSource::Manufactured { amplitude } => Ok(manufactured_field(grid, *amplitude)),
        FieldSource::Csv { path } => {
            let f = GridFn::from_csv(&std::fs::read_to_string(path)?)?;
            if f.grid.sizes() != grid.sizes() {
                return Err(Error::InvalidInput(format!("{path}: grid differs from the problem grid")));
            }
            Ok(f)
        }
        FieldSource::SameAsU => {
            u.cloned().ok_or_else(|| Error::InvalidInput("u cannot refer to itself".into()))
        }
    }
}

pub fn run(cfg: &PseudoSuiteConfig) -> Result<PseudoSuiteResult> {
    let u = load(&cfg.u, &cfg.grid, None)?;
    let ubar = load(&cfg.ubar, &cfg.grid, Some(&u))?;
    let pc = PseudoCheckConfig { constants: cfg.constants.clone(), ubar };
    let report = pseudo_check(&u, &pc, &cfg.equation)?;
    let violations = report.sub_violations.len() + report.super_violations.len();
    let counterexample = (violations > 0).then(|| {
        json!({
            "first_sub_violation": report.sub_violations.first(),
            "first_super_violation": report.super_violations.first(),
            "constants": cfg.constants,
        })
    });
    Ok(PseudoSuiteResult { report, violations, counterexample })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_has_no_violation() {
        let r = run(&PseudoSuiteConfig::default()).unwrap();
        assert_eq!(r.violations, 0, "{:?}", r.report);
        assert_eq!(r.report.super_qualifying, 32 * 32);
    }

    #[test]
    fn u_cannot_be_same_as_u() {
        let cfg = PseudoSuiteConfig { u: FieldSource::SameAsU, ..Default::default() };
        assert!(run(&cfg).is_err());
    }
}
