//! Quantities bounded by the a priori estimates, the auxiliary functions whose
//! maxima the estimates control, and pointwise pseudo-solution checks.

use serde::{Deserialize, Serialize};

use super::equation::Equation;
use super::grid::GridFn;
use super::{check_grid, modified_hessian, EquationSpec};
use crate::error::{Error, Result};
use crate::linalg::{sym_eigenvalues, SymMatrix};
use crate::spectral::linearization;

/// Bounded quantities of a grid field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    /// max u − min u.
    pub osc_u: f64,
    /// max |Du|.
    pub max_grad: f64,
    /// max Frobenius norm of D²u.
    pub max_hess: f64,
    /// max λ_n(A(Du, u) + D²u).
    pub max_lambda_n: f64,
    /// min λ_1(A(Du, u) + D²u).
    pub min_lambda_1: f64,
}

pub fn monitors(u: &GridFn, spec: &EquationSpec) -> Result<MonitorReport> {
    let eq = Equation::compile(spec, &u.grid)?;
    check_grid(u, &eq)?;
    let (lo, hi) = u.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let mut rep = MonitorReport {
        osc_u: hi - lo,
        max_grad: 0.0,
        max_hess: 0.0,
        max_lambda_n: f64::NEG_INFINITY,
        min_lambda_1: f64::INFINITY,
    };
    for i in 0..u.values.len() {
        let (b, du) = modified_hessian(&eq, u, i);
        let lam = sym_eigenvalues(&b);
        rep.max_grad = rep.max_grad.max(norm(&du));
        rep.max_hess = rep.max_hess.max(u.hessian(i).frobenius());
        rep.max_lambda_n = rep.max_lambda_n.max(lam[lam.len() - 1]);
        rep.min_lambda_1 = rep.min_lambda_1.min(lam[0]);
    }
    Ok(rep)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Increasing scalar functions used for η and ζ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AuxFn {
    /// c·t with c > 0.
    Linear { c: f64 },
    /// e^{c(t − t0)} with c > 0.
    Exponential { c: f64, t0: f64 },
    /// −k·log(1 + top − t) for t < 1 + top, k > 0.
    NegLog { k: f64, top: f64 },
    /// −k·log(1 − e^{−c(1 + top − t)}) for t < 1 + top, k, c > 0.
    NegLogOneMinusExp { k: f64, c: f64, top: f64 },
}

impl AuxFn {
    /// Value and derivative at t; errors outside the domain or where the
    /// derivative is not positive.
    pub fn eval(&self, t: f64) -> Result<(f64, f64)> {
        let (v, dv) = match *self {
            AuxFn::Linear { c } => (c * t, c),
            AuxFn::Exponential { c, t0 } => {
                let e = (c * (t - t0)).exp();
                (e, c * e)
            }
            AuxFn::NegLog { k, top } => {
                let a = 1.0 + top - t;
                if !(a > 0.0) {
                    return Err(Error::InvalidInput(format!("log barrier evaluated at t = {t} ≥ 1 + top")));
                }
                (-k * a.ln(), k / a)
            }
            AuxFn::NegLogOneMinusExp { k, c, top } => {
                let a = 1.0 + top - t;
                if !(a > 0.0) {
                    return Err(Error::InvalidInput(format!("log barrier evaluated at t = {t} ≥ 1 + top")));
                }
                let e = (-c * a).exp();
                (-k * (-e).ln_1p(), k * c * e / (1.0 - e))
            }
        };
        if !(dv > 0.0 && v.is_finite() && dv.is_finite()) {
            return Err(Error::InvalidInput(format!("auxiliary function is not increasing at t = {t}")));
        }
        Ok((v, dv))
    }
}

/// The pair (η, ζ) of an auxiliary function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxiliarySpec {
    pub eta: AuxFn,
    pub zeta: AuxFn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxKind {
    /// log(1 + λ_n(A + D²u)) + η(|Du|²) + ζ(ū − u).
    SecondOrder,
    /// log(1 + |Du|²) + ζ(u).
    FirstOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxReport {
    #[serde(skip)]
    pub field: Option<GridFn>,
    pub argmax: usize,
    pub argmax_point: Vec<f64>,
    pub max: f64,
}

/// Nodewise Φ and its maximizer. `ubar` is required for the second-order kind.
pub fn auxiliary_field(
    u: &GridFn,
    ubar: Option<&GridFn>,
    spec: &EquationSpec,
    aux: &AuxiliarySpec,
    kind: AuxKind,
) -> Result<AuxReport> {
    let eq = Equation::compile(spec, &u.grid)?;
    check_grid(u, &eq)?;
    let ubar = match (kind, ubar) {
        (AuxKind::SecondOrder, None) => {
            return Err(Error::InvalidInput("the second-order auxiliary function needs ubar".into()))
        }
        (_, Some(b)) if b.grid != u.grid => return Err(Error::InvalidInput("ubar lives on another grid".into())),
        (_, b) => b,
    };
    let fail = |node: usize, e: Error| Error::Construction { node, reason: e.to_string() };
    let mut values = Vec::with_capacity(u.values.len());
    for i in 0..u.values.len() {
        let (b, du) = modified_hessian(&eq, u, i);
        let g2: f64 = du.iter().map(|x| x * x).sum();
        let phi = match kind {
            AuxKind::SecondOrder => {
                let lam = sym_eigenvalues(&b);
                let top = lam[lam.len() - 1];
                if !(top > -1.0) {
                    return Err(Error::Construction { node: i, reason: format!("λ_n = {top} ≤ −1") });
                }
                let eta = aux.eta.eval(g2).map_err(|e| fail(i, e))?.0;
                let zeta = aux.zeta.eval(ubar.unwrap().values[i] - u.values[i]).map_err(|e| fail(i, e))?.0;
                top.ln_1p() + eta + zeta
            }
            AuxKind::FirstOrder => g2.ln_1p() + aux.zeta.eval(u.values[i]).map_err(|e| fail(i, e))?.0,
        };
        values.push(phi);
    }
    let (argmax, max) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(j, m), (i, &v)| if v > m { (i, v) } else { (j, m) });
    Ok(AuxReport { argmax, argmax_point: u.grid.point(argmax), max, field: Some(GridFn { grid: u.grid.clone(), values }) })
}

/// Constants of the pseudo-solution conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoConstants {
    pub delta1: f64,
    pub m1: f64,
    pub delta2: f64,
    pub m2: f64,
}

/// Constants together with the candidate ū.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoCheckConfig {
    pub constants: PseudoConstants,
    pub ubar: GridFn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoReport {
    /// min over nodes of lhs − rhs of the subsolution inequality.
    pub sub_worst_slack: f64,
    pub sub_worst_node: usize,
    pub sub_violations: Vec<usize>,
    /// Nodes where the supersolution inequality applies.
    pub super_qualifying: usize,
    /// min over qualifying nodes of M₂ − det(δ₂I + D²(u − ū)); None if none qualify.
    pub super_worst_slack: Option<f64>,
    pub super_worst_node: Option<usize>,
    pub super_violations: Vec<usize>,
    pub note: String,
}

const PSEUDO_TOL: f64 = 1e-12;

/// Evaluates both pseudo-solution inequalities at every node of u.
pub fn pseudo_check(u: &GridFn, cfg: &PseudoCheckConfig, spec: &EquationSpec) -> Result<PseudoReport> {
    let k = &cfg.constants;
    if !(k.delta1 > 0.0 && k.delta2 > 0.0 && k.m1 >= 0.0 && k.m2 >= 0.0) {
        return Err(Error::InvalidInput("need delta1, delta2 > 0 and M1, M2 ≥ 0".into()));
    }
    let eq = Equation::compile(spec, &u.grid)?;
    check_grid(u, &eq)?;
    if cfg.ubar.grid != u.grid {
        return Err(Error::InvalidInput("ubar lives on another grid".into()));
    }
    let d = eq.d;
    let w = cfg.ubar.sub(u);
    let ident = SymMatrix::identity(d);
    let mut rep = PseudoReport {
        sub_worst_slack: f64::INFINITY,
        sub_worst_node: 0,
        sub_violations: vec![],
        super_qualifying: 0,
        super_worst_slack: None,
        super_worst_node: None,
        super_violations: vec![],
        note: "pointwise necessary-condition check for the given constants and this u only".into(),
    };
    for i in 0..u.values.len() {
        let (b, du) = modified_hessian(&eq, u, i);
        let lin = linearization(eq.p, &ident, &b)
            .map_err(|_| Error::Admissibility { node: i, lambda: sym_eigenvalues(&b) })?;
        let x = u.grid.point(i);
        let sp = eq.scalar_part(i, &x, &du, u.values[i]);
        let hw = w.hessian(i);
        let gw = w.gradient(i);
        let mut lhs = 0.0;
        for a in 0..d {
            for c in 0..d {
                lhs += lin.f.get(a, c) * hw.get(a, c);
            }
            lhs += lin.trace_f * sp.ds_dalpha[a] * gw[a];
        }
        let rhs = k.delta1 * lin.trace_f - k.m1 * lin.min_eig - k.m1;
        let slack = lhs - rhs;
        if slack < rep.sub_worst_slack {
            rep.sub_worst_slack = slack;
            rep.sub_worst_node = i;
        }
        if slack < -PSEUDO_TOL * (1.0 + rhs.abs()) {
            rep.sub_violations.push(i);
        }

        // Supersolution side on −w = u − ū.
        let lam: Vec<f64> = sym_eigenvalues(&hw.scale(-1.0)).iter().map(|l| l + k.delta2).collect();
        if lam[0] >= -PSEUDO_TOL * (1.0 + k.delta2) && norm(&gw) <= k.delta2 {
            rep.super_qualifying += 1;
            let s = k.m2 - lam.iter().product::<f64>();
            if rep.super_worst_slack.map_or(true, |m| s < m) {
                rep.super_worst_slack = Some(s);
                rep.super_worst_node = Some(i);
            }
            if s < -PSEUDO_TOL * (1.0 + k.m2) {
                rep.super_violations.push(i);
            }
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::super::{manufactured_field, TorusGrid};
    use super::*;

    fn grid() -> TorusGrid {
        TorusGrid::cube(2, 32).unwrap()
    }

    #[test]
    fn constant_field_monitors() {
        let g = grid();
        let u = g.sample(|_| 3.0);
        let m = monitors(&u, &EquationSpec::constant(2, 1.5, 1.0)).unwrap();
        assert_eq!((m.osc_u, m.max_grad, m.max_hess), (0.0, 0.0, 0.0));
        assert!((m.max_lambda_n - 1.5).abs() < 1e-14 && (m.min_lambda_1 - 1.5).abs() < 1e-14);
    }

    #[test]
    fn manufactured_gradient_bound() {
        let g = TorusGrid::cube(2, 64).unwrap();
        let m = monitors(&manufactured_field(&g, 0.2), &EquationSpec::manufactured(2, 0.2)).unwrap();
        let h = g.h()[0];
        assert!(m.max_grad <= 0.2 * 2f64.sqrt() + h * h);
        assert!(m.max_grad >= 0.2 - h * h);
    }

    #[test]
    fn aux_functions_have_matching_derivatives() {
        let fs = [
            AuxFn::Linear { c: 2.0 },
            AuxFn::Exponential { c: 1.5, t0: 0.3 },
            AuxFn::NegLog { k: 0.7, top: 1.0 },
            AuxFn::NegLogOneMinusExp { k: 0.7, c: 2.0, top: 1.0 },
        ];
        for f in &fs {
            for t in [-1.0, 0.0, 0.5, 1.2] {
                let (_, dv) = f.eval(t).unwrap();
                let e = 1e-6;
                let fd = (f.eval(t + e).unwrap().0 - f.eval(t - e).unwrap().0) / (2.0 * e);
                assert!((fd - dv).abs() < 1e-7 * (1.0 + dv.abs()), "{f:?} at {t}");
            }
        }
        assert!(AuxFn::NegLog { k: 1.0, top: 0.0 }.eval(1.0).is_err());
        assert!(AuxFn::Linear { c: -1.0 }.eval(0.0).is_err());
    }

    #[test]
    fn first_order_aux_of_constant_and_shift() {
        let g = grid();
        let spec = EquationSpec::constant(2, 1.0, 1.0);
        let aux = AuxiliarySpec { eta: AuxFn::Linear { c: 1.0 }, zeta: AuxFn::Linear { c: 2.0 } };
        let r = auxiliary_field(&g.sample(|_| 0.4), None, &spec, &aux, AuxKind::FirstOrder).unwrap();
        assert!(r.field.unwrap().values.iter().all(|&v| v == 0.8));
        let u = manufactured_field(&g, 0.2);
        let mut v = u.clone();
        v.values.iter_mut().for_each(|x| *x += 0.25);
        let a = auxiliary_field(&u, None, &spec, &aux, AuxKind::FirstOrder).unwrap().field.unwrap();
        let b = auxiliary_field(&v, None, &spec, &aux, AuxKind::FirstOrder).unwrap().field.unwrap();
        assert!(a.values.iter().zip(&b.values).all(|(x, y)| (y - x - 0.5).abs() < 1e-14));
    }

    #[test]
    fn second_order_argmax_is_a_true_maximum() {
        let g = grid();
        let spec = EquationSpec::manufactured(2, 0.2);
        let u = manufactured_field(&g, 0.2);
        let ubar = g.sample(|_| 0.0);
        let aux = AuxiliarySpec { eta: AuxFn::Linear { c: 1.0 }, zeta: AuxFn::Linear { c: 1.0 } };
        let r = auxiliary_field(&u, Some(&ubar), &spec, &aux, AuxKind::SecondOrder).unwrap();
        let f = r.field.unwrap();
        assert!(f.values.iter().all(|&v| v <= r.max));
        assert_eq!(f.values[r.argmax], r.max);
        assert!(auxiliary_field(&u, None, &spec, &aux, AuxKind::SecondOrder).is_err());
    }

    #[test]
    fn log_domain_violation_names_node() {
        let g = grid();
        let spec = EquationSpec::constant(2, -3.0, 1.0);
        let aux = AuxiliarySpec { eta: AuxFn::Linear { c: 1.0 }, zeta: AuxFn::Linear { c: 1.0 } };
        let u = GridFn::zeros(&g);
        let err = auxiliary_field(&u, Some(&u), &spec, &aux, AuxKind::SecondOrder).unwrap_err();
        assert!(matches!(err, Error::Construction { node: 0, .. }));
    }

    #[test]
    fn pseudo_check_with_ubar_equal_u() {
        let g = grid();
        let spec = EquationSpec::manufactured(2, 0.2);
        let u = manufactured_field(&g, 0.2);
        let delta2: f64 = 0.3;
        let cfg = PseudoCheckConfig {
            constants: PseudoConstants { delta1: 1e-3, m1: 10.0, delta2, m2: delta2.powi(2) },
            ubar: u.clone(),
        };
        let rep = pseudo_check(&u, &cfg, &spec).unwrap();
        assert_eq!(rep.super_qualifying, g.len());
        assert!(rep.super_violations.is_empty());
        assert!(rep.super_worst_slack.unwrap().abs() < 1e-15);
        // With ū = u the subsolution side reads 0 ≥ δ₁·trF − M₁λ₁(F) − M₁.
        assert!(rep.sub_violations.is_empty() && rep.sub_worst_slack > 0.0);
    }

    #[test]
    fn pseudo_check_gate_can_be_empty() {
        let g = grid();
        let spec = EquationSpec::constant(2, 1.0, 1.0);
        let u = GridFn::zeros(&g);
        // A ramp in x₁ (with its jump at the seam) makes |D(u − ū)| exceed δ₂ everywhere.
        let ubar = g.sample(|x| x[0]);
        let cfg = PseudoCheckConfig { constants: PseudoConstants { delta1: 0.1, m1: 1.0, delta2: 0.5, m2: 0.0 }, ubar };
        let rep = pseudo_check(&u, &cfg, &spec).unwrap();
        assert_eq!(rep.super_qualifying, 0);
        assert!(rep.super_worst_slack.is_none() && rep.super_violations.is_empty());
    }
}
