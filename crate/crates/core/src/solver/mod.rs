//! The p-Hessian equation σ_p^{1/p}(λ(A(Du, u) + D²u)) = φ(Du, u) on a flat periodic
//! grid: residual, admissibility, a damped Newton solver and diagnostics.
//!
//! Derivatives are periodic central differences of order h².

mod alexandrov;
mod diagnostics;
mod equation;
mod grid;
mod newton;

pub use alexandrov::{
    alexandrov_check, convex_corpus, omega, AlexandrovField, AlexandrovProblem, AlexandrovReport, QUADRATURE_TOL,
};
pub use diagnostics::{
    auxiliary_field, monitors, pseudo_check, AuxFn, AuxKind, AuxReport, AuxiliarySpec, MonitorReport,
    PseudoCheckConfig, PseudoConstants, PseudoReport,
};
pub use equation::{manufactured_exact, manufactured_field, AField, EquationSpec, RhsField, ScalarField};
pub use grid::{grid_csv, GridFn, GridSpec, TorusGrid, MIN_SIZE};
pub use newton::{newton_solve, smooth_perturbation, NewtonOutcome, NewtonStep, LINEAR_TOL};

use serde::{Deserialize, Serialize};

use crate::cone::{depth, in_cone, sigma_root};
use crate::error::{Error, Result};
use crate::linalg::{sym_eigenvalues, SymMatrix};
use equation::Equation;

/// The modified Hessian A(Du, u) + D²u at node i, with Du.
pub(crate) fn modified_hessian(eq: &Equation, u: &GridFn, i: usize) -> (SymMatrix, Vec<f64>) {
    let x = u.grid.point(i);
    let du = u.gradient(i);
    let b = eq.a_matrix(i, &x, &du, u.values[i]).add(&u.hessian(i));
    (b, du)
}

fn check_grid(u: &GridFn, eq: &Equation) -> Result<()> {
    if u.grid.dim() != eq.d {
        return Err(Error::InvalidInput("field and equation differ in dimension".into()));
    }
    Ok(())
}

/// Nodewise σ_p^{1/p}(λ(A(Du, u) + D²u)) − φ(Du, u).
pub fn residual_field(u: &GridFn, spec: &EquationSpec) -> Result<GridFn> {
    let eq = Equation::compile(spec, &u.grid)?;
    residual_with(&eq, u)
}

pub(crate) fn residual_with(eq: &Equation, u: &GridFn) -> Result<GridFn> {
    check_grid(u, eq)?;
    let mut values = Vec::with_capacity(u.values.len());
    for i in 0..u.values.len() {
        let (b, du) = modified_hessian(eq, u, i);
        let lam = sym_eigenvalues(&b);
        if !in_cone(&lam, eq.p) {
            return Err(Error::Admissibility { node: i, lambda: lam });
        }
        let phi = eq.rhs(i, &u.grid.point(i), &du, u.values[i]).phi;
        values.push(sigma_root(&lam, eq.p) - phi);
    }
    Ok(GridFn { grid: u.grid.clone(), values })
}

/// Outcome of [`admissible`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    pub admissible: bool,
    /// First node whose λ leaves Γ_p, with that λ.
    pub first_violation: Option<(usize, Vec<f64>)>,
    /// min over nodes of the largest t with λ − t·1 still in Γ_p (0 when inadmissible).
    pub margin: f64,
}

/// Whether λ(A(Du, u) + D²u) ∈ Γ_p at every node.
pub fn admissible(u: &GridFn, spec: &EquationSpec) -> Result<Admissibility> {
    let eq = Equation::compile(spec, &u.grid)?;
    check_grid(u, &eq)?;
    let mut margin = f64::INFINITY;
    for i in 0..u.values.len() {
        let lam = sym_eigenvalues(&modified_hessian(&eq, u, i).0);
        if !in_cone(&lam, eq.p) {
            return Ok(Admissibility { admissible: false, first_violation: Some((i, lam)), margin: 0.0 });
        }
        margin = margin.min(depth(&lam, eq.p));
    }
    Ok(Admissibility { admissible: true, first_violation: None, margin })
}

/// Upper bound on the spectral norm of the discrete Hessian of any grid field with
/// max |δu| ≤ eta (Gershgorin on the stencil weights).
pub fn hessian_perturbation_bound(grid: &TorusGrid, eta: f64) -> f64 {
    let h = grid.h();
    (0..grid.dim())
        .map(|a| {
            let off: f64 = (0..grid.dim()).filter(|&b| b != a).map(|b| 1.0 / (h[a] * h[b])).sum();
            eta * (4.0 / (h[a] * h[a]) + off)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::symfun::binomial;
    use rand::Rng as _;

    #[test]
    fn constant_state_has_zero_residual() {
        let grid = TorusGrid::cube(2, 16).unwrap();
        for p in 1..=2 {
            let spec = EquationSpec::constant(p, 1.0, binomial(2, p as i64).powf(1.0 / p as f64));
            let r = residual_field(&GridFn::zeros(&grid), &spec).unwrap();
            assert!(r.max_abs() < 1e-15);
        }
    }

    #[test]
    fn zero_coefficient_is_inadmissible() {
        let grid = TorusGrid::cube(2, 16).unwrap();
        let spec = EquationSpec { p: 1, a_field: AField::Zero, rhs: RhsField::Constant { c: 1.0 } };
        let err = residual_field(&GridFn::zeros(&grid), &spec).unwrap_err();
        assert!(matches!(err, Error::Admissibility { node: 0, .. }), "{err:?}");
        let rep = admissible(&GridFn::zeros(&grid), &spec).unwrap();
        assert!(!rep.admissible && rep.first_violation.unwrap().0 == 0);
    }

    #[test]
    fn perturbations_inside_margin_stay_admissible() {
        let grid = TorusGrid::cube(2, 16).unwrap();
        let spec = EquationSpec::constant(2, 1.0, 1.0);
        let u = manufactured_field(&grid, 0.2);
        let rep = admissible(&u, &spec).unwrap();
        assert!(rep.admissible && rep.margin > 0.0);
        let eta = 0.99 * rep.margin / hessian_perturbation_bound(&grid, 1.0);
        for t in 0..20 {
            let mut rng = stream(11, t);
            let mut v = u.clone();
            v.values.iter_mut().for_each(|x| *x += eta * rng.gen_range(-1.0..1.0));
            assert!(admissible(&v, &spec).unwrap().admissible);
        }
    }
}
