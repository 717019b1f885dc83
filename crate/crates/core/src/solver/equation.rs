//! Catalog of coefficient fields A(x, α, t) and right-hand sides φ(x, α, t).
//!
//! Every catalog A has the form s(x, α, t)·I + S(x): a scalar multiple of the metric
//! plus a stored symmetric field, which keeps the α- and t-derivatives scalar.

use serde::{Deserialize, Serialize};

use super::grid::{GridFn, TorusGrid};
use crate::cone::{in_cone, sigma_root};
use crate::error::{Error, Result};
use crate::linalg::{sym_eigenvalues, SymMatrix};
use crate::ConeSpec;

/// A scalar field on the torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarField {
    Constant { c: f64 },
    /// c0 + amp·Π_a cos x_a.
    CosProduct { c0: f64, amp: f64 },
    /// One value per node.
    Stored { values: Vec<f64> },
}

impl ScalarField {
    fn eval(&self, x: &[f64], node: usize) -> f64 {
        match self {
            ScalarField::Constant { c } => *c,
            ScalarField::CosProduct { c0, amp } => c0 + amp * x.iter().map(|v| v.cos()).product::<f64>(),
            ScalarField::Stored { values } => values[node],
        }
    }

    fn check(&self, grid: &TorusGrid, positive: bool, what: &str) -> Result<()> {
        if let ScalarField::Stored { values } = self {
            if values.len() != grid.len() {
                return Err(Error::InvalidInput(format!("{what}: stored field has the wrong length")));
            }
        }
        for i in 0..grid.len() {
            let v = self.eval(&grid.point(i), i);
            let bad = if positive { !(v > 0.0) } else { !(v >= 0.0) };
            if bad || !v.is_finite() {
                let sign = if positive { "positive" } else { "non-negative" };
                return Err(Error::InvalidInput(format!("{what} must be {sign}; node {i} has {v}")));
            }
        }
        Ok(())
    }
}

/// The coefficient tensor A(x, α, t).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AField {
    Zero,
    /// c·I.
    Conformal { c: f64 },
    /// (1 − e^t − φ̃(x)|α|²)·I with φ̃ ≥ 0.
    Exponential { phi_tilde: ScalarField },
    /// A_jk(x): one row-major d×d block per node.
    Stored { entries: Vec<Vec<f64>> },
}

/// The right-hand side φ(x, α, t).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RhsField {
    Constant { c: f64 },
    /// φ(x), one value per node.
    Stored { values: Vec<f64> },
    /// φ(x)e^{kt}(sin(|α|^{2p−1}) + 2) with φ > 0, k ≥ 0.
    Exponential { phi: ScalarField, k: f64 },
    /// σ_p^{1/p}(λ(A + D²u*)) evaluated analytically at u* = amplitude·Π_a cos x_a.
    Manufactured { amplitude: f64 },
}

/// One p-Hessian problem σ_p^{1/p}(λ(A(Du, u) + D²u)) = φ(Du, u) on the flat torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquationSpec {
    pub p: usize,
    pub a_field: AField,
    pub rhs: RhsField,
}

impl EquationSpec {
    /// A = cI, φ = c'.
    pub fn constant(p: usize, c: f64, rhs: f64) -> Self {
        EquationSpec { p, a_field: AField::Conformal { c }, rhs: RhsField::Constant { c: rhs } }
    }

    /// A = I with the manufactured right-hand side for amplitude·Π cos x_a.
    pub fn manufactured(p: usize, amplitude: f64) -> Self {
        EquationSpec { p, a_field: AField::Conformal { c: 1.0 }, rhs: RhsField::Manufactured { amplitude } }
    }

    /// True when A or φ depends on t, so constants are not a symmetry.
    pub fn t_dependent(&self) -> bool {
        matches!(self.a_field, AField::Exponential { .. })
            || matches!(self.rhs, RhsField::Exponential { k, .. } if k != 0.0)
    }
}

/// The exact manufactured field amplitude·Π_a cos x_a with its derivatives.
pub fn manufactured_exact(x: &[f64], amplitude: f64) -> (f64, Vec<f64>, SymMatrix) {
    let d = x.len();
    let (c, s): (Vec<f64>, Vec<f64>) = x.iter().map(|v| (v.cos(), v.sin())).unzip();
    let prod_except = |skip: &[usize]| (0..d).filter(|k| !skip.contains(k)).map(|k| c[k]).product::<f64>();
    let u = amplitude * prod_except(&[]);
    let grad = (0..d).map(|j| -amplitude * s[j] * prod_except(&[j])).collect();
    let mut hess = SymMatrix::zeros(d);
    for j in 0..d {
        hess.set(j, j, -u);
        for k in 0..j {
            hess.set(j, k, amplitude * s[j] * s[k] * prod_except(&[j, k]));
        }
    }
    (u, grad, hess)
}

/// Samples the manufactured field on a grid.
pub fn manufactured_field(grid: &TorusGrid, amplitude: f64) -> GridFn {
    grid.sample(|x| manufactured_exact(x, amplitude).0)
}

/// Pointwise values of the scalar part s of A and its derivatives.
pub(crate) struct ScalarPart {
    pub s: f64,
    pub ds_dalpha: Vec<f64>,
    pub ds_dt: f64,
}

/// φ and its derivatives at one node.
pub(crate) struct RhsValue {
    pub phi: f64,
    pub dphi_dalpha: Vec<f64>,
    pub dphi_dt: f64,
}

/// An [`EquationSpec`] checked against a grid, with stored fields resolved.
pub(crate) struct Equation {
    pub p: usize,
    pub d: usize,
    a: AField,
    rhs: RhsField,
    manufactured: Option<Vec<f64>>,
    pub t_dependent: bool,
}

impl Equation {
    pub fn compile(spec: &EquationSpec, grid: &TorusGrid) -> Result<Self> {
        let d = grid.dim();
        ConeSpec::new(d, spec.p)?;
        match &spec.a_field {
            AField::Conformal { c } if !c.is_finite() => {
                return Err(Error::InvalidInput("conformal factor must be finite".into()))
            }
            AField::Exponential { phi_tilde } => phi_tilde.check(grid, false, "phi_tilde")?,
            AField::Stored { entries } => {
                if entries.len() != grid.len() {
                    return Err(Error::InvalidInput("stored A has the wrong number of nodes".into()));
                }
                for e in entries {
                    SymMatrix::from_row_major(d, e.clone())?;
                }
            }
            _ => {}
        }
        let mut eq = Equation {
            p: spec.p,
            d,
            a: spec.a_field.clone(),
            rhs: spec.rhs.clone(),
            manufactured: None,
            t_dependent: spec.t_dependent(),
        };
        match &spec.rhs {
            RhsField::Constant { c } if !(*c > 0.0 && c.is_finite()) => {
                return Err(Error::InvalidInput("rhs constant must be positive".into()))
            }
            RhsField::Stored { values } => ScalarField::Stored { values: values.clone() }.check(grid, true, "rhs")?,
            RhsField::Exponential { phi, k } => {
                if !(*k >= 0.0 && k.is_finite()) {
                    return Err(Error::InvalidInput("rhs exponent k must be non-negative".into()));
                }
                phi.check(grid, true, "rhs phi")?;
            }
            RhsField::Manufactured { amplitude } => {
                let mut vals = Vec::with_capacity(grid.len());
                for i in 0..grid.len() {
                    let x = grid.point(i);
                    let (u, du, d2u) = manufactured_exact(&x, *amplitude);
                    let b = eq.a_matrix(i, &x, &du, u).add(&d2u);
                    let lam = sym_eigenvalues(&b);
                    if !in_cone(&lam, spec.p) {
                        return Err(Error::Admissibility { node: i, lambda: lam });
                    }
                    vals.push(sigma_root(&lam, spec.p));
                }
                eq.manufactured = Some(vals);
            }
            _ => {}
        }
        Ok(eq)
    }

    /// Scalar part s(x, α, t) of A with its derivatives.
    pub fn scalar_part(&self, node: usize, x: &[f64], alpha: &[f64], t: f64) -> ScalarPart {
        let zero = vec![0.0; self.d];
        match &self.a {
            AField::Zero | AField::Stored { .. } => ScalarPart { s: 0.0, ds_dalpha: zero, ds_dt: 0.0 },
            AField::Conformal { c } => ScalarPart { s: *c, ds_dalpha: zero, ds_dt: 0.0 },
            AField::Exponential { phi_tilde } => {
                let pt = phi_tilde.eval(x, node);
                let a2: f64 = alpha.iter().map(|v| v * v).sum();
                let et = t.exp();
                ScalarPart {
                    s: 1.0 - et - pt * a2,
                    ds_dalpha: alpha.iter().map(|v| -2.0 * pt * v).collect(),
                    ds_dt: -et,
                }
            }
        }
    }

    /// A(x, α, t) as a matrix.
    pub fn a_matrix(&self, node: usize, x: &[f64], alpha: &[f64], t: f64) -> SymMatrix {
        let s = self.scalar_part(node, x, alpha, t).s;
        let mut m = SymMatrix::identity(self.d).scale(s);
        if let AField::Stored { entries } = &self.a {
            m = m.add(&SymMatrix::symmetrize(self.d, &entries[node]));
        }
        m
    }

    pub fn rhs(&self, node: usize, x: &[f64], alpha: &[f64], t: f64) -> RhsValue {
        let zero = vec![0.0; self.d];
        match &self.rhs {
            RhsField::Constant { c } => RhsValue { phi: *c, dphi_dalpha: zero, dphi_dt: 0.0 },
            RhsField::Stored { values } => RhsValue { phi: values[node], dphi_dalpha: zero, dphi_dt: 0.0 },
            RhsField::Manufactured { .. } => {
                let vals = self.manufactured.as_ref().expect("resolved at compile time");
                RhsValue { phi: vals[node], dphi_dalpha: zero, dphi_dt: 0.0 }
            }
            RhsField::Exponential { phi, k } => {
                let base = phi.eval(x, node) * (k * t).exp();
                let r: f64 = alpha.iter().map(|v| v * v).sum::<f64>().sqrt();
                let q = 2.0 * self.p as f64 - 1.0;
                let arg = r.powf(q);
                // d/dα_a sin(|α|^q) = cos(|α|^q)·q|α|^{q−2}α_a; at α = 0 with q = 1 the
                // zero subgradient is used.
                let radial = if r > 0.0 { base * arg.cos() * q * r.powf(q - 2.0) } else { 0.0 };
                let phi_val = base * (arg.sin() + 2.0);
                RhsValue {
                    phi: phi_val,
                    dphi_dalpha: alpha.iter().map(|v| radial * v).collect(),
                    dphi_dt: k * phi_val,
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manufactured_derivatives_match_differences() {
        let x = [0.7, -1.3];
        let (u, g, h) = manufactured_exact(&x, 0.2);
        let e = 1e-5;
        let f = |a: f64, b: f64| manufactured_exact(&[a, b], 0.2).0;
        assert!((g[0] - (f(x[0] + e, x[1]) - f(x[0] - e, x[1])) / (2.0 * e)).abs() < 1e-9);
        let fd01 = (f(x[0] + e, x[1] + e) - f(x[0] + e, x[1] - e) - f(x[0] - e, x[1] + e) + f(x[0] - e, x[1] - e))
            / (4.0 * e * e);
        assert!((h.get(0, 1) - fd01).abs() < 1e-5);
        assert_eq!(h.get(0, 0), -u);
    }

    #[test]
    fn exponential_derivatives() {
        let grid = TorusGrid::cube(2, 8).unwrap();
        let spec = EquationSpec {
            p: 2,
            a_field: AField::Exponential { phi_tilde: ScalarField::Constant { c: 0.3 } },
            rhs: RhsField::Exponential { phi: ScalarField::Constant { c: 0.5 }, k: 0.2 },
        };
        let eq = Equation::compile(&spec, &grid).unwrap();
        assert!(eq.t_dependent);
        let (alpha, t, e) = ([0.4, -0.9], -0.3, 1e-6);
        let s = |a: &[f64], t: f64| eq.scalar_part(0, &[0.0, 0.0], a, t).s;
        let r = |a: &[f64], t: f64| eq.rhs(0, &[0.0, 0.0], a, t).phi;
        let sp = eq.scalar_part(0, &[0.0, 0.0], &alpha, t);
        let rv = eq.rhs(0, &[0.0, 0.0], &alpha, t);
        assert!((sp.ds_dt - (s(&alpha, t + e) - s(&alpha, t - e)) / (2.0 * e)).abs() < 1e-8);
        assert!((rv.dphi_dt - (r(&alpha, t + e) - r(&alpha, t - e)) / (2.0 * e)).abs() < 1e-8);
        let ap = [alpha[0], alpha[1] + e];
        let am = [alpha[0], alpha[1] - e];
        assert!((sp.ds_dalpha[1] - (s(&ap, t) - s(&am, t)) / (2.0 * e)).abs() < 1e-8);
        assert!((rv.dphi_dalpha[1] - (r(&ap, t) - r(&am, t)) / (2.0 * e)).abs() < 1e-8);
    }

    #[test]
    fn invalid_entries_rejected() {
        let grid = TorusGrid::cube(2, 8).unwrap();
        assert!(Equation::compile(&EquationSpec::constant(2, 1.0, 0.0), &grid).is_err());
        assert!(Equation::compile(&EquationSpec::constant(3, 1.0, 1.0), &grid).is_err());
        let spec = EquationSpec { p: 1, a_field: AField::Zero, rhs: RhsField::Stored { values: vec![1.0; 3] } };
        assert!(Equation::compile(&spec, &grid).is_err());
        assert!(!EquationSpec::manufactured(2, 0.2).t_dependent());
    }

    #[test]
    fn spec_json_roundtrip() {
        let spec = EquationSpec::manufactured(2, 0.2);
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(text, r#"{"p":2,"a_field":{"kind":"conformal","c":1.0},"rhs":{"kind":"manufactured","amplitude":0.2}}"#);
        assert_eq!(serde_json::from_str::<EquationSpec>(&text).unwrap(), spec);
    }
}
