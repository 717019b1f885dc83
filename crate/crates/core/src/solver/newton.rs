//! Damped Newton iteration with a cone-preserving backtracking line search.
//!
//! Each step solves the exact linearization of the discrete residual,
//!
//!   J δu = F^{jk}D_jk δu + (F^{jk}∂_α A_jk − ∂_α φ)·Dδu + (F^{jk}∂_t A_jk − ∂_t φ)δu,
//!
//! with F^{jk} = ∂σ_p^{1/p}(λ(B))/∂B_jk, by right-preconditioned BiCGSTAB. The
//! preconditioner inverts the constant-coefficient operator κΔ_h + z̄ by FFT.
//!
//! When A and φ do not depend on t, constants solve the homogeneous linearized
//! problem. The iteration then works in the zero-mean subspace on the residual
//! minus its mean; the mean itself is reported as the compatibility defect.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::equation::Equation;
use super::grid::{GridFn, TorusGrid};
use super::{modified_hessian, residual_with, EquationSpec};
use crate::cone::{depth, in_cone};
use crate::error::{Error, Result};
use crate::linalg::{sym_eigenvalues, SymMatrix};
use crate::rng::{normal, stream};
use crate::spectral::linearization;

/// Relative tolerance of the inner linear solves.
pub const LINEAR_TOL: f64 = 1e-8;
const LINEAR_MAX_ITERS: usize = 2000;
const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-12;

/// One accepted iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonStep {
    pub iteration: usize,
    /// ‖R‖∞ of the (projected, when gauged) residual at this iterate.
    pub residual_inf: f64,
    /// min over nodes of the cone depth of λ(A + D²u); positive iff admissible.
    pub margin: f64,
    /// Step length that produced this iterate (0 for the initial state).
    pub step: f64,
    pub linear_iterations: usize,
    pub linear_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonOutcome {
    #[serde(skip)]
    pub u: Option<GridFn>,
    pub iterations: usize,
    pub residual_inf: f64,
    /// Mean of the raw residual at the solution (0 when not gauged).
    pub compatibility_defect: f64,
    pub gauged: bool,
    pub trace: Vec<NewtonStep>,
}

impl NewtonOutcome {
    pub fn solution(&self) -> &GridFn {
        self.u.as_ref().expect("solution present")
    }
}

/// Solves the equation from `u0` until ‖R‖∞ ≤ tol.
///
/// Errors: `u0` inadmissible, a stalled line search (step below 1e−12) or
/// `max_iters` steps without convergence; the last two carry the trace.
pub fn newton_solve(spec: &EquationSpec, u0: &GridFn, tol: f64, max_iters: usize) -> Result<NewtonOutcome> {
    let eq = Equation::compile(spec, &u0.grid)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let gauged = !eq.t_dependent;
    let mut u = u0.clone();
    if gauged {
        let m = u.mean();
        u.values.iter_mut().for_each(|v| *v -= m);
    }
    let (mut r, mut norm) = projected(&eq, &u, gauged)?;
    let mut trace = vec![NewtonStep {
        iteration: 0,
        residual_inf: norm,
        margin: margin(&eq, &u),
        step: 0.0,
        linear_iterations: 0,
        linear_residual: 0.0,
    }];
    let fft = FftSolver::new(&u.grid);
    let mut it = 0;
    while norm > tol {
        if it == max_iters {
            return Err(nonconvergence(it, "iteration limit reached", &trace));
        }
        it += 1;
        let op = Linearized::build(&eq, &u, gauged)?;
        let rhs: Vec<f64> = r.values.iter().map(|v| -v).collect();
        let (delta, lin_iters, lin_res) = bicgstab(&op, &fft, &rhs);
        let mut step = 1.0;
        loop {
            let mut trial = u.clone();
            trial.values.iter_mut().zip(&delta).for_each(|(v, d)| *v += step * d);
            if gauged {
                let m = trial.mean();
                trial.values.iter_mut().for_each(|v| *v -= m);
            }
            if let Ok((tr, tn)) = projected(&eq, &trial, gauged) {
                if tn <= (1.0 - ARMIJO * step) * norm {
                    u = trial;
                    r = tr;
                    norm = tn;
                    break;
                }
            }
            step *= 0.5;
            if step < MIN_STEP {
                return Err(nonconvergence(it, "line search stalled", &trace));
            }
        }
        let m = margin(&eq, &u);
        assert!(m > 0.0, "accepted Newton iterate left the cone");
        trace.push(NewtonStep {
            iteration: it,
            residual_inf: norm,
            margin: m,
            step,
            linear_iterations: lin_iters,
            linear_residual: lin_res,
        });
    }
    let defect = if gauged { residual_with(&eq, &u)?.mean() } else { 0.0 };
    Ok(NewtonOutcome { u: Some(u), iterations: it, residual_inf: norm, compatibility_defect: defect, gauged, trace })
}

fn nonconvergence(iterations: usize, why: &str, trace: &[NewtonStep]) -> Error {
    let t = serde_json::to_string(trace).unwrap_or_default();
    Error::NonConvergence { iterations, reason: format!("{why}; trace = {t}") }
}

/// Residual, projected to zero mean when gauged, and its ∞-norm.
fn projected(eq: &Equation, u: &GridFn, gauged: bool) -> Result<(GridFn, f64)> {
    let mut r = residual_with(eq, u)?;
    if gauged {
        let m = r.mean();
        r.values.iter_mut().for_each(|v| *v -= m);
    }
    let n = r.max_abs();
    Ok((r, n))
}

fn margin(eq: &Equation, u: &GridFn) -> f64 {
    (0..u.values.len())
        .map(|i| {
            let lam = sym_eigenvalues(&modified_hessian(eq, u, i).0);
            if in_cone(&lam, eq.p) {
                depth(&lam, eq.p)
            } else {
                0.0
            }
        })
        .fold(f64::INFINITY, f64::min)
}

/// Nodewise coefficients of J.
struct Linearized {
    grid: TorusGrid,
    d: usize,
    /// F^{jk}, row-major d×d per node.
    f: Vec<f64>,
    /// First-order coefficients, d per node.
    c: Vec<f64>,
    /// Zero-order coefficient.
    z: Vec<f64>,
    gauged: bool,
    kappa: f64,
    z_mean: f64,
}

impl Linearized {
    fn build(eq: &Equation, u: &GridFn, gauged: bool) -> Result<Self> {
        let d = eq.d;
        let n = u.values.len();
        let ident = SymMatrix::identity(d);
        let (mut f, mut c, mut z) = (Vec::with_capacity(n * d * d), Vec::with_capacity(n * d), Vec::with_capacity(n));
        let mut trace_sum = 0.0;
        for i in 0..n {
            let (b, du) = modified_hessian(eq, u, i);
            let lin = linearization(eq.p, &ident, &b).map_err(|_| Error::Admissibility {
                node: i,
                lambda: sym_eigenvalues(&b),
            })?;
            let x = u.grid.point(i);
            let sp = eq.scalar_part(i, &x, &du, u.values[i]);
            let rv = eq.rhs(i, &x, &du, u.values[i]);
            f.extend_from_slice(lin.f.as_slice());
            c.extend((0..d).map(|a| lin.trace_f * sp.ds_dalpha[a] - rv.dphi_dalpha[a]));
            z.push(lin.trace_f * sp.ds_dt - rv.dphi_dt);
            trace_sum += lin.trace_f;
        }
        let kappa = trace_sum / (n * d) as f64;
        let z_mean = z.iter().sum::<f64>() / n as f64;
        Ok(Linearized { grid: u.grid.clone(), d, f, c, z, gauged, kappa, z_mean })
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let d = self.d;
        let g = &self.grid;
        let h = g.h();
        for i in 0..v.len() {
            let fi = &self.f[i * d * d..(i + 1) * d * d];
            let mut acc = self.z[i] * v[i];
            for a in 0..d {
                let (p, q) = (g.shift(i, a, 1), g.shift(i, a, -1));
                acc += fi[a * d + a] * (v[p] - 2.0 * v[i] + v[q]) / (h[a] * h[a]);
                acc += self.c[i * d + a] * (v[p] - v[q]) / (2.0 * h[a]);
                for b in 0..a {
                    let mixed =
                        (v[g.shift(p, b, 1)] - v[g.shift(p, b, -1)] - v[g.shift(q, b, 1)] + v[g.shift(q, b, -1)])
                            / (4.0 * h[a] * h[b]);
                    acc += 2.0 * fi[a * d + b] * mixed;
                }
            }
            out[i] = acc;
        }
        if self.gauged {
            project(out);
        }
    }
}

fn project(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Multidimensional FFT inversion of κΔ_h + z̄ (compact three-point Laplacian).
struct FftSolver {
    sizes: Vec<usize>,
    h: Vec<f64>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl FftSolver {
    fn new(grid: &TorusGrid) -> Self {
        let mut planner = FftPlanner::new();
        let sizes = grid.sizes().to_vec();
        let forward = sizes.iter().map(|&m| planner.plan_fft_forward(m)).collect();
        let inverse = sizes.iter().map(|&m| planner.plan_fft_inverse(m)).collect();
        FftSolver { sizes, h: grid.h().to_vec(), forward, inverse }
    }

    fn transform(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        let d = self.sizes.len();
        let total = data.len();
        for a in 0..d {
            let m = self.sizes[a];
            let stride: usize = self.sizes[a + 1..].iter().product();
            let mut line = vec![Complex64::new(0.0, 0.0); m];
            for start in 0..total {
                if (start / stride) % m != 0 {
                    continue;
                }
                for k in 0..m {
                    line[k] = data[start + k * stride];
                }
                plans[a].process(&mut line);
                for k in 0..m {
                    data[start + k * stride] = line[k];
                }
            }
        }
    }

    /// y = M⁻¹x with M = κΔ_h + z̄; the zero mode is dropped when gauged.
    fn solve(&self, op: &Linearized, x: &[f64]) -> Vec<f64> {
        let mut data: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, &self.forward);
        let d = self.sizes.len();
        let strides: Vec<usize> = (0..d).map(|a| self.sizes[a + 1..].iter().product()).collect();
        for (i, c) in data.iter_mut().enumerate() {
            let mut sym = op.z_mean;
            let mut zero_mode = true;
            for a in 0..d {
                let k = (i / strides[a]) % self.sizes[a];
                zero_mode &= k == 0;
                let s = (std::f64::consts::PI * k as f64 / self.sizes[a] as f64).sin();
                sym -= op.kappa * 4.0 * s * s / (self.h[a] * self.h[a]);
            }
            if zero_mode && op.gauged {
                *c = Complex64::new(0.0, 0.0);
            } else if sym.abs() < 1e-300 {
                *c = -*c;
            } else {
                *c /= sym;
            }
        }
        self.transform(&mut data, &self.inverse);
        let scale = 1.0 / x.len() as f64;
        data.iter().map(|c| c.re * scale).collect()
    }
}

/// Right-preconditioned BiCGSTAB for J x = b from x = 0. Returns the iterate with
/// the smallest residual, the iteration count and its relative residual.
fn bicgstab(op: &Linearized, pre: &FftSolver, b: &[f64]) -> (Vec<f64>, usize, f64) {
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return (vec![0.0; n], 0, 0.0);
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let rhat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut best = (x.clone(), 1.0);
    for it in 1..=LINEAR_MAX_ITERS {
        let rho_new = dot(&rhat, &r);
        if rho_new == 0.0 || omega == 0.0 {
            return (best.0, it, best.1);
        }
        let beta = (rho_new / rho) * (alpha / omega);
        for k in 0..n {
            p[k] = r[k] + beta * (p[k] - omega * v[k]);
        }
        let y = pre.solve(op, &p);
        op.apply(&y, &mut v);
        let denom = dot(&rhat, &v);
        if denom == 0.0 {
            return (best.0, it, best.1);
        }
        alpha = rho_new / denom;
        for k in 0..n {
            s[k] = r[k] - alpha * v[k];
        }
        let snorm = dot(&s, &s).sqrt() / bnorm;
        if snorm <= LINEAR_TOL {
            x.iter_mut().zip(&y).for_each(|(xk, yk)| *xk += alpha * yk);
            return (x, it, snorm);
        }
        let zv = pre.solve(op, &s);
        op.apply(&zv, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for k in 0..n {
            x[k] += alpha * y[k] + omega * zv[k];
            r[k] = s[k] - omega * t[k];
        }
        let rnorm = dot(&r, &r).sqrt() / bnorm;
        if rnorm < best.1 {
            best = (x.clone(), rnorm);
        }
        if rnorm <= LINEAR_TOL {
            return (x, it, rnorm);
        }
        rho = rho_new;
    }
    (best.0, LINEAR_MAX_ITERS, best.1)
}

/// A smooth zero-mean random field of Fourier modes |k|∞ ≤ 2, scaled to max
/// amplitude `amplitude`.
pub fn smooth_perturbation(grid: &TorusGrid, amplitude: f64, seed: u64) -> GridFn {
    let d = grid.dim();
    let mut rng = stream(seed, 0);
    let modes: Vec<(Vec<f64>, f64, f64)> = (0..5usize.pow(d as u32))
        .map(|m| (0..d).map(|a| ((m / 5usize.pow(a as u32)) % 5) as f64 - 2.0).collect::<Vec<_>>())
        .filter(|k| k.iter().any(|&v| v != 0.0))
        .map(|k| {
            let (a, b) = (normal(&mut rng), normal(&mut rng));
            (k, a, b)
        })
        .collect();
    let mut f = grid.sample(|x| {
        modes
            .iter()
            .map(|(k, a, b)| {
                let kx: f64 = k.iter().zip(x).map(|(k, x)| k * x).sum::<f64>();
                a * kx.cos() + b * kx.sin()
            })
            .sum()
    });
    let m = f.mean();
    f.values.iter_mut().for_each(|v| *v -= m);
    let s = amplitude / f.max_abs();
    f.values.iter_mut().for_each(|v| *v *= s);
    f
}

#[cfg(test)]
mod tests {
    use super::super::{manufactured_field, AField, RhsField, ScalarField};
    use super::*;
    use crate::symfun::binomial;

    #[test]
    fn linearization_matches_directional_difference() {
        let grid = TorusGrid::cube(2, 16).unwrap();
        let spec = EquationSpec {
            p: 2,
            a_field: AField::Exponential { phi_tilde: ScalarField::CosProduct { c0: 0.2, amp: 0.1 } },
            rhs: RhsField::Exponential { phi: ScalarField::Constant { c: 0.3 }, k: 0.5 },
        };
        let eq = Equation::compile(&spec, &grid).unwrap();
        let u = grid.sample(|x| -1.0 + 0.05 * (x[0] + 2.0 * x[1]).sin());
        let dir = smooth_perturbation(&grid, 1.0, 4);
        let op = Linearized::build(&eq, &u, false).unwrap();
        let mut jv = vec![0.0; grid.len()];
        op.apply(&dir.values, &mut jv);
        let e = 1e-6;
        let shifted = |s: f64| {
            let mut w = u.clone();
            w.values.iter_mut().zip(&dir.values).for_each(|(a, b)| *a += s * b);
            residual_with(&eq, &w).unwrap()
        };
        let (rp, rm) = (shifted(e), shifted(-e));
        for i in 0..grid.len() {
            let fd = (rp.values[i] - rm.values[i]) / (2.0 * e);
            assert!((fd - jv[i]).abs() < 1e-6 * (1.0 + fd.abs()), "node {i}: {fd} vs {}", jv[i]);
        }
    }

    #[test]
    fn constant_problem_needs_no_iteration() {
        let grid = TorusGrid::cube(2, 16).unwrap();
        let spec = EquationSpec::constant(2, 1.0, binomial(2, 2));
        let out = newton_solve(&spec, &GridFn::zeros(&grid), 1e-12, 5).unwrap();
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn recovers_constant_solution_of_t_dependent_problem() {
        // With s ≡ 1 and k = 0: σ_2^{1/2}((1 − e^c)·1) = 2 ⇔ 1 − e^c = 2, impossible;
        // use p = 1 in d = 2: 2(1 − e^c) = 2·0.25 ⇒ c = ln 0.75.
        let grid = TorusGrid::cube(2, 16).unwrap();
        let spec = EquationSpec {
            p: 1,
            a_field: AField::Exponential { phi_tilde: ScalarField::Constant { c: 0.0 } },
            rhs: RhsField::Constant { c: 0.5 },
        };
        let mut u0 = smooth_perturbation(&grid, 0.02, 3);
        u0.values.iter_mut().for_each(|v| *v += -0.3);
        let out = newton_solve(&spec, &u0, 1e-12, 20).unwrap();
        assert!(!out.gauged);
        let target = 0.75f64.ln();
        assert!(out.solution().values.iter().all(|v| (v - target).abs() < 1e-10));
    }

    #[test]
    fn manufactured_converges_quickly() {
        let grid = TorusGrid::cube(2, 32).unwrap();
        let spec = EquationSpec::manufactured(2, 0.2);
        let exact = manufactured_field(&grid, 0.2);
        let mut u0 = exact.clone();
        let pert = smooth_perturbation(&grid, 0.05, 9);
        u0.values.iter_mut().zip(&pert.values).for_each(|(a, b)| *a += b);
        let out = newton_solve(&spec, &u0, 1e-9, 12).unwrap();
        assert!(out.iterations <= 12 && out.residual_inf <= 1e-9);
        let u = out.solution();
        assert!(u.mean().abs() <= 1e-12 * u.max_abs());
        let err = u.sub(&exact).values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err < 0.02, "{err}");
        for w in out.trace.windows(2) {
            assert!(w[1].residual_inf < w[0].residual_inf && w[1].margin > 0.0);
        }
    }

    #[test]
    fn inadmissible_start_rejected() {
        let grid = TorusGrid::cube(2, 16).unwrap();
        let spec = EquationSpec::constant(2, 1.0, 1.0);
        let u0 = grid.sample(|x| -2.0 * x[0].cos());
        assert!(matches!(newton_solve(&spec, &u0, 1e-9, 5), Err(Error::Admissibility { .. })));
    }

    #[test]
    fn perturbation_is_smooth_and_normalized() {
        let grid = TorusGrid::cube(2, 32).unwrap();
        let f = smooth_perturbation(&grid, 0.05, 1);
        assert!((f.max_abs() - 0.05).abs() < 1e-15);
        assert!(f.mean().abs() < 1e-15);
        assert_eq!(f, smooth_perturbation(&grid, 0.05, 1));
    }
}
