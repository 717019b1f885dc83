//! Explicit subsolutions of the p-Hessian Dirichlet problem on balls, the rank-one
//! σ_p expansion, and numeric checkers for the key lemma in vector and matrix form.
//!
//! The subsolution is v = ψ + A(e^{Bu} − 1), where u is a defining function of the
//! ball and A, B are the explicit constants of the construction.

use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::cone::{in_closure, in_cone, in_cone_strict, sigma_root};
use crate::error::{Error, Result};
use crate::linalg::{sym_eigenvalues, SymMatrix};
use crate::rng::{normal, stream, Rng};
use crate::spectral::{diagonal_weights, linearization};
use crate::symfun::{check_vec, esym, esym_minors, esym_trunc};
use crate::ConeSpec;

/// A scalar field on ℝⁿ.
pub type Field = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// A scalar field of (x, t).
pub type FieldT = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

/// Both sides of σ_p(λ(diag μ + Bννᵀ)) = σ_p(μ) + B Σ_j ν_j² σ_{p−1}(μ|j).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankOne {
    pub lhs: f64,
    pub rhs: f64,
}

/// Evaluates the rank-one expansion; the left side goes through the eigensolver.
pub fn rank_one_sigma(mu: &[f64], b: f64, nu: &[f64], p: usize) -> Result<RankOne> {
    check_vec(mu)?;
    check_vec(nu)?;
    let n = mu.len();
    if nu.len() != n {
        return Err(Error::InvalidInput("mu and nu differ in length".into()));
    }
    if p > n || !b.is_finite() {
        return Err(Error::InvalidInput("need p <= n and finite B".into()));
    }
    let mut m = SymMatrix::diag(mu);
    for j in 0..n {
        for k in 0..=j {
            m.set(j, k, m.get(j, k) + b * nu[j] * nu[k]);
        }
    }
    let lhs = esym(p as i64, &sym_eigenvalues(&m));
    let minors = esym_minors(p as i64 - 1, mu);
    let rhs = esym(p as i64, mu) + b * nu.iter().zip(&minors).map(|(x, s)| x * x * s).sum::<f64>();
    Ok(RankOne { lhs, rhs })
}

/// Boundary data ψ, extended inside the ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PsiSpec {
    Zero,
    /// ψ(x) = ½Σ h_j x_j² + g·x + c.
    Quadratic { hess_diag: Vec<f64>, grad: Vec<f64>, constant: f64 },
}

/// The positive weight φ̃(x, t), non-decreasing in t.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhiTildeSpec {
    Constant { c: f64 },
    /// c·e^{kt} with c > 0, k ≥ 0.
    Exponential { c: f64, k: f64 },
    /// c0 + c1|x|² with c0 > 0, c1 ≥ 0.
    Radial { c0: f64, c1: f64 },
}

/// Serializable description of a [`BallProblem`]. The defining function is
/// u = (|x|² − r²)/2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub n: usize,
    pub radius: f64,
    /// Grid nodes per axis of the bounding cube.
    pub resolution: usize,
    pub p: usize,
    pub alpha: f64,
    pub psi: PsiSpec,
    pub phi_tilde: PhiTildeSpec,
}

/// Data of the subsolution construction on the ball |x| < r.
#[derive(Clone)]
pub struct BallProblem {
    pub n: usize,
    pub radius: f64,
    pub resolution: usize,
    pub p: usize,
    pub alpha: f64,
    pub psi: Field,
    pub phi_tilde: FieldT,
    /// Defining function: negative inside, zero with nonzero gradient on the sphere.
    pub u: Field,
}

/// Largest cube grid accepted by [`construct`].
const MAX_NODES: usize = 50_000_000;

impl BallProblem {
    pub fn from_spec(spec: &BallSpec) -> Result<Self> {
        let n = spec.n;
        ConeSpec::new(n, spec.p)?;
        if !(spec.radius > 0.0 && spec.radius.is_finite()) {
            return Err(Error::InvalidInput("radius must be positive".into()));
        }
        if !(spec.alpha > 0.0 && spec.alpha < 1.0) {
            return Err(Error::InvalidInput("alpha must lie in (0, 1)".into()));
        }
        let psi: Field = match &spec.psi {
            PsiSpec::Zero => Arc::new(|_: &[f64]| 0.0),
            PsiSpec::Quadratic { hess_diag, grad, constant } => {
                if hess_diag.len() != n || grad.len() != n {
                    return Err(Error::InvalidInput("psi coefficients must have length n".into()));
                }
                check_vec(hess_diag)?;
                check_vec(grad)?;
                let (h, g, c) = (hess_diag.clone(), grad.clone(), *constant);
                Arc::new(move |x: &[f64]| {
                    c + x.iter().zip(&h).zip(&g).map(|((x, h), g)| 0.5 * h * x * x + g * x).sum::<f64>()
                })
            }
        };
        let phi_tilde: FieldT = match spec.phi_tilde {
            PhiTildeSpec::Constant { c } if c > 0.0 => Arc::new(move |_: &[f64], _| c),
            PhiTildeSpec::Exponential { c, k } if c > 0.0 && k >= 0.0 => {
                Arc::new(move |_: &[f64], t: f64| c * (k * t).exp())
            }
            PhiTildeSpec::Radial { c0, c1 } if c0 > 0.0 && c1 >= 0.0 => {
                Arc::new(move |x: &[f64], _| c0 + c1 * x.iter().map(|v| v * v).sum::<f64>())
            }
            _ => return Err(Error::InvalidInput("phi_tilde must be positive and non-decreasing in t".into())),
        };
        let r2 = spec.radius * spec.radius;
        let u: Field = Arc::new(move |x: &[f64]| 0.5 * (x.iter().map(|v| v * v).sum::<f64>() - r2));
        Ok(BallProblem {
            n,
            radius: spec.radius,
            resolution: spec.resolution,
            p: spec.p,
            alpha: spec.alpha,
            psi,
            phi_tilde,
            u,
        })
    }
}

/// Output of [`construct`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsolutionResult {
    pub a: f64,
    pub b: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub c1: f64,
    pub c2: f64,
    pub max_du: f64,
    pub min_u: f64,
    /// min over checked nodes of σ_p^{1/p}(λ(D²v)) − φ̃(x, v)(1 + |Dv| + |v|^α).
    pub worst_slack: f64,
    /// Flat index of the node attaining `worst_slack`.
    pub worst_node: usize,
    /// Interior nodes (distance ≥ 2h from the sphere) where v was checked.
    pub nodes_checked: usize,
    /// Nodes per axis of the bounding cube [−r, r]ⁿ.
    pub sizes: Vec<usize>,
    pub h: f64,
    /// v on the cube grid, row-major with the last axis fastest.
    #[serde(skip)]
    pub v: Vec<f64>,
}

/// Samples of a field on the cube grid, with finite-difference derivatives.
struct CubeGrid {
    n: usize,
    m: usize,
    h: f64,
    r: f64,
}

impl CubeGrid {
    fn len(&self) -> usize {
        self.m.pow(self.n as u32)
    }

    fn multi(&self, mut i: usize) -> Vec<usize> {
        let mut idx = vec![0; self.n];
        for a in (0..self.n).rev() {
            idx[a] = i % self.m;
            i /= self.m;
        }
        idx
    }

    fn point(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().map(|&k| -self.r + k as f64 * self.h).collect()
    }

    fn stride(&self, axis: usize) -> usize {
        self.m.pow((self.n - 1 - axis) as u32)
    }

    fn sample(&self, f: &Field) -> Vec<f64> {
        (0..self.len()).map(|i| f(&self.point(&self.multi(i)))).collect()
    }

    /// First-derivative stencil along one axis: (offset, weight·h).
    fn d1(&self, k: usize) -> Vec<(isize, f64)> {
        if k == 0 {
            vec![(0, -1.5), (1, 2.0), (2, -0.5)]
        } else if k == self.m - 1 {
            vec![(0, 1.5), (-1, -2.0), (-2, 0.5)]
        } else {
            vec![(-1, -0.5), (1, 0.5)]
        }
    }

    /// Second-derivative stencil along one axis: (offset, weight·h²).
    fn d2(&self, k: usize) -> Vec<(isize, f64)> {
        if k == 0 {
            vec![(0, 2.0), (1, -5.0), (2, 4.0), (3, -1.0)]
        } else if k == self.m - 1 {
            vec![(0, 2.0), (-1, -5.0), (-2, 4.0), (-3, -1.0)]
        } else {
            vec![(-1, 1.0), (0, -2.0), (1, 1.0)]
        }
    }

    /// Gradient and Hessian of `f` at node `i`, second order in h.
    fn derivs(&self, f: &[f64], i: usize, idx: &[usize]) -> (Vec<f64>, SymMatrix) {
        let n = self.n;
        let at = |off: isize| f[(i as isize + off) as usize];
        let mut grad = vec![0.0; n];
        let mut hess = SymMatrix::zeros(n);
        let st: Vec<isize> = (0..n).map(|a| self.stride(a) as isize).collect();
        let d1: Vec<_> = idx.iter().map(|&k| self.d1(k)).collect();
        for a in 0..n {
            grad[a] = d1[a].iter().map(|&(o, w)| w * at(o * st[a])).sum::<f64>() / self.h;
            let daa = self.d2(idx[a]).iter().map(|&(o, w)| w * at(o * st[a])).sum::<f64>();
            hess.set(a, a, daa / (self.h * self.h));
            for b in 0..a {
                let mut s = 0.0;
                for &(oa, wa) in &d1[a] {
                    for &(ob, wb) in &d1[b] {
                        s += wa * wb * at(oa * st[a] + ob * st[b]);
                    }
                }
                hess.set(a, b, s / (self.h * self.h));
            }
        }
        (grad, hess)
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Builds v = ψ + A(e^{Bu} − 1) on the ball and measures how well it satisfies
///
///   σ_p^{1/p}(λ(D²v)) ≥ φ̃(x, v)(1 + |Dv| + |v|^α),  λ(D²v) ∈ Γ_p.
///
/// ε₁, ε₂, C₁, C₂, max|Du| and min u are grid extrema over the closed ball; v is
/// checked on nodes at distance at least 2h from the sphere.
pub fn construct(problem: &BallProblem) -> Result<SubsolutionResult> {
    let (n, p, r, alpha) = (problem.n, problem.p, problem.radius, problem.alpha);
    ConeSpec::new(n, p)?;
    let m = problem.resolution;
    if m < 5 || m.checked_pow(n as u32).map_or(true, |t| t > MAX_NODES) {
        return Err(Error::InvalidInput(format!("resolution {m} outside 5..=(5e7)^(1/n)")));
    }
    let grid = CubeGrid { n, m, h: 2.0 * r / (m - 1) as f64, r };
    let h = grid.h;
    let us = grid.sample(&problem.u);
    let psis = grid.sample(&problem.psi);
    let in_ball = |x: &[f64]| norm(x) <= r * (1.0 + 1e-12);

    let (mut eps1, mut eps2, mut max_du, mut min_u) = (f64::INFINITY, f64::INFINITY, 0.0f64, f64::INFINITY);
    let (mut c1, mut max_dpsi, mut max_psi_pow) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..grid.len() {
        let idx = grid.multi(i);
        let x = grid.point(&idx);
        if !in_ball(&x) {
            continue;
        }
        let (du, d2u) = grid.derivs(&us, i, &idx);
        let lam = sym_eigenvalues(&d2u);
        if !in_cone(&lam, p) {
            return Err(construction(i, format!("lambda(D2u) = {lam:?} is not in Gamma_{p}")));
        }
        let inner = norm(&x) < r * (1.0 - 1e-12);
        if inner && us[i] >= 0.0 {
            return Err(construction(i, "u must be negative inside the ball".into()));
        }
        if norm(&x) > r - h && norm(&du) <= 0.0 {
            return Err(construction(i, "Du vanishes near the boundary".into()));
        }
        eps1 = eps1.min(esym(p as i64, &lam));
        eps2 = eps2.min(esym_trunc(p as i64 - 1, &lam, &[n - 1]));
        max_du = max_du.max(norm(&du));
        min_u = min_u.min(us[i]);

        let (dpsi, d2psi) = grid.derivs(&psis, i, &idx);
        let lpsi = sym_eigenvalues(&d2psi);
        if !in_closure(&lpsi, p) {
            return Err(construction(i, format!("lambda(D2psi) = {lpsi:?} is not in the closure of Gamma_{p}")));
        }
        let w = (problem.phi_tilde)(&x, psis[i]);
        if !(w > 0.0 && w.is_finite()) {
            return Err(construction(i, format!("phi_tilde = {w} is not positive")));
        }
        c1 = c1.max(w);
        max_dpsi = max_dpsi.max(norm(&dpsi));
        max_psi_pow = max_psi_pow.max(psis[i].abs().powf(alpha));
    }
    let c2 = 1.0 + max_dpsi + max_psi_pow;
    let (a, b) = constants(p, alpha, eps1, eps2, c1, c2, max_du, min_u);
    if !(a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0) {
        return Err(Error::Construction { node: 0, reason: format!("constants A = {a}, B = {b} are not usable") });
    }

    let v: Vec<f64> = psis.iter().zip(&us).map(|(ps, u)| ps + a * ((b * u).exp() - 1.0)).collect();
    let (mut worst_slack, mut worst_node, mut checked) = (f64::INFINITY, 0, 0);
    for i in 0..grid.len() {
        let idx = grid.multi(i);
        let x = grid.point(&idx);
        if norm(&x) > r - 2.0 * h {
            continue;
        }
        let (dv, d2v) = grid.derivs(&v, i, &idx);
        let lam = sym_eigenvalues(&d2v);
        if !in_cone(&lam, p) {
            return Err(construction(i, format!("lambda(D2v) = {lam:?} is not in Gamma_{p}")));
        }
        let slack = sigma_root(&lam, p)
            - (problem.phi_tilde)(&x, v[i]) * (1.0 + norm(&dv) + v[i].abs().powf(alpha));
        checked += 1;
        if slack < worst_slack {
            worst_slack = slack;
            worst_node = i;
        }
    }
    if checked == 0 {
        return Err(Error::InvalidInput("grid too coarse: no node at distance 2h from the sphere".into()));
    }
    Ok(SubsolutionResult {
        a,
        b,
        eps1,
        eps2,
        c1,
        c2,
        max_du,
        min_u,
        worst_slack,
        worst_node,
        nodes_checked: checked,
        sizes: vec![m; n],
        h,
        v,
    })
}

fn construction(node: usize, reason: String) -> Error {
    Error::Construction { node, reason }
}

/// The constants (A, B) of the construction, with the p = 1 branch separate.
#[allow(clippy::too_many_arguments)]
pub fn constants(
    p: usize,
    alpha: f64,
    eps1: f64,
    eps2: f64,
    c1: f64,
    c2: f64,
    max_du: f64,
    min_u: f64,
) -> (f64, f64) {
    let pf = p as f64;
    let (b, inner) = if p >= 2 {
        let b = c1.powi(p as i32) * 2f64.powi(p as i32 - 1) / eps2 * max_du.powi(p as i32 - 2);
        (b, c1 * 2f64.powf((2.0 * pf - 1.0) / pf) * eps1.powf(-1.0 / pf) / b * (-b * min_u).exp())
    } else {
        let b = c1 * c1 / (2.0 * eps1 * eps2);
        (b, 4.0 / eps1 * c1 / b * (-b * min_u).exp())
    };
    let a = c2.powf(1.0 / alpha) + inner.powf(1.0 / (1.0 - alpha));
    (a, b)
}

/// Parameters of the key lemma for f = σ_p^{1/p} on Γ_p.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyLemmaConfig {
    pub n: usize,
    pub p: usize,
    pub delta: f64,
    /// The ball radius R in the level-set hypothesis.
    pub radius: f64,
    pub a: f64,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    /// Random ray directions used to probe the hypothesis.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_samples() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyLemmaReport {
    pub lhs: f64,
    pub rhs: f64,
    /// lhs − rhs.
    pub slack: f64,
    /// The sampled level set lies in the ball of radius R. False also covers
    /// "undetermined": a sampled ray that never reaches the level.
    pub hypothesis_ok: bool,
    /// Largest |ξ| found on {f = a} ∩ (μ − δ1 + Γ_n); None when some ray never
    /// reaches the level.
    pub level_set_radius: Option<f64>,
}

/// Evaluates both sides of the key-lemma conclusion
///
///   Σ f_j(ν)(μ_j − ν_j) ≥ δΣ f_j(ν) − (R + |μ − δ1|) min_j f_j(ν) + a − f(ν),
///
/// with f_j = ∂f/∂μ_j, and probes the level-set hypothesis by ray sampling.
pub fn key_lemma_check(cfg: &KeyLemmaConfig) -> Result<KeyLemmaReport> {
    let (n, p) = (cfg.n, cfg.p);
    ConeSpec::new(n, p)?;
    check_vec(&cfg.mu)?;
    check_vec(&cfg.nu)?;
    if cfg.mu.len() != n || cfg.nu.len() != n {
        return Err(Error::InvalidInput("mu and nu must have length n".into()));
    }
    if !(cfg.delta > 0.0 && cfg.radius > 0.0 && cfg.a > 0.0 && cfg.a.is_finite()) {
        return Err(Error::InvalidInput("need delta, R, a > 0".into()));
    }
    if !in_cone_strict(&cfg.nu, p) {
        return Err(Error::Precondition(format!("nu = {:?} is not in Gamma_{p}", cfg.nu)));
    }
    let base: Vec<f64> = cfg.mu.iter().map(|m| m - cfg.delta).collect();
    let (lhs, rhs) = key_lemma_sides(p, cfg.delta, cfg.radius, cfg.a, &cfg.mu, &cfg.nu, norm(&base));
    let rho = level_set_radius(p, cfg.a, &base, cfg.samples, cfg.seed);
    Ok(KeyLemmaReport {
        lhs,
        rhs,
        slack: lhs - rhs,
        hypothesis_ok: rho.is_some_and(|r| r < cfg.radius),
        level_set_radius: rho,
    })
}

fn key_lemma_sides(p: usize, delta: f64, radius: f64, a: f64, mu: &[f64], nu: &[f64], shift: f64) -> (f64, f64) {
    let df = diagonal_weights(p, nu);
    let lhs = df.iter().zip(mu.iter().zip(nu)).map(|(d, (m, v))| d * (m - v)).sum();
    let sum: f64 = df.iter().sum();
    let min = df.iter().copied().fold(f64::INFINITY, f64::min);
    (lhs, delta * sum - (radius + shift) * min + a - sigma_root(nu, p))
}

/// Largest norm of a point of {σ_p^{1/p} = a} ∩ (base + Γ_n) found along the n
/// coordinate rays and `samples` random rays in Γ_n from `base`. None when a ray
/// never reaches the level, i.e. the intersection is unbounded.
pub fn level_set_radius(p: usize, a: f64, base: &[f64], samples: usize, seed: u64) -> Option<f64> {
    let n = base.len();
    let mut rho = 0.0f64;
    for t in 0..n + samples {
        let dir: Vec<f64> = if t < n {
            (0..n).map(|j| (j == t) as u8 as f64).collect()
        } else {
            let mut rng = stream(seed, t as u64);
            let d: Vec<f64> = (0..n).map(|_| normal(&mut rng).abs() + 1e-12).collect();
            let s = norm(&d);
            d.into_iter().map(|x| x / s).collect()
        };
        if let Some(x) = ray_hit(p, a, base, &dir)? {
            rho = rho.max(norm(&x));
        }
    }
    Some(rho)
}

/// The point of base + s·dir (s > 0) where σ_p^{1/p} reaches a. Outer None: never
/// reached; inner None: the ray starts above the level.
fn ray_hit(p: usize, a: f64, base: &[f64], dir: &[f64]) -> Option<Option<Vec<f64>>> {
    let at = |s: f64| base.iter().zip(dir).map(|(b, d)| b + s * d).collect::<Vec<_>>();
    let level = |s: f64| {
        let x = at(s);
        if in_cone_strict(&x, p) {
            sigma_root(&x, p)
        } else {
            -1.0
        }
    };
    if level(0.0) >= a {
        return Some(None);
    }
    let mut hi = 1.0;
    while level(hi) < a {
        hi *= 2.0;
        if hi > 1e15 {
            return None;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if level(mid) < a {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Some(Some(at(hi)))
}

/// A random configuration whose hypothesis holds by construction of R:
/// R = 2ρ + 1 for the sampled level-set radius ρ. Redraws while the level set is
/// unbounded.
pub fn sample_key_lemma_config(n: usize, p: usize, samples: usize, seed: u64, index: u64) -> Result<KeyLemmaConfig> {
    ConeSpec::new(n, p)?;
    let mut rng = stream(seed, index);
    for _ in 0..1000 {
        let delta = rng.gen_range(0.1..1.0);
        let a = rng.gen_range(0.2..3.0);
        let mu: Vec<f64> = (0..n).map(|_| delta + 1.5 * normal(&mut rng)).collect();
        let nu = sample_in_cone(n, p, &mut rng);
        let base: Vec<f64> = mu.iter().map(|m| m - delta).collect();
        if let Some(rho) = level_set_radius(p, a, &base, samples, rng.gen()) {
            return Ok(KeyLemmaConfig { n, p, delta, radius: 2.0 * rho + 1.0, a, mu, nu, samples, seed: rng.gen() });
        }
    }
    Err(Error::Search("no bounded level set in 1000 draws".into()))
}

/// A random point of Γ_p: Gaussian entries shifted by a random multiple of 1_n.
pub fn sample_in_cone(n: usize, p: usize, rng: &mut Rng) -> Vec<f64> {
    loop {
        let shift = rng.gen_range(-0.5..2.0);
        let x: Vec<f64> = (0..n).map(|_| shift + normal(rng)).collect();
        if in_cone_strict(&x, p) && in_cone(&x, p) {
            return x;
        }
    }
}

/// Both sides of the matrix form of the key lemma at (C, D):
///
///   F^{jk}(c_jk − d_jk) ≥ δ tr F + a − f(λ(D)) − (R + |λ(C) − δ1|) λ_1(F),
///
/// where F^{jk} = ∂f(λ(I, B))/∂b_jk at B = D.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixFormReport {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

pub fn key_lemma_matrix(
    c: &SymMatrix,
    d: &SymMatrix,
    p: usize,
    delta: f64,
    radius: f64,
    a: f64,
) -> Result<MatrixFormReport> {
    let n = c.n();
    if d.n() != n {
        return Err(Error::InvalidInput("C and D differ in size".into()));
    }
    let lin = linearization(p, &SymMatrix::identity(n), d)?;
    let lhs: f64 = (0..n)
        .flat_map(|j| (0..n).map(move |k| (j, k)))
        .map(|(j, k)| lin.f.get(j, k) * (c.get(j, k) - d.get(j, k)))
        .sum();
    let shifted: Vec<f64> = sym_eigenvalues(c).iter().map(|x| x - delta).collect();
    let rhs = delta * lin.trace_f + a - sigma_root(&lin.lambda, p) - (radius + norm(&shifted)) * lin.min_eig;
    Ok(MatrixFormReport { lhs, rhs, slack: lhs - rhs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball(n: usize, p: usize, phi: f64, alpha: f64, m: usize) -> BallProblem {
        BallProblem::from_spec(&BallSpec {
            n,
            radius: 1.0,
            resolution: m,
            p,
            alpha,
            psi: PsiSpec::Zero,
            phi_tilde: PhiTildeSpec::Constant { c: phi },
        })
        .unwrap()
    }

    #[test]
    fn rank_one_examples() {
        let r = rank_one_sigma(&[1.0, 1.0, 1.0], 1.0, &[1.0, 0.0, 0.0], 2).unwrap();
        assert!((r.lhs - 5.0).abs() < 1e-13 && r.rhs == 5.0);
        let mu = [0.3, -1.2, 2.5, 0.7];
        let r = rank_one_sigma(&mu, 0.0, &[1.0, 2.0, 3.0, 4.0], 3).unwrap();
        assert!((r.lhs - r.rhs).abs() < 1e-13 && r.rhs == esym(3, &mu));
        let r = rank_one_sigma(&mu, 2.0, &[0.0; 4], 3).unwrap();
        assert!((r.lhs - r.rhs).abs() < 1e-13);
    }

    #[test]
    fn identity_hessian_constants() {
        let res = construct(&ball(2, 2, 0.1, 0.5, 33)).unwrap();
        assert!((res.eps1 - 1.0).abs() < 1e-12 && (res.eps2 - 1.0).abs() < 1e-12);
        assert!(res.worst_slack >= 0.0, "{res:?}");
        assert_eq!(res.c1, 0.1);
        assert_eq!(res.c2, 1.0);
    }

    #[test]
    fn zero_psi_gives_negative_interior_zero_boundary() {
        let res = construct(&ball(2, 1, 0.05, 0.25, 17)).unwrap();
        let grid = CubeGrid { n: 2, m: 17, h: res.h, r: 1.0 };
        for i in 0..grid.len() {
            let x = grid.point(&grid.multi(i));
            let d = norm(&x);
            if d < 1.0 - 1e-12 {
                assert!(res.v[i] < 0.0 && res.v[i] > -res.a);
            } else if (d - 1.0).abs() < 1e-12 {
                assert!(res.v[i].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn finite_differences_exact_on_quadratics() {
        let grid = CubeGrid { n: 2, m: 7, h: 1.0 / 3.0, r: 1.0 };
        let f: Field = Arc::new(|x: &[f64]| 1.5 * x[0] * x[0] - x[0] * x[1] + 0.25 * x[1] * x[1] + x[1]);
        let vals = grid.sample(&f);
        for i in 0..grid.len() {
            let idx = grid.multi(i);
            let x = grid.point(&idx);
            let (g, hs) = grid.derivs(&vals, i, &idx);
            assert!((g[0] - (3.0 * x[0] - x[1])).abs() < 1e-12);
            assert!((g[1] - (-x[0] + 0.5 * x[1] + 1.0)).abs() < 1e-12);
            assert!((hs.get(0, 0) - 3.0).abs() < 1e-11 && (hs.get(0, 1) + 1.0).abs() < 1e-11);
            assert!((hs.get(1, 1) - 0.5).abs() < 1e-11);
        }
    }

    #[test]
    fn inadmissible_psi_reported() {
        let spec = BallSpec {
            n: 2,
            radius: 1.0,
            resolution: 9,
            p: 2,
            alpha: 0.5,
            psi: PsiSpec::Quadratic { hess_diag: vec![1.0, -2.0], grad: vec![0.0, 0.0], constant: 0.0 },
            phi_tilde: PhiTildeSpec::Constant { c: 0.1 },
        };
        let err = construct(&BallProblem::from_spec(&spec).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Construction { .. }), "{err:?}");
    }

    #[test]
    fn doubling_phi_does_not_decrease_b() {
        for p in 1..=2 {
            let b1 = construct(&ball(2, p, 0.05, 0.5, 17)).unwrap().b;
            let b2 = construct(&ball(2, p, 0.1, 0.5, 17)).unwrap().b;
            assert!(b2 >= b1);
        }
    }

    #[test]
    fn key_lemma_linear_example() {
        let cfg = KeyLemmaConfig {
            n: 3,
            p: 1,
            delta: 0.5,
            radius: 1.0,
            a: 2.0,
            mu: vec![2.0; 3],
            nu: vec![1.0; 3],
            samples: 100,
            seed: 0,
        };
        let rep = key_lemma_check(&cfg).unwrap();
        let shift = (3.0 * 1.5f64 * 1.5).sqrt();
        assert!((rep.lhs - 3.0).abs() < 1e-14);
        assert!((rep.rhs - (1.5 - (1.0 + shift) + 2.0 - 3.0)).abs() < 1e-14);
        assert!(rep.hypothesis_ok && rep.slack >= 0.0);
        assert_eq!(rep.level_set_radius, Some(0.0));
    }

    #[test]
    fn key_lemma_at_shifted_level() {
        let nu = vec![0.5, 1.0, 2.0, 2.5];
        let delta = 0.3;
        let mu: Vec<f64> = nu.iter().map(|x| x + delta).collect();
        let a = sigma_root(&nu, 2);
        let (lhs, rhs) = key_lemma_sides(2, delta, 4.0, a, &mu, &nu, norm(&nu));
        let df = diagonal_weights(2, &nu);
        assert!((lhs - delta * df.iter().sum::<f64>()).abs() < 1e-14);
        assert!(lhs >= rhs);
    }

    #[test]
    fn unbounded_level_set_detected() {
        // σ_1(base + s e_1) grows, but for p = 2 the slope σ_1(base|k) can be negative.
        assert!(level_set_radius(2, 1.0, &[-5.0, -5.0, 0.0], 10, 1).is_none());
        assert!(level_set_radius(1, 1.0, &[-5.0, -5.0, 0.0], 10, 1).is_some());
    }

    #[test]
    fn nu_outside_cone_rejected() {
        let cfg = KeyLemmaConfig {
            n: 2,
            p: 2,
            delta: 0.5,
            radius: 1.0,
            a: 1.0,
            mu: vec![1.0, 1.0],
            nu: vec![-1.0, 2.0],
            samples: 10,
            seed: 0,
        };
        assert!(matches!(key_lemma_check(&cfg), Err(Error::Precondition(_))));
    }

    #[test]
    fn matrix_form_matches_vector_form_on_diagonals() {
        let nu = [0.4, 1.1, 2.0];
        let cdiag = [2.5, -0.5, 1.25];
        let (delta, radius, a) = (0.4, 6.0, 1.5);
        let rep = key_lemma_matrix(&SymMatrix::diag(&cdiag), &SymMatrix::diag(&nu), 2, delta, radius, a).unwrap();
        let shifted: Vec<f64> = cdiag.iter().map(|x| x - delta).collect();
        let (lhs, rhs) = key_lemma_sides(2, delta, radius, a, &cdiag, &nu, norm(&shifted));
        assert!((rep.lhs - lhs).abs() < 1e-13 && (rep.rhs - rhs).abs() < 1e-13);
    }
}
