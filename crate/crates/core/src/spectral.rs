//! Eigenvalues of symmetric pencils and the calculus of λ_q and σ_p∘λ.
//!
//! For a pencil (A, B) with A positive definite, λ(A, B) is the sorted spectrum of
//! A·B. Derivatives are taken with respect to the independent entries b_jk of B,
//! with λ applied to the symmetric part of B.

use serde::{Deserialize, Serialize};

use crate::cone::{in_closure, in_cone, sigma_root, ConeSpec};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, jacobi_eigen, transpose, SymMatrix};
use crate::symfun::{esym, esym_minors, esym_trunc};

/// Default minimal gap for the second derivatives of λ_q.
pub const DEFAULT_GAP: f64 = 1e-6;

/// A pair (A, B) of symmetric matrices with A positive definite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pencil {
    pub a: SymMatrix,
    pub b: SymMatrix,
}

impl Pencil {
    pub fn new(a: SymMatrix, b: SymMatrix) -> Result<Self> {
        if a.n() != b.n() {
            return Err(Error::InvalidInput("pencil matrices differ in size".into()));
        }
        cholesky(&a)?;
        Ok(Pencil { a, b })
    }

    /// λ(A, B) in non-decreasing order.
    pub fn eigs(&self) -> Result<Vec<f64>> {
        eigs(&self.a, &self.b)
    }
}

/// Reduces (A, B) to the symmetric matrix Lᵀ·B·L where A = L·Lᵀ.
/// Returns the reduced matrix and L (None when A = I).
fn reduce(a: &SymMatrix, b: &SymMatrix) -> Result<(SymMatrix, Option<Vec<f64>>)> {
    if a.n() != b.n() {
        return Err(Error::InvalidInput("pencil matrices differ in size".into()));
    }
    if a.is_identity() {
        return Ok((b.clone(), None));
    }
    let l = cholesky(a)?;
    Ok((b.congruence(&l), Some(l)))
}

/// λ(A, B): eigenvalues of A·B, sorted.
pub fn eigs(a: &SymMatrix, b: &SymMatrix) -> Result<Vec<f64>> {
    let (c, _) = reduce(a, b)?;
    Ok(jacobi_eigen(&c).0)
}

/// Lower and upper Weyl slacks for λ_q (1-based q):
/// λ_q(B+C) − λ_q(B) − λ_1(C) and λ_q(B) + λ_n(C) − λ_q(B+C).
pub fn weyl_check(a: &SymMatrix, b: &SymMatrix, c: &SymMatrix, q: usize) -> Result<(f64, f64)> {
    let n = a.n();
    if q < 1 || q > n {
        return Err(Error::InvalidInput(format!("q must lie in 1..={n}")));
    }
    let lb = eigs(a, b)?;
    let lc = eigs(a, c)?;
    let lbc = eigs(a, &b.add(c))?;
    let q = q - 1;
    Ok((lbc[q] - lb[q] - lc[0], lb[q] + lc[n - 1] - lbc[q]))
}

/// Dense four-index array T[j][k][l][m] = ∂²/∂b_lm ∂b_jk, 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor4 {
    pub n: usize,
    pub data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(n: usize) -> Self {
        Tensor4 { n, data: vec![0.0; n * n * n * n] }
    }

    fn idx(&self, j: usize, k: usize, l: usize, m: usize) -> usize {
        ((j * self.n + k) * self.n + l) * self.n + m
    }

    pub fn at(&self, j: usize, k: usize, l: usize, m: usize) -> f64 {
        self.data[self.idx(j, k, l, m)]
    }

    pub fn set(&mut self, j: usize, k: usize, l: usize, m: usize, v: f64) {
        let i = self.idx(j, k, l, m);
        self.data[i] = v;
    }
}

/// Closed-form first and second derivatives at a diagonal point D = diag(μ).
/// Square arrays are row-major n×n; index q of the per-eigenvalue arrays is 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDerivs {
    pub p: usize,
    pub mu: Vec<f64>,
    /// ∂λ_q/∂b_jk.
    pub grad_lambda: Vec<Vec<f64>>,
    /// ∂λ_q/∂a_jk at A = I.
    pub grad_lambda_a: Vec<Vec<f64>>,
    /// ∂²λ_q/∂b_lm∂b_jk, absent when λ_q is not separated by the requested gap.
    pub hess_lambda: Vec<Option<Tensor4>>,
    /// ∂(σ_p∘λ)/∂b_jk.
    pub grad_sigma: Vec<f64>,
    /// ∂²(σ_p∘λ)/∂b_lm∂b_jk.
    pub hess_sigma: Tensor4,
    /// ∂(σ_p∘λ)/∂a_jk at A = I.
    pub grad_sigma_a: Vec<f64>,
    gap: f64,
}

impl SpectralDerivs {
    /// Hessian of λ_q (1-based), or the degenerate-spectrum error naming the
    /// closest colliding eigenvalue.
    pub fn hess_lambda(&self, q: usize) -> Result<&Tensor4> {
        let n = self.mu.len();
        if q < 1 || q > n {
            return Err(Error::InvalidInput(format!("q must lie in 1..={n}")));
        }
        match &self.hess_lambda[q - 1] {
            Some(t) => Ok(t),
            None => {
                let k = (0..n)
                    .filter(|&k| k != q - 1)
                    .min_by(|&a, &b| {
                        let da = (self.mu[a] - self.mu[q - 1]).abs();
                        let db = (self.mu[b] - self.mu[q - 1]).abs();
                        da.total_cmp(&db)
                    })
                    .unwrap();
                Err(Error::DegenerateSpectrum { q, k: k + 1, gap: self.gap })
            }
        }
    }
}

/// Derivatives of λ_q and σ_p∘λ at diag(μ) with μ sorted ascending.
pub fn spectral_derivs(p: usize, mu: &[f64]) -> Result<SpectralDerivs> {
    spectral_derivs_with_gap(p, mu, DEFAULT_GAP)
}

pub fn spectral_derivs_with_gap(p: usize, mu: &[f64], gap: f64) -> Result<SpectralDerivs> {
    crate::symfun::check_vec(mu)?;
    if mu.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidInput("diagonal must be sorted ascending".into()));
    }
    let n = mu.len();
    let pi = p as i64;
    let mut grad_lambda = Vec::with_capacity(n);
    let mut grad_lambda_a = Vec::with_capacity(n);
    let mut hess_lambda = Vec::with_capacity(n);
    for q in 0..n {
        let mut g = vec![0.0; n * n];
        g[q * n + q] = 1.0;
        grad_lambda.push(g);
        let mut ga = vec![0.0; n * n];
        ga[q * n + q] = mu[q];
        grad_lambda_a.push(ga);
        let separated = (0..n).all(|k| k == q || (mu[q] - mu[k]).abs() >= gap);
        hess_lambda.push(separated.then(|| lambda_hessian(q, mu)));
    }

    let minors = esym_minors(pi - 1, mu);
    let mut grad_sigma = vec![0.0; n * n];
    let mut grad_sigma_a = vec![0.0; n * n];
    for j in 0..n {
        grad_sigma[j * n + j] = minors[j];
        grad_sigma_a[j * n + j] = mu[j] * minors[j];
    }

    let mut hess_sigma = Tensor4::zeros(n);
    for j in 0..n {
        for l in 0..n {
            if l != j {
                let s = esym_trunc(pi - 2, mu, &[j, l]);
                hess_sigma.set(j, j, l, l, s);
                hess_sigma.set(j, l, j, l, -0.5 * s);
                hess_sigma.set(j, l, l, j, -0.5 * s);
            }
        }
    }
    Ok(SpectralDerivs {
        p,
        mu: mu.to_vec(),
        grad_lambda,
        grad_lambda_a,
        hess_lambda,
        grad_sigma,
        hess_sigma,
        grad_sigma_a,
        gap,
    })
}

fn lambda_hessian(q: usize, mu: &[f64]) -> Tensor4 {
    let n = mu.len();
    let mut t = Tensor4::zeros(n);
    for k in 0..n {
        if k == q {
            continue;
        }
        let v = 0.5 / (mu[q] - mu[k]);
        // (j, k, l, m) = (q, k, q, k), (q, k, k, q), (k, q, k, q), (k, q, q, k).
        t.set(q, k, q, k, v);
        t.set(q, k, k, q, v);
        t.set(k, q, k, q, v);
        t.set(k, q, q, k, v);
    }
    t
}

/// F^{jk} = ∂σ_p^{1/p}(λ(g⁻¹, ·))/∂b_jk at B, with 𝔉 = F^{jk}g_jk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearizationField {
    pub f: SymMatrix,
    pub trace_f: f64,
    /// λ(g⁻¹, B).
    pub lambda: Vec<f64>,
    /// Smallest eigenvalue of F.
    pub min_eig: f64,
}

/// Linearization of σ_p^{1/p}∘λ at (g⁻¹, B) by reduction to a diagonal frame.
pub fn linearization(p: usize, g_inv: &SymMatrix, b: &SymMatrix) -> Result<LinearizationField> {
    ConeSpec::new(b.n(), p)?;
    let (c, l) = reduce(g_inv, b)?;
    let (mu, q) = jacobi_eigen(&c);
    if !in_cone(&mu, p) {
        return Err(Error::Precondition(format!("lambda = {mu:?} is not in Gamma_{p}")));
    }
    let weights = diagonal_weights(p, &mu);
    let n = b.n();
    let g = SymMatrix::diag(&weights).congruence(&transpose(n, &q));
    let f = match l {
        Some(l) => g.congruence(&transpose(n, &l)),
        None => g,
    };
    let min_eig = jacobi_eigen(&f).0[0];
    if min_eig <= 0.0 {
        return Err(Error::Precondition(format!("linearization not positive definite: {min_eig:e}")));
    }
    Ok(LinearizationField { f, trace_f: weights.iter().sum(), lambda: mu, min_eig })
}

/// (1/p)σ_p^{1/p−1}(μ)σ_{p−1}(μ|j) for each j.
pub(crate) fn diagonal_weights(p: usize, mu: &[f64]) -> Vec<f64> {
    let pf = p as f64;
    let scale = esym(p as i64, mu).powf(1.0 / pf - 1.0) / pf;
    esym_minors(p as i64 - 1, mu).iter().map(|m| scale * m).collect()
}

/// Checks that the diagonal of B lies in Γ̄_p and returns σ_p(diag B) − σ_p(λ(B)).
pub fn schur_horn_check(b: &SymMatrix, p: usize) -> Result<(bool, f64)> {
    ConeSpec::new(b.n(), p)?;
    let lam = jacobi_eigen(b).0;
    if !in_closure(&lam, p) {
        return Err(Error::Precondition(format!("lambda = {lam:?} is not in the closed cone")));
    }
    let d = b.diagonal();
    Ok((in_closure(&d, p), esym(p as i64, &d) - esym(p as i64, &lam)))
}

/// f((1−t)B1 + tB2) − (1−t)f(B1) − t f(B2) for f = σ_p^{1/p}∘λ(A, ·).
pub fn midpoint_concavity_check(
    a: &SymMatrix,
    b1: &SymMatrix,
    b2: &SymMatrix,
    p: usize,
    t: f64,
) -> Result<f64> {
    ConeSpec::new(a.n(), p)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidInput("t must lie in [0, 1]".into()));
    }
    let l1 = eigs(a, b1)?;
    let l2 = eigs(a, b2)?;
    if !in_closure(&l1, p) || !in_closure(&l2, p) {
        return Err(Error::Precondition("endpoints must lie in the closed cone".into()));
    }
    let lm = eigs(a, &b1.lincomb(1.0 - t, b2, t))?;
    if !in_closure(&lm, p) {
        return Err(Error::Precondition(format!("combination left the closed cone: {lm:?}")));
    }
    Ok(sigma_root(&lm, p) - (1.0 - t) * sigma_root(&l1, p) - t * sigma_root(&l2, p))
}

/// Orthogonal matrix from a square array by Gram–Schmidt on its columns.
pub fn orthonormalize(n: usize, m: &[f64]) -> Vec<f64> {
    let mut q = m.to_vec();
    for c in 0..n {
        for prev in 0..c {
            let dot: f64 = (0..n).map(|r| q[r * n + c] * q[r * n + prev]).sum();
            for r in 0..n {
                q[r * n + c] -= dot * q[r * n + prev];
            }
        }
        let norm = (0..n).map(|r| q[r * n + c].powi(2)).sum::<f64>().sqrt();
        for r in 0..n {
            q[r * n + c] /= norm;
        }
    }
    q
}

/// Q·diag(μ)·Qᵀ.
pub fn conjugate_diag(mu: &[f64], q: &[f64]) -> SymMatrix {
    SymMatrix::diag(mu).congruence(&transpose(mu.len(), q))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: Vec<Vec<f64>>) -> SymMatrix {
        SymMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn eigs_examples() {
        let i3 = SymMatrix::identity(3);
        assert_eq!(eigs(&i3, &SymMatrix::diag(&[3.0, 1.0, 2.0])).unwrap(), vec![1.0, 2.0, 3.0]);
        let l = eigs(&SymMatrix::identity(2).scale(2.0), &SymMatrix::diag(&[1.0, 2.0])).unwrap();
        assert!((l[0] - 2.0).abs() < 1e-14 && (l[1] - 4.0).abs() < 1e-14);
        let l = eigs(&SymMatrix::identity(2), &m(vec![vec![2.0, 1.0], vec![1.0, 2.0]])).unwrap();
        assert!((l[0] - 1.0).abs() < 1e-14 && (l[1] - 3.0).abs() < 1e-14);
        assert!(eigs(&SymMatrix::diag(&[1.0, 0.0]), &SymMatrix::identity(2)).is_err());
        assert!(Pencil::new(SymMatrix::diag(&[-1.0, 1.0]), SymMatrix::identity(2)).is_err());
    }

    #[test]
    fn weyl_examples() {
        let i = SymMatrix::identity(2);
        let (lo, hi) =
            weyl_check(&i, &SymMatrix::diag(&[1.0, 2.0]), &SymMatrix::diag(&[0.0, 1.0]), 2).unwrap();
        assert_eq!((lo, hi), (1.0, 0.0));
        let b = m(vec![vec![1.0, 0.3], vec![0.3, -2.0]]);
        assert_eq!(weyl_check(&i, &b, &SymMatrix::zeros(2), 1).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn derivative_examples() {
        let d = spectral_derivs(2, &[1.0, 2.0, 4.0]).unwrap();
        let g = &d.grad_lambda[2];
        assert_eq!(g.iter().filter(|&&x| x != 0.0).count(), 1);
        assert_eq!(g[2 * 3 + 2], 1.0);
        let h = d.hess_lambda(3).unwrap();
        assert!((h.at(0, 2, 2, 0) - 1.0 / 6.0).abs() < 1e-15);

        let d = spectral_derivs(2, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(d.hess_sigma.at(0, 0, 1, 1), 1.0);
        assert_eq!(d.hess_sigma.at(0, 1, 0, 1), -0.5);
    }

    #[test]
    fn degenerate_spectrum_reported() {
        let d = spectral_derivs(2, &[1.0, 1.0, 3.0]).unwrap();
        assert_eq!(
            d.hess_lambda(1).unwrap_err(),
            Error::DegenerateSpectrum { q: 1, k: 2, gap: DEFAULT_GAP }
        );
        assert!(d.hess_lambda(3).is_ok());
        assert!(spectral_derivs(2, &[3.0, 1.0]).is_err());
    }

    #[test]
    fn linearization_examples() {
        let lin = linearization(2, &SymMatrix::identity(3), &SymMatrix::diag(&[1.0, 2.0, 3.0])).unwrap();
        let c = 1.0 / (2.0 * 11f64.sqrt());
        for (j, w) in [5.0, 4.0, 3.0].iter().enumerate() {
            assert!((lin.f.get(j, j) - c * w).abs() < 1e-15);
        }
        assert_eq!(lin.f.get(0, 1), 0.0);
        for n in 1..5 {
            let lin = linearization(n, &SymMatrix::identity(n), &SymMatrix::identity(n)).unwrap();
            for j in 0..n {
                assert!((lin.f.get(j, j) - 1.0 / n as f64).abs() < 1e-15);
            }
        }
        let bad = linearization(2, &SymMatrix::identity(2), &SymMatrix::diag(&[-1.0, -1.0]));
        assert!(bad.is_err());
    }

    #[test]
    fn schur_horn_examples() {
        let (ok, gap) = schur_horn_check(&m(vec![vec![2.0, 1.0], vec![1.0, 2.0]]), 2).unwrap();
        assert!(ok);
        assert!((gap - 1.0).abs() < 1e-14);
        assert_eq!(schur_horn_check(&SymMatrix::diag(&[1.0, 2.0, 3.0]), 2).unwrap(), (true, 0.0));
    }

    #[test]
    fn midpoint_examples() {
        let i = SymMatrix::identity(2);
        let b1 = SymMatrix::diag(&[1.0, 3.0]);
        let b2 = SymMatrix::diag(&[3.0, 1.0]);
        let s = midpoint_concavity_check(&i, &b1, &b2, 2, 0.5).unwrap();
        assert!((s - (2.0 - 3f64.sqrt())).abs() < 1e-15);
        assert!(midpoint_concavity_check(&i, &b1, &b1, 2, 0.3).unwrap().abs() < 1e-15);
    }
}
