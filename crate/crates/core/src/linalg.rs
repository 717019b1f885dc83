//! Small dense symmetric matrices: Cholesky factorization and a cyclic Jacobi
//! eigensolver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense symmetric n×n matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Builds from rows; rejects non-square, non-finite or asymmetric input.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput("matrix must be square and non-empty".into()));
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        Self::from_row_major(n, data)
    }

    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n || n == 0 {
            return Err(Error::InvalidInput("matrix data has wrong length".into()));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        let norm = data.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let tol = 1e-13 * norm.max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (data[i * n + j] - data[j * n + i]).abs() > tol {
                    return Err(Error::InvalidInput(format!(
                        "matrix is not symmetric at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(SymMatrix { n, data })
    }

    /// Symmetric part (M + Mᵀ)/2 of an arbitrary square row-major array.
    pub fn symmetrize(n: usize, data: &[f64]) -> Self {
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = 0.5 * (data[i * n + j] + data[j * n + i]);
            }
        }
        SymMatrix { n, data: out }
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![1.0; n])
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix { n, data: vec![0.0; n * n] }
    }

    pub fn diag(d: &[f64]) -> Self {
        let n = d.len();
        let mut data = vec![0.0; n * n];
        for (i, &x) in d.iter().enumerate() {
            data[i * n + i] = x;
        }
        SymMatrix { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Entry (i, j), 0-based.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets (i, j) and (j, i), 0-based.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_identity(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| self.get(i, j) == if i == j { 1.0 } else { 0.0 }))
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        self.lincomb(1.0, other, 1.0)
    }

    /// a·self + b·other.
    pub fn lincomb(&self, a: f64, other: &SymMatrix, b: f64) -> SymMatrix {
        assert_eq!(self.n, other.n, "dimension mismatch");
        let data = self.data.iter().zip(&other.data).map(|(x, y)| a * x + b * y).collect();
        SymMatrix { n: self.n, data }
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        SymMatrix { n: self.n, data: self.data.iter().map(|x| s * x).collect() }
    }

    /// Mᵀ·self·M for a general row-major n×n matrix M, symmetrized.
    pub fn congruence(&self, m: &[f64]) -> SymMatrix {
        let n = self.n;
        let t = matmul(n, &self.data, m);
        let mt = transpose(n, m);
        SymMatrix::symmetrize(n, &matmul(n, &mt, &t))
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        SymMatrix::from_rows(rows)
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(m: SymMatrix) -> Self {
        m.data.chunks(m.n).map(|r| r.to_vec()).collect()
    }
}

pub(crate) fn matmul(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

pub(crate) fn transpose(n: usize, a: &[f64]) -> Vec<f64> {
    let mut t = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            t[j * n + i] = a[i * n + j];
        }
    }
    t
}

/// Lower-triangular L with A = L·Lᵀ, row-major.
pub fn cholesky(a: &SymMatrix) -> Result<Vec<f64>> {
    let n = a.n;
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::Precondition("matrix is not positive definite".into()));
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    Ok(l)
}

/// Maximum number of cyclic sweeps.
pub const JACOBI_MAX_SWEEPS: usize = 50;
/// Stop once the off-diagonal Frobenius norm is below this fraction of the full norm.
pub const JACOBI_TOL: f64 = 1e-13;

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in non-decreasing order and the row-major matrix Q whose
/// columns are the matching orthonormal eigenvectors, so that M = Q·diag(λ)·Qᵀ.
pub fn jacobi_eigen(m: &SymMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = m.n;
    let mut a = m.data.clone();
    let mut v = SymMatrix::identity(n).data;
    let total = m.frobenius();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= JACOBI_TOL * total {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, &mut v, n, p, q, c, s, t);
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let vals = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vecs = vec![0.0; n * n];
    for (col, &i) in order.iter().enumerate() {
        for r in 0..n {
            vecs[r * n + col] = v[r * n + i];
        }
    }
    (vals, vecs)
}

#[allow(clippy::too_many_arguments)]
fn rotate(a: &mut [f64], v: &mut [f64], n: usize, p: usize, q: usize, c: f64, s: f64, t: f64) {
    let apq = a[p * n + q];
    a[p * n + p] -= t * apq;
    a[q * n + q] += t * apq;
    a[p * n + q] = 0.0;
    a[q * n + p] = 0.0;
    for r in 0..n {
        if r == p || r == q {
            continue;
        }
        let arp = a[r * n + p];
        let arq = a[r * n + q];
        let np = c * arp - s * arq;
        let nq = s * arp + c * arq;
        a[r * n + p] = np;
        a[p * n + r] = np;
        a[r * n + q] = nq;
        a[q * n + r] = nq;
    }
    for r in 0..n {
        let vrp = v[r * n + p];
        let vrq = v[r * n + q];
        v[r * n + p] = c * vrp - s * vrq;
        v[r * n + q] = s * vrp + c * vrq;
    }
}

/// Eigenvalues only, sorted.
pub fn sym_eigenvalues(m: &SymMatrix) -> Vec<f64> {
    jacobi_eigen(m).0
}
