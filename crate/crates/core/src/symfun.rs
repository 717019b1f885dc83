//! Elementary symmetric polynomials, their truncated minors and the identity family
//! relating them.
//!
//! Indices in public signatures are 1-based, matching the usual σ_p(μ|j) notation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A real vector of candidate eigenvalues. Non-empty with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SymVec(Vec<f64>);

impl SymVec {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_vec(&values)?;
        Ok(SymVec(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Deref for SymVec {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for SymVec {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        SymVec::new(v)
    }
}

impl From<SymVec> for Vec<f64> {
    fn from(v: SymVec) -> Vec<f64> {
        v.0
    }
}

pub(crate) fn check_vec(mu: &[f64]) -> Result<()> {
    if mu.is_empty() {
        return Err(Error::InvalidInput("empty vector".into()));
    }
    if let Some(i) = mu.iter().position(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!("entry {} is not finite", i + 1)));
    }
    Ok(())
}

/// σ_p(μ). Returns 1 for p = 0 and 0 for p < 0 or p > n.
pub fn sigma(p: i64, mu: &[f64]) -> Result<f64> {
    check_vec(mu)?;
    Ok(esym(p, mu))
}

/// σ_p(μ|J): σ_p with the entries indexed by `j` (1-based) set to zero.
/// A repeated index gives 0.
pub fn sigma_trunc(p: i64, mu: &[f64], j: &[usize]) -> Result<f64> {
    check_vec(mu)?;
    let n = mu.len();
    if let Some(&bad) = j.iter().find(|&&k| k == 0 || k > n) {
        return Err(Error::InvalidInput(format!("index {bad} outside 1..={n}")));
    }
    Ok(esym_trunc(p, mu, &zero_based(j)))
}

fn zero_based(j: &[usize]) -> Vec<usize> {
    j.iter().map(|&k| k - 1).collect()
}

/// Unchecked σ_p by the prefix recurrence e_q ← e_q + x·e_{q−1}.
pub(crate) fn esym(p: i64, mu: &[f64]) -> f64 {
    let n = mu.len() as i64;
    if p < 0 || p > n {
        return 0.0;
    }
    if p == 0 {
        return 1.0;
    }
    esym_all(mu, p as usize)[p as usize]
}

/// σ_0..σ_pmax of `mu` in one pass.
pub(crate) fn esym_all(mu: &[f64], pmax: usize) -> Vec<f64> {
    let mut e = vec![0.0; pmax + 1];
    e[0] = 1.0;
    for (i, &x) in mu.iter().enumerate() {
        for q in (1..=pmax.min(i + 1)).rev() {
            e[q] += x * e[q - 1];
        }
    }
    e
}

/// Unchecked σ_p(μ|J) with 0-based indices.
pub(crate) fn esym_trunc(p: i64, mu: &[f64], j: &[usize]) -> f64 {
    for (a, &ja) in j.iter().enumerate() {
        if j[a + 1..].contains(&ja) {
            return 0.0;
        }
    }
    if p < 0 || p > mu.len() as i64 {
        return 0.0;
    }
    if p == 0 {
        return 1.0;
    }
    let rest: Vec<f64> = mu
        .iter()
        .enumerate()
        .filter(|(i, _)| !j.contains(i))
        .map(|(_, &x)| x)
        .collect();
    esym(p, &rest)
}

/// σ_p(μ|j) for every j (0-based), each computed on the complement vector.
pub(crate) fn esym_minors(p: i64, mu: &[f64]) -> Vec<f64> {
    (0..mu.len()).map(|j| esym_trunc(p, mu, &[j])).collect()
}

/// Binomial coefficient C(n, k) as a float; 0 outside 0 ≤ k ≤ n.
pub fn binomial(n: usize, k: i64) -> f64 {
    if k < 0 || k as usize > n {
        return 0.0;
    }
    let k = (k as usize).min(n - k as usize);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c.round()
}

/// |lhs − rhs|, divided by the larger magnitude when either side exceeds 1.
pub fn residual(lhs: f64, rhs: f64) -> f64 {
    let d = (lhs - rhs).abs();
    let m = lhs.abs().max(rhs.abs());
    if m <= 1.0 {
        d
    } else {
        d / m
    }
}

/// Residuals of the σ-identity family at (p, μ), keyed by identity name.
///
/// The expansion identity uses the index list (1, …, n); see
/// [`identity_residuals_with`] to supply another.
pub fn identity_residuals(p: i64, mu: &[f64]) -> Result<BTreeMap<String, f64>> {
    let all: Vec<usize> = (1..=mu.len()).collect();
    identity_residuals_with(p, mu, &all)
}

/// As [`identity_residuals`] with an explicit distinct index list for the expansion
/// identity (at least two indices; otherwise that entry is omitted).
pub fn identity_residuals_with(
    p: i64,
    mu: &[f64],
    expansion: &[usize],
) -> Result<BTreeMap<String, f64>> {
    check_vec(mu)?;
    let n = mu.len();
    if let Some(&bad) = expansion.iter().find(|&&k| k == 0 || k > n) {
        return Err(Error::InvalidInput(format!("index {bad} outside 1..={n}")));
    }
    let js = zero_based(expansion);
    if js.iter().enumerate().any(|(a, x)| js[a + 1..].contains(x)) {
        return Err(Error::InvalidInput("expansion indices must be distinct".into()));
    }

    let s = |q: i64| esym(q, mu);
    let st = |q: i64, j: &[usize]| esym_trunc(q, mu, j);
    let sp = s(p);
    let minors_p = esym_minors(p, mu);
    let mut out = BTreeMap::new();

    for j in 0..n {
        let rhs = mu[j] * st(p - 1, &[j]) + minors_p[j];
        out.insert(format!("a[{}]", j + 1), residual(sp, rhs));
    }

    let b: f64 = minors_p.iter().sum();
    out.insert("b".into(), residual(b, (n as f64 - p as f64) * sp));

    let c: f64 = mu.iter().zip(&minors_p).map(|(x, m)| x * m).sum();
    out.insert("c".into(), residual(c, (p + 1) as f64 * s(p + 1)));

    let d: f64 = mu.iter().zip(&minors_p).map(|(x, m)| x * x * m).sum();
    let d_rhs = s(1) * s(p + 1) - (p + 2) as f64 * s(p + 2);
    out.insert("d".into(), residual(d, d_rhs));

    if js.len() >= 2 {
        let m = js.len();
        let prod = |q: usize| js[..q].iter().map(|&i| mu[i]).product::<f64>();
        let mut rhs = prod(m) * st(p - m as i64, &js) + st(p, &js[..1]);
        for q in 1..m {
            rhs += prod(q) * st(p - q as i64, &js[..q + 1]);
        }
        out.insert("e".into(), residual(sp, rhs));
    }

    for j1 in 0..n {
        for j2 in (j1 + 1)..n {
            let lhs = st(p - 1, &[j1]) - st(p - 1, &[j2]);
            let rhs = (mu[j2] - mu[j1]) * st(p - 2, &[j1, j2]);
            out.insert(format!("f[{},{}]", j1 + 1, j2 + 1), residual(lhs, rhs));
        }
    }
    Ok(out)
}
