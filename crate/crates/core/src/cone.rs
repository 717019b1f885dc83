//! Gårding cones Γ_p: membership, distance along 1_n, and the inequality families
//! that hold on them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symfun::{binomial, check_vec, esym, esym_all, esym_minors};

/// Default relative width of the zero band used to detect ∂Γ_p.
pub const ZERO_BAND: f64 = 1e-12;

/// The cone Γ_p ⊂ ℝⁿ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub n: usize,
    pub p: usize,
}

impl ConeSpec {
    pub fn new(n: usize, p: usize) -> Result<Self> {
        if p < 1 || p > n {
            return Err(Error::InvalidInput(format!("need 1 <= p <= n, got n={n}, p={p}")));
        }
        Ok(ConeSpec { n, p })
    }

    fn check(&self, mu: &[f64]) -> Result<()> {
        ConeSpec::new(self.n, self.p)?;
        check_vec(mu)?;
        if mu.len() != self.n {
            return Err(Error::InvalidInput(format!(
                "vector has length {}, cone dimension is {}",
                mu.len(),
                self.n
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Interior,
    Boundary,
    Outside,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeVerdict {
    pub region: Region,
    /// σ_1(μ), …, σ_p(μ).
    pub sigma_values: Vec<f64>,
}

/// Classifies μ against Γ_p with the default zero band.
pub fn classify(mu: &[f64], spec: ConeSpec) -> Result<ConeVerdict> {
    classify_with_band(mu, spec, ZERO_BAND)
}

/// Classifies μ; σ_q within `band·max(1, ‖μ‖∞^q)` of zero counts as zero.
pub fn classify_with_band(mu: &[f64], spec: ConeSpec, band: f64) -> Result<ConeVerdict> {
    spec.check(mu)?;
    let e = esym_all(mu, spec.p);
    let region = region_of(&e[1..], norm_inf(mu), band);
    Ok(ConeVerdict { region, sigma_values: e[1..].to_vec() })
}

fn region_of(s: &[f64], norm: f64, band: f64) -> Region {
    let tau = |q: usize| band * norm.powi(q as i32 + 1).max(1.0);
    if s.iter().enumerate().any(|(i, &v)| v < -tau(i)) {
        return Region::Outside;
    }
    let last = s.len() - 1;
    if s[last] > tau(last) && s.iter().all(|&v| v > 0.0) {
        Region::Interior
    } else {
        Region::Boundary
    }
}

pub(crate) fn norm_inf(mu: &[f64]) -> f64 {
    mu.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// μ ∈ Γ_p (interior, with the default band). Unchecked fast path.
pub(crate) fn in_cone(mu: &[f64], p: usize) -> bool {
    let e = esym_all(mu, p);
    region_of(&e[1..], norm_inf(mu), ZERO_BAND) == Region::Interior
}

/// Strict sign test: every σ_q(μ) > 0 for q ≤ p. Suited to badly scaled vectors
/// where the homogeneous zero band is too coarse.
pub(crate) fn in_cone_strict(mu: &[f64], p: usize) -> bool {
    esym_all(mu, p)[1..].iter().all(|&s| s > 0.0)
}

/// μ ∈ Γ̄_p (with the default band). Unchecked fast path.
pub(crate) fn in_closure(mu: &[f64], p: usize) -> bool {
    let e = esym_all(mu, p);
    region_of(&e[1..], norm_inf(mu), ZERO_BAND) != Region::Outside
}

/// σ_p^{1/p}, clamped to 0 outside the cone.
pub(crate) fn sigma_root(mu: &[f64], p: usize) -> f64 {
    esym(p as i64, mu).max(0.0).powf(1.0 / p as f64)
}

/// Smallest t ≥ 0 with μ + s·1_n ∈ Γ_p for every s > t.
pub fn cone_distance(mu: &[f64], spec: ConeSpec) -> Result<f64> {
    spec.check(mu)?;
    if in_closure(mu, spec.p) {
        return Ok(0.0);
    }
    let shifted = |t: f64| mu.iter().map(|x| x + t).collect::<Vec<_>>();
    let (mut lo, mut hi) = (0.0, spec.n as f64 * norm_inf(mu) + 1.0);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if in_cone(&shifted(mid), spec.p) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Largest t ≥ 0 with μ − s·1_n ∈ Γ_p for every s < t; 0 outside Γ_p.
pub fn cone_depth(mu: &[f64], spec: ConeSpec) -> Result<f64> {
    spec.check(mu)?;
    Ok(depth(mu, spec.p))
}

pub(crate) fn depth(mu: &[f64], p: usize) -> f64 {
    if !in_cone(mu, p) {
        return 0.0;
    }
    let shifted = |t: f64| mu.iter().map(|x| x - t).collect::<Vec<_>>();
    // μ − max(μ)·1 has no positive entry, so it is outside Γ_p.
    let (mut lo, mut hi) = (0.0, mu.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x)));
    while hi - lo > 1e-12 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if in_cone(&shifted(mid), p) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// σ_p^{1/p}(μ+ν) − σ_p^{1/p}(μ) − σ_p^{1/p}(ν) for μ, ν ∈ Γ̄_p.
pub fn superadditivity_slack(mu: &[f64], nu: &[f64], spec: ConeSpec) -> Result<f64> {
    spec.check(mu)?;
    spec.check(nu)?;
    if !in_closure(mu, spec.p) || !in_closure(nu, spec.p) {
        return Err(Error::Precondition("arguments must lie in the closed cone".into()));
    }
    let sum: Vec<f64> = mu.iter().zip(nu).map(|(a, b)| a + b).collect();
    Ok(sigma_root(&sum, spec.p) - sigma_root(mu, spec.p) - sigma_root(nu, spec.p))
}

/// One Newton–Maclaurin instance: (σ_j/C_j)/(σ_k/C_k) ≤ ((σ_l/C_l)/(σ_m/C_m))^{(j−k)/(l−m)}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonMaclaurin {
    pub j: usize,
    pub k: usize,
    pub l: usize,
    pub m: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

/// Every Newton–Maclaurin instance admitted at order p, in lexicographic (j,k,l,m) order.
/// The Maclaurin inequalities are the instances with k = m = 0.
pub fn maclaurin_report(mu: &[f64], spec: ConeSpec) -> Result<Vec<NewtonMaclaurin>> {
    spec.check(mu)?;
    if !in_cone(mu, spec.p) {
        return Err(Error::Precondition(format!("vector not in Gamma_{}", spec.p)));
    }
    let n = spec.n;
    let e = esym_all(mu, (spec.p + 1).min(n));
    let q = |i: usize| if i > n { 0.0 } else { e[i] / binomial(n, i as i64) };
    let mut out = Vec::new();
    for j in 1..=spec.p + 1 {
        for k in 0..j {
            for l in 1..=spec.p.min(j) {
                for m in 0..l.min(k + 1) {
                    let lhs = q(j) / q(k);
                    let rhs = (q(l) / q(m)).powf((j - k) as f64 / (l - m) as f64);
                    out.push(NewtonMaclaurin { j, k, l, m, lhs, rhs, slack: rhs - lhs });
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TechKind {
    /// Holds with slack > 0.
    Strict,
    /// Holds with slack ≥ 0.
    NonStrict,
    /// A realized constant; the inequality holds for some finite bound on it.
    Ratio,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TechEntry {
    pub value: f64,
    pub kind: TechKind,
}

/// Slacks of the technical inequalities for sorted μ ∈ Γ_p, p ≥ 2, plus the realized
/// constants of the two bounds whose constants are only known to exist.
pub fn tech_ineq_report(mu: &[f64], spec: ConeSpec) -> Result<BTreeMap<String, TechEntry>> {
    spec.check(mu)?;
    let (n, p) = (spec.n, spec.p);
    if p < 2 {
        return Err(Error::Precondition("technical inequalities need p >= 2".into()));
    }
    if mu.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Precondition("entries must be sorted ascending".into()));
    }
    if !in_cone(mu, p) {
        return Err(Error::Precondition(format!("vector not in Gamma_{p}")));
    }
    let pi = p as i64;
    let nf = n as f64;
    let pf = p as f64;
    let sp = esym(pi, mu);
    let sp1 = esym(pi - 1, mu);
    let minors = esym_minors(pi - 1, mu);
    let mut out = BTreeMap::new();
    let mut put = |name: &str, value: f64, kind: TechKind| {
        out.insert(name.to_string(), TechEntry { value, kind });
    };

    put("i_head_sum", mu[..n - p + 1].iter().sum(), TechKind::Strict);
    put("i_pair", (nf - pf) * mu[n - p] + mu[0], TechKind::Strict);

    let tail: f64 = mu[1..].iter().sum();
    let c2 = (nf - pf) / (pf * (nf - 1.0));
    put("ii_mu1", mu[0] + c2 * tail, TechKind::Strict);
    put("ii_chain", (nf - pf) / pf * mu[n - 1] - c2 * tail, TechKind::NonStrict);

    let top: f64 = mu[n - p + 1..].iter().product();
    put("iii", sp1 - top, TechKind::Strict);

    for j in 0..n - 1 {
        put(&format!("iv[{}]", j + 1), minors[j] - minors[j + 1], TechKind::NonStrict);
    }
    put("iv_last", minors[n - 1], TechKind::Strict);

    put("v", mu[n - 1] * minors[n - 1] - pf / nf * sp, TechKind::NonStrict);

    let scale = sp.powf(1.0 / pf - 1.0);
    let vi = scale * minors[n - 1] * (scale * sp1).powi(p as i32 - 1);
    put("vi_constant", 1.0 / vi, TechKind::Ratio);

    let f: Vec<f64> = minors.iter().map(|m| scale * m / pf).collect();
    let sum: f64 = f.iter().sum();
    let geo = nf * (f.iter().map(|x| x.ln()).sum::<f64>() / nf).exp();
    put("vii_am_gm", sum - geo, TechKind::NonStrict);
    put("vii_lower", geo - binomial(n, pi).powf(1.0 / pf), TechKind::NonStrict);

    let s_next = esym(pi + 1, mu);
    let denom = sp.powf(1.0 / pf).max((-s_next).max(0.0).powf(1.0 / (pf + 1.0)));
    put("viii_constant", (-mu[0]).max(0.0) / denom, TechKind::Ratio);
    Ok(out)
}
