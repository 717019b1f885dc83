//! Closed-form derivatives of λ_q and σ_p∘λ against finite differences.
//!
//! The oracle perturbs single entries b_jk (or a_jk) of non-symmetric arrays,
//! symmetrizes, and takes central differences with one Richardson step, so the
//! truncation error is O(h⁴) and the step can stay large enough to keep
//! round-off small.

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use phess_core::linalg::{sym_eigenvalues, SymMatrix};
use phess_core::spectral::{eigs, spectral_derivs, SpectralDerivs, Tensor4};
use phess_core::symfun::sigma;
use phess_core::{Error, Result};

use super::{par_trials, trial_index, trial_rng, uniform_usize, Extreme, SuiteResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DerivsConfig {
    pub n_min: usize,
    pub n_max: usize,
    pub samples: usize,
    /// Minimal spacing of the sampled diagonal.
    pub gap: f64,
    /// Finite-difference step (halved once for extrapolation).
    pub step: f64,
    pub tol: f64,
    pub seed: u64,
}

impl Default for DerivsConfig {
    fn default() -> Self {
        DerivsConfig { n_min: 2, n_max: 5, samples: 1000, gap: 0.5, step: 4e-3, tol: 1e-6, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivsGroup {
    pub n: usize,
    pub samples: usize,
    pub max_error: f64,
    pub sparsity_mismatches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivsResult {
    pub groups: Vec<DerivsGroup>,
    pub max_error: f64,
    pub worst_index: Option<u64>,
    pub sparsity_mismatches: usize,
    pub violations: usize,
    /// Also reported at the top of the envelope.
    #[serde(skip)]
    pub counterexample: Option<Value>,
}

impl SuiteResult for DerivsResult {
    fn violations(&self) -> usize {
        self.violations
    }
    fn counterexample(&self) -> Option<Value> {
        self.counterexample.clone()
    }
    fn rows(&self) -> Vec<Value> {
        self.groups.iter().map(|g| serde_json::to_value(g).unwrap()).collect()
    }
}

/// Diagonal with spacing in [gap, 3·gap], starting in [−2, 2].
fn draw(cfg: &DerivsConfig, index: u64) -> (usize, Vec<f64>) {
    let mut rng = trial_rng(cfg.seed, index);
    let n = uniform_usize(&mut rng, cfg.n_min, cfg.n_max);
    let p = uniform_usize(&mut rng, 1, n);
    let mut mu = vec![rng.gen_range(-2.0..2.0)];
    for _ in 1..n {
        let last = mu[mu.len() - 1];
        mu.push(last + cfg.gap * rng.gen_range(1.0..3.0));
    }
    (p, mu)
}

/// Eigenvalues and σ_p of λ(sym A, sym B) for row-major A, B.
fn spectrum(p: usize, a: Option<&[f64]>, b: &[f64]) -> Vec<f64> {
    let n = (b.len() as f64).sqrt() as usize;
    let bs = SymMatrix::symmetrize(n, b);
    let mut lam = match a {
        None => sym_eigenvalues(&bs),
        Some(a) => eigs(&SymMatrix::symmetrize(n, a), &bs).expect("perturbed A stays positive definite"),
    };
    let s = sigma(p as i64, &lam).expect("finite spectrum");
    lam.push(s);
    lam
}

/// Extrapolated first differences: one vector (λ_1..λ_n, σ_p) per entry.
fn first(eval: &dyn Fn(usize, f64) -> Vec<f64>, entries: usize, h: f64) -> Vec<Vec<f64>> {
    (0..entries)
        .map(|e| {
            let d = |s: f64| -> Vec<f64> {
                let (fp, fm) = (eval(e, s), eval(e, -s));
                fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * s)).collect()
            };
            let (d1, d2) = (d(h), d(h / 2.0));
            d1.iter().zip(&d2).map(|(a, b)| (4.0 * b - a) / 3.0).collect()
        })
        .collect()
}

/// Largest scaled error and the number of sparsity mismatches of `fd` against `exact`.
fn compare(exact: &[f64], fd: &[f64], errs: &mut f64, mism: &mut usize) {
    let scale = exact.iter().chain(fd).fold(1.0f64, |m, v| m.max(v.abs()));
    let thr = 1e-5 * scale;
    for (x, y) in exact.iter().zip(fd) {
        *errs = errs.max((x - y).abs() / 1f64.max(x.abs()));
        if (x.abs() > thr) != (y.abs() > thr) {
            *mism += 1;
        }
    }
}

/// Max scaled error and sparsity mismatches over every closed-form array.
pub fn check_sample(p: usize, mu: &[f64], cfg: &DerivsConfig) -> Result<(f64, usize)> {
    let n = mu.len();
    let nn = n * n;
    let d: SpectralDerivs = spectral_derivs(p, mu)?;
    let mut base = vec![0.0; nn];
    for j in 0..n {
        base[j * n + j] = mu[j];
    }
    let mut ident = vec![0.0; nn];
    for j in 0..n {
        ident[j * n + j] = 1.0;
    }
    let eval_b = |e: usize, s: f64| {
        let mut b = base.clone();
        b[e] += s;
        spectrum(p, None, &b)
    };
    let eval_a = |e: usize, s: f64| {
        let mut a = ident.clone();
        a[e] += s;
        spectrum(p, Some(&a), &base)
    };
    let h = cfg.step;
    let gb = first(&eval_b, nn, h);
    let ga = first(&eval_a, nn, h);
    let (mut err, mut mism) = (0.0f64, 0usize);
    for q in 0..=n {
        let fd_b: Vec<f64> = gb.iter().map(|v| v[q]).collect();
        let fd_a: Vec<f64> = ga.iter().map(|v| v[q]).collect();
        if q < n {
            compare(&d.grad_lambda[q], &fd_b, &mut err, &mut mism);
            compare(&d.grad_lambda_a[q], &fd_a, &mut err, &mut mism);
        } else {
            compare(&d.grad_sigma, &fd_b, &mut err, &mut mism);
            compare(&d.grad_sigma_a, &fd_a, &mut err, &mut mism);
        }
    }

    // Mixed second differences over unordered entry pairs.
    let mut hess = vec![Tensor4::zeros(n); n + 1];
    for e1 in 0..nn {
        for e2 in e1..nn {
            let eval = |s1: f64, s2: f64| {
                let mut b = base.clone();
                b[e1] += s1;
                b[e2] += s2;
                spectrum(p, None, &b)
            };
            let d2 = |s: f64| -> Vec<f64> {
                let (pp, pm, mp, mm) = (eval(s, s), eval(s, -s), eval(-s, s), eval(-s, -s));
                (0..=n).map(|q| (pp[q] - pm[q] - mp[q] + mm[q]) / (4.0 * s * s)).collect()
            };
            let (r1, r2) = (d2(h), d2(h / 2.0));
            let (j, k, l, m) = (e1 / n, e1 % n, e2 / n, e2 % n);
            for q in 0..=n {
                let v = (4.0 * r2[q] - r1[q]) / 3.0;
                hess[q].set(j, k, l, m, v);
                hess[q].set(l, m, j, k, v);
            }
        }
    }
    for q in 0..n {
        compare(&d.hess_lambda(q + 1)?.data, &hess[q].data, &mut err, &mut mism);
    }
    compare(&d.hess_sigma.data, &hess[n].data, &mut err, &mut mism);
    Ok((err, mism))
}

pub fn run(cfg: &DerivsConfig) -> Result<DerivsResult> {
    if cfg.n_min < 2 || cfg.n_max < cfg.n_min || !(cfg.gap > 0.0) || !(cfg.step > 0.0) || !(cfg.tol >= 0.0) {
        return Err(Error::InvalidInput("need 2 <= n_min <= n_max, gap > 0, step > 0 and tol >= 0".into()));
    }
    let res = par_trials(cfg.samples, |t| {
        let index = trial_index(0, t as usize);
        let (p, mu) = draw(cfg, index);
        check_sample(p, &mu, cfg).map(|(e, m)| (index, mu.len(), e, m))
    });
    let mut groups: Vec<DerivsGroup> = (cfg.n_min..=cfg.n_max)
        .map(|n| DerivsGroup { n, samples: 0, max_error: 0.0, sparsity_mismatches: 0 })
        .collect();
    let mut worst = Extreme::max();
    let (mut violations, mut mism_total) = (0, 0);
    let mut counterexample = None;
    for r in res {
        let (index, n, e, m) = r?;
        let g = &mut groups[n - cfg.n_min];
        g.samples += 1;
        g.max_error = g.max_error.max(e);
        g.sparsity_mismatches += m;
        mism_total += m;
        worst.raise(e, index);
        if !(e <= cfg.tol) || m > 0 {
            violations += 1;
            if counterexample.is_none() {
                let (p, mu) = draw(cfg, index);
                counterexample = Some(json!({
                    "p": p, "mu": mu, "max_error": e, "sparsity_mismatches": m, "trial_index": index,
                }));
            }
        }
    }
    Ok(DerivsResult {
        groups,
        max_error: worst.value.max(0.0),
        worst_index: worst.index,
        sparsity_mismatches: mism_total,
        violations,
        counterexample,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_agrees_on_a_small_run() {
        let cfg = DerivsConfig { n_max: 4, samples: 20, seed: 2, ..Default::default() };
        let r = run(&cfg).unwrap();
        assert_eq!(r.violations, 0, "{r:?}");
        assert!(r.max_error < 1e-6);
    }

    #[test]
    fn compare_flags_value_and_pattern_errors() {
        let (mut e, mut m) = (0.0, 0);
        compare(&[1.0, 0.0, 2.0], &[1.0, 0.5, 2.0], &mut e, &mut m);
        assert_eq!(m, 1);
        assert!((e - 0.5).abs() < 1e-15);
    }
}
