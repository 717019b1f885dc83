//! Concavity inequalities with complex weights for the σ_{n−1} and σ_p operators,
//! and an empirical search for the threshold on μ_n above which they hold.
//!
//! All three inequalities share the left side
//! −Σ_{j≠k} σ_{q−2}(μ|jk) w_j w̄_k − ((1−τ)/μ_n) σ_{q−1}(μ|n)|w_n|²
//! with q = n−1 (large_mu1, large_mu_n) or q = p (small_mu1).

use num_complex::Complex64;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::cone::in_cone_strict;
use crate::error::{Error, Result};
use crate::linalg::{jacobi_eigen, SymMatrix};
use crate::rng::{normal, stream, Rng};
use crate::symfun::{check_vec, esym, esym_trunc};

/// Violation threshold used by the threshold search.
pub const SEARCH_TOL: f64 = 1e-10;
/// Search bracket for M.
pub const M_MAX: f64 = 1e6;

/// A complex n-vector stored as real and imaginary parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CVec {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl CVec {
    pub fn real(re: Vec<f64>) -> Self {
        let im = vec![0.0; re.len()];
        CVec { re, im }
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    fn get(&self, j: usize) -> Complex64 {
        Complex64::new(self.re[j], self.im[j])
    }

    pub fn scale(&self, c: Complex64) -> CVec {
        let (re, im) = (0..self.len()).map(|j| c * self.get(j)).map(|z| (z.re, z.im)).unzip();
        CVec { re, im }
    }

    /// A random vector with unit Euclidean norm.
    pub fn random_unit(n: usize, rng: &mut Rng) -> CVec {
        let mut re: Vec<f64> = (0..n).map(|_| normal(rng)).collect();
        let mut im: Vec<f64> = (0..n).map(|_| normal(rng)).collect();
        let norm = re.iter().chain(&im).map(|x| x * x).sum::<f64>().sqrt();
        re.iter_mut().chain(im.iter_mut()).for_each(|x| *x /= norm);
        CVec { re, im }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Mode {
    /// μ_1 very negative; a ∈ ((1−τ)/(1+τ), n−1].
    LargeMu1 { a: f64 },
    /// μ ∈ Γ_p with μ_n large.
    SmallMu1 { p: usize },
    /// μ ∈ Γ_{n−1} with μ_n large.
    LargeMuN,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcavityInstance {
    pub mu: Vec<f64>,
    pub w: CVec,
    pub tau: f64,
    pub eps: f64,
    #[serde(flatten)]
    pub mode: Mode,
}

impl ConcavityInstance {
    /// Cone order q of the instance.
    pub fn order(&self) -> usize {
        match self.mode {
            Mode::SmallMu1 { p } => p,
            _ => self.mu.len() - 1,
        }
    }

    fn validate(&self) -> Result<()> {
        check_vec(&self.mu)?;
        let n = self.mu.len();
        if n < 3 {
            return Err(Error::Precondition("need n >= 3".into()));
        }
        if self.w.re.len() != n || self.w.im.len() != n {
            return Err(Error::InvalidInput("w has the wrong length".into()));
        }
        if self.mu.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Precondition("mu must be sorted ascending".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::Precondition("eps must be positive".into()));
        }
        match self.mode {
            Mode::LargeMu1 { a } => {
                if !(0.0..=1.0).contains(&self.tau) {
                    return Err(Error::Precondition("tau must lie in [0, 1]".into()));
                }
                let r = ratio(self.tau);
                if !(a > r && a <= (n - 1) as f64) {
                    return Err(Error::Precondition(format!("a must lie in ({r}, {}]", n - 1)));
                }
            }
            Mode::SmallMu1 { p } => {
                if p < 1 || p > n {
                    return Err(Error::Precondition("p must lie in 1..=n".into()));
                }
                small_tau(self.tau)?;
            }
            Mode::LargeMuN => small_tau(self.tau)?,
        }
        if !in_cone_strict(&self.mu, self.order()) {
            return Err(Error::Precondition(format!("mu not in Gamma_{}", self.order())));
        }
        Ok(())
    }
}

fn small_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau <= 0.5 {
        Ok(())
    } else {
        Err(Error::Precondition("tau must lie in (0, 1/2]".into()))
    }
}

/// (1−τ)/(1+τ).
fn ratio(tau: f64) -> f64 {
    (1.0 - tau) / (1.0 + tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    /// Largest imaginary part met while forming the Hermitian forms.
    pub imag: f64,
}

/// Both sides of the instance's inequality; residual = lhs − rhs.
pub fn evaluate(inst: &ConcavityInstance) -> Result<Evaluation> {
    inst.validate()?;
    Ok(evaluate_unchecked(inst))
}

fn evaluate_unchecked(inst: &ConcavityInstance) -> Evaluation {
    let mu = &inst.mu;
    let n = mu.len();
    let q = inst.order() as i64;
    let w = |j| inst.w.get(j);

    let mut pair = Complex64::new(0.0, 0.0);
    for j in 0..n {
        for k in 0..n {
            if j != k {
                pair += esym_trunc(q - 2, mu, &[j, k]) * w(j) * w(k).conj();
            }
        }
    }
    let minors: Vec<f64> = (0..n).map(|j| esym_trunc(q - 1, mu, &[j])).collect();
    let mun = mu[n - 1];
    let lhs = -pair - (1.0 - inst.tau) / mun * minors[n - 1] * w(n - 1).norm_sqr();

    let lin: Complex64 = (0..n).map(|j| minors[j] * w(j)).sum();
    let sq = lin.norm_sqr();
    let tail: f64 = (0..n - 1)
        .map(|j| minors[j] * w(j).norm_sqr() / (mun + inst.eps - mu[j]))
        .sum();
    let top = esym(q, mu);
    let rhs = match inst.mode {
        Mode::LargeMu1 { a } => -sq / top - 2.0 * a / (n - 1) as f64 * tail,
        Mode::SmallMu1 { .. } | Mode::LargeMuN => {
            let c = ((q + 1) * (q + 1)) as f64;
            -c / top * sq - (1.0 - inst.tau) * tail
        }
    };
    Evaluation { lhs: lhs.re, rhs, residual: lhs.re - rhs, imag: lhs.im.abs() }
}

/// Real symmetric H with residual(w) = w*·H·w for every complex w.
pub fn residual_form(inst: &ConcavityInstance) -> Result<SymMatrix> {
    inst.validate()?;
    Ok(residual_form_unchecked(inst))
}

fn residual_form_unchecked(inst: &ConcavityInstance) -> SymMatrix {
    let mu = &inst.mu;
    let n = mu.len();
    let q = inst.order() as i64;
    let minors: Vec<f64> = (0..n).map(|j| esym_trunc(q - 1, mu, &[j])).collect();
    let mun = mu[n - 1];
    let top = esym(q, mu);
    let (c_sq, c_tail) = match inst.mode {
        Mode::LargeMu1 { a } => (1.0 / top, 2.0 * a / (n - 1) as f64),
        _ => (((q + 1) * (q + 1)) as f64 / top, 1.0 - inst.tau),
    };
    let mut h = SymMatrix::zeros(n);
    for j in 0..n {
        for k in 0..=j {
            let mut v = c_sq * minors[j] * minors[k];
            if j != k {
                v -= esym_trunc(q - 2, mu, &[j, k]);
            } else if j < n - 1 {
                v += c_tail * minors[j] / (mun + inst.eps - mu[j]);
            } else {
                v -= (1.0 - inst.tau) / mun * minors[n - 1];
            }
            h.set(j, k, v);
        }
    }
    h
}

/// The unit weight minimizing the residual, and that minimum.
pub fn worst_weight(inst: &ConcavityInstance) -> Result<(CVec, f64)> {
    inst.validate()?;
    Ok(worst_weight_unchecked(inst))
}

fn worst_weight_unchecked(inst: &ConcavityInstance) -> (CVec, f64) {
    let n = inst.mu.len();
    let (vals, vecs) = jacobi_eigen(&residual_form_unchecked(inst));
    let w = CVec::real((0..n).map(|r| vecs[r * n]).collect());
    (w, vals[0])
}

/// Hypothesis of the large-μ_1 inequality: μ ∈ Γ_{n−1} sorted,
/// μ_n ≥ ε(a+r)/(a−r) and μ_1 ≤ −(2σ_{n−1}/(a−r))^{1/(n−1)} with r = (1−τ)/(1+τ).
/// For the other modes only admissibility and parameter ranges are checked.
pub fn hypothesis_check(inst: &ConcavityInstance) -> bool {
    if inst.validate().is_err() {
        return false;
    }
    match inst.mode {
        Mode::LargeMu1 { a } => {
            let n = inst.mu.len();
            let r = ratio(inst.tau);
            let top = esym(n as i64 - 1, &inst.mu);
            inst.mu[n - 1] >= inst.eps * (a + r) / (a - r)
                && inst.mu[0] <= -(2.0 * top / (a - r)).powf(1.0 / (n - 1) as f64)
        }
        _ => true,
    }
}

/// Draws μ ∈ Γ_{n−1} aimed at the large-μ_1 hypothesis; callers confirm it with
/// [`hypothesis_check`].
///
/// μ_2..μ_n are positive with μ_n above the required floor; μ_1 is placed a random
/// fraction θ of the way from the root of σ_{n−1} in μ_1 towards zero, which keeps
/// μ ∈ Γ_{n−1} and makes σ_{n−1} = θσ_{n−1}(μ_2..μ_n).
pub fn sample_large_mu1(n: usize, tau: f64, eps: f64, a: f64, rng: &mut Rng) -> Vec<f64> {
    let r = ratio(tau);
    let floor = eps * (a + r) / (a - r);
    let mun = floor * (1.0 + 4.0 * rng.gen::<f64>());
    let mut rest: Vec<f64> = (0..n - 2).map(|_| mun * rng.gen_range(0.02..1.0)).collect();
    rest.push(mun);
    rest.sort_by(f64::total_cmp);
    let root = -esym(n as i64 - 1, &rest) / esym(n as i64 - 2, &rest);
    let theta = 10f64.powf(rng.gen_range(-6.0..0.0));
    let mut mu = vec![root * (1.0 - theta)];
    mu.extend(rest);
    mu
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub n: usize,
    pub p: usize,
    pub tau: f64,
    pub eps: f64,
    pub sigma_band: [f64; 2],
    pub trials: usize,
    pub seed: u64,
    /// Optional floor −C on μ_1; samples below it are redrawn.
    pub mu1_floor: Option<f64>,
    /// Replace the random w of each trial by the weight minimizing the residual.
    #[serde(default)]
    pub adversarial: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub m_hat: f64,
    pub trials: usize,
    pub worst_residual: f64,
    pub seed: u64,
    /// max(−μ_1) over the samples at M̂: the realized constant C with −C ≤ μ_1.
    pub realized_c: f64,
    /// Bisection levels evaluated.
    pub levels: usize,
}

/// Redraws allowed per trial before a sampling failure is declared.
const MAX_DRAWS: usize = 1000;
/// Bisection steps in log M.
const BISECTION_STEPS: usize = 24;

/// Smallest M (by bisection in log M over [ε, 10⁶]) for which no sampled instance
/// with μ_n ≥ M violates the σ_p inequality (the σ_{n−1} case when p = n−1).
pub fn find_threshold(cfg: &ThresholdConfig) -> Result<ThresholdResult> {
    let n = cfg.n;
    if cfg.trials == 0 {
        return Err(Error::InvalidInput("trials must be positive".into()));
    }
    if n < 3 || cfg.p < 2 || cfg.p > n {
        return Err(Error::InvalidInput("need n >= 3 and 2 <= p <= n".into()));
    }
    small_tau(cfg.tau)?;
    let [lo_s, hi_s] = cfg.sigma_band;
    if !(cfg.eps > 0.0 && lo_s > 0.0 && hi_s >= lo_s) {
        return Err(Error::InvalidInput("need eps > 0 and 0 < band low <= band high".into()));
    }

    let level = |m: f64| scan_level(cfg, m);
    let top = level(M_MAX)?;
    if top.worst.residual < -SEARCH_TOL {
        let cex = serde_json::to_string(&top.worst_instance).unwrap_or_default();
        return Err(Error::Search(format!("violations persist at M = {M_MAX:e}: {cex}")));
    }
    let mut levels = 1;
    let bottom = level(cfg.eps)?;
    levels += 1;
    if bottom.worst.residual >= -SEARCH_TOL {
        return Ok(result(cfg, cfg.eps, &bottom, levels));
    }
    let (mut lo, mut hi, mut best) = (cfg.eps.ln(), M_MAX.ln(), top);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let scan = level(mid.exp())?;
        levels += 1;
        if scan.worst.residual < -SEARCH_TOL {
            lo = mid;
        } else {
            hi = mid;
            best = scan;
        }
    }
    Ok(result(cfg, hi.exp(), &best, levels))
}

fn result(cfg: &ThresholdConfig, m_hat: f64, scan: &LevelScan, levels: usize) -> ThresholdResult {
    ThresholdResult {
        m_hat,
        trials: cfg.trials,
        worst_residual: scan.worst.residual,
        seed: cfg.seed,
        realized_c: scan.realized_c,
        levels,
    }
}

struct LevelScan {
    worst: Evaluation,
    worst_instance: ConcavityInstance,
    realized_c: f64,
}

fn scan_level(cfg: &ThresholdConfig, m: f64) -> Result<LevelScan> {
    let mut scan: Option<LevelScan> = None;
    for t in 0..cfg.trials {
        let mut rng = stream(cfg.seed, t as u64);
        let mut inst = draw_instance(cfg, m, &mut rng)?;
        if cfg.adversarial {
            inst.w = worst_weight_unchecked(&inst).0;
        }
        let ev = evaluate_unchecked(&inst);
        let c = -inst.mu[0];
        match &mut scan {
            None => scan = Some(LevelScan { worst: ev, worst_instance: inst, realized_c: c.max(0.0) }),
            Some(s) => {
                s.realized_c = s.realized_c.max(c);
                if ev.residual < s.worst.residual {
                    s.worst = ev;
                    s.worst_instance = inst;
                }
            }
        }
    }
    Ok(scan.expect("trials > 0"))
}

/// One admissible instance with μ_n ∈ [M, 2M] and σ_p(μ) in the band.
///
/// The first n−1 entries have a shape drawn from [−μ_n/(n−1), μ_n] and are then
/// scaled by s ∈ (0, 1] so that σ_p hits a target drawn from the band (the small or
/// the large root, at random).
fn draw_instance(cfg: &ThresholdConfig, m: f64, rng: &mut Rng) -> Result<ConcavityInstance> {
    let n = cfg.n;
    let p = cfg.p as i64;
    let mode = if cfg.p == n - 1 { Mode::LargeMuN } else { Mode::SmallMu1 { p: cfg.p } };
    for _ in 0..MAX_DRAWS {
        let mun = m * (1.0 + rng.gen::<f64>());
        let shape: Vec<f64> =
            (0..n - 1).map(|_| mun * rng.gen_range(-1.0 / (n - 1) as f64..1.0)).collect();
        let target = rng.gen_range(cfg.sigma_band[0]..=cfg.sigma_band[1]);
        let large_root = rng.gen::<bool>();
        let w = CVec::random_unit(n, rng);
        // σ_p(s·shape, μ_n) = μ_n σ_{p−1}(shape) s^{p−1} + σ_p(shape) s^p.
        let (c1, c0) = (mun * esym(p - 1, &shape), esym(p, &shape));
        let g = |s: f64| c1 * s.powi(p as i32 - 1) + c0 * s.powi(p as i32) - target;
        let Some(s) = bracket_root(&g, large_root) else { continue };
        let mut mu: Vec<f64> = shape.iter().map(|x| s * x).collect();
        mu.push(mun);
        mu.sort_by(f64::total_cmp);
        if mu[n - 1] != mun || !in_cone_strict(&mu, cfg.p) {
            continue;
        }
        let sp = esym(p, &mu);
        if sp < cfg.sigma_band[0] || sp > cfg.sigma_band[1] {
            continue;
        }
        if cfg.mu1_floor.is_some_and(|c| mu[0] < -c) {
            continue;
        }
        return Ok(ConcavityInstance { mu, w, tau: cfg.tau, eps: cfg.eps, mode });
    }
    Err(Error::Search(format!("could not sample an admissible instance at M = {m:e}")))
}

/// Root of g on (0, 1] located by a 256-cell scan then bisection; the first sign
/// change, or the last one when `last` is set.
fn bracket_root(g: &dyn Fn(f64) -> f64, last: bool) -> Option<f64> {
    const CELLS: usize = 256;
    let mut found = None;
    let mut prev = g(0.0);
    for i in 1..=CELLS {
        let s = i as f64 / CELLS as f64;
        let cur = g(s);
        if (prev < 0.0) != (cur < 0.0) {
            found = Some(((i - 1) as f64 / CELLS as f64, s));
            if !last {
                break;
            }
        }
        prev = cur;
    }
    let (mut lo, mut hi) = found?;
    let neg_lo = g(lo) < 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if (g(mid) < 0.0) == neg_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(mu: Vec<f64>, w: CVec, tau: f64, mode: Mode) -> ConcavityInstance {
        ConcavityInstance { mu, w, tau, eps: 1.0, mode }
    }

    #[test]
    fn zero_weight_gives_zero() {
        let i = inst(vec![0.5, 1.0, 4.0], CVec::real(vec![0.0; 3]), 0.5, Mode::LargeMuN);
        let e = evaluate(&i).unwrap();
        assert_eq!((e.lhs, e.rhs, e.residual), (0.0, 0.0, 0.0));
    }

    #[test]
    fn hypothesis_examples() {
        let w = CVec::real(vec![1.0, 0.0, 0.0]);
        let yes = inst(vec![-1.0, 1.3, 5.0], w.clone(), 0.0, Mode::LargeMu1 { a: 2.0 });
        assert!(hypothesis_check(&yes));
        assert!(evaluate(&yes).unwrap().residual >= 0.0);
        let no = inst(vec![-0.1, 5.0, 5.0], w.clone(), 0.0, Mode::LargeMu1 { a: 2.0 });
        assert!(!hypothesis_check(&no));
        let out = inst(vec![-3.0, 1.0, 1.0], w, 0.0, Mode::LargeMu1 { a: 2.0 });
        assert!(!hypothesis_check(&out));
    }

    /// Direct evaluation of the large-μ_1 example at w = e_1, n = 3:
    /// lhs = 0 (no cross terms, w_3 = 0); rhs = −σ_1(μ|1)²/σ_2 − 2·σ_1(μ|1)/(μ_3+ε−μ_1).
    #[test]
    fn large_mu1_example_by_hand() {
        let i = inst(vec![-1.0, 1.3, 5.0], CVec::real(vec![1.0, 0.0, 0.0]), 0.0, Mode::LargeMu1 { a: 2.0 });
        let e = evaluate(&i).unwrap();
        let s2 = -1.3 - 5.0 + 6.5;
        let m1 = 6.3;
        let rhs = -m1 * m1 / s2 - 2.0 * 2.0 / 2.0 * m1 / (5.0 + 1.0 + 1.0);
        assert_eq!(e.lhs, 0.0);
        assert!((e.rhs - rhs).abs() < 1e-12 * rhs.abs());
    }

    #[test]
    fn parameter_ranges_enforced() {
        let w = CVec::real(vec![1.0, 0.0, 0.0]);
        assert!(evaluate(&inst(vec![0.5, 1.0, 4.0], w.clone(), 0.0, Mode::LargeMuN)).is_err());
        assert!(evaluate(&inst(vec![0.5, 1.0, 4.0], w.clone(), 0.0, Mode::LargeMu1 { a: 0.5 })).is_err());
        assert!(evaluate(&inst(vec![4.0, 1.0, 0.5], w, 0.5, Mode::LargeMuN)).is_err());
    }

    #[test]
    fn trials_zero_rejected() {
        let cfg = ThresholdConfig {
            n: 3,
            p: 2,
            tau: 0.5,
            eps: 1.0,
            sigma_band: [0.5, 2.0],
            trials: 0,
            seed: 1,
            mu1_floor: None,
            adversarial: false,
        };
        assert!(find_threshold(&cfg).is_err());
    }

    #[test]
    fn sampler_meets_hypothesis_usually() {
        let mut ok = 0;
        for t in 0..200 {
            let mut rng = stream(3, t);
            let mu = sample_large_mu1(4, 0.25, 1.0, 2.0, &mut rng);
            let i = inst(mu, CVec::random_unit(4, &mut rng), 0.25, Mode::LargeMu1 { a: 2.0 });
            ok += hypothesis_check(&i) as usize;
        }
        assert!(ok > 100, "{ok}");
    }

    #[test]
    fn adversarial_search_finds_interior_threshold() {
        let cfg = ThresholdConfig {
            n: 3,
            p: 2,
            tau: 0.5,
            eps: 1.0,
            sigma_band: [1e-4, 1e-2],
            trials: 2000,
            seed: 42,
            mu1_floor: None,
            adversarial: true,
        };
        let r = find_threshold(&cfg).unwrap();
        assert!(r.m_hat > 1.5 && r.m_hat < 2.5, "{r:?}");
        assert!(r.worst_residual >= -SEARCH_TOL);
        assert_eq!(find_threshold(&cfg).unwrap(), r);
    }
}
