//! The Alexandrov-type lower bound ω_n εⁿ/dⁿ ≤ ∫_𝒫 det D²w on a ball, where 𝒫 is
//! the set of points with |Dw| < ε/d at which w lies above its tangent plane.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

/// Default relative quadrature tolerance for the inequality.
pub const QUADRATURE_TOL: f64 = 0.02;
const BOUNDARY_SAMPLES: usize = 4096;
const MAX_WORK: f64 = 4e10;

/// Volume of the unit ball in ℝⁿ.
pub fn omega(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => omega(n - 2) * 2.0 * PI / n as f64,
    }
}

/// Catalog of test functions w(x) written in y = x − x₀.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlexandrovField {
    /// c|y|².
    Paraboloid { c: f64 },
    /// a|y|⁴ + b|y|².
    QuarticQuadratic { a: f64, b: f64 },
    /// ½yᵀMy + g·y, M row-major.
    Quadratic { matrix: Vec<f64>, gradient: Vec<f64> },
    /// g·y.
    Linear { gradient: Vec<f64> },
    /// e^{c|y|²}.
    ExpRadial { c: f64 },
    /// √(1 + c|y|²) + b|y|².
    Hyperbolic { c: f64, b: f64 },
}

impl AlexandrovField {
    fn check(&self, n: usize) -> Result<()> {
        let ok = match self {
            AlexandrovField::Quadratic { matrix, gradient } => {
                SymMatrix::from_row_major(n, matrix.clone())?;
                gradient.len() == n
            }
            AlexandrovField::Linear { gradient } => gradient.len() == n,
            _ => true,
        };
        if !ok {
            return Err(Error::InvalidInput("field gradient has the wrong length".into()));
        }
        Ok(())
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        let r2: f64 = y.iter().map(|v| v * v).sum();
        match self {
            AlexandrovField::Paraboloid { c } => c * r2,
            AlexandrovField::QuarticQuadratic { a, b } => a * r2 * r2 + b * r2,
            AlexandrovField::Quadratic { matrix, gradient } => {
                let n = y.len();
                let mut q = 0.0;
                for j in 0..n {
                    for k in 0..n {
                        q += y[j] * 0.5 * (matrix[j * n + k] + matrix[k * n + j]) * y[k];
                    }
                }
                0.5 * q + gradient.iter().zip(y).map(|(g, v)| g * v).sum::<f64>()
            }
            AlexandrovField::Linear { gradient } => gradient.iter().zip(y).map(|(g, v)| g * v).sum(),
            AlexandrovField::ExpRadial { c } => (c * r2).exp(),
            AlexandrovField::Hyperbolic { c, b } => (1.0 + c * r2).sqrt() + b * r2,
        }
    }
}

fn default_resolution() -> usize {
    129
}

fn default_tol() -> f64 {
    QUADRATURE_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlexandrovProblem {
    pub center: Vec<f64>,
    /// Radius d of the ball Ω.
    pub radius: f64,
    /// ε in (0, min_∂Ω w − w(x₀)].
    pub eps: f64,
    pub field: AlexandrovField,
    /// Grid points per axis over the bounding box, endpoints included.
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default = "default_tol")]
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlexandrovReport {
    /// ω_n εⁿ/dⁿ.
    pub lhs: f64,
    /// Midpoint-rule ∫_𝒫 det D²w.
    pub rhs: f64,
    pub ratio: f64,
    /// lhs ≤ rhs·(1 + tolerance).
    pub holds: bool,
    pub boundary_min: f64,
    pub center_value: f64,
    /// Nodes with |Dw| < ε/d.
    pub gradient_nodes: usize,
    /// Nodes of 𝒫.
    pub contact_nodes: usize,
    pub h: f64,
    /// Contact mask over the bounding-box grid, row-major.
    #[serde(skip)]
    pub mask: Vec<bool>,
}

/// Points on the unit sphere in ℝⁿ, n ∈ {1, 2, 3}.
fn sphere_points(n: usize, count: usize) -> Vec<Vec<f64>> {
    match n {
        1 => vec![vec![-1.0], vec![1.0]],
        2 => (0..count).map(|k| {
            let t = 2.0 * PI * k as f64 / count as f64;
            vec![t.cos(), t.sin()]
        })
        .collect(),
        _ => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let t = golden * k as f64;
                    vec![r * t.cos(), r * t.sin(), z]
                })
                .collect()
        }
    }
}

/// Evaluates both sides on a grid over the bounding box of the ball.
///
/// Derivatives are central differences of the sampled w; 𝒫 is found by brute
/// force over all grid nodes inside the ball.
pub fn alexandrov_check(prob: &AlexandrovProblem) -> Result<AlexandrovReport> {
    let n = prob.center.len();
    if !(1..=3).contains(&n) {
        return Err(Error::InvalidInput("dimension must be 1, 2 or 3".into()));
    }
    if !(prob.radius > 0.0 && prob.radius.is_finite()) || prob.center.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidInput("ball must have a finite centre and positive radius".into()));
    }
    if prob.resolution < 5 || prob.resolution % 2 == 0 {
        return Err(Error::InvalidInput("resolution must be odd and at least 5".into()));
    }
    if !(prob.tolerance >= 0.0) {
        return Err(Error::InvalidInput("tolerance must be non-negative".into()));
    }
    prob.field.check(n)?;
    let d = prob.radius;
    let w = |y: &[f64]| prob.field.eval(y);
    let center_value = w(&vec![0.0; n]);
    let boundary_min = sphere_points(n, BOUNDARY_SAMPLES)
        .iter()
        .map(|s| w(&s.iter().map(|v| v * d).collect::<Vec<_>>()))
        .fold(f64::INFINITY, f64::min);
    let gap = boundary_min - center_value;
    if !(prob.eps > 0.0 && prob.eps <= gap + 1e-12 * (1.0 + gap.abs())) {
        return Err(Error::Precondition(format!(
            "eps = {} must lie in (0, {gap}] (min over the sphere of w minus w at the centre)",
            prob.eps
        )));
    }

    let m = prob.resolution;
    let h = 2.0 * d / (m - 1) as f64;
    let total = m.pow(n as u32);
    let coords = |i: usize| -> Vec<f64> {
        (0..n).map(|a| ((i / m.pow((n - 1 - a) as u32)) % m) as f64 * h - d).collect()
    };
    let values: Vec<f64> = (0..total).map(|i| w(&coords(i))).collect();
    let inside: Vec<usize> =
        (0..total).filter(|&i| coords(i).iter().map(|v| v * v).sum::<f64>() < d * d).collect();
    let stride = |a: usize| m.pow((n - 1 - a) as u32);
    let grad = |i: usize| -> Vec<f64> {
        (0..n).map(|a| (values[i + stride(a)] - values[i - stride(a)]) / (2.0 * h)).collect()
    };
    let hess = |i: usize| -> SymMatrix {
        let mut s = SymMatrix::zeros(n);
        for a in 0..n {
            let sa = stride(a);
            s.set(a, a, (values[i + sa] - 2.0 * values[i] + values[i - sa]) / (h * h));
            for b in 0..a {
                let sb = stride(b);
                let v = values[i + sa + sb] - values[i + sa - sb] - values[i - sa + sb] + values[i - sa - sb];
                s.set(a, b, v / (4.0 * h * h));
            }
        }
        s
    };

    let slope = prob.eps / d;
    let candidates: Vec<(usize, Vec<f64>)> = inside
        .iter()
        .filter_map(|&i| {
            let g = grad(i);
            (g.iter().map(|v| v * v).sum::<f64>().sqrt() < slope).then_some((i, g))
        })
        .collect();
    if candidates.len() as f64 * inside.len() as f64 > MAX_WORK {
        return Err(Error::InvalidInput("contact-set search too large; lower the resolution".into()));
    }
    let osc = inside.iter().map(|&i| values[i]).fold(f64::NEG_INFINITY, f64::max)
        - inside.iter().map(|&i| values[i]).fold(f64::INFINITY, f64::min);
    let plane_tol = 1e-9 * (1.0 + osc.abs());
    let points: Vec<Vec<f64>> = inside.iter().map(|&i| coords(i)).collect();
    let mut mask = vec![false; total];
    let mut rhs = 0.0;
    let mut contact_nodes = 0;
    for (i, g) in &candidates {
        let x = coords(*i);
        let supported = inside.iter().zip(&points).all(|(&j, y)| {
            let lin: f64 = g.iter().zip(y.iter().zip(&x)).map(|(g, (y, x))| g * (y - x)).sum();
            values[j] >= values[*i] + lin - plane_tol
        });
        if supported {
            mask[*i] = true;
            contact_nodes += 1;
            rhs += det(&hess(*i));
        }
    }
    rhs *= h.powi(n as i32);
    let lhs = omega(n) * (prob.eps / d).powi(n as i32);
    Ok(AlexandrovReport {
        lhs,
        rhs,
        ratio: if rhs > 0.0 { lhs / rhs } else { f64::INFINITY },
        holds: lhs <= rhs * (1.0 + prob.tolerance),
        boundary_min,
        center_value,
        gradient_nodes: candidates.len(),
        contact_nodes,
        h,
        mask,
    })
}

fn det(s: &SymMatrix) -> f64 {
    match s.n() {
        1 => s.get(0, 0),
        2 => s.get(0, 0) * s.get(1, 1) - s.get(0, 1) * s.get(1, 0),
        _ => {
            let a = |j, k| s.get(j, k);
            a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0))
                + a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0))
        }
    }
}

/// Twenty convex test problems in two dimensions.
pub fn convex_corpus(resolution: usize) -> Vec<AlexandrovProblem> {
    let mut out = Vec::new();
    let prob = |center: Vec<f64>, radius: f64, field: AlexandrovField, frac: f64| -> AlexandrovProblem {
        let p = AlexandrovProblem { center, radius, eps: 1.0, field, resolution, tolerance: QUADRATURE_TOL };
        let n = p.center.len();
        let gap = sphere_points(n, BOUNDARY_SAMPLES)
            .iter()
            .map(|s| p.field.eval(&s.iter().map(|v| v * radius).collect::<Vec<_>>()))
            .fold(f64::INFINITY, f64::min)
            - p.field.eval(&vec![0.0; n]);
        AlexandrovProblem { eps: frac * gap, ..p }
    };
    for (k, c) in [0.5, 1.0, 2.0, 4.0].iter().enumerate() {
        out.push(prob(vec![0.1 * k as f64, -0.2], 1.0, AlexandrovField::Paraboloid { c: *c }, 1.0));
    }
    for (a, b) in [(1.0, 1.0), (1.0, 0.1), (0.5, 2.0), (2.0, 0.5)] {
        out.push(prob(vec![0.0, 0.0], 1.0, AlexandrovField::QuarticQuadratic { a, b }, 0.6));
    }
    for (m, g, f) in [
        (vec![2.0, 0.0, 0.0, 1.0], vec![0.0, 0.0], 1.0),
        (vec![3.0, 1.0, 1.0, 2.0], vec![0.1, 0.0], 0.8),
        (vec![1.0, 0.5, 0.5, 1.0], vec![0.0, -0.1], 0.7),
        (vec![4.0, 0.0, 0.0, 0.5], vec![0.0, 0.0], 0.9),
    ] {
        out.push(prob(vec![1.0, 1.0], 1.5, AlexandrovField::Quadratic { matrix: m, gradient: g }, f));
    }
    for (c, f) in [(0.5, 1.0), (1.0, 0.5), (1.5, 0.8), (0.25, 0.9)] {
        out.push(prob(vec![0.0, 0.5], 1.0, AlexandrovField::ExpRadial { c }, f));
    }
    for (c, b, f) in [(1.0, 0.5, 1.0), (4.0, 0.2, 0.7), (2.0, 1.0, 0.5), (9.0, 0.1, 0.9)] {
        out.push(prob(vec![-0.5, 0.0], 2.0, AlexandrovField::Hyperbolic { c, b }, f));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_ball_volumes() {
        assert_eq!(omega(1), 2.0);
        assert!((omega(2) - PI).abs() < 1e-15);
        assert!((omega(3) - 4.0 * PI / 3.0).abs() < 1e-15);
        assert!((omega(4) - PI * PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn paraboloid_equality_case() {
        for (n, res) in [(1, 129), (2, 129), (3, 33)] {
            let p = AlexandrovProblem {
                center: vec![0.3; n],
                radius: 2.0,
                eps: 4.0,
                field: AlexandrovField::Paraboloid { c: 1.0 },
                resolution: res,
                tolerance: QUADRATURE_TOL,
            };
            let r = alexandrov_check(&p).unwrap();
            let tol = if n == 3 { 0.1 } else { 0.02 };
            assert!((r.ratio - 1.0).abs() < tol, "n = {n}: {r:?}");
        }
    }

    #[test]
    fn eps_outside_range_is_rejected() {
        let lin = AlexandrovProblem {
            center: vec![0.0, 0.0],
            radius: 1.0,
            eps: 0.1,
            field: AlexandrovField::Linear { gradient: vec![1.0, 0.0] },
            resolution: 33,
            tolerance: QUADRATURE_TOL,
        };
        assert!(matches!(alexandrov_check(&lin), Err(Error::Precondition(_))));
        let big = AlexandrovProblem { eps: 1.5, field: AlexandrovField::Paraboloid { c: 1.0 }, ..lin };
        assert!(matches!(alexandrov_check(&big), Err(Error::Precondition(_))));
    }

    #[test]
    fn quartic_has_slack() {
        let p = AlexandrovProblem {
            center: vec![0.0, 0.0],
            radius: 1.0,
            eps: 0.5,
            field: AlexandrovField::QuarticQuadratic { a: 1.0, b: 1.0 },
            resolution: 65,
            tolerance: QUADRATURE_TOL,
        };
        let r = alexandrov_check(&p).unwrap();
        assert!(r.holds && r.ratio < 0.98, "{r:?}");
    }

    #[test]
    fn concave_part_is_excluded_from_contact_set() {
        // w = −|y|² + 2|y|⁴ is concave near the centre, so those nodes fail the plane test;
        // the gradient image of 𝒫 is still the whole ball of radius ε/d.
        let p = AlexandrovProblem {
            center: vec![0.0, 0.0],
            radius: 1.0,
            eps: 0.5,
            field: AlexandrovField::QuarticQuadratic { a: 2.0, b: -1.0 },
            resolution: 129,
            tolerance: QUADRATURE_TOL,
        };
        let r = alexandrov_check(&p).unwrap();
        let mid = 64 * 129 + 64;
        assert!(!r.mask[mid] && r.contact_nodes < r.gradient_nodes && r.holds, "{r:?}");
    }
}
