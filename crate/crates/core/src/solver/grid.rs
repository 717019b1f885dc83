//! Periodic Cartesian grids, grid functions and their central differences.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

/// Smallest number of nodes per axis.
pub const MIN_SIZE: usize = 8;

/// A flat d-dimensional torus [0, period)^d sampled at `sizes` nodes per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct TorusGrid {
    sizes: Vec<usize>,
    period: f64,
    h: Vec<f64>,
    strides: Vec<usize>,
}

/// Serialized form of a [`TorusGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub sizes: Vec<usize>,
    #[serde(default = "two_pi")]
    pub period: f64,
}

fn two_pi() -> f64 {
    2.0 * PI
}

impl TryFrom<GridSpec> for TorusGrid {
    type Error = Error;
    fn try_from(s: GridSpec) -> Result<Self> {
        TorusGrid::with_period(s.sizes, s.period)
    }
}

impl From<TorusGrid> for GridSpec {
    fn from(g: TorusGrid) -> Self {
        GridSpec { sizes: g.sizes, period: g.period }
    }
}

impl TorusGrid {
    /// Grid of period 2π.
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        Self::with_period(sizes, two_pi())
    }

    pub fn with_period(sizes: Vec<usize>, period: f64) -> Result<Self> {
        if !(2..=3).contains(&sizes.len()) {
            return Err(Error::InvalidInput("grid dimension must be 2 or 3".into()));
        }
        if sizes.iter().any(|&s| s < MIN_SIZE) {
            return Err(Error::InvalidInput(format!("every axis needs at least {MIN_SIZE} nodes")));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidInput("period must be positive".into()));
        }
        let h = sizes.iter().map(|&s| period / s as f64).collect();
        let d = sizes.len();
        let strides = (0..d).map(|a| sizes[a + 1..].iter().product()).collect();
        Ok(TorusGrid { sizes, period, h, strides })
    }

    /// Square grid with `size` nodes per axis in dimension `d`.
    pub fn cube(d: usize, size: usize) -> Result<Self> {
        Self::new(vec![size; d])
    }

    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn len(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Volume of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        self.h.iter().product()
    }

    /// Multi-index of flat node `i` (last axis fastest).
    pub fn multi(&self, i: usize) -> Vec<usize> {
        self.strides.iter().zip(&self.sizes).map(|(&s, &m)| (i / s) % m).collect()
    }

    /// Coordinates of flat node `i`.
    pub fn point(&self, i: usize) -> Vec<f64> {
        self.multi(i).iter().zip(&self.h).map(|(&k, &h)| k as f64 * h).collect()
    }

    /// Flat index of the neighbour of `i` shifted by `off` along `axis`, wrapping.
    pub fn shift(&self, i: usize, axis: usize, off: isize) -> usize {
        let m = self.sizes[axis] as isize;
        let s = self.strides[axis];
        let k = ((i / s) % self.sizes[axis]) as isize;
        let k2 = (k + off).rem_euclid(m);
        (i as isize + (k2 - k) * s as isize) as usize
    }

    /// Samples f at every node.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> GridFn {
        let values = (0..self.len()).map(|i| f(&self.point(i))).collect();
        GridFn { grid: self.clone(), values }
    }
}

/// A scalar field on a [`TorusGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFn {
    pub grid: TorusGrid,
    pub values: Vec<f64>,
}

impl GridFn {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("value at node {i} is not finite")));
        }
        Ok(GridFn { grid, values })
    }

    pub fn zeros(grid: &TorusGrid) -> Self {
        GridFn { grid: grid.clone(), values: vec![0.0; grid.len()] }
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Pointwise difference self − other on the same grid.
    pub fn sub(&self, other: &GridFn) -> GridFn {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        GridFn { grid: self.grid.clone(), values }
    }

    /// Central first differences at node `i`.
    pub fn gradient(&self, i: usize) -> Vec<f64> {
        let g = &self.grid;
        (0..g.dim())
            .map(|a| (self.values[g.shift(i, a, 1)] - self.values[g.shift(i, a, -1)]) / (2.0 * g.h[a]))
            .collect()
    }

    /// Central second differences at node `i`: three-point on the diagonal, four
    /// corner points off it.
    pub fn hessian(&self, i: usize) -> SymMatrix {
        let g = &self.grid;
        let d = g.dim();
        let u = &self.values;
        let mut m = SymMatrix::zeros(d);
        for a in 0..d {
            let (p, q) = (g.shift(i, a, 1), g.shift(i, a, -1));
            m.set(a, a, (u[p] - 2.0 * u[i] + u[q]) / (g.h[a] * g.h[a]));
            for b in 0..a {
                let pp = u[g.shift(p, b, 1)];
                let pm = u[g.shift(p, b, -1)];
                let mp = u[g.shift(q, b, 1)];
                let mm = u[g.shift(q, b, -1)];
                m.set(a, b, (pp - pm - mp + mm) / (4.0 * g.h[a] * g.h[b]));
            }
        }
        m
    }

    /// CSV: header `d,sizes...,h...`, then one value per line, row-major.
    pub fn to_csv(&self) -> String {
        grid_csv(self.grid.sizes(), self.grid.h(), &self.values)
    }

    /// Parses the CSV form; the period is recovered from size·h.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Io("empty CSV".into()))?;
        let fields: Vec<&str> = header.split(',').map(str::trim).collect();
        let d: usize = fields[0].parse().map_err(|_| Error::Io("bad dimension in CSV header".into()))?;
        if fields.len() != 1 + 2 * d {
            return Err(Error::Io("CSV header must read d,sizes...,h...".into()));
        }
        let sizes = fields[1..=d]
            .iter()
            .map(|s| s.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::Io("bad size in CSV header".into()))?;
        let h0: f64 = fields[1 + d].parse().map_err(|_| Error::Io("bad spacing in CSV header".into()))?;
        let grid = TorusGrid::with_period(sizes, h0 * fields[1].parse::<f64>().unwrap_or(0.0))?;
        let values = lines
            .map(|l| l.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Io(format!("bad value in CSV: {e}")))?;
        GridFn::new(grid, values)
    }
}

/// CSV writer shared by every grid-valued output.
pub fn grid_csv(sizes: &[usize], h: &[f64], values: &[f64]) -> String {
    let mut out = String::with_capacity(values.len() * 24 + 64);
    let _ = write!(out, "{}", sizes.len());
    for s in sizes {
        let _ = write!(out, ",{s}");
    }
    for x in h {
        let _ = write!(out, ",{x:.16e}");
    }
    out.push('\n');
    for v in values {
        let _ = writeln!(out, "{v:.16e}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_or_bad_grids() {
        assert!(TorusGrid::new(vec![7, 8]).is_err());
        assert!(TorusGrid::new(vec![8]).is_err());
        assert!(TorusGrid::new(vec![8; 4]).is_err());
        assert!(TorusGrid::with_period(vec![8, 8], 0.0).is_err());
    }

    #[test]
    fn shift_wraps() {
        let g = TorusGrid::new(vec![8, 10]).unwrap();
        assert_eq!(g.multi(g.shift(0, 0, -1)), vec![7, 0]);
        assert_eq!(g.multi(g.shift(9, 1, 1)), vec![0, 0]);
        assert_eq!(g.multi(g.shift(13, 1, -5)), vec![1, 8]);
    }

    #[test]
    fn differences_of_trig_field() {
        let g = TorusGrid::cube(2, 64).unwrap();
        let u = g.sample(|x| x[0].sin() * (2.0 * x[1]).cos());
        let h = g.h()[0];
        for i in [0, 77, 1000, 4095] {
            let x = g.point(i);
            let grad = u.gradient(i);
            assert!((grad[0] - x[0].cos() * (2.0 * x[1]).cos()).abs() < h * h);
            let hs = u.hessian(i);
            assert!((hs.get(0, 1) + 2.0 * x[0].cos() * (2.0 * x[1]).sin()).abs() < 2.0 * h * h * 4.0);
            assert!((hs.get(1, 1) + 4.0 * u.values[i]).abs() < 16.0 * h * h);
        }
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let g = TorusGrid::new(vec![8, 9]).unwrap();
        let u = g.sample(|x| (x[0] + 0.1).ln() * x[1].cos());
        let back = GridFn::from_csv(&u.to_csv()).unwrap();
        assert_eq!(back.values, u.values);
        assert_eq!(back.grid.sizes(), u.grid.sizes());
        assert!(u.to_csv().starts_with("2,8,9,7.8539816339744828e-1,"));
    }
}
