//! Uniform 1D grids, nodal fields, trapezoid inner products and
//! finite-difference derivatives.
//!
//! Boundary nodes are stored alongside interior ones; Dirichlet data live in
//! the field itself rather than being eliminated.

use crate::error::{Error, Result};

/// Uniform mesh on `[a, b]` with `n_interior` interior nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    a: f64,
    b: f64,
    n_interior: usize,
    h: f64,
}

impl Grid1D {
    pub fn new(a: f64, b: f64, n_interior: usize) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidGrid("endpoints must be finite".into()));
        }
        if b <= a {
            return Err(Error::InvalidGrid(format!(
                "right endpoint {b} must exceed left endpoint {a}"
            )));
        }
        if n_interior < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 interior nodes, got {n_interior}"
            )));
        }
        let h = (b - a) / (n_interior as f64 + 1.0);
        Ok(Self {
            a,
            b,
            n_interior,
            h,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    /// Total node count, boundaries included.
    pub fn len(&self) -> usize {
        self.n_interior + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.n_interior + 1 {
            self.b
        } else {
            self.a + i as f64 * self.h
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.x(i)).collect()
    }

    /// Cell midpoints `x_{i+1/2}`, one per cell.
    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.len() - 1)
            .map(|i| self.a + (i as f64 + 0.5) * self.h)
            .collect()
    }

    /// Index of the cell `[x_i, x_{i+1}]` containing `x`, clamped to the grid.
    pub fn cell_of(&self, x: f64) -> usize {
        let s = ((x - self.a) / self.h).floor();
        if s < 0.0 {
            0
        } else {
            (s as usize).min(self.n_interior)
        }
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            grid: *self,
            values: self.nodes().into_iter().map(f).collect(),
        }
    }

    pub fn zeros(&self) -> GridFunction {
        GridFunction {
            grid: *self,
            values: vec![0.0; self.len()],
        }
    }
}

/// Scalar field sampled at every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid1D,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite value at node {i}")));
        }
        Ok(Self { grid, values })
    }

    /// Builds a field whose boundary values are zero from interior values.
    pub fn from_interior(grid: Grid1D, interior: &[f64]) -> Self {
        assert_eq!(interior.len(), grid.n_interior());
        let mut values = Vec::with_capacity(grid.len());
        values.push(0.0);
        values.extend_from_slice(interior);
        values.push(0.0);
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn interior(&self) -> &[f64] {
        &self.values[1..self.values.len() - 1]
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &GridFunction) {
        debug_assert_eq!(self.grid, other.grid);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += s * b;
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn sub(&self, other: &GridFunction) -> GridFunction {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Cubic Lagrange interpolation at an arbitrary point.
    pub fn interpolate(&self, x: f64) -> f64 {
        let n = self.values.len();
        let i = self.grid.cell_of(x);
        let lo = i.saturating_sub(1).min(n - 4);
        let xs: [f64; 4] = std::array::from_fn(|k| self.grid.x(lo + k));
        let mut acc = 0.0;
        for k in 0..4 {
            let mut w = 1.0;
            for j in 0..4 {
                if j != k {
                    w *= (x - xs[j]) / (xs[k] - xs[j]);
                }
            }
            acc += w * self.values[lo + k];
        }
        acc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L2,
    H1,
    Linf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    First,
    Second,
}

/// How boundary nodes enter a derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryTreatment {
    /// Use the stored boundary values with one-sided stencils.
    OneSided,
    /// Replace the boundary values by the given pair before differencing.
    Dirichlet(f64, f64),
}

/// Trapezoid rule for `∫ f g dx`.
pub fn inner_product(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    if f.grid != g.grid {
        return Err(Error::IncompatibleGrids);
    }
    Ok(trapezoid_dot(f.grid.h, &f.values, &g.values))
}

pub(crate) fn trapezoid_dot(h: f64, f: &[f64], g: &[f64]) -> f64 {
    let n = f.len();
    let inner: f64 = f[1..n - 1]
        .iter()
        .zip(&g[1..n - 1])
        .map(|(a, b)| a * b)
        .sum();
    h * (inner + 0.5 * (f[0] * g[0] + f[n - 1] * g[n - 1]))
}

pub fn norm(f: &GridFunction, kind: NormKind) -> f64 {
    match kind {
        NormKind::L2 => trapezoid_dot(f.grid.h, &f.values, &f.values).sqrt(),
        NormKind::Linf => f.values.iter().fold(0.0, |m, v| m.max(v.abs())),
        NormKind::H1 => {
            let d = derivative(f, Order::First, BoundaryTreatment::OneSided);
            let h = f.grid.h;
            (trapezoid_dot(h, &f.values, &f.values) + trapezoid_dot(h, &d.values, &d.values)).sqrt()
        }
    }
}

pub fn derivative(f: &GridFunction, order: Order, bc: BoundaryTreatment) -> GridFunction {
    let mut u = f.values.clone();
    if let BoundaryTreatment::Dirichlet(left, right) = bc {
        u[0] = left;
        let n = u.len();
        u[n - 1] = right;
    }
    let values = match order {
        Order::First => first_difference(&u, f.grid.h),
        Order::Second => second_difference(&u, f.grid.h),
    };
    GridFunction {
        grid: f.grid,
        values,
    }
}

pub(crate) fn first_difference(u: &[f64], h: f64) -> Vec<f64> {
    let n = u.len();
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        d[i] = (u[i + 1] - u[i - 1]) / (2.0 * h);
    }
    d[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
    d[n - 1] = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * h);
    d
}

pub(crate) fn second_difference(u: &[f64], h: f64) -> Vec<f64> {
    let n = u.len();
    let h2 = h * h;
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        d[i] = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / h2;
    }
    d[0] = (2.0 * u[0] - 5.0 * u[1] + 4.0 * u[2] - u[3]) / h2;
    d[n - 1] = (2.0 * u[n - 1] - 5.0 * u[n - 2] + 4.0 * u[n - 3] - u[n - 4]) / h2;
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit() -> Grid1D {
        Grid1D::new(-1.0, 1.0, 399).unwrap()
    }

    #[test]
    fn spacing() {
        assert!((unit().h() - 0.005).abs() < 1e-15);
        assert!((Grid1D::new(0.0, 1.0, 99).unwrap().h() - 0.01).abs() < 1e-15);
        assert!(matches!(
            Grid1D::new(1.0, -1.0, 100),
            Err(Error::InvalidGrid(_))
        ));
        assert!(Grid1D::new(0.0, 1.0, 2).is_err());
        assert!(Grid1D::new(f64::NAN, 1.0, 10).is_err());
    }

    #[test]
    fn endpoints_are_exact() {
        let g = Grid1D::new(-1.0, 1.0, 7).unwrap();
        assert_eq!(g.x(0), -1.0);
        assert_eq!(g.x(8), 1.0);
        assert_eq!(g.len(), 9);
    }

    #[test]
    fn trapezoid_examples() {
        let g = unit();
        let one = g.sample(|_| 1.0);
        let x = g.sample(|x| x);
        assert!((inner_product(&one, &one).unwrap() - 2.0).abs() < 1e-13);
        assert!(inner_product(&x, &one).unwrap().abs() < 1e-13);
        assert!((inner_product(&x, &x).unwrap() - 2.0 / 3.0).abs() < 1e-4);
        let other = Grid1D::new(-1.0, 1.0, 101).unwrap().sample(|_| 1.0);
        assert!(matches!(
            inner_product(&one, &other),
            Err(Error::IncompatibleGrids)
        ));
    }

    #[test]
    fn norm_examples() {
        let g = unit();
        assert!((norm(&g.sample(|_| 1.0), NormKind::L2) - 2f64.sqrt()).abs() < 1e-12);
        for k in [NormKind::L2, NormKind::H1, NormKind::Linf] {
            assert_eq!(norm(&g.zeros(), k), 0.0);
        }
        let h1 = norm(&g.sample(|x| x), NormKind::H1);
        assert!((h1 - (2.0f64 / 3.0 + 2.0).sqrt()).abs() < 1e-3);
    }

    #[test]
    fn derivative_examples() {
        let g = unit();
        let d2 = derivative(
            &g.sample(|x| x * x),
            Order::Second,
            BoundaryTreatment::OneSided,
        );
        assert!(d2.values().iter().all(|v| (v - 2.0).abs() < 1e-8));
        let d1 = derivative(
            &g.sample(|_| 3.5),
            Order::First,
            BoundaryTreatment::OneSided,
        );
        assert!(d1.values().iter().all(|v| v.abs() < 1e-12));
        let s = g.sample(|x| (PI * x).sin());
        let d2 = derivative(&s, Order::Second, BoundaryTreatment::OneSided);
        let err = g
            .nodes()
            .iter()
            .zip(d2.values())
            .skip(1)
            .take(g.n_interior())
            .map(|(x, v)| (v + PI * PI * (PI * x).sin()).abs())
            .fold(0.0, f64::max);
        assert!(err / (PI * PI) < 1e-3);
    }

    #[test]
    fn dirichlet_substitution() {
        let g = Grid1D::new(0.0, 1.0, 9).unwrap();
        let f = g.zeros();
        let d = derivative(&f, Order::First, BoundaryTreatment::Dirichlet(0.0, 1.0));
        // only the last interior node sees the substituted value
        assert!((d.values()[9] - 1.0 / (2.0 * g.h())).abs() < 1e-12);
        assert_eq!(d.values()[5], 0.0);
    }

    #[test]
    fn cubic_interpolation_is_exact_for_cubics() {
        let g = Grid1D::new(-1.0, 1.0, 20).unwrap();
        let f = g.sample(|x| x * x * x - 2.0 * x + 0.5);
        for &x in &[-0.99, -0.31, 0.0, 0.47, 0.999] {
            assert!((f.interpolate(x) - (x * x * x - 2.0 * x + 0.5)).abs() < 1e-12);
        }
    }
}
