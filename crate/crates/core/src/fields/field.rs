use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::Grid;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    L1,
    L2,
    Linf,
}

/// Midpoint quadrature of cellwise values, summed in storage order.
pub fn quadrature(grid: &Grid, values: impl Iterator<Item = f64>) -> f64 {
    values.sum::<f64>() * grid.cell_volume()
}

fn norm_of(grid: &Grid, mags: impl Iterator<Item = f64>, kind: NormKind) -> f64 {
    match kind {
        NormKind::L1 => quadrature(grid, mags.map(f64::abs)),
        NormKind::L2 => quadrature(grid, mags.map(|m| m * m)).sqrt(),
        NormKind::Linf => mags.fold(0.0, |acc, m| acc.max(m.abs())),
    }
}

fn check_values(what: &str, values: impl Iterator<Item = f64>) -> Result<()> {
    for (index, v) in values.enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                what: what.to_string(),
                index,
            });
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            data: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self {
            grid,
            data: vec![value; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> f64) -> Self {
        let data = (0..grid.len()).map(|i| f(grid.position(i))).collect();
        Self { grid, data }
    }

    pub fn from_vec(grid: Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "scalar data length {} for {} cells",
                data.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, data })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn integral(&self) -> f64 {
        quadrature(&self.grid, self.data.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn norm(&self, kind: NormKind) -> f64 {
        norm_of(&self.grid, self.data.iter().copied(), kind)
    }

    pub fn inner(&self, other: &ScalarField) -> f64 {
        quadrature(
            &self.grid,
            self.data.iter().zip(&other.data).map(|(a, b)| a * b),
        )
    }

    pub fn check_finite(&self, what: &str) -> Result<()> {
        check_values(what, self.data.iter().copied())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    pub grid: Grid,
    pub data: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            data: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> Complex64) -> Self {
        let data = (0..grid.len()).map(|i| f(grid.position(i))).collect();
        Self { grid, data }
    }

    pub fn from_real(f: &ScalarField) -> Self {
        Self {
            grid: f.grid,
            data: f.data.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            grid: self.grid,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn modulus_sq(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            data: self.data.iter().map(|z| z.norm_sqr()).collect(),
        }
    }

    pub fn re(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            data: self.data.iter().map(|z| z.re).collect(),
        }
    }

    pub fn im(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            data: self.data.iter().map(|z| z.im).collect(),
        }
    }

    pub fn norm(&self, kind: NormKind) -> f64 {
        norm_of(&self.grid, self.data.iter().map(|z| z.norm()), kind)
    }

    /// Real part of the L2 inner product `∫ conj(f) g`.
    pub fn inner(&self, other: &ComplexField) -> f64 {
        quadrature(
            &self.grid,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| (a.conj() * b).re),
        )
    }

    pub fn check_finite(&self, what: &str) -> Result<()> {
        check_values(what, self.data.iter().flat_map(|z| [z.re, z.im]))
    }
}

/// Three real components stored as separate planes.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField3 {
    pub grid: Grid,
    pub c: [Vec<f64>; 3],
}

impl VectorField3 {
    pub fn zeros(grid: Grid) -> Self {
        let z = vec![0.0; grid.len()];
        Self {
            grid,
            c: [z.clone(), z.clone(), z],
        }
    }

    pub fn constant(grid: Grid, v: [f64; 3]) -> Self {
        Self {
            grid,
            c: [
                vec![v[0]; grid.len()],
                vec![v[1]; grid.len()],
                vec![v[2]; grid.len()],
            ],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let mut out = Self::zeros(grid);
        for i in 0..grid.len() {
            let v = f(grid.position(i));
            for a in 0..3 {
                out.c[a][i] = v[a];
            }
        }
        out
    }

    pub fn from_components(x: ScalarField, y: ScalarField, z: ScalarField) -> Self {
        Self {
            grid: x.grid,
            c: [x.data, y.data, z.data],
        }
    }

    pub fn component(&self, axis: usize) -> ScalarField {
        ScalarField {
            grid: self.grid,
            data: self.c[axis].clone(),
        }
    }

    #[inline]
    pub fn at(&self, i: usize) -> [f64; 3] {
        [self.c[0][i], self.c[1][i], self.c[2][i]]
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: [f64; 3]) {
        self.c[0][i] = v[0];
        self.c[1][i] = v[1];
        self.c[2][i] = v[2];
    }

    pub fn magnitude_sq(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            data: (0..self.grid.len())
                .map(|i| self.c[0][i].powi(2) + self.c[1][i].powi(2) + self.c[2][i].powi(2))
                .collect(),
        }
    }

    pub fn add(&self, other: &VectorField3) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &VectorField3) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        for comp in out.c.iter_mut() {
            comp.iter_mut().for_each(|v| *v *= s);
        }
        out
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &VectorField3) {
        for a in 0..3 {
            for (x, y) in self.c[a].iter_mut().zip(&other.c[a]) {
                *x += s * y;
            }
        }
    }

    pub fn zip_map(&self, other: &VectorField3, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        let mut out = self.clone();
        for a in 0..3 {
            for (x, y) in out.c[a].iter_mut().zip(&other.c[a]) {
                *x = f(*x, *y);
            }
        }
        out
    }

    pub fn mean(&self) -> [f64; 3] {
        let n = self.grid.len() as f64;
        [
            self.c[0].iter().sum::<f64>() / n,
            self.c[1].iter().sum::<f64>() / n,
            self.c[2].iter().sum::<f64>() / n,
        ]
    }

    pub fn max_abs(&self) -> f64 {
        self.c
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Norm of the pointwise Euclidean magnitude.
    pub fn norm(&self, kind: NormKind) -> f64 {
        let mags = (0..self.grid.len())
            .map(|i| (self.c[0][i].powi(2) + self.c[1][i].powi(2) + self.c[2][i].powi(2)).sqrt());
        norm_of(&self.grid, mags, kind)
    }

    pub fn inner(&self, other: &VectorField3) -> f64 {
        quadrature(
            &self.grid,
            (0..self.grid.len()).map(|i| {
                self.c[0][i] * other.c[0][i]
                    + self.c[1][i] * other.c[1][i]
                    + self.c[2][i] * other.c[2][i]
            }),
        )
    }

    pub fn check_finite(&self, what: &str) -> Result<()> {
        check_values(what, self.c.iter().flat_map(|c| c.iter().copied()))
    }
}

#[inline]
pub fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
