use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform periodic lattice on the box `[0, Lx) x [0, Ly) x [0, Lz)`.
///
/// Cells are addressed row-major: `idx = (i * ny + j) * nz + k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n: [usize; 3],
    l: [f64; 3],
}

impl Grid {
    pub fn new(n: [usize; 3], l: [f64; 3]) -> Result<Self> {
        for axis in 0..3 {
            if n[axis] == 0 {
                return Err(Error::InvalidGrid(format!("axis {axis} has zero points")));
            }
            if !(l[axis] > 0.0 && l[axis].is_finite()) {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis} has extent {}",
                    l[axis]
                )));
            }
        }
        let total = n[0]
            .checked_mul(n[1])
            .and_then(|v| v.checked_mul(n[2]))
            .and_then(|v| v.checked_mul(std::mem::size_of::<f64>() * 16));
        if total.is_none() || total.unwrap() > isize::MAX as usize {
            return Err(Error::InvalidGrid("cell count overflows memory".into()));
        }
        Ok(Self { n, l })
    }

    /// Quasi-1D grid `n x 1 x 1` on a box of side `l`.
    pub fn line(n: usize, l: f64) -> Result<Self> {
        Self::new([n, 1, 1], [l, l, l])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.n
    }

    pub fn extents(&self) -> [f64; 3] {
        self.l
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.l[axis] / self.n[axis] as f64
    }

    pub fn spacings(&self) -> [f64; 3] {
        [self.spacing(0), self.spacing(1), self.spacing(2)]
    }

    /// Smallest spacing over resolved axes (`N > 1`); falls back to all axes.
    pub fn min_spacing(&self) -> f64 {
        let resolved = (0..3)
            .filter(|&a| self.n[a] > 1)
            .map(|a| self.spacing(a))
            .fold(f64::INFINITY, f64::min);
        if resolved.is_finite() {
            resolved
        } else {
            self.spacings().into_iter().fold(f64::INFINITY, f64::min)
        }
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing(0) * self.spacing(1) * self.spacing(2)
    }

    pub fn volume(&self) -> f64 {
        self.l[0] * self.l[1] * self.l[2]
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n[1] + j) * self.n[2] + k
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let k = idx % self.n[2];
        let j = (idx / self.n[2]) % self.n[1];
        let i = idx / (self.n[1] * self.n[2]);
        [i, j, k]
    }

    /// Periodic wrap of a signed index along `axis`.
    #[inline]
    pub fn wrap(&self, i: isize, axis: usize) -> usize {
        i.rem_euclid(self.n[axis] as isize) as usize
    }

    /// Physical position of a cell (lattice point `i * dx`).
    #[inline]
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        [
            c[0] as f64 * self.spacing(0),
            c[1] as f64 * self.spacing(1),
            c[2] as f64 * self.spacing(2),
        ]
    }

    /// Stride between consecutive cells along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => self.n[1] * self.n[2],
            1 => self.n[2],
            _ => 1,
        }
    }

    pub fn same_as(&self, other: &Grid, what: &str) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{what}: {:?}/{:?} vs {:?}/{:?}",
                self.n, self.l, other.n, other.l
            )))
        }
    }
}
