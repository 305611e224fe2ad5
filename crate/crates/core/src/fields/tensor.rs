//! Minkowski tensor algebra with signature (-,+,+,+) and c = 1.

use serde::{Deserialize, Serialize};

use super::field::{ScalarField, VectorField3};
use super::grid::Grid;
use super::spectral::Ops;
use crate::error::{Error, Result};

/// Diagonal of the metric `g = diag(-1, 1, 1, 1)`.
pub const METRIC: [f64; 4] = [-1.0, 1.0, 1.0, 1.0];

pub type Mat4 = [[f64; 4]; 4];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IndexPosition {
    Covariant,
    Contravariant,
}

impl IndexPosition {
    pub fn flipped(self) -> Self {
        match self {
            IndexPosition::Covariant => IndexPosition::Contravariant,
            IndexPosition::Contravariant => IndexPosition::Covariant,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FourVectorField {
    pub t: ScalarField,
    pub s: VectorField3,
    pub position: IndexPosition,
}

impl FourVectorField {
    pub fn zeros(grid: Grid, position: IndexPosition) -> Self {
        Self {
            t: ScalarField::zeros(grid),
            s: VectorField3::zeros(grid),
            position,
        }
    }

    pub fn grid(&self) -> Grid {
        self.t.grid
    }

    #[inline]
    pub fn at(&self, i: usize) -> [f64; 4] {
        [self.t.data[i], self.s.c[0][i], self.s.c[1][i], self.s.c[2][i]]
    }

    pub fn component(&self, alpha: usize) -> ScalarField {
        if alpha == 0 {
            self.t.clone()
        } else {
            self.s.component(alpha - 1)
        }
    }

    /// Cellwise Minkowski contraction `g(self, other)`; both must share an
    /// index position.
    pub fn contract(&self, other: &FourVectorField) -> ScalarField {
        debug_assert_eq!(self.position, other.position);
        let g = self.grid();
        ScalarField {
            grid: g,
            data: (0..g.len())
                .map(|i| minkowski(self.at(i), other.at(i)))
                .collect(),
        }
    }
}

/// Flip index position: negate the time component, keep space components.
pub fn raise_lower(v: &FourVectorField) -> FourVectorField {
    FourVectorField {
        t: v.t.map(|x| -x),
        s: v.s.clone(),
        position: v.position.flipped(),
    }
}

/// `g_{ab} x^a y^b` for two vectors with the same index position.
#[inline]
pub fn minkowski(x: [f64; 4], y: [f64; 4]) -> f64 {
    -x[0] * y[0] + x[1] * y[1] + x[2] * y[2] + x[3] * y[3]
}

/// Covariant Faraday matrix: `F_{0i} = E_i`, `F_{ij} = -eps_{ijk} B_k`.
#[inline]
pub fn faraday_matrix(e: [f64; 3], b: [f64; 3]) -> Mat4 {
    [
        [0.0, e[0], e[1], e[2]],
        [-e[0], 0.0, -b[2], b[1]],
        [-e[1], b[2], 0.0, -b[0]],
        [-e[2], -b[1], b[0], 0.0],
    ]
}

/// Raise both indices of a covariant rank-2 tensor.
#[inline]
pub fn raise_both(f: &Mat4) -> Mat4 {
    let mut out = [[0.0; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            out[a][b] = METRIC[a] * METRIC[b] * f[a][b];
        }
    }
    out
}

/// `F_{mn} F^{mn}` for a covariant matrix.
#[inline]
pub fn faraday_invariant(f: &Mat4) -> f64 {
    let up = raise_both(f);
    let mut s = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            s += f[a][b] * up[a][b];
        }
    }
    s
}

/// `F_{a m} G_b^m = sum_m g^{mm} F_{am} G_{bm}`.
#[inline]
pub fn contract_second(f: &Mat4, g: &Mat4, a: usize, b: usize) -> f64 {
    let mut s = 0.0;
    for m in 0..4 {
        s += METRIC[m] * f[a][m] * g[b][m];
    }
    s
}

/// `F_{mn} G^{mn}`.
#[inline]
pub fn full_contract(f: &Mat4, g: &Mat4) -> f64 {
    let mut s = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            s += METRIC[a] * METRIC[b] * f[a][b] * g[a][b];
        }
    }
    s
}

/// Electromagnetic field stored as `(E, B)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FaradayField {
    pub e: VectorField3,
    pub b: VectorField3,
}

impl FaradayField {
    pub fn new(e: VectorField3, b: VectorField3) -> Result<Self> {
        e.grid.same_as(&b.grid, "faraday E/B")?;
        Ok(Self { e, b })
    }

    pub fn grid(&self) -> Grid {
        self.e.grid
    }

    pub fn pack(&self) -> Vec<Mat4> {
        (0..self.grid().len())
            .map(|i| faraday_matrix(self.e.at(i), self.b.at(i)))
            .collect()
    }

    pub fn unpack(grid: Grid, packed: &[Mat4]) -> Result<Self> {
        if packed.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} packed tensors for {} cells",
                packed.len(),
                grid.len()
            )));
        }
        let mut e = VectorField3::zeros(grid);
        let mut b = VectorField3::zeros(grid);
        for (i, f) in packed.iter().enumerate() {
            e.set(i, [f[0][1], f[0][2], f[0][3]]);
            b.set(i, [f[3][2], f[1][3], f[2][1]]);
        }
        Ok(Self { e, b })
    }

    /// `F_{mn} F^{mn}` per cell, by explicit contraction.
    pub fn scalar(&self) -> ScalarField {
        let g = self.grid();
        ScalarField {
            grid: g,
            data: (0..g.len())
                .map(|i| faraday_invariant(&faraday_matrix(self.e.at(i), self.b.at(i))))
                .collect(),
        }
    }
}

/// Convenience wrapper for [`FaradayField::pack`].
pub fn faraday_pack(e: &VectorField3, b: &VectorField3) -> Result<Vec<Mat4>> {
    Ok(FaradayField::new(e.clone(), b.clone())?.pack())
}

/// Map `(a, b)` with `a <= b` to one of 10 storage slots.
#[inline]
pub fn sym_slot(a: usize, b: usize) -> usize {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    match (a, b) {
        (0, 0) => 0,
        (0, 1) => 1,
        (0, 2) => 2,
        (0, 3) => 3,
        (1, 1) => 4,
        (1, 2) => 5,
        (1, 3) => 6,
        (2, 2) => 7,
        (2, 3) => 8,
        _ => 9,
    }
}

/// Symmetric covariant rank-2 field; 10 stored components per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct StressTensorField {
    pub grid: Grid,
    pub comps: [Vec<f64>; 10],
}

impl StressTensorField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            comps: std::array::from_fn(|_| vec![0.0; grid.len()]),
        }
    }

    #[inline]
    pub fn get(&self, cell: usize, a: usize, b: usize) -> f64 {
        self.comps[sym_slot(a, b)][cell]
    }

    /// Store the upper triangle of a symmetric cell matrix.
    #[inline]
    pub fn set_cell(&mut self, cell: usize, m: &Mat4) {
        for a in 0..4 {
            for b in a..4 {
                self.comps[sym_slot(a, b)][cell] = m[a][b];
            }
        }
    }

    pub fn cell(&self, cell: usize) -> Mat4 {
        let mut m = [[0.0; 4]; 4];
        for a in 0..4 {
            for b in 0..4 {
                m[a][b] = self.get(cell, a, b);
            }
        }
        m
    }

    pub fn component(&self, a: usize, b: usize) -> ScalarField {
        ScalarField {
            grid: self.grid,
            data: self.comps[sym_slot(a, b)].clone(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// `div_a T^a_b` on the middle snapshot of a uniformly spaced series.
///
/// Time derivatives are centered differences of the two neighbours.
pub fn divergence_residual(
    traj: &[StressTensorField],
    dt: f64,
    ops: &Ops,
) -> Result<FourVectorField> {
    if traj.len() < 3 {
        return Err(Error::InsufficientSnapshots {
            need: 3,
            got: traj.len(),
        });
    }
    let mid = traj.len() / 2;
    let (prev, cur, next) = (&traj[mid - 1], &traj[mid], &traj[mid + 1]);
    let grid = cur.grid;
    let mut out = FourVectorField::zeros(grid, IndexPosition::Covariant);
    for beta in 0..4 {
        let mut acc: Vec<f64> = (0..grid.len())
            .map(|i| -(next.get(i, 0, beta) - prev.get(i, 0, beta)) / (2.0 * dt))
            .collect();
        for axis in 0..3 {
            let d = ops.d(&cur.component(axis + 1, beta), axis);
            for (a, v) in acc.iter_mut().zip(&d.data) {
                *a += v;
            }
        }
        if beta == 0 {
            out.t.data = acc;
        } else {
            out.s.c[beta - 1] = acc;
        }
    }
    Ok(out)
}
