use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::field::{ComplexField, ScalarField, VectorField3};
use super::grid::Grid;
use crate::error::{Error, Result};

/// Derivative discretization. All three are applied as Fourier multipliers,
/// so the finite-difference stencils act exactly as their periodic
/// convolution counterparts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Spectral,
    Fd2,
    Fd4,
}

impl Backend {
    /// Nominal order of accuracy (`None` for spectral).
    pub fn order(&self) -> Option<u32> {
        match self {
            Backend::Spectral => None,
            Backend::Fd2 => Some(2),
            Backend::Fd4 => Some(4),
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Spectral => "spectral",
            Backend::Fd2 => "fd2",
            Backend::Fd4 => "fd4",
        })
    }
}

impl FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "spectral" => Ok(Backend::Spectral),
            "fd2" => Ok(Backend::Fd2),
            "fd4" => Ok(Backend::Fd4),
            other => Err(Error::InvalidConfig(format!("unknown backend '{other}'"))),
        }
    }
}

/// Signed wavenumber of Fourier index `m` on an axis with `n` points.
fn wavenumber(m: usize, n: usize, l: f64) -> f64 {
    let ms = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
    2.0 * PI * ms / l
}

fn first_symbol(backend: Backend, m: usize, n: usize, l: f64) -> f64 {
    if n == 1 {
        return 0.0;
    }
    let k = wavenumber(m, n, l);
    let h = l / n as f64;
    match backend {
        Backend::Spectral => {
            if n % 2 == 0 && m == n / 2 {
                0.0
            } else {
                k
            }
        }
        Backend::Fd2 => (k * h).sin() / h,
        Backend::Fd4 => (8.0 * (k * h).sin() - (2.0 * k * h).sin()) / (6.0 * h),
    }
}

fn second_symbol(backend: Backend, m: usize, n: usize, l: f64) -> f64 {
    if n == 1 {
        return 0.0;
    }
    let k = wavenumber(m, n, l);
    let h = l / n as f64;
    match backend {
        Backend::Spectral => -k * k,
        Backend::Fd2 => -(2.0 - 2.0 * (k * h).cos()) / (h * h),
        Backend::Fd4 => {
            (-2.0 * (2.0 * k * h).cos() + 32.0 * (k * h).cos() - 30.0) / (12.0 * h * h)
        }
    }
}

/// Differential operators on one grid with one backend.
///
/// Holds FFT plans and per-axis Fourier symbols; cheap to share across threads.
#[derive(Clone)]
pub struct Ops {
    grid: Grid,
    backend: Backend,
    sym: [Vec<f64>; 3],
    lap: [Vec<f64>; 3],
    fwd: [Arc<dyn Fft<f64>>; 3],
    inv: [Arc<dyn Fft<f64>>; 3],
}

impl fmt::Debug for Ops {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Ops")
            .field("grid", &self.grid)
            .field("backend", &self.backend)
            .finish()
    }
}

impl Ops {
    pub fn new(grid: Grid, backend: Backend) -> Self {
        let mut planner = FftPlanner::new();
        let n = grid.dims();
        let l = grid.extents();
        let sym = [0, 1, 2].map(|a| {
            (0..n[a])
                .map(|m| first_symbol(backend, m, n[a], l[a]))
                .collect()
        });
        let lap = [0, 1, 2].map(|a| {
            (0..n[a])
                .map(|m| second_symbol(backend, m, n[a], l[a]))
                .collect()
        });
        let fwd = [0, 1, 2].map(|a| planner.plan_fft_forward(n[a]));
        let inv = [0, 1, 2].map(|a| planner.plan_fft_inverse(n[a]));
        Self {
            grid,
            backend,
            sym,
            lap,
            fwd,
            inv,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    /// First-derivative symbol along `axis` at Fourier index `m`.
    pub fn symbol(&self, axis: usize, m: usize) -> f64 {
        self.sym[axis][m]
    }

    /// Largest first-derivative symbol magnitude summed in quadrature over axes.
    pub fn max_symbol_norm(&self) -> f64 {
        self.sym
            .iter()
            .map(|s| s.iter().fold(0.0f64, |a, v| a.max(v.abs())).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Run a 1D transform along every line of `axis`.
    fn transform_axis(&self, data: &mut [Complex64], axis: usize, forward: bool) {
        let n = self.grid.dims();
        if n[axis] == 1 {
            return;
        }
        let plan = if forward {
            &self.fwd[axis]
        } else {
            &self.inv[axis]
        };
        let stride = self.grid.stride(axis);
        let len = n[axis];
        if stride == 1 {
            for line in data.chunks_mut(len) {
                plan.process(line);
            }
            return;
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        for start in self.line_starts(axis) {
            for (m, b) in buf.iter_mut().enumerate() {
                *b = data[start + m * stride];
            }
            plan.process(&mut buf);
            for (m, b) in buf.iter().enumerate() {
                data[start + m * stride] = *b;
            }
        }
    }

    fn line_starts(&self, axis: usize) -> Vec<usize> {
        let [nx, ny, nz] = self.grid.dims();
        let mut starts = Vec::new();
        match axis {
            0 => {
                for j in 0..ny {
                    for k in 0..nz {
                        starts.push(self.grid.index(0, j, k));
                    }
                }
            }
            1 => {
                for i in 0..nx {
                    for k in 0..nz {
                        starts.push(self.grid.index(i, 0, k));
                    }
                }
            }
            _ => {
                for i in 0..nx {
                    for j in 0..ny {
                        starts.push(self.grid.index(i, j, 0));
                    }
                }
            }
        }
        starts
    }

    /// In-place forward 3D DFT (unnormalized).
    pub fn fft3(&self, data: &mut [Complex64]) {
        for axis in 0..3 {
            self.transform_axis(data, axis, true);
        }
    }

    /// In-place inverse 3D DFT, normalized so `ifft3(fft3(x)) = x`.
    pub fn ifft3(&self, data: &mut [Complex64]) {
        for axis in 0..3 {
            self.transform_axis(data, axis, false);
        }
        let s = 1.0 / self.grid.len() as f64;
        data.iter_mut().for_each(|z| *z *= s);
    }

    /// Apply a multiplier along one axis: `data <- F⁻¹ (mult(m) F data)`.
    fn apply_axis(&self, data: &mut [Complex64], axis: usize, mult: impl Fn(usize) -> Complex64) {
        let n = self.grid.dims();
        let stride = self.grid.stride(axis);
        let len = n[axis];
        let fwd = &self.fwd[axis];
        let inv = &self.inv[axis];
        let scale = 1.0 / len as f64;
        let mults: Vec<Complex64> = (0..len).map(|m| mult(m) * scale).collect();
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        for start in self.line_starts(axis) {
            for (m, b) in buf.iter_mut().enumerate() {
                *b = data[start + m * stride];
            }
            fwd.process(&mut buf);
            for (b, w) in buf.iter_mut().zip(&mults) {
                *b *= w;
            }
            inv.process(&mut buf);
            for (m, b) in buf.iter().enumerate() {
                data[start + m * stride] = *b;
            }
        }
    }

    fn to_complex(f: &[f64]) -> Vec<Complex64> {
        f.iter().map(|&v| Complex64::new(v, 0.0)).collect()
    }

    fn deriv_raw(&self, data: &mut [Complex64], axis: usize) {
        if self.grid.dims()[axis] == 1 {
            data.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            return;
        }
        let sym = &self.sym[axis];
        self.apply_axis(data, axis, |m| Complex64::new(0.0, sym[m]));
    }

    pub fn d(&self, f: &ScalarField, axis: usize) -> ScalarField {
        let mut buf = Self::to_complex(&f.data);
        self.deriv_raw(&mut buf, axis);
        ScalarField {
            grid: f.grid,
            data: buf.into_iter().map(|z| z.re).collect(),
        }
    }

    pub fn d_complex(&self, f: &ComplexField, axis: usize) -> ComplexField {
        let mut buf = f.data.clone();
        self.deriv_raw(&mut buf, axis);
        ComplexField {
            grid: f.grid,
            data: buf,
        }
    }

    pub fn grad(&self, f: &ScalarField) -> VectorField3 {
        VectorField3::from_components(self.d(f, 0), self.d(f, 1), self.d(f, 2))
    }

    pub fn div(&self, v: &VectorField3) -> ScalarField {
        let mut out = ScalarField::zeros(v.grid);
        for a in 0..3 {
            let da = self.d(&v.component(a), a);
            for (o, x) in out.data.iter_mut().zip(&da.data) {
                *o += x;
            }
        }
        out
    }

    pub fn curl(&self, v: &VectorField3) -> VectorField3 {
        let d = |comp: usize, axis: usize| self.d(&v.component(comp), axis).data;
        let (d1v2, d2v1) = (d(2, 1), d(1, 2));
        let (d2v0, d0v2) = (d(0, 2), d(2, 0));
        let (d0v1, d1v0) = (d(1, 0), d(0, 1));
        let mut out = VectorField3::zeros(v.grid);
        for i in 0..v.grid.len() {
            out.c[0][i] = d1v2[i] - d2v1[i];
            out.c[1][i] = d2v0[i] - d0v2[i];
            out.c[2][i] = d0v1[i] - d1v0[i];
        }
        out
    }

    fn laplacian_raw(&self, data: &mut [Complex64]) {
        let mut total = vec![Complex64::new(0.0, 0.0); data.len()];
        for axis in 0..3 {
            if self.grid.dims()[axis] == 1 {
                continue;
            }
            let mut buf = data.to_vec();
            let lap = &self.lap[axis];
            self.apply_axis(&mut buf, axis, |m| Complex64::new(lap[m], 0.0));
            for (t, b) in total.iter_mut().zip(&buf) {
                *t += b;
            }
        }
        data.copy_from_slice(&total);
    }

    pub fn laplacian(&self, f: &ScalarField) -> ScalarField {
        let mut buf = Self::to_complex(&f.data);
        self.laplacian_raw(&mut buf);
        ScalarField {
            grid: f.grid,
            data: buf.into_iter().map(|z| z.re).collect(),
        }
    }

    pub fn laplacian_complex(&self, f: &ComplexField) -> ComplexField {
        let mut buf = f.data.clone();
        self.laplacian_raw(&mut buf);
        ComplexField {
            grid: f.grid,
            data: buf,
        }
    }

    /// Visit every Fourier mode with its index and per-axis symbols.
    fn for_modes(&self, mut f: impl FnMut(usize, [usize; 3])) {
        for idx in 0..self.grid.len() {
            f(idx, self.grid.coords(idx));
        }
    }

    fn total_lap_symbol(&self, m: [usize; 3]) -> f64 {
        self.lap[0][m[0]] + self.lap[1][m[1]] + self.lap[2][m[2]]
    }

    fn svec(&self, m: [usize; 3]) -> [f64; 3] {
        [self.sym[0][m[0]], self.sym[1][m[1]], self.sym[2][m[2]]]
    }

    /// Solve `laplacian(phi) = s` for zero-mean `phi`.
    ///
    /// The source mean must vanish to `1e-10` relative to `max|s|`.
    pub fn poisson(&self, s: &ScalarField) -> Result<ScalarField> {
        let mean = s.mean();
        let tol = 1e-10 * s.max_abs().max(f64::MIN_POSITIVE);
        if mean.abs() > tol {
            return Err(Error::NonzeroMean { mean, tol });
        }
        let mut buf = Self::to_complex(&s.data);
        self.fft3(&mut buf);
        self.for_modes(|idx, m| {
            let lap = self.total_lap_symbol(m);
            if idx == 0 || lap == 0.0 {
                buf[idx] = Complex64::new(0.0, 0.0);
            } else {
                buf[idx] /= lap;
            }
        });
        self.ifft3(&mut buf);
        Ok(ScalarField {
            grid: s.grid,
            data: buf.into_iter().map(|z| z.re).collect(),
        })
    }

    fn vec_hat(&self, v: &VectorField3) -> [Vec<Complex64>; 3] {
        [0, 1, 2].map(|a| {
            let mut b = Self::to_complex(&v.c[a]);
            self.fft3(&mut b);
            b
        })
    }

    fn vec_from_hat(&self, mut h: [Vec<Complex64>; 3]) -> VectorField3 {
        let mut out = VectorField3::zeros(self.grid);
        for a in 0..3 {
            self.ifft3(&mut h[a]);
            out.c[a] = h[a].iter().map(|z| z.re).collect();
        }
        out
    }

    /// Split `v` into curl-free and divergence-free parts.
    ///
    /// The projector uses the first-derivative symbol vector `s`; the mean
    /// mode and any mode with `s = 0` go to the divergence-free part.
    pub fn helmholtz(&self, v: &VectorField3) -> (VectorField3, VectorField3) {
        let h = self.vec_hat(v);
        let mut cf = [0, 1, 2].map(|_| vec![Complex64::new(0.0, 0.0); self.grid.len()]);
        self.for_modes(|idx, m| {
            let s = self.svec(m);
            let s2 = s[0] * s[0] + s[1] * s[1] + s[2] * s[2];
            if s2 > 0.0 {
                let proj = (s[0] * h[0][idx] + s[1] * h[1][idx] + s[2] * h[2][idx]) / s2;
                for a in 0..3 {
                    cf[a][idx] = proj * s[a];
                }
            }
        });
        let curl_free = self.vec_from_hat(cf);
        let div_free = v.sub(&curl_free);
        (curl_free, div_free)
    }

    /// Curl-free field `E = grad psi` with `div E = q` (q zero-mean up to
    /// modes the backend cannot represent).
    pub fn curl_free_with_divergence(&self, q: &ScalarField) -> VectorField3 {
        let mut qh = Self::to_complex(&q.data);
        self.fft3(&mut qh);
        let mut out = [0, 1, 2].map(|_| vec![Complex64::new(0.0, 0.0); self.grid.len()]);
        self.for_modes(|idx, m| {
            let s = self.svec(m);
            let s2 = s[0] * s[0] + s[1] * s[1] + s[2] * s[2];
            if s2 > 0.0 {
                let f = qh[idx] * Complex64::new(0.0, -1.0) / s2;
                for a in 0..3 {
                    out[a][idx] = f * s[a];
                }
            }
        });
        self.vec_from_hat(out)
    }

    /// Divergence-free `A` with `-curl A = B` (B divergence-free, zero mean).
    pub fn vector_potential(&self, b: &VectorField3) -> VectorField3 {
        let bh = self.vec_hat(b);
        let mut out = [0, 1, 2].map(|_| vec![Complex64::new(0.0, 0.0); self.grid.len()]);
        self.for_modes(|idx, m| {
            let s = self.svec(m);
            let s2 = s[0] * s[0] + s[1] * s[1] + s[2] * s[2];
            if s2 > 0.0 {
                let bv = [bh[0][idx], bh[1][idx], bh[2][idx]];
                let c = [
                    s[1] * bv[2] - s[2] * bv[1],
                    s[2] * bv[0] - s[0] * bv[2],
                    s[0] * bv[1] - s[1] * bv[0],
                ];
                for a in 0..3 {
                    out[a][idx] = c[a] * Complex64::new(0.0, -1.0) / s2;
                }
            }
        });
        self.vec_from_hat(out)
    }

    /// Exact flow of `dE/dt = curl B, dB/dt = -curl E` over time `dt`,
    /// with the curl given by this backend's symbols.
    pub fn maxwell_rotate(&self, e: &mut VectorField3, b: &mut VectorField3, dt: f64) {
        let eh = self.vec_hat(e);
        let bh = self.vec_hat(b);
        let mut eo = [0, 1, 2].map(|_| vec![Complex64::new(0.0, 0.0); self.grid.len()]);
        let mut bo = eo.clone();
        let i = Complex64::new(0.0, 1.0);
        self.for_modes(|idx, m| {
            let s = self.svec(m);
            let s2 = s[0] * s[0] + s[1] * s[1] + s[2] * s[2];
            let ev = [eh[0][idx], eh[1][idx], eh[2][idx]];
            let bv = [bh[0][idx], bh[1][idx], bh[2][idx]];
            if s2 == 0.0 {
                for a in 0..3 {
                    eo[a][idx] = ev[a];
                    bo[a][idx] = bv[a];
                }
                return;
            }
            let w = s2.sqrt();
            let (c, sn) = ((w * dt).cos(), (w * dt).sin());
            let el = (s[0] * ev[0] + s[1] * ev[1] + s[2] * ev[2]) / s2;
            let bl = (s[0] * bv[0] + s[1] * bv[1] + s[2] * bv[2]) / s2;
            let sxb = [
                s[1] * bv[2] - s[2] * bv[1],
                s[2] * bv[0] - s[0] * bv[2],
                s[0] * bv[1] - s[1] * bv[0],
            ];
            let sxe = [
                s[1] * ev[2] - s[2] * ev[1],
                s[2] * ev[0] - s[0] * ev[2],
                s[0] * ev[1] - s[1] * ev[0],
            ];
            for a in 0..3 {
                let e_l = el * s[a];
                let b_l = bl * s[a];
                eo[a][idx] = e_l + (ev[a] - e_l) * c + i * sxb[a] * (sn / w);
                bo[a][idx] = b_l + (bv[a] - b_l) * c - i * sxe[a] * (sn / w);
            }
        });
        *e = self.vec_from_hat(eo);
        *b = self.vec_from_hat(bo);
    }

    /// Exponential filter `exp(-strength (|m|/(N/2))^order)` per resolved axis.
    pub fn filter_weights(&self, strength: f64, order: i32) -> Vec<f64> {
        let n = self.grid.dims();
        let axis_w = |a: usize, m: usize| -> f64 {
            if n[a] == 1 {
                return 1.0;
            }
            let ms = if m <= n[a] / 2 { m } else { n[a] - m } as f64;
            let x = ms / (n[a] as f64 / 2.0);
            (-strength * x.powi(order)).exp()
        };
        (0..self.grid.len())
            .map(|idx| {
                let m = self.grid.coords(idx);
                axis_w(0, m[0]) * axis_w(1, m[1]) * axis_w(2, m[2])
            })
            .collect()
    }

    /// Multiply the spectrum of `data` by `weights`.
    pub fn apply_weights(&self, data: &mut [f64], weights: &[f64]) {
        let mut buf = Self::to_complex(data);
        self.fft3(&mut buf);
        for (b, w) in buf.iter_mut().zip(weights) {
            *b *= *w;
        }
        self.ifft3(&mut buf);
        for (d, b) in data.iter_mut().zip(&buf) {
            *d = b.re;
        }
    }
}
