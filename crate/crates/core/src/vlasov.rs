//! Weak-form check of the monokinetic Vlasov-Maxwell system on fluid
//! trajectories. The measure `rho delta(xi = U)` is pushed forward
//! analytically, so phase-space integrals become space-time quadrature with
//! `xi` replaced by the covariant fluid velocity.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::tensor::{faraday_matrix, raise_both};
use crate::fields::{FourVectorField, Grid, IndexPosition, ScalarField, VectorField3};
use crate::rem::{uniform_spacing, RemState};

pub type SpacetimeFn = Arc<dyn Fn(f64, [f64; 3]) -> f64 + Send + Sync>;
pub type SpacetimeGrad = Arc<dyn Fn(f64, [f64; 3]) -> [f64; 4] + Send + Sync>;
pub type PhaseFn = Arc<dyn Fn(f64, [f64; 3], [f64; 4]) -> f64 + Send + Sync>;
pub type PhaseGrad = Arc<dyn Fn(f64, [f64; 3], [f64; 4]) -> [f64; 4] + Send + Sync>;

/// `phi(t, x)` with its gradient `(d_t, d_x, d_y, d_z)`.
#[derive(Clone)]
pub struct SpacetimeTest {
    pub id: String,
    pub value: SpacetimeFn,
    pub grad: SpacetimeGrad,
}

/// `a(t, x, xi)` with `xi` covariant; `grad` is the space-time gradient at
/// fixed `xi`, `d_xi` the derivatives with respect to `xi_0..xi_3`.
#[derive(Clone)]
pub struct PhaseTest {
    pub id: String,
    pub value: PhaseFn,
    pub grad: PhaseGrad,
    pub d_xi: Option<PhaseGrad>,
}

#[derive(Clone)]
pub struct TestFunctionBank {
    pub maxwell: Vec<SpacetimeTest>,
    pub vlasov: Vec<PhaseTest>,
}

/// `sin(pi s)^(2m)` on `s = (t - t0)/(t1 - t0)` and its time derivative.
fn window(m: u32, t0: f64, t1: f64) -> impl Fn(f64) -> (f64, f64) + Clone + Send + Sync {
    let span = t1 - t0;
    move |t| {
        let th = PI * (t - t0) / span;
        let (s, c) = th.sin_cos();
        let p = 2 * m as i32;
        (s.powi(p), p as f64 * s.powi(p - 1) * c * PI / span)
    }
}

/// `cos(2 pi k.x/L + shift)` and its spatial gradient.
fn mode(k: [i32; 3], shift: f64, l: [f64; 3]) -> impl Fn([f64; 3]) -> (f64, [f64; 3]) + Clone + Send + Sync {
    let w: [f64; 3] = std::array::from_fn(|a| 2.0 * PI * k[a] as f64 / l[a]);
    move |x| {
        let arg = w[0] * x[0] + w[1] * x[1] + w[2] * x[2] + shift;
        let (s, c) = arg.sin_cos();
        (c, [-s * w[0], -s * w[1], -s * w[2]])
    }
}

/// Polynomial in covariant `xi`: `1`, `xi_a` or `xi_a xi_b`.
#[derive(Clone, Copy, Debug)]
enum XiPoly {
    One,
    Lin(usize),
    Quad(usize, usize),
}

impl XiPoly {
    fn value(self, xi: [f64; 4]) -> f64 {
        match self {
            XiPoly::One => 1.0,
            XiPoly::Lin(a) => xi[a],
            XiPoly::Quad(a, b) => xi[a] * xi[b],
        }
    }

    fn grad(self, xi: [f64; 4]) -> [f64; 4] {
        let mut g = [0.0; 4];
        match self {
            XiPoly::One => {}
            XiPoly::Lin(a) => g[a] = 1.0,
            XiPoly::Quad(a, b) => {
                g[a] += xi[b];
                g[b] += xi[a];
            }
        }
        g
    }

    fn label(self) -> String {
        match self {
            XiPoly::One => "1".into(),
            XiPoly::Lin(a) => format!("xi{a}"),
            XiPoly::Quad(a, b) => format!("xi{a}xi{b}"),
        }
    }
}

pub fn spacetime_test(id: &str, m: u32, k: [i32; 3], shift: f64, t0: f64, t1: f64, l: [f64; 3]) -> SpacetimeTest {
    let w = window(m, t0, t1);
    let c = mode(k, shift, l);
    let (w2, c2) = (w.clone(), c.clone());
    SpacetimeTest {
        id: id.into(),
        value: Arc::new(move |t, x| w(t).0 * c(x).0),
        grad: Arc::new(move |t, x| {
            let (p, dp) = w2(t);
            let (v, g) = c2(x);
            [dp * v, p * g[0], p * g[1], p * g[2]]
        }),
    }
}

fn phase_test(id: &str, m: u32, k: [i32; 3], shift: f64, poly: XiPoly, t0: f64, t1: f64, l: [f64; 3]) -> PhaseTest {
    let base = spacetime_test(id, m, k, shift, t0, t1, l);
    let (v, g) = (base.value.clone(), base.grad.clone());
    let v2 = base.value.clone();
    PhaseTest {
        id: format!("{id}-{}", poly.label()),
        value: Arc::new(move |t, x, xi| v(t, x) * poly.value(xi)),
        grad: Arc::new(move |t, x, xi| {
            let d = g(t, x);
            let p = poly.value(xi);
            [d[0] * p, d[1] * p, d[2] * p, d[3] * p]
        }),
        d_xi: Some(Arc::new(move |t, x, xi| {
            let f = v2(t, x);
            let d = poly.grad(xi);
            [f * d[0], f * d[1], f * d[2], f * d[3]]
        })),
    }
}

impl TestFunctionBank {
    /// Eight functions of each kind on the window `[t0, t1]`: time factors
    /// `sin^(2m)`, single cosine modes in space and (for the Vlasov kind)
    /// polynomials of degree at most two in `xi`. Wavenumbers the grid
    /// cannot integrate exactly (`2|k| >= n` on an axis) are set to zero.
    pub fn standard(t0: f64, t1: f64, grid: &Grid) -> Self {
        let l = grid.extents();
        let n = grid.dims();
        let specs: [(u32, [i32; 3], f64); 8] = [
            (1, [0, 0, 0], 0.0),
            (1, [1, 0, 0], 0.0),
            (1, [1, 0, 0], 0.5 * PI),
            (2, [2, 0, 0], 0.3),
            (2, [0, 1, 0], 0.0),
            (1, [0, 0, 1], 0.7),
            (2, [1, 1, 0], 0.0),
            (3, [1, 0, 1], 1.1),
        ]
        .map(|(m, k, s): (u32, [i32; 3], f64)| {
            let k = std::array::from_fn(|a| if 2 * k[a].unsigned_abs() as usize >= n[a] { 0 } else { k[a] });
            (m, k, s)
        });
        let maxwell = specs
            .iter()
            .enumerate()
            .map(|(n, &(m, k, s))| spacetime_test(&format!("m{n}"), m, k, s, t0, t1, l))
            .collect();
        let polys = [
            XiPoly::One,
            XiPoly::Lin(1),
            XiPoly::Lin(2),
            XiPoly::Lin(3),
            XiPoly::Lin(0),
            XiPoly::Quad(1, 1),
            XiPoly::Quad(0, 1),
            XiPoly::Quad(2, 3),
        ];
        let vlasov = specs
            .iter()
            .zip(polys)
            .enumerate()
            .map(|(n, (&(m, k, s), p))| phase_test(&format!("v{n}"), m, k, s, p, t0, t1, l))
            .collect();
        Self { maxwell, vlasov }
    }
}

fn check_traj(traj: &[RemState]) -> Result<f64> {
    if traj.len() < 3 {
        return Err(Error::InsufficientSnapshots {
            need: 3,
            got: traj.len(),
        });
    }
    let times: Vec<f64> = traj.iter().map(|s| s.t).collect();
    uniform_spacing(&times)
}

/// Trapezoid weights in time; the test functions vanish at both ends.
fn time_weight(n: usize, len: usize, dt: f64) -> f64 {
    if n == 0 || n + 1 == len {
        0.5 * dt
    } else {
        dt
    }
}

/// `max_beta | -int F^{a beta} d_a phi - int J^beta phi |` with
/// `J = (U^0 rho - <U^0 rho>, u rho)`.
pub fn weak_maxwell_residual(traj: &[RemState], phi: &SpacetimeTest) -> Result<f64> {
    let dt = check_traj(traj)?;
    let mut r = [0.0f64; 4];
    for (n, s) in traj.iter().enumerate() {
        let g = s.grid();
        let u0 = s.u0();
        let qm = s.charge_density().mean();
        let w = time_weight(n, traj.len(), dt) * g.cell_volume();
        for c in 0..g.len() {
            let x = g.position(c);
            let d = (phi.grad)(s.t, x);
            let v = (phi.value)(s.t, x);
            let e = s.e.at(c);
            let b = s.b.at(c);
            // Contravariant F: F^{0i} = -E_i, F^{ij} = -eps_ijk B_k.
            let fu = raise_both(&faraday_matrix(e, b));
            let src = [
                u0.data[c] * s.rho.data[c] - qm,
                s.u.c[0][c] * s.rho.data[c],
                s.u.c[1][c] * s.rho.data[c],
                s.u.c[2][c] * s.rho.data[c],
            ];
            for beta in 0..4 {
                let flux: f64 = (0..4).map(|a| fu[a][beta] * d[a]).sum();
                r[beta] += w * (-flux - src[beta] * v);
            }
        }
    }
    Ok(r.iter().fold(0.0, |m, v| m.max(v.abs())))
}

/// `| int rho [U^a d_a a + F_{ab} U^a da/dxi_b] |` at `xi = U` (covariant).
pub fn weak_vlasov_residual(traj: &[RemState], a: &PhaseTest) -> Result<f64> {
    let dt = check_traj(traj)?;
    let d_xi = a.d_xi.as_ref().ok_or_else(|| Error::MissingDerivative(a.id.clone()))?;
    let mut total = 0.0;
    for (n, s) in traj.iter().enumerate() {
        let g = s.grid();
        let u0 = s.u0();
        let w = time_weight(n, traj.len(), dt) * g.cell_volume();
        for c in 0..g.len() {
            let r = s.rho.data[c];
            if r == 0.0 {
                continue;
            }
            let x = g.position(c);
            let up = [u0.data[c], s.u.c[0][c], s.u.c[1][c], s.u.c[2][c]];
            let xi = [-up[0], up[1], up[2], up[3]];
            let d = (a.grad)(s.t, x, xi);
            let dx = d_xi(s.t, x, xi);
            let f = faraday_matrix(s.e.at(c), s.b.at(c));
            let transport: f64 = (0..4).map(|al| up[al] * d[al]).sum();
            let mut force = 0.0;
            for al in 0..4 {
                for be in 0..4 {
                    force += f[al][be] * up[al] * dx[be];
                }
            }
            total += w * r * (transport + force);
        }
    }
    Ok(total.abs())
}

/// Covariant `rho U` and `rho` per snapshot, assembled exactly as in the
/// fluid observables.
pub fn moments(traj: &[RemState]) -> Vec<(FourVectorField, ScalarField)> {
    traj.iter()
        .map(|s| {
            let g = s.grid();
            let u0 = s.u0();
            let mut j = FourVectorField::zeros(g, IndexPosition::Covariant);
            for i in 0..g.len() {
                let r = s.rho.data[i];
                j.t.data[i] = -u0.data[i] * r;
                for a in 0..3 {
                    j.s.c[a][i] = s.u.c[a][i] * r;
                }
            }
            (j, s.rho.clone())
        })
        .collect()
}

/// Max of `|xi.xi + 1|` over cells with `rho > 0`.
pub fn mass_shell_residual(s: &RemState) -> f64 {
    let u0 = s.u0();
    (0..s.grid().len())
        .filter(|&c| s.rho.data[c] > 0.0)
        .map(|c| {
            let u = s.u.at(c);
            (-u0.data[c] * u0.data[c] + u[0] * u[0] + u[1] * u[1] + u[2] * u[2] + 1.0).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ResidualRow {
    pub test_id: String,
    pub kind: &'static str,
    pub residual: f64,
}

/// Evaluate every bank entry on the trajectory (in parallel).
pub fn residual_table(traj: &[RemState], bank: &TestFunctionBank) -> Result<Vec<ResidualRow>> {
    let mut rows: Vec<ResidualRow> = bank
        .maxwell
        .par_iter()
        .map(|f| {
            Ok(ResidualRow {
                test_id: f.id.clone(),
                kind: "maxwell",
                residual: weak_maxwell_residual(traj, f)?,
            })
        })
        .collect::<Result<_>>()?;
    let v: Vec<ResidualRow> = bank
        .vlasov
        .par_iter()
        .map(|f| {
            Ok(ResidualRow {
                test_id: f.id.clone(),
                kind: "vlasov",
                residual: weak_vlasov_residual(traj, f)?,
            })
        })
        .collect::<Result<_>>()?;
    rows.extend(v);
    Ok(rows)
}

pub fn write_residual_csv(path: &Path, rows: &[ResidualRow], grid: &Grid, dt: f64) -> Result<()> {
    if let Some(p) = path.parent() {
        std::fs::create_dir_all(p).map_err(|e| Error::io(p, e))?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let n = grid.dims();
    let mut out = String::from("test_id,kind,residual,grid,dt\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.17e},{}x{}x{},{:.17e}\n",
            r.test_id, r.kind, r.residual, n[0], n[1], n[2], dt
        ));
    }
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Exact static solution: fluid at rest, uniform density, no electric field,
/// uniform magnetic field, sampled at `count` uniform times on `[t0, t1]`.
pub fn static_trajectory(grid: Grid, rho0: f64, b0: [f64; 3], t0: f64, t1: f64, count: usize) -> Vec<RemState> {
    let n = count.max(2);
    (0..n)
        .map(|i| RemState {
            u: VectorField3::zeros(grid),
            rho: ScalarField::constant(grid, rho0),
            e: VectorField3::zeros(grid),
            b: VectorField3::constant(grid, b0),
            t: t0 + (t1 - t0) * i as f64 / (n - 1) as f64,
        })
        .collect()
}
