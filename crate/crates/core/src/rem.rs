//! Relativistic Euler-Maxwell: a pressureless charged fluid coupled to
//! Maxwell, with flow-line, wave-equation and ellipticity diagnostics.
//!
//! The fluid is carried as contravariant spatial velocity `u` with
//! `U^0 = sqrt(1 + |u|^2)` and density `rho`; the conserved charge is
//! `q = U^0 rho`. Gauss reads `div E = q - <q>`.
//!
//! Time stepping is Strang splitting: half a step of the fluid plus current
//! coupling (`B` frozen), an exact Fourier step of vacuum Maxwell, then the
//! second half. Both pieces preserve `div E - q` and `div B` exactly.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fields::snapshot::{deinterleave, interleave, FieldKind, Snapshot};
use crate::fields::tensor::{contract_second, faraday_invariant, faraday_matrix, METRIC};
use crate::fields::{
    cross, gauss_residual, quadrature, FourVectorField, Grid, IndexPosition, NormKind, Ops,
    ScalarField, StressTensorField, VectorField3,
};

#[derive(Clone, Debug, PartialEq)]
pub struct RemState {
    pub u: VectorField3,
    pub rho: ScalarField,
    pub e: VectorField3,
    pub b: VectorField3,
    pub t: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Transport {
    /// Backend derivatives in advective form, RK4, exponential filter.
    Spectral,
    /// First-order upwind fluxes with SSP-RK3; keeps `rho >= 0`.
    Upwind,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RemParams {
    pub c_cfl: f64,
    pub transport: Transport,
    /// `(strength, order)` of `exp(-strength (k/k_max)^order)`, applied to
    /// every field after each step in spectral transport.
    pub filter: Option<(f64, i32)>,
    /// Abort when `max |grad u| * dx` exceeds this.
    pub shock_threshold: f64,
}

impl Default for RemParams {
    fn default() -> Self {
        Self {
            c_cfl: 0.5,
            transport: Transport::Spectral,
            filter: Some((36.0, 36)),
            shock_threshold: 0.5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RemObservables {
    /// Covariant `rho U`.
    pub j: FourVectorField,
    pub energy: f64,
    pub charge: f64,
    pub gauss_residual: f64,
    pub div_b_residual: f64,
    pub normalization_residual: f64,
    pub max_grad_u: f64,
}

impl RemState {
    pub fn grid(&self) -> Grid {
        self.rho.grid
    }

    /// `U^0 = sqrt(1 + |u|^2)` per cell.
    pub fn u0(&self) -> ScalarField {
        lorentz(&self.u)
    }

    /// Charge density `U^0 rho`.
    pub fn charge_density(&self) -> ScalarField {
        self.u0().zip_map(&self.rho, |a, r| a * r)
    }

    pub fn to_snapshot(&self, name: &str) -> Snapshot {
        Snapshot {
            kind: FieldKind::RemState,
            grid: self.grid(),
            time: self.t,
            epsilon: 0.0,
            name: name.into(),
            payload: interleave(&[
                &self.u.c[0], &self.u.c[1], &self.u.c[2], &self.rho.data, &self.e.c[0],
                &self.e.c[1], &self.e.c[2], &self.b.c[0], &self.b.c[1], &self.b.c[2],
            ]),
        }
    }

    pub fn from_snapshot(s: &Snapshot) -> Result<Self> {
        s.expect_kind(FieldKind::RemState, Path::new(&s.name))?;
        let mut p = deinterleave(&s.payload, 10).into_iter();
        let mut next = || p.next().unwrap();
        let g = s.grid;
        let u = VectorField3 {
            grid: g,
            c: [next(), next(), next()],
        };
        let rho = ScalarField { grid: g, data: next() };
        let e = VectorField3 {
            grid: g,
            c: [next(), next(), next()],
        };
        let b = VectorField3 {
            grid: g,
            c: [next(), next(), next()],
        };
        Ok(Self {
            u,
            rho,
            e,
            b,
            t: s.time,
        })
    }
}

pub fn lorentz(u: &VectorField3) -> ScalarField {
    let m = u.magnitude_sq();
    m.map(|x| (1.0 + x).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RemInitReport {
    pub gauss_residual: f64,
    pub div_b_residual: f64,
}

pub fn rem_init(
    u0: VectorField3,
    rho0: ScalarField,
    e0: VectorField3,
    b0: VectorField3,
    ops: &Ops,
) -> Result<(RemState, RemInitReport)> {
    let g = rho0.grid;
    u0.grid.same_as(&g, "u")?;
    e0.grid.same_as(&g, "E")?;
    b0.grid.same_as(&g, "B")?;
    ops.grid().same_as(&g, "operators")?;
    u0.check_finite("u")?;
    rho0.check_finite("rho")?;
    e0.check_finite("E")?;
    b0.check_finite("B")?;
    let min = rho0.min();
    if min < -1e-12 * rho0.max_abs() {
        return Err(Error::NegativeDensity { min });
    }
    let state = RemState {
        u: u0,
        rho: rho0,
        e: e0,
        b: b0,
        t: 0.0,
    };
    let report = RemInitReport {
        gauss_residual: gauss_residual(ops, &state.e, &state.charge_density()),
        div_b_residual: ops.div(&state.b).norm(NormKind::L2),
    };
    Ok((state, report))
}

/// Max over cells of the Frobenius norm of `grad u`, times the smallest
/// resolved spacing, with the cell where it occurs.
pub fn shock_metric(u: &VectorField3, ops: &Ops) -> (f64, usize) {
    let g = u.grid;
    let mut acc = vec![0.0; g.len()];
    for i in 0..3 {
        let ui = u.component(i);
        for j in 0..3 {
            for (a, v) in acc.iter_mut().zip(&ops.d(&ui, j).data) {
                *a += v * v;
            }
        }
    }
    let (cell, m) = acc
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
    (m.sqrt() * g.min_spacing(), cell)
}

pub fn rem_observables(state: &RemState, ops: &Ops) -> RemObservables {
    let g = state.grid();
    let u0 = state.u0();
    let mut j = FourVectorField::zeros(g, IndexPosition::Covariant);
    let mut norm_res: f64 = 0.0;
    for i in 0..g.len() {
        let r = state.rho.data[i];
        j.t.data[i] = -u0.data[i] * r;
        for a in 0..3 {
            j.s.c[a][i] = state.u.c[a][i] * r;
        }
        let u2: f64 = (0..3).map(|a| state.u.c[a][i].powi(2)).sum();
        norm_res = norm_res.max((-u0.data[i] * u0.data[i] + u2 + 1.0).abs());
    }
    let q = state.charge_density();
    let energy = quadrature(
        &g,
        (0..g.len()).map(|i| {
            let em: f64 = (0..3)
                .map(|a| state.e.c[a][i].powi(2) + state.b.c[a][i].powi(2))
                .sum();
            state.rho.data[i] * u0.data[i] * u0.data[i] + 0.5 * em
        }),
    );
    RemObservables {
        energy,
        charge: q.integral(),
        gauss_residual: gauss_residual(ops, &state.e, &q),
        div_b_residual: ops.div(&state.b).norm(NormKind::L2),
        normalization_residual: norm_res,
        max_grad_u: shock_metric(&state.u, ops).0,
        j,
    }
}

/// `du/dt = [-(u.grad)u + U^0 E + u x B] / U^0`.
pub fn velocity_rate(u: &VectorField3, e: &VectorField3, b: &VectorField3, ops: &Ops) -> VectorField3 {
    let g = u.grid;
    let u0 = lorentz(u);
    let mut out = VectorField3::zeros(g);
    for i in 0..3 {
        let ui = u.component(i);
        let grads = [ops.d(&ui, 0), ops.d(&ui, 1), ops.d(&ui, 2)];
        for c in 0..g.len() {
            let adv: f64 = (0..3).map(|j| u.c[j][c] * grads[j].data[c]).sum();
            out.c[i][c] = -adv / u0.data[c] + e.c[i][c];
        }
    }
    for c in 0..g.len() {
        let l = cross(u.at(c), b.at(c));
        for i in 0..3 {
            out.c[i][c] += l[i] / u0.data[c];
        }
    }
    out
}

#[derive(Clone)]
struct Sub {
    u: VectorField3,
    q: ScalarField,
    e: VectorField3,
}

impl Sub {
    fn axpy(&self, h: f64, k: &Sub) -> Sub {
        let mut s = self.clone();
        s.u.axpy(h, &k.u);
        for (a, b) in s.q.data.iter_mut().zip(&k.q.data) {
            *a += h * b;
        }
        s.e.axpy(h, &k.e);
        s
    }

    fn combine(&self, terms: &[(f64, &Sub)]) -> Sub {
        let mut s = self.clone();
        for (w, k) in terms {
            s = s.axpy(*w, k);
        }
        s
    }

    fn scale_into(parts: &[(f64, &Sub)]) -> Sub {
        let (w0, first) = parts[0];
        let mut s = Sub {
            u: first.u.scale(w0),
            q: first.q.map(|x| x * w0),
            e: first.e.scale(w0),
        };
        for (w, k) in &parts[1..] {
            s = s.axpy(*w, k);
        }
        s
    }
}

/// Fluid plus current coupling, `B` frozen.
fn rhs(s: &Sub, b: &VectorField3, ops: &Ops, transport: Transport) -> Sub {
    let g = s.q.grid;
    let u0 = lorentz(&s.u);
    let v = VectorField3 {
        grid: g,
        c: std::array::from_fn(|a| s.u.c[a].iter().zip(&u0.data).map(|(x, w)| x / w).collect()),
    };
    let flux = VectorField3 {
        grid: g,
        c: std::array::from_fn(|a| v.c[a].iter().zip(&s.q.data).map(|(x, q)| x * q).collect()),
    };
    let (du, dq) = match transport {
        Transport::Spectral => (velocity_rate(&s.u, &s.e, b, ops), ops.div(&flux).map(|x| -x)),
        Transport::Upwind => upwind_rates(s, &v, b, g),
    };
    Sub {
        u: du,
        q: dq,
        e: flux.scale(-1.0),
    }
}

fn upwind_rates(s: &Sub, v: &VectorField3, b: &VectorField3, g: Grid) -> (VectorField3, ScalarField) {
    let n = g.dims();
    let mut du = VectorField3::zeros(g);
    let mut dq = ScalarField::zeros(g);
    for c in 0..g.len() {
        let idx = g.coords(c);
        let vc = v.at(c);
        let mut adv = [0.0; 3];
        let mut div = 0.0;
        for ax in 0..3 {
            if n[ax] == 1 {
                continue;
            }
            let h = g.spacing(ax);
            let mut ip = idx;
            ip[ax] = (idx[ax] + 1) % n[ax];
            let mut im = idx;
            im[ax] = (idx[ax] + n[ax] - 1) % n[ax];
            let cp = g.index(ip[0], ip[1], ip[2]);
            let cm = g.index(im[0], im[1], im[2]);
            for i in 0..3 {
                let d = if vc[ax] > 0.0 {
                    s.u.c[i][c] - s.u.c[i][cm]
                } else {
                    s.u.c[i][cp] - s.u.c[i][c]
                };
                adv[i] += vc[ax] * d / h;
            }
            let face = |l: usize, r: usize| {
                let w = 0.5 * (v.c[ax][l] + v.c[ax][r]);
                w * if w > 0.0 { s.q.data[l] } else { s.q.data[r] }
            };
            div += (face(c, cp) - face(cm, c)) / h;
        }
        let u0 = (1.0 + s.u.at(c).iter().map(|x| x * x).sum::<f64>()).sqrt();
        let l = cross(s.u.at(c), b.at(c));
        for i in 0..3 {
            du.c[i][c] = -adv[i] + s.e.c[i][c] + l[i] / u0;
        }
        dq.data[c] = -div;
    }
    (du, dq)
}

fn advance_sub(s: &Sub, b: &VectorField3, h: f64, ops: &Ops, transport: Transport) -> Sub {
    match transport {
        Transport::Spectral => {
            let k1 = rhs(s, b, ops, transport);
            let k2 = rhs(&s.axpy(0.5 * h, &k1), b, ops, transport);
            let k3 = rhs(&s.axpy(0.5 * h, &k2), b, ops, transport);
            let k4 = rhs(&s.axpy(h, &k3), b, ops, transport);
            s.combine(&[(h / 6.0, &k1), (h / 3.0, &k2), (h / 3.0, &k3), (h / 6.0, &k4)])
        }
        Transport::Upwind => {
            let s1 = s.axpy(h, &rhs(s, b, ops, transport));
            let s2 = Sub::scale_into(&[(0.75, s), (0.25, &s1), (0.25 * h, &rhs(&s1, b, ops, transport))]);
            Sub::scale_into(&[
                (1.0 / 3.0, s),
                (2.0 / 3.0, &s2),
                (2.0 / 3.0 * h, &rhs(&s2, b, ops, transport)),
            ])
        }
    }
}

fn finite(s: &RemState) -> bool {
    s.rho.data.iter().all(|v| v.is_finite())
        && [&s.u, &s.e, &s.b].iter().all(|f| f.c.iter().flatten().all(|v| v.is_finite()))
}

pub fn check_timestep(dt: f64, ops: &Ops, params: &RemParams) -> Result<()> {
    let dx = ops.grid().min_spacing();
    if !(dt > 0.0) || dt > params.c_cfl * dx * (1.0 + 1e-12) {
        return Err(Error::Stability(format!(
            "dt = {dt:.3e} outside (0, {} * dx = {:.3e}]",
            params.c_cfl,
            params.c_cfl * dx
        )));
    }
    Ok(())
}

fn monitor(state: &RemState, ops: &Ops, params: &RemParams) -> Result<()> {
    let (value, cell) = shock_metric(&state.u, ops);
    if value > params.shock_threshold {
        return Err(Error::Shock {
            t: state.t,
            cell: state.grid().coords(cell),
            value,
            threshold: params.shock_threshold,
        });
    }
    Ok(())
}

fn step_unchecked(state: &RemState, dt: f64, ops: &Ops, params: &RemParams, weights: Option<&[f64]>) -> RemState {
    let sub = Sub {
        u: state.u.clone(),
        q: state.charge_density(),
        e: state.e.clone(),
    };
    let mut b = state.b.clone();
    let mut sub = advance_sub(&sub, &b, 0.5 * dt, ops, params.transport);
    ops.maxwell_rotate(&mut sub.e, &mut b, dt);
    let mut sub = advance_sub(&sub, &b, 0.5 * dt, ops, params.transport);
    if let Some(w) = weights {
        for a in 0..3 {
            ops.apply_weights(&mut sub.u.c[a], w);
            ops.apply_weights(&mut sub.e.c[a], w);
            ops.apply_weights(&mut b.c[a], w);
        }
        ops.apply_weights(&mut sub.q.data, w);
    }
    let u0 = lorentz(&sub.u);
    RemState {
        rho: sub.q.zip_map(&u0, |q, w| q / w),
        u: sub.u,
        e: sub.e,
        b,
        t: state.t + dt,
    }
}

fn filter_weights(ops: &Ops, params: &RemParams) -> Option<Vec<f64>> {
    match (params.transport, params.filter) {
        (Transport::Spectral, Some((s, o))) => Some(ops.filter_weights(s, o)),
        _ => None,
    }
}

pub fn rem_step(state: &RemState, dt: f64, ops: &Ops, params: &RemParams) -> Result<RemState> {
    check_timestep(dt, ops, params)?;
    monitor(state, ops, params)?;
    let w = filter_weights(ops, params);
    let s = step_unchecked(state, dt, ops, params, w.as_deref());
    if !finite(&s) {
        return Err(Error::Blowup { step: 0, t: s.t });
    }
    Ok(s)
}

/// Evolve to `t_final` with uniform steps no larger than `dt`; returns the
/// initial state, every `stride`-th state and the final state.
pub fn rem_evolve(
    state: &RemState,
    t_final: f64,
    dt: f64,
    stride: usize,
    ops: &Ops,
    params: &RemParams,
) -> Result<Vec<RemState>> {
    let stride = stride.max(1);
    let steps = crate::kgm::steps_for(t_final, dt, stride);
    let h = t_final / steps as f64;
    check_timestep(h, ops, params)?;
    let w = filter_weights(ops, params);
    let t0 = state.t;
    let mut s = state.clone();
    let mut out = vec![s.clone()];
    for step in 1..=steps {
        monitor(&s, ops, params)?;
        s = step_unchecked(&s, h, ops, params, w.as_deref());
        s.t = t0 + step as f64 * h;
        if !finite(&s) {
            return Err(Error::Blowup { step, t: s.t });
        }
        if step % stride == 0 || step == steps {
            out.push(s.clone());
        }
    }
    Ok(out)
}

/// `rho U_a U_b + F_am F_b^m - g_ab F^2 / 4`.
pub fn stress_energy(state: &RemState) -> StressTensorField {
    let g = state.grid();
    let u0 = state.u0();
    let mut t = StressTensorField::zeros(g);
    for i in 0..g.len() {
        let uc = [-u0.data[i], state.u.c[0][i], state.u.c[1][i], state.u.c[2][i]];
        let f = faraday_matrix(state.e.at(i), state.b.at(i));
        let f2 = faraday_invariant(&f);
        let r = state.rho.data[i];
        let mut m = [[0.0; 4]; 4];
        for a in 0..4 {
            for b in a..4 {
                let g_ab = if a == b { METRIC[a] } else { 0.0 };
                let v = r * uc[a] * uc[b] + contract_second(&f, &f, a, b) - 0.25 * g_ab * f2;
                m[a][b] = v;
                m[b][a] = v;
            }
        }
        t.set_cell(i, &m);
    }
    t
}

/// Check that snapshot times are uniformly spaced; returns the spacing.
pub fn uniform_spacing(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::InsufficientSnapshots {
            need: 2,
            got: times.len(),
        });
    }
    let dt = times[1] - times[0];
    for w in times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.abs().max(1e-300) {
            return Err(Error::NonUniformStride);
        }
    }
    Ok(dt)
}

/// L2 norm of the residual of `box E = grad q + dJ/dt`, `box B = -curl J`
/// (in the form `E_tt - lap E + grad q + J_t` and `B_tt - lap B - curl J`)
/// on the middle snapshot.
pub fn wave_residual(traj: &[RemState], ops: &Ops) -> Result<f64> {
    if traj.len() < 3 {
        return Err(Error::InsufficientSnapshots {
            need: 3,
            got: traj.len(),
        });
    }
    let times: Vec<f64> = traj.iter().map(|s| s.t).collect();
    let dt = uniform_spacing(&times)?;
    let m = traj.len() / 2;
    let (p, c, n) = (&traj[m - 1], &traj[m], &traj[m + 1]);
    let current = |s: &RemState| -> VectorField3 {
        VectorField3 {
            grid: s.grid(),
            c: std::array::from_fn(|a| s.u.c[a].iter().zip(&s.rho.data).map(|(u, r)| u * r).collect()),
        }
    };
    let (jp, jc, jn) = (current(p), current(c), current(n));
    let grad_q = ops.grad(&c.charge_density());
    let curl_j = ops.curl(&jc);
    let g = c.grid();
    let mut total = 0.0;
    for a in 0..3 {
        let lap_e = ops.laplacian(&c.e.component(a));
        let lap_b = ops.laplacian(&c.b.component(a));
        for i in 0..g.len() {
            let ett = (p.e.c[a][i] - 2.0 * c.e.c[a][i] + n.e.c[a][i]) / (dt * dt);
            let btt = (p.b.c[a][i] - 2.0 * c.b.c[a][i] + n.b.c[a][i]) / (dt * dt);
            let jt = (jn.c[a][i] - jp.c[a][i]) / (2.0 * dt);
            let re = ett - lap_e.data[i] + grad_q.c[a][i] + jt;
            let rb = btt - lap_b.data[i] - curl_j.c[a][i];
            total += re * re + rb * rb;
        }
    }
    Ok((total * g.cell_volume()).sqrt())
}

/// L2 norm of the residual of the covariant momentum equation
/// `U^a d_a U_i - F_ia U^a` (spatial components) on the middle snapshot,
/// with centered time differences.
pub fn momentum_residual(traj: &[RemState], ops: &Ops) -> Result<f64> {
    if traj.len() < 3 {
        return Err(Error::InsufficientSnapshots {
            need: 3,
            got: traj.len(),
        });
    }
    let times: Vec<f64> = traj.iter().map(|s| s.t).collect();
    let dt = uniform_spacing(&times)?;
    let m = traj.len() / 2;
    let (p, c, n) = (&traj[m - 1], &traj[m], &traj[m + 1]);
    let g = c.grid();
    let u0 = c.u0();
    let mut total = 0.0;
    for i in 0..3 {
        let ui = c.u.component(i);
        let grads = [ops.d(&ui, 0), ops.d(&ui, 1), ops.d(&ui, 2)];
        for k in 0..g.len() {
            let ut = (n.u.c[i][k] - p.u.c[i][k]) / (2.0 * dt);
            let lhs = u0.data[k] * ut + (0..3).map(|j| c.u.c[j][k] * grads[j].data[k]).sum::<f64>();
            let f = faraday_matrix(c.e.at(k), c.b.at(k));
            let uc = [u0.data[k], c.u.c[0][k], c.u.c[1][k], c.u.c[2][k]];
            let force: f64 = (0..4).map(|a| f[a][i + 1] * uc[a]).sum();
            let r = lhs - force;
            total += r * r;
        }
    }
    Ok((total * g.cell_volume()).sqrt())
}

/// Symmetric 3x3 eigenvalues by cyclic Jacobi rotations, sorted descending.
pub fn symmetric_eigenvalues(mut a: [[f64; 3]; 3]) -> [f64; 3] {
    for _ in 0..50 {
        let off = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
        if off < 1e-300 {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q] == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let mut r = a;
            for k in 0..3 {
                r[k][p] = c * a[k][p] - s * a[k][q];
                r[k][q] = s * a[k][p] + c * a[k][q];
            }
            let mut r2 = r;
            for k in 0..3 {
                r2[p][k] = c * r[p][k] - s * r[q][k];
                r2[q][k] = s * r[p][k] + c * r[q][k];
            }
            a = r2;
        }
    }
    let mut ev = [a[0][0], a[1][1], a[2][2]];
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

/// Eigenvalues of `M = I - u u^T / (U^0)^2` per cell, sorted descending.
pub fn elliptic_spectrum(state: &RemState) -> [ScalarField; 3] {
    let g = state.grid();
    let u0 = state.u0();
    let mut out = [ScalarField::zeros(g), ScalarField::zeros(g), ScalarField::zeros(g)];
    for c in 0..g.len() {
        let u = state.u.at(c);
        let w = u0.data[c] * u0.data[c];
        let m: [[f64; 3]; 3] = std::array::from_fn(|i| {
            std::array::from_fn(|j| if i == j { 1.0 } else { 0.0 } - u[i] * u[j] / w)
        });
        let ev = symmetric_eigenvalues(m);
        for k in 0..3 {
            out[k].data[c] = ev[k];
        }
    }
    out
}

/// Periodic trilinear interpolation of a cell-sampled field.
pub fn trilinear(f: &[f64], g: &Grid, x: [f64; 3]) -> f64 {
    let n = g.dims();
    let mut base = [0usize; 3];
    let mut frac = [0.0; 3];
    for a in 0..3 {
        if n[a] == 1 {
            continue;
        }
        let s = x[a] / g.spacing(a);
        let fl = s.floor();
        frac[a] = s - fl;
        base[a] = (fl as i64).rem_euclid(n[a] as i64) as usize;
    }
    let mut acc = 0.0;
    for corner in 0..8 {
        let mut w = 1.0;
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let bit = (corner >> a) & 1;
            if n[a] == 1 {
                if bit == 1 {
                    w = 0.0;
                }
                continue;
            }
            idx[a] = (base[a] + bit) % n[a];
            w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
        }
        if w != 0.0 {
            acc += w * f[g.index(idx[0], idx[1], idx[2])];
        }
    }
    acc
}

#[derive(Clone, Debug)]
pub struct CharacteristicsResult {
    pub rho: ScalarField,
    /// Largest shock metric seen along the trajectory.
    pub max_shock_metric: f64,
    /// Set when that metric exceeds the threshold used in the call.
    pub degraded: bool,
}

/// Rebuild the final density by integrating flow lines `dx/dt = u / U^0`
/// backward from every grid point and transporting the charge
/// `U^0 rho` with `d log q / dt = -div(u / U^0)` along them.
///
/// `traj` is the PDE trajectory at uniform spacing, first entry at the
/// initial time. RK4 steps span two snapshots so stage times fall on
/// snapshots; an odd interval count uses one-snapshot steps with linear
/// time interpolation at the midpoints.
pub fn characteristics_density(
    traj: &[RemState],
    ops: &Ops,
    shock_threshold: f64,
) -> Result<CharacteristicsResult> {
    if traj.len() < 2 {
        return Err(Error::InsufficientSnapshots {
            need: 2,
            got: traj.len(),
        });
    }
    let times: Vec<f64> = traj.iter().map(|s| s.t).collect();
    let dt = uniform_spacing(&times)?;
    let g = traj[0].grid();
    let mut max_metric: f64 = 0.0;
    let flows: Vec<([Vec<f64>; 3], Vec<f64>)> = traj
        .iter()
        .map(|s| {
            max_metric = max_metric.max(shock_metric(&s.u, ops).0);
            let u0 = s.u0();
            let v = VectorField3 {
                grid: g,
                c: std::array::from_fn(|a| s.u.c[a].iter().zip(&u0.data).map(|(x, w)| x / w).collect()),
            };
            let div = ops.div(&v);
            (v.c, div.data)
        })
        .collect();
    let sample = |k: usize, x: [f64; 3]| -> [f64; 4] {
        let (v, d) = &flows[k];
        [
            trilinear(&v[0], &g, x),
            trilinear(&v[1], &g, x),
            trilinear(&v[2], &g, x),
            trilinear(d, &g, x),
        ]
    };
    let mid = |k: usize, x: [f64; 3]| -> [f64; 4] {
        let a = sample(k, x);
        let b = sample(k - 1, x);
        std::array::from_fn(|i| 0.5 * (a[i] + b[i]))
    };
    let last = traj.len() - 1;
    let two = last % 2 == 0;
    let q0 = traj[0].charge_density();
    let u0_final = traj[last].u0();
    let mut rho = ScalarField::zeros(g);
    for c in 0..g.len() {
        let mut x = g.position(c);
        let mut logq = 0.0;
        let mut k = last;
        // Backward in time: y' = -f(y), f = (v, div v) is integrated into
        // (x, -log q) so that log q(T) = log q(0) - int div v.
        while k > 0 {
            let (h, k_mid, k_end) = if two { (2.0 * dt, Some(k - 1), k - 2) } else { (dt, None, k - 1) };
            let f_at = |kk: usize, mid_of: Option<usize>, y: [f64; 3]| -> [f64; 4] {
                match mid_of {
                    Some(m) => mid(m, y),
                    None => sample(kk, y),
                }
            };
            let add = |y: [f64; 3], s: f64, f: &[f64; 4]| -> [f64; 3] {
                [y[0] - s * f[0], y[1] - s * f[1], y[2] - s * f[2]]
            };
            let (ms, mk) = match k_mid {
                Some(km) => (None, km),
                None => (Some(k), k),
            };
            let k1 = sample(k, x);
            let k2 = f_at(mk, ms, add(x, 0.5 * h, &k1));
            let k3 = f_at(mk, ms, add(x, 0.5 * h, &k2));
            let k4 = sample(k_end, add(x, h, &k3));
            for a in 0..3 {
                x[a] -= h / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
            }
            logq += h / 6.0 * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3]);
            k = k_end;
        }
        let q_start = trilinear(&q0.data, &g, x);
        rho.data[c] = q_start * (-logq).exp() / u0_final.data[c];
    }
    Ok(CharacteristicsResult {
        rho,
        max_shock_metric: max_metric,
        degraded: max_metric > shock_threshold,
    })
}
