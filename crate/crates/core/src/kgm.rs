//! Semiclassical massive Klein-Gordon-Maxwell in temporal gauge.
//!
//! Unknowns: `Phi`, `Pi = eps dPhi/dt`, spatial potential `A` and electric
//! field `E`. Conventions: `D = eps grad + i A`, `dA/dt = E`, `B = -curl A`,
//! `dE/dt = curl B - J`, Gauss `div E = J^0 - <J^0>` with
//! `J^0 = Im(Phi conj(Pi))`.

use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::snapshot::{deinterleave, interleave, FieldKind, Snapshot};
use crate::fields::tensor::{contract_second, faraday_invariant, faraday_matrix, METRIC};
use crate::fields::{
    gauge_transform, gauss_residual, quadrature, ComplexField, FourVectorField, IndexPosition,
    Ops, ScalarField, StressTensorField, VectorField3,
};

#[derive(Clone, Debug, PartialEq)]
pub struct KgmState {
    pub phi: ComplexField,
    pub pi: ComplexField,
    pub a: VectorField3,
    pub e: VectorField3,
    pub eps: f64,
    pub t: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KgmParams {
    pub c_cfl: f64,
    pub c_osc: f64,
    /// When false, `A` and `E` are frozen and only `Phi, Pi` evolve.
    pub coupling: bool,
}

impl Default for KgmParams {
    fn default() -> Self {
        Self {
            c_cfl: 0.5,
            c_osc: 0.2,
            coupling: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct KgmObservables {
    pub rho: ScalarField,
    /// Covariant current `J_a = -Im(Phi conj(D_a Phi))`.
    pub j: FourVectorField,
    pub energy: f64,
    pub charge: f64,
    pub gauss_residual: f64,
}

/// Build the initial state; returns it with its Gauss residual.
pub fn kgm_init(
    phi0: ComplexField,
    pi0: ComplexField,
    a0: VectorField3,
    e0: VectorField3,
    eps: f64,
    ops: &Ops,
) -> Result<(KgmState, f64)> {
    let g = phi0.grid;
    pi0.grid.same_as(&g, "Pi")?;
    a0.grid.same_as(&g, "A")?;
    e0.grid.same_as(&g, "E")?;
    ops.grid().same_as(&g, "operators")?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidConfig(format!("epsilon must be positive, got {eps}")));
    }
    phi0.check_finite("Phi")?;
    pi0.check_finite("Pi")?;
    a0.check_finite("A")?;
    e0.check_finite("E")?;
    let state = KgmState {
        phi: phi0,
        pi: pi0,
        a: a0,
        e: e0,
        eps,
        t: 0.0,
    };
    let res = state_gauss_residual(&state, ops);
    Ok((state, res))
}

/// Spatial covariant derivatives `D_j Phi = eps d_j Phi + i A_j Phi`.
pub fn covariant_gradient(phi: &ComplexField, a: &VectorField3, eps: f64, ops: &Ops) -> [ComplexField; 3] {
    std::array::from_fn(|j| {
        let mut d = ops.d_complex(phi, j);
        for ((z, p), aj) in d.data.iter_mut().zip(&phi.data).zip(&a.c[j]) {
            *z = *z * eps + Complex64::new(0.0, *aj) * p;
        }
        d
    })
}

/// `sum_j D_j D_j Phi`.
fn covariant_laplacian(phi: &ComplexField, a: &VectorField3, eps: f64, ops: &Ops) -> ComplexField {
    let dphi = covariant_gradient(phi, a, eps, ops);
    let mut out = ComplexField::zeros(phi.grid);
    for (j, dj) in dphi.iter().enumerate() {
        let dd = ops.d_complex(dj, j);
        for i in 0..out.data.len() {
            out.data[i] += dd.data[i] * eps + Complex64::new(0.0, a.c[j][i]) * dj.data[i];
        }
    }
    out
}

pub fn magnetic_field(state: &KgmState, ops: &Ops) -> VectorField3 {
    ops.curl(&state.a).scale(-1.0)
}

/// `J^0 = Im(Phi conj(Pi))`.
pub fn charge_density(state: &KgmState) -> ScalarField {
    ScalarField {
        grid: state.phi.grid,
        data: state
            .phi
            .data
            .iter()
            .zip(&state.pi.data)
            .map(|(p, q)| (p * q.conj()).im)
            .collect(),
    }
}

/// Covariant current from precomputed covariant derivatives.
fn current_from(state: &KgmState, dphi: &[ComplexField; 3]) -> FourVectorField {
    let g = state.phi.grid;
    let mut j = FourVectorField::zeros(g, IndexPosition::Covariant);
    for i in 0..g.len() {
        let p = state.phi.data[i];
        j.t.data[i] = -(p * state.pi.data[i].conj()).im;
        for a in 0..3 {
            j.s.c[a][i] = -(p * dphi[a].data[i].conj()).im;
        }
    }
    j
}

pub fn current(state: &KgmState, ops: &Ops) -> FourVectorField {
    let dphi = covariant_gradient(&state.phi, &state.a, state.eps, ops);
    current_from(state, &dphi)
}

pub fn state_gauss_residual(state: &KgmState, ops: &Ops) -> f64 {
    gauss_residual(ops, &state.e, &charge_density(state))
}

pub fn energy(state: &KgmState, ops: &Ops) -> f64 {
    let dphi = covariant_gradient(&state.phi, &state.a, state.eps, ops);
    energy_from(state, &dphi, &magnetic_field(state, ops))
}

fn energy_from(state: &KgmState, dphi: &[ComplexField; 3], b: &VectorField3) -> f64 {
    let g = state.phi.grid;
    quadrature(
        &g,
        (0..g.len()).map(|i| {
            let kin = state.pi.data[i].norm_sqr()
                + dphi[0].data[i].norm_sqr()
                + dphi[1].data[i].norm_sqr()
                + dphi[2].data[i].norm_sqr();
            let em = (0..3)
                .map(|a| state.e.c[a][i].powi(2) + b.c[a][i].powi(2))
                .sum::<f64>();
            0.5 * (kin + state.phi.data[i].norm_sqr() + em)
        }),
    )
}

pub fn kgm_observables(state: &KgmState, ops: &Ops) -> KgmObservables {
    let dphi = covariant_gradient(&state.phi, &state.a, state.eps, ops);
    let b = magnetic_field(state, ops);
    let j = current_from(state, &dphi);
    let q = charge_density(state);
    KgmObservables {
        rho: state.phi.modulus_sq(),
        energy: energy_from(state, &dphi, &b),
        charge: q.integral(),
        gauss_residual: gauss_residual(ops, &state.e, &q),
        j,
    }
}

/// Check the two timestep rules and the linear stability bound of the
/// velocity-Verlet scheme for the fastest resolved mode.
pub fn check_timestep(dt: f64, eps: f64, ops: &Ops, params: &KgmParams) -> Result<()> {
    let dx = ops.grid().min_spacing();
    let slack = 1.0 + 1e-12;
    if !(dt > 0.0) {
        return Err(Error::Stability(format!("dt = {dt} must be positive")));
    }
    if dt > params.c_cfl * dx * slack {
        return Err(Error::Stability(format!(
            "dt = {dt:.3e} exceeds {} * dx = {:.3e}",
            params.c_cfl,
            params.c_cfl * dx
        )));
    }
    if dt > params.c_osc * eps * slack {
        return Err(Error::Stability(format!(
            "dt = {dt:.3e} exceeds {} * eps = {:.3e}",
            params.c_osc,
            params.c_osc * eps
        )));
    }
    let smax = ops.max_symbol_norm();
    let omega = (smax * smax + 1.0 / (eps * eps)).sqrt();
    if omega * dt >= 2.0 {
        return Err(Error::Stability(format!(
            "omega_max * dt = {:.3} >= 2 (reduce c_cfl)",
            omega * dt
        )));
    }
    Ok(())
}

struct Forces {
    pi: ComplexField,
    e: Option<VectorField3>,
}

fn forces(state: &KgmState, ops: &Ops, coupling: bool) -> Forces {
    let eps = state.eps;
    let lap = covariant_laplacian(&state.phi, &state.a, eps, ops);
    let pi = ComplexField {
        grid: lap.grid,
        data: lap
            .data
            .iter()
            .zip(&state.phi.data)
            .map(|(l, p)| (l - p) / eps)
            .collect(),
    };
    let e = coupling.then(|| {
        let b = magnetic_field(state, ops);
        let j = current(state, ops);
        ops.curl(&b).sub(&j.s)
    });
    Forces { pi, e }
}

fn kick(state: &mut KgmState, f: &Forces, h: f64) {
    for (p, fp) in state.pi.data.iter_mut().zip(&f.pi.data) {
        *p += fp * h;
    }
    if let Some(fe) = &f.e {
        state.e.axpy(h, fe);
    }
}

fn drift(state: &mut KgmState, h: f64, coupling: bool) {
    let s = h / state.eps;
    for (p, q) in state.phi.data.iter_mut().zip(&state.pi.data) {
        *p += q * s;
    }
    if coupling {
        let e = state.e.clone();
        state.a.axpy(h, &e);
    }
}

fn finite(state: &KgmState) -> bool {
    state.phi.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
        && state.pi.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
        && state.e.c.iter().flatten().all(|v| v.is_finite())
        && state.a.c.iter().flatten().all(|v| v.is_finite())
}

/// One kick-drift-kick step (velocity Verlet, synchronized fields).
pub fn kgm_step(state: &KgmState, dt: f64, ops: &Ops, params: &KgmParams) -> Result<KgmState> {
    check_timestep(dt, state.eps, ops, params)?;
    let mut s = state.clone();
    let f = forces(&s, ops, params.coupling);
    kick(&mut s, &f, 0.5 * dt);
    drift(&mut s, dt, params.coupling);
    let f = forces(&s, ops, params.coupling);
    kick(&mut s, &f, 0.5 * dt);
    s.t += dt;
    if !finite(&s) {
        return Err(Error::Blowup { step: 0, t: s.t });
    }
    Ok(s)
}

/// Evolve to `t_final` with a step no larger than `dt`, returning the
/// initial state and every `stride`-th state. The step count is rounded up
/// to a multiple of `stride`, so snapshots are evenly spaced and end at
/// `t_final`.
pub fn kgm_evolve(
    state: &KgmState,
    t_final: f64,
    dt: f64,
    stride: usize,
    ops: &Ops,
    params: &KgmParams,
) -> Result<Vec<KgmState>> {
    let stride = stride.max(1);
    let steps = steps_for(t_final, dt, stride);
    let h = t_final / steps as f64;
    check_timestep(h, state.eps, ops, params)?;
    let mut s = state.clone();
    let t0 = s.t;
    let mut out = vec![s.clone()];
    let mut f = forces(&s, ops, params.coupling);
    for step in 1..=steps {
        kick(&mut s, &f, 0.5 * h);
        drift(&mut s, h, params.coupling);
        f = forces(&s, ops, params.coupling);
        kick(&mut s, &f, 0.5 * h);
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

/// Number of uniform steps of size at most `dt` covering `t_final`.
pub fn steps_for(t_final: f64, dt: f64, stride: usize) -> usize {
    let n = ((t_final / dt) - 1e-9).ceil().max(1.0) as usize;
    let s = stride.max(1);
    n.div_ceil(s) * s
}

/// Apply a time-independent gauge change to a whole state.
pub fn gauge_transform_state(state: &KgmState, chi: &ScalarField, ops: &Ops) -> KgmState {
    let (phi, a) = gauge_transform(&state.phi, &state.a, chi, state.eps, ops);
    let (pi, _) = gauge_transform(&state.pi, &state.a, chi, state.eps, ops);
    KgmState {
        phi,
        pi,
        a,
        e: state.e.clone(),
        eps: state.eps,
        t: state.t,
    }
}

/// How `grad sqrt(rho)` enters the splitting identities.
pub enum SqrtRhoGradient<'a> {
    /// `eps d sqrt(rho) = Re(conj(Phi) D Phi) / |Phi|`, pointwise exact.
    Algebraic,
    /// Discrete spatial derivatives of `sqrt(rho)` and a centered time
    /// difference between two neighbouring states.
    Discrete {
        prev: &'a KgmState,
        next: &'a KgmState,
    },
}

#[derive(Clone, Debug)]
pub struct SplitResiduals {
    /// Spacetime identity residual.
    pub r1: ScalarField,
    /// Space-only identity residual.
    pub r2: ScalarField,
    /// `max |r| / max(scale)` over unmasked cells.
    pub relative: f64,
    pub masked: usize,
}

/// Residuals of `J.J/rho = -eps^2 |d sqrt rho|^2 + |D Phi|^2` in its
/// spacetime (Minkowski) and space-only forms.
///
/// Cells with `rho < floor_rel * max(rho)` are masked.
pub fn split_identity_residuals(
    state: &KgmState,
    ops: &Ops,
    mode: SqrtRhoGradient<'_>,
    floor_rel: f64,
) -> Result<SplitResiduals> {
    let g = state.phi.grid;
    let eps = state.eps;
    let dphi = covariant_gradient(&state.phi, &state.a, eps, ops);
    let rho = state.phi.modulus_sq();
    let floor = floor_rel * rho.max();
    let discrete = match &mode {
        SqrtRhoGradient::Algebraic => None,
        SqrtRhoGradient::Discrete { prev, next } => {
            let sq = rho.map(f64::sqrt);
            let dt = next.t - prev.t;
            let sp = prev.phi.modulus_sq().map(f64::sqrt);
            let sn = next.phi.modulus_sq().map(f64::sqrt);
            let dts: Vec<f64> = sp.data.iter().zip(&sn.data).map(|(a, b)| (b - a) / dt).collect();
            Some((dts, [ops.d(&sq, 0), ops.d(&sq, 1), ops.d(&sq, 2)]))
        }
    };
    let mut r1 = ScalarField::zeros(g);
    let mut r2 = ScalarField::zeros(g);
    let mut scale: f64 = 0.0;
    let mut worst: f64 = 0.0;
    let mut masked = 0;
    for i in 0..g.len() {
        let r = rho.data[i];
        if r < floor || r == 0.0 {
            masked += 1;
            continue;
        }
        let p = state.phi.data[i];
        let d = [state.pi.data[i], dphi[0].data[i], dphi[1].data[i], dphi[2].data[i]];
        let sr = r.sqrt();
        let mut jj = [0.0; 4];
        let mut grad = [0.0; 4];
        for a in 0..4 {
            let z = p.conj() * d[a];
            jj[a] = z.im;
            grad[a] = match &discrete {
                None => z.re / sr,
                Some((dts, ds)) => eps * if a == 0 { dts[i] } else { ds[a - 1].data[i] },
            };
        }
        let mut lhs = [0.0; 2];
        let mut rhs = [0.0; 2];
        let mut sc = 0.0;
        for a in 0..4 {
            let w = METRIC[a];
            let l = jj[a] * jj[a] / r;
            let rr = -grad[a] * grad[a] + d[a].norm_sqr();
            lhs[0] += w * l;
            rhs[0] += w * rr;
            if a > 0 {
                lhs[1] += l;
                rhs[1] += rr;
            }
            sc += l + d[a].norm_sqr();
        }
        r1.data[i] = lhs[0] - rhs[0];
        r2.data[i] = lhs[1] - rhs[1];
        scale = scale.max(sc);
        worst = worst.max(r1.data[i].abs()).max(r2.data[i].abs());
    }
    if masked == g.len() {
        return Err(Error::AllMasked);
    }
    Ok(SplitResiduals {
        r1,
        r2,
        relative: if scale > 0.0 { worst / scale } else { 0.0 },
        masked,
    })
}

/// Stress-energy tensor
/// `Re(D_a Phi conj D_b Phi) - g_ab (D_c Phi conj D^c Phi + |Phi|^2)/2
///  + F_am F_b^m - g_ab F^2 / 4`.
pub fn stress_energy(state: &KgmState, ops: &Ops) -> StressTensorField {
    let g = state.phi.grid;
    let dphi = covariant_gradient(&state.phi, &state.a, state.eps, ops);
    let b = magnetic_field(state, ops);
    let mut t = StressTensorField::zeros(g);
    for i in 0..g.len() {
        let d = [state.pi.data[i], dphi[0].data[i], dphi[1].data[i], dphi[2].data[i]];
        let f = faraday_matrix(state.e.at(i), b.at(i));
        let f2 = faraday_invariant(&f);
        let dd: f64 = (0..4).map(|c| METRIC[c] * d[c].norm_sqr()).sum();
        let m2 = state.phi.data[i].norm_sqr();
        let mut m = [[0.0; 4]; 4];
        for a in 0..4 {
            for bb in a..4 {
                let g_ab = if a == bb { METRIC[a] } else { 0.0 };
                let v = (d[a] * d[bb].conj()).re - 0.5 * g_ab * (dd + m2)
                    + contract_second(&f, &f, a, bb)
                    - 0.25 * g_ab * f2;
                m[a][bb] = v;
                m[bb][a] = v;
            }
        }
        t.set_cell(i, &m);
    }
    t
}

impl KgmState {
    pub fn grid(&self) -> crate::fields::Grid {
        self.phi.grid
    }

    pub fn to_snapshot(&self, name: &str) -> Snapshot {
        let re = |f: &ComplexField| f.data.iter().map(|z| z.re).collect::<Vec<_>>();
        let im = |f: &ComplexField| f.data.iter().map(|z| z.im).collect::<Vec<_>>();
        let (pr, pi_, qr, qi) = (re(&self.phi), im(&self.phi), re(&self.pi), im(&self.pi));
        Snapshot {
            kind: FieldKind::KgmState,
            grid: self.grid(),
            time: self.t,
            epsilon: self.eps,
            name: name.into(),
            payload: interleave(&[
                &pr, &pi_, &qr, &qi, &self.a.c[0], &self.a.c[1], &self.a.c[2], &self.e.c[0],
                &self.e.c[1], &self.e.c[2],
            ]),
        }
    }

    pub fn from_snapshot(s: &Snapshot) -> Result<Self> {
        s.expect_kind(FieldKind::KgmState, Path::new(&s.name))?;
        let p = deinterleave(&s.payload, 10);
        let cplx = |r: &Vec<f64>, i: &Vec<f64>| ComplexField {
            grid: s.grid,
            data: r.iter().zip(i).map(|(&a, &b)| Complex64::new(a, b)).collect(),
        };
        Ok(Self {
            phi: cplx(&p[0], &p[1]),
            pi: cplx(&p[2], &p[3]),
            a: VectorField3 {
                grid: s.grid,
                c: [p[4].clone(), p[5].clone(), p[6].clone()],
            },
            e: VectorField3 {
                grid: s.grid,
                c: [p[7].clone(), p[8].clone(), p[9].clone()],
            },
            eps: s.epsilon,
            t: s.time,
        })
    }
}
