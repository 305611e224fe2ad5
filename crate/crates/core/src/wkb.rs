//! Monokinetic WKB data `Phi = exp(i omega / eps) Psi` matched to a fluid
//! state, Gauss-constraint repair and WKB residuals.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::{
    cross, dot, gauss_residual, ComplexField, NormKind, Ops, ScalarField, VectorField3,
};
use crate::kgm::{self, KgmState};
use crate::modenergy;
use crate::rem::{lorentz, velocity_rate, RemState};

/// Return `E` with the divergence-free part of `e_guess` and a curl-free
/// part solving `div E = q - <q>`.
///
/// The curl-free part is `grad psi` with `div grad psi` built from the same
/// first-derivative symbols as `div`, so the discrete residual vanishes on
/// every mode the backend can represent.
pub fn constraint_repair(e_guess: &VectorField3, charge: &ScalarField, ops: &Ops) -> Result<VectorField3> {
    e_guess.grid.same_as(&charge.grid, "charge")?;
    let (_, div_free) = ops.helmholtz(e_guess);
    let mean = charge.mean();
    let src = charge.map(|q| q - mean);
    Ok(div_free.add(&ops.curl_free_with_divergence(&src)))
}

/// Phase `omega = k.x + phi(x) - int U^0 dt` with `grad omega = u - A`.
#[derive(Clone, Debug)]
pub struct Phase {
    /// Wavevector snapped to `2 pi eps Z / L`.
    pub k: [f64; 3],
    /// Periodic correction `phi`.
    pub correction: ScalarField,
    /// `k + grad phi`.
    pub gradient: VectorField3,
    /// `U^0 = -d omega / dt`.
    pub u0: ScalarField,
    /// `|k - <u - A>|` per axis.
    pub snap_shift: [f64; 3],
    /// Max of `|(grad omega + A).(grad omega + A) + 1|` (Minkowski).
    pub eikonal_residual: f64,
}

pub fn eikonal_phase(
    u: &VectorField3,
    a: &VectorField3,
    eps: f64,
    ops: &Ops,
    snap_tol: f64,
) -> Result<Phase> {
    let g = u.grid;
    a.grid.same_as(&g, "A")?;
    let w = u.sub(a);
    let mean = w.mean();
    let l = g.extents();
    let mut k = [0.0; 3];
    let mut shift = [0.0; 3];
    for ax in 0..3 {
        let quantum = 2.0 * PI * eps / l[ax];
        k[ax] = (mean[ax] / quantum).round() * quantum;
        shift[ax] = (k[ax] - mean[ax]).abs();
        if shift[ax] > snap_tol {
            return Err(Error::SnapTolerance {
                axis: ax,
                shift: shift[ax],
                tol: snap_tol,
            });
        }
    }
    let fluct = VectorField3 {
        grid: g,
        c: std::array::from_fn(|ax| w.c[ax].iter().map(|v| v - mean[ax]).collect()),
    };
    let curl = ops.curl(&fluct).max_abs();
    if curl > 1e-8 {
        return Err(Error::NotGradient(curl));
    }
    let correction = ops.poisson(&ops.div(&fluct))?;
    let gp = ops.grad(&correction);
    let gradient = VectorField3 {
        grid: g,
        c: std::array::from_fn(|ax| gp.c[ax].iter().map(|v| v + k[ax]).collect()),
    };
    let u0 = lorentz(u);
    let mut res: f64 = 0.0;
    for i in 0..g.len() {
        let p: [f64; 3] = std::array::from_fn(|ax| gradient.c[ax][i] + a.c[ax][i]);
        res = res.max((-u0.data[i] * u0.data[i] + dot(p, p) + 1.0).abs());
    }
    Ok(Phase {
        k,
        correction,
        gradient,
        u0,
        snap_shift: shift,
        eikonal_residual: res,
    })
}

/// WKB ansatz at `t = 0` together with the fluid state it is built on.
#[derive(Clone, Debug)]
pub struct WkbAnsatz {
    pub eps: f64,
    pub phase: Phase,
    pub psi: ComplexField,
    pub psi_t: ComplexField,
    pub psi_tt: ComplexField,
    pub a: VectorField3,
    pub rem: RemState,
}

fn u_dot_grad(u: &VectorField3, z: &ComplexField, ops: &Ops) -> ComplexField {
    let mut out = ComplexField::zeros(z.grid);
    for ax in 0..3 {
        let d = ops.d_complex(z, ax);
        for i in 0..out.data.len() {
            out.data[i] += d.data[i] * u.c[ax][i];
        }
    }
    out
}

/// Time derivatives of the fluid at `t = 0` from the REM equations:
/// `(u_t, u_tt, U0_t, U0_tt)`.
fn fluid_rates(rem: &RemState, ops: &Ops) -> (VectorField3, VectorField3, ScalarField, ScalarField) {
    let g = rem.grid();
    let u = &rem.u;
    let u0 = lorentz(u);
    let ut = velocity_rate(u, &rem.e, &rem.b, ops);
    let current = VectorField3 {
        grid: g,
        c: std::array::from_fn(|a| u.c[a].iter().zip(&rem.rho.data).map(|(x, r)| x * r).collect()),
    };
    let et = ops.curl(&rem.b).sub(&current);
    let bt = ops.curl(&rem.e).scale(-1.0);
    let grads = |v: &VectorField3| -> [[ScalarField; 3]; 3] {
        std::array::from_fn(|i| {
            let vi = v.component(i);
            std::array::from_fn(|j| ops.d(&vi, j))
        })
    };
    let gu = grads(u);
    let gut = grads(&ut);
    let mut u0t = ScalarField::zeros(g);
    let mut u0tt = ScalarField::zeros(g);
    let mut utt = VectorField3::zeros(g);
    for c in 0..g.len() {
        let uv = u.at(c);
        let utv = ut.at(c);
        let w = u0.data[c];
        let w_t = dot(uv, utv) / w;
        let b = rem.b.at(c);
        let n: [f64; 3] = {
            let l = cross(uv, b);
            std::array::from_fn(|i| -(0..3).map(|j| uv[j] * gu[i][j].data[c]).sum::<f64>() + l[i])
        };
        let n_t: [f64; 3] = {
            let l1 = cross(utv, b);
            let l2 = cross(uv, bt.at(c));
            std::array::from_fn(|i| {
                -(0..3).map(|j| utv[j] * gu[i][j].data[c] + uv[j] * gut[i][j].data[c]).sum::<f64>()
                    + l1[i]
                    + l2[i]
            })
        };
        let uttv: [f64; 3] = std::array::from_fn(|i| n_t[i] / w - n[i] * w_t / (w * w) + et.c[i][c]);
        utt.set(c, uttv);
        u0t.data[c] = w_t;
        u0tt.data[c] = (dot(utv, utv) + dot(uv, uttv)) / w - dot(uv, utv).powi(2) / (w * w * w);
    }
    (ut, utt, u0t, u0tt)
}

/// Build the ansatz on a fluid state; `psi` is the amplitude at `t = 0`.
///
/// `Psi_t` solves the transport equation
/// `2 (U^0 Psi_t + u.grad Psi) + (U0_t + div u) Psi = 0` and `Psi_tt` is its
/// time derivative with the fluid rates taken from the REM equations.
pub fn build_ansatz(
    rem: &RemState,
    a: &VectorField3,
    psi: ComplexField,
    eps: f64,
    ops: &Ops,
    snap_tol: f64,
) -> Result<WkbAnsatz> {
    let phase = eikonal_phase(&rem.u, a, eps, ops, snap_tol)?;
    let g = rem.grid();
    let u0 = &phase.u0;
    let (ut, _utt, u0t, u0tt) = fluid_rates(rem, ops);
    let div_u = ops.div(&rem.u);
    let div_ut = ops.div(&ut);
    let adv = u_dot_grad(&rem.u, &psi, ops);
    let mut psi_t = ComplexField::zeros(g);
    for i in 0..g.len() {
        psi_t.data[i] = -(adv.data[i] * 2.0 + psi.data[i] * (u0t.data[i] + div_u.data[i])) / (2.0 * u0.data[i]);
    }
    let adv_t = u_dot_grad(&rem.u, &psi_t, ops);
    let adv_ut = u_dot_grad(&ut, &psi, ops);
    let mut psi_tt = ComplexField::zeros(g);
    for i in 0..g.len() {
        let w = u0.data[i];
        let n_t = (adv_ut.data[i] + adv_t.data[i]) * 2.0
            + psi.data[i] * (u0tt.data[i] + div_ut.data[i])
            + psi_t.data[i] * (u0t.data[i] + div_u.data[i]);
        psi_tt.data[i] = -n_t / (2.0 * w) - psi_t.data[i] * (u0t.data[i] / w);
    }
    Ok(WkbAnsatz {
        eps,
        phase,
        psi,
        psi_t,
        psi_tt,
        a: a.clone(),
        rem: rem.clone(),
    })
}

impl WkbAnsatz {
    /// `exp(i omega(0, x) / eps)`; exactly grid periodic.
    pub fn phase_factor(&self) -> ComplexField {
        let g = self.psi.grid;
        let k = self.phase.k;
        ComplexField {
            grid: g,
            data: (0..g.len())
                .map(|i| {
                    let x = g.position(i);
                    let om = k[0] * x[0] + k[1] * x[1] + k[2] * x[2] + self.phase.correction.data[i];
                    Complex64::from_polar(1.0, om / self.eps)
                })
                .collect(),
        }
    }

    /// `Phi_0 = e Psi` and `Pi_0 = e (-i U^0 Psi + eps Psi_t)`.
    pub fn fields(&self) -> (ComplexField, ComplexField) {
        let e = self.phase_factor();
        let phi = ComplexField {
            grid: e.grid,
            data: e.data.iter().zip(&self.psi.data).map(|(e, p)| e * p).collect(),
        };
        let pi = ComplexField {
            grid: e.grid,
            data: (0..e.data.len())
                .map(|i| {
                    let inner = Complex64::new(0.0, -self.phase.u0.data[i]) * self.psi.data[i]
                        + self.psi_t.data[i] * self.eps;
                    e.data[i] * inner
                })
                .collect(),
        };
        (phi, pi)
    }

    pub fn kgm_state(&self, ops: &Ops) -> Result<KgmState> {
        let (phi, pi) = self.fields();
        Ok(kgm::kgm_init(phi, pi, self.a.clone(), self.rem.e.clone(), self.eps, ops)?.0)
    }
}

/// L2 norms of the Maxwell and Klein-Gordon residuals of the ansatz at
/// `t = 0`. Fields evolve by the fluid equations, so the Maxwell residual
/// measures `J^eps - rho U`; the Klein-Gordon residual is
/// `-D_0 D_0 Phi + sum_j D_j D_j Phi - Phi` with `D_0 D_0` taken
/// analytically from the ansatz.
pub fn wkb_residual(ans: &WkbAnsatz, ops: &Ops) -> Result<(f64, f64)> {
    let eps = ans.eps;
    let state = ans.kgm_state(ops)?;
    let g = state.grid();
    let e = ans.phase_factor();
    let u0 = &ans.phase.u0;
    let (_, _, u0t, _) = fluid_rates(&ans.rem, ops);
    let dphi = kgm::covariant_gradient(&state.phi, &state.a, eps, ops);
    let mut lap = ComplexField::zeros(g);
    for (j, dj) in dphi.iter().enumerate() {
        let dd = ops.d_complex(dj, j);
        for i in 0..g.len() {
            lap.data[i] += dd.data[i] * eps + Complex64::new(0.0, state.a.c[j][i]) * dj.data[i];
        }
    }
    let i1 = Complex64::new(0.0, 1.0);
    let kg = ComplexField {
        grid: g,
        data: (0..g.len())
            .map(|i| {
                let w = u0.data[i];
                let (p, pt, ptt) = (ans.psi.data[i], ans.psi_t.data[i], ans.psi_tt.data[i]);
                let d00 = e.data[i]
                    * (-(w * w) * p - i1 * eps * (u0t.data[i] * p + pt * (2.0 * w)) + ptt * (eps * eps));
                -d00 + lap.data[i] - state.phi.data[i]
            })
            .collect(),
    };
    let kg_res = kg.norm(NormKind::L2);

    let j = kgm::current(&state, ops);
    let q_eps = kgm::charge_density(&state);
    let gauss = gauss_residual(ops, &state.e, &q_eps);
    let rho = &ans.rem.rho;
    let mut amp = 0.0;
    for ax in 0..3 {
        for i in 0..g.len() {
            let fluid = ans.rem.u.c[ax][i] * rho.data[i];
            amp += (fluid - j.s.c[ax][i]).powi(2);
        }
    }
    let amp = (amp * g.cell_volume()).sqrt();
    Ok(((gauss * gauss + amp * amp).sqrt(), kg_res))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    Constant,
    SineBump,
    GaussianBump,
}

impl std::str::FromStr for ProfileKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Self::Constant),
            "sine-bump" => Ok(Self::SineBump),
            "gaussian-bump" => Ok(Self::GaussianBump),
            other => Err(Error::InvalidConfig(format!("unknown profile '{other}'"))),
        }
    }
}

/// Analytic initial profile. All spatial variation is along `x` with
/// wavenumber `mode` (in units of `2 pi / L_x`).
///
/// * density: `rho0 (1 + amplitude s(x))`, with `s = sin` for the sine bump
///   and a periodized Gaussian of width `width` centred at `L_x/2` for the
///   Gaussian bump (none for constant);
/// * velocity: `velocity + velocity_amplitude sin(...) e_x + A`, where `A`
///   is the divergence-free potential of `B`, so `u - A` is a gradient;
/// * magnetic field: `b_amplitude sin(...) e_z`;
/// * amplitude phase: `Psi = sqrt(rho) exp(i phase_amplitude cos(...))`.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Profile {
    pub kind: ProfileKind,
    pub rho0: f64,
    pub amplitude: f64,
    pub width: f64,
    pub mode: u32,
    pub velocity: [f64; 3],
    pub velocity_amplitude: f64,
    pub phase_amplitude: f64,
    pub b_amplitude: f64,
}

impl Default for Profile {
    fn default() -> Self {
        Self {
            kind: ProfileKind::SineBump,
            rho0: 1.0,
            amplitude: 0.5,
            width: 0.1,
            mode: 1,
            velocity: [0.0; 3],
            velocity_amplitude: 0.0,
            phase_amplitude: 0.0,
            b_amplitude: 0.0,
        }
    }
}

impl Profile {
    fn arg(&self, x: f64, lx: f64) -> f64 {
        2.0 * PI * self.mode as f64 * x / lx
    }

    pub fn density(&self, x: [f64; 3], l: [f64; 3]) -> f64 {
        let s = match self.kind {
            ProfileKind::Constant => 0.0,
            ProfileKind::SineBump => self.arg(x[0], l[0]).sin(),
            ProfileKind::GaussianBump => (-3..=3)
                .map(|j| {
                    let d = x[0] - 0.5 * l[0] + j as f64 * l[0];
                    (-d * d / (2.0 * self.width * self.width)).exp()
                })
                .sum(),
        };
        self.rho0 * (1.0 + self.amplitude * s)
    }

    pub fn magnetic(&self, x: [f64; 3], l: [f64; 3]) -> [f64; 3] {
        [0.0, 0.0, self.b_amplitude * self.arg(x[0], l[0]).sin()]
    }

    pub fn gradient_velocity(&self, x: [f64; 3], l: [f64; 3]) -> [f64; 3] {
        let s = self.velocity_amplitude * self.arg(x[0], l[0]).sin();
        [self.velocity[0] + s, self.velocity[1], self.velocity[2]]
    }

    pub fn amplitude_phase(&self, x: [f64; 3], l: [f64; 3]) -> f64 {
        self.phase_amplitude * self.arg(x[0], l[0]).cos()
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct PreparationRow {
    pub eps: f64,
    pub h0: f64,
    pub h0_over_eps2: f64,
    pub gauss_kgm: f64,
    pub gauss_rem: f64,
    pub sqrt_rho_l2: f64,
    pub snap_shift: f64,
    pub eikonal_residual: f64,
}

#[derive(Clone, Debug)]
pub struct MatchedPair {
    pub rem: RemState,
    pub a: VectorField3,
    pub family: Vec<(f64, KgmState)>,
    pub ansatz: Vec<WkbAnsatz>,
    pub report: Vec<PreparationRow>,
}

/// Fluid data on `ops`' grid: `B = -curl A` with `A` the potential of the
/// profile field, `E` from the Gauss constraint.
pub fn rem_data(profile: &Profile, ops: &Ops) -> Result<(RemState, VectorField3)> {
    let g = *ops.grid();
    let l = g.extents();
    let rho = ScalarField::from_fn(g, |x| profile.density(x, l));
    if rho.min() < 0.0 {
        return Err(Error::NegativeDensity { min: rho.min() });
    }
    let b_target = VectorField3::from_fn(g, |x| profile.magnetic(x, l));
    let a = ops.vector_potential(&b_target);
    let b = ops.curl(&a).scale(-1.0);
    let u = VectorField3::from_fn(g, |x| profile.gradient_velocity(x, l)).add(&a);
    let q = lorentz(&u).zip_map(&rho, |w, r| w * r);
    let e = constraint_repair(&VectorField3::zeros(g), &q, ops)?;
    Ok((
        RemState {
            u,
            rho,
            e,
            b,
            t: 0.0,
        },
        a,
    ))
}

/// Matched fluid and Klein-Gordon-Maxwell data for each `eps` (descending)
/// on one grid. `E` and `A` are shared, so the electromagnetic part of the
/// modulated energy vanishes at `t = 0`.
pub fn make_matched_pair(profile: &Profile, eps_list: &[f64], ops: &Ops, snap_tol: f64) -> Result<MatchedPair> {
    if eps_list.is_empty() || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidConfig("eps list must be non-empty and strictly decreasing".into()));
    }
    let (rem, a) = rem_data(profile, ops)?;
    let g = rem.grid();
    let l = g.extents();
    let psi = ComplexField::from_fn(g, |x| {
        Complex64::from_polar(profile.density(x, l).sqrt(), profile.amplitude_phase(x, l))
    });
    let sqrt_rho = rem.rho.map(f64::sqrt);
    let gauss_rem = gauss_residual(ops, &rem.e, &rem.charge_density());
    let mut family = Vec::new();
    let mut ansatz = Vec::new();
    let mut report = Vec::new();
    for &eps in eps_list {
        let ans = build_ansatz(&rem, &a, psi.clone(), eps, ops, snap_tol)?;
        let state = ans.kgm_state(ops)?;
        let mf = modenergy::modulated_fields(&state, &rem, ops, 0.0)?;
        let h0 = modenergy::modulated_energy(&mf, None);
        let dist = state
            .phi
            .modulus_sq()
            .map(f64::sqrt)
            .zip_map(&sqrt_rho, |a, b| a - b)
            .norm(NormKind::L2);
        report.push(PreparationRow {
            eps,
            h0,
            h0_over_eps2: h0 / (eps * eps),
            gauss_kgm: kgm::state_gauss_residual(&state, ops),
            gauss_rem,
            sqrt_rho_l2: dist,
            snap_shift: ans.phase.snap_shift.iter().cloned().fold(0.0, f64::max),
            eikonal_residual: ans.phase.eikonal_residual,
        });
        family.push((eps, state));
        ansatz.push(ans);
    }
    Ok(MatchedPair {
        rem,
        a,
        family,
        ansatz,
        report,
    })
}
