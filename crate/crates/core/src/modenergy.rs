//! Modulated stress-energy of a Klein-Gordon-Maxwell state relative to a
//! fluid state: `xi`, `Xi`, `h`, `I`, modulated energies, the sandwich
//! bounds, observable distances and the propagation budget.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::tensor::{contract_second, faraday_invariant, faraday_matrix, full_contract, Mat4, METRIC};
use crate::fields::{
    quadrature, ComplexField, FaradayField, FourVectorField, IndexPosition, Ops, ScalarField,
    StressTensorField,
};
use crate::kgm::{self, KgmState};
use crate::rem::{self, RemState};

#[derive(Clone, Debug)]
pub struct ModulatedFields {
    /// Covariant `xi_a = (D_a - i U_a) Phi`.
    pub xi: [ComplexField; 4],
    /// `(E^eps - E, B^eps - B)`.
    pub xi_em: FaradayField,
    pub h: StressTensorField,
    pub i: StressTensorField,
    /// Contravariant fluid four-velocity.
    pub u: FourVectorField,
    pub t: f64,
}

fn cell_u(rem: &RemState, u0: &ScalarField, c: usize) -> [f64; 4] {
    [u0.data[c], rem.u.c[0][c], rem.u.c[1][c], rem.u.c[2][c]]
}

fn lower(v: [f64; 4]) -> [f64; 4] {
    [-v[0], v[1], v[2], v[3]]
}

/// Assemble `xi`, `Xi`, `h` and `I`. States must share a grid and agree in
/// time to within `time_tol`.
pub fn modulated_fields(kgm: &KgmState, rem: &RemState, ops: &Ops, time_tol: f64) -> Result<ModulatedFields> {
    let g = kgm.grid();
    rem.grid().same_as(&g, "rem state")?;
    if (kgm.t - rem.t).abs() > time_tol {
        return Err(Error::TimeMismatch(format!("kgm t = {}, rem t = {}", kgm.t, rem.t)));
    }
    let dphi = kgm::covariant_gradient(&kgm.phi, &kgm.a, kgm.eps, ops);
    let j_eps = kgm::current(kgm, ops);
    let b_eps = kgm::magnetic_field(kgm, ops);
    let u0 = rem.u0();
    let mut xi: [ComplexField; 4] = std::array::from_fn(|_| ComplexField::zeros(g));
    let mut h = StressTensorField::zeros(g);
    let mut it = StressTensorField::zeros(g);
    let mut uf = FourVectorField::zeros(g, IndexPosition::Contravariant);
    let xi_em = FaradayField::new(kgm.e.sub(&rem.e), b_eps.sub(&rem.b))?;
    for c in 0..g.len() {
        let up = cell_u(rem, &u0, c);
        let ul = lower(up);
        let p = kgm.phi.data[c];
        let d = [kgm.pi.data[c], dphi[0].data[c], dphi[1].data[c], dphi[2].data[c]];
        let x: [Complex64; 4] = std::array::from_fn(|a| d[a] - Complex64::new(0.0, ul[a]) * p);
        for a in 0..4 {
            xi[a].data[c] = x[a];
        }
        uf.t.data[c] = up[0];
        for a in 0..3 {
            uf.s.c[a][c] = up[a + 1];
        }
        let fe = faraday_matrix(kgm.e.at(c), b_eps.at(c));
        let f = faraday_matrix(rem.e.at(c), rem.b.at(c));
        let xm: Mat4 = std::array::from_fn(|a| std::array::from_fn(|b| fe[a][b] - f[a][b]));
        let xx: f64 = (0..4).map(|g_| METRIC[g_] * x[g_].norm_sqr()).sum();
        let x2 = faraday_invariant(&xm);
        let rho_eps = p.norm_sqr();
        let rho = rem.rho.data[c];
        let jl = j_eps.at(c);
        let jmu: [f64; 4] = std::array::from_fn(|a| jl[a] - ul[a] * rho_eps);
        let jmu_u: f64 = (0..4).map(|a| jmu[a] * up[a]).sum();
        let fdiff = full_contract(&f, &xm);
        let mut hm = [[0.0; 4]; 4];
        let mut im = [[0.0; 4]; 4];
        for a in 0..4 {
            for b in a..4 {
                let g_ab = if a == b { METRIC[a] } else { 0.0 };
                let hv = (x[a] * x[b].conj()).re - 0.5 * g_ab * xx + contract_second(&xm, &xm, a, b)
                    - 0.25 * g_ab * x2;
                let iv = -ul[a] * ul[b] * (rho - rho_eps)
                    + ul[a] * jmu[b]
                    + ul[b] * jmu[a]
                    + contract_second(&f, &xm, a, b)
                    + contract_second(&xm, &f, a, b)
                    - g_ab * jmu_u
                    - 0.5 * g_ab * fdiff;
                hm[a][b] = hv;
                hm[b][a] = hv;
                im[a][b] = iv;
                im[b][a] = iv;
            }
        }
        h.set_cell(c, &hm);
        it.set_cell(c, &im);
    }
    Ok(ModulatedFields {
        xi,
        xi_em,
        h,
        i: it,
        u: uf,
        t: kgm.t,
    })
}

/// Max over cells and components of `|h + I - (T_kgm - T_rem)|`, relative
/// to the largest tensor entry involved.
pub fn decomposition_gap(mf: &ModulatedFields, kgm: &KgmState, rem: &RemState, ops: &Ops) -> f64 {
    let tk = kgm::stress_energy(kgm, ops);
    let tr = rem::stress_energy(rem);
    let mut gap: f64 = 0.0;
    let mut scale: f64 = f64::MIN_POSITIVE;
    for s in 0..10 {
        for c in 0..tk.grid.len() {
            let lhs = mf.h.comps[s][c] + mf.i.comps[s][c];
            let rhs = tk.comps[s][c] - tr.comps[s][c];
            gap = gap.max((lhs - rhs).abs());
            scale = scale
                .max(tk.comps[s][c].abs())
                .max(tr.comps[s][c].abs())
                .max(mf.h.comps[s][c].abs())
                .max(mf.i.comps[s][c].abs());
        }
    }
    gap / scale
}

/// Timelike future-directed field with `X^0 >= nu`, `-X.X >= nu` and
/// Euclidean `|X| <= 1/nu` in every cell.
#[derive(Clone, Debug)]
pub struct AcceptableVectorField {
    x: FourVectorField,
    nu: f64,
}

impl AcceptableVectorField {
    pub fn new(x: FourVectorField, nu: f64) -> Result<Self> {
        if x.position != IndexPosition::Contravariant {
            return Err(Error::NotAcceptable("field must be contravariant".into()));
        }
        if !(nu > 0.0) {
            return Err(Error::NotAcceptable(format!("nu = {nu} must be positive")));
        }
        let slack = 1e-12;
        for c in 0..x.grid().len() {
            let v = x.at(c);
            let e2: f64 = v.iter().map(|a| a * a).sum();
            let m = v[0] * v[0] - v[1] * v[1] - v[2] * v[2] - v[3] * v[3];
            if v[0] < nu - slack {
                return Err(Error::NotAcceptable(format!("X^0 = {} < nu = {nu} at cell {c}", v[0])));
            }
            if m < nu - slack {
                return Err(Error::NotAcceptable(format!("-X.X = {m} < nu = {nu} at cell {c}")));
            }
            if e2.sqrt() > 1.0 / nu + slack {
                return Err(Error::NotAcceptable(format!("|X| = {} > 1/nu at cell {c}", e2.sqrt())));
            }
        }
        Ok(Self { x, nu })
    }

    /// The constant field `d/dt` with `nu = 1`.
    pub fn time(grid: crate::fields::Grid) -> Self {
        let mut x = FourVectorField::zeros(grid, IndexPosition::Contravariant);
        x.t = ScalarField::constant(grid, 1.0);
        Self { x, nu: 1.0 }
    }

    /// The fluid four-velocity with the largest admissible `nu`.
    pub fn from_rem(rem: &RemState) -> Self {
        let g = rem.grid();
        let u0 = rem.u0();
        let mut x = FourVectorField::zeros(g, IndexPosition::Contravariant);
        let mut big: f64 = 1.0;
        for c in 0..g.len() {
            let v = cell_u(rem, &u0, c);
            x.t.data[c] = v[0];
            for a in 0..3 {
                x.s.c[a][c] = v[a + 1];
            }
            big = big.max(v.iter().map(|a| a * a).sum::<f64>().sqrt());
        }
        Self { x, nu: 1.0 / big }
    }

    pub fn field(&self) -> &FourVectorField {
        &self.x
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }
}

/// `int eta(X)` with `eta(X) = h_{a0} X^a`; `None` means `X = d/dt`.
pub fn modulated_energy(mf: &ModulatedFields, x: Option<&AcceptableVectorField>) -> f64 {
    let g = mf.h.grid;
    match x {
        None => quadrature(&g, mf.h.comps[0].iter().copied()),
        Some(x) => quadrature(&g, (0..g.len()).map(|c| eta(mf, x.field(), c))),
    }
}

#[inline]
fn eta(mf: &ModulatedFields, x: &FourVectorField, c: usize) -> f64 {
    let v = x.at(c);
    (0..4).map(|a| mf.h.get(c, a, 0) * v[a]).sum()
}

/// Kinetic part `int |xi|^2 / 2` (Euclidean sum over components).
pub fn kinetic_part(mf: &ModulatedFields) -> f64 {
    let g = mf.h.grid;
    quadrature(&g, (0..g.len()).map(|c| 0.5 * mf.xi.iter().map(|x| x.data[c].norm_sqr()).sum::<f64>()))
}

/// Electromagnetic part `int (|E^eps - E|^2 + |B^eps - B|^2) / 2`.
pub fn em_part(mf: &ModulatedFields) -> f64 {
    let g = mf.h.grid;
    quadrature(
        &g,
        (0..g.len()).map(|c| {
            let e = mf.xi_em.e.at(c);
            let b = mf.xi_em.b.at(c);
            0.5 * (0..3).map(|a| e[a] * e[a] + b[a] * b[a]).sum::<f64>()
        }),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Sandwich {
    pub c1: f64,
    pub c2: f64,
    pub h0: f64,
    pub hx: f64,
    pub holds: bool,
}

/// Constants with `c1 eta(d/dt) <= eta(X) <= c2 eta(d/dt)` cellwise:
/// `c1 = min(X^0 - |X_s|)`, `c2 = max(X^0 + |X_s|)`; `c1 >= nu^2 / 2` for
/// acceptable `X`.
pub fn sandwich(mf: &ModulatedFields, x: &AcceptableVectorField) -> Sandwich {
    let f = x.field();
    let mut c1 = f64::INFINITY;
    let mut c2: f64 = 0.0;
    for c in 0..f.grid().len() {
        let v = f.at(c);
        let s = (v[1] * v[1] + v[2] * v[2] + v[3] * v[3]).sqrt();
        c1 = c1.min(v[0] - s);
        c2 = c2.max(v[0] + s);
    }
    let h0 = modulated_energy(mf, None);
    let hx = modulated_energy(mf, Some(x));
    let tol = 1e-12 * h0.abs() + 1e-300;
    Sandwich {
        c1,
        c2,
        h0,
        hx,
        holds: c1 * h0 <= hx + tol && hx <= c2 * h0 + tol,
    }
}

fn mask(rho_eps: &ScalarField, floor_rel: f64) -> (Vec<bool>, usize) {
    let floor = floor_rel * rho_eps.max();
    let m: Vec<bool> = rho_eps.data.iter().map(|&r| r >= floor && r > 0.0).collect();
    let n = m.iter().filter(|&&b| !b).count();
    (m, n)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct H00Forms {
    pub form1: f64,
    pub form2: f64,
    pub gap: f64,
    pub masked: usize,
}

/// Compare `int h00` with its split form
/// `eps^2 |d sqrt rho|^2 / 2 + sum_a (J_a - rho U_a)^2 / (2 rho) + EM`,
/// `eps d_a sqrt rho = Re(conj(Phi) D_a Phi) / |Phi|`, over cells with
/// `|Phi|^2 >= floor_rel * max |Phi|^2`.
pub fn h00_forms(kgm: &KgmState, rem: &RemState, ops: &Ops, floor_rel: f64) -> Result<H00Forms> {
    let mf = modulated_fields(kgm, rem, ops, f64::INFINITY)?;
    let g = kgm.grid();
    let rho_eps = kgm.phi.modulus_sq();
    let (keep, masked) = mask(&rho_eps, floor_rel);
    if masked == g.len() {
        return Err(Error::AllMasked);
    }
    let dphi = kgm::covariant_gradient(&kgm.phi, &kgm.a, kgm.eps, ops);
    let u0 = rem.u0();
    let mut f1 = Vec::with_capacity(g.len());
    let mut f2 = Vec::with_capacity(g.len());
    for c in 0..g.len() {
        if !keep[c] {
            continue;
        }
        let p = kgm.phi.data[c];
        let r = rho_eps.data[c];
        let d = [kgm.pi.data[c], dphi[0].data[c], dphi[1].data[c], dphi[2].data[c]];
        let ul = lower(cell_u(rem, &u0, c));
        let e = mf.xi_em.e.at(c);
        let b = mf.xi_em.b.at(c);
        let em = 0.5 * (0..3).map(|a| e[a] * e[a] + b[a] * b[a]).sum::<f64>();
        let mut kin = 0.0;
        for a in 0..4 {
            let z = p.conj() * d[a];
            let grad = z.re / r.sqrt();
            let mism = z.im - r * ul[a];
            kin += 0.5 * grad * grad + mism * mism / (2.0 * r);
        }
        f1.push(mf.h.comps[0][c]);
        f2.push(kin + em);
    }
    let form1 = quadrature(&g, f1.into_iter());
    let form2 = quadrature(&g, f2.into_iter());
    let scale = form1.abs().max(form2.abs());
    Ok(H00Forms {
        form1,
        form2,
        gap: if scale > 0.0 { (form1 - form2).abs() / scale } else { 0.0 },
        masked,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Distances {
    /// Sum over the four covariant components of `||J^eps_a - rho U_a||_L1`.
    pub j_l1: f64,
    pub f_l2: f64,
    pub rho_l1: f64,
    pub sqrt_rho_l2: f64,
}

pub fn observable_distances(kgm: &KgmState, rem: &RemState, ops: &Ops) -> Result<Distances> {
    let g = kgm.grid();
    rem.grid().same_as(&g, "rem state")?;
    let j = kgm::current(kgm, ops);
    let b_eps = kgm::magnetic_field(kgm, ops);
    let u0 = rem.u0();
    let rho_eps = kgm.phi.modulus_sq();
    let mut jl = 0.0;
    let mut f2 = 0.0;
    let mut rl = 0.0;
    let mut sl = 0.0;
    for c in 0..g.len() {
        let ul = lower(cell_u(rem, &u0, c));
        let r = rem.rho.data[c];
        let je = j.at(c);
        jl += (0..4).map(|a| (je[a] - r * ul[a]).abs()).sum::<f64>();
        for a in 0..3 {
            f2 += (kgm.e.c[a][c] - rem.e.c[a][c]).powi(2) + (b_eps.c[a][c] - rem.b.c[a][c]).powi(2);
        }
        rl += (rho_eps.data[c] - r).abs();
        sl += (rho_eps.data[c].sqrt() - r.max(0.0).sqrt()).powi(2);
    }
    let v = g.cell_volume();
    Ok(Distances {
        j_l1: jl * v,
        f_l2: (f2 * v).sqrt(),
        rho_l1: rl * v,
        sqrt_rho_l2: (sl * v).sqrt(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModulatedEnergyReport {
    pub t: f64,
    pub h0: f64,
    pub hu: f64,
    pub k0: f64,
    pub p0: f64,
    pub distances: Distances,
    /// Sandwich constants for `X = U`.
    pub sandwich: Sandwich,
    /// `|F^eps - F|^2 <= 2 h_00` in every quadrature cell (up to a few
    /// ulps), hence `||F^eps - F||^2 <= 2 H0`.
    pub coercive: bool,
}

impl ModulatedEnergyReport {
    pub fn compute(kgm: &KgmState, rem: &RemState, ops: &Ops, time_tol: f64) -> Result<Self> {
        let mf = modulated_fields(kgm, rem, ops, time_tol)?;
        let x = AcceptableVectorField::from_rem(rem);
        let sw = sandwich(&mf, &x);
        let distances = observable_distances(kgm, rem, ops)?;
        let h0 = sw.h0;
        Ok(Self {
            t: kgm.t,
            h0,
            hu: sw.hx,
            k0: kinetic_part(&mf),
            p0: em_part(&mf),
            coercive: coercive_cells(&mf) == 0,
            distances,
            sandwich: sw,
        })
    }
}

/// Number of cells where `|E^eps - E|^2 + |B^eps - B|^2 > 2 h_00` beyond
/// roundoff.
pub fn coercive_cells(mf: &ModulatedFields) -> usize {
    let g = mf.h.grid;
    (0..g.len())
        .filter(|&c| {
            let e = mf.xi_em.e.at(c);
            let b = mf.xi_em.b.at(c);
            let f2: f64 = (0..3).map(|k| e[k] * e[k] + b[k] * b[k]).sum();
            let h00 = 2.0 * mf.h.get(c, 0, 0);
            f2 - h00 > 8.0 * f64::EPSILON * (f2 + h00.abs())
        })
        .count()
}

/// Contravariant `grad^a U^b` per cell; time derivatives of `u` come from
/// the fluid equations at the snapshot.
fn velocity_gradient(rem: &RemState, ops: &Ops) -> Vec<Mat4> {
    let g = rem.grid();
    let u0 = rem.u0();
    let ut = rem::velocity_rate(&rem.u, &rem.e, &rem.b, ops);
    let ucomp: [ScalarField; 4] = [u0.clone(), rem.u.component(0), rem.u.component(1), rem.u.component(2)];
    let spatial: [[ScalarField; 3]; 4] = std::array::from_fn(|b| std::array::from_fn(|j| ops.d(&ucomp[b], j)));
    (0..g.len())
        .map(|c| {
            let uv = rem.u.at(c);
            let utv = ut.at(c);
            let dt = [
                (uv[0] * utv[0] + uv[1] * utv[1] + uv[2] * utv[2]) / u0.data[c],
                utv[0],
                utv[1],
                utv[2],
            ];
            let mut m = [[0.0; 4]; 4];
            for b in 0..4 {
                // grad^0 = -d_t, grad^j = d_j.
                m[0][b] = -dt[b];
                for j in 0..3 {
                    m[j + 1][b] = spatial[b][j].data[c];
                }
            }
            m
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BudgetRow {
    pub t: f64,
    pub hu: f64,
    pub dhu_dt: f64,
    pub h1: f64,
    pub h21: f64,
    pub h22: f64,
    pub g: f64,
    pub closure_gap: f64,
}

/// Terms of the modulated energy balance
/// `d H_U/dt = H1 + H2.1 + H2.2` at every interior snapshot of two
/// synchronized trajectories, with `d H_U / dt` by centered differences.
///
/// `H1 = -int h_ab grad^a U^b`,
/// `H2.1 = int div U [-J.J/(2 rho) + J.U + rho/2]`,
/// `H2.2 = int div U [J.J/(2 rho) + rho/2]` (Minkowski dots, `rho` the
/// Klein-Gordon density, cells under the floor skipped),
/// `G = -int div U eps Re(conj(Phi) Pi) / 2`.
pub fn propagation_budget(
    kgm_traj: &[KgmState],
    rem_traj: &[RemState],
    ops: &Ops,
    floor_rel: f64,
) -> Result<Vec<BudgetRow>> {
    if kgm_traj.len() < 3 || rem_traj.len() != kgm_traj.len() {
        return Err(Error::InsufficientSnapshots {
            need: 3,
            got: kgm_traj.len().min(rem_traj.len()),
        });
    }
    let times: Vec<f64> = kgm_traj.iter().map(|s| s.t).collect();
    let dt = rem::uniform_spacing(&times)?;
    let hu: Vec<f64> = kgm_traj
        .iter()
        .zip(rem_traj)
        .map(|(k, r)| {
            let mf = modulated_fields(k, r, ops, 0.5 * dt)?;
            Ok(modulated_energy(&mf, Some(&AcceptableVectorField::from_rem(r))))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for n in 1..kgm_traj.len() - 1 {
        let (k, r) = (&kgm_traj[n], &rem_traj[n]);
        let mf = modulated_fields(k, r, ops, 0.5 * dt)?;
        let grad = velocity_gradient(r, ops);
        let g = k.grid();
        let j = kgm::current(k, ops);
        let rho_eps = k.phi.modulus_sq();
        let (keep, _) = mask(&rho_eps, floor_rel);
        let u0 = r.u0();
        let mut t1 = Vec::with_capacity(g.len());
        let mut t21 = Vec::with_capacity(g.len());
        let mut t22 = Vec::with_capacity(g.len());
        let mut tg = Vec::with_capacity(g.len());
        for c in 0..g.len() {
            let m = &grad[c];
            let mut s = 0.0;
            for a in 0..4 {
                for b in 0..4 {
                    s += mf.h.get(c, a, b) * m[a][b];
                }
            }
            t1.push(-s);
            // div U = d_t U^0 + d_j u^j = -grad^0 U^0 + sum_j grad^j U^j.
            let div_u = -m[0][0] + m[1][1] + m[2][2] + m[3][3];
            let p = k.phi.data[c];
            tg.push(-div_u * k.eps * (p.conj() * k.pi.data[c]).re / 2.0);
            if !keep[c] {
                t21.push(0.0);
                t22.push(0.0);
                continue;
            }
            let re = rho_eps.data[c];
            let jl = j.at(c);
            let up = cell_u(r, &u0, c);
            let jj = -jl[0] * jl[0] + jl[1] * jl[1] + jl[2] * jl[2] + jl[3] * jl[3];
            let ju: f64 = (0..4).map(|a| jl[a] * up[a]).sum();
            t21.push(div_u * (-jj / (2.0 * re) + ju + re / 2.0));
            t22.push(div_u * (jj / (2.0 * re) + re / 2.0));
        }
        let h1 = quadrature(&g, t1.into_iter());
        let h21 = quadrature(&g, t21.into_iter());
        let h22 = quadrature(&g, t22.into_iter());
        let gterm = quadrature(&g, tg.into_iter());
        let dhu = (hu[n + 1] - hu[n - 1]) / (2.0 * dt);
        rows.push(BudgetRow {
            t: k.t,
            hu: hu[n],
            dhu_dt: dhu,
            h1,
            h21,
            h22,
            g: gterm,
            closure_gap: (dhu - (h1 + h21 + h22)).abs(),
        });
    }
    Ok(rows)
}

/// `3 H0 sum_ab sup |grad^a U^b|`, an upper bound for `|H1|` (each
/// component of `h` is bounded by `3 h00`).
pub fn h1_bound(mf: &ModulatedFields, rem: &RemState, ops: &Ops) -> f64 {
    let grad = velocity_gradient(rem, ops);
    let mut sup = [[0.0f64; 4]; 4];
    for m in &grad {
        for a in 0..4 {
            for b in 0..4 {
                sup[a][b] = sup[a][b].max(m[a][b].abs());
            }
        }
    }
    let s: f64 = sup.iter().flatten().sum();
    3.0 * s * modulated_energy(mf, None)
}
