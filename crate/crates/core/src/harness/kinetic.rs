//! Weak Vlasov-Maxwell checks on fluid trajectories.

use serde::Serialize;

use super::config::RunConfig;
use crate::error::Result;
use crate::fields::Grid;
use crate::rem::{rem_evolve, rem_observables, RemState};
use crate::vlasov::{moments, residual_table, static_trajectory, ResidualRow, TestFunctionBank};
use crate::wkb::rem_data;

#[derive(Clone, Debug, Serialize)]
pub struct KineticReport {
    pub n: [usize; 3],
    pub dt: f64,
    pub rows: Vec<ResidualRow>,
    pub max_maxwell: f64,
    pub max_vlasov: f64,
    /// Moments equal the fluid observables bit for bit at every snapshot.
    pub moments_bitwise: bool,
}

fn maxima(rows: &[ResidualRow]) -> (f64, f64) {
    let m = |k: &str| rows.iter().filter(|r| r.kind == k).map(|r| r.residual).fold(0.0, f64::max);
    (m("maxwell"), m("vlasov"))
}

/// Residuals with the standard bank spanning the whole trajectory.
pub fn kinetic_report(traj: &[RemState], ops: &crate::fields::Ops) -> Result<KineticReport> {
    let g = traj[0].grid();
    let bank = TestFunctionBank::standard(traj[0].t, traj.last().unwrap().t, &g);
    let rows = residual_table(traj, &bank)?;
    let (max_maxwell, max_vlasov) = maxima(&rows);
    let moments_bitwise = moments(traj).iter().zip(traj).all(|((j, rho), s)| {
        let o = rem_observables(s, ops);
        j.t.data == o.j.t.data && j.s.c == o.j.s.c && rho.data == s.rho.data
    });
    Ok(KineticReport {
        n: g.dims(),
        dt: traj[1].t - traj[0].t,
        rows,
        max_maxwell,
        max_vlasov,
        moments_bitwise,
    })
}

/// The exact static solution on `grid` over `[0, t_final]`.
pub fn static_report(grid: Grid, t_final: f64, count: usize) -> Result<KineticReport> {
    let traj = static_trajectory(grid, 1.3, [0.2, -0.4, 0.7], 0.0, t_final, count);
    kinetic_report(&traj, &crate::fields::Ops::new(grid, crate::fields::Backend::Spectral))
}

/// Fluid trajectory from the configured profile at ladder level `idx`,
/// stored every step.
pub fn evolved_report(cfg: &RunConfig, idx: usize) -> Result<KineticReport> {
    let ops = cfg.ops_for(idx)?;
    let g = *ops.grid();
    let dt = cfg.dt_for(&g, cfg.run.eps[idx]);
    let (rem, _) = rem_data(&cfg.profile, &ops)?;
    let traj = rem_evolve(&rem, cfg.run.t_final, dt, 1, &ops, &cfg.rem_params())?;
    kinetic_report(&traj, &ops)
}
