//! Epsilon sweeps: matched data, paired evolution, modulated-energy time
//! series, rate fit and persistence.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;

use super::config::RunConfig;
use super::io::{save_trajectory, write_csv, write_json};
use super::rate::{fit_rate, RateFit};
use crate::error::{Error, Result};
use crate::fields::{Grid, Ops};
use crate::kgm::{kgm_evolve, kgm_observables, KgmState};
use crate::modenergy::ModulatedEnergyReport;
use crate::rem::{rem_evolve, rem_observables, RemState};
use crate::wkb::{make_matched_pair, PreparationRow};

pub const SIGN_CONVENTIONS: [&str; 6] = [
    "metric signature (-,+,+,+), c = 1",
    "D = eps grad + i A, temporal gauge A^0 = 0",
    "F_0i = E_i, F_ij = -eps_ijk B_k, B = -curl A",
    "J_a = -Im(conj(Phi) D_a Phi), charge density J^0 = Im(Phi conj(Pi))",
    "div E = J^0 - mean(J^0) (uniform neutralizing background)",
    "gauge change Phi -> exp(-i chi / eps) Phi, A -> A + grad chi",
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimeseriesRow {
    pub t: f64,
    #[serde(rename = "H0")]
    pub h0: f64,
    #[serde(rename = "HU")]
    pub hu: f64,
    #[serde(rename = "K0")]
    pub k0: f64,
    #[serde(rename = "P0")]
    pub p0: f64,
    pub energy_kgm: f64,
    pub energy_rem: f64,
    pub charge_kgm: f64,
    pub charge_rem: f64,
    pub gauss_kgm: f64,
    pub gauss_rem: f64,
    #[serde(rename = "divB")]
    pub div_b: f64,
    #[serde(rename = "dist_J_L1")]
    pub dist_j_l1: f64,
    #[serde(rename = "dist_F_L2")]
    pub dist_f_l2: f64,
    #[serde(rename = "dist_rho_L1")]
    pub dist_rho_l1: f64,
    #[serde(rename = "dist_sqrtrho_L2")]
    pub dist_sqrtrho_l2: f64,
    #[serde(skip)]
    pub coercive: bool,
    #[serde(skip)]
    pub sandwich: bool,
}

/// One row of `sweep.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepCsvRow {
    pub eps: f64,
    #[serde(rename = "sup_H0")]
    pub sup_h0: f64,
    #[serde(rename = "sup_H0_over_eps2")]
    pub sup_h0_over_eps2: f64,
    #[serde(rename = "dist_J_L1")]
    pub dist_j_l1: f64,
    #[serde(rename = "dist_F_L2")]
    pub dist_f_l2: f64,
    #[serde(rename = "dist_rho_L1")]
    pub dist_rho_l1: f64,
    #[serde(rename = "dist_sqrtrho_L2")]
    pub dist_sqrtrho_l2: f64,
    pub status: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub n: [usize; 3],
    pub dt: f64,
    pub sup_h0: f64,
    pub sup_h0_over_eps2: f64,
    /// Observable distances at the final time: `J` in L1, `F` in L2, `rho`
    /// in L1, `sqrt(rho)` in L2.
    pub final_distances: [f64; 4],
    /// Largest relative energy drift over the run.
    pub energy_drift_kgm: f64,
    pub energy_drift_rem: f64,
    /// Largest absolute charge drift over the run.
    pub charge_drift_kgm: f64,
    pub charge_drift_rem: f64,
    pub max_gauss_kgm: f64,
    pub max_gauss_rem: f64,
    pub max_div_b: f64,
    /// Cellwise coercivity held at every stored time.
    pub coercive: bool,
    /// Sandwich bounds for `X = U` held at every stored time.
    pub sandwich: bool,
    pub preparation: Option<PreparationRow>,
    /// Row directory relative to the sweep output directory.
    pub dir: String,
    pub snapshots: usize,
    /// `"ok"` or `"failed: <reason>"`.
    pub status: String,
}

impl SweepRow {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }

    fn failed(eps: f64, n: [usize; 3], dt: f64, dir: String, err: &Error) -> Self {
        Self {
            eps,
            n,
            dt,
            sup_h0: f64::NAN,
            sup_h0_over_eps2: f64::NAN,
            final_distances: [f64::NAN; 4],
            energy_drift_kgm: f64::NAN,
            energy_drift_rem: f64::NAN,
            charge_drift_kgm: f64::NAN,
            charge_drift_rem: f64::NAN,
            max_gauss_kgm: f64::NAN,
            max_gauss_rem: f64::NAN,
            max_div_b: f64::NAN,
            coercive: false,
            sandwich: false,
            preparation: None,
            dir,
            snapshots: 0,
            status: format!("failed: {err}"),
        }
    }

    pub fn csv_row(&self) -> SweepCsvRow {
        let d = self.final_distances;
        SweepCsvRow {
            eps: self.eps,
            sup_h0: self.sup_h0,
            sup_h0_over_eps2: self.sup_h0_over_eps2,
            dist_j_l1: d[0],
            dist_f_l2: d[1],
            dist_rho_l1: d[2],
            dist_sqrtrho_l2: d[3],
            status: self.status.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RateReport {
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub residual: Option<f64>,
    pub rows_used: Vec<f64>,
    /// Why no slope was produced.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unavailable: Option<String>,
}

impl RateReport {
    fn from_rows(rows: &[SweepRow]) -> Self {
        let ok: Vec<&SweepRow> = rows.iter().filter(|r| r.ok()).collect();
        let xs: Vec<f64> = ok.iter().map(|r| r.eps).collect();
        let ys: Vec<f64> = ok.iter().map(|r| r.sup_h0).collect();
        match fit_rate(&xs, &ys) {
            Ok(RateFit {
                slope,
                intercept,
                max_residual,
                ..
            }) => Self {
                slope: Some(slope),
                intercept: Some(intercept),
                residual: Some(max_residual),
                rows_used: xs,
                unavailable: None,
            },
            Err(e) => Self {
                slope: None,
                intercept: None,
                residual: None,
                rows_used: xs,
                unavailable: Some(e.to_string()),
            },
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub package: String,
    pub version: String,
    pub sign_conventions: Vec<String>,
    pub backend: String,
    pub threads: usize,
    pub started_unix: u64,
    pub wall_seconds: f64,
    pub row_wall_seconds: Vec<f64>,
    pub config: RunConfig,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub rate: RateReport,
    pub manifest: Manifest,
}

/// Everything produced for one eps.
#[derive(Clone, Debug)]
pub struct RowRun {
    pub row: SweepRow,
    pub series: Vec<TimeseriesRow>,
    pub kgm: Vec<KgmState>,
    pub rem: Vec<RemState>,
}

fn row_dir_name(idx: usize, eps: f64) -> String {
    format!("eps_{idx:02}_{eps:e}")
}

/// Time series of the paired trajectories.
pub fn timeseries(kgm: &[KgmState], rem: &[RemState], ops: &Ops) -> Result<Vec<TimeseriesRow>> {
    kgm.iter()
        .zip(rem)
        .map(|(k, r)| {
            let rep = ModulatedEnergyReport::compute(k, r, ops, 1e-9 * (1.0 + k.t.abs()))?;
            let ko = kgm_observables(k, ops);
            let ro = rem_observables(r, ops);
            Ok(TimeseriesRow {
                t: k.t,
                h0: rep.h0,
                hu: rep.hu,
                k0: rep.k0,
                p0: rep.p0,
                energy_kgm: ko.energy,
                energy_rem: ro.energy,
                charge_kgm: ko.charge,
                charge_rem: ro.charge,
                gauss_kgm: ko.gauss_residual,
                gauss_rem: ro.gauss_residual,
                div_b: ro.div_b_residual,
                dist_j_l1: rep.distances.j_l1,
                dist_f_l2: rep.distances.f_l2,
                dist_rho_l1: rep.distances.rho_l1,
                dist_sqrtrho_l2: rep.distances.sqrt_rho_l2,
                coercive: rep.coercive,
                sandwich: rep.sandwich.holds,
            })
        })
        .collect()
}

fn summarize(eps: f64, grid: &Grid, dt: f64, dir: String, series: &[TimeseriesRow]) -> SweepRow {
    let first = &series[0];
    let last = series.last().unwrap();
    let max = |f: &dyn Fn(&TimeseriesRow) -> f64| series.iter().map(f).fold(0.0, f64::max);
    let sup_h0 = max(&|r| r.h0);
    SweepRow {
        eps,
        n: grid.dims(),
        dt,
        sup_h0,
        sup_h0_over_eps2: sup_h0 / (eps * eps),
        final_distances: [last.dist_j_l1, last.dist_f_l2, last.dist_rho_l1, last.dist_sqrtrho_l2],
        energy_drift_kgm: max(&|r| ((r.energy_kgm - first.energy_kgm) / first.energy_kgm).abs()),
        energy_drift_rem: max(&|r| ((r.energy_rem - first.energy_rem) / first.energy_rem).abs()),
        charge_drift_kgm: max(&|r| (r.charge_kgm - first.charge_kgm).abs()),
        charge_drift_rem: max(&|r| (r.charge_rem - first.charge_rem).abs()),
        max_gauss_kgm: max(&|r| r.gauss_kgm),
        max_gauss_rem: max(&|r| r.gauss_rem),
        max_div_b: max(&|r| r.div_b),
        coercive: series.iter().all(|r| r.coercive),
        sandwich: series.iter().all(|r| r.sandwich),
        preparation: None,
        dir,
        snapshots: series.len(),
        status: "ok".into(),
    }
}

/// Build matched data for `cfg.run.eps[idx]`, evolve both systems with a
/// shared step and stride, and tabulate the modulated-energy report.
pub fn run_row(cfg: &RunConfig, idx: usize) -> Result<RowRun> {
    let eps = cfg.run.eps[idx];
    let ops = cfg.ops_for(idx)?;
    let grid = *ops.grid();
    let dt = cfg.dt_for(&grid, eps);
    let mp = make_matched_pair(&cfg.profile, &[eps], &ops, cfg.run.snap_tol)?;
    let k0 = &mp.family[0].1;
    let kgm = kgm_evolve(k0, cfg.run.t_final, dt, cfg.run.stride, &ops, &cfg.kgm_params())?;
    let rem = rem_evolve(&mp.rem, cfg.run.t_final, dt, cfg.run.stride, &ops, &cfg.rem_params())?;
    let series = timeseries(&kgm, &rem, &ops)?;
    let steps = crate::kgm::steps_for(cfg.run.t_final, dt, cfg.run.stride);
    let mut row = summarize(eps, &grid, cfg.run.t_final / steps as f64, row_dir_name(idx, eps), &series);
    row.preparation = mp.report.into_iter().next();
    Ok(RowRun { row, series, kgm, rem })
}

fn persist_row(run: &RowRun, out: &Path, snapshots: bool) -> Result<()> {
    let dir = out.join(&run.row.dir);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    write_csv(&dir.join("timeseries.csv"), &run.series)?;
    if snapshots {
        save_trajectory(&run.kgm, &dir.join("kgm"))?;
        save_trajectory(&run.rem, &dir.join("rem"))?;
    }
    Ok(())
}

/// Run every eps (in parallel), isolating failures per row, fit the rate of
/// `sup_t H0` against eps and persist `sweep.csv`, `sweep.json`,
/// `rates.json`, `manifest.json` plus one directory per row.
pub fn run_sweep(cfg: &RunConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let clock = Instant::now();
    let out: PathBuf = cfg.output.dir.clone();
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let results: Vec<(SweepRow, f64)> = (0..cfg.run.eps.len())
        .into_par_iter()
        .map(|idx| {
            let t = Instant::now();
            let eps = cfg.run.eps[idx];
            let dir = row_dir_name(idx, eps);
            let row = match run_row(cfg, idx).and_then(|r| persist_row(&r, &out, cfg.output.snapshots).map(|_| r)) {
                Ok(r) => r.row,
                Err(e) => {
                    let (n, dt) = match cfg.grid_for(idx) {
                        Ok(g) => (g.dims(), cfg.dt_for(&g, eps)),
                        Err(_) => ([0; 3], f64::NAN),
                    };
                    SweepRow::failed(eps, n, dt, dir, &e)
                }
            };
            (row, t.elapsed().as_secs_f64())
        })
        .collect();
    let (rows, row_wall_seconds): (Vec<SweepRow>, Vec<f64>) = results.into_iter().unzip();
    let rate = RateReport::from_rows(&rows);
    let csv_rows: Vec<SweepCsvRow> = rows.iter().map(SweepRow::csv_row).collect();
    write_csv(&out.join("sweep.csv"), &csv_rows)?;
    write_json(&out.join("sweep.json"), &rows)?;
    write_json(&out.join("rates.json"), &rate)?;
    let manifest = Manifest {
        package: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        sign_conventions: SIGN_CONVENTIONS.iter().map(|s| s.to_string()).collect(),
        backend: cfg.grid.backend.to_string(),
        threads: rayon::current_num_threads(),
        started_unix: started,
        wall_seconds: clock.elapsed().as_secs_f64(),
        row_wall_seconds,
        config: cfg.clone(),
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(SweepReport { rows, rate, manifest })
}
