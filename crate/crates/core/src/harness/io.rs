//! State and trajectory persistence on top of the binary snapshot format.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{Ops, Snapshot};
use crate::kgm::{kgm_observables, KgmState};
use crate::rem::{rem_observables, RemState};

pub trait Persist: Sized {
    const PREFIX: &'static str;
    fn snapshot(&self, name: &str) -> Snapshot;
    fn restore(s: &Snapshot) -> Result<Self>;
}

impl Persist for KgmState {
    const PREFIX: &'static str = "kgm";
    fn snapshot(&self, name: &str) -> Snapshot {
        self.to_snapshot(name)
    }
    fn restore(s: &Snapshot) -> Result<Self> {
        KgmState::from_snapshot(s)
    }
}

impl Persist for RemState {
    const PREFIX: &'static str = "rem";
    fn snapshot(&self, name: &str) -> Snapshot {
        self.to_snapshot(name)
    }
    fn restore(s: &Snapshot) -> Result<Self> {
        RemState::from_snapshot(s)
    }
}

pub fn save_state<S: Persist>(state: &S, path: &Path) -> Result<()> {
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or(S::PREFIX);
    state.snapshot(name).write(path)
}

pub fn load_state<S: Persist>(path: &Path) -> Result<S> {
    let s = Snapshot::read(path)?;
    S::restore(&s).map_err(|e| match e {
        Error::WrongKind { found, .. } => Error::WrongKind {
            path: path.into(),
            found,
        },
        other => other,
    })
}

fn frame_path(dir: &Path, prefix: &str, i: usize) -> PathBuf {
    dir.join(format!("{prefix}_{i:05}.snap"))
}

/// Write `traj` as `dir/<prefix>_00000.snap`, ... and return the paths.
pub fn save_trajectory<S: Persist>(traj: &[S], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    traj.iter()
        .enumerate()
        .map(|(i, s)| {
            let p = frame_path(dir, S::PREFIX, i);
            save_state(s, &p)?;
            Ok(p)
        })
        .collect()
}

/// Read consecutive frames written by [`save_trajectory`].
pub fn load_trajectory<S: Persist>(dir: &Path) -> Result<Vec<S>> {
    let mut out = Vec::new();
    loop {
        let p = frame_path(dir, S::PREFIX, out.len());
        if !p.exists() {
            break;
        }
        out.push(load_state(&p)?);
    }
    if out.is_empty() {
        return Err(Error::io(
            frame_path(dir, S::PREFIX, 0),
            std::io::Error::new(std::io::ErrorKind::NotFound, "no frames"),
        ));
    }
    Ok(out)
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let err = |e: csv::Error| Error::io(path, std::io::Error::other(e.to_string()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    for r in rows {
        w.serialize(r).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let s = serde_json::to_string_pretty(v)?;
    fs::write(path, s + "\n").map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KgmSeriesRow {
    pub t: f64,
    pub energy: f64,
    pub charge: f64,
    pub gauss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RemSeriesRow {
    pub t: f64,
    pub energy: f64,
    pub charge: f64,
    pub gauss: f64,
    #[serde(rename = "divB")]
    pub div_b: f64,
    pub normalization: f64,
    pub max_grad_u: f64,
}

pub fn kgm_series(traj: &[KgmState], ops: &Ops) -> Vec<KgmSeriesRow> {
    traj.iter()
        .map(|s| {
            let o = kgm_observables(s, ops);
            KgmSeriesRow {
                t: s.t,
                energy: o.energy,
                charge: o.charge,
                gauss: o.gauss_residual,
            }
        })
        .collect()
}

pub fn rem_series(traj: &[RemState], ops: &Ops) -> Vec<RemSeriesRow> {
    traj.iter()
        .map(|s| {
            let o = rem_observables(s, ops);
            RemSeriesRow {
                t: s.t,
                energy: o.energy,
                charge: o.charge,
                gauss: o.gauss_residual,
                div_b: o.div_b_residual,
                normalization: o.normalization_residual,
                max_grad_u: o.max_grad_u,
            }
        })
        .collect()
}
