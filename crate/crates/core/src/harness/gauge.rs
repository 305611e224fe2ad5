//! Gauge invariance of evolved observables.

use serde::Serialize;

use crate::error::Result;
use crate::fields::{Ops, ScalarField};
use crate::kgm::{gauge_transform_state, kgm_evolve, kgm_observables, magnetic_field, KgmParams, KgmState};

#[derive(Clone, Debug, Serialize)]
pub struct GaugeReport {
    /// Relative mismatch of `rho`, `J`, `E`, `B`, energy and charge per
    /// stored time.
    pub mismatch: Vec<f64>,
    pub max: f64,
}

fn group_mismatch(pairs: &[(&[f64], &[f64])]) -> f64 {
    let mut d: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (a, b) in pairs {
        for (x, y) in a.iter().zip(b.iter()) {
            d = d.max((x - y).abs());
            scale = scale.max(x.abs()).max(y.abs());
        }
    }
    if scale > 0.0 {
        d / scale
    } else {
        0.0
    }
}

/// Mismatch between the observables of two states related by a gauge
/// change. Matter (`rho`, `J`) and fields (`E`, `B`) are each measured
/// relative to the largest entry of their group.
pub fn observable_mismatch(s1: &KgmState, s2: &KgmState, ops: &Ops) -> f64 {
    let o1 = kgm_observables(s1, ops);
    let o2 = kgm_observables(s2, ops);
    let b1 = magnetic_field(s1, ops);
    let b2 = magnetic_field(s2, ops);
    let matter = group_mismatch(&[
        (&o1.rho.data, &o2.rho.data),
        (&o1.j.t.data, &o2.j.t.data),
        (&o1.j.s.c[0], &o2.j.s.c[0]),
        (&o1.j.s.c[1], &o2.j.s.c[1]),
        (&o1.j.s.c[2], &o2.j.s.c[2]),
    ]);
    let fields = group_mismatch(&[
        (&s1.e.c[0], &s2.e.c[0]),
        (&s1.e.c[1], &s2.e.c[1]),
        (&s1.e.c[2], &s2.e.c[2]),
        (&b1.c[0], &b2.c[0]),
        (&b1.c[1], &b2.c[1]),
        (&b1.c[2], &b2.c[2]),
    ]);
    let energy = group_mismatch(&[(&[o1.energy], &[o2.energy])]);
    let charge = group_mismatch(&[(&[o1.charge], &[o2.charge])]);
    matter.max(fields).max(energy).max(charge)
}

/// Evolve `state` and its gauge transform by `chi` side by side.
pub fn gauge_evolution_check(
    state: &KgmState,
    chi: &ScalarField,
    t_final: f64,
    dt: f64,
    stride: usize,
    ops: &Ops,
    params: &KgmParams,
) -> Result<GaugeReport> {
    let moved = gauge_transform_state(state, chi, ops);
    let a = kgm_evolve(state, t_final, dt, stride, ops, params)?;
    let b = kgm_evolve(&moved, t_final, dt, stride, ops, params)?;
    let mismatch: Vec<f64> = a.iter().zip(&b).map(|(x, y)| observable_mismatch(x, y, ops)).collect();
    let max = mismatch.iter().copied().fold(0.0, f64::max);
    Ok(GaugeReport { mismatch, max })
}
