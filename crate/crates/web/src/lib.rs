//! Browser bindings: a small modulated-energy playground.
//!
//! Each exported function has a plain Rust twin (`*_native`) used by the
//! bindings and by native tests.

use mkgm::fields::{Grid, ScalarField, VectorField3};
use mkgm::kgm::{kgm_evolve, steps_for, KgmParams};
use mkgm::modenergy::ModulatedEnergyReport;
use mkgm::rem::{elliptic_spectrum as spectrum_of, rem_evolve, RemParams, RemState};
use mkgm::wkb::{make_matched_pair, Profile};
use mkgm::{Backend, Ops, Result};
use wasm_bindgen::prelude::*;

const STRIDE: usize = 5;

fn setup(eps: f64, n: usize, velocity_amplitude: f64, b_amplitude: f64) -> Result<(Ops, mkgm::wkb::MatchedPair, f64)> {
    let g = Grid::line(n, 1.0)?;
    let ops = Ops::new(g, Backend::Spectral);
    let profile = Profile {
        velocity_amplitude,
        b_amplitude,
        ..Profile::default()
    };
    let mp = make_matched_pair(&profile, &[eps], &ops, 1e-8)?;
    let dt = (0.3 * g.min_spacing()).min(0.1 * eps);
    Ok((ops, mp, dt))
}

/// `[t_0, H0_0, t_1, H0_1, ...]` for a sine-bump run on `n` cells.
pub fn h0_curve_native(eps: f64, n: usize, t_final: f64, velocity_amplitude: f64, b_amplitude: f64) -> Result<Vec<f64>> {
    let (ops, mp, dt) = setup(eps, n, velocity_amplitude, b_amplitude)?;
    let kt = kgm_evolve(&mp.family[0].1, t_final, dt, STRIDE, &ops, &KgmParams::default())?;
    let rt = rem_evolve(&mp.rem, t_final, dt, STRIDE, &ops, &RemParams::default())?;
    let mut out = Vec::with_capacity(2 * kt.len());
    for (k, r) in kt.iter().zip(&rt) {
        let rep = ModulatedEnergyReport::compute(k, r, &ops, 1e-9)?;
        out.push(k.t);
        out.push(rep.h0);
    }
    Ok(out)
}

/// `[x..., |Phi|^2..., rho...]` at `t_final`.
pub fn density_profiles_native(
    eps: f64,
    n: usize,
    t_final: f64,
    velocity_amplitude: f64,
    b_amplitude: f64,
) -> Result<Vec<f64>> {
    let (ops, mp, dt) = setup(eps, n, velocity_amplitude, b_amplitude)?;
    let steps = steps_for(t_final, dt, 1);
    let k = kgm_evolve(&mp.family[0].1, t_final, dt, steps, &ops, &KgmParams::default())?;
    let r = rem_evolve(&mp.rem, t_final, dt, steps, &ops, &RemParams::default())?;
    let k = k.last().unwrap();
    let r = r.last().unwrap();
    let g = ops.grid();
    let mut out: Vec<f64> = (0..g.len()).map(|i| g.position(i)[0]).collect();
    out.extend(k.phi.modulus_sq().data);
    out.extend(&r.rho.data);
    Ok(out)
}

/// Eigenvalues of the fluid principal symbol for velocity `u`, descending,
/// followed by `1/(U^0)^2`.
pub fn elliptic_spectrum_native(ux: f64, uy: f64, uz: f64) -> Result<Vec<f64>> {
    let g = Grid::new([1, 1, 1], [1.0; 3])?;
    let s = RemState {
        u: VectorField3::constant(g, [ux, uy, uz]),
        rho: ScalarField::constant(g, 1.0),
        e: VectorField3::zeros(g),
        b: VectorField3::zeros(g),
        t: 0.0,
    };
    let ev = spectrum_of(&s);
    let u0sq = 1.0 + ux * ux + uy * uy + uz * uz;
    Ok(vec![ev[0].data[0], ev[1].data[0], ev[2].data[0], 1.0 / u0sq])
}

fn js(e: mkgm::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn h0_curve(eps: f64, n: usize, t_final: f64, velocity_amplitude: f64, b_amplitude: f64) -> std::result::Result<Vec<f64>, JsError> {
    h0_curve_native(eps, n, t_final, velocity_amplitude, b_amplitude).map_err(js)
}

#[wasm_bindgen]
pub fn density_profiles(
    eps: f64,
    n: usize,
    t_final: f64,
    velocity_amplitude: f64,
    b_amplitude: f64,
) -> std::result::Result<Vec<f64>, JsError> {
    density_profiles_native(eps, n, t_final, velocity_amplitude, b_amplitude).map_err(js)
}

#[wasm_bindgen]
pub fn elliptic_spectrum(ux: f64, uy: f64, uz: f64) -> std::result::Result<Vec<f64>, JsError> {
    elliptic_spectrum_native(ux, uy, uz).map_err(js)
}
