//! Periodic-lattice calculus and Minkowski tensor algebra.

mod field;
mod grid;
pub mod snapshot;
mod spectral;
pub mod tensor;

use num_complex::Complex64;

pub use field::{cross, dot, quadrature, ComplexField, NormKind, ScalarField, VectorField3};
pub use grid::Grid;
pub use snapshot::{FieldKind, Snapshot};
pub use spectral::{Backend, Ops};
pub use tensor::{
    divergence_residual, faraday_pack, raise_lower, FaradayField, FourVectorField,
    IndexPosition, StressTensorField,
};

use crate::kgm::KgmState;
use crate::rem::RemState;

/// Gauge change `A' = A + grad chi`, `Phi' = exp(-i chi / eps) Phi`.
///
/// `chi` is time independent so the temporal gauge is preserved. With the
/// semiclassical connection `eps grad + i A` the phase carries `1/eps`.
pub fn gauge_transform(
    phi: &ComplexField,
    a: &VectorField3,
    chi: &ScalarField,
    eps: f64,
    ops: &Ops,
) -> (ComplexField, VectorField3) {
    let phase: Vec<Complex64> = chi
        .data
        .iter()
        .map(|&c| Complex64::from_polar(1.0, -c / eps))
        .collect();
    let phi2 = ComplexField {
        grid: phi.grid,
        data: phi.data.iter().zip(&phase).map(|(p, w)| p * w).collect(),
    };
    let a2 = a.add(&ops.grad(chi));
    (phi2, a2)
}

pub enum StressSource<'a> {
    Kgm(&'a KgmState),
    Rem(&'a RemState),
}

/// Stress-energy tensor of either system.
pub fn stress_energy(source: StressSource<'_>, ops: &Ops) -> StressTensorField {
    match source {
        StressSource::Kgm(s) => crate::kgm::stress_energy(s, ops),
        StressSource::Rem(s) => crate::rem::stress_energy(s),
    }
}

/// L2 norm of the jellium-adjusted Gauss residual `div E - (q - <q>)`.
pub fn gauss_residual(ops: &Ops, e: &VectorField3, charge: &ScalarField) -> f64 {
    let mean = charge.mean();
    let div = ops.div(e);
    div.zip_map(charge, |d, q| d - (q - mean)).norm(NormKind::L2)
}
