//! Randomized manufactured states and the pointwise identity suite.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::Result;
use crate::fields::tensor::{faraday_invariant, faraday_matrix};
use crate::fields::{raise_lower, ComplexField, FaradayField, FourVectorField, Grid, IndexPosition, Ops, ScalarField, VectorField3};
use crate::kgm::{split_identity_residuals, KgmState, SqrtRhoGradient};
use crate::modenergy::{decomposition_gap, h00_forms, modulated_fields};
use crate::rem::{elliptic_spectrum, RemState};

/// Random trigonometric polynomial with `modes` terms of wavenumber at most
/// 2 per axis; band-limited so spectral derivatives are exact.
pub fn random_smooth(grid: Grid, rng: &mut impl Rng, modes: usize, amp: f64) -> ScalarField {
    let n = grid.dims();
    let l = grid.extents();
    let terms: Vec<([f64; 3], f64, f64)> = (0..modes)
        .map(|_| {
            let k = std::array::from_fn(|a| {
                let kmax = ((n[a] as i64 - 1) / 2).min(2);
                let m = if kmax > 0 { rng.gen_range(-kmax..=kmax) } else { 0 };
                2.0 * PI * m as f64 / l[a]
            });
            (k, rng.gen_range(-amp..=amp), rng.gen_range(0.0..2.0 * PI))
        })
        .collect();
    ScalarField::from_fn(grid, |x| {
        terms
            .iter()
            .map(|(k, c, s)| c * (k[0] * x[0] + k[1] * x[1] + k[2] * x[2] + s).cos())
            .sum()
    })
}

fn random_vector(grid: Grid, rng: &mut impl Rng, amp: f64) -> VectorField3 {
    VectorField3::from_components(
        random_smooth(grid, rng, 3, amp),
        random_smooth(grid, rng, 3, amp),
        random_smooth(grid, rng, 3, amp),
    )
}

fn random_complex(grid: Grid, rng: &mut impl Rng, amp: f64) -> ComplexField {
    let re = random_smooth(grid, rng, 3, amp);
    let im = random_smooth(grid, rng, 3, amp);
    ComplexField {
        grid,
        data: re.data.iter().zip(&im.data).map(|(&a, &b)| Complex64::new(a, b)).collect(),
    }
}

/// Nonvanishing `Phi`, arbitrary `Pi`, `A`, `E` and `eps` in `[0.05, 0.5]`.
pub fn random_kgm_state(grid: Grid, rng: &mut impl Rng) -> KgmState {
    let m = random_smooth(grid, rng, 4, 0.3);
    let th = random_smooth(grid, rng, 4, 2.0);
    let phi = ComplexField {
        grid,
        data: m
            .data
            .iter()
            .zip(&th.data)
            .map(|(&r, &t)| Complex64::from_polar(1.5 + r, t))
            .collect(),
    };
    KgmState {
        phi,
        pi: random_complex(grid, rng, 0.5),
        a: random_vector(grid, rng, 0.5),
        e: random_vector(grid, rng, 0.5),
        eps: rng.gen_range(0.05..0.5),
        t: 0.0,
    }
}

/// Positive density, velocity of order one, arbitrary fields.
pub fn random_rem_state(grid: Grid, rng: &mut impl Rng) -> RemState {
    RemState {
        u: random_vector(grid, rng, 0.8),
        rho: random_smooth(grid, rng, 4, 0.3).map(|r| 1.2 + r),
        e: random_vector(grid, rng, 0.5),
        b: random_vector(grid, rng, 0.5),
        t: 0.0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityRow {
    pub sample: usize,
    /// Raising then lowering a random four-vector field is bitwise exact.
    pub raise_lower_exact: bool,
    /// Packing then unpacking `(E, B)` is bitwise exact.
    pub faraday_roundtrip_exact: bool,
    /// `max |F.F - 2(|B|^2 - |E|^2)|` relative.
    pub faraday_scalar: f64,
    /// Algebraic-mode splitting identities, relative.
    pub split: f64,
    /// `h + I = T_kgm - T_rem`, relative.
    pub decomposition: f64,
    /// Two forms of `int h_00`, relative.
    pub h00: f64,
    /// `max |lambda - (1, 1, 1/U0^2)|`.
    pub spectrum: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IdentityTolerances {
    pub faraday_scalar: f64,
    pub split: f64,
    pub decomposition: f64,
    pub h00: f64,
    pub spectrum: f64,
}

impl Default for IdentityTolerances {
    fn default() -> Self {
        Self {
            faraday_scalar: 1e-12,
            split: 1e-9,
            decomposition: 1e-10,
            h00: 1e-9,
            spectrum: 1e-12,
        }
    }
}

impl IdentityRow {
    pub fn passes(&self, tol: &IdentityTolerances) -> bool {
        self.raise_lower_exact
            && self.faraday_roundtrip_exact
            && self.faraday_scalar <= tol.faraday_scalar
            && self.split <= tol.split
            && self.decomposition <= tol.decomposition
            && self.h00 <= tol.h00
            && self.spectrum <= tol.spectrum
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityReport {
    pub seed: u64,
    pub grid: [usize; 3],
    pub tolerances: IdentityTolerances,
    pub rows: Vec<IdentityRow>,
    pub worst: IdentityRow,
    pub passed: bool,
}

/// One manufactured sample: random `KgmState` and `RemState`.
pub fn identity_sample(grid: Grid, rng: &mut impl Rng, sample: usize) -> Result<IdentityRow> {
    let ops = Ops::new(grid, crate::fields::Backend::Spectral);
    let k = random_kgm_state(grid, rng);
    let r = random_rem_state(grid, rng);

    let mut v = FourVectorField::zeros(grid, IndexPosition::Contravariant);
    v.t = random_smooth(grid, rng, 3, 1.0);
    v.s = random_vector(grid, rng, 1.0);
    let back = raise_lower(&raise_lower(&v));
    let raise_lower_exact = back.position == v.position && back.t.data == v.t.data && back.s.c == v.s.c;

    let f = FaradayField::new(r.e.clone(), r.b.clone())?;
    let unpacked = FaradayField::unpack(grid, &f.pack())?;
    let faraday_roundtrip_exact = unpacked.e.c == r.e.c && unpacked.b.c == r.b.c;
    let mut faraday_scalar: f64 = 0.0;
    for c in 0..grid.len() {
        let (e, b) = (r.e.at(c), r.b.at(c));
        let m = faraday_matrix(e, b);
        let want = 2.0 * (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]) - 2.0 * (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]);
        let scale = 2.0 * (b.iter().chain(&e).map(|x| x * x).sum::<f64>()).max(f64::MIN_POSITIVE);
        faraday_scalar = faraday_scalar.max((faraday_invariant(&m) - want).abs() / scale);
    }

    let split = split_identity_residuals(&k, &ops, SqrtRhoGradient::Algebraic, 0.0)?.relative;
    let mf = modulated_fields(&k, &r, &ops, f64::INFINITY)?;
    let decomposition = decomposition_gap(&mf, &k, &r, &ops);
    let h00 = h00_forms(&k, &r, &ops, 0.0)?.gap;

    let ev = elliptic_spectrum(&r);
    let u0 = r.u0();
    let mut spectrum: f64 = 0.0;
    for c in 0..grid.len() {
        let want = [1.0, 1.0, 1.0 / (u0.data[c] * u0.data[c])];
        for a in 0..3 {
            spectrum = spectrum.max((ev[a].data[c] - want[a]).abs());
        }
    }

    Ok(IdentityRow {
        sample,
        raise_lower_exact,
        faraday_roundtrip_exact,
        faraday_scalar,
        split,
        decomposition,
        h00,
        spectrum,
    })
}

/// `samples` manufactured states from `seed` on `grid`.
pub fn check_identities(grid: Grid, seed: u64, samples: usize) -> Result<IdentityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<IdentityRow> = (0..samples)
        .map(|i| identity_sample(grid, &mut rng, i))
        .collect::<Result<_>>()?;
    let tolerances = IdentityTolerances::default();
    let fold = |f: &dyn Fn(&IdentityRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    let worst = IdentityRow {
        sample: samples,
        raise_lower_exact: rows.iter().all(|r| r.raise_lower_exact),
        faraday_roundtrip_exact: rows.iter().all(|r| r.faraday_roundtrip_exact),
        faraday_scalar: fold(&|r| r.faraday_scalar),
        split: fold(&|r| r.split),
        decomposition: fold(&|r| r.decomposition),
        h00: fold(&|r| r.h00),
        spectrum: fold(&|r| r.spectrum),
    };
    let passed = !rows.is_empty() && rows.iter().all(|r| r.passes(&tolerances));
    Ok(IdentityReport {
        seed,
        grid: grid.dims(),
        tolerances,
        rows,
        worst,
        passed,
    })
}
