use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mkgm::fields::snapshot::{FieldKind, Snapshot};
use mkgm::fields::tensor::{faraday_invariant, faraday_matrix};
use mkgm::fields::{
    divergence_residual, gauge_transform, raise_lower, stress_energy, Backend, ComplexField, FaradayField,
    FourVectorField, Grid, IndexPosition, NormKind, Ops, ScalarField, StressSource, VectorField3,
};
use mkgm::harness::identities::{random_kgm_state, random_smooth};
use mkgm::kgm::KgmState;
use mkgm::rem::RemState;
use mkgm::Error;

fn box3() -> Grid {
    Grid::new([12, 10, 8], [1.0, 1.3, 0.7]).unwrap()
}

fn random_vector(g: Grid, seed: u64) -> VectorField3 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    VectorField3::from_components(
        random_smooth(g, &mut rng, 4, 1.0),
        random_smooth(g, &mut rng, 4, 1.0),
        random_smooth(g, &mut rng, 4, 1.0),
    )
}

#[test]
fn grid_rejects_empty_and_nonpositive() {
    assert!(matches!(Grid::new([0, 1, 1], [1.0; 3]), Err(Error::InvalidGrid(_))));
    assert!(matches!(Grid::new([4, 1, 1], [1.0, -1.0, 1.0]), Err(Error::InvalidGrid(_))));
    let g = box3();
    assert_eq!(g.len(), 960);
    assert!((g.volume() - 1.3 * 0.7).abs() < 1e-15);
    for idx in [0, 17, 959] {
        let [i, j, k] = g.coords(idx);
        assert_eq!(g.index(i, j, k), idx);
    }
}

#[test]
fn derivative_of_sine_is_cosine() {
    let lx = 2.5;
    let g = Grid::new([32, 1, 1], [lx, 1.0, 1.0]).unwrap();
    let ops = Ops::new(g, Backend::Spectral);
    let w = 2.0 * PI / lx;
    let f = ScalarField::from_fn(g, |x| (w * x[0]).sin());
    let d = ops.d(&f, 0);
    let want = ScalarField::from_fn(g, |x| w * (w * x[0]).cos());
    let err = d.zip_map(&want, |a, b| a - b).max_abs();
    assert!(err < 1e-13, "{err}");
}

#[test]
fn constant_fields_have_zero_derivatives() {
    for backend in [Backend::Spectral, Backend::Fd2, Backend::Fd4] {
        let ops = Ops::new(box3(), backend);
        let f = ScalarField::constant(box3(), 3.7);
        for axis in 0..3 {
            assert!(ops.d(&f, axis).max_abs() < 1e-12);
        }
        assert!(ops.laplacian(&f).max_abs() < 1e-10);
        let v = VectorField3::constant(box3(), [1.0, -2.0, 0.5]);
        assert!(ops.curl(&v).max_abs() < 1e-12);
        assert!(ops.div(&v).max_abs() < 1e-12);
    }
}

#[test]
fn derivative_along_singleton_axis_is_zero() {
    let g = Grid::new([16, 1, 1], [1.0; 3]).unwrap();
    for backend in [Backend::Spectral, Backend::Fd2, Backend::Fd4] {
        let ops = Ops::new(g, backend);
        let f = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).sin() + 2.0);
        assert_eq!(ops.d(&f, 1).max_abs(), 0.0);
        assert_eq!(ops.d(&f, 2).max_abs(), 0.0);
    }
}

#[test]
fn curl_grad_and_div_curl_vanish_spectrally() {
    let g = box3();
    let ops = Ops::new(g, Backend::Spectral);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let phi = random_smooth(g, &mut rng, 6, 1.0);
    assert!(ops.curl(&ops.grad(&phi)).max_abs() < 1e-10);
    let v = random_vector(g, 4);
    assert!(ops.div(&ops.curl(&v)).max_abs() < 1e-10);
}

#[test]
fn finite_differences_converge_at_their_order() {
    for (backend, p) in [(Backend::Fd2, 2.0), (Backend::Fd4, 4.0)] {
        let errs: Vec<f64> = [16, 32, 64]
            .iter()
            .map(|&n| {
                let g = Grid::line(n, 1.0).unwrap();
                let ops = Ops::new(g, backend);
                let f = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).sin().exp());
                let want = ScalarField::from_fn(g, |x| {
                    2.0 * PI * (2.0 * PI * x[0]).cos() * (2.0 * PI * x[0]).sin().exp()
                });
                ops.d(&f, 0).zip_map(&want, |a, b| a - b).max_abs()
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - p).abs() < 0.3, "{backend}: order {order}");
        }
    }
}

#[test]
fn norms_of_simple_fields() {
    let g = box3();
    let one = ScalarField::constant(g, 1.0);
    let v = g.volume();
    assert!((one.norm(NormKind::L1) - v).abs() < 1e-14);
    assert!((one.norm(NormKind::L2) - v.sqrt()).abs() < 1e-14);
    assert_eq!(one.norm(NormKind::Linf), 1.0);

    let line = Grid::line(64, 1.0).unwrap();
    let s = ScalarField::from_fn(line, |x| (2.0 * PI * x[0]).sin());
    assert!((s.norm(NormKind::L2).powi(2) - 0.5).abs() < 1e-14);
}

#[test]
fn norm_is_independent_of_summation_order() {
    let g = box3();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let f = random_smooth(g, &mut rng, 5, 1.0);
    let forward = f.norm(NormKind::L2);
    let backward = (f.data.iter().rev().map(|x| x * x).sum::<f64>() * g.cell_volume()).sqrt();
    assert!((forward - backward).abs() <= 1e-12 * forward);
    let inner = f.inner(&f);
    assert!((inner - forward * forward).abs() <= 1e-12 * inner);
}

#[test]
fn poisson_examples() {
    let lx = 2.0;
    let g = Grid::new([32, 1, 1], [lx, 1.0, 1.0]).unwrap();
    let ops = Ops::new(g, Backend::Spectral);
    let w = 2.0 * PI / lx;
    let s = ScalarField::from_fn(g, |x| (w * x[0]).sin());
    let phi = ops.poisson(&s).unwrap();
    let want = ScalarField::from_fn(g, |x| -(w * x[0]).sin() / (w * w));
    assert!(phi.zip_map(&want, |a, b| a - b).max_abs() < 1e-14);

    assert_eq!(ops.poisson(&ScalarField::zeros(g)).unwrap().max_abs(), 0.0);

    let bad = ScalarField::constant(g, 1.0);
    assert!(matches!(ops.poisson(&bad), Err(Error::NonzeroMean { .. })));
}

#[test]
fn poisson_residual_on_random_source() {
    let g = box3();
    let ops = Ops::new(g, Backend::Spectral);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let raw = random_smooth(g, &mut rng, 6, 1.0);
    let m = raw.mean();
    let s = raw.map(|x| x - m);
    let phi = ops.poisson(&s).unwrap();
    assert!(phi.mean().abs() < 1e-14);
    let res = ops.laplacian(&phi).zip_map(&s, |a, b| a - b).max_abs();
    assert!(res <= 1e-10 * s.max_abs(), "{res}");
}

#[test]
fn helmholtz_of_gradient_and_constant() {
    let g = box3();
    let ops = Ops::new(g, Backend::Spectral);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let v = ops.grad(&random_smooth(g, &mut rng, 5, 1.0));
    let (cf, df) = ops.helmholtz(&v);
    assert!(cf.sub(&v).max_abs() < 1e-10);
    assert!(df.max_abs() < 1e-10);

    let c = VectorField3::constant(g, [0.3, -1.0, 2.0]);
    let (cf, df) = ops.helmholtz(&c);
    assert!(cf.max_abs() < 1e-14);
    assert!(df.sub(&c).max_abs() < 1e-14);
}

#[test]
fn helmholtz_parts_are_orthogonal_and_complete() {
    let g = box3();
    for backend in [Backend::Spectral, Backend::Fd2, Backend::Fd4] {
        let ops = Ops::new(g, backend);
        let v = random_vector(g, 7);
        let (cf, df) = ops.helmholtz(&v);
        let vv = v.inner(&v);
        assert!(cf.add(&df).sub(&v).max_abs() <= 1e-12 * v.max_abs());
        assert!(cf.inner(&df).abs() <= 1e-10 * vv);
        assert!(ops.div(&df).max_abs() < 1e-10);
        assert!(ops.curl(&cf).max_abs() < 1e-10);
    }
}

#[test]
fn gauge_transform_examples() {
    let g = Grid::line(32, 1.0).unwrap();
    let ops = Ops::new(g, Backend::Spectral);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let s = random_kgm_state(g, &mut rng);

    let (p, a) = gauge_transform(&s.phi, &s.a, &ScalarField::zeros(g), s.eps, &ops);
    assert_eq!(p, s.phi);
    assert_eq!(a, s.a);

    let c = 0.7;
    let (p, a) = gauge_transform(&s.phi, &s.a, &ScalarField::constant(g, c), s.eps, &ops);
    assert!(a.sub(&s.a).max_abs() < 1e-15);
    let rot = Complex64::from_polar(1.0, -c / s.eps);
    for (x, y) in p.data.iter().zip(&s.phi.data) {
        assert!((x - y * rot).norm() < 1e-14);
    }
}

#[test]
fn gauge_transform_preserves_curl() {
    let g = box3();
    let ops = Ops::new(g, Backend::Spectral);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let chi = random_smooth(g, &mut rng, 5, 0.4);
    let a = random_vector(g, 11);
    let phi = ComplexField::from_fn(g, |x| Complex64::new(1.0 + x[0], x[1]));
    let (p2, a2) = gauge_transform(&phi, &a, &chi, 0.1, &ops);
    assert!(ops.curl(&a2).sub(&ops.curl(&a)).max_abs() < 1e-10);
    assert_eq!(p2.modulus_sq().data.len(), phi.data.len());
    for (x, y) in p2.data.iter().zip(&phi.data) {
        assert!((x.norm() - y.norm()).abs() < 1e-15);
    }
}

#[test]
fn faraday_scalar_of_pure_fields() {
    let m = faraday_matrix([1.0, 0.0, 0.0], [0.0; 3]);
    assert_eq!(faraday_invariant(&m), -2.0);
    let m = faraday_matrix([0.0; 3], [0.0, 0.0, 1.0]);
    assert_eq!(m[1][2], -1.0);
    assert_eq!(m[2][1], 1.0);
    assert_eq!(faraday_invariant(&m), 2.0);
}

#[test]
fn faraday_pack_roundtrip_is_exact() {
    let g = box3();
    let e = random_vector(g, 12);
    let b = random_vector(g, 13);
    let f = FaradayField::new(e.clone(), b.clone()).unwrap();
    let packed = f.pack();
    for m in &packed {
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(m[i][j], -m[j][i]);
            }
        }
    }
    let back = FaradayField::unpack(g, &packed).unwrap();
    assert_eq!(back.e, e);
    assert_eq!(back.b, b);
}

#[test]
fn stress_energy_examples() {
    let g = Grid::line(8, 1.0).unwrap();
    let ops = Ops::new(g, Backend::Spectral);
    let vac = KgmState {
        phi: ComplexField::zeros(g),
        pi: ComplexField::zeros(g),
        a: VectorField3::zeros(g),
        e: VectorField3::zeros(g),
        eps: 0.1,
        t: 0.0,
    };
    assert_eq!(stress_energy(StressSource::Kgm(&vac), &ops).max_abs(), 0.0);

    let rem = RemState {
        u: VectorField3::zeros(g),
        rho: ScalarField::zeros(g),
        e: VectorField3::constant(g, [1.0, 0.0, 0.0]),
        b: VectorField3::constant(g, [0.0, 1.0, 0.0]),
        t: 0.0,
    };
    let t = stress_energy(StressSource::Rem(&rem), &ops);
    for c in 0..g.len() {
        assert!((t.get(c, 0, 0) - 1.0).abs() < 1e-15);
    }
}

/// Vacuum plane wave `E_y = B_z = cos(k (x - t))`; the divergence of its
/// stress tensor vanishes, and the discrete residual is second order.
#[test]
fn divergence_residual_converges_on_plane_wave() {
    let errs: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&n| {
            let g = Grid::line(n, 1.0).unwrap();
            let ops = Ops::new(g, Backend::Fd2);
            let dt = 0.5 / n as f64;
            let k = 2.0 * PI;
            let snaps: Vec<_> = (0..3)
                .map(|i| {
                    let t = 0.3 + dt * i as f64;
                    let wave = ScalarField::from_fn(g, |x| (k * (x[0] - t)).cos());
                    let z = ScalarField::zeros(g);
                    let rem = RemState {
                        u: VectorField3::zeros(g),
                        rho: z.clone(),
                        e: VectorField3::from_components(z.clone(), wave.clone(), z.clone()),
                        b: VectorField3::from_components(z.clone(), z, wave),
                        t,
                    };
                    stress_energy(StressSource::Rem(&rem), &ops)
                })
                .collect();
            let r = divergence_residual(&snaps, dt, &ops).unwrap();
            (0..4).map(|a| r.component(a).max_abs()).fold(0.0, f64::max)
        })
        .collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 2.0).abs() < 0.3, "order {order}");
    }
}

#[test]
fn divergence_residual_needs_three_snapshots() {
    let g = Grid::line(4, 1.0).unwrap();
    let ops = Ops::new(g, Backend::Spectral);
    let t = mkgm::fields::StressTensorField::zeros(g);
    assert!(matches!(
        divergence_residual(&[t.clone(), t], 0.1, &ops),
        Err(Error::InsufficientSnapshots { need: 3, got: 2 })
    ));
}

#[test]
fn snapshot_rejects_truncation_and_bad_magic() {
    let g = box3();
    let v = random_vector(g, 14);
    let snap = v.to_snapshot("E", 0.25);
    let bytes = snap.to_bytes();
    let path = std::path::Path::new("mem");
    let back = Snapshot::from_bytes(&bytes, path).unwrap();
    assert_eq!(back.kind, FieldKind::Vector);
    assert_eq!(VectorField3::from_snapshot(&back).unwrap(), v);
    let err = Snapshot::from_bytes(&bytes[..bytes.len() - 3], path).unwrap_err();
    assert!(err.to_string().contains("truncated payload"), "{err}");
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(Snapshot::from_bytes(&bad, path), Err(Error::BadMagic { .. })));
}

fn arb_vec4() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(-1e6..1e6f64)
}

proptest! {
    #[test]
    fn raise_lower_is_an_involution(vals in prop::collection::vec(arb_vec4(), 6)) {
        let g = Grid::new([3, 2, 1], [1.0; 3]).unwrap();
        let mut v = FourVectorField::zeros(g, IndexPosition::Covariant);
        for (c, x) in vals.iter().enumerate() {
            v.t.data[c] = x[0];
            for a in 0..3 {
                v.s.c[a][c] = x[a + 1];
            }
        }
        let once = raise_lower(&v);
        prop_assert_eq!(once.position, IndexPosition::Contravariant);
        let twice = raise_lower(&once);
        prop_assert_eq!(twice.position, v.position);
        prop_assert_eq!(&twice.t.data, &v.t.data);
        prop_assert_eq!(&twice.s.c, &v.s.c);
    }

    #[test]
    fn faraday_scalar_matches_field_invariant(e in prop::array::uniform3(-10.0..10.0f64), b in prop::array::uniform3(-10.0..10.0f64)) {
        let m = faraday_matrix(e, b);
        let want = 2.0 * (b.iter().map(|x| x * x).sum::<f64>() - e.iter().map(|x| x * x).sum::<f64>());
        let scale = 1.0 + e.iter().chain(&b).map(|x| x * x).sum::<f64>();
        prop_assert!((faraday_invariant(&m) - want).abs() <= 1e-13 * scale);
    }

    #[test]
    fn snapshot_roundtrip_is_bitwise(
        data in prop::collection::vec(prop::num::f64::ANY, 24),
        time in prop::num::f64::NORMAL,
        name in "[a-z]{0,12}",
    ) {
        let g = Grid::new([4, 3, 2], [1.0, 2.0, 3.0]).unwrap();
        let f = ScalarField::from_vec(g, data).unwrap();
        let s = f.to_snapshot(&name, time);
        let back = Snapshot::from_bytes(&s.to_bytes(), std::path::Path::new("mem")).unwrap();
        prop_assert_eq!(&back.name, &name);
        prop_assert_eq!(back.time.to_bits(), time.to_bits());
        let g2 = ScalarField::from_snapshot(&back).unwrap();
        for (x, y) in g2.data.iter().zip(&f.data) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}
