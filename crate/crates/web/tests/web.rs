use mkgm_web::{density_profiles_native, elliptic_spectrum_native, h0_curve_native};

#[test]
fn h0_curve_starts_small_and_stays_finite() {
    let c = h0_curve_native(0.1, 32, 0.2, 0.1, 0.2).unwrap();
    assert!(c.len() >= 4 && c.len() % 2 == 0);
    assert_eq!(c[0], 0.0);
    let ts: Vec<f64> = c.iter().step_by(2).copied().collect();
    assert!(ts.windows(2).all(|w| w[1] > w[0]));
    assert!((ts[ts.len() - 1] - 0.2).abs() < 1e-12);
    let h: Vec<f64> = c.iter().skip(1).step_by(2).copied().collect();
    assert!(h.iter().all(|x| x.is_finite() && *x >= 0.0));
    assert!(h[0] < 0.1 * 0.1);
}

#[test]
fn density_profiles_layout_and_mass() {
    let n = 32;
    let d = density_profiles_native(0.1, n, 0.1, 0.1, 0.2).unwrap();
    assert_eq!(d.len(), 3 * n);
    assert_eq!(d[0], 0.0);
    assert!((d[1] - 1.0 / n as f64).abs() < 1e-15);
    let (phi2, rho) = (&d[n..2 * n], &d[2 * n..]);
    assert!(rho.iter().all(|r| *r > 0.0));
    let m_k: f64 = phi2.iter().sum::<f64>() / n as f64;
    let m_r: f64 = rho.iter().sum::<f64>() / n as f64;
    assert!((m_k - m_r).abs() < 0.05 * m_r, "{m_k} {m_r}");
}

#[test]
fn elliptic_spectrum_of_moving_fluid() {
    let s = elliptic_spectrum_native(3f64.sqrt(), 0.0, 0.0).unwrap();
    let want = [1.0, 1.0, 0.25, 0.25];
    for (a, b) in s.iter().zip(want) {
        assert!((a - b).abs() < 1e-14, "{s:?}");
    }
    let rest = elliptic_spectrum_native(0.0, 0.0, 0.0).unwrap();
    assert!(rest.iter().all(|x| (x - 1.0).abs() < 1e-15));
}

#[test]
fn bad_inputs_are_errors() {
    assert!(h0_curve_native(0.1, 0, 0.1, 0.1, 0.2).is_err());
    assert!(density_profiles_native(-0.1, 16, 0.1, 0.1, 0.2).is_err());
}
