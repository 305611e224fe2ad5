use std::f64::consts::PI;
use std::path::PathBuf;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mkgm::fields::{Backend, Grid, Ops, ScalarField};
use mkgm::harness::config::Ladder;
use mkgm::harness::identities::{random_kgm_state, random_rem_state};
use mkgm::harness::{
    check_identities, fit_rate, gauge_evolution_check, kgm_series, load_state, load_trajectory, pairwise_orders,
    rem_series, run_sweep, save_state, save_trajectory, static_report, RunConfig,
};
use mkgm::kgm::{KgmParams, KgmState};
use mkgm::rem::RemState;
use mkgm::Error;

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Slope from the 2x2 normal equations, solved by Cramer's rule.
fn normal_equations_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

#[test]
fn defaults_parse_from_empty_text() {
    let cfg = RunConfig::parse("").unwrap();
    assert_eq!(cfg, RunConfig::default());
    assert_eq!(cfg.grid.n, [64, 1, 1]);
    assert_eq!(cfg.run.eps, vec![0.1, 0.05, 0.025]);
    assert_eq!(cfg.run.ladder, Ladder::Matched);
}

#[test]
fn unknown_keys_are_errors() {
    for text in ["[grid]\nsize = 3\n", "[run]\nepsilon = [0.1]\n", "[weird]\na = 1\n", "top = 1\n"] {
        assert!(matches!(RunConfig::parse(text), Err(Error::Config { .. })), "{text}");
    }
    match RunConfig::parse("[grid]\nn = [8, 1, 1]\n\n[run]\nbogus = 1\n") {
        Err(Error::Config { line, .. }) => assert_eq!(line, 5),
        other => panic!("{other:?}"),
    }
}

#[test]
fn invalid_values_are_errors() {
    for text in [
        "[run]\neps = [0.05, 0.1]\n",
        "[run]\neps = []\n",
        "[run]\neps = [0.1, -0.1]\n",
        "[run]\nt_final = 0.0\n",
        "[run]\nstride = 0\n",
        "[grid]\nn = [0, 1, 1]\n",
        "[grid]\nextent = [1.0, 0.0, 1.0]\n",
    ] {
        assert!(matches!(RunConfig::parse(text), Err(Error::InvalidConfig(_))), "{text}");
    }
    assert!(RunConfig::parse("[grid]\nbackend = \"fd3\"\n").is_err());
    assert!(RunConfig::parse("[profile]\nkind = \"square\"\n").is_err());
}

#[test]
fn config_roundtrips_through_toml() {
    let mut cfg = RunConfig::default();
    cfg.grid.n = [32, 4, 1];
    cfg.grid.backend = Backend::Fd4;
    cfg.run.eps = vec![0.2, 0.1, 0.05, 0.025];
    cfg.run.ladder = Ladder::Fixed;
    cfg.profile.phase_amplitude = 0.3;
    cfg.output.dir = PathBuf::from("elsewhere");
    assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
}

#[test]
fn matched_ladder_scales_resolved_axes() {
    let cfg = RunConfig::parse("[grid]\nn = [16, 8, 1]\n[run]\neps = [0.1, 0.05, 0.025]\n").unwrap();
    assert_eq!(cfg.grid_for(2).unwrap().dims(), [64, 32, 1]);
    let g = cfg.grid_for(1).unwrap();
    assert!((cfg.dt_for(&g, 0.05) - 0.005).abs() < 1e-15);
    let fixed = RunConfig::parse("[grid]\nn = [16, 8, 1]\n[run]\nladder = \"fixed\"\n").unwrap();
    assert_eq!(fixed.grid_for(2).unwrap().dims(), [16, 8, 1]);
}

#[test]
fn shipped_configs_parse() {
    let mut count = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "toml") {
            RunConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            count += 1;
        }
    }
    assert!(count >= 10);
}

#[test]
fn fit_rate_on_exact_power_laws() {
    let xs = [0.1, 0.05, 0.025, 0.0125];
    let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
    let f = fit_rate(&xs, &sq).unwrap();
    assert!((f.slope - 2.0).abs() < 1e-12);
    assert!(f.intercept.abs() < 1e-12);
    assert!(f.max_residual < 1e-12);
    assert_eq!(f.points, 4);
    let lin: Vec<f64> = xs.iter().map(|x| 3.0 * x).collect();
    let f = fit_rate(&xs, &lin).unwrap();
    assert!((f.slope - 1.0).abs() < 1e-12);
    assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
}

#[test]
fn fit_rate_with_outlier_matches_normal_equations() {
    let xs = [0.1, 0.05, 0.025, 0.0125, 0.00625];
    let ys = [0.01, 0.0025, 0.002, 1.5e-4, 4e-5];
    let f = fit_rate(&xs, &ys).unwrap();
    let want = normal_equations_slope(&xs, &ys);
    assert!((f.slope - want).abs() < 1e-12);
    assert!(f.max_residual > 0.1);
}

#[test]
fn fit_rate_rejects_bad_input() {
    assert!(matches!(fit_rate(&[0.1, 0.05], &[1.0, 0.5]), Err(Error::TooFewPoints(2))));
    assert!(matches!(fit_rate(&[0.1, 0.05, 0.02], &[1.0, 0.0, 0.5]), Err(Error::NonPositive(_))));
    assert!(matches!(fit_rate(&[0.1, -0.05, 0.02], &[1.0, 0.5, 0.2]), Err(Error::NonPositive(_))));
}

#[test]
fn pairwise_orders_of_power_law() {
    let hs = [0.4, 0.2, 0.1];
    let e: Vec<f64> = hs.iter().map(|h: &f64| h.powi(3)).collect();
    for o in pairwise_orders(&hs, &e) {
        assert!((o - 3.0).abs() < 1e-12);
    }
}

#[test]
fn states_and_trajectories_roundtrip_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let g = Grid::new([6, 4, 2], [1.0, 0.5, 2.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let k = random_kgm_state(g, &mut rng);
    let r = random_rem_state(g, &mut rng);
    let pk = dir.path().join("k.snap");
    save_state(&k, &pk).unwrap();
    assert_eq!(load_state::<KgmState>(&pk).unwrap(), k);
    let pr = dir.path().join("r.snap");
    save_state(&r, &pr).unwrap();
    assert_eq!(load_state::<RemState>(&pr).unwrap(), r);
    assert!(matches!(load_state::<RemState>(&pk), Err(Error::WrongKind { .. })));

    let traj: Vec<RemState> = (0..4).map(|_| random_rem_state(g, &mut rng)).collect();
    let paths = save_trajectory(&traj, &dir.path().join("traj")).unwrap();
    assert_eq!(paths.len(), 4);
    assert_eq!(load_trajectory::<RemState>(&dir.path().join("traj")).unwrap(), traj);
    assert!(load_trajectory::<KgmState>(&dir.path().join("traj")).is_err());
}

#[test]
fn truncated_state_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let g = Grid::line(8, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let p = dir.path().join("k.snap");
    save_state(&random_kgm_state(g, &mut rng), &p).unwrap();
    let bytes = std::fs::read(&p).unwrap();
    std::fs::write(&p, &bytes[..bytes.len() / 2]).unwrap();
    let err = load_state::<KgmState>(&p).unwrap_err();
    assert!(err.to_string().contains("truncated payload"), "{err}");
}

#[test]
fn series_rows_follow_trajectory() {
    let g = Grid::line(8, 1.0).unwrap();
    let ops = Ops::new(g, Backend::Spectral);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let k = vec![random_kgm_state(g, &mut rng); 2];
    let r = vec![random_rem_state(g, &mut rng); 3];
    assert_eq!(kgm_series(&k, &ops).len(), 2);
    let rs = rem_series(&r, &ops);
    assert_eq!(rs.len(), 3);
    assert!(rs[0].normalization < 1e-14);
}

fn small_sweep(dir: &std::path::Path, eps: &str) -> RunConfig {
    let text = format!(
        "[grid]\nn = [16, 1, 1]\n[run]\neps = {eps}\nt_final = 0.1\nstride = 5\nladder = \"fixed\"\n\
         [profile]\nvelocity_amplitude = 0.1\nb_amplitude = 0.2\n[output]\ndir = \"{}\"\nsnapshots = false\n",
        dir.display()
    );
    RunConfig::parse(&text).unwrap()
}

#[test]
fn two_point_sweep_reports_no_slope() {
    let dir = tempfile::tempdir().unwrap();
    let rep = run_sweep(&small_sweep(dir.path(), "[0.1, 0.05]")).unwrap();
    assert_eq!(rep.rows.len(), 2);
    assert!(rep.rows.iter().all(|r| r.ok()));
    assert!(rep.rate.slope.is_none());
    assert!(rep.rate.unavailable.as_deref().unwrap().contains("at least 3"));
    for f in ["sweep.csv", "sweep.json", "rates.json", "manifest.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    assert!(dir.path().join(&rep.rows[0].dir).join("timeseries.csv").exists());
}

#[test]
fn sweeps_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run_sweep(&small_sweep(a.path(), "[0.1, 0.05, 0.025]")).unwrap();
    let rb = run_sweep(&small_sweep(b.path(), "[0.1, 0.05, 0.025]")).unwrap();
    assert!(ra.rate.slope.is_some());
    assert_eq!(ra.rate.slope, rb.rate.slope);
    let ca = std::fs::read(a.path().join("sweep.csv")).unwrap();
    let cb = std::fs::read(b.path().join("sweep.csv")).unwrap();
    assert_eq!(ca, cb);
    let ta = std::fs::read(a.path().join(&ra.rows[2].dir).join("timeseries.csv")).unwrap();
    let tb = std::fs::read(b.path().join(&rb.rows[2].dir).join("timeseries.csv")).unwrap();
    assert_eq!(ta, tb);
}

#[test]
fn identity_suite_passes_on_small_box() {
    let g = Grid::new([6, 4, 2], [1.0, 1.2, 0.9]).unwrap();
    let rep = check_identities(g, 5, 4).unwrap();
    assert!(rep.passed);
    assert_eq!(rep.rows.len(), 4);
    assert!(rep.worst.raise_lower_exact && rep.worst.faraday_roundtrip_exact);
}

#[test]
fn gauge_check_is_at_roundoff_on_resolved_grid() {
    let g = Grid::line(64, 1.0).unwrap();
    let ops = Ops::new(g, Backend::Spectral);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut s = random_kgm_state(g, &mut rng);
    s.eps = 0.2;
    let chi = ScalarField::from_fn(g, |x| 0.1 * (2.0 * PI * x[0]).sin());
    let dt = 0.1 * g.min_spacing();
    let rep = gauge_evolution_check(&s, &chi, 10.0 * dt, dt, 5, &ops, &KgmParams::default()).unwrap();
    assert_eq!(rep.mismatch.len(), 3);
    assert!(rep.max < 1e-10, "{}", rep.max);
}

#[test]
fn static_kinetic_report_is_exact() {
    let g = Grid::new([8, 4, 2], [1.0; 3]).unwrap();
    let rep = static_report(g, 0.5, 11).unwrap();
    assert!(rep.max_maxwell <= 1e-12 && rep.max_vlasov <= 1e-12);
    assert!(rep.moments_bitwise);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fit_recovers_any_power_law(p in -3.0..3.0f64, c in 0.01..100.0f64) {
        let xs = [0.2, 0.1, 0.05, 0.025];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| c * x.powf(p)).collect();
        let f = fit_rate(&xs, &ys).unwrap();
        prop_assert!((f.slope - p).abs() < 1e-9);
        prop_assert!((f.intercept - c.ln()).abs() < 1e-9);
    }

    #[test]
    fn fit_agrees_with_normal_equations(ys in prop::collection::vec(1e-6..1e3f64, 5)) {
        let xs = [0.3, 0.2, 0.1, 0.05, 0.01];
        let f = fit_rate(&xs, &ys).unwrap();
        prop_assert!((f.slope - normal_equations_slope(&xs, &ys)).abs() < 1e-9);
    }
}
