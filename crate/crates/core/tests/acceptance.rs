//! Acceptance criteria, one line each. Experiments read their settings from
//! `configs/`; output goes to a temporary directory.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mkgm::fields::{Backend, FourVectorField, Grid, IndexPosition, NormKind, Ops, ScalarField, VectorField3};
use mkgm::harness::identities::{random_rem_state, random_smooth};
use mkgm::harness::{
    check_identities, evolved_report, fit_rate, gauge_evolution_check, pairwise_orders, run_row, run_sweep,
    static_report, RunConfig, SweepReport,
};
use mkgm::kgm::{kgm_evolve, kgm_observables};
use mkgm::modenergy::{modulated_fields, propagation_budget, sandwich, AcceptableVectorField};
use mkgm::rem::{elliptic_spectrum, rem_evolve, rem_init, rem_observables, RemParams};
use mkgm::wkb::{constraint_repair, make_matched_pair, wkb_residual};

type Check = Result<(bool, String), String>;

fn config(name: &str) -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn scratch() -> &'static Path {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    DIR.get_or_init(|| tempfile::tempdir().expect("temporary directory")).path()
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Slope of `log err` against `log h`; `None` when any error is zero.
fn order(hs: &[f64], errs: &[f64]) -> Option<f64> {
    fit_rate(hs, errs).ok().map(|f| f.slope)
}

fn in_band(x: Option<f64>, lo: f64, hi: f64) -> bool {
    x.is_some_and(|v| v >= lo && v <= hi)
}

fn fmt_order(x: Option<f64>) -> String {
    x.map_or("n/a".into(), |v| format!("{v:.2}"))
}

struct SweepRun {
    report: SweepReport,
    seconds: f64,
}

fn sweep() -> &'static Result<SweepRun, String> {
    static RUN: OnceLock<Result<SweepRun, String>> = OnceLock::new();
    RUN.get_or_init(|| {
        let mut cfg = config("c01_rate.toml");
        cfg.output.dir = scratch().join("rate");
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(e2s)?;
        let t = Instant::now();
        let report = pool.install(|| run_sweep(&cfg)).map_err(e2s)?;
        Ok(SweepRun {
            report,
            seconds: t.elapsed().as_secs_f64(),
        })
    })
}

fn c1_rate() -> Check {
    let run = sweep().as_ref().map_err(Clone::clone)?;
    let r = &run.report;
    let failed: Vec<&str> = r.rows.iter().filter(|x| !x.ok()).map(|x| x.status.as_str()).collect();
    let slope = r.rate.slope;
    let pass = failed.is_empty() && in_band(slope, 1.6, 2.4) && run.seconds < 900.0;
    let ratios: Vec<String> = r.rows.iter().map(|x| format!("{:.4}", x.sup_h0_over_eps2)).collect();
    Ok((
        pass,
        format!(
            "slope {} (band [1.6, 2.4]), sup H0/eps^2 = [{}], {:.1} s on one thread{}",
            fmt_order(slope),
            ratios.join(", "),
            run.seconds,
            if failed.is_empty() { String::new() } else { format!(", failed rows: {failed:?}") }
        ),
    ))
}

fn c2_coercivity() -> Check {
    let run = sweep().as_ref().map_err(Clone::clone)?;
    let rows = &run.report.rows;
    let coercive = rows.iter().all(|r| r.coercive);
    let names = ["J L1", "F L2", "rho L1", "sqrt rho L2"];
    let mut monotone = true;
    let mut parts = Vec::new();
    for (k, name) in names.iter().enumerate() {
        let d: Vec<f64> = rows.iter().map(|r| r.final_distances[k]).collect();
        let ok = d.windows(2).all(|w| w[1] < w[0]);
        monotone &= ok;
        let v: Vec<String> = d.iter().map(|x| format!("{x:.2e}")).collect();
        parts.push(format!("{name} [{}]", v.join(" > ")));
    }
    let snaps: usize = rows.iter().map(|r| r.snapshots).sum();
    Ok((
        coercive && monotone,
        format!(
            "|F^eps - F|^2 <= 2 h00 cellwise on {snaps} snapshots: {coercive}; final distances {}",
            parts.join("; ")
        ),
    ))
}

fn c3_preparation() -> Check {
    let cfg = config("c03_preparation.toml");
    let ops = cfg.ops_for(0).map_err(e2s)?;
    let mp = make_matched_pair(&cfg.profile, &cfg.run.eps, &ops, cfg.run.snap_tol).map_err(e2s)?;
    // rho = 1 + b sin(2 pi x), fluid at rest: 1/2 int |d_x sqrt rho|^2 in closed form.
    let b = cfg.profile.amplitude;
    let oracle = PI * PI * (1.0 - (1.0 - b * b).sqrt()) / (8.0 * b * b);
    let worst_rel = mp
        .report
        .iter()
        .map(|r| (r.h0_over_eps2 - oracle).abs() / oracle)
        .fold(0.0, f64::max);
    let worst_sqrt = mp.report.iter().map(|r| r.sqrt_rho_l2).fold(0.0, f64::max);
    Ok((
        worst_rel <= 0.02 && worst_sqrt <= 1e-14,
        format!(
            "H0/eps^2 vs oracle {oracle:.9}: max rel gap {worst_rel:.2e} over {} eps; max ||sqrt rho^eps - sqrt rho|| = {worst_sqrt:.1e}",
            mp.report.len()
        ),
    ))
}

/// Relative drifts at or below this are conservation to roundoff; no order
/// is fitted for them.
const DRIFT_FLOOR: f64 = 1e-10;

fn c4_conservation() -> Check {
    let cfg = config("c04_conservation.toml");
    let ops = cfg.ops_for(0).map_err(e2s)?;
    let eps = cfg.run.eps[0];
    let dt0 = cfg.dt_for(ops.grid(), eps);
    let mp = make_matched_pair(&cfg.profile, &[eps], &ops, cfg.run.snap_tol).map_err(e2s)?;
    let dts = [dt0, dt0 / 2.0, dt0 / 4.0];
    let mut drifts = [[0.0; 3]; 4];
    for (i, &dt) in dts.iter().enumerate() {
        let k = kgm_evolve(&mp.family[0].1, cfg.run.t_final, dt, cfg.run.stride, &ops, &cfg.kgm_params())
            .map_err(e2s)?;
        let ko: Vec<_> = k.iter().map(|s| kgm_observables(s, &ops)).collect();
        let r = rem_evolve(&mp.rem, cfg.run.t_final, dt, cfg.run.stride, &ops, &cfg.rem_params()).map_err(e2s)?;
        let ro: Vec<_> = r.iter().map(|s| rem_observables(s, &ops)).collect();
        let rel = |xs: &[f64]| xs.iter().map(|x| (x - xs[0]).abs()).fold(0.0, f64::max) / xs[0].abs();
        drifts[0][i] = rel(&ko.iter().map(|o| o.energy).collect::<Vec<_>>());
        drifts[1][i] = rel(&ko.iter().map(|o| o.charge).collect::<Vec<_>>());
        drifts[2][i] = rel(&ro.iter().map(|o| o.energy).collect::<Vec<_>>());
        drifts[3][i] = rel(&ro.iter().map(|o| o.charge).collect::<Vec<_>>());
    }
    let names = ["kgm energy", "kgm charge", "rem energy", "rem charge"];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, d) in names.iter().zip(&drifts) {
        if d.iter().all(|&x| x <= DRIFT_FLOOR) {
            parts.push(format!("{name} max {:.1e} (roundoff)", d.iter().copied().fold(0.0, f64::max)));
            continue;
        }
        let p = order(&dts, d);
        pass &= in_band(p, 1.7, 2.3);
        parts.push(format!("{name} {:.2e}->{:.2e} order {}", d[0], d[2], fmt_order(p)));
    }
    Ok((pass, format!("dt = {dt0:.3e}/1,2,4: {}", parts.join("; "))))
}

/// Every constraint residual stays below `10 max(r0, floor)`.
fn bounded(series: &[f64], floor: f64) -> (bool, f64) {
    let lim = 10.0 * series[0].max(floor);
    let max = series.iter().copied().fold(0.0, f64::max);
    (max <= lim, max / series[0].max(floor))
}

fn c5_constraints() -> Check {
    let cfg = config("c05_constraints.toml");
    let eps = cfg.run.eps[0];
    let t_final = cfg.run.t_final;
    let mut pass = true;
    let mut parts = Vec::new();

    // Reference resolution.
    let ops = cfg.ops_for(0).map_err(e2s)?;
    let mp = make_matched_pair(&cfg.profile, &[eps], &ops, cfg.run.snap_tol).map_err(e2s)?;
    let dt = cfg.dt_for(ops.grid(), eps);
    let k = kgm_evolve(&mp.family[0].1, t_final, dt, cfg.run.stride, &ops, &cfg.kgm_params()).map_err(e2s)?;
    let r = rem_evolve(&mp.rem, t_final, dt, cfg.run.stride, &ops, &cfg.rem_params()).map_err(e2s)?;
    let floor = 1e-12 * mp.rem.charge_density().norm(NormKind::L2);
    let gk: Vec<f64> = k.iter().map(|s| kgm_observables(s, &ops).gauss_residual).collect();
    let ro: Vec<_> = r.iter().map(|s| rem_observables(s, &ops)).collect();
    let gr: Vec<f64> = ro.iter().map(|o| o.gauss_residual).collect();
    let db: Vec<f64> = ro.iter().map(|o| o.div_b_residual).collect();
    for (name, s) in [("kgm gauss", &gk), ("rem gauss", &gr), ("divB", &db)] {
        let (ok, growth) = bounded(s, floor);
        pass &= ok;
        parts.push(format!("{name} x{growth:.1}"));
    }

    // Three-dimensional fluid run for div B.
    let (ok, growth) = divb_3d(&cfg)?;
    pass &= ok;
    parts.push(format!("divB 3D x{growth:.1}"));

    // Growth of the Klein-Gordon Gauss residual under joint refinement.
    let n0 = cfg.grid.n[0];
    for (backend, p) in [(Backend::Fd2, 2.0), (Backend::Fd4, 4.0)] {
        let mut hs = Vec::new();
        let mut growth = Vec::new();
        let mut rem_growth: f64 = 0.0;
        for level in 0..4 {
            let n = n0 / 2 << level;
            let ops = Ops::new(Grid::new([n, 1, 1], cfg.grid.extent).map_err(e2s)?, backend);
            let mp = make_matched_pair(&cfg.profile, &[eps], &ops, cfg.run.snap_tol).map_err(e2s)?;
            let dt = cfg.dt_for(ops.grid(), eps);
            let k = kgm_evolve(&mp.family[0].1, t_final, dt, cfg.run.stride, &ops, &cfg.kgm_params())
                .map_err(e2s)?;
            let g: Vec<f64> = k.iter().map(|s| kgm_observables(s, &ops).gauss_residual).collect();
            growth.push(g.iter().map(|x| (x - g[0]).abs()).fold(0.0, f64::max));
            let r = rem_evolve(&mp.rem, t_final, dt, cfg.run.stride, &ops, &cfg.rem_params()).map_err(e2s)?;
            let floor = 1e-12 * mp.rem.charge_density().norm(NormKind::L2);
            let gr: Vec<f64> = r.iter().map(|s| rem_observables(s, &ops).gauss_residual).collect();
            rem_growth = rem_growth.max(gr.iter().copied().fold(0.0, f64::max) / floor);
            hs.push(1.0 / n as f64);
        }
        let q = order(&hs, &growth);
        pass &= in_band(q, p - 0.3, p + 0.3) && rem_growth <= 10.0;
        parts.push(format!(
            "{backend}: kgm gauss growth {:.1e}->{:.1e} order {} (scheme {p}), rem gauss <= {rem_growth:.2} x floor",
            growth[0],
            growth[3],
            fmt_order(q)
        ));
    }
    Ok((pass, parts.join("; ")))
}

fn divb_3d(cfg: &RunConfig) -> Result<(bool, f64), String> {
    let g = Grid::new([12, 12, 12], [1.0; 3]).map_err(e2s)?;
    let ops = Ops::new(g, Backend::Spectral);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
    let rho = random_smooth(g, &mut rng, 4, 0.2).map(|r| 1.0 + r);
    let comp = |rng: &mut ChaCha8Rng, a: f64| {
        VectorField3::from_components(
            random_smooth(g, rng, 3, a),
            random_smooth(g, rng, 3, a),
            random_smooth(g, rng, 3, a),
        )
    };
    let u = comp(&mut rng, 0.05);
    let b = ops.curl(&comp(&mut rng, 0.05));
    let q = rho.zip_map(&mkgm::rem::lorentz(&u), |r, w| r * w);
    let e = constraint_repair(&VectorField3::zeros(g), &q, &ops).map_err(e2s)?;
    let (s, _) = rem_init(u, rho, e, b, &ops).map_err(e2s)?;
    let dt = 0.3 * g.min_spacing();
    let traj = rem_evolve(&s, 0.25, dt, 1, &ops, &RemParams::default()).map_err(e2s)?;
    let db: Vec<f64> = traj.iter().map(|s| rem_observables(s, &ops).div_b_residual).collect();
    let floor = 1e-12 * s.b.norm(NormKind::L2);
    Ok(bounded(&db, floor))
}

fn c6_gauge() -> Check {
    let cfg = config("c06_gauge.toml");
    let ops = cfg.ops_for(0).map_err(e2s)?;
    let eps = cfg.run.eps[0];
    let mp = make_matched_pair(&cfg.profile, &[eps], &ops, cfg.run.snap_tol).map_err(e2s)?;
    let l = cfg.grid.extent[0];
    let chi = ScalarField::from_fn(*ops.grid(), |x| {
        eps * (0.5 * (2.0 * PI * x[0] / l).cos() + 0.2 * (4.0 * PI * x[0] / l + 0.3).sin())
    });
    let dt = cfg.dt_for(ops.grid(), eps);
    let rep = gauge_evolution_check(&mp.family[0].1, &chi, cfg.run.t_final, dt, cfg.run.stride, &ops, &cfg.kgm_params())
        .map_err(e2s)?;
    Ok((
        rep.max <= 1e-10,
        format!("max relative observable mismatch {:.2e} over {} output times", rep.max, rep.mismatch.len()),
    ))
}

fn identities() -> &'static Result<(mkgm::harness::IdentityReport, f64), String> {
    static REP: OnceLock<Result<(mkgm::harness::IdentityReport, f64), String>> = OnceLock::new();
    REP.get_or_init(|| {
        let cfg = config("c07_identities.toml");
        let g = Grid::new(cfg.grid.n, cfg.grid.extent).map_err(e2s)?;
        let t = Instant::now();
        let rep = check_identities(g, cfg.run.seed, 20).map_err(e2s)?;
        Ok((rep, t.elapsed().as_secs_f64()))
    })
}

fn c7_identities() -> Check {
    let (rep, secs) = identities().as_ref().map_err(Clone::clone)?;
    let w = &rep.worst;
    let pass = rep.passed && rep.rows.len() == 20 && *secs < 60.0;
    Ok((
        pass,
        format!(
            "{} samples in {secs:.2} s: split {:.1e} (<= 1e-9), h+I {:.1e} (<= 1e-10), h00 forms {:.1e} (<= 1e-9)",
            rep.rows.len(),
            w.split,
            w.decomposition,
            w.h00
        ),
    ))
}

fn c8_wkb() -> Check {
    let cfg = config("c08_wkb.toml");
    let ops = cfg.ops_for(0).map_err(e2s)?;
    let mp = make_matched_pair(&cfg.profile, &cfg.run.eps, &ops, cfg.run.snap_tol).map_err(e2s)?;
    let res: Vec<(f64, f64)> = mp.ansatz.iter().map(|a| wkb_residual(a, &ops)).collect::<Result<_, _>>().map_err(e2s)?;
    let mx: Vec<f64> = res.iter().map(|r| r.0).collect();
    let kg: Vec<f64> = res.iter().map(|r| r.1).collect();
    let sm = order(&cfg.run.eps, &mx);
    let sk = order(&cfg.run.eps, &kg);
    Ok((
        cfg.run.eps.len() == 4 && in_band(sk, 1.7, 2.3) && in_band(sm, 0.7, 1.3),
        format!(
            "kg slope {} (2 +- 0.3), maxwell slope {} (1 +- 0.3) over eps {:?}",
            fmt_order(sk),
            fmt_order(sm),
            cfg.run.eps
        ),
    ))
}

fn c9_vlasov() -> Check {
    let cfg = config("c09_vlasov.toml");
    let st = static_report(Grid::new([16, 8, 4], [1.0, 1.3, 0.7]).map_err(e2s)?, cfg.run.t_final, 41).map_err(e2s)?;
    let mut hs = Vec::new();
    let mut mw = Vec::new();
    let mut vl = Vec::new();
    let mut bitwise = st.moments_bitwise;
    for idx in 0..cfg.run.eps.len() {
        let r = evolved_report(&cfg, idx).map_err(e2s)?;
        hs.push(cfg.grid.extent[0] / r.n[0] as f64);
        mw.push(r.max_maxwell);
        vl.push(r.max_vlasov);
        bitwise &= r.moments_bitwise;
    }
    let (om, ov) = (order(&hs, &mw), order(&hs, &vl));
    let pass = st.max_maxwell <= 1e-10
        && st.max_vlasov <= 1e-10
        && om.is_some_and(|o| o >= 1.5)
        && ov.is_some_and(|o| o >= 1.5)
        && bitwise;
    Ok((
        pass,
        format!(
            "static {:.1e}/{:.1e}; evolved maxwell {:.1e}->{:.1e} order {}, vlasov {:.1e}->{:.1e} order {}; moments bitwise {bitwise}",
            st.max_maxwell,
            st.max_vlasov,
            mw[0],
            mw[mw.len() - 1],
            fmt_order(om),
            vl[0],
            vl[vl.len() - 1],
            fmt_order(ov)
        ),
    ))
}

fn c10_spectrum() -> Check {
    let (rep, _) = identities().as_ref().map_err(Clone::clone)?;
    // Faster flows than the identity suite draws.
    let g = Grid::new([8, 6, 4], [1.0; 3]).map_err(e2s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let mut s = random_rem_state(g, &mut rng);
        s.u = s.u.scale(rng.gen_range(1.0..10.0));
        let ev = elliptic_spectrum(&s);
        let u0 = s.u0();
        for c in 0..g.len() {
            let want = [1.0, 1.0, 1.0 / (u0.data[c] * u0.data[c])];
            for a in 0..3 {
                worst = worst.max((ev[a].data[c] - want[a]).abs());
            }
        }
    }
    let w = rep.worst.spectrum.max(worst);
    Ok((w <= 1e-12, format!("max |lambda - (1, 1, 1/U0^2)| = {w:.1e} on 40 random states")))
}

/// Random smooth acceptable observer field and its admissible `nu`.
fn random_observer(g: Grid, rng: &mut impl Rng) -> Result<AcceptableVectorField, String> {
    let mut x = FourVectorField::zeros(g, IndexPosition::Contravariant);
    let base = rng.gen_range(1.1..2.0);
    x.t = random_smooth(g, rng, 2, 0.1).map(|v| base + v);
    let speed = rng.gen_range(0.2..0.8);
    for a in 0..3 {
        x.s.c[a] = random_smooth(g, rng, 2, speed / 3.0).data;
    }
    let mut nu = f64::INFINITY;
    for c in 0..g.len() {
        let v = x.at(c);
        let s2 = v[1] * v[1] + v[2] * v[2] + v[3] * v[3];
        nu = nu.min(v[0]).min(v[0] * v[0] - s2).min(1.0 / (v[0] * v[0] + s2).sqrt());
    }
    AcceptableVectorField::new(x, nu).map_err(e2s)
}

fn c11_sandwich() -> Check {
    let cfg = config("c11_sandwich.toml");
    let run = run_row(&cfg, 0).map_err(e2s)?;
    let ops = cfg.ops_for(0).map_err(e2s)?;
    let g = *ops.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
    let xs: Vec<AcceptableVectorField> = (0..5).map(|_| random_observer(g, &mut rng)).collect::<Result<_, _>>()?;
    let mut holds = 0;
    let mut total = 0;
    let mut tight = f64::INFINITY;
    for (k, r) in run.kgm.iter().zip(&run.rem) {
        let mf = modulated_fields(k, r, &ops, 1e-9).map_err(e2s)?;
        for x in &xs {
            let s = sandwich(&mf, x);
            total += 1;
            if s.holds {
                holds += 1;
            }
            tight = tight.min((s.hx - s.c1 * s.h0).min(s.c2 * s.h0 - s.hx) / s.h0);
        }
    }
    Ok((
        holds == total && total == 5 * run.kgm.len(),
        format!(
            "{holds}/{total} (5 observers x {} snapshots); smallest relative margin {tight:.2e}",
            run.kgm.len()
        ),
    ))
}

fn c12_budget() -> Check {
    let mut cfg = config("c12_budget.toml");
    let n0 = cfg.grid.n[0];
    let mut hs = Vec::new();
    let mut gaps = Vec::new();
    for level in 0..4 {
        cfg.grid.n = [n0 << level, 1, 1];
        let run = run_row(&cfg, 0).map_err(e2s)?;
        let ops = cfg.ops_for(0).map_err(e2s)?;
        let rows = propagation_budget(&run.kgm, &run.rem, &ops, 0.0).map_err(e2s)?;
        gaps.push(rows.iter().map(|r| r.closure_gap).fold(0.0, f64::max));
        hs.push(cfg.grid.extent[0] / cfg.grid.n[0] as f64);
    }
    let p = order(&hs, &gaps);
    let pairs: Vec<String> = pairwise_orders(&hs, &gaps).iter().map(|o| format!("{o:.2}")).collect();
    let g: Vec<String> = gaps.iter().map(|x| format!("{x:.2e}")).collect();
    Ok((
        in_band(p, 1.7, 2.3),
        format!("closure gap [{}] order {} (pairwise {})", g.join(", "), fmt_order(p), pairs.join(", ")),
    ))
}

fn main() {
    let checks: [(&str, &str, fn() -> Check); 12] = [
        ("C1", "propagation rate", c1_rate),
        ("C2", "coercivity bound", c2_coercivity),
        ("C3", "initial preparation", c3_preparation),
        ("C4", "conservation orders", c4_conservation),
        ("C5", "constraint propagation", c5_constraints),
        ("C6", "gauge invariance", c6_gauge),
        ("C7", "identity suite", c7_identities),
        ("C8", "WKB residual rates", c8_wkb),
        ("C9", "Vlasov weak form", c9_vlasov),
        ("C10", "elliptic spectrum", c10_spectrum),
        ("C11", "sandwich property", c11_sandwich),
        ("C12", "budget closure", c12_budget),
    ];
    let mut failed = 0;
    for (id, name, f) in checks {
        let t = Instant::now();
        let (pass, detail) = match std::panic::catch_unwind(f) {
            Ok(Ok(r)) => r,
            Ok(Err(e)) => (false, format!("error: {e}")),
            Err(_) => (false, "panicked".into()),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{id:<4} {} {name}: {detail} [{:.1} s]",
            if pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", 12 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
