use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mkgm::fields::{Backend, Grid};
use mkgm::harness::{
    check_identities, evolved_report, gauge_evolution_check, kgm_series, load_state, pairwise_orders, rem_series,
    run_sweep, save_state, save_trajectory, static_report, write_csv, write_json, RunConfig,
};
use mkgm::kgm::{kgm_evolve, KgmState};
use mkgm::rem::{rem_evolve, RemState};
use mkgm::vlasov::write_residual_csv;
use mkgm::wkb::{make_matched_pair, rem_data};
use mkgm::{Error, Ops, Result};

#[derive(Parser)]
#[command(name = "mkgm", version, about = "Semiclassical Klein-Gordon-Maxwell vs relativistic Euler-Maxwell")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides [output] dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated, strictly decreasing eps list.
    #[arg(long, global = true, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Cells per axis as Nx,Ny,Nz.
    #[arg(long, global = true, value_parser = parse_grid)]
    grid: Option<[usize; 3]>,
    /// Derivative backend: spectral, fd2 or fd4.
    #[arg(long, global = true)]
    backend: Option<Backend>,
    /// Seed for randomized samples (overrides [run] seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build matched WKB / fluid data for every eps and save snapshots.
    MakeData,
    /// Evolve Klein-Gordon-Maxwell from matched data or a saved state.
    SimulateKgm {
        /// Start from this KGM snapshot instead of matched data.
        #[arg(long)]
        init: Option<PathBuf>,
    },
    /// Evolve relativistic Euler-Maxwell from the profile or a saved state.
    SimulateRem {
        #[arg(long)]
        init: Option<PathBuf>,
    },
    /// Full eps sweep with modulated-energy time series and rate fit.
    Sweep,
    /// Pointwise identities on randomized manufactured states, plus gauge
    /// invariance of an evolved state.
    CheckIdentities {
        #[arg(long, default_value_t = 20)]
        samples: usize,
    },
    /// Weak Vlasov-Maxwell residuals on the static solution and on fluid
    /// trajectories along the configured ladder.
    VlasovCheck,
}

fn parse_grid(s: &str) -> std::result::Result<[usize; 3], String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("'{p}': {e}")))
        .collect::<std::result::Result<_, _>>()?;
    v.try_into().map_err(|v: Vec<usize>| format!("expected Nx,Ny,Nz, got {} values", v.len()))
}

fn load_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &c.out {
        cfg.output.dir = o.clone();
    }
    if let Some(e) = &c.eps {
        cfg.run.eps = e.clone();
    }
    if let Some(g) = c.grid {
        cfg.grid.n = g;
    }
    if let Some(b) = c.backend {
        cfg.grid.backend = b;
    }
    if let Some(s) = c.seed {
        cfg.run.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn level_dir(out: &Path, what: &str, idx: usize, eps: f64) -> PathBuf {
    out.join(what).join(format!("eps_{idx:02}_{eps:e}"))
}

fn make_data(cfg: &RunConfig) -> Result<bool> {
    let mut rows = Vec::new();
    for (idx, &eps) in cfg.run.eps.iter().enumerate() {
        let ops = cfg.ops_for(idx)?;
        let mp = make_matched_pair(&cfg.profile, &[eps], &ops, cfg.run.snap_tol)?;
        let dir = level_dir(&cfg.output.dir, "data", idx, eps);
        save_state(&mp.family[0].1, &dir.join("kgm.snap"))?;
        save_state(&mp.rem, &dir.join("rem.snap"))?;
        let r = mp.report.into_iter().next().unwrap();
        println!(
            "eps {:<8} n {:?}  H0/eps^2 {:.6e}  gauss kgm {:.2e} rem {:.2e}  |sqrt rho diff| {:.2e}",
            eps, ops.grid().dims(), r.h0_over_eps2, r.gauss_kgm, r.gauss_rem, r.sqrt_rho_l2
        );
        rows.push(r);
    }
    write_csv(&cfg.output.dir.join("preparation.csv"), &rows)?;
    Ok(true)
}

fn simulate_kgm(cfg: &RunConfig, init: Option<&Path>) -> Result<bool> {
    let runs: Vec<(usize, KgmState, Ops)> = match init {
        Some(p) => {
            let s: KgmState = load_state(p)?;
            let ops = Ops::new(s.grid(), cfg.grid.backend);
            vec![(0, s, ops)]
        }
        None => cfg
            .run
            .eps
            .iter()
            .enumerate()
            .map(|(idx, &eps)| {
                let ops = cfg.ops_for(idx)?;
                let mp = make_matched_pair(&cfg.profile, &[eps], &ops, cfg.run.snap_tol)?;
                Ok((idx, mp.family.into_iter().next().unwrap().1, ops))
            })
            .collect::<Result<_>>()?,
    };
    for (idx, s, ops) in runs {
        let dt = cfg.dt_for(ops.grid(), s.eps);
        let traj = kgm_evolve(&s, cfg.run.t_final, dt, cfg.run.stride, &ops, &cfg.kgm_params())?;
        let dir = level_dir(&cfg.output.dir, "kgm", idx, s.eps);
        let series = kgm_series(&traj, &ops);
        write_csv(&dir.join("observables.csv"), &series)?;
        if cfg.output.snapshots {
            save_trajectory(&traj, &dir)?;
        }
        let (a, b) = (&series[0], series.last().unwrap());
        println!(
            "eps {:<8} n {:?}  t {:.3}  energy drift {:.3e}  charge drift {:.3e}  gauss {:.2e} -> {:.2e}",
            s.eps,
            ops.grid().dims(),
            b.t,
            (b.energy - a.energy) / a.energy,
            b.charge - a.charge,
            a.gauss,
            b.gauss
        );
    }
    Ok(true)
}

fn simulate_rem(cfg: &RunConfig, init: Option<&Path>) -> Result<bool> {
    let (s, ops): (RemState, Ops) = match init {
        Some(p) => {
            let s: RemState = load_state(p)?;
            let ops = Ops::new(s.grid(), cfg.grid.backend);
            (s, ops)
        }
        None => {
            let ops = cfg.ops_for(0)?;
            (rem_data(&cfg.profile, &ops)?.0, ops)
        }
    };
    let dt = cfg.dt_for(ops.grid(), cfg.run.eps[0]);
    let traj = rem_evolve(&s, cfg.run.t_final, dt, cfg.run.stride, &ops, &cfg.rem_params())?;
    let dir = cfg.output.dir.join("rem");
    let series = rem_series(&traj, &ops);
    write_csv(&dir.join("observables.csv"), &series)?;
    if cfg.output.snapshots {
        save_trajectory(&traj, &dir)?;
    }
    let (a, b) = (&series[0], series.last().unwrap());
    println!(
        "n {:?}  t {:.3}  energy drift {:.3e}  charge drift {:.3e}  gauss {:.2e} -> {:.2e}  divB {:.2e}  max|grad u|dx {:.3e}",
        ops.grid().dims(),
        b.t,
        (b.energy - a.energy) / a.energy,
        b.charge - a.charge,
        a.gauss,
        b.gauss,
        b.div_b,
        series.iter().map(|r| r.max_grad_u).fold(0.0, f64::max) * ops.grid().min_spacing()
    );
    Ok(true)
}

fn sweep(cfg: &RunConfig) -> Result<bool> {
    let rep = run_sweep(cfg)?;
    println!("{:>8} {:>14} {:>12} {:>11} {:>11} {:>11} {:>11}  status", "eps", "n", "sup H0", "H0/eps^2", "d J", "d F", "d rho");
    for r in &rep.rows {
        let d = r.final_distances;
        println!(
            "{:>8} {:>14} {:>12.4e} {:>11.4e} {:>11.3e} {:>11.3e} {:>11.3e}  {}",
            r.eps,
            format!("{:?}", r.n),
            r.sup_h0,
            r.sup_h0_over_eps2,
            d[0],
            d[1],
            d[2],
            r.status
        );
    }
    match (rep.rate.slope, rep.rate.residual) {
        (Some(s), Some(res)) => println!("slope of sup H0 vs eps: {s:.4} (max log residual {res:.2e})"),
        _ => println!("slope unavailable: {}", rep.rate.unavailable.as_deref().unwrap_or("")),
    }
    println!("wrote {}", cfg.output.dir.display());
    Ok(rep.rows.iter().all(|r| r.ok()))
}

fn identities(cfg: &RunConfig, samples: usize, grid_given: bool) -> Result<bool> {
    let n = if grid_given { cfg.grid.n } else { [8, 6, 4] };
    let grid = Grid::new(n, cfg.grid.extent)?;
    let rep = check_identities(grid, cfg.run.seed, samples)?;
    let w = &rep.worst;
    println!("identity suite: {} samples on {:?}, seed {}", rep.rows.len(), n, rep.seed);
    println!("  raise/lower involution   {}", w.raise_lower_exact);
    println!("  faraday round trip       {}", w.faraday_roundtrip_exact);
    println!("  faraday scalar           {:.3e}", w.faraday_scalar);
    println!("  splitting identities     {:.3e}", w.split);
    println!("  h + I decomposition      {:.3e}", w.decomposition);
    println!("  h00 two forms            {:.3e}", w.h00);
    println!("  elliptic spectrum        {:.3e}", w.spectrum);
    write_json(&cfg.output.dir.join("identities.json"), &rep)?;

    let g = Grid::line(64, 1.0)?;
    let ops = Ops::new(g, cfg.grid.backend);
    let eps = 0.1;
    let mp = make_matched_pair(&cfg.profile, &[eps], &ops, cfg.run.snap_tol)?;
    let chi = mkgm::fields::ScalarField::from_fn(g, |x| 0.5 * eps * (2.0 * std::f64::consts::PI * x[0]).cos());
    let dt = cfg.dt_for(&g, eps);
    let gauge = gauge_evolution_check(&mp.family[0].1, &chi, cfg.run.t_final, dt, cfg.run.stride, &ops, &cfg.kgm_params())?;
    println!("  gauge invariance (evolved, N=64) {:.3e}", gauge.max);
    write_json(&cfg.output.dir.join("gauge.json"), &gauge)?;
    let ok = rep.passed && gauge.max <= 1e-10;
    println!("{}", if ok { "PASS" } else { "FAIL" });
    Ok(ok)
}

fn vlasov(cfg: &RunConfig) -> Result<bool> {
    let g0 = cfg.grid_for(0)?;
    let st = static_report(g0, cfg.run.t_final, 21)?;
    println!(
        "static solution on {:?}: maxwell {:.3e}  vlasov {:.3e}  moments bitwise {}",
        g0.dims(),
        st.max_maxwell,
        st.max_vlasov,
        st.moments_bitwise
    );
    write_residual_csv(&cfg.output.dir.join("vlasov").join("static.csv"), &st.rows, &g0, st.dt)?;
    let mut ok = st.max_maxwell <= 1e-10 && st.max_vlasov <= 1e-10 && st.moments_bitwise;
    let mut hs = Vec::new();
    let mut mw = Vec::new();
    let mut vl = Vec::new();
    for idx in 0..cfg.run.eps.len() {
        let r = evolved_report(cfg, idx)?;
        let g = cfg.grid_for(idx)?;
        println!(
            "level {idx} n {:?} dt {:.3e}: maxwell {:.3e}  vlasov {:.3e}  moments bitwise {}",
            r.n, r.dt, r.max_maxwell, r.max_vlasov, r.moments_bitwise
        );
        write_residual_csv(&cfg.output.dir.join("vlasov").join(format!("level_{idx:02}.csv")), &r.rows, &g, r.dt)?;
        ok &= r.moments_bitwise;
        hs.push(r.dt);
        mw.push(r.max_maxwell);
        vl.push(r.max_vlasov);
    }
    if hs.len() >= 2 {
        let fmt = |v: Vec<f64>| v.iter().map(|o| format!("{o:.2}")).collect::<Vec<_>>().join(" ");
        println!("observed orders  maxwell: {}  vlasov: {}", fmt(pairwise_orders(&hs, &mw)), fmt(pairwise_orders(&hs, &vl)));
    }
    Ok(ok)
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = load_config(&cli.common)?;
    match cli.cmd {
        Cmd::MakeData => make_data(&cfg),
        Cmd::SimulateKgm { init } => simulate_kgm(&cfg, init.as_deref()),
        Cmd::SimulateRem { init } => simulate_rem(&cfg, init.as_deref()),
        Cmd::Sweep => sweep(&cfg),
        Cmd::CheckIdentities { samples } => identities(&cfg, samples, cli.common.grid.is_some()),
        Cmd::VlasovCheck => vlasov(&cfg),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Config { .. } | Error::InvalidConfig(_) = e {
                return ExitCode::from(3);
            }
            ExitCode::from(2)
        }
    }
}
