//! Configuration, sweeps, rate fits, persistence and the identity suite.

pub mod config;
pub mod gauge;
pub mod identities;
pub mod io;
pub mod kinetic;
pub mod rate;
pub mod sweep;

pub use config::RunConfig;
pub use gauge::{gauge_evolution_check, GaugeReport};
pub use identities::{check_identities, IdentityReport};
pub use kinetic::{evolved_report, kinetic_report, static_report, KineticReport};
pub use io::{
    kgm_series, load_state, load_trajectory, rem_series, save_state, save_trajectory, write_csv, write_json, KgmSeriesRow,
    Persist, RemSeriesRow,
};
pub use rate::{fit_rate, pairwise_orders, RateFit};
pub use sweep::{run_row, run_sweep, timeseries, SweepReport, SweepRow, TimeseriesRow};
