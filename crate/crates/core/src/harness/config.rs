//! Run configuration: TOML with four sections, every key optional, unknown
//! keys rejected.
//!
//! ```toml
//! [grid]
//! n = [64, 1, 1]          # cells per axis at the first eps
//! extent = [1.0, 1.0, 1.0]
//! backend = "spectral"    # spectral | fd2 | fd4
//!
//! [run]
//! eps = [0.1, 0.05, 0.025]  # strictly decreasing
//! t_final = 0.5
//! c_cfl = 0.3             # dt <= c_cfl * dx
//! c_osc = 0.1             # dt <= c_osc * eps
//! stride = 10             # steps between stored snapshots
//! seed = 0
//! ladder = "matched"      # matched: dx, dt scale with eps | fixed
//! transport = "spectral"  # fluid transport: spectral | upwind
//! snap_tol = 1e-8         # admissible wavevector snapping shift
//! shock_threshold = 0.5   # max|grad u| dx before a fluid run aborts
//!
//! [profile]
//! kind = "sine-bump"      # constant | sine-bump | gaussian-bump
//! rho0 = 1.0
//! amplitude = 0.5
//! width = 0.1
//! mode = 1
//! velocity = [0.0, 0.0, 0.0]
//! velocity_amplitude = 0.0
//! phase_amplitude = 0.0
//! b_amplitude = 0.0
//!
//! [output]
//! dir = "out"
//! snapshots = true        # persist every stored state
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Backend, Grid, Ops};
use crate::kgm::KgmParams;
use crate::rem::{RemParams, Transport};
use crate::wkb::Profile;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub n: [usize; 3],
    pub extent: [f64; 3],
    pub backend: Backend,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            n: [64, 1, 1],
            extent: [1.0; 3],
            backend: Backend::Spectral,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ladder {
    Matched,
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportName {
    Spectral,
    Upwind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub eps: Vec<f64>,
    pub t_final: f64,
    pub c_cfl: f64,
    pub c_osc: f64,
    pub stride: usize,
    pub seed: u64,
    pub ladder: Ladder,
    pub transport: TransportName,
    pub snap_tol: f64,
    pub shock_threshold: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            eps: vec![0.1, 0.05, 0.025],
            t_final: 0.5,
            c_cfl: 0.3,
            c_osc: 0.1,
            stride: 10,
            seed: 0,
            ladder: Ladder::Matched,
            transport: TransportName::Spectral,
            snap_tol: 1e-8,
            shock_threshold: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub snapshots: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            snapshots: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    pub run: RunSection,
    pub profile: Profile,
    pub output: OutputSection,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config {
            line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
            msg: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.grid.n.iter().any(|&n| n == 0) {
            return bad(format!("grid.n = {:?} has a zero axis", self.grid.n));
        }
        if self.grid.extent.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return bad(format!("grid.extent = {:?} must be positive", self.grid.extent));
        }
        let r = &self.run;
        if r.eps.is_empty() {
            return bad("run.eps is empty".into());
        }
        if r.eps.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return bad(format!("run.eps = {:?} must be positive", r.eps));
        }
        if r.eps.windows(2).any(|w| w[1] >= w[0]) {
            return bad(format!("run.eps = {:?} must be strictly decreasing", r.eps));
        }
        for (name, v) in [
            ("t_final", r.t_final),
            ("c_cfl", r.c_cfl),
            ("c_osc", r.c_osc),
            ("snap_tol", r.snap_tol),
            ("shock_threshold", r.shock_threshold),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("run.{name} = {v} must be positive"));
            }
        }
        if r.stride == 0 {
            return bad("run.stride must be at least 1".into());
        }
        Ok(())
    }

    /// Grid used for `eps_list[idx]`. On the matched ladder every resolved
    /// axis scales with `eps_list[0] / eps`.
    pub fn grid_for(&self, idx: usize) -> Result<Grid> {
        let n = match self.run.ladder {
            Ladder::Fixed => self.grid.n,
            Ladder::Matched => {
                let s = self.run.eps[0] / self.run.eps[idx];
                self.grid
                    .n
                    .map(|n| if n > 1 { (n as f64 * s).round() as usize } else { 1 })
            }
        };
        Grid::new(n, self.grid.extent)
    }

    pub fn ops_for(&self, idx: usize) -> Result<Ops> {
        Ok(Ops::new(self.grid_for(idx)?, self.grid.backend))
    }

    /// `min(c_cfl dx, c_osc eps)`.
    pub fn dt_for(&self, grid: &Grid, eps: f64) -> f64 {
        (self.run.c_cfl * grid.min_spacing()).min(self.run.c_osc * eps)
    }

    pub fn kgm_params(&self) -> KgmParams {
        KgmParams::default()
    }

    pub fn rem_params(&self) -> RemParams {
        RemParams {
            transport: match self.run.transport {
                TransportName::Spectral => Transport::Spectral,
                TransportName::Upwind => Transport::Upwind,
            },
            shock_threshold: self.run.shock_threshold,
            ..RemParams::default()
        }
    }
}
