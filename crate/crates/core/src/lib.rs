//! Semiclassical massive Klein-Gordon-Maxwell and relativistic Euler-Maxwell
//! on a periodic lattice, with WKB data, modulated-energy diagnostics and a
//! monokinetic Vlasov-Maxwell weak-form checker.

pub mod error;
pub mod fields;
pub mod harness;
pub mod kgm;
pub mod modenergy;
pub mod rem;
pub mod vlasov;
pub mod wkb;

pub use error::{Error, Result};
pub use fields::{Backend, Grid, Ops};
