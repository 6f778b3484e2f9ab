//! User-centric interference nulling in two-tier multi-antenna HetNets:
//! analytical coverage, high-reliability asymptotics and a Monte Carlo
//! network simulator.

pub mod analysis;
pub mod asymptotics;
pub mod combinatorics;
pub mod error;
pub mod geometry;
pub mod in_scheme;
pub mod montecarlo;
pub mod netconfig;
pub mod specfun;
pub mod stats;

pub use error::{ConfigError, Error, NumericError, Result};
pub use netconfig::{ConfigBundle, EngineSettings, InParams, NetworkConfig, SimMode, Tier};
pub use specfun::QuadratureSettings;
