//! Power-domain NOMA versus zero-forcing massive MIMO in a single-cell
//! downlink with i.i.d. Rayleigh fading.
//!
//! The crate covers scenario definition, channel realizations with MMSE
//! estimation, zero-forcing beamforming for both schemes, Monte-Carlo and
//! closed-form rates, sum-rate power allocation, and the
//! experiment drivers used by the `nomamimo` CLI.

use serde::{Deserialize, Serialize};

pub mod beamforming;
pub mod channel;
pub mod error;
pub mod experiments;
pub mod power;
pub mod rates;
pub mod rng;
pub mod scenario;
pub mod stats;

pub use error::{Error, Result};
pub use scenario::{PlacementSpec, Scenario, ScenarioParams, SnrDistribution};

/// Downlink transmission scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Two-user groups (one center, one edge) sharing a ZF beam, with SIC at
    /// the cell-center user.
    Noma,
    /// One ZF beam per user.
    #[serde(rename = "mmimo")]
    MassiveMimo,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Noma => "noma",
            Scheme::MassiveMimo => "mmimo",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}
