//! TOML experiment configuration.
//!
//! ```toml
//! schema_version = 1
//!
//! [scenario]
//! antennas = 25
//! users = 2
//! coherence = 100
//! p_max = 1.0              # or p_max_db
//! snr_db = [15.0, -5.0]    # or betas = [...] / betas_db = [...]
//! # pilot_powers = [0.5, 0.5]   (or pilot_powers_db); default p_max / K
//! seed = 1
//! trials = 10000
//!
//! [experiment]
//! sweep = { start = 3, stop = 60, step = 1 }
//! points = 201
//! placements = 200
//! csi = "perfect_at_bs"    # or "estimated"
//!
//! [placement]
//! center_snr_db = [15.0, 26.0]
//! edge_snr_db = [-5.0, 15.0]
//! # path_loss_exponent = 3.76   (users uniform in area instead of uniform in dB)
//! ```
//!
//! Powers are linear; every `*_db` key is converted at load time and may not
//! be combined with its linear counterpart. `snr_db` is the full-budget SNR
//! `p_max * beta_k` in dB. For the averaged experiments the betas are redrawn
//! per placement and may be omitted.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{placeholder_betas, ExperimentKind, ExperimentSpec, Sweep, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::rates::Csi;
use crate::scenario::{beta_from_snr_db, db_to_linear, PlacementSpec, ScenarioParams, SnrDistribution, DEFAULT_TRIALS};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub antennas: Option<usize>,
    pub users: Option<usize>,
    pub coherence: Option<usize>,
    pub p_max: Option<f64>,
    pub p_max_db: Option<f64>,
    pub betas: Option<Vec<f64>>,
    pub betas_db: Option<Vec<f64>>,
    pub snr_db: Option<Vec<f64>>,
    pub pilot_powers: Option<Vec<f64>>,
    pub pilot_powers_db: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub sweep: Option<Sweep>,
    pub points: Option<usize>,
    pub placements: Option<usize>,
    pub csi: Option<Csi>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementSection {
    pub center_snr_db: Option<[f64; 2]>,
    pub edge_snr_db: Option<[f64; 2]>,
    /// Present: users uniform in area with this path-loss exponent.
    /// Absent: SNRs uniform in dB.
    pub path_loss_exponent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema_version: u32,
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    pub placement: Option<PlacementSection>,
}

fn exclusive<T>(linear: Option<T>, db: Option<T>, name: &str) -> Result<Option<(T, bool)>> {
    match (linear, db) {
        (Some(_), Some(_)) => Err(Error::Config(format!("give either {name} or {name}_db, not both"))),
        (Some(v), None) => Ok(Some((v, false))),
        (None, Some(v)) => Ok(Some((v, true))),
        (None, None) => Ok(None),
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaVersion(cfg.schema_version));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Build the experiment spec for `kind`, starting from that kind's
    /// defaults and applying every key present in the file.
    pub fn experiment(&self, kind: ExperimentKind) -> Result<ExperimentSpec> {
        let mut spec = ExperimentSpec::default_for(kind);
        if let Some(p) = &self.placement {
            let d = PlacementSpec::cell_default();
            spec.placement = PlacementSpec {
                center_snr_db: p.center_snr_db.map_or(d.center_snr_db, |r| (r[0], r[1])),
                edge_snr_db: p.edge_snr_db.map_or(d.edge_snr_db, |r| (r[0], r[1])),
                distribution: p
                    .path_loss_exponent
                    .map_or(SnrDistribution::UniformDb, |a| SnrDistribution::UniformArea { path_loss_exponent: a }),
            };
        }
        let s = &self.scenario;
        let base = spec.scenario.params();
        let p_max = match exclusive(s.p_max, s.p_max_db, "p_max")? {
            Some((v, true)) => db_to_linear(v),
            Some((v, false)) => v,
            None => base.p_max,
        };
        let users = s.users.unwrap_or(base.users);
        let given = [s.betas.is_some(), s.betas_db.is_some(), s.snr_db.is_some()].iter().filter(|b| **b).count();
        if given > 1 {
            return Err(Error::Config("give only one of betas, betas_db, snr_db".into()));
        }
        let betas = if let Some(b) = &s.betas {
            b.clone()
        } else if let Some(b) = &s.betas_db {
            b.iter().map(|&d| db_to_linear(d)).collect()
        } else if let Some(snr) = &s.snr_db {
            snr.iter().map(|&d| beta_from_snr_db(d, p_max)).collect()
        } else if matches!(kind, ExperimentKind::SumRateVsK | ExperimentKind::SumRateVsM) {
            placeholder_betas(&spec.placement, users, p_max)
        } else if s.users.is_none() && s.p_max.is_none() && s.p_max_db.is_none() {
            base.betas.clone()
        } else {
            return Err(Error::Config("betas (or betas_db / snr_db) are required for this experiment".into()));
        };
        let pilot_powers = match exclusive(s.pilot_powers.clone(), s.pilot_powers_db.clone(), "pilot_powers")? {
            Some((v, true)) => Some(v.into_iter().map(db_to_linear).collect()),
            Some((v, false)) => Some(v),
            None => None,
        };
        spec.scenario = ScenarioParams {
            antennas: s.antennas.unwrap_or(base.antennas),
            users,
            coherence: s.coherence.unwrap_or(base.coherence),
            p_max,
            pilot_powers,
            betas,
            seed: s.seed.unwrap_or(base.seed),
            trials: s.trials.unwrap_or(DEFAULT_TRIALS),
        }
        .build()?;
        let e = &self.experiment;
        if let Some(sw) = e.sweep {
            spec.sweep = sw;
        }
        if let Some(p) = e.points {
            spec.points = p;
        }
        if let Some(p) = e.placements {
            spec.placements = p;
        }
        if let Some(c) = e.csi {
            spec.csi = c;
        }
        if let Some(d) = &e.out_dir {
            spec.out_dir = d.clone();
        }
        spec.validate()?;
        Ok(spec)
    }
}
