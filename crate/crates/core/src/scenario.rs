//! Experiment scenarios and random user placement.
//!
//! Users `0..K/2` are cell-center users and `K/2..K` are cell-edge users
//! (zero-based). User `i` and user `i + K/2` form NOMA group `i`. Every
//! cell-center user must have a strictly larger large-scale fading coefficient
//! than every cell-edge user.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default Monte-Carlo trial count per operating point.
pub const DEFAULT_TRIALS: usize = 10_000;

/// Raw, unvalidated scenario parameters. This is also the on-disk form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    /// Base-station antenna count `M`.
    pub antennas: usize,
    /// User count `K` (even).
    pub users: usize,
    /// Coherence interval length `T` in symbols.
    pub coherence: usize,
    /// Total normalized downlink power budget (linear).
    pub p_max: f64,
    /// Uplink pilot power per user (linear). Defaults to `p_max / K`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pilot_powers: Option<Vec<f64>>,
    /// Large-scale fading coefficients (linear), centers first.
    pub betas: Vec<f64>,
    /// Master RNG seed. Config files store it as a TOML integer, so it must
    /// fit in 63 bits there.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

impl ScenarioParams {
    /// Validate every constraint, including the center/edge fading ordering.
    pub fn build(self) -> Result<Scenario> {
        let scn = self.build_unordered()?;
        scn.check_ordering()?;
        Ok(scn)
    }

    /// Validate everything except the center/edge ordering of the betas.
    ///
    /// Only meant for negative tests that deliberately invert the ordering
    /// (for example to show that SIC becomes infeasible).
    pub fn build_unordered(self) -> Result<Scenario> {
        let k = self.users;
        if k < 2 || k % 2 != 0 {
            return Err(Error::OddUserCount(k));
        }
        if self.coherence <= k {
            return Err(Error::CoherenceTooShort { t: self.coherence, k });
        }
        if self.antennas == 0 {
            return Err(Error::NoAntennas);
        }
        if self.trials == 0 {
            return Err(Error::NoTrials);
        }
        positive("p_max", self.p_max)?;
        if self.betas.len() != k {
            return Err(Error::LengthMismatch { name: "betas", expected: k, got: self.betas.len() });
        }
        for &b in &self.betas {
            positive("beta", b)?;
        }
        let pilot_powers = match self.pilot_powers {
            Some(q) => {
                if q.len() != k {
                    return Err(Error::LengthMismatch { name: "pilot_powers", expected: k, got: q.len() });
                }
                for &v in &q {
                    if !(v.is_finite() && v >= 0.0) {
                        return Err(Error::Negative { name: "pilot power", value: v });
                    }
                }
                q
            }
            None => vec![self.p_max / k as f64; k],
        };
        Ok(Scenario {
            antennas: self.antennas,
            users: k,
            coherence: self.coherence,
            p_max: self.p_max,
            pilot_powers,
            betas: self.betas,
            seed: self.seed,
            trials: self.trials,
            tau: 1.0 - k as f64 / self.coherence as f64,
        })
    }
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositive { name, value })
    }
}

/// A validated experiment scenario. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioParams", into = "ScenarioParams")]
pub struct Scenario {
    antennas: usize,
    users: usize,
    coherence: usize,
    p_max: f64,
    pilot_powers: Vec<f64>,
    betas: Vec<f64>,
    seed: u64,
    trials: usize,
    tau: f64,
}

impl TryFrom<ScenarioParams> for Scenario {
    type Error = Error;

    fn try_from(p: ScenarioParams) -> Result<Self> {
        p.build()
    }
}

impl From<Scenario> for ScenarioParams {
    fn from(s: Scenario) -> Self {
        ScenarioParams {
            antennas: s.antennas,
            users: s.users,
            coherence: s.coherence,
            p_max: s.p_max,
            pilot_powers: Some(s.pilot_powers),
            betas: s.betas,
            seed: s.seed,
            trials: s.trials,
        }
    }
}

impl Scenario {
    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn users(&self) -> usize {
        self.users
    }

    /// Number of NOMA groups, `K/2`.
    pub fn groups(&self) -> usize {
        self.users / 2
    }

    pub fn coherence(&self) -> usize {
        self.coherence
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn pilot_powers(&self) -> &[f64] {
        &self.pilot_powers
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trials(&self) -> usize {
        self.trials
    }

    /// Fraction of the coherence interval left for data, `1 - K/T`.
    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn is_center(&self, user: usize) -> bool {
        user < self.groups()
    }

    pub fn center_users(&self) -> std::ops::Range<usize> {
        0..self.groups()
    }

    pub fn edge_users(&self) -> std::ops::Range<usize> {
        self.groups()..self.users
    }

    /// Group (and NOMA beam) index serving `user`.
    pub fn group_of(&self, user: usize) -> usize {
        user % self.groups()
    }

    /// The other member of `user`'s NOMA group.
    pub fn partner(&self, user: usize) -> usize {
        let half = self.groups();
        if user < half {
            user + half
        } else {
            user - half
        }
    }

    pub fn params(&self) -> ScenarioParams {
        self.clone().into()
    }

    /// Same scenario with a different antenna count.
    pub fn with_antennas(&self, antennas: usize) -> Result<Scenario> {
        ScenarioParams { antennas, ..self.params() }.build()
    }

    pub fn with_seed(&self, seed: u64) -> Scenario {
        Scenario { seed, ..self.clone() }
    }

    pub fn with_trials(&self, trials: usize) -> Result<Scenario> {
        if trials == 0 {
            return Err(Error::NoTrials);
        }
        Ok(Scenario { trials, ..self.clone() })
    }

    /// Same scenario with new betas (and `K` taken from their length). Pilot
    /// powers fall back to the default when `K` changes.
    pub fn with_betas(&self, betas: Vec<f64>) -> Result<Scenario> {
        let mut p = self.params();
        if betas.len() != p.users {
            p.users = betas.len();
            p.pilot_powers = None;
        }
        p.betas = betas;
        p.build()
    }

    fn check_ordering(&self) -> Result<()> {
        let (center, edge) = self.betas.split_at(self.groups());
        let (ci, cmin) = argmin(center);
        let (ei, emax) = argmax(edge);
        if cmin > emax {
            Ok(())
        } else {
            Err(Error::BetaOrdering {
                center: ci,
                edge: self.groups() + ei,
                center_beta: cmin,
                edge_beta: emax,
            })
        }
    }
}

fn argmin(v: &[f64]) -> (usize, f64) {
    v.iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, x)| if x < acc.1 { (i, x) } else { acc })
}

fn argmax(v: &[f64]) -> (usize, f64) {
    v.iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, x)| if x > acc.1 { (i, x) } else { acc })
}

/// Linear power ratio from decibels.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Beta giving a full-budget single-user SNR of `snr_db`, i.e. `p_max * beta`.
pub fn beta_from_snr_db(snr_db: f64, p_max: f64) -> f64 {
    db_to_linear(snr_db) / p_max
}

/// How SNRs are spread over a placement range.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SnrDistribution {
    /// Uniform in dB over the range.
    #[default]
    UniformDb,
    /// Users uniform in area over the annulus whose path loss
    /// `10 * exponent * log10(d)` spans the range, so low SNRs are more likely.
    UniformArea { path_loss_exponent: f64 },
}

/// Full-power SNR ranges (dB) for random user placement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementSpec {
    pub center_snr_db: (f64, f64),
    pub edge_snr_db: (f64, f64),
    #[serde(default)]
    pub distribution: SnrDistribution,
}

impl PlacementSpec {
    /// Center users at 15-26 dB, edge users at -5-15 dB, uniform in dB.
    pub fn cell_default() -> Self {
        PlacementSpec { center_snr_db: (15.0, 26.0), edge_snr_db: (-5.0, 15.0), distribution: SnrDistribution::UniformDb }
    }

    fn validate(&self) -> Result<()> {
        for &(lo, hi) in &[self.center_snr_db, self.edge_snr_db] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::EmptyRange { lo, hi });
            }
        }
        if let SnrDistribution::UniformArea { path_loss_exponent } = self.distribution {
            positive("path_loss_exponent", path_loss_exponent)?;
        }
        Ok(())
    }
}

/// Resampling budget for [`sample_placement`].
pub const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

fn draw_snr<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64), dist: SnrDistribution) -> f64 {
    if lo == hi {
        return lo;
    }
    let u = rng.random::<f64>();
    match dist {
        SnrDistribution::UniformDb => lo + (hi - lo) * u,
        SnrDistribution::UniformArea { path_loss_exponent: a } => {
            // distance in [1, d1] with density proportional to d
            let d1_sq = 10f64.powf((hi - lo) / (5.0 * a));
            let d_sq = 1.0 + (d1_sq - 1.0) * u;
            (hi - 5.0 * a * d_sq.log10()).clamp(lo, hi)
        }
    }
}

/// Draw `K` betas: centers over the center range, edges over the edge range,
/// spread per `spec.distribution`. Joint draws violating the ordering are rejected and redrawn.
pub fn sample_placement<R: Rng + ?Sized>(
    spec: &PlacementSpec,
    users: usize,
    p_max: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if users < 2 || users % 2 != 0 {
        return Err(Error::OddUserCount(users));
    }
    positive("p_max", p_max)?;
    spec.validate()?;
    let half = users / 2;
    let mut snr = vec![0.0; users];
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        for (i, s) in snr.iter_mut().enumerate() {
            let range = if i < half { spec.center_snr_db } else { spec.edge_snr_db };
            *s = draw_snr(rng, range, spec.distribution);
        }
        let cmin = snr[..half].iter().copied().fold(f64::INFINITY, f64::min);
        let emax = snr[half..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if cmin > emax {
            return Ok(snr.iter().map(|&s| beta_from_snr_db(s, p_max)).collect());
        }
    }
    Err(Error::PlacementExhausted(MAX_PLACEMENT_ATTEMPTS))
}
