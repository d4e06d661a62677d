//! Instantaneous SINRs, ergodic rates, closed-form bounds and the two-user
//! analysis.
//!
//! All rates are in bits per symbol and already scaled by the data fraction
//! `tau = 1 - K/T`, except the SIC margins which compare raw spectral
//! efficiencies.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beamforming::{beam_gains, zf_mmimo, zf_noma, BeamformerSet};
use crate::channel::{draw_channels, estimate_channels, perfect_csi, ChannelState};
use crate::error::{Error, Result};
use crate::scenario::Scenario;
use crate::stats::{column_estimates, compensated_sum, mean_estimate};
use crate::Scheme;

/// How a [`RateReport`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MonteCarlo,
    BoundUpper,
    BoundLower,
    ClosedFormPerfectCsi,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::MonteCarlo => "monte_carlo",
            Method::BoundUpper => "bound_upper",
            Method::BoundLower => "bound_lower",
            Method::ClosedFormPerfectCsi => "closed_form_perfect_csi",
        }
    }
}

/// Channel knowledge the BS uses to build its beams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Csi {
    PerfectAtBs,
    Estimated,
}

impl Csi {
    pub fn as_str(self) -> &'static str {
        match self {
            Csi::PerfectAtBs => "perfect_at_bs",
            Csi::Estimated => "estimated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub scheme: Scheme,
    pub method: Method,
    pub antennas: usize,
    pub users: usize,
    pub per_user_rates: Vec<f64>,
    pub sum_rate: f64,
    pub trials_used: usize,
    /// Standard error of each per-user rate, Monte-Carlo reports only.
    pub standard_error: Option<Vec<f64>>,
    /// Power allocation the rates were evaluated at, when known.
    pub powers: Option<Vec<f64>>,
}

/// Header matching [`RateReport::csv_row`]. List-valued fields are
/// `;`-separated.
pub const RATE_CSV_HEADER: &str = "scheme,method,M,K,trials,powers,rates,sum_rate,stderr";

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

impl RateReport {
    fn new(scn: &Scenario, scheme: Scheme, method: Method, per_user_rates: Vec<f64>) -> Self {
        let sum_rate = compensated_sum(per_user_rates.iter().copied());
        RateReport {
            scheme,
            method,
            antennas: scn.antennas(),
            users: scn.users(),
            per_user_rates,
            sum_rate,
            trials_used: 0,
            standard_error: None,
            powers: None,
        }
    }

    pub fn with_powers(mut self, powers: &[f64]) -> Self {
        self.powers = Some(powers.to_vec());
        self
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.scheme,
            self.method.as_str(),
            self.antennas,
            self.users,
            self.trials_used,
            self.powers.as_deref().map(join).unwrap_or_default(),
            join(&self.per_user_rates),
            self.sum_rate,
            self.standard_error.as_deref().map(join).unwrap_or_default(),
        )
    }
}

pub(crate) fn check_powers(scn: &Scenario, powers: &[f64]) -> Result<()> {
    if powers.len() != scn.users() {
        return Err(Error::LengthMismatch { name: "powers", expected: scn.users(), got: powers.len() });
    }
    for &p in powers {
        if !(p.is_finite() && p >= 0.0) {
            return Err(Error::Negative { name: "power", value: p });
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Instantaneous SINRs
// ---------------------------------------------------------------------------

/// `K x K` matrix of `|h_k^T v_{beam(j)}|^2`: entry `(k, j)` is the power gain
/// at receiver `k` of the beam carrying user `j`'s symbol.
pub fn gain_matrix(state: &ChannelState, beams: &BeamformerSet) -> DMatrix<f64> {
    let per_beam = beam_gains(&state.h, &beams.v);
    let k = state.h.nrows();
    DMatrix::from_fn(k, k, |r, j| per_beam[(r, beams.beam_of(j))])
}

/// SINR at `receiver` for the symbol of user `desired`, with the symbols in
/// `cancelled` removed from the interference.
pub fn sinr_from_gains(
    gains: &DMatrix<f64>,
    betas: &[f64],
    powers: &[f64],
    receiver: usize,
    desired: usize,
    cancelled: &[usize],
) -> f64 {
    let beta = betas[receiver];
    let row = gains.row(receiver);
    let interference = compensated_sum(
        (0..powers.len())
            .filter(|&j| j != desired && !cancelled.contains(&j))
            .map(|j| powers[j] * row[j]),
    );
    powers[desired] * beta * row[desired] / (beta * interference + 1.0)
}

/// SINR of user `user` treating every other symbol as noise.
pub fn sinr_instant(scn: &Scenario, state: &ChannelState, beams: &BeamformerSet, powers: &[f64], user: usize) -> f64 {
    let gains = gain_matrix(state, beams);
    sinr_from_gains(&gains, scn.betas(), powers, user, user, &[])
}

/// Per-user SINRs after the scheme's receiver processing: NOMA cell-center
/// users cancel their group partner's symbol first, everyone else treats all
/// other symbols as noise.
pub fn effective_sinrs(scn: &Scenario, scheme: Scheme, gains: &DMatrix<f64>, powers: &[f64]) -> Vec<f64> {
    (0..scn.users())
        .map(|k| match scheme {
            Scheme::Noma if scn.is_center(k) => {
                sinr_from_gains(gains, scn.betas(), powers, k, k, &[scn.partner(k)])
            }
            _ => sinr_from_gains(gains, scn.betas(), powers, k, k, &[]),
        })
        .collect()
}

/// Channels and beams of one trial.
pub fn realization(scn: &Scenario, scheme: Scheme, csi: Csi, trial: u64) -> Result<(ChannelState, BeamformerSet)> {
    let state = draw_channels(scn, trial);
    let state = match csi {
        Csi::PerfectAtBs => perfect_csi(scn, state, scheme),
        Csi::Estimated => estimate_channels(scn, state, scheme),
    };
    let est = &state.estimate.as_ref().expect("estimate attached").h_hat;
    let beams = match scheme {
        Scheme::MassiveMimo => zf_mmimo(est)?,
        Scheme::Noma => zf_noma(est)?,
    };
    Ok((state, beams))
}

fn check_antennas(scn: &Scenario, scheme: Scheme) -> Result<()> {
    let needed = match scheme {
        Scheme::MassiveMimo => scn.users(),
        Scheme::Noma => scn.groups(),
    };
    if scn.antennas() < needed {
        return Err(Error::TooFewAntennas { m: scn.antennas(), needed });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Monte-Carlo ergodic rates
// ---------------------------------------------------------------------------

/// Per-user `log2(1 + SINR)` of one trial (not scaled by `tau`).
pub fn trial_spectral_efficiency(scn: &Scenario, scheme: Scheme, powers: &[f64], csi: Csi, trial: u64) -> Result<Vec<f64>> {
    let (state, beams) = realization(scn, scheme, csi, trial)?;
    let gains = gain_matrix(&state, &beams);
    Ok(effective_sinrs(scn, scheme, &gains, powers).into_iter().map(|s| (1.0 + s).log2()).collect())
}

/// Ergodic rates averaged over `scn.trials()` realizations.
///
/// Beams use the BS's channel knowledge; SINRs always use the true channels
/// (users know their effective channels). For NOMA the SIC condition is
/// assumed to hold; see [`sic_feasible`].
pub fn ergodic_rates_mc(scn: &Scenario, scheme: Scheme, powers: &[f64], csi: Csi) -> Result<RateReport> {
    let mut reports = ergodic_rates_mc_batch(scn, scheme, std::slice::from_ref(&powers.to_vec()), csi)?;
    Ok(reports.pop().expect("one report per power vector"))
}

/// [`ergodic_rates_mc`] for several power vectors over the same realizations.
/// Each report equals what the single-vector call would return.
pub fn ergodic_rates_mc_batch(scn: &Scenario, scheme: Scheme, power_sets: &[Vec<f64>], csi: Csi) -> Result<Vec<RateReport>> {
    if scn.trials() < 2 {
        return Err(Error::TooFewTrials(scn.trials()));
    }
    for powers in power_sets {
        check_powers(scn, powers)?;
    }
    check_antennas(scn, scheme)?;
    let k = scn.users();
    let samples = (0..scn.trials() as u64)
        .into_par_iter()
        .map(|t| {
            let (state, beams) = realization(scn, scheme, csi, t)?;
            let gains = gain_matrix(&state, &beams);
            let mut row = Vec::with_capacity(k * power_sets.len());
            for powers in power_sets {
                row.extend(effective_sinrs(scn, scheme, &gains, powers).into_iter().map(|s| (1.0 + s).log2()));
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let est = column_estimates(&samples, k * power_sets.len());
    let tau = scn.tau();
    Ok(power_sets
        .iter()
        .zip(est.chunks(k))
        .map(|(powers, est)| {
            let mut report = RateReport::new(scn, scheme, Method::MonteCarlo, est.iter().map(|e| tau * e.mean).collect());
            report.trials_used = scn.trials();
            report.standard_error = Some(est.iter().map(|e| tau * e.std_error).collect());
            report.with_powers(powers)
        })
        .collect())
}

/// SIC check of one NOMA group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SicCheck {
    pub group: usize,
    /// Ergodic spectral efficiency of the edge symbol decoded at the center user.
    pub rate_at_center: f64,
    /// Ergodic spectral efficiency of the edge symbol at the edge user.
    pub rate_at_edge: f64,
    /// `rate_at_center - rate_at_edge`.
    pub margin: f64,
    /// Standard error of the paired margin estimate.
    pub margin_std_error: f64,
    /// `margin >= -3 * margin_std_error`.
    pub feasible: bool,
}

/// Compare, per group, the ergodic rate of the edge user's symbol at the
/// cell-center user (which must decode it before SIC) against its rate at the
/// edge user. Both sides are estimated over the same realizations.
pub fn sic_feasible(scn: &Scenario, powers: &[f64], csi: Csi) -> Result<Vec<SicCheck>> {
    if scn.trials() < 2 {
        return Err(Error::TooFewTrials(scn.trials()));
    }
    check_powers(scn, powers)?;
    check_antennas(scn, Scheme::Noma)?;
    let groups = scn.groups();
    let samples = (0..scn.trials() as u64)
        .into_par_iter()
        .map(|t| {
            let (state, beams) = realization(scn, Scheme::Noma, csi, t)?;
            let gains = gain_matrix(&state, &beams);
            let mut row = Vec::with_capacity(2 * groups);
            for c in scn.center_users() {
                let e = scn.partner(c);
                let at_center = sinr_from_gains(&gains, scn.betas(), powers, c, e, &[]);
                let at_edge = sinr_from_gains(&gains, scn.betas(), powers, e, e, &[]);
                row.push((1.0 + at_center).log2());
                row.push((1.0 + at_edge).log2());
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let sides = column_estimates(&samples, 2 * groups);
    let mut margin_samples = Vec::with_capacity(samples.len());
    Ok((0..groups)
        .map(|g| {
            margin_samples.clear();
            margin_samples.extend(samples.iter().map(|r| r[2 * g] - r[2 * g + 1]));
            let m = mean_estimate(&margin_samples);
            let se = if m.std_error.is_finite() { m.std_error } else { 0.0 };
            SicCheck {
                group: g,
                rate_at_center: sides[2 * g].mean,
                rate_at_edge: sides[2 * g + 1].mean,
                margin: m.mean,
                margin_std_error: se,
                feasible: m.mean >= -3.0 * se,
            }
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Closed forms
// ---------------------------------------------------------------------------

/// Array gain `M + 1 - K/2` of a NOMA cell-center user.
pub fn noma_center_gain(antennas: usize, users: usize) -> f64 {
    antennas as f64 + 1.0 - (users / 2) as f64
}

/// Upper bound on a cell-center NOMA rate with interference-free groups.
pub fn noma_center_bound(tau: f64, antennas: usize, users: usize, power: f64, beta: f64) -> f64 {
    tau * (1.0 + power * beta * noma_center_gain(antennas, users)).log2()
}

/// Upper bound on a cell-edge NOMA rate; the partner's power is interference.
pub fn noma_edge_bound(tau: f64, power: f64, partner_power: f64, beta: f64) -> f64 {
    tau * (1.0 + power * beta / (partner_power * beta + 1.0)).log2()
}

/// ZF lower bound with estimation quality `gamma` and total transmit power
/// `total_power`. Requires `antennas >= users`.
pub fn mmimo_user_rate(tau: f64, antennas: usize, users: usize, power: f64, beta: f64, gamma: f64, total_power: f64) -> f64 {
    let dof = (antennas - users) as f64;
    tau * (1.0 + dof * power * beta * gamma / (beta * (1.0 - gamma) * total_power + 1.0)).log2()
}

/// NOMA per-user upper bounds under perfect CSI.
pub fn noma_bounds(scn: &Scenario, powers: &[f64]) -> Result<RateReport> {
    check_powers(scn, powers)?;
    let tau = scn.tau();
    let rates = (0..scn.users())
        .map(|k| {
            let beta = scn.betas()[k];
            if scn.is_center(k) {
                noma_center_bound(tau, scn.antennas(), scn.users(), powers[k], beta)
            } else {
                noma_edge_bound(tau, powers[k], powers[scn.partner(k)], beta)
            }
        })
        .collect();
    Ok(RateReport::new(scn, Scheme::Noma, Method::BoundUpper, rates).with_powers(powers))
}

/// ZF massive-MIMO lower bounds for the given estimation qualities.
pub fn mmimo_rate_cf(scn: &Scenario, powers: &[f64], gammas: &[f64]) -> Result<RateReport> {
    check_powers(scn, powers)?;
    if gammas.len() != scn.users() {
        return Err(Error::LengthMismatch { name: "gammas", expected: scn.users(), got: gammas.len() });
    }
    if scn.antennas() < scn.users() {
        return Err(Error::TooFewAntennas { m: scn.antennas(), needed: scn.users() });
    }
    let total = compensated_sum(powers.iter().copied());
    let tau = scn.tau();
    let rates = (0..scn.users())
        .map(|k| mmimo_user_rate(tau, scn.antennas(), scn.users(), powers[k], scn.betas()[k], gammas[k], total))
        .collect();
    Ok(RateReport::new(scn, Scheme::MassiveMimo, Method::BoundLower, rates).with_powers(powers))
}

/// Closed-form sum rate of a scheme under perfect CSI: ZF lower bounds for
/// massive MIMO, NOMA upper bounds for NOMA.
pub fn closed_form_rates(scn: &Scenario, scheme: Scheme, powers: &[f64]) -> Result<RateReport> {
    let mut r = match scheme {
        Scheme::MassiveMimo => mmimo_rate_cf(scn, powers, &vec![1.0; scn.users()])?,
        Scheme::Noma => noma_bounds(scn, powers)?,
    };
    r.method = Method::ClosedFormPerfectCsi;
    Ok(r)
}

// ---------------------------------------------------------------------------
// Two-user analysis
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoUserSumRates {
    pub noma: f64,
    pub mmimo: f64,
}

fn require_two_users(scn: &Scenario) -> Result<()> {
    if scn.users() != 2 {
        return Err(Error::NotTwoUser(scn.users()));
    }
    Ok(())
}

/// Both closed-form sum rates with `p1` on the cell-center user and the rest
/// of the budget on the cell-edge user.
pub fn two_user_sum_rates(scn: &Scenario, p1: f64) -> Result<TwoUserSumRates> {
    require_two_users(scn)?;
    if !(0.0..=scn.p_max()).contains(&p1) {
        return Err(Error::Negative { name: "p1 (must lie in [0, p_max])", value: p1 });
    }
    if scn.antennas() < 2 {
        return Err(Error::TooFewAntennas { m: scn.antennas(), needed: 2 });
    }
    let p2 = scn.p_max() - p1;
    let (tau, m) = (scn.tau(), scn.antennas());
    let (b1, b2) = (scn.betas()[0], scn.betas()[1]);
    let noma = noma_center_bound(tau, m, 2, p1, b1) + noma_edge_bound(tau, p2, p1, b2);
    let mmimo = mmimo_user_rate(tau, m, 2, p1, b1, 1.0, scn.p_max()) + mmimo_user_rate(tau, m, 2, p2, b2, 1.0, scn.p_max());
    Ok(TwoUserSumRates { noma, mmimo })
}

/// Budget below which the two-user ZF optimum puts all power on user 1.
pub fn two_user_threshold(antennas: f64, beta1: f64, beta2: f64) -> f64 {
    (beta1 - beta2) / (beta1 * beta2 * (antennas - 2.0))
}

/// Maximum two-user ZF sum spectral efficiency (no `tau`), for real-valued
/// `antennas > 2`.
pub fn mmimo_max_sum_se(antennas: f64, beta1: f64, beta2: f64, p_max: f64) -> f64 {
    let x = antennas - 2.0;
    let both = ((beta1 + beta2 + p_max * beta1 * beta2 * x).powi(2) / (4.0 * beta1 * beta2)).log2();
    let single = (1.0 + p_max * beta1 * x).log2();
    let threshold = two_user_threshold(antennas, beta1, beta2);
    if (p_max - threshold).abs() <= 1e-9 * threshold.max(1.0) {
        // both branches coincide at the threshold; the single-user value is
        // the one attained by a feasible split
        both.min(single)
    } else if p_max >= threshold {
        both
    } else {
        single
    }
}

/// Maximum two-user NOMA sum spectral efficiency (no `tau`): all power on the
/// cell-center user.
pub fn noma_max_sum_se(antennas: f64, beta1: f64, p_max: f64) -> f64 {
    (1.0 + p_max * beta1 * antennas).log2()
}

/// Maximum two-user ZF sum rate. Requires `M >= 3`.
pub fn max_sum_rate_mmimo_2user(scn: &Scenario) -> Result<f64> {
    require_two_users(scn)?;
    if scn.antennas() < 3 {
        return Err(Error::TooFewAntennas { m: scn.antennas(), needed: 3 });
    }
    Ok(scn.tau() * mmimo_max_sum_se(scn.antennas() as f64, scn.betas()[0], scn.betas()[1], scn.p_max()))
}

/// Maximum two-user NOMA sum rate.
pub fn max_sum_rate_noma_2user(scn: &Scenario) -> Result<f64> {
    require_two_users(scn)?;
    Ok(scn.tau() * noma_max_sum_se(scn.antennas() as f64, scn.betas()[0], scn.p_max()))
}

/// Closed-form antenna threshold beyond which ZF massive MIMO beats NOMA in
/// the two-user case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MStar {
    pub value: f64,
    pub ceil: usize,
}

pub fn m_star(beta1: f64, beta2: f64, p_max: f64) -> Result<MStar> {
    check_two_user_inputs(beta1, beta2, p_max)?;
    let value = 2.0 + (beta1 - beta2) / (p_max * beta1 * beta2) + 2.0 * 2f64.sqrt() / (p_max * beta2).sqrt();
    Ok(MStar { value, ceil: value.ceil() as usize })
}

fn check_two_user_inputs(beta1: f64, beta2: f64, p_max: f64) -> Result<()> {
    if !(p_max.is_finite() && p_max > 0.0) {
        return Err(Error::NonPositive { name: "p_max", value: p_max });
    }
    if !(beta2.is_finite() && beta2 > 0.0) {
        return Err(Error::NonPositive { name: "beta2", value: beta2 });
    }
    if !(beta1.is_finite() && beta1 > beta2) {
        return Err(Error::BetaOrdering { center: 0, edge: 1, center_beta: beta1, edge_beta: beta2 });
    }
    Ok(())
}

/// Where the two maximum sum rates cross, found numerically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    /// Smallest integer `M >= 3` with ZF sum rate `>=` NOMA sum rate.
    pub first_integer: usize,
    /// Real-valued `M` where the two sum rates are equal.
    pub continuous: f64,
}

/// Search for the crossing of the two-user maximum sum rates. The difference
/// (ZF minus NOMA) changes sign exactly once on `M > 2`.
pub fn two_user_crossing(beta1: f64, beta2: f64, p_max: f64) -> Result<Crossing> {
    check_two_user_inputs(beta1, beta2, p_max)?;
    let diff = |m: f64| mmimo_max_sum_se(m, beta1, beta2, p_max) - noma_max_sum_se(m, beta1, p_max);
    let mut hi = 4.0_f64;
    while diff(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e15 {
            return Err(Error::InvalidSweep("no crossing below M = 1e15".into()));
        }
    }
    // integer crossing
    let (mut lo_i, mut hi_i) = (2usize, hi as usize);
    while hi_i - lo_i > 1 {
        let mid = lo_i + (hi_i - lo_i) / 2;
        if mid >= 3 && diff(mid as f64) >= 0.0 {
            hi_i = mid;
        } else {
            lo_i = mid;
        }
    }
    let first_integer = hi_i.max(3);
    // continuous crossing
    let (mut lo, mut hi) = (2.0 + 1e-12, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if diff(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(Crossing { first_integer, continuous: 0.5 * (lo + hi) })
}
