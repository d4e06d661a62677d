//! Rayleigh fading realizations and MMSE channel estimation.
//!
//! Channel matrices are `K x M` with row `k` holding `h_k^T`. Small-scale
//! fading entries are i.i.d. `CN(0, 1)`.
//!
//! Estimation model: user `k` sends a length-`K` pilot at power `q_k`, so after
//! despreading the BS observes `y_k = sqrt(K beta_k q_k) h_k + n_k` with
//! `n_k ~ CN(0, I)`. The MMSE estimate of `h_k` is
//! `h_hat_k = sqrt(K beta_k q_k) / (K beta_k q_k + 1) * y_k`, whose entries have
//! variance `gamma_k = K beta_k q_k / (K beta_k q_k + 1)`. The error
//! `h_k - h_hat_k` has variance `1 - gamma_k` and is uncorrelated with the
//! estimate.

use std::f64::consts::FRAC_1_SQRT_2;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{substream, Purpose};
use crate::scenario::Scenario;
use crate::Scheme;

pub type CMatrix = DMatrix<Complex64>;

/// One `CN(0, 1)` sample.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

/// `rows x cols` matrix of i.i.d. `CN(0, 1)` entries, filled row by row.
pub fn complex_gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    let mut m = CMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            m[(r, c)] = complex_gaussian(rng);
        }
    }
    m
}

/// Normalized estimate variance `K beta q / (K beta q + 1)`.
pub fn estimation_quality(users: usize, beta: f64, pilot_power: f64) -> f64 {
    let snr = users as f64 * beta * pilot_power;
    if snr.is_infinite() {
        1.0
    } else {
        snr / (snr + 1.0)
    }
}

/// BS-side channel knowledge for one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub scheme: Scheme,
    /// `K x M` for massive MIMO, `K/2 x M` (cell-center rows) for NOMA.
    pub h_hat: CMatrix,
    /// Estimation quality of each estimated row.
    pub gammas: Vec<f64>,
}

/// One coherence-interval realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    pub trial: u64,
    /// Small-scale fading, `K x M`.
    pub h: CMatrix,
    /// `g_k = sqrt(beta_k) h_k`, `K x M`.
    pub g: CMatrix,
    pub estimate: Option<Estimate>,
}

/// Draw the true channels of trial `trial`.
pub fn draw_channels(scn: &Scenario, trial: u64) -> ChannelState {
    let mut rng = substream(scn.seed(), Purpose::Fading, trial);
    let h = complex_gaussian_matrix(scn.users(), scn.antennas(), &mut rng);
    let mut g = h.clone();
    for (k, &beta) in scn.betas().iter().enumerate() {
        let s = beta.sqrt();
        g.row_mut(k).iter_mut().for_each(|z| *z *= s);
    }
    ChannelState { trial, h, g, estimate: None }
}

fn estimated_rows(scn: &Scenario, scheme: Scheme) -> usize {
    match scheme {
        Scheme::MassiveMimo => scn.users(),
        Scheme::Noma => scn.groups(),
    }
}

/// MMSE estimates from uplink pilots. NOMA only trains the cell-center users.
///
/// Pilot noise is drawn row by row from the trial's own substream, so the
/// cell-center estimates coincide between the two schemes.
pub fn estimate_channels(scn: &Scenario, mut state: ChannelState, scheme: Scheme) -> ChannelState {
    let rows = estimated_rows(scn, scheme);
    let m = scn.antennas();
    let mut rng = substream(scn.seed(), Purpose::PilotNoise, state.trial);
    let mut h_hat = CMatrix::zeros(rows, m);
    let mut gammas = Vec::with_capacity(rows);
    for k in 0..rows {
        let snr = scn.users() as f64 * scn.betas()[k] * scn.pilot_powers()[k];
        let gamma = estimation_quality(scn.users(), scn.betas()[k], scn.pilot_powers()[k]);
        for c in 0..m {
            let noise = complex_gaussian(&mut rng);
            h_hat[(k, c)] = if snr.is_infinite() {
                state.h[(k, c)]
            } else {
                let a = snr.sqrt();
                (state.h[(k, c)] * a + noise) * (a / (snr + 1.0))
            };
        }
        gammas.push(gamma);
    }
    state.estimate = Some(Estimate { scheme, h_hat, gammas });
    state
}

/// Attach error-free estimates (`gamma = 1`).
pub fn perfect_csi(scn: &Scenario, mut state: ChannelState, scheme: Scheme) -> ChannelState {
    let rows = estimated_rows(scn, scheme);
    let h_hat = state.h.rows(0, rows).into_owned();
    state.estimate = Some(Estimate { scheme, h_hat, gammas: vec![1.0; rows] });
    state
}

/// Write the true channel `H` as a little-endian fixture:
/// `u64 K, u64 M, u64 trial`, then `K*M` row-major `(re: f64, im: f64)` pairs.
pub fn write_dump<W: Write>(state: &ChannelState, mut w: W) -> Result<()> {
    let (k, m) = state.h.shape();
    for v in [k as u64, m as u64, state.trial] {
        w.write_all(&v.to_le_bytes())?;
    }
    for r in 0..k {
        for c in 0..m {
            let z = state.h[(r, c)];
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Read a fixture written by [`write_dump`]. Returns `(trial, H)`.
pub fn read_dump<R: Read>(mut r: R) -> Result<(u64, CMatrix)> {
    let mut word = [0u8; 8];
    let mut next = |r: &mut R| -> Result<[u8; 8]> {
        r.read_exact(&mut word).map_err(|e| Error::Dump(e.to_string()))?;
        Ok(word)
    };
    let k = u64::from_le_bytes(next(&mut r)?) as usize;
    let m = u64::from_le_bytes(next(&mut r)?) as usize;
    let trial = u64::from_le_bytes(next(&mut r)?);
    if k.checked_mul(m).is_none_or(|n| n > 1 << 28) {
        return Err(Error::Dump(format!("implausible shape {k} x {m}")));
    }
    let mut h = CMatrix::zeros(k, m);
    for row in 0..k {
        for col in 0..m {
            let re = f64::from_le_bytes(next(&mut r)?);
            let im = f64::from_le_bytes(next(&mut r)?);
            h[(row, col)] = Complex64::new(re, im);
        }
    }
    Ok((trial, h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioParams;
    use crate::stats::mean_estimate;

    fn scn(m: usize, k: usize, beta: f64, q: f64, seed: u64) -> Scenario {
        ScenarioParams {
            antennas: m,
            users: k,
            coherence: 100,
            p_max: 1.0,
            pilot_powers: Some(vec![q; k]),
            betas: (0..k).map(|i| beta * (k - i) as f64 / k as f64).collect(),
            seed,
            trials: 10,
        }
        .build()
        .unwrap()
    }

    #[test]
    fn gamma_examples() {
        assert!((estimation_quality(2, 1.0, 1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!(estimation_quality(2, 1.0, 1e15) > 1.0 - 1e-14);
        assert_eq!(estimation_quality(2, 1.0, f64::INFINITY), 1.0);
        assert_eq!(estimation_quality(2, 1.0, 0.0), 0.0);
    }

    #[test]
    fn unit_variance_entries() {
        let s = scn(4, 2, 1.0, 1.0, 5);
        let mut entry = Vec::new();
        let mut norms = Vec::new();
        for t in 0..25_000 {
            let st = draw_channels(&s, t);
            entry.extend(st.h.iter().map(|z| z.norm_sqr()));
            norms.push(st.h.row(0).iter().map(|z| z.norm_sqr()).sum::<f64>());
        }
        let e = mean_estimate(&entry);
        assert!((e.mean - 1.0).abs() < 0.02, "{e:?}");
        let n = mean_estimate(&norms);
        assert!((n.mean - 4.0).abs() < 4.0 * n.std_error, "{n:?}");
    }

    #[test]
    fn g_rows_scale_h_rows() {
        let s = scn(3, 4, 2.0, 1.0, 1);
        let st = draw_channels(&s, 7);
        for k in 0..4 {
            for c in 0..3 {
                let want = st.h[(k, c)] * s.betas()[k].sqrt();
                assert_eq!(st.g[(k, c)], want);
            }
        }
    }

    #[test]
    fn distinct_trials_are_uncorrelated() {
        let s = scn(1, 2, 1.0, 1.0, 3);
        let pairs: Vec<(Complex64, Complex64)> = (0..100_000u64)
            .map(|t| (draw_channels(&s, 2 * t).h[(0, 0)], draw_channels(&s, 2 * t + 1).h[(0, 0)]))
            .collect();
        let n = pairs.len() as f64;
        let corr: Complex64 = pairs.iter().map(|(a, b)| a * b.conj()).sum::<Complex64>() / n;
        // sampling std of the correlation is about 1/sqrt(n)
        assert!(corr.norm() < 5.0 / n.sqrt(), "{corr}");
    }

    #[test]
    fn noiseless_limit_recovers_h() {
        let s = scn(6, 2, 1.0, 1e14, 2);
        let st = estimate_channels(&s, draw_channels(&s, 0), Scheme::MassiveMimo);
        let est = st.estimate.as_ref().unwrap();
        assert!((&est.h_hat - &st.h).norm() < 1e-6);
        assert!(est.gammas.iter().all(|&g| g > 1.0 - 1e-12));
    }

    #[test]
    fn estimate_variance_and_orthogonality() {
        let s = scn(2, 2, 1.0, 1.0, 11);
        let mut var = Vec::new();
        let mut err = Vec::new();
        let mut cross = Complex64::new(0.0, 0.0);
        let n = 100_000;
        for t in 0..n / 2 {
            let st = estimate_channels(&s, draw_channels(&s, t as u64), Scheme::MassiveMimo);
            let est = st.estimate.unwrap();
            for c in 0..2 {
                let hh = est.h_hat[(0, c)];
                let e = st.h[(0, c)] - hh;
                var.push(hh.norm_sqr());
                err.push(e.norm_sqr());
                cross += hh * e.conj();
            }
        }
        let gamma = estimation_quality(2, s.betas()[0], 1.0);
        assert!((gamma - 2.0 / 3.0).abs() < 1e-15);
        assert!((mean_estimate(&var).mean - gamma).abs() < 0.02);
        assert!((mean_estimate(&err).mean - (1.0 - gamma)).abs() < 0.02);
        assert!((cross / n as f64).norm() < 0.01);
    }

    #[test]
    fn noma_estimates_only_center_rows() {
        let s = scn(8, 6, 1.0, 0.5, 4);
        let st = draw_channels(&s, 1);
        let noma = estimate_channels(&s, st.clone(), Scheme::Noma);
        let mimo = estimate_channels(&s, st, Scheme::MassiveMimo);
        let a = noma.estimate.unwrap();
        let b = mimo.estimate.unwrap();
        assert_eq!(a.h_hat.shape(), (3, 8));
        assert_eq!(b.h_hat.shape(), (6, 8));
        assert_eq!(a.h_hat, b.h_hat.rows(0, 3).into_owned());
        assert_eq!(a.gammas.len(), 3);
    }

    #[test]
    fn reproducible_per_trial() {
        let s = scn(5, 4, 1.0, 1.0, 99);
        let forward: Vec<_> = (0..20).map(|t| estimate_channels(&s, draw_channels(&s, t), Scheme::MassiveMimo)).collect();
        let backward: Vec<_> = (0..20).rev().map(|t| estimate_channels(&s, draw_channels(&s, t), Scheme::MassiveMimo)).collect();
        for (a, b) in forward.iter().zip(backward.iter().rev()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn dump_round_trip() {
        let s = scn(3, 2, 1.0, 1.0, 8);
        let st = draw_channels(&s, 42);
        let mut buf = Vec::new();
        write_dump(&st, &mut buf).unwrap();
        assert_eq!(buf.len(), 24 + 2 * 3 * 16);
        assert_eq!(&buf[..8], &2u64.to_le_bytes());
        assert_eq!(&buf[24..32], &st.h[(0, 0)].re.to_le_bytes());
        let (trial, h) = read_dump(buf.as_slice()).unwrap();
        assert_eq!(trial, 42);
        assert_eq!(h, st.h);
        assert!(read_dump(&buf[..30]).is_err());
    }
}
