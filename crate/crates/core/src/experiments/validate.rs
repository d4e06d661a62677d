//! Quick invariant suite behind the `validate` subcommand.
//!
//! Sizes are kept small so the whole suite finishes in seconds; the
//! full-size versions live in the acceptance tests.

use crate::power::{grid_oracle, noma_sumrate_alloc, solve_p1, two_user_mmimo_alloc, waterfill};
use crate::rates::{self, ergodic_rates_mc, gain_matrix, realization, sic_feasible, Csi};
use crate::rng::{substream, Purpose};
use crate::scenario::{beta_from_snr_db, sample_placement, PlacementSpec, Scenario, ScenarioParams};
use crate::stats::mean_estimate;
use crate::Scheme;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, result: crate::Result<(bool, String)>) -> CheckOutcome {
    match result {
        Ok((passed, detail)) => CheckOutcome { name, passed, detail },
        Err(e) => CheckOutcome { name, passed: false, detail: format!("error: {e}") },
    }
}

fn scenario(m: usize, betas: Vec<f64>, seed: u64, trials: usize) -> crate::Result<Scenario> {
    ScenarioParams {
        antennas: m,
        users: betas.len(),
        coherence: 100,
        p_max: 1.0,
        pilot_powers: None,
        betas,
        seed,
        trials,
    }
    .build()
}

fn two_user_ref(m: usize, trials: usize) -> crate::Result<Scenario> {
    scenario(m, vec![beta_from_snr_db(15.0, 1.0), beta_from_snr_db(-5.0, 1.0)], 1, trials)
}

fn array_gains(seed: u64) -> crate::Result<(bool, String)> {
    let (m, k) = (8usize, 4usize);
    let scn = scenario(m, vec![4.0, 3.0, 2.0, 1.0], seed, 20_000)?;
    let mut mimo = Vec::new();
    let mut center = Vec::new();
    let mut edge = Vec::new();
    for t in 0..scn.trials() as u64 {
        let (s, b) = realization(&scn, Scheme::MassiveMimo, Csi::PerfectAtBs, t)?;
        mimo.push(gain_matrix(&s, &b)[(0, 0)]);
        let (s, b) = realization(&scn, Scheme::Noma, Csi::PerfectAtBs, t)?;
        let g = gain_matrix(&s, &b);
        center.push(g[(0, 0)]);
        edge.push(g[(2, 2)]);
    }
    let rel = |v: &[f64], want: f64| (mean_estimate(v).mean / want - 1.0).abs();
    let errs = [rel(&mimo, (m - k + 1) as f64), rel(&center, (m + 1 - k / 2) as f64), rel(&edge, 1.0)];
    Ok((errs.iter().all(|&e| e < 0.03), format!("relative errors {errs:.4?} (limit 0.03)")))
}

fn bound_ordering(seed: u64) -> crate::Result<(bool, String)> {
    let mut worst = f64::NEG_INFINITY;
    for i in 0..3u64 {
        let betas = sample_placement(&PlacementSpec::cell_default(), 4, 1.0, &mut substream(seed, Purpose::Placement, i))?;
        let scn = scenario(6 + 4 * i as usize, betas, seed + i, 2000)?;
        let p = [0.4, 0.3, 0.2, 0.1];
        let mc = ergodic_rates_mc(&scn, Scheme::Noma, &p, Csi::PerfectAtBs)?;
        let ub = rates::noma_bounds(&scn, &p)?;
        let mm = ergodic_rates_mc(&scn, Scheme::MassiveMimo, &p, Csi::PerfectAtBs)?;
        let lb = rates::mmimo_rate_cf(&scn, &p, &[1.0; 4])?;
        let se_n = mc.standard_error.unwrap();
        let se_m = mm.standard_error.unwrap();
        for k in 0..4 {
            worst = worst.max((mc.per_user_rates[k] - ub.per_user_rates[k]) / se_n[k].max(1e-300));
            worst = worst.max((lb.per_user_rates[k] - mm.per_user_rates[k]) / se_m[k].max(1e-300));
        }
    }
    Ok((worst <= 3.0, format!("largest violation {worst:.2} standard errors (limit 3)")))
}

fn m_star_crossing() -> crate::Result<(bool, String)> {
    let (b1, b2) = (beta_from_snr_db(15.0, 1.0), beta_from_snr_db(-5.0, 1.0));
    let ms = rates::m_star(b1, b2, 1.0)?;
    let c = rates::two_user_crossing(b1, b2, 1.0)?;
    let ok = (ms.value - 10.16).abs() <= 0.01 && (10..=11).contains(&c.first_integer) && (ms.value - c.continuous).abs() <= 1.0;
    Ok((ok, format!("M* = {:.4}, integer crossing {}, continuous {:.4}", ms.value, c.first_integer, c.continuous)))
}

fn waterfill_kkt() -> crate::Result<(bool, String)> {
    let gains = [10.0, 5.0, 2.0, 1.0, 0.05];
    let p = waterfill(&gains, 1.0);
    let total: f64 = p.iter().sum();
    let active: Vec<f64> = p.iter().zip(&gains).filter(|(x, _)| **x > 0.0).map(|(x, g)| 1.0 / (1.0 / g + x)).collect();
    let spread = active.iter().fold(0.0f64, |a, &v| a.max((v - active[0]).abs()));
    let inactive_ok = p.iter().zip(&gains).filter(|(x, _)| **x == 0.0).all(|(_, g)| *g <= active[0] * (1.0 + 1e-9));
    Ok(((total - 1.0).abs() < 1e-12 && spread < 1e-9 && inactive_ok, format!("powers {p:.4?}")))
}

fn allocations_by_oracle(seed: u64) -> crate::Result<(bool, String)> {
    let mut ok = true;
    for i in 0..5u64 {
        let betas = sample_placement(&PlacementSpec::cell_default(), 4, 1.0, &mut substream(seed ^ 0x55, Purpose::Placement, i))?;
        let scn = scenario(10, betas, seed, 2)?;
        let (g, _) = grid_oracle(&scn, Scheme::Noma, 200)?;
        ok &= g.powers[2] == 0.0 && g.powers[3] == 0.0;
        let (g, _) = grid_oracle(&scn, Scheme::MassiveMimo, 200)?;
        let (w, _) = solve_p1(&scn, Scheme::MassiveMimo)?;
        ok &= g.powers.iter().zip(&w.powers).all(|(a, b)| (a - b).abs() <= 1e-2);
        let _ = noma_sumrate_alloc(&scn)?;
    }
    let two = two_user_ref(25, 2)?;
    let (g, _) = grid_oracle(&two, Scheme::MassiveMimo, 1000)?;
    let l2 = two_user_mmimo_alloc(&two)?;
    ok &= (g.powers[0] - l2.powers[0]).abs() <= 2e-3;
    Ok((ok, format!("two-user p1: grid {:.4}, closed form {:.4}", g.powers[0], l2.powers[0])))
}

fn sic(seed: u64) -> crate::Result<(bool, String)> {
    let scn = two_user_ref(25, 2000)?.with_seed(seed);
    let fwd = sic_feasible(&scn, &[0.5, 0.5], Csi::PerfectAtBs)?;
    let inverted = ScenarioParams {
        antennas: 2,
        betas: vec![beta_from_snr_db(-5.0, 1.0), beta_from_snr_db(15.0, 1.0)],
        ..scn.params()
    }
    .build_unordered()?;
    let inv = sic_feasible(&inverted, &[0.5, 0.5], Csi::PerfectAtBs)?;
    Ok((
        fwd[0].feasible && !inv[0].feasible,
        format!("ordered margin {:.3}, inverted margin {:.3}", fwd[0].margin, inv[0].margin),
    ))
}

/// Run every check. `seed` varies the Monte-Carlo draws.
pub fn run_all(seed: u64) -> Vec<CheckOutcome> {
    vec![
        outcome("array gains match M-K+1, M+1-K/2 and 1", array_gains(seed)),
        outcome("Monte-Carlo rates respect the closed-form bounds", bound_ordering(seed)),
        outcome("closed-form M* matches the numerical crossing", m_star_crossing()),
        outcome("water-filling satisfies KKT", waterfill_kkt()),
        outcome("grid oracle confirms the allocation rules", allocations_by_oracle(seed)),
        outcome("SIC feasible when ordered, infeasible when inverted", sic(seed)),
    ]
}

#[cfg(test)]
mod tests {
    #[test]
    fn suite_passes() {
        for c in super::run_all(7) {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
