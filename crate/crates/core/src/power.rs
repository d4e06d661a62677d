//! Sum-rate power allocation under a total power budget.
//!
//! Massive MIMO: classical water-filling over the ZF gains `(M - K) beta_k`.
//! NOMA (closed-form upper-bound objective): the optimum never powers a
//! cell-edge user, so the cell-center users are water-filled over
//! `(M + 1 - K/2) beta_k` and the edge users get nothing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rates::{self, closed_form_rates, RateReport};
use crate::scenario::Scenario;
use crate::stats::compensated_sum;
use crate::Scheme;

/// Slack allowed on the budget constraint.
pub const BUDGET_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub powers: Vec<f64>,
    pub budget: f64,
}

impl PowerAllocation {
    pub fn total(&self) -> f64 {
        compensated_sum(self.powers.iter().copied())
    }

    /// Nonnegative entries and total within the budget (plus slack).
    pub fn is_feasible(&self) -> bool {
        self.powers.iter().all(|&p| p >= 0.0 && p.is_finite()) && self.total() <= self.budget + BUDGET_SLACK
    }
}

/// Maximize `sum log(1 + g_k p_k)` subject to `sum p_k <= budget`.
///
/// Exact active-set solution: users are sorted by gain and the water level
/// `mu = (budget + sum_{active} 1/g) / |active|` is computed for shrinking
/// active sets until the weakest active user sits below it. Users with equal
/// gains are always in or out together and receive equal power. Users with
/// zero gain receive nothing.
pub fn waterfill(gains: &[f64], budget: f64) -> Vec<f64> {
    let mut order: Vec<usize> = (0..gains.len()).filter(|&i| gains[i] > 0.0).collect();
    let mut powers = vec![0.0; gains.len()];
    if order.is_empty() || budget <= 0.0 {
        return powers;
    }
    order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]).then(a.cmp(&b)));
    let inv: Vec<f64> = order.iter().map(|&i| 1.0 / gains[i]).collect();
    let mut active = order.len();
    let level = loop {
        let level = (budget + compensated_sum(inv[..active].iter().copied())) / active as f64;
        if level > inv[active - 1] || active == 1 {
            break level;
        }
        active -= 1;
    };
    for (j, &i) in order[..active].iter().enumerate() {
        powers[i] = (level - inv[j]).max(0.0);
    }
    powers
}

/// ZF effective gains `(M - K) beta_k` under perfect CSI.
pub fn mmimo_gains(scn: &Scenario) -> Result<Vec<f64>> {
    if scn.antennas() < scn.users() {
        return Err(Error::TooFewAntennas { m: scn.antennas(), needed: scn.users() });
    }
    let dof = (scn.antennas() - scn.users()) as f64;
    Ok(scn.betas().iter().map(|&b| dof * b).collect())
}

/// Water-filling over caller-supplied per-user gains.
pub fn waterfill_mmimo(scn: &Scenario, gains: &[f64]) -> Result<PowerAllocation> {
    if gains.len() != scn.users() {
        return Err(Error::LengthMismatch { name: "gains", expected: scn.users(), got: gains.len() });
    }
    if let Some(&g) = gains.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
        return Err(Error::Negative { name: "gain", value: g });
    }
    Ok(PowerAllocation { powers: waterfill(gains, scn.p_max()), budget: scn.p_max() })
}

/// Sum-rate optimal NOMA allocation for the upper-bound objective.
pub fn noma_sumrate_alloc(scn: &Scenario) -> Result<PowerAllocation> {
    if scn.antennas() < scn.groups() {
        return Err(Error::TooFewAntennas { m: scn.antennas(), needed: scn.groups() });
    }
    let array_gain = rates::noma_center_gain(scn.antennas(), scn.users());
    let center: Vec<f64> = scn.betas()[..scn.groups()].iter().map(|&b| array_gain * b).collect();
    let mut powers = waterfill(&center, scn.p_max());
    powers.resize(scn.users(), 0.0);
    Ok(PowerAllocation { powers, budget: scn.p_max() })
}

/// Closed-form two-user ZF optimum.
pub fn two_user_mmimo_alloc(scn: &Scenario) -> Result<PowerAllocation> {
    if scn.users() != 2 {
        return Err(Error::NotTwoUser(scn.users()));
    }
    if scn.antennas() < 3 {
        return Err(Error::TooFewAntennas { m: scn.antennas(), needed: 3 });
    }
    let (b1, b2, p) = (scn.betas()[0], scn.betas()[1], scn.p_max());
    let x = scn.antennas() as f64 - 2.0;
    let interior = (b1 - b2 + p * b1 * b2 * x) / (2.0 * b1 * b2 * x);
    let p1 = p.min(interior);
    Ok(PowerAllocation { powers: vec![p1, p - p1], budget: p })
}

/// Solve the sum-rate problem for one scheme and report the closed-form rates
/// at the optimum.
pub fn solve_p1(scn: &Scenario, scheme: Scheme) -> Result<(PowerAllocation, RateReport)> {
    let alloc = match scheme {
        Scheme::MassiveMimo => waterfill_mmimo(scn, &mmimo_gains(scn)?)?,
        Scheme::Noma => noma_sumrate_alloc(scn)?,
    };
    let report = closed_form_rates(scn, scheme, &alloc.powers)?;
    Ok((alloc, report))
}

/// Smallest accepted grid resolution for [`grid_oracle`].
pub const MIN_ORACLE_RESOLUTION: usize = 50;

/// Exhaustive maximization of the scheme's closed-form sum rate over the grid
/// `{p : p_k = n_k * p_max / resolution, sum n_k <= resolution}`.
///
/// The objective separates over independent blocks (single users for massive
/// MIMO, center/edge pairs for NOMA), so the grid maximum is computed exactly
/// by tabulating each block's best value per budget and combining blocks with
/// a max-plus convolution. Ties keep the first maximizer found.
pub fn grid_oracle(scn: &Scenario, scheme: Scheme, resolution: usize) -> Result<(PowerAllocation, f64)> {
    if scn.users() > 4 {
        return Err(Error::OracleTooLarge(scn.users()));
    }
    if resolution < MIN_ORACLE_RESOLUTION {
        return Err(Error::OracleTooCoarse(resolution));
    }
    if scheme == Scheme::MassiveMimo && scn.antennas() < scn.users() {
        return Err(Error::TooFewAntennas { m: scn.antennas(), needed: scn.users() });
    }
    let n = resolution;
    let step = scn.p_max() / n as f64;
    let (tau, m, k) = (scn.tau(), scn.antennas(), scn.users());
    let betas = scn.betas();

    // block tables: value[b] and the split that attains it (power units per member)
    let mut blocks: Vec<(Vec<usize>, Vec<f64>, Vec<Vec<usize>>)> = Vec::new();
    match scheme {
        Scheme::MassiveMimo => {
            for user in 0..k {
                let value = (0..=n)
                    .map(|b| rates::mmimo_user_rate(tau, m, k, b as f64 * step, betas[user], 1.0, 0.0))
                    .collect();
                let split = (0..=n).map(|b| vec![b]).collect();
                blocks.push((vec![user], value, split));
            }
        }
        Scheme::Noma => {
            for c in scn.center_users() {
                let e = scn.partner(c);
                let mut value = vec![f64::NEG_INFINITY; n + 1];
                let mut split = vec![vec![0, 0]; n + 1];
                for b in 0..=n {
                    for pc in 0..=b {
                        let (p_c, p_e) = (pc as f64 * step, (b - pc) as f64 * step);
                        let v = rates::noma_center_bound(tau, m, k, p_c, betas[c])
                            + rates::noma_edge_bound(tau, p_e, p_c, betas[e]);
                        if v > value[b] {
                            value[b] = v;
                            split[b] = vec![pc, b - pc];
                        }
                    }
                }
                blocks.push((vec![c, e], value, split));
            }
        }
    }

    // max-plus combination over blocks, remembering each block's budget
    let mut best = blocks[0].1.clone();
    let mut choices: Vec<Vec<usize>> = vec![(0..=n).collect()];
    for (_, value, _) in &blocks[1..] {
        let mut next = vec![f64::NEG_INFINITY; n + 1];
        let mut pick = vec![0usize; n + 1];
        for total in 0..=n {
            for mine in 0..=total {
                let v = best[total - mine] + value[mine];
                if v > next[total] {
                    next[total] = v;
                    pick[total] = mine;
                }
            }
        }
        best = next;
        choices.push(pick);
    }
    let (mut remaining, top) = best
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });

    let mut powers = vec![0.0; k];
    for (idx, (members, _, split)) in blocks.iter().enumerate().rev() {
        let mine = if idx == 0 { remaining } else { choices[idx][remaining] };
        for (&user, &units) in members.iter().zip(&split[mine]) {
            powers[user] = units as f64 * step;
        }
        remaining -= mine;
    }
    Ok((PowerAllocation { powers, budget: scn.p_max() }, top))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioParams;
    use proptest::prelude::*;

    fn scn(m: usize, betas: Vec<f64>, p_max: f64) -> Scenario {
        ScenarioParams {
            antennas: m,
            users: betas.len(),
            coherence: 100,
            p_max,
            pilot_powers: None,
            betas,
            seed: 0,
            trials: 10,
        }
        .build()
        .unwrap()
    }

    fn objective(gains: &[f64], p: &[f64]) -> f64 {
        gains.iter().zip(p).map(|(g, p)| (1.0 + g * p).log2()).sum()
    }

    #[test]
    fn equal_gains_split_evenly() {
        let p = waterfill(&[3.0; 4], 2.0);
        assert!(p.iter().all(|&x| (x - 0.5).abs() < 1e-15));
    }

    #[test]
    fn dead_user_gets_nothing() {
        assert_eq!(waterfill(&[5.0, 0.0], 1.0), vec![1.0, 0.0]);
        assert_eq!(waterfill(&[0.0, 0.0], 1.0), vec![0.0, 0.0]);
    }

    #[test]
    fn four_users_against_grid() {
        let g = [10.0, 5.0, 2.0, 1.0];
        let p = waterfill(&g, 1.0);
        // brute-force simplex grid, step 1e-3
        let n = 1000;
        let mut best = (f64::NEG_INFINITY, [0usize; 4]);
        let mut ln = vec![[0.0; 4]; n + 1];
        for (i, row) in ln.iter_mut().enumerate() {
            for u in 0..4 {
                row[u] = (1.0 + g[u] * i as f64 / n as f64).log2();
            }
        }
        for a in 0..=n {
            for b in 0..=n - a {
                for c in 0..=n - a - b {
                    let d = n - a - b - c;
                    let v = ln[a][0] + ln[b][1] + ln[c][2] + ln[d][3];
                    if v > best.0 {
                        best = (v, [a, b, c, d]);
                    }
                }
            }
        }
        for u in 0..4 {
            assert!((p[u] - best.1[u] as f64 / n as f64).abs() <= 2e-3, "{p:?} {:?}", best.1);
        }
        assert!(objective(&g, &p) >= best.0 - 1e-12);
    }

    #[test]
    fn two_user_closed_form_examples() {
        let b1 = 10f64.powf(1.5);
        let b2 = 10f64.powf(-0.5);
        let a = two_user_mmimo_alloc(&scn(25, vec![b1, b2], 1.0)).unwrap();
        assert!((a.powers[0] - 0.56806).abs() < 1e-4, "{a:?}");
        assert!((a.powers[0] + a.powers[1] - 1.0).abs() < 1e-15);
        // 1e-5 line search on the two-user ZF sum
        let g = [23.0 * b1, 23.0 * b2];
        let best = (0..=100_000)
            .map(|i| i as f64 * 1e-5)
            .max_by(|x, y| objective(&g, &[*x, 1.0 - x]).total_cmp(&objective(&g, &[*y, 1.0 - y])))
            .unwrap();
        assert!((best - a.powers[0]).abs() <= 1e-5);

        let tiny = two_user_mmimo_alloc(&scn(25, vec![b1, b2], 1e-4)).unwrap();
        assert_eq!(tiny.powers, vec![1e-4, 0.0]);

        let eq = two_user_mmimo_alloc(&scn(10, vec![2.0, 2.0 - 1e-12], 1.0)).unwrap();
        assert!((eq.powers[0] - 0.5).abs() < 1e-9);
        assert!(matches!(two_user_mmimo_alloc(&scn(2, vec![b1, b2], 1.0)), Err(Error::TooFewAntennas { .. })));
    }

    #[test]
    fn noma_edge_block_is_zero() {
        let s = scn(12, vec![50.0, 40.0, 30.0, 3.0, 2.0, 1.0], 2.0);
        let a = noma_sumrate_alloc(&s).unwrap();
        assert_eq!(&a.powers[3..], &[0.0, 0.0, 0.0]);
        assert!((a.total() - 2.0).abs() < 1e-12);
        let two = scn(25, vec![31.6, 0.316], 1.0);
        let (alloc, rep) = solve_p1(&two, Scheme::Noma).unwrap();
        assert_eq!(alloc.powers, vec![1.0, 0.0]);
        assert!((rep.sum_rate - 0.98 * (1.0f64 + 31.6 * 25.0).log2()).abs() < 1e-12);
    }

    #[test]
    fn solve_p1_two_user_paths_agree() {
        let s = scn(25, vec![31.6, 0.316], 1.0);
        let (a, _) = solve_p1(&s, Scheme::MassiveMimo).unwrap();
        let b = two_user_mmimo_alloc(&s).unwrap();
        for (x, y) in a.powers.iter().zip(&b.powers) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn oracle_guards() {
        let s = scn(25, vec![31.6, 0.316], 1.0);
        assert!(matches!(grid_oracle(&s, Scheme::Noma, 49), Err(Error::OracleTooCoarse(49))));
        let big = scn(25, vec![6.0, 5.0, 4.0, 3.0, 2.0, 1.0], 1.0);
        assert!(matches!(grid_oracle(&big, Scheme::Noma, 100), Err(Error::OracleTooLarge(6))));
    }

    #[test]
    fn oracle_matches_two_user_closed_form() {
        let s = scn(25, vec![10f64.powf(1.5), 10f64.powf(-0.5)], 1.0);
        let (g, _) = grid_oracle(&s, Scheme::MassiveMimo, 1000).unwrap();
        let l2 = two_user_mmimo_alloc(&s).unwrap();
        assert!((g.powers[0] - l2.powers[0]).abs() <= 1e-3);
        let (n, v) = grid_oracle(&s, Scheme::Noma, 1000).unwrap();
        assert_eq!(n.powers[1], 0.0);
        assert!((v - rates::max_sum_rate_noma_2user(&s).unwrap()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn waterfill_kkt(gains in proptest::collection::vec(0.0f64..100.0, 1..12), budget in 0.01f64..50.0) {
            let p = waterfill(&gains, budget);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            let total: f64 = p.iter().sum();
            if gains.iter().any(|&g| g > 0.0) {
                prop_assert!((total - budget).abs() <= 1e-9 * budget.max(1.0));
                let level = p.iter().zip(&gains)
                    .find(|(x, _)| **x > 0.0)
                    .map(|(x, g)| 1.0 / (1.0 / g + x))
                    .unwrap();
                for (x, g) in p.iter().zip(&gains) {
                    if *x > 0.0 {
                        prop_assert!((1.0 / (1.0 / g + x) - level).abs() <= 1e-9 * level);
                    } else {
                        prop_assert!(*g <= level * (1.0 + 1e-9));
                    }
                }
            } else {
                prop_assert_eq!(total, 0.0);
            }
        }

        #[test]
        fn silent_edges_dominate(
            c in proptest::collection::vec(10.0f64..300.0, 2),
            e in proptest::collection::vec(0.1f64..9.0, 2),
            raw in proptest::collection::vec(0.0f64..1.0, 4),
            m in 2usize..40,
        ) {
            let s = scn(m, vec![c[0], c[1], e[0], e[1]], 1.0);
            let (_, best) = solve_p1(&s, Scheme::Noma).unwrap();
            let total: f64 = raw.iter().sum::<f64>().max(1e-9);
            let q: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let other = rates::noma_bounds(&s, &q).unwrap();
            prop_assert!(best.sum_rate >= other.sum_rate - 1e-12);
        }

        #[test]
        fn monotone_in_m_and_budget(
            b in proptest::collection::vec(1.0f64..100.0, 2),
            e in proptest::collection::vec(0.01f64..0.9, 2),
            m in 4usize..60,
            p in 0.1f64..10.0,
        ) {
            let betas = vec![b[0], b[1], e[0], e[1]];
            for scheme in [Scheme::Noma, Scheme::MassiveMimo] {
                let base = solve_p1(&scn(m, betas.clone(), p), scheme).unwrap().1.sum_rate;
                let more_m = solve_p1(&scn(m + 1, betas.clone(), p), scheme).unwrap().1.sum_rate;
                let more_p = solve_p1(&scn(m, betas.clone(), p * 1.5), scheme).unwrap().1.sum_rate;
                prop_assert!(more_m >= base - 1e-12);
                prop_assert!(more_p >= base - 1e-12);
            }
        }
    }
}
