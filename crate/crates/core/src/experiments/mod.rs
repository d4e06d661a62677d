//! Experiment drivers.
//!
//! Each driver returns a [`Table`] whose CSV form is the canonical output.
//! Work is fanned out with rayon, but every reduction runs over an
//! index-ordered gather, so the CSV bytes do not depend on the worker count.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::power::{solve_p1, two_user_mmimo_alloc};
use crate::rates::{self, ergodic_rates_mc_batch, Csi};
use crate::rng::{substream_salted, Purpose};
use crate::scenario::{beta_from_snr_db, sample_placement, PlacementSpec, Scenario, ScenarioParams, SnrDistribution};
use crate::stats::mean_estimate;
use crate::Scheme;

pub mod config;
pub mod svg;
pub mod validate;

/// Version written into every CSV and accepted in config files.
pub const SCHEMA_VERSION: u32 = 1;

/// Default placement draws for averaged experiments.
pub const DEFAULT_PLACEMENTS: usize = 200;

/// Default number of power splits in the rate-region sweep.
pub const DEFAULT_REGION_POINTS: usize = 201;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    RateRegion,
    #[serde(rename = "sumrate-vs-m-2user")]
    SumRateVsM2User,
    #[serde(rename = "sumrate-vs-k")]
    SumRateVsK,
    #[serde(rename = "sumrate-vs-m")]
    SumRateVsM,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 4] = [
        ExperimentKind::RateRegion,
        ExperimentKind::SumRateVsM2User,
        ExperimentKind::SumRateVsK,
        ExperimentKind::SumRateVsM,
    ];

    /// CLI subcommand name, also the output file stem (with `_` for `-`).
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::RateRegion => "rate-region",
            ExperimentKind::SumRateVsM2User => "sumrate-vs-m-2user",
            ExperimentKind::SumRateVsK => "sumrate-vs-k",
            ExperimentKind::SumRateVsM => "sumrate-vs-m",
        }
    }

    pub fn file_stem(self) -> String {
        self.name().replace('-', "_")
    }
}

/// Inclusive integer sweep `start, start + step, ..., <= stop`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sweep {
    pub start: usize,
    pub stop: usize,
    pub step: usize,
}

impl Sweep {
    pub fn new(start: usize, stop: usize, step: usize) -> Result<Self> {
        let s = Sweep { start, stop, step };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.step == 0 {
            return Err(Error::InvalidSweep("step must be positive".into()));
        }
        if self.start > self.stop {
            return Err(Error::InvalidSweep(format!("start {} exceeds stop {}", self.start, self.stop)));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<usize> {
        (self.start..=self.stop).step_by(self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// Base scenario. Sweeps override `M` or `K`; averaged experiments redraw
    /// the betas per placement.
    pub scenario: Scenario,
    /// Antenna sweep (`sumrate-vs-m*`) or user sweep (`sumrate-vs-k`).
    pub sweep: Sweep,
    /// Power splits for the rate region.
    pub points: usize,
    pub placements: usize,
    pub placement: PlacementSpec,
    /// BS channel knowledge for the Monte-Carlo curves of the rate region.
    pub csi: Csi,
    pub out_dir: PathBuf,
}

fn two_user_reference(antennas: usize) -> Scenario {
    ScenarioParams {
        antennas,
        users: 2,
        coherence: 100,
        p_max: 1.0,
        pilot_powers: None,
        betas: vec![beta_from_snr_db(15.0, 1.0), beta_from_snr_db(-5.0, 1.0)],
        seed: 1,
        trials: crate::scenario::DEFAULT_TRIALS,
    }
    .build()
    .expect("valid default scenario")
}

/// Ordered stand-in betas for averaged experiments, whose betas are redrawn.
pub(crate) fn placeholder_betas(placement: &PlacementSpec, users: usize, p_max: f64) -> Vec<f64> {
    let half = users / 2;
    (0..users)
        .map(|i| {
            let snr = if i < half { placement.center_snr_db.1 } else { placement.edge_snr_db.0 };
            beta_from_snr_db(snr, p_max)
        })
        .collect()
}

fn averaged_scenario(antennas: usize, users: usize) -> Scenario {
    let placement = PlacementSpec::cell_default();
    ScenarioParams {
        antennas,
        users,
        coherence: 100,
        p_max: 1.0,
        pilot_powers: None,
        betas: placeholder_betas(&placement, users, 1.0),
        seed: 1,
        trials: crate::scenario::DEFAULT_TRIALS,
    }
    .build()
    .expect("valid default scenario")
}

impl ExperimentSpec {
    /// Default setup for each experiment.
    pub fn default_for(kind: ExperimentKind) -> Self {
        let (scenario, sweep) = match kind {
            ExperimentKind::RateRegion => (two_user_reference(25), Sweep { start: 25, stop: 25, step: 1 }),
            ExperimentKind::SumRateVsM2User => (two_user_reference(25), Sweep { start: 3, stop: 60, step: 1 }),
            ExperimentKind::SumRateVsK => (averaged_scenario(30, 10), Sweep { start: 2, stop: 30, step: 2 }),
            ExperimentKind::SumRateVsM => (averaged_scenario(30, 10), Sweep { start: 10, stop: 100, step: 2 }),
        };
        ExperimentSpec {
            kind,
            scenario,
            sweep,
            points: DEFAULT_REGION_POINTS,
            placements: DEFAULT_PLACEMENTS,
            placement: PlacementSpec::cell_default(),
            csi: Csi::PerfectAtBs,
            out_dir: PathBuf::from("out"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sweep.validate()?;
        if self.placements == 0 {
            return Err(Error::InvalidSweep("placements must be at least 1".into()));
        }
        match self.kind {
            ExperimentKind::RateRegion if self.points < 2 => {
                Err(Error::InvalidSweep("rate region needs at least 2 points".into()))
            }
            ExperimentKind::SumRateVsK if self.sweep.values().iter().any(|k| k % 2 != 0 || *k == 0) => {
                Err(Error::InvalidSweep("user sweep must contain only even K >= 2".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn run(&self) -> Result<Table> {
        match self.kind {
            ExperimentKind::RateRegion => run_rate_region(self),
            ExperimentKind::SumRateVsM2User => run_sumrate_vs_m_2user(self),
            ExperimentKind::SumRateVsK => run_sumrate_vs_k(self),
            ExperimentKind::SumRateVsM => run_sumrate_vs_m(self),
        }
    }
}

/// A CSV table with leading `#` comment lines.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub kind: ExperimentKind,
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(kind: ExperimentKind, header: &[&str]) -> Self {
        Table {
            kind,
            comments: vec![format!("schema_version={SCHEMA_VERSION}"), format!("experiment={}", kind.name())],
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            out.push_str("# ");
            out.push_str(c);
            out.push('\n');
        }
        out.push_str(&self.header.join(","));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    /// Values of one column parsed as `f64` (`NaN` for empty cells).
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx].parse().unwrap_or(f64::NAN)).collect())
    }

    /// Value of a `key=value` comment.
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.comments.iter().find_map(|c| c.strip_prefix(key)?.strip_prefix('='))
    }
}

fn fmt(v: f64) -> String {
    v.to_string()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

fn scenario_comments(t: &mut Table, scn: &Scenario) {
    t.comments.push(format!("seed={}", scn.seed()));
    t.comments.push(format!("T={} p_max={}", scn.coherence(), scn.p_max()));
}

fn placement_comment(t: &mut Table, p: &PlacementSpec) {
    let dist = match p.distribution {
        SnrDistribution::UniformDb => "uniform_db".to_string(),
        SnrDistribution::UniformArea { path_loss_exponent } => format!("uniform_area(path_loss_exponent={path_loss_exponent})"),
    };
    t.comments.push(format!(
        "center_snr_db={}..{} edge_snr_db={}..{} distribution={dist}",
        p.center_snr_db.0, p.center_snr_db.1, p.edge_snr_db.0, p.edge_snr_db.1
    ));
}

/// Pareto-optimal flags over `(x, y)` pairs (maximize both).
pub fn pareto_flags(points: &[(f64, f64)]) -> Vec<bool> {
    points
        .iter()
        .map(|&(x, y)| {
            !points
                .iter()
                .any(|&(a, b)| a >= x && b >= y && (a > x || b > y))
        })
        .collect()
}

/// Two-user rate region: every power split `p1 + p2 = p_max` evaluated with
/// the ZF closed form, ZF Monte Carlo, the NOMA bounds and NOMA Monte Carlo.
pub fn run_rate_region(spec: &ExperimentSpec) -> Result<Table> {
    spec.validate()?;
    let scn = &spec.scenario;
    if scn.users() != 2 {
        return Err(Error::NotTwoUser(scn.users()));
    }
    let p_max = scn.p_max();
    let n = spec.points;
    let splits: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let p1 = if i + 1 == n { p_max } else { p_max * i as f64 / (n - 1) as f64 };
            vec![p1, p_max - p1]
        })
        .collect();

    let mut curves: Vec<(&str, Vec<(f64, f64, Option<f64>, Option<f64>)>)> = Vec::new();
    let closed: Vec<_> = splits
        .iter()
        .map(|p| rates::mmimo_rate_cf(scn, p, &[1.0, 1.0]))
        .collect::<Result<_>>()?;
    curves.push(("mmimo_closed_form", closed.iter().map(|r| (r.per_user_rates[0], r.per_user_rates[1], None, None)).collect()));
    let mc_mimo = ergodic_rates_mc_batch(scn, Scheme::MassiveMimo, &splits, spec.csi)?;
    curves.push(("mmimo_monte_carlo", mc_points(&mc_mimo)));
    let bounds: Vec<_> = splits.iter().map(|p| rates::noma_bounds(scn, p)).collect::<Result<_>>()?;
    curves.push(("noma_bound", bounds.iter().map(|r| (r.per_user_rates[0], r.per_user_rates[1], None, None)).collect()));
    let mc_noma = ergodic_rates_mc_batch(scn, Scheme::Noma, &splits, spec.csi)?;
    curves.push(("noma_monte_carlo", mc_points(&mc_noma)));

    let mut t = Table::new(
        ExperimentKind::RateRegion,
        &["curve", "p1", "p2", "r_center", "r_edge", "stderr_center", "stderr_edge", "pareto"],
    );
    scenario_comments(&mut t, scn);
    t.comments.push(format!("M={} K=2 trials={} csi={}", scn.antennas(), scn.trials(), spec.csi.as_str()));
    for (name, pts) in &curves {
        let flags = pareto_flags(&pts.iter().map(|p| (p.0, p.1)).collect::<Vec<_>>());
        for ((p, split), on_front) in pts.iter().zip(&splits).zip(flags) {
            t.rows.push(vec![
                name.to_string(),
                fmt(split[0]),
                fmt(split[1]),
                fmt(p.0),
                fmt(p.1),
                fmt_opt(p.2),
                fmt_opt(p.3),
                u8::from(on_front).to_string(),
            ]);
        }
    }
    Ok(t)
}

fn mc_points(reports: &[rates::RateReport]) -> Vec<(f64, f64, Option<f64>, Option<f64>)> {
    reports
        .iter()
        .map(|r| {
            let se = r.standard_error.as_deref().unwrap_or(&[f64::NAN, f64::NAN]);
            (r.per_user_rates[0], r.per_user_rates[1], Some(se[0]), Some(se[1]))
        })
        .collect()
}

/// Two-user maximum sum rates over an antenna sweep, with the closed-form
/// threshold and the numerically located crossing.
pub fn run_sumrate_vs_m_2user(spec: &ExperimentSpec) -> Result<Table> {
    spec.validate()?;
    let base = &spec.scenario;
    if base.users() != 2 {
        return Err(Error::NotTwoUser(base.users()));
    }
    if spec.sweep.start < 3 {
        return Err(Error::InvalidSweep("two-user antenna sweep must start at M >= 3".into()));
    }
    let (b1, b2, p) = (base.betas()[0], base.betas()[1], base.p_max());
    let ms = rates::m_star(b1, b2, p)?;
    let crossing = rates::two_user_crossing(b1, b2, p)?;
    let mut t = Table::new(
        ExperimentKind::SumRateVsM2User,
        &["M", "r_max_noma", "r_max_mmimo", "p1_mmimo", "p2_mmimo", "mmimo_ahead"],
    );
    scenario_comments(&mut t, base);
    t.comments.push(format!("m_star={}", ms.value));
    t.comments.push(format!("m_star_ceil={}", ms.ceil));
    t.comments.push(format!("crossing_integer={}", crossing.first_integer));
    t.comments.push(format!("crossing_continuous={}", crossing.continuous));
    for m in spec.sweep.values() {
        let scn = base.with_antennas(m)?;
        let noma = rates::max_sum_rate_noma_2user(&scn)?;
        let mimo = rates::max_sum_rate_mmimo_2user(&scn)?;
        let alloc = two_user_mmimo_alloc(&scn)?;
        t.rows.push(vec![
            m.to_string(),
            fmt(noma),
            fmt(mimo),
            fmt(alloc.powers[0]),
            fmt(alloc.powers[1]),
            u8::from(mimo >= noma).to_string(),
        ]);
    }
    Ok(t)
}

/// Mean and standard error of the optimal sum rate per scheme over random
/// placements. `None` for massive MIMO when `M < K`.
struct Averaged {
    noma: (f64, f64),
    mmimo: Option<(f64, f64)>,
}

fn average_over_placements(spec: &ExperimentSpec, antennas: usize, users: usize) -> Result<Averaged> {
    let base = &spec.scenario;
    let coherence_ok = base.coherence() > users;
    if !coherence_ok {
        return Err(Error::CoherenceTooShort { t: base.coherence(), k: users });
    }
    let mimo_ok = antennas >= users;
    let per_placement = (0..spec.placements as u64)
        .into_par_iter()
        .map(|idx| {
            let mut rng = substream_salted(base.seed(), Purpose::Placement, users as u64, idx);
            let betas = sample_placement(&spec.placement, users, base.p_max(), &mut rng)?;
            let scn = ScenarioParams { antennas, users, betas, pilot_powers: None, ..base.params() }.build()?;
            let noma = solve_p1(&scn, Scheme::Noma)?.1.sum_rate;
            let mimo = if mimo_ok { solve_p1(&scn, Scheme::MassiveMimo)?.1.sum_rate } else { f64::NAN };
            Ok((noma, mimo))
        })
        .collect::<Result<Vec<_>>>()?;
    let noma = mean_estimate(&per_placement.iter().map(|x| x.0).collect::<Vec<_>>());
    let mimo = mean_estimate(&per_placement.iter().map(|x| x.1).collect::<Vec<_>>());
    let se = |e: f64| if e.is_finite() { e } else { 0.0 };
    Ok(Averaged {
        noma: (noma.mean, se(noma.std_error)),
        mmimo: mimo_ok.then_some((mimo.mean, se(mimo.std_error))),
    })
}

fn averaged_header() -> [&'static str; 6] {
    ["avg_sum_noma", "avg_sum_mmimo", "stderr_noma", "stderr_mmimo", "mmimo_available", "gap_mmimo_minus_noma"]
}

fn averaged_cells(a: &Averaged) -> Vec<String> {
    vec![
        fmt(a.noma.0),
        fmt_opt(a.mmimo.map(|m| m.0)),
        fmt(a.noma.1),
        fmt_opt(a.mmimo.map(|m| m.1)),
        u8::from(a.mmimo.is_some()).to_string(),
        fmt_opt(a.mmimo.map(|m| m.0 - a.noma.0)),
    ]
}

/// Average optimal sum rates versus the number of users at fixed `M`.
pub fn run_sumrate_vs_k(spec: &ExperimentSpec) -> Result<Table> {
    spec.validate()?;
    let m = spec.scenario.antennas();
    let mut header = vec!["K"];
    header.extend(averaged_header());
    let mut t = Table::new(ExperimentKind::SumRateVsK, &header);
    scenario_comments(&mut t, &spec.scenario);
    t.comments.push(format!("M={m} placements={}", spec.placements));
    placement_comment(&mut t, &spec.placement);
    let mut crossing = None;
    for k in spec.sweep.values() {
        let a = average_over_placements(spec, m, k)?;
        let noma_ahead = a.mmimo.is_none_or(|mm| a.noma.0 > mm.0);
        if noma_ahead && crossing.is_none() {
            crossing = Some(k);
        }
        let mut row = vec![k.to_string()];
        row.extend(averaged_cells(&a));
        t.rows.push(row);
    }
    t.comments.push(format!("crossing_k={}", crossing.map(|k| k.to_string()).unwrap_or_else(|| "none".into())));
    Ok(t)
}

/// Average optimal sum rates versus the antenna count at fixed `K`. The same
/// placements are reused at every `M`.
pub fn run_sumrate_vs_m(spec: &ExperimentSpec) -> Result<Table> {
    spec.validate()?;
    let k = spec.scenario.users();
    let mut header = vec!["M"];
    header.extend(averaged_header());
    let mut t = Table::new(ExperimentKind::SumRateVsM, &header);
    scenario_comments(&mut t, &spec.scenario);
    t.comments.push(format!("K={k} placements={}", spec.placements));
    placement_comment(&mut t, &spec.placement);
    let mut crossing = None;
    for m in spec.sweep.values() {
        if m < k / 2 {
            return Err(Error::TooFewAntennas { m, needed: k / 2 });
        }
        let a = average_over_placements(spec, m, k)?;
        if crossing.is_none() && a.mmimo.is_some_and(|mm| mm.0 > a.noma.0) {
            crossing = Some(m);
        }
        let mut row = vec![m.to_string()];
        row.extend(averaged_cells(&a));
        t.rows.push(row);
    }
    t.comments.push(format!("crossing_m={}", crossing.map(|m| m.to_string()).unwrap_or_else(|| "none".into())));
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_values_and_errors() {
        assert_eq!(Sweep::new(2, 9, 3).unwrap().values(), vec![2, 5, 8]);
        assert!(Sweep::new(5, 4, 1).is_err());
        assert!(Sweep::new(1, 4, 0).is_err());
    }

    #[test]
    fn pareto() {
        let f = pareto_flags(&[(0.0, 3.0), (1.0, 2.0), (0.5, 1.0), (2.0, 0.0)]);
        assert_eq!(f, vec![true, true, false, true]);
    }

    #[test]
    fn odd_user_sweep_rejected() {
        let mut spec = ExperimentSpec::default_for(ExperimentKind::SumRateVsK);
        spec.sweep = Sweep { start: 3, stop: 7, step: 2 };
        assert!(matches!(spec.run(), Err(Error::InvalidSweep(_))));
    }

    #[test]
    fn rate_region_needs_two_users() {
        let mut spec = ExperimentSpec::default_for(ExperimentKind::RateRegion);
        spec.scenario = averaged_scenario(30, 4);
        assert!(matches!(run_rate_region(&spec), Err(Error::NotTwoUser(4))));
    }

    #[test]
    fn two_user_sweep_annotations() {
        let mut spec = ExperimentSpec::default_for(ExperimentKind::SumRateVsM2User);
        spec.sweep = Sweep { start: 3, stop: 15, step: 1 };
        let t = run_sumrate_vs_m_2user(&spec).unwrap();
        assert_eq!(t.meta("crossing_integer"), Some("11"));
        assert_eq!(t.meta("m_star_ceil"), Some("11"));
        let ahead = t.column("mmimo_ahead").unwrap();
        let m = t.column("M").unwrap();
        for (a, m) in ahead.iter().zip(&m) {
            assert_eq!(*a == 1.0, *m >= 11.0);
        }
        // at M = 3 NOMA is ahead
        assert_eq!(ahead[0], 0.0);
        assert!(t.to_csv().starts_with("# schema_version=1\n"));
    }

    #[test]
    fn vs_m_flags_unavailable_mimo() {
        let mut spec = ExperimentSpec::default_for(ExperimentKind::SumRateVsM);
        spec.sweep = Sweep { start: 6, stop: 12, step: 2 };
        spec.placements = 5;
        let t = run_sumrate_vs_m(&spec).unwrap();
        assert_eq!(t.column("mmimo_available").unwrap(), vec![0.0, 0.0, 1.0, 1.0]);
        assert!(t.column("avg_sum_mmimo").unwrap()[0].is_nan());
        assert_eq!(t.column("avg_sum_mmimo").unwrap()[2], 0.0);
    }
}
