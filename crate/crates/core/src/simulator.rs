//! Seeded Monte Carlo sweeps over fading realizations.
//!
//! Trial `i` of sweep value `j` draws its channel from a generator keyed by a
//! seed derived from `(seed, j)` and selecting stream `i`, so every trial can
//! be recomputed on its own. Trials run in parallel but are aggregated in
//! trial-index order, which makes results bit-identical to a serial run.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    leader_prefers_leading, no_coordination_bound, no_coordination_probability_iid,
    realized_spectral_efficiency, spectral_efficiency_bound, welfare_report, WelfareReport,
};
use crate::channel::{sample_channels, sigma2_from_snr_db, ChannelError, GameConfig};
use crate::efficiency::{solve_gamma_star, EfficiencyError, GammaStar};
use crate::equilibrium::{
    nash_solve, stackelberg_solve, EquilibriumKind, EquilibriumOutcome, DEFAULT_EPSILON,
};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;
/// Significant digits of numbers written to CSV.
pub const CSV_DIGITS: usize = 12;

#[derive(Debug, Error)]
pub enum SimulatorError {
    #[error("sweep values must be non-empty")]
    NoValues,
    #[error("sweep values must be strictly increasing")]
    Unordered,
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("at least one solver must be selected")]
    NoSolvers,
    #[error("carrier count must be an integer, got {0}")]
    FractionalCarriers(f64),
    #[error("sweep value {value}: {source}")]
    Config { value: f64, source: ChannelError },
    #[error(transparent)]
    Efficiency(#[from] EfficiencyError),
    #[error("unknown sweep variable '{0}' (expected K, snr_db or theta)")]
    UnknownVariable(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// The parameter varied across a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVariable {
    #[serde(rename = "K")]
    Carriers,
    #[serde(rename = "snr_db")]
    SnrDb,
    #[serde(rename = "theta")]
    Theta,
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepVariable::Carriers => "K",
            SweepVariable::SnrDb => "snr_db",
            SweepVariable::Theta => "theta",
        })
    }
}

impl FromStr for SweepVariable {
    type Err = SimulatorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "k" | "carriers" => Ok(SweepVariable::Carriers),
            "snr_db" | "snr" => Ok(SweepVariable::SnrDb),
            "theta" => Ok(SweepVariable::Theta),
            _ => Err(SimulatorError::UnknownVariable(s.to_string())),
        }
    }
}

/// Which equilibria each trial computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverSet {
    pub nash: bool,
    pub stackelberg: bool,
}

impl Default for SolverSet {
    fn default() -> Self {
        Self {
            nash: true,
            stackelberg: true,
        }
    }
}

/// Serial or data-parallel trial evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Serial,
    Parallel,
}

/// A validated sweep: one game configuration per value of `variable`.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    variable: SweepVariable,
    values: Vec<f64>,
    trials: u64,
    base: GameConfig,
    seed: u64,
    solvers: SolverSet,
    gamma_star: GammaStar,
    configs: Vec<GameConfig>,
}

impl SweepSpec {
    pub fn new(
        variable: SweepVariable,
        values: Vec<f64>,
        trials: u64,
        base: GameConfig,
        seed: u64,
        solvers: SolverSet,
    ) -> Result<Self, SimulatorError> {
        if values.is_empty() {
            return Err(SimulatorError::NoValues);
        }
        if values.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
            return Err(SimulatorError::Unordered);
        }
        if trials == 0 {
            return Err(SimulatorError::NoTrials);
        }
        if !solvers.nash && !solvers.stackelberg {
            return Err(SimulatorError::NoSolvers);
        }
        let configs = values
            .iter()
            .map(|&value| {
                let mut config = base.clone();
                match variable {
                    SweepVariable::Carriers => {
                        if value.fract() != 0.0 || value < 0.0 {
                            return Err(SimulatorError::FractionalCarriers(value));
                        }
                        config.carriers = value as usize;
                    }
                    SweepVariable::SnrDb => config.sigma2 = sigma2_from_snr_db(value),
                    SweepVariable::Theta => config.theta = value,
                }
                config
                    .validate()
                    .map_err(|source| SimulatorError::Config { value, source })?;
                Ok(config)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let gamma_star = solve_gamma_star(&base.model)?;
        Ok(Self {
            variable,
            values,
            trials,
            base,
            seed,
            solvers,
            gamma_star,
            configs,
        })
    }

    pub fn variable(&self) -> SweepVariable {
        self.variable
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn base(&self) -> &GameConfig {
        &self.base
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn solvers(&self) -> SolverSet {
        self.solvers
    }

    pub fn gamma_star(&self) -> &GammaStar {
        &self.gamma_star
    }

    /// Configuration used at sweep value `index`.
    pub fn config(&self, index: usize) -> &GameConfig {
        &self.configs[index]
    }

    /// Seed of the trial generators at sweep value `index`.
    pub fn value_seed(&self, index: usize) -> u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng.next_u64()
    }
}

/// Everything recorded about one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub stackelberg: Option<EquilibriumOutcome>,
    pub nash: Option<EquilibriumOutcome>,
    pub stackelberg_se: Option<f64>,
    pub nash_se: Option<f64>,
    pub same_best: bool,
    pub lead_preferred: Option<bool>,
    pub welfare: Option<WelfareReport>,
}

/// Solves trial `trial` of sweep value `index`.
pub fn evaluate_trial(spec: &SweepSpec, index: usize, trial: u64) -> TrialRecord {
    let config = spec.config(index);
    let gs = spec.gamma_star();
    let gains = sample_channels(config, spec.value_seed(index), trial);
    let model = &config.model;

    let stackelberg = spec
        .solvers
        .stackelberg
        .then(|| stackelberg_solve(&gains, model, gs, DEFAULT_EPSILON));
    let nash = spec.solvers.nash.then(|| nash_solve(&gains, model, gs));
    let lead_preferred = spec
        .solvers
        .stackelberg
        .then(|| leader_prefers_leading(&gains, model, gs).ok())
        .flatten();
    let welfare = match (&nash, &stackelberg) {
        (Some(n), Some(s)) => Some(welfare_report(&gains, n, s, model, gs)),
        _ => None,
    };
    TrialRecord {
        stackelberg_se: stackelberg.as_ref().map(|o| realized_spectral_efficiency(o, &gains)),
        nash_se: nash.as_ref().map(|o| realized_spectral_efficiency(o, &gains)),
        stackelberg,
        nash,
        same_best: gains.same_best(),
        lead_preferred,
        welfare,
    }
}

/// Evaluates every trial of sweep value `index`, in trial-index order.
pub fn evaluate_value(spec: &SweepSpec, index: usize, execution: Execution) -> Vec<TrialRecord> {
    match execution {
        Execution::Serial => (0..spec.trials).map(|t| evaluate_trial(spec, index, t)).collect(),
        Execution::Parallel => (0..spec.trials)
            .into_par_iter()
            .map(|t| evaluate_trial(spec, index, t))
            .collect(),
    }
}

/// Running mean and variance (Welford), fed in a fixed order.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
    max: Option<f64>,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
        self.max = Some(self.max.map_or(x, |m| m.max(x)));
    }

    fn push_flag(&mut self, flag: bool) {
        self.push(if flag { 1.0 } else { 0.0 });
    }

    fn mean(&self) -> Option<f64> {
        (self.n > 0).then_some(self.mean)
    }

    /// 95% normal-approximation half-width of the mean.
    fn half_width(&self) -> Option<f64> {
        (self.n > 1).then(|| Z95 * (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt())
    }

    /// 95% binomial half-width for a mean of 0/1 values.
    fn binomial_half_width(&self) -> Option<f64> {
        (self.n > 0).then(|| Z95 * (self.mean * (1.0 - self.mean) / self.n as f64).sqrt())
    }
}

/// Aggregate statistics at one sweep value. Energy efficiencies are in
/// bit/J, spectral efficiencies in bit/s/Hz per user; `None` marks a
/// statistic with no contributing trials.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepRow {
    pub variable: String,
    pub value: f64,
    pub trials: u64,
    pub ee_stackelberg_leader: Option<f64>,
    pub ee_stackelberg_follower: Option<f64>,
    pub ee_stackelberg_sum: Option<f64>,
    /// Over trials with an exact simultaneous-move equilibrium.
    pub ee_nash_sum: Option<f64>,
    /// Trials without a pure simultaneous-move equilibrium.
    pub nash_excluded: u64,
    pub p_nocoord_stackelberg: Option<f64>,
    pub p_nocoord_nash: Option<f64>,
    /// `(1+γ*)B(1+γ*, K)`.
    pub p_nocoord_bound: f64,
    /// Mean realized spectral efficiency of the hierarchical outcome.
    pub se_mean: Option<f64>,
    pub se_bound: f64,
    pub p_lead_preferred: Option<f64>,
    pub ci_ee_stackelberg_leader: Option<f64>,
    pub ci_ee_stackelberg_follower: Option<f64>,
    pub ci_ee_stackelberg_sum: Option<f64>,
    pub ci_ee_nash_sum: Option<f64>,
    pub ci_p_nocoord_stackelberg: Option<f64>,
    pub ci_p_nocoord_nash: Option<f64>,
    pub ci_se_mean: Option<f64>,
    pub ci_p_lead_preferred: Option<f64>,
    pub ee_nash_leader: Option<f64>,
    pub ee_nash_follower: Option<f64>,
    /// Hierarchical aggregate efficiency over the same trials as `ee_nash_sum`.
    pub ee_stackelberg_sum_nash_exact: Option<f64>,
    pub p_same_best: Option<f64>,
    /// Exact probability of the no-coordination region under i.i.d. fading.
    pub p_nocoord_exact_iid: f64,
    pub se_coordinated_mean: Option<f64>,
    pub ci_se_coordinated_mean: Option<f64>,
    pub se_nash_mean: Option<f64>,
    /// `sw_nash / sw_stackelberg` over shared-best-carrier trials.
    pub welfare_ratio_nash_mean: Option<f64>,
    pub welfare_ratio_nash_max: Option<f64>,
    /// `sw_upper / sw_stackelberg` over shared-best-carrier trials.
    pub welfare_ratio_max_mean: Option<f64>,
    pub welfare_ratio_max_max: Option<f64>,
    pub welfare_bound_violations: u64,
    /// Trials where role preference is undefined (no exact equilibrium for a role).
    pub lead_undefined: u64,
    /// Hierarchical outcomes that are not exact equilibria.
    pub stackelberg_anomalies: u64,
}

enum Cell<'a> {
    Text(&'a str),
    Count(u64),
    Number(Option<f64>),
}

impl SweepRow {
    fn cells(&self) -> Vec<(&'static str, Cell<'_>)> {
        use Cell::{Count, Number, Text};
        let n = |x: f64| Number(Some(x));
        vec![
            ("variable", Text(&self.variable)),
            ("value", n(self.value)),
            ("trials", Count(self.trials)),
            ("ee_stackelberg_leader", Number(self.ee_stackelberg_leader)),
            ("ee_stackelberg_follower", Number(self.ee_stackelberg_follower)),
            ("ee_stackelberg_sum", Number(self.ee_stackelberg_sum)),
            ("ee_nash_sum", Number(self.ee_nash_sum)),
            ("nash_excluded", Count(self.nash_excluded)),
            ("p_nocoord_stackelberg", Number(self.p_nocoord_stackelberg)),
            ("p_nocoord_nash", Number(self.p_nocoord_nash)),
            ("p_nocoord_bound", n(self.p_nocoord_bound)),
            ("se_mean", Number(self.se_mean)),
            ("se_bound", n(self.se_bound)),
            ("p_lead_preferred", Number(self.p_lead_preferred)),
            ("ci_ee_stackelberg_leader", Number(self.ci_ee_stackelberg_leader)),
            ("ci_ee_stackelberg_follower", Number(self.ci_ee_stackelberg_follower)),
            ("ci_ee_stackelberg_sum", Number(self.ci_ee_stackelberg_sum)),
            ("ci_ee_nash_sum", Number(self.ci_ee_nash_sum)),
            ("ci_p_nocoord_stackelberg", Number(self.ci_p_nocoord_stackelberg)),
            ("ci_p_nocoord_nash", Number(self.ci_p_nocoord_nash)),
            ("ci_se_mean", Number(self.ci_se_mean)),
            ("ci_p_lead_preferred", Number(self.ci_p_lead_preferred)),
            ("ee_nash_leader", Number(self.ee_nash_leader)),
            ("ee_nash_follower", Number(self.ee_nash_follower)),
            ("ee_stackelberg_sum_nash_exact", Number(self.ee_stackelberg_sum_nash_exact)),
            ("p_same_best", Number(self.p_same_best)),
            ("p_nocoord_exact_iid", n(self.p_nocoord_exact_iid)),
            ("se_coordinated_mean", Number(self.se_coordinated_mean)),
            ("ci_se_coordinated_mean", Number(self.ci_se_coordinated_mean)),
            ("se_nash_mean", Number(self.se_nash_mean)),
            ("welfare_ratio_nash_mean", Number(self.welfare_ratio_nash_mean)),
            ("welfare_ratio_nash_max", Number(self.welfare_ratio_nash_max)),
            ("welfare_ratio_max_mean", Number(self.welfare_ratio_max_mean)),
            ("welfare_ratio_max_max", Number(self.welfare_ratio_max_max)),
            ("welfare_bound_violations", Count(self.welfare_bound_violations)),
            ("lead_undefined", Count(self.lead_undefined)),
            ("stackelberg_anomalies", Count(self.stackelberg_anomalies)),
        ]
    }

    /// CSV column names, in output order.
    pub fn csv_header() -> Vec<&'static str> {
        SweepRow::default().cells().into_iter().map(|(name, _)| name).collect()
    }
}

/// One sweep's rows plus the settings needed to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub variable: SweepVariable,
    pub seed: u64,
    pub trials: u64,
    pub gamma_star: f64,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Writes a header and one record per sweep value. Numbers carry
    /// [`CSV_DIGITS`] significant digits; undefined statistics are `NaN`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), SimulatorError> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(SweepRow::csv_header())?;
        for row in &self.rows {
            writer.write_record(row.cells().into_iter().map(|(_, cell)| match cell {
                Cell::Text(s) => s.to_string(),
                Cell::Count(c) => c.to_string(),
                Cell::Number(x) => format_number(x),
            }))?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<(), SimulatorError> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }
}

/// `x` rounded to [`CSV_DIGITS`] significant digits in shortest form.
pub fn format_number(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => {
            let rounded: f64 = format!("{:.*e}", CSV_DIGITS - 1, v)
                .parse()
                .expect("formatted float parses");
            format!("{rounded}")
        }
        Some(v) if v.is_infinite() => if v > 0.0 { "inf" } else { "-inf" }.to_string(),
        _ => "NaN".to_string(),
    }
}

fn summarize(spec: &SweepSpec, index: usize, records: &[TrialRecord]) -> SweepRow {
    let config = spec.config(index);
    let gs = spec.gamma_star();
    let mut ee_s = [Moments::default(); 3];
    let mut ee_n = [Moments::default(); 3];
    let mut ee_s_on_exact = Moments::default();
    let mut nocoord_s = Moments::default();
    let mut nocoord_n = Moments::default();
    let mut se = Moments::default();
    let mut se_coord = Moments::default();
    let mut se_nash = Moments::default();
    let mut lead = Moments::default();
    let mut same_best = Moments::default();
    let mut ratio_nash = Moments::default();
    let mut ratio_max = Moments::default();
    let (mut nash_excluded, mut lead_undefined, mut anomalies, mut violations) = (0, 0, 0, 0);

    for r in records {
        same_best.push_flag(r.same_best);
        if let Some(s) = &r.stackelberg {
            if s.kind != EquilibriumKind::StackelbergExact {
                anomalies += 1;
            }
            if let [Some(a), Some(b)] = s.utilities {
                ee_s[0].push(a);
                ee_s[1].push(b);
                ee_s[2].push(a + b);
            }
            nocoord_s.push_flag(!s.coordinated);
            let value = r.stackelberg_se.unwrap_or(0.0);
            se.push(value);
            if s.coordinated {
                se_coord.push(value);
            }
            match r.lead_preferred {
                Some(flag) => lead.push_flag(flag),
                None => lead_undefined += 1,
            }
        }
        if let Some(n) = &r.nash {
            nocoord_n.push_flag(!n.coordinated);
            se_nash.push(r.nash_se.unwrap_or(0.0));
            match (n.kind, n.utilities) {
                (EquilibriumKind::NashExact, [Some(a), Some(b)]) => {
                    ee_n[0].push(a);
                    ee_n[1].push(b);
                    ee_n[2].push(a + b);
                    if let Some(w) = r.stackelberg.as_ref().and_then(|s| s.welfare()) {
                        ee_s_on_exact.push(w);
                    }
                }
                _ => nash_excluded += 1,
            }
        }
        if let Some(w) = &r.welfare {
            if w.holds_vs_nash == Some(false) || w.holds_vs_max == Some(false) {
                violations += 1;
            }
            if r.same_best {
                if let Some(x) = w.ratio_vs_nash {
                    ratio_nash.push(x);
                }
                if let Some(x) = w.ratio_vs_max {
                    ratio_max.push(x);
                }
            }
        }
    }

    SweepRow {
        variable: spec.variable.to_string(),
        value: spec.values[index],
        trials: records.len() as u64,
        ee_stackelberg_leader: ee_s[0].mean(),
        ee_stackelberg_follower: ee_s[1].mean(),
        ee_stackelberg_sum: ee_s[2].mean(),
        ee_nash_sum: ee_n[2].mean(),
        nash_excluded,
        p_nocoord_stackelberg: nocoord_s.mean(),
        p_nocoord_nash: nocoord_n.mean(),
        p_nocoord_bound: no_coordination_bound(config.carriers, gs).bound,
        se_mean: se.mean(),
        se_bound: spectral_efficiency_bound(config.carriers, gs),
        p_lead_preferred: lead.mean(),
        ci_ee_stackelberg_leader: ee_s[0].half_width(),
        ci_ee_stackelberg_follower: ee_s[1].half_width(),
        ci_ee_stackelberg_sum: ee_s[2].half_width(),
        ci_ee_nash_sum: ee_n[2].half_width(),
        ci_p_nocoord_stackelberg: nocoord_s.binomial_half_width(),
        ci_p_nocoord_nash: nocoord_n.binomial_half_width(),
        ci_se_mean: se.half_width(),
        ci_p_lead_preferred: lead.binomial_half_width(),
        ee_nash_leader: ee_n[0].mean(),
        ee_nash_follower: ee_n[1].mean(),
        ee_stackelberg_sum_nash_exact: ee_s_on_exact.mean(),
        p_same_best: same_best.mean(),
        p_nocoord_exact_iid: no_coordination_probability_iid(config.carriers, gs),
        se_coordinated_mean: se_coord.mean(),
        ci_se_coordinated_mean: se_coord.half_width(),
        se_nash_mean: se_nash.mean(),
        welfare_ratio_nash_mean: ratio_nash.mean(),
        welfare_ratio_nash_max: ratio_nash.max,
        welfare_ratio_max_mean: ratio_max.mean(),
        welfare_ratio_max_max: ratio_max.max,
        welfare_bound_violations: violations,
        lead_undefined,
        stackelberg_anomalies: anomalies,
    }
}

/// Runs the sweep with trials evaluated in parallel.
pub fn run_sweep(spec: &SweepSpec) -> SweepResult {
    run_sweep_with(spec, Execution::Parallel)
}

pub fn run_sweep_with(spec: &SweepSpec, execution: Execution) -> SweepResult {
    let rows = (0..spec.values.len())
        .map(|index| summarize(spec, index, &evaluate_value(spec, index, execution)))
        .collect();
    SweepResult {
        variable: spec.variable,
        seed: spec.seed,
        trials: spec.trials,
        gamma_star: spec.gamma_star.value,
        rows,
    }
}

/// Trials contributing to the efficiency tradeoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TradeoffFilter {
    All,
    CoordinatedOnly,
}

/// Mean hierarchical aggregate energy efficiency (bit/J) and mean per-user
/// spectral efficiency (bit/s/Hz) at one sweep value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub value: f64,
    pub ee_mean: Option<f64>,
    pub se_mean: Option<f64>,
    pub trials_used: u64,
}

pub fn run_se_tradeoff(spec: &SweepSpec, filter: TradeoffFilter) -> Vec<TradeoffPoint> {
    (0..spec.values.len())
        .map(|index| {
            let mut ee = Moments::default();
            let mut se = Moments::default();
            for r in evaluate_value(spec, index, Execution::Parallel) {
                let Some(s) = &r.stackelberg else { continue };
                if filter == TradeoffFilter::CoordinatedOnly && !s.coordinated {
                    continue;
                }
                se.push(r.stackelberg_se.unwrap_or(0.0));
                if let Some(w) = s.welfare() {
                    ee.push(w);
                }
            }
            TradeoffPoint {
                value: spec.values[index],
                ee_mean: ee.mean(),
                se_mean: se.mean(),
                trials_used: se.n,
            }
        })
        .collect()
}
