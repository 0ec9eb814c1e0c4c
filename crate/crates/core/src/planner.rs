//! Day-ahead planning: full-day rollouts of the agent, plan files, the
//! α comparison table and wind-perturbation sensitivity of topology plans.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::{Action, ActionSpec};
use crate::agent::{decide, DecisionKind, StatusLevel};
use crate::chronics::{forecast, perturb, Chronic, ForecastModel, PerturbationKind, PerturbationScenario, STEP_HOURS};
use crate::config::EngineConfig;
use crate::engine::{distance_to_reference, step, GridState};
use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// The decision pipeline with the plan's α.
    Agent,
    /// Never acts.
    NoOp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerOptions {
    pub forecast: ForecastModel,
}

impl Default for PlannerOptions {
    fn default() -> Self {
        PlannerOptions {
            forecast: ForecastModel::Exact,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanMetrics {
    /// Σ over steps and lines of the flow above the thermal limit, MWh.
    pub remaining_congestion_mwh: f64,
    /// Busbar changes of individual endpoints.
    pub switching_operations: usize,
    /// Dispatch deviation from plan, integrated, MWh.
    pub redispatch_mwh: f64,
    pub curtailment_mwh: f64,
    pub survived: bool,
}

/// Per-step series for plotting. Every vector has one entry per plan step.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanProfiles {
    /// `None` once the grid is blacked out.
    pub max_rho: Vec<Option<f64>>,
    pub cum_redispatch_mwh: Vec<f64>,
    pub topo_distance: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub step: usize,
    pub action: ActionSpec,
    pub kind: DecisionKind,
    pub status: StatusLevel,
    /// Realized max ρ after the step; `None` at blackout.
    pub max_rho: Option<f64>,
    pub switched_endpoints: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejection: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperationalPlan {
    pub scenario_id: String,
    pub grid: String,
    pub policy: Policy,
    pub alpha: f64,
    /// Chronic the plan was made for, when it came from a file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chronic_file: Option<PathBuf>,
    pub steps: Vec<PlanStep>,
    pub metrics: PlanMetrics,
    pub profiles: PlanProfiles,
    /// Step at which the grid blacked out and the rollout stopped.
    pub truncated_at: Option<usize>,
}

impl OperationalPlan {
    pub fn actions(&self, grid: &Grid) -> Result<Vec<Action>> {
        self.steps.iter().map(|s| s.action.resolve(grid)).collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<OperationalPlan> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self).expect("plan serializes");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// `step,max_rho,cum_redispatch_mwh,topo_distance`
    pub fn write_profile_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let csv_err = |e: csv::Error| Error::Invalid(format!("csv: {e}"));
        w.write_record(["step", "max_rho", "cum_redispatch_mwh", "topo_distance"])
            .map_err(csv_err)?;
        for (i, s) in self.steps.iter().enumerate() {
            let rho = self.profiles.max_rho[i].map_or_else(|| "blackout".to_string(), |r| format!("{r:.6}"));
            w.write_record([
                s.step.to_string(),
                rho,
                format!("{:.6}", self.profiles.cum_redispatch_mwh[i]),
                self.profiles.topo_distance[i].to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Invalid(format!("csv: {e}")))
    }

    pub fn save_profile_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_profile_csv(BufWriter::new(file))
    }
}

/// Metrics of a realized trajectory (one state per step).
pub fn compute_metrics(grid: &Grid, states: &[GridState]) -> PlanMetrics {
    let mut m = PlanMetrics {
        survived: true,
        ..PlanMetrics::default()
    };
    for s in states {
        if s.blackout {
            m.survived = false;
            continue;
        }
        m.remaining_congestion_mwh += s.overload_mw(grid) * STEP_HOURS;
        m.switching_operations += s.report.switched_endpoints;
        m.redispatch_mwh += s.redispatch_mw(grid) * STEP_HOURS;
        m.curtailment_mwh += s.curtailed_mw(grid) * STEP_HOURS;
    }
    m
}

/// Forecast steps a decision needs: the longer of the observer and search horizons.
pub fn lookahead(config: &EngineConfig) -> usize {
    config.agent.observer_horizon.max(config.search.depth)
}

/// Runs the whole chronic, one decision per step. The initial state is the
/// reference topology at plan dispatch under row 0; step `t` realizes row `t`.
pub fn rollout_day(
    grid: &Grid,
    chronic: &Chronic,
    policy: Policy,
    config: &EngineConfig,
    options: PlannerOptions,
) -> Result<OperationalPlan> {
    let n = chronic.step_count();
    if n == 0 {
        return Err(Error::InvalidChronic(format!("{}: no rows", chronic.scenario_id)));
    }
    let h = lookahead(config);
    let mut state = GridState::initial(grid, chronic.row(0), 0);
    let mut states = Vec::with_capacity(n);
    let mut steps = Vec::with_capacity(n);
    let mut truncated_at = None;
    for t in 0..n {
        let (action, kind, status) = match policy {
            Policy::NoOp => (Action::NoOp, DecisionKind::Skip, StatusLevel::Safe),
            Policy::Agent => {
                let fc = forecast(chronic, t, h.min(n - t), options.forecast)?;
                let d = decide(grid, &state, &fc, config);
                (d.action, d.kind, d.status.level)
            }
        };
        state = step(grid, &state, &action, chronic.row(t), config);
        steps.push(PlanStep {
            step: t,
            action: action.to_spec(grid),
            kind,
            status,
            max_rho: (!state.blackout).then(|| state.max_rho()),
            switched_endpoints: state.report.switched_endpoints,
            rejection: state.report.rejection.as_ref().map(|r| r.to_string()),
        });
        states.push(state.clone());
        if state.blackout {
            truncated_at = Some(t);
            break;
        }
    }
    let metrics = compute_metrics(grid, &states);
    let mut cum = 0.0;
    let profiles = PlanProfiles {
        max_rho: steps.iter().map(|s| s.max_rho).collect(),
        cum_redispatch_mwh: states
            .iter()
            .map(|s| {
                if !s.blackout {
                    cum += s.redispatch_mw(grid) * STEP_HOURS;
                }
                cum
            })
            .collect(),
        topo_distance: states.iter().map(|s| distance_to_reference(grid, s).total()).collect(),
    };
    Ok(OperationalPlan {
        scenario_id: chronic.scenario_id.clone(),
        grid: grid.name.clone(),
        policy,
        alpha: config.agent.alpha,
        chronic_file: None,
        steps,
        metrics,
        profiles,
        truncated_at,
    })
}

/// Agent plan for `alpha`, all other settings from `config`.
pub fn plan_day(grid: &Grid, chronic: &Chronic, alpha: f64, config: &EngineConfig, options: PlannerOptions) -> Result<OperationalPlan> {
    let mut cfg = config.clone();
    cfg.agent.alpha = alpha;
    cfg.validate()?;
    rollout_day(grid, chronic, Policy::Agent, &cfg, options)
}

/// Suite totals for one policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    /// `None` for the `NoOp` baseline.
    pub alpha: Option<f64>,
    pub days: usize,
    pub steps: usize,
    pub survived_days: usize,
    pub remaining_congestion_mwh: f64,
    pub switching_operations: usize,
    pub redispatch_mwh: f64,
    pub curtailment_mwh: f64,
    pub remaining_congestion_pct: f64,
    pub switching_pct: f64,
    pub redispatch_pct: f64,
}

impl ComparisonRow {
    pub fn label(&self) -> String {
        self.alpha.map_or_else(|| "noop".to_string(), |a| format!("{a}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    /// `NoOp` first, then one row per α in the order given.
    pub rows: Vec<ComparisonRow>,
    /// Days dropped because `NoOp` never overloads a line on them.
    pub filtered_days: Vec<String>,
    pub congested_days: Vec<String>,
}

impl ComparisonTable {
    pub fn row(&self, alpha: Option<f64>) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.alpha == alpha)
    }

    /// `alpha,remaining_congestion_pct,switching_pct,redispatch_pct`
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let csv_err = |e: csv::Error| Error::Invalid(format!("csv: {e}"));
        w.write_record(["alpha", "remaining_congestion_pct", "switching_pct", "redispatch_pct"])
            .map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.label(),
                format!("{:.2}", r.remaining_congestion_pct),
                format!("{:.2}", r.switching_pct),
                format!("{:.2}", r.redispatch_pct),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Invalid(format!("csv: {e}")))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(BufWriter::new(file))
    }
}

/// Every plan produced by [`compare_alphas`], grouped like the table rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub table: ComparisonTable,
    pub noop: Vec<OperationalPlan>,
    pub by_alpha: Vec<(f64, Vec<OperationalPlan>)>,
}

fn totals(alpha: Option<f64>, plans: &[OperationalPlan]) -> ComparisonRow {
    ComparisonRow {
        alpha,
        days: plans.len(),
        steps: plans.iter().map(|p| p.steps.len()).sum(),
        survived_days: plans.iter().filter(|p| p.metrics.survived).count(),
        remaining_congestion_mwh: plans.iter().map(|p| p.metrics.remaining_congestion_mwh).sum(),
        switching_operations: plans.iter().map(|p| p.metrics.switching_operations).sum(),
        redispatch_mwh: plans.iter().map(|p| p.metrics.redispatch_mwh).sum(),
        curtailment_mwh: plans.iter().map(|p| p.metrics.curtailment_mwh).sum(),
        remaining_congestion_pct: 0.0,
        switching_pct: 0.0,
        redispatch_pct: 0.0,
    }
}

fn pct(value: f64, reference: Option<f64>) -> f64 {
    match reference {
        Some(r) if r > 0.0 => 100.0 * value / r,
        _ => 0.0,
    }
}

/// Plans every day with `NoOp` and with each α, drops days on which `NoOp`
/// never overloads a line, and builds the normalized table: metrics are
/// averaged per simulated step, then remaining congestion is divided by the
/// `NoOp` value, switching by the α = 1 value and redispatch by the α = 0
/// value.
pub fn compare_alphas(
    grid: &Grid,
    days: &[Chronic],
    alphas: &[f64],
    config: &EngineConfig,
    options: PlannerOptions,
) -> Result<Comparison> {
    if days.is_empty() {
        return Err(Error::Invalid("no chronics to compare".into()));
    }
    for a in alphas {
        if !(0.0..=1.0).contains(a) {
            return Err(Error::Invalid(format!("alpha {a} outside [0, 1]")));
        }
    }
    let noop_all: Vec<OperationalPlan> = days
        .par_iter()
        .map(|d| rollout_day(grid, d, Policy::NoOp, config, options))
        .collect::<Result<_>>()?;
    let mut congested = Vec::new();
    let mut filtered_days = Vec::new();
    let mut noop = Vec::new();
    for (d, p) in days.iter().zip(noop_all) {
        let overloaded = p.truncated_at.is_some()
            || p.profiles.max_rho.iter().flatten().any(|r| config.protection.is_overloaded(*r));
        if overloaded {
            congested.push(d);
            noop.push(p);
        } else {
            filtered_days.push(d.scenario_id.clone());
        }
    }
    if congested.is_empty() {
        return Err(Error::Invalid("every day is congestion-free".into()));
    }
    let mut by_alpha = Vec::with_capacity(alphas.len());
    for &a in alphas {
        let plans: Vec<OperationalPlan> = congested
            .par_iter()
            .map(|d| plan_day(grid, d, a, config, options))
            .collect::<Result<_>>()?;
        by_alpha.push((a, plans));
    }

    let per_step = |total: f64, steps: usize| if steps == 0 { 0.0 } else { total / steps as f64 };
    let mut rows = vec![totals(None, &noop)];
    rows.extend(by_alpha.iter().map(|(a, p)| totals(Some(*a), p)));
    let avg_congestion = |r: &ComparisonRow| per_step(r.remaining_congestion_mwh, r.steps);
    let avg_switching = |r: &ComparisonRow| per_step(r.switching_operations as f64, r.steps);
    let avg_redispatch = |r: &ComparisonRow| per_step(r.redispatch_mwh, r.steps);
    let ref_congestion = Some(avg_congestion(&rows[0]));
    let ref_switching = rows.iter().find(|r| r.alpha == Some(1.0)).map(avg_switching);
    let ref_redispatch = rows.iter().find(|r| r.alpha == Some(0.0)).map(avg_redispatch);
    for r in &mut rows {
        r.remaining_congestion_pct = pct(avg_congestion(r), ref_congestion);
        r.switching_pct = pct(avg_switching(r), ref_switching);
        r.redispatch_pct = pct(avg_redispatch(r), ref_redispatch);
    }
    Ok(Comparison {
        table: ComparisonTable {
            rows,
            filtered_days,
            congested_days: congested.iter().map(|d| d.scenario_id.clone()).collect(),
        },
        noop,
        by_alpha,
    })
}

/// A maximal run of consecutive steps on which the `NoOp` replay overloads
/// a line. `end` is inclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Episode {
    pub scenario_id: String,
    pub start: usize,
    pub end: usize,
}

/// Protection disabled: replays measure loading without acting on it, so
/// that plan and `NoOp` cover the same steps.
pub fn monitoring_config(config: &EngineConfig) -> EngineConfig {
    let mut cfg = config.clone();
    cfg.protection.hard_limit = f64::INFINITY;
    cfg.protection.soft_overflow_steps = u32::MAX;
    cfg
}

/// Applies `actions` verbatim (then `NoOp`) over the whole chronic.
pub fn replay(grid: &Grid, chronic: &Chronic, actions: &[Action], config: &EngineConfig) -> Vec<GridState> {
    let mut state = GridState::initial(grid, chronic.row(0), 0);
    let mut out = Vec::with_capacity(chronic.step_count());
    for t in 0..chronic.step_count() {
        let a = actions.get(t).unwrap_or(&Action::NoOp);
        state = step(grid, &state, a, chronic.row(t), config);
        out.push(state.clone());
    }
    out
}

pub fn congestion_episodes(grid: &Grid, chronic: &Chronic, config: &EngineConfig) -> Vec<Episode> {
    let states = replay(grid, chronic, &[], &monitoring_config(config));
    let mut out = Vec::new();
    let mut start = None;
    for (t, s) in states.iter().enumerate() {
        let hot = s.blackout || config.protection.is_overloaded(s.max_rho());
        match (hot, start) {
            (true, None) => start = Some(t),
            (false, Some(a)) => {
                out.push(Episode {
                    scenario_id: chronic.scenario_id.clone(),
                    start: a,
                    end: t - 1,
                });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(a) = start {
        out.push(Episode {
            scenario_id: chronic.scenario_id.clone(),
            start: a,
            end: states.len() - 1,
        });
    }
    out
}

fn episode_peak(states: &[GridState], e: &Episode) -> Option<f64> {
    let window = &states[e.start..=e.end];
    if window.iter().any(|s| s.blackout) {
        None
    } else {
        Some(window.iter().map(GridState::max_rho).fold(0.0, f64::max))
    }
}

/// Per episode: plan peak minus `NoOp` peak, percentage points, both replayed
/// open loop on `chronic`. `None` when either replay blacks out.
pub fn episode_deltas(
    grid: &Grid,
    chronic: &Chronic,
    actions: &[Action],
    episodes: &[Episode],
    config: &EngineConfig,
) -> Vec<Option<f64>> {
    let cfg = monitoring_config(config);
    let with_plan = replay(grid, chronic, actions, &cfg);
    let without = replay(grid, chronic, &[], &cfg);
    episodes
        .iter()
        .map(|e| match (episode_peak(&with_plan, e), episode_peak(&without, e)) {
            (Some(p), Some(n)) => Some(100.0 * (p - n)),
            _ => None,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRecord {
    pub scenario_id: String,
    pub start: usize,
    pub end: usize,
    pub perturbation: PerturbationKind,
    /// Percentage points; `None` when a replay diverged.
    pub delta_max_rho_pp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivitySummary {
    pub perturbation: PerturbationKind,
    pub episodes: usize,
    pub diverged: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// Share of finite deltas below zero.
    pub fraction_improved: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub records: Vec<SensitivityRecord>,
    pub summary: Vec<SensitivitySummary>,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn summarize(kind: PerturbationKind, records: &[&SensitivityRecord]) -> SensitivitySummary {
    let mut d: Vec<f64> = records.iter().filter_map(|r| r.delta_max_rho_pp).collect();
    d.sort_by(f64::total_cmp);
    let improved = d.iter().filter(|x| **x < 0.0).count();
    SensitivitySummary {
        perturbation: kind,
        episodes: records.len(),
        diverged: records.len() - d.len(),
        min: quantile(&d, 0.0),
        q1: quantile(&d, 0.25),
        median: quantile(&d, 0.5),
        q3: quantile(&d, 0.75),
        max: quantile(&d, 1.0),
        fraction_improved: if d.is_empty() { f64::NAN } else { improved as f64 / d.len() as f64 },
    }
}

/// Replays each (day, plan) pair on every perturbation of the day. Episodes
/// come from the unperturbed day.
pub fn sensitivity_run(
    grid: &Grid,
    days: &[(Chronic, OperationalPlan)],
    kinds: &[PerturbationKind],
    config: &EngineConfig,
) -> Result<SensitivityReport> {
    let scenarios: Vec<PerturbationScenario> = kinds
        .iter()
        .map(|k| PerturbationScenario::new(*k, grid))
        .collect::<Result<_>>()?;
    let mut jobs = Vec::new();
    for (chronic, plan) in days {
        let actions = plan.actions(grid)?;
        let episodes = congestion_episodes(grid, chronic, config);
        for sc in &scenarios {
            jobs.push((chronic, actions.clone(), episodes.clone(), sc));
        }
    }
    let records: Vec<Vec<SensitivityRecord>> = jobs
        .par_iter()
        .map(|(chronic, actions, episodes, sc)| {
            let perturbed = perturb(chronic, sc);
            episode_deltas(grid, &perturbed, actions, episodes, config)
                .into_iter()
                .zip(episodes)
                .map(|(delta, e)| SensitivityRecord {
                    scenario_id: e.scenario_id.clone(),
                    start: e.start,
                    end: e.end,
                    perturbation: sc.kind,
                    delta_max_rho_pp: delta,
                })
                .collect()
        })
        .collect();
    let records: Vec<SensitivityRecord> = records.into_iter().flatten().collect();
    let summary = kinds
        .iter()
        .map(|k| {
            let mine: Vec<&SensitivityRecord> = records.iter().filter(|r| r.perturbation == *k).collect();
            summarize(*k, &mine)
        })
        .collect();
    Ok(SensitivityReport { records, summary })
}

impl SensitivityReport {
    /// `scenario_id,start_step,end_step,perturbation,delta_max_rho_pp`
    pub fn write_records_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let csv_err = |e: csv::Error| Error::Invalid(format!("csv: {e}"));
        w.write_record(["scenario_id", "start_step", "end_step", "perturbation", "delta_max_rho_pp"])
            .map_err(csv_err)?;
        for r in &self.records {
            w.write_record([
                r.scenario_id.clone(),
                r.start.to_string(),
                r.end.to_string(),
                r.perturbation.to_string(),
                r.delta_max_rho_pp.map_or_else(|| "diverged".into(), |d| format!("{d:.6}")),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Invalid(format!("csv: {e}")))
    }

    /// `perturbation,episodes,diverged,min,q1,median,q3,max,fraction_improved`
    pub fn write_summary_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let csv_err = |e: csv::Error| Error::Invalid(format!("csv: {e}"));
        w.write_record([
            "perturbation",
            "episodes",
            "diverged",
            "min",
            "q1",
            "median",
            "q3",
            "max",
            "fraction_improved",
        ])
        .map_err(csv_err)?;
        for s in &self.summary {
            let f = |x: f64| format!("{x:.4}");
            w.write_record([
                s.perturbation.to_string(),
                s.episodes.to_string(),
                s.diverged.to_string(),
                f(s.min),
                f(s.q1),
                f(s.median),
                f(s.q3),
                f(s.max),
                f(s.fraction_improved),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Invalid(format!("csv: {e}")))
    }

    /// Writes the records to `path` and the summary next to it with a
    /// `_summary` suffix.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<PathBuf> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_records_csv(BufWriter::new(file))?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("sensitivity");
        let summary = path.with_file_name(format!("{stem}_summary.csv"));
        let file = File::create(&summary).map_err(|e| Error::io(&summary, e))?;
        self.write_summary_csv(BufWriter::new(file))?;
        Ok(summary)
    }
}
