//! Decision pipeline: observe the grid, skip while safe (resetting dispatch
//! and topology when possible), otherwise pick between a topology action and
//! a redispatch according to the preference `alpha`.

use serde::{Deserialize, Serialize};

use crate::action::{Action, TopologyAction};
use crate::chronics::ChronicRow;
use crate::config::EngineConfig;
use crate::engine::{apply_topology, distance_to_reference, simulate_horizon, GridState};
use crate::grid::Grid;
use crate::redispatch::{
    optimize_for_forecast, optimize_for_topology, redispatch_reset_step, RedispatchOptions, RedispatchResult,
};
use crate::search::{recovery_step, search, ActionCandidate, SearchResult};
use crate::topology::Endpoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatusLevel {
    Safe,
    Alert,
    Critical,
}

/// A line at or above the alert threshold. `step` 0 is the realized state,
/// `k` the k-th forecast step of the `NoOp` projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trigger {
    pub line: String,
    pub rho: f64,
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridStatus {
    pub level: StatusLevel,
    pub max_rho: f64,
    pub triggers: Vec<Trigger>,
}

impl GridStatus {
    pub fn is_safe(&self) -> bool {
        self.level == StatusLevel::Safe
    }
}

/// Classifies `state` from its own loading and a `NoOp` projection over the
/// observer horizon.
pub fn observe(grid: &Grid, state: &GridState, forecast: &[ChronicRow], config: &EngineConfig) -> GridStatus {
    let threshold = config.agent.alert_threshold;
    let horizon = config.agent.observer_horizon.min(forecast.len());
    let projected = simulate_horizon(grid, state, &Action::NoOp, &forecast[..horizon], config);

    let mut triggers = Vec::new();
    let mut max_rho: f64 = 0.0;
    let mut blackout_risk = state.blackout;
    for (k, s) in std::iter::once(state).chain(projected.iter()).enumerate() {
        if s.blackout {
            blackout_risk = true;
            max_rho = f64::INFINITY;
            continue;
        }
        for (l, r) in s.rho().into_iter().enumerate() {
            max_rho = max_rho.max(r);
            if r >= threshold {
                triggers.push(Trigger {
                    line: grid.lines[l].id.clone(),
                    rho: r,
                    step: k,
                });
            }
        }
    }
    let realized_overload = state.rho().iter().any(|r| *r > 1.0);
    let level = if realized_overload || blackout_risk || !state.report.tripped_lines.is_empty() {
        StatusLevel::Critical
    } else if triggers.is_empty() {
        StatusLevel::Safe
    } else {
        StatusLevel::Alert
    };
    GridStatus { level, max_rho, triggers }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionKind {
    /// Safe and nothing to restore.
    Skip,
    Reset,
    Recovery,
    Topology,
    Redispatch,
    Composite,
    /// Unsafe, but no option improves on doing nothing.
    NoRemedy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub action: Action,
    pub kind: DecisionKind,
    pub status: GridStatus,
    /// Worst simulated max ρ of the chosen action over the evaluation horizon.
    pub predicted_max_rho: Option<f64>,
    /// No option brings the projection to ρ ≤ 1.
    pub insufficient: bool,
}

/// A remedy with the worst max ρ of its simulated horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Remedy {
    pub action: Action,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    Topology,
    Redispatch,
    Neither,
}

/// Weighs simulated relief by preference. `alpha` 0 and 1 force a side; in
/// between the side with the larger weighted relief wins, redispatch on an
/// exact tie. A missing side forfeits.
pub fn alpha_select(topo: Option<f64>, redisp: Option<f64>, baseline_rho: f64, alpha: f64) -> Selection {
    if alpha <= 0.0 {
        return if redisp.is_some() { Selection::Redispatch } else { Selection::Neither };
    }
    if alpha >= 1.0 {
        return if topo.is_some() { Selection::Topology } else { Selection::Neither };
    }
    match (topo, redisp) {
        (None, None) => Selection::Neither,
        (Some(_), None) => Selection::Topology,
        (None, Some(_)) => Selection::Redispatch,
        (Some(t), Some(r)) => {
            let s_topo = alpha * (baseline_rho - t);
            let s_redisp = (1.0 - alpha) * (baseline_rho - r);
            if s_topo > s_redisp {
                Selection::Topology
            } else {
                Selection::Redispatch
            }
        }
    }
}

fn worst(traj: &[GridState]) -> f64 {
    traj.iter().map(GridState::max_rho).fold(0.0, f64::max)
}

fn switched_endpoints(grid: &Grid, state: &GridState, action: &TopologyAction) -> usize {
    let after = apply_topology(&state.topology, action);
    grid.endpoints()
        .filter(|e: &Endpoint| after.bus(*e) != state.topology.bus(*e))
        .count()
}

/// Result of [`combined_fallback`].
#[derive(Debug, Clone, PartialEq)]
pub struct FallbackChoice {
    pub action: Action,
    pub rho: f64,
    pub redispatch: RedispatchResult,
}

/// Pairs each of the top topology candidates with the redispatch optimized
/// for it and returns the composite with the lowest simulated max ρ. Ties go
/// to fewer switched endpoints, then smaller Σ|Δ|, then canonical id.
pub fn combined_fallback(
    grid: &Grid,
    state: &GridState,
    candidates: &[ActionCandidate],
    forecast: &[ChronicRow],
    config: &EngineConfig,
) -> Option<FallbackChoice> {
    let options = RedispatchOptions {
        curtailment: false,
        curtailment_penalty: config.agent.curtailment_penalty,
    };
    let mut best: Option<(f64, usize, f64, String, FallbackChoice)> = None;
    for cand in candidates.iter().take(5) {
        let Some(topo) = cand.action.topology() else { continue };
        let Ok(plan) = optimize_for_topology(grid, state, topo, forecast, config, options) else {
            continue;
        };
        let traj = simulate_horizon(grid, state, &plan.action, forecast, config);
        if traj.iter().any(|s| s.blackout) {
            continue;
        }
        let key = (
            worst(&traj),
            switched_endpoints(grid, state, topo),
            plan.redispatch.total_abs_delta,
            cand.canonical_id.clone(),
        );
        let better = match &best {
            None => true,
            Some((r, e, d, id, _)) => {
                key.0
                    .total_cmp(r)
                    .then(key.1.cmp(e))
                    .then(key.2.total_cmp(d))
                    .then_with(|| key.3.cmp(id))
                    .is_lt()
            }
        };
        if better {
            let choice = FallbackChoice {
                action: plan.action,
                rho: key.0,
                redispatch: plan.redispatch,
            };
            best = Some((key.0, key.1, key.2, key.3, choice));
        }
    }
    best.map(|b| b.4)
}

/// Intermediate products of an unsafe-state decision, kept for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct Deliberation {
    pub search: SearchResult,
    pub redispatch: Option<RedispatchResult>,
    pub baseline_rho: f64,
    pub topology_rho: Option<f64>,
    pub redispatch_rho: Option<f64>,
    pub selection: Selection,
}

/// Chooses the action for the next step.
pub fn decide(grid: &Grid, state: &GridState, forecast: &[ChronicRow], config: &EngineConfig) -> Decision {
    decide_verbose(grid, state, forecast, config).0
}

/// [`decide`] plus the search and LP results behind an unsafe-state choice.
pub fn decide_verbose(
    grid: &Grid,
    state: &GridState,
    forecast: &[ChronicRow],
    config: &EngineConfig,
) -> (Decision, Option<Deliberation>) {
    let status = observe(grid, state, forecast, config);
    let skip = |status: GridStatus, kind, action| Decision {
        action,
        kind,
        status,
        predicted_max_rho: None,
        insufficient: false,
    };
    if state.blackout || forecast.is_empty() {
        return (skip(status, DecisionKind::Skip, Action::NoOp), None);
    }
    let agent = &config.agent;
    if status.is_safe() {
        let horizon = &forecast[..agent.observer_horizon.min(forecast.len())];
        if agent.reset && state.is_redispatched() {
            let a = redispatch_reset_step(grid, state, horizon, config);
            if !a.is_noop() {
                return (skip(status, DecisionKind::Reset, a), None);
            }
        }
        if agent.recovery && distance_to_reference(grid, state).total() > 0 {
            let a = recovery_step(grid, state, horizon, config);
            if !a.is_noop() {
                return (skip(status, DecisionKind::Recovery, a), None);
            }
        }
        return (skip(status, DecisionKind::Skip, Action::NoOp), None);
    }

    let horizon = &forecast[..config.search.depth.clamp(1, forecast.len())];
    let alpha = agent.alpha;
    let baseline = simulate_horizon(grid, state, &Action::NoOp, horizon, config);
    let baseline_rho = worst(&baseline);

    let found = search(grid, state, horizon, &config.search, config);
    let topo = found.candidates.first().map(|c| Remedy {
        action: c.action.clone(),
        rho: c.objective,
    });

    let mut redispatch_result = None;
    let redisp = if alpha < 1.0 {
        let mut options = RedispatchOptions {
            curtailment: false,
            curtailment_penalty: agent.curtailment_penalty,
        };
        let mut result = optimize_for_forecast(grid, state, horizon, config, options).ok();
        if result.as_ref().is_some_and(|r| r.insufficient) {
            options.curtailment = true;
            if let Ok(r) = optimize_for_forecast(grid, state, horizon, config, options) {
                result = Some(r);
            }
        }
        result.and_then(|r| {
            let action = r.action();
            redispatch_result = Some(r);
            if action.is_noop() {
                return None;
            }
            let traj = simulate_horizon(grid, state, &action, horizon, config);
            if traj.iter().any(|s| s.blackout) {
                return None;
            }
            Some(Remedy { action, rho: worst(&traj) })
        })
    } else {
        None
    };

    let selection = alpha_select(
        topo.as_ref().map(|o| o.rho),
        redisp.as_ref().map(|o| o.rho),
        baseline_rho,
        alpha,
    );
    let chosen = match selection {
        Selection::Topology => topo.clone().map(|o| (o, DecisionKind::Topology)),
        Selection::Redispatch => redisp.clone().map(|o| (o, DecisionKind::Redispatch)),
        Selection::Neither => None,
    };
    // A remedy that does not beat doing nothing is not worth issuing.
    let chosen = chosen.filter(|(o, _)| o.rho < baseline_rho);

    let mut decision = match chosen {
        Some((o, kind)) => Decision {
            insufficient: o.rho > 1.0,
            predicted_max_rho: Some(o.rho),
            action: o.action,
            kind,
            status: status.clone(),
        },
        None => Decision {
            action: Action::NoOp,
            kind: DecisionKind::NoRemedy,
            status: status.clone(),
            predicted_max_rho: Some(baseline_rho),
            insufficient: baseline_rho > 1.0,
        },
    };

    let mixed = alpha > 0.0 && alpha < 1.0;
    if mixed && decision.insufficient {
        if let Some(f) = combined_fallback(grid, state, &found.candidates, horizon, config) {
            if f.rho < decision.predicted_max_rho.unwrap_or(f64::INFINITY) {
                decision = Decision {
                    insufficient: f.rho > 1.0,
                    predicted_max_rho: Some(f.rho),
                    action: f.action,
                    kind: DecisionKind::Composite,
                    status: status.clone(),
                };
            }
        }
    }

    let deliberation = Deliberation {
        search: found,
        redispatch: redispatch_result,
        baseline_rho,
        topology_rho: topo.map(|o| o.rho),
        redispatch_rho: redisp.map(|o| o.rho),
        selection,
    };
    (decision, Some(deliberation))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::RedispatchOrder;
    use crate::engine::step;
    use crate::fixtures;
    use crate::topology::Busbar;

    fn row(load: f64, wind: f64) -> ChronicRow {
        ChronicRow {
            load: vec![load],
            gen: vec![0.0, wind, 0.0],
        }
    }

    #[test]
    fn alpha_endpoints_and_scoring() {
        assert_eq!(alpha_select(Some(0.8), Some(1.1), 1.2, 0.0), Selection::Redispatch);
        assert_eq!(alpha_select(Some(1.1), Some(0.8), 1.2, 1.0), Selection::Topology);
        assert_eq!(alpha_select(Some(1.0), Some(1.1), 1.2, 0.5), Selection::Topology);
        assert_eq!(alpha_select(Some(1.1), Some(1.1), 1.2, 0.5), Selection::Redispatch);
        assert_eq!(alpha_select(None, Some(1.1), 1.2, 1.0), Selection::Neither);
        assert_eq!(alpha_select(None, None, 1.2, 0.3), Selection::Neither);
        assert_eq!(alpha_select(Some(1.1), None, 1.2, 0.3), Selection::Topology);
    }

    #[test]
    fn observer_levels() {
        let grid = fixtures::t3g3();
        let cfg = EngineConfig::default();
        let calm = GridState::initial(&grid, &row(100.0, 100.0), 0);
        let st = observe(&grid, &calm, &[row(100.0, 100.0), row(100.0, 100.0), row(100.0, 100.0)], &cfg);
        assert_eq!(st.level, StatusLevel::Safe);
        // L13 carries 2/3 of the 135 MW delivered over the two paths at step 2.
        let st = observe(&grid, &calm, &[row(100.0, 100.0), row(230.0, 100.0), row(100.0, 100.0)], &cfg);
        assert_eq!(st.level, StatusLevel::Alert);
        assert!(st.triggers.iter().all(|t| t.step == 2));
        let hot = GridState::initial(&grid, &row(200.0, 100.0), 0);
        assert_eq!(observe(&grid, &hot, &[row(200.0, 100.0)], &cfg).level, StatusLevel::Critical);
    }

    #[test]
    fn safe_at_reference_is_noop() {
        let grid = fixtures::t3g3();
        let cfg = EngineConfig::default();
        let s = GridState::initial(&grid, &row(100.0, 100.0), 0);
        let d = decide(&grid, &s, &[row(100.0, 100.0), row(100.0, 100.0), row(100.0, 100.0)], &cfg);
        assert_eq!((d.kind, d.action), (DecisionKind::Skip, Action::NoOp));
    }

    #[test]
    fn alpha_endpoints_stay_pure() {
        let grid = fixtures::t3g3();
        let s = GridState::initial(&grid, &row(200.0, 100.0), 0);
        let fc = vec![row(200.0, 100.0); 3];
        let mut cfg = EngineConfig::default();
        cfg.agent.alpha = 0.0;
        let d = decide(&grid, &s, &fc, &cfg);
        assert!(d.action.topology().is_none(), "{:?}", d.action);
        assert_eq!(d.kind, DecisionKind::Redispatch);
        cfg.agent.alpha = 1.0;
        let d = decide(&grid, &s, &fc, &cfg);
        assert!(d.action.redispatch().is_none(), "{:?}", d.action);
    }

    #[test]
    fn safe_state_resets_before_recovering() {
        let grid = fixtures::t3g3();
        let cfg = EngineConfig::default();
        let r = row(80.0, 60.0);
        let s0 = GridState::initial(&grid, &r, 0);
        let split = Action::Composite {
            topology: TopologyAction::SetSubstation {
                substation: 2,
                buses: vec![(Endpoint::LineTo(2), Busbar::Two), (Endpoint::Generator(2), Busbar::Two)],
            },
            redispatch: RedispatchOrder {
                delta: vec![(2, 20.0)],
                curtail: vec![],
            },
        };
        let mut s = step(&grid, &s0, &split, &r, &cfg);
        assert!(s.is_redispatched());
        let mut kinds = Vec::new();
        for _ in 0..6 {
            let d = decide(&grid, &s, &[r.clone(), r.clone(), r.clone()], &cfg);
            kinds.push(d.kind);
            s = step(&grid, &s, &d.action, &r, &cfg);
        }
        assert_eq!(kinds[0], DecisionKind::Reset);
        assert!(kinds.contains(&DecisionKind::Recovery));
        assert_eq!(s.topology, grid.reference_topology);
        assert!(!s.is_redispatched());
    }
}
