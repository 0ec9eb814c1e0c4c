//! Topology candidates, heuristic prior, simulation-guided search and
//! topology recovery.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::{Action, TopologyAction};
use crate::chronics::ChronicRow;
use crate::config::{EngineConfig, SearchConfig, SearchObjective};
use crate::engine::{check_action, simulate, simulate_horizon, GridState};
use crate::flow::ptdf;
use crate::grid::Grid;
use crate::topology::{local_assignment_is_legal, Busbar, Endpoint};

/// Substations with fewer connected elements are not split.
pub const MIN_SPLIT_ELEMENTS: usize = 4;

/// Endpoints at a substation that take part in a split: injections and the
/// ends of in-service lines, in canonical order.
pub fn connected_elements(grid: &Grid, state: &GridState, substation: usize) -> Vec<Endpoint> {
    let mut out: Vec<Endpoint> = grid.endpoints_by_substation()[substation]
        .iter()
        .copied()
        .filter(|e| state.topology.is_connected(*e))
        .collect();
    out.sort();
    out
}

/// All legal unitary topology actions from `state`.
///
/// Per actionable substation: every two-busbar assignment of its connected
/// elements with the first element pinned to busbar 1, except the current
/// one. Plus reconnection of every disconnected line whose cooldown expired.
pub fn enumerate_candidates(grid: &Grid, state: &GridState) -> Vec<TopologyAction> {
    let by_sub = grid.endpoints_by_substation();
    let mut out = Vec::new();
    for (s, endpoints) in by_sub.iter().enumerate() {
        if state.substation_cooldowns[s] > 0 {
            continue;
        }
        let elems: Vec<Endpoint> = endpoints
            .iter()
            .copied()
            .filter(|e| state.topology.is_connected(*e))
            .collect();
        let n = elems.len();
        if n < MIN_SPLIT_ELEMENTS {
            continue;
        }
        // Current assignment in pinned form.
        let flip = state.topology.bus(elems[0]) == Busbar::Two;
        let current: u64 = elems[1..].iter().enumerate().fold(0, |m, (i, e)| {
            let on_two = (state.topology.bus(*e) == Busbar::Two) != flip;
            m | ((on_two as u64) << i)
        });
        let mut buses = vec![Busbar::One; n];
        for mask in 0..(1u64 << (n - 1)) {
            if mask == current {
                continue;
            }
            for (i, b) in buses.iter_mut().enumerate().skip(1) {
                *b = if mask >> (i - 1) & 1 == 1 { Busbar::Two } else { Busbar::One };
            }
            if !local_assignment_is_legal(&elems, &buses) {
                continue;
            }
            out.push(TopologyAction::SetSubstation {
                substation: s,
                buses: elems.iter().copied().zip(buses.iter().copied()).collect(),
            });
        }
    }
    for l in 0..grid.lines.len() {
        if !state.topology.line_in_service[l] && state.line_cooldowns[l] == 0 {
            out.push(TopologyAction::SetLineStatus { line: l, in_service: true });
        }
    }
    out
}

/// PTDF-sensitivity prior in `[0, 1]`, one score per candidate.
///
/// Each line of `state` loaded at or above `threshold` is a target. A
/// substation split is scored by how strongly the target flows react to a
/// transfer between the split substation and the far end of every line
/// moved to busbar 2; a reconnection by the sensitivity to a transfer between
/// the line's own ends. Scores are divided by the largest one.
pub fn prior_rank(grid: &Grid, state: &GridState, candidates: &[TopologyAction], threshold: f64) -> Vec<f64> {
    let mut scores = vec![0.0; candidates.len()];
    let Some(sol) = state.flow() else {
        return scores;
    };
    let targets: Vec<(usize, f64)> = sol
        .rho
        .iter()
        .enumerate()
        .filter(|(_, r)| **r >= threshold)
        .map(|(l, r)| (l, *r))
        .collect();
    if targets.is_empty() || candidates.is_empty() {
        return scores;
    }
    let Ok(p) = ptdf(grid, &state.topology) else {
        return scores;
    };
    let g = &p.graph;
    for (score, cand) in scores.iter_mut().zip(candidates) {
        let mut sum = 0.0;
        match cand {
            TopologyAction::SetSubstation { buses, .. } => {
                for &(e, b) in buses {
                    if b != Busbar::Two {
                        continue;
                    }
                    let (near, far) = match e {
                        Endpoint::LineFrom(k) => (g.line_from_node[k], g.line_to_node[k]),
                        Endpoint::LineTo(k) => (g.line_to_node[k], g.line_from_node[k]),
                        _ => continue,
                    };
                    if let (Some(a), Some(b)) = (near, far) {
                        for &(l, rho) in &targets {
                            sum += rho * p.transfer(l, a, b).abs();
                        }
                    }
                }
            }
            TopologyAction::SetLineStatus { line: k, .. } => {
                let line = &grid.lines[*k];
                let a = g.find(line.from, state.topology.bus(Endpoint::LineFrom(*k)));
                let b = g.find(line.to, state.topology.bus(Endpoint::LineTo(*k)));
                if let (Some(a), Some(b)) = (a, b) {
                    for &(l, rho) in &targets {
                        sum += rho * p.transfer(l, a, b).abs();
                    }
                }
            }
        }
        *score = sum;
    }
    let max = scores.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        for s in &mut scores {
            *s /= max;
        }
    }
    scores
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionCandidate {
    pub action: Action,
    pub canonical_id: String,
    pub prior_score: f64,
    /// Max ρ per simulated forecast step.
    pub predicted_max_rho: Vec<f64>,
    /// Search objective (lower is better).
    pub objective: f64,
    /// 1-based position in the returned list.
    pub rank: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchVerdict {
    /// At least one candidate beats doing nothing.
    ActionsFound,
    /// Doing nothing keeps the grid below the alert threshold, or no
    /// candidate beats it.
    NoActionNeeded,
    /// No candidate exists or every one was rejected or diverged.
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub verdict: SearchVerdict,
    /// Strictly better than the baseline, best first; at most `k`.
    pub candidates: Vec<ActionCandidate>,
    pub baseline_max_rho: Vec<f64>,
    pub baseline_objective: f64,
    /// The wall-clock budget expired before every candidate was simulated.
    pub truncated: bool,
    pub evaluated: usize,
    pub enumerated: usize,
}

fn objective(kind: SearchObjective, traj: &[GridState]) -> f64 {
    match kind {
        SearchObjective::WorstMaxRho => traj.iter().map(GridState::max_rho).fold(0.0, f64::max),
        SearchObjective::CumulativeOverflow => traj
            .iter()
            .map(|s| {
                if s.blackout {
                    f64::INFINITY
                } else {
                    s.rho().iter().map(|r| (r - 1.0).max(0.0)).sum::<f64>()
                }
            })
            .sum(),
    }
}

struct Node {
    action: TopologyAction,
    id: String,
    prior: f64,
    traj: Vec<GridState>,
}

/// Depth-limited simulation search over unitary topology actions.
///
/// Level 1 simulates every candidate on the first forecast row, in prior
/// order, in chunks checked against the budget. The best `max(beam, k)`
/// continue with `NoOp` (and optionally the best follow-up actions) until
/// `depth` steps are simulated. Candidates that are rejected or black out
/// the grid are dropped.
pub fn search(
    grid: &Grid,
    state: &GridState,
    forecast: &[ChronicRow],
    search: &SearchConfig,
    config: &EngineConfig,
) -> SearchResult {
    let started = Instant::now();
    let depth = search.depth.min(forecast.len()).max(1);
    let forecast = &forecast[..depth.min(forecast.len())];
    let threshold = config.agent.alert_threshold;

    let baseline = simulate_horizon(grid, state, &Action::NoOp, forecast, config);
    let baseline_objective = objective(search.objective, &baseline);
    let baseline_max_rho: Vec<f64> = baseline.iter().map(GridState::max_rho).collect();

    let candidates = enumerate_candidates(grid, state);
    let enumerated = candidates.len();
    let prior_state = baseline
        .iter()
        .chain(std::iter::once(state))
        .filter(|s| !s.blackout)
        .max_by(|a, b| a.max_rho().total_cmp(&b.max_rho()))
        .unwrap_or(state);
    let priors = prior_rank(grid, prior_state, &candidates, threshold.min(1.0));
    let mut order: Vec<(TopologyAction, String, f64)> = candidates
        .into_iter()
        .zip(priors)
        .map(|(a, p)| {
            let id = a.canonical_id(grid);
            (a, id, p)
        })
        .collect();
    order.sort_by(|a, b| b.2.total_cmp(&a.2).then_with(|| a.1.cmp(&b.1)));

    // Level 1.
    let budget = search.budget();
    let mut truncated = false;
    let mut evaluated = 0;
    let mut level: Vec<Node> = Vec::new();
    let Some(first_row) = forecast.first() else {
        return SearchResult {
            verdict: SearchVerdict::Empty,
            candidates: vec![],
            baseline_max_rho,
            baseline_objective,
            truncated,
            evaluated,
            enumerated,
        };
    };
    for chunk in order.chunks(search.chunk) {
        if let Some(b) = budget {
            if started.elapsed() >= b {
                truncated = true;
                break;
            }
        }
        let sims: Vec<Option<Node>> = chunk
            .par_iter()
            .map(|(a, id, p)| {
                let action = Action::Topology(a.clone());
                let s = simulate(grid, state, &action, first_row, config);
                if s.blackout || s.report.rejection.is_some() {
                    return None;
                }
                Some(Node {
                    action: a.clone(),
                    id: id.clone(),
                    prior: *p,
                    traj: vec![s],
                })
            })
            .collect();
        evaluated += chunk.len();
        level.extend(sims.into_iter().flatten());
    }
    if level.is_empty() {
        return SearchResult {
            verdict: SearchVerdict::Empty,
            candidates: vec![],
            baseline_max_rho,
            baseline_objective,
            truncated,
            evaluated,
            enumerated,
        };
    }
    let sort = |nodes: &mut Vec<Node>| {
        nodes.sort_by(|a, b| {
            objective(search.objective, &a.traj)
                .total_cmp(&objective(search.objective, &b.traj))
                .then_with(|| a.id.cmp(&b.id))
        })
    };
    sort(&mut level);
    level.truncate(search.beam.max(search.k));

    // Deeper levels.
    for row in &forecast[1..] {
        level = level
            .into_par_iter()
            .map(|mut node| {
                let last = node.traj.last().expect("non-empty");
                let mut best = simulate(grid, last, &Action::NoOp, row, config);
                if search.followups > 0 && !last.blackout {
                    let follow = enumerate_candidates(grid, last);
                    let pri = prior_rank(grid, last, &follow, threshold.min(1.0));
                    let mut idx: Vec<usize> = (0..follow.len()).collect();
                    idx.sort_by(|&a, &b| pri[b].total_cmp(&pri[a]));
                    for &i in idx.iter().take(search.followups) {
                        let s = simulate(grid, last, &Action::Topology(follow[i].clone()), row, config);
                        if s.report.rejection.is_none() && s.max_rho() < best.max_rho() {
                            best = s;
                        }
                    }
                }
                node.traj.push(best);
                node
            })
            .collect();
        level.retain(|n| !n.traj.iter().any(|s| s.blackout));
    }
    sort(&mut level);

    let mut ranked: Vec<ActionCandidate> = level
        .into_iter()
        .filter(|n| objective(search.objective, &n.traj) < baseline_objective)
        .take(search.k)
        .map(|n| ActionCandidate {
            objective: objective(search.objective, &n.traj),
            predicted_max_rho: n.traj.iter().map(GridState::max_rho).collect(),
            action: Action::Topology(n.action),
            canonical_id: n.id,
            prior_score: n.prior,
            rank: 0,
        })
        .collect();
    for (i, c) in ranked.iter_mut().enumerate() {
        c.rank = i + 1;
    }
    let baseline_safe = baseline_max_rho.iter().all(|r| *r < threshold);
    let verdict = if ranked.is_empty() || baseline_safe {
        SearchVerdict::NoActionNeeded
    } else {
        SearchVerdict::ActionsFound
    };
    SearchResult {
        verdict,
        candidates: ranked,
        baseline_max_rho,
        baseline_objective,
        truncated,
        evaluated,
        enumerated,
    }
}

/// Moves that bring the topology closer to the reference, largest distance
/// reduction first: one per displaced substation (all its displaced
/// endpoints back to busbar 1) and one per disconnected line.
pub fn recovery_moves(grid: &Grid, state: &GridState) -> Vec<(usize, TopologyAction)> {
    let mut moves: Vec<(usize, String, TopologyAction)> = Vec::new();
    let by_sub = grid.endpoints_by_substation();
    for (s, endpoints) in by_sub.iter().enumerate() {
        let displaced = endpoints
            .iter()
            .filter(|e| state.topology.bus(**e) != grid.reference_topology.bus(**e))
            .count();
        if displaced > 0 {
            let a = TopologyAction::SetSubstation {
                substation: s,
                buses: endpoints.iter().map(|e| (*e, grid.reference_topology.bus(*e))).collect(),
            };
            moves.push((displaced, a.canonical_id(grid), a));
        }
    }
    for l in 0..grid.lines.len() {
        if state.topology.line_in_service[l] != grid.reference_topology.line_in_service[l] {
            let a = TopologyAction::SetLineStatus {
                line: l,
                in_service: grid.reference_topology.line_in_service[l],
            };
            moves.push((1, a.canonical_id(grid), a));
        }
    }
    moves.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    moves.into_iter().map(|(d, _, a)| (d, a)).collect()
}

/// The first recovery move (largest distance reduction first) that passes
/// the cooldown and busbar checks and keeps the simulated horizon below the
/// alert threshold; `NoOp` if there is none.
pub fn recovery_step(grid: &Grid, state: &GridState, forecast: &[ChronicRow], config: &EngineConfig) -> Action {
    for (_, mv) in recovery_moves(grid, state) {
        let action = Action::Topology(mv);
        if check_action(grid, state, &action).is_err() {
            continue;
        }
        let traj = simulate_horizon(grid, state, &action, forecast, config);
        let worst = traj.iter().map(GridState::max_rho).fold(0.0, f64::max);
        if worst < config.agent.alert_threshold {
            return action;
        }
    }
    Action::NoOp
}
