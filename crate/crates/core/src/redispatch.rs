//! PTDF-based redispatch and curtailment.
//!
//! The optimizer works on one or more predicted states sharing the same
//! decision: a change `Δ_g` of every non-slack dispatchable generator and,
//! optionally, a curtailment `c_r ≥ 0` of every renewable. The slack absorbs
//! the imbalance `−ΣΔ + Σc`. Line flows respond linearly:
//!
//! ```text
//! f'_l = f_l + Σ_g PTDF[l, node(g)] Δ_g − Σ_r PTDF[l, node(r)] c_r
//! ```
//!
//! Phase 1 minimizes `t ≥ 1` subject to `|f'_l| ≤ t · limit_l` on every line
//! and scenario, so any loading up to 1.0 counts as relieved. Phase 2 keeps
//! `t` at its optimum and minimizes the total adjustment
//! `Σ w_g |Δ_g| + |slack change| + penalty · Σ c_r`, where the weights `w_g`
//! grow very slightly with generator index so that ties go to the lowest id.

use microlp::{ComparisonOp, OptimizationDirection, Problem, SolveOutcome, Variable};
use serde::{Deserialize, Serialize};

use crate::action::{Action, RedispatchOrder, TopologyAction};
use crate::chronics::ChronicRow;
use crate::config::EngineConfig;
use crate::engine::{simulate_horizon, GridState};
use crate::error::{Error, Result};
use crate::flow::{ptdf, Ptdf};
use crate::grid::Grid;

/// Predicted loading above 1 by more than this flags the result insufficient;
/// the margin absorbs simplex round-off.
const RELIEF_TOLERANCE: f64 = 1e-6;
/// Room given to `t` above its phase-1 optimum during phase 2.
const PHASE_TWO_SLACK: f64 = 1e-10;
const TIE_WEIGHT: f64 = 1e-6;
const ZERO: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RedispatchOptions {
    pub curtailment: bool,
    /// Cost of one MW of curtailment relative to one MW of redispatch.
    pub curtailment_penalty: f64,
}

impl Default for RedispatchOptions {
    fn default() -> Self {
        RedispatchOptions {
            curtailment: false,
            curtailment_penalty: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedispatchResult {
    /// Deltas of the non-slack generators, followed by the slack's implied
    /// change (informational), and curtailment caps.
    pub order: RedispatchOrder,
    pub slack_delta: f64,
    /// Worst loading over all scenarios after the adjustment (linear prediction).
    pub predicted_max_rho: f64,
    /// Σ|Δ| including the slack's implied change, MW.
    pub total_abs_delta: f64,
    pub curtailment_mw: f64,
    /// The adjustment cannot bring every line to ρ ≤ 1.
    pub insufficient: bool,
}

impl RedispatchResult {
    pub fn action(&self) -> Action {
        if self.order.is_empty() {
            Action::NoOp
        } else {
            Action::Redispatch(self.order.clone())
        }
    }
}

struct Scenario<'a> {
    state: &'a GridState,
    ptdf: std::rc::Rc<Ptdf>,
}

/// Relieves the congestion of `state` itself.
pub fn optimize_redispatch(grid: &Grid, state: &GridState) -> Result<RedispatchResult> {
    optimize_over(grid, std::slice::from_ref(state), RedispatchOptions::default())
}

/// [`optimize_redispatch`] with curtailment variables available.
pub fn curtailment_fallback(grid: &Grid, state: &GridState, penalty: f64) -> Result<RedispatchResult> {
    optimize_over(
        grid,
        std::slice::from_ref(state),
        RedispatchOptions {
            curtailment: true,
            curtailment_penalty: penalty,
        },
    )
}

/// One decision valid for every state in `scenarios` (typically the predicted
/// `NoOp` trajectory over the forecast horizon). Each Δ is bounded by the
/// generator's ramp and by its limits in every scenario.
pub fn optimize_over(
    grid: &Grid,
    scenarios: &[GridState],
    options: RedispatchOptions,
) -> Result<RedispatchResult> {
    if scenarios.is_empty() {
        return Err(Error::Invalid("redispatch needs at least one scenario".into()));
    }
    let mut prepared: Vec<Scenario> = Vec::with_capacity(scenarios.len());
    for s in scenarios {
        if let Err(d) = &s.solution {
            return Err(Error::Diverged(d.clone()));
        }
        let reuse = prepared
            .last()
            .filter(|p| p.state.topology == s.topology)
            .map(|p| p.ptdf.clone());
        let ptdf = match reuse {
            Some(p) => p,
            None => std::rc::Rc::new(ptdf(grid, &s.topology)?),
        };
        prepared.push(Scenario { state: s, ptdf });
    }

    let gens: Vec<usize> = grid.free_dispatchables().collect();
    let rens: Vec<usize> = if options.curtailment {
        grid.renewables().collect()
    } else {
        Vec::new()
    };
    let slack = &grid.generators[grid.slack];

    // Decision bounds.
    let gen_bounds: Vec<(f64, f64)> = gens
        .iter()
        .map(|&g| {
            let gen = &grid.generators[g];
            let mut lo = -gen.ramp;
            let mut hi = gen.ramp;
            for s in scenarios {
                lo = lo.max(gen.p_min - s.dispatch[g]);
                hi = hi.min(gen.p_max - s.dispatch[g]);
            }
            (lo.min(0.0), hi.max(0.0))
        })
        .collect();
    let ren_max: Vec<f64> = rens
        .iter()
        .map(|&r| {
            scenarios
                .iter()
                .map(|s| s.dispatch[r])
                .fold(f64::INFINITY, f64::min)
                .max(0.0)
        })
        .collect();
    let mut slack_lo = f64::NEG_INFINITY;
    let mut slack_hi = f64::INFINITY;
    for s in scenarios {
        slack_lo = slack_lo.max(slack.p_min - s.dispatch[grid.slack]);
        slack_hi = slack_hi.min(slack.p_max - s.dispatch[grid.slack]);
    }
    let (slack_lo, slack_hi) = (slack_lo.min(0.0), slack_hi.max(0.0));

    // Sensitivity rows of lines that can reach t ≥ 1.
    struct Row {
        flow: f64,
        limit: f64,
        gen: Vec<f64>,
        ren: Vec<f64>,
    }
    let mut rows: Vec<Row> = Vec::new();
    for sc in &prepared {
        let sol = sc.state.flow().expect("checked above");
        let graph = &sc.ptdf.graph;
        let coeff = |l: usize, g: usize| -> f64 {
            if sol.shed_generators.contains(&g) {
                0.0
            } else {
                sc.ptdf.get(l, graph.gen_node[g])
            }
        };
        for (l, line) in grid.lines.iter().enumerate() {
            if !sc.state.topology.line_in_service[l] {
                continue;
            }
            let gen: Vec<f64> = gens.iter().map(|&g| coeff(l, g)).collect();
            let ren: Vec<f64> = rens.iter().map(|&r| coeff(l, r)).collect();
            let reach = sol.flows[l].abs()
                + gen
                    .iter()
                    .zip(&gen_bounds)
                    .map(|(a, (lo, hi))| a.abs() * lo.abs().max(hi.abs()))
                    .sum::<f64>()
                + ren.iter().zip(&ren_max).map(|(a, m)| a.abs() * m).sum::<f64>();
            if reach <= line.thermal_limit {
                continue;
            }
            rows.push(Row {
                flow: sol.flows[l],
                limit: line.thermal_limit,
                gen,
                ren,
            });
        }
    }

    let (delta, curtail) = if rows.is_empty() {
        (vec![0.0; gens.len()], vec![0.0; rens.len()])
    } else {
        // Phase 1.
        let mut p1 = Problem::new(OptimizationDirection::Minimize);
        let dv: Vec<Variable> = gen_bounds.iter().map(|&b| p1.add_var(0.0, b)).collect();
        let cv: Vec<Variable> = ren_max.iter().map(|&m| p1.add_var(0.0, (0.0, m))).collect();
        let t = p1.add_var(1.0, (1.0, f64::INFINITY));
        add_balance(&mut p1, &dv, &cv, slack_lo, slack_hi);
        for row in &rows {
            add_line(&mut p1, row.flow, row.limit, &row.gen, &row.ren, &dv, &cv, t);
        }
        let t_star = solve(&p1)?.objective();

        // Phase 2.
        let mut p2 = Problem::new(OptimizationDirection::Minimize);
        let mut dv = Vec::with_capacity(gens.len());
        let mut parts = Vec::with_capacity(gens.len());
        for (k, &(lo, hi)) in gen_bounds.iter().enumerate() {
            let w = 1.0 + TIE_WEIGHT * k as f64;
            let up = p2.add_var(w, (0.0, hi));
            let down = p2.add_var(w, (0.0, -lo));
            let d = p2.add_var(0.0, (lo, hi));
            p2.add_constraint([(d, 1.0), (up, -1.0), (down, 1.0)], ComparisonOp::Eq, 0.0);
            dv.push(d);
            parts.push((up, down));
        }
        let cv: Vec<Variable> = ren_max
            .iter()
            .map(|&m| p2.add_var(options.curtailment_penalty, (0.0, m)))
            .collect();
        let t = p2.add_var(0.0, (1.0, t_star.max(1.0) + PHASE_TWO_SLACK));
        // u ≥ |−ΣΔ + Σc|
        let u = p2.add_var(1.0, (0.0, f64::INFINITY));
        let imbalance = |sign: f64| {
            let mut e: Vec<(Variable, f64)> = vec![(u, 1.0)];
            e.extend(dv.iter().map(|&d| (d, sign)));
            e.extend(cv.iter().map(|&c| (c, -sign)));
            e
        };
        p2.add_constraint(imbalance(1.0), ComparisonOp::Ge, 0.0);
        p2.add_constraint(imbalance(-1.0), ComparisonOp::Ge, 0.0);
        add_balance(&mut p2, &dv, &cv, slack_lo, slack_hi);
        for row in &rows {
            add_line(&mut p2, row.flow, row.limit, &row.gen, &row.ren, &dv, &cv, t);
        }
        let sol = solve(&p2)?;
        let clean = |x: f64| if x.abs() < ZERO { 0.0 } else { x };
        (
            dv.iter().map(|&d| clean(sol.var_value(d))).collect::<Vec<_>>(),
            cv.iter().map(|&c| clean(sol.var_value(c))).collect::<Vec<_>>(),
        )
    };

    let slack_delta = -delta.iter().sum::<f64>() + curtail.iter().sum::<f64>();
    let slack_delta = if slack_delta.abs() < ZERO { 0.0 } else { slack_delta };

    // Linear prediction on every line and scenario.
    let mut predicted_max_rho: f64 = 0.0;
    for sc in &prepared {
        let sol = sc.state.flow().expect("checked above");
        let graph = &sc.ptdf.graph;
        for (l, line) in grid.lines.iter().enumerate() {
            if !sc.state.topology.line_in_service[l] {
                continue;
            }
            let mut f = sol.flows[l];
            for (k, &g) in gens.iter().enumerate() {
                if !sol.shed_generators.contains(&g) {
                    f += sc.ptdf.get(l, graph.gen_node[g]) * delta[k];
                }
            }
            for (k, &r) in rens.iter().enumerate() {
                if !sol.shed_generators.contains(&r) {
                    f -= sc.ptdf.get(l, graph.gen_node[r]) * curtail[k];
                }
            }
            predicted_max_rho = predicted_max_rho.max(f.abs() / line.thermal_limit);
        }
    }

    let mut order = RedispatchOrder::default();
    for (k, &g) in gens.iter().enumerate() {
        if delta[k] != 0.0 {
            order.delta.push((g, delta[k]));
        }
    }
    if slack_delta != 0.0 {
        order.delta.push((grid.slack, slack_delta));
        order.delta.sort_by_key(|(g, _)| *g);
    }
    for (k, &r) in rens.iter().enumerate() {
        if curtail[k] > 0.0 {
            order.curtail.push((r, Some(scenarios[0].dispatch[r] - curtail[k])));
        }
    }
    Ok(RedispatchResult {
        total_abs_delta: delta.iter().map(|d| d.abs()).sum::<f64>() + slack_delta.abs(),
        curtailment_mw: curtail.iter().sum(),
        insufficient: predicted_max_rho > 1.0 + RELIEF_TOLERANCE,
        slack_delta,
        predicted_max_rho,
        order,
    })
}

fn add_balance(p: &mut Problem, dv: &[Variable], cv: &[Variable], lo: f64, hi: f64) {
    if dv.is_empty() && cv.is_empty() {
        return;
    }
    // slack change = −ΣΔ + Σc ∈ [lo, hi]
    let expr: Vec<(Variable, f64)> = dv
        .iter()
        .map(|&d| (d, -1.0))
        .chain(cv.iter().map(|&c| (c, 1.0)))
        .collect();
    if lo.is_finite() {
        p.add_constraint(expr.clone(), ComparisonOp::Ge, lo);
    }
    if hi.is_finite() {
        p.add_constraint(expr, ComparisonOp::Le, hi);
    }
}

#[allow(clippy::too_many_arguments)]
fn add_line(
    p: &mut Problem,
    flow: f64,
    limit: f64,
    gen: &[f64],
    ren: &[f64],
    dv: &[Variable],
    cv: &[Variable],
    t: Variable,
) {
    let mut expr: Vec<(Variable, f64)> = Vec::with_capacity(dv.len() + cv.len() + 1);
    expr.extend(dv.iter().zip(gen).filter(|(_, a)| **a != 0.0).map(|(&d, &a)| (d, a)));
    expr.extend(cv.iter().zip(ren).filter(|(_, a)| **a != 0.0).map(|(&c, &a)| (c, -a)));
    let mut upper = expr.clone();
    upper.push((t, -limit));
    p.add_constraint(upper, ComparisonOp::Le, -flow);
    expr.push((t, limit));
    p.add_constraint(expr, ComparisonOp::Ge, -flow);
}

fn solve(p: &Problem) -> Result<microlp::Solution> {
    match p.solve() {
        Ok(SolveOutcome::Solution(s)) => Ok(s),
        Ok(SolveOutcome::Interrupted(_)) => Err(Error::Invalid("redispatch LP interrupted".into())),
        Err(e) => Err(Error::Invalid(format!("redispatch LP failed: {e}"))),
    }
}

/// A topology action paired with the redispatch optimized for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositePlan {
    pub action: Action,
    pub redispatch: RedispatchResult,
}

/// Simulates `topology` over the forecast, then optimizes redispatch on the
/// resulting states.
pub fn optimize_for_topology(
    grid: &Grid,
    state: &GridState,
    topology: &TopologyAction,
    forecast: &[ChronicRow],
    config: &EngineConfig,
    options: RedispatchOptions,
) -> Result<CompositePlan> {
    let traj = simulate_horizon(grid, state, &Action::Topology(topology.clone()), forecast, config);
    if let Some(bad) = traj.iter().find(|s| s.blackout) {
        let err = bad.solution.clone().expect_err("blackout implies divergence");
        return Err(Error::Diverged(err));
    }
    let redispatch = optimize_over(grid, &traj, options)?;
    Ok(CompositePlan {
        action: Action::Composite {
            topology: topology.clone(),
            redispatch: redispatch.order.clone(),
        },
        redispatch,
    })
}

/// Relieves the predicted `NoOp` trajectory over the forecast horizon.
pub fn optimize_for_forecast(
    grid: &Grid,
    state: &GridState,
    forecast: &[ChronicRow],
    config: &EngineConfig,
    options: RedispatchOptions,
) -> Result<RedispatchResult> {
    let traj = simulate_horizon(grid, state, &Action::NoOp, forecast, config);
    if let Some(bad) = traj.iter().find(|s| s.blackout) {
        return Err(Error::Diverged(bad.solution.clone().expect_err("blackout")));
    }
    optimize_over(grid, &traj, options)
}

/// One ramp-limited move of every deviated generator back toward plan, with
/// curtailment caps lifted. Withheld (`NoOp`) when the simulated horizon
/// would reach the alert threshold.
pub fn redispatch_reset_step(grid: &Grid, state: &GridState, forecast: &[ChronicRow], config: &EngineConfig) -> Action {
    let order = reset_order(grid, state);
    if order.is_empty() {
        return Action::NoOp;
    }
    let action = Action::Redispatch(order);
    let traj = simulate_horizon(grid, state, &action, forecast, config);
    let worst = traj.iter().map(GridState::max_rho).fold(0.0, f64::max);
    if worst >= config.agent.alert_threshold {
        Action::NoOp
    } else {
        action
    }
}

/// The unconditional reset move (no safety simulation).
pub fn reset_order(grid: &Grid, state: &GridState) -> RedispatchOrder {
    let mut order = RedispatchOrder::default();
    for g in grid.free_dispatchables() {
        let dev = state.deviation[g];
        if dev != 0.0 {
            let step = dev.abs().min(grid.generators[g].ramp);
            if step > 0.0 {
                order.delta.push((g, -dev.signum() * step));
            }
        }
    }
    for (g, cap) in state.curtail_caps.iter().enumerate() {
        if cap.is_some() {
            order.curtail.push((g, None));
        }
    }
    order
}
