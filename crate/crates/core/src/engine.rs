//! Time-stepping simulation: dispatch update, load flow, overload protection,
//! cooldowns and blackout detection.
//!
//! One call to [`step`] advances the grid by one 5-minute interval:
//!
//! 1. the action is checked (cooldowns, busbar rules); an illegal action is
//!    replaced by `NoOp` and the rejection recorded;
//! 2. loads and renewable availability are taken from the chronic row,
//!    curtailment caps applied and redispatch deltas (clipped to ramps and
//!    limits) added to the generators' deviation targets; the slack balances;
//! 3. the load flow is solved on the new topology;
//! 4. overload protection disconnects lines that stayed overloaded too long
//!    or exceed the hard limit, re-solving until no further line trips;
//! 5. cooldowns are set on tripped lines and reconfigured substations;
//! 6. a diverged flow marks the state as blacked out.
//!
//! [`simulate`] runs the same code on a copy.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::action::{Action, TopologyAction};
use crate::chronics::ChronicRow;
use crate::config::{EngineConfig, ProtectionConfig};
use crate::flow::{dc_solve, Diverged, FlowSolution, Injections};
use crate::grid::{GenKind, Grid};
use crate::topology::{topology_distance, validate_topology, Endpoint, TopologyState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Rejection {
    SubstationCooldown { substation: String, remaining: u32 },
    LineCooldown { line: String, remaining: u32 },
    BusbarRule { detail: String },
    Ramp { generator: String, requested: f64, ramp: f64 },
    Blackout,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rejection::SubstationCooldown { substation, remaining } => {
                write!(f, "cooldown: {remaining} steps remaining (substation {substation})")
            }
            Rejection::LineCooldown { line, remaining } => {
                write!(f, "cooldown: {remaining} steps remaining (line {line})")
            }
            Rejection::BusbarRule { detail } => write!(f, "busbar rule: {detail}"),
            Rejection::Ramp { generator, requested, ramp } => {
                write!(f, "ramp: {generator} requested {requested:+} MW, ramp limit {ramp} MW")
            }
            Rejection::Blackout => write!(f, "grid is blacked out"),
        }
    }
}

/// What happened during the step that produced a state.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    /// Action actually executed (`NoOp` when the request was rejected).
    pub applied: Action,
    pub rejection: Option<Rejection>,
    /// Clipping and other non-fatal adjustments.
    pub notes: Vec<String>,
    /// Lines disconnected by protection, in trip order.
    pub tripped_lines: Vec<usize>,
    /// Endpoints moved to another busbar by the applied action.
    pub switched_endpoints: usize,
    /// Cascade iterations needed before the flow settled.
    pub cascade_rounds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridState {
    /// Index of the chronic row this state reflects.
    pub step: usize,
    pub topology: TopologyState,
    /// Output per generator, MW. Renewables after curtailment; slack after balancing.
    pub dispatch: Vec<f64>,
    /// Planned dispatch per generator; renewable availability for wind/solar.
    pub planned: Vec<f64>,
    pub load: Vec<f64>,
    /// Redispatch target per generator (deviation from plan, MW). Always zero
    /// for the slack and renewables.
    pub deviation: Vec<f64>,
    pub curtail_caps: Vec<Option<f64>>,
    pub solution: Result<FlowSolution, Diverged>,
    pub overflow_timers: Vec<u32>,
    pub line_cooldowns: Vec<u32>,
    pub substation_cooldowns: Vec<u32>,
    pub blackout: bool,
    pub report: StepReport,
}

impl GridState {
    /// State at chronic row `step`, reference topology, dispatch at plan.
    pub fn initial(grid: &Grid, row: &ChronicRow, step: usize) -> GridState {
        let topology = grid.reference_topology.clone();
        let ng = grid.generators.len();
        let mut state = GridState {
            step,
            topology,
            dispatch: vec![0.0; ng],
            planned: row.gen.clone(),
            load: row.load.clone(),
            deviation: vec![0.0; ng],
            curtail_caps: vec![None; ng],
            solution: Err(Diverged {
                kind: crate::flow::DivergenceKind::Singular,
                elements: vec![],
            }),
            overflow_timers: vec![0; grid.lines.len()],
            line_cooldowns: vec![0; grid.lines.len()],
            substation_cooldowns: vec![0; grid.substations.len()],
            blackout: false,
            report: StepReport::default(),
        };
        state.update_dispatch(grid);
        state.solve(grid);
        state
    }

    pub fn flow(&self) -> Option<&FlowSolution> {
        self.solution.as_ref().ok()
    }

    /// Loading per line; all zero when the flow diverged.
    pub fn rho(&self) -> Vec<f64> {
        match &self.solution {
            Ok(s) => s.rho.clone(),
            Err(_) => vec![0.0; self.topology.line_in_service.len()],
        }
    }

    /// Highest line loading, infinite when the flow diverged.
    pub fn max_rho(&self) -> f64 {
        match &self.solution {
            Ok(s) => s.max_rho(),
            Err(_) => f64::INFINITY,
        }
    }

    /// Σ over lines of MW above thermal limit.
    pub fn overload_mw(&self, grid: &Grid) -> f64 {
        match &self.solution {
            Ok(s) => s
                .flows
                .iter()
                .zip(&grid.lines)
                .map(|(f, l)| (f.abs() - l.thermal_limit).max(0.0))
                .sum(),
            Err(_) => 0.0,
        }
    }

    /// Redispatch volume in MW: Σ|dispatch − plan| over non-slack
    /// dispatchables plus the slack's compensating change.
    pub fn redispatch_mw(&self, grid: &Grid) -> f64 {
        let deltas: Vec<f64> = grid
            .free_dispatchables()
            .map(|g| self.dispatch[g] - self.planned[g])
            .collect();
        deltas.iter().map(|d| d.abs()).sum::<f64>() + deltas.iter().sum::<f64>().abs()
    }

    /// Renewable power withheld by caps, MW. Output lost because a plant
    /// ended up in a generator-only island is not counted.
    pub fn curtailed_mw(&self, grid: &Grid) -> f64 {
        grid.renewables()
            .filter_map(|g| self.curtail_caps[g].map(|c| (self.planned[g] - c).max(0.0)))
            .sum()
    }

    /// True if any non-slack dispatchable deviates from plan or a cap is set.
    pub fn is_redispatched(&self) -> bool {
        self.deviation.iter().any(|d| *d != 0.0) || self.curtail_caps.iter().any(Option::is_some)
    }

    fn injections(&self) -> Injections {
        Injections {
            gen: self.dispatch.clone(),
            load: self.load.clone(),
        }
    }

    /// Recomputes generator outputs from plan, deviation and caps.
    fn update_dispatch(&mut self, grid: &Grid) {
        for (g, gen) in grid.generators.iter().enumerate() {
            if g == grid.slack {
                continue;
            }
            self.dispatch[g] = match gen.kind {
                GenKind::Dispatchable => {
                    let target = self.planned[g] + self.deviation[g];
                    target.clamp(gen.p_min, gen.p_max)
                }
                GenKind::Wind | GenKind::Solar => {
                    let avail = self.planned[g];
                    self.curtail_caps[g].map_or(avail, |c| avail.min(c))
                }
            };
        }
    }

    fn solve(&mut self, grid: &Grid) {
        self.solution = dc_solve(grid, &self.topology, &self.injections());
        match &self.solution {
            Ok(s) => {
                self.dispatch[grid.slack] = s.slack_output;
                for &g in &s.shed_generators {
                    self.dispatch[g] = 0.0;
                }
                self.blackout = false;
            }
            Err(_) => self.blackout = true,
        }
    }
}

/// Checks an action against cooldowns and busbar rules.
pub fn check_action(grid: &Grid, state: &GridState, action: &Action) -> Result<(), Rejection> {
    if state.blackout {
        return Err(Rejection::Blackout);
    }
    let Some(topo) = action.topology() else {
        return Ok(());
    };
    match topo {
        TopologyAction::SetSubstation { substation, .. } => {
            let remaining = state.substation_cooldowns[*substation];
            if remaining > 0 {
                return Err(Rejection::SubstationCooldown {
                    substation: grid.substations[*substation].id.clone(),
                    remaining,
                });
            }
        }
        TopologyAction::SetLineStatus { line, .. } => {
            let remaining = state.line_cooldowns[*line];
            if remaining > 0 {
                return Err(Rejection::LineCooldown {
                    line: grid.lines[*line].id.clone(),
                    remaining,
                });
            }
        }
    }
    // Busbar rules apply to substation reconfigurations only; opening a line
    // is always allowed, even when it islands part of the grid.
    if let TopologyAction::SetSubstation { substation, .. } = topo {
        let next = apply_topology(&state.topology, topo);
        let mut verdict = validate_topology(grid, &next);
        verdict.violations.retain(|v| v.substation == *substation);
        if !verdict.is_legal() {
            return Err(Rejection::BusbarRule {
                detail: verdict.describe(grid),
            });
        }
    }
    Ok(())
}

/// Strict variant used for operator input: ramp violations are rejected
/// instead of clipped.
pub fn check_action_strict(grid: &Grid, state: &GridState, action: &Action) -> Result<(), Rejection> {
    check_action(grid, state, action)?;
    if let Some(order) = action.redispatch() {
        for &(g, d) in &order.delta {
            let gen = &grid.generators[g];
            if g != grid.slack && d.abs() > gen.ramp + 1e-9 {
                return Err(Rejection::Ramp {
                    generator: gen.id.clone(),
                    requested: d,
                    ramp: gen.ramp,
                });
            }
        }
    }
    Ok(())
}

/// Topology after applying a switching action.
pub fn apply_topology(topology: &TopologyState, action: &TopologyAction) -> TopologyState {
    let mut next = topology.clone();
    match action {
        TopologyAction::SetSubstation { buses, .. } => {
            for &(e, b) in buses {
                next.set_bus(e, b);
            }
        }
        TopologyAction::SetLineStatus { line, in_service } => next.set_line_status(*line, *in_service),
    }
    next
}

fn switched_endpoints(before: &TopologyState, after: &TopologyState, action: &TopologyAction) -> usize {
    match action {
        TopologyAction::SetSubstation { buses, .. } => buses
            .iter()
            .filter(|(e, _)| before.bus(*e) != after.bus(*e))
            .count(),
        TopologyAction::SetLineStatus { .. } => 0,
    }
}

/// Advances the state by one step using `row`.
pub fn step(grid: &Grid, state: &GridState, action: &Action, row: &ChronicRow, config: &EngineConfig) -> GridState {
    let mut next = state.clone();
    next.step = state.step + 1;
    next.report = StepReport::default();
    if state.blackout {
        next.report.rejection = Some(Rejection::Blackout);
        return next;
    }

    // (1) legality
    let action = match check_action(grid, state, action) {
        Ok(()) => action.clone(),
        Err(r) => {
            next.report.rejection = Some(r);
            Action::NoOp
        }
    };
    for c in next.line_cooldowns.iter_mut().chain(next.substation_cooldowns.iter_mut()) {
        *c = c.saturating_sub(1);
    }

    let mut reconfigured = None;
    if let Some(topo) = action.topology() {
        let after = apply_topology(&state.topology, topo);
        next.report.switched_endpoints = switched_endpoints(&state.topology, &after, topo);
        if let TopologyAction::SetSubstation { substation, .. } = topo {
            if after != state.topology {
                reconfigured = Some(*substation);
            }
        }
        next.topology = after;
    }

    // (2) injections
    next.planned = row.gen.clone();
    next.load = row.load.clone();
    for &(g, cap) in action.curtail_caps() {
        next.curtail_caps[g] = cap;
    }
    if let Some(order) = action.redispatch() {
        for &(g, d) in &order.delta {
            let gen = &grid.generators[g];
            if g == grid.slack || gen.kind != GenKind::Dispatchable {
                continue;
            }
            let applied = d.clamp(-gen.ramp, gen.ramp);
            if applied != d {
                next.report
                    .notes
                    .push(format!("{}: redispatch {d:+} MW clipped to ramp {:+} MW", gen.id, applied));
            }
            let lo = gen.p_min - next.planned[g];
            let hi = gen.p_max - next.planned[g];
            let target = (state.deviation[g] + applied).clamp(lo.min(0.0), hi.max(0.0));
            if target != state.deviation[g] + applied {
                next.report
                    .notes
                    .push(format!("{}: redispatch limited by [{}, {}] MW", gen.id, gen.p_min, gen.p_max));
            }
            next.deviation[g] = target;
        }
    }
    next.update_dispatch(grid);

    // (3) + (4) solve with protection cascade
    next.solve(grid);
    protect(grid, state, &mut next, &config.protection);

    // (5) cooldowns
    for &l in &next.report.tripped_lines {
        next.line_cooldowns[l] = config.protection.line_cooldown_steps;
    }
    if let Some(s) = reconfigured {
        next.substation_cooldowns[s] = config.protection.substation_cooldown_steps;
    }
    next.report.applied = action;
    // (6) blackout already reflected by solve()
    next
}

fn protect(grid: &Grid, prev: &GridState, next: &mut GridState, cfg: &ProtectionConfig) {
    let n_lines = grid.lines.len();
    loop {
        next.report.cascade_rounds += 1;
        let Ok(sol) = &next.solution else {
            for t in &mut next.overflow_timers {
                *t = 0;
            }
            return;
        };
        let mut tripped = Vec::new();
        for l in 0..n_lines {
            if !next.topology.line_in_service[l] {
                next.overflow_timers[l] = 0;
                continue;
            }
            let rho = sol.rho[l];
            next.overflow_timers[l] = if cfg.is_overloaded(rho) {
                prev.overflow_timers[l] + 1
            } else {
                0
            };
            if rho >= cfg.hard_limit || next.overflow_timers[l] >= cfg.soft_overflow_steps {
                tripped.push(l);
            }
        }
        if tripped.is_empty() {
            return;
        }
        for &l in &tripped {
            next.topology.set_line_status(l, false);
            next.overflow_timers[l] = 0;
        }
        next.report.tripped_lines.extend(tripped);
        next.solve(grid);
    }
}

/// [`step`] on a copy, with a forecast row in place of the realized one.
pub fn simulate(
    grid: &Grid,
    state: &GridState,
    action: &Action,
    forecast_row: &ChronicRow,
    config: &EngineConfig,
) -> GridState {
    step(grid, state, action, forecast_row, config)
}

/// Applies `action` on the first forecast row and `NoOp` on the rest.
/// Stops early at blackout.
pub fn simulate_horizon(
    grid: &Grid,
    state: &GridState,
    action: &Action,
    forecast: &[ChronicRow],
    config: &EngineConfig,
) -> Vec<GridState> {
    let mut out: Vec<GridState> = Vec::with_capacity(forecast.len());
    for (i, row) in forecast.iter().enumerate() {
        let prev = if i == 0 { state } else { &out[i - 1] };
        let a = if i == 0 { action.clone() } else { Action::NoOp };
        let s = simulate(grid, prev, &a, row, config);
        let stop = s.blackout;
        out.push(s);
        if stop {
            break;
        }
    }
    out
}

/// Post-contingency result for one outage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContingencyResult {
    pub line: usize,
    /// Infinite when the outage makes the flow diverge.
    pub max_rho: f64,
    pub diverged: bool,
    pub violation: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContingencyReport {
    pub results: Vec<ContingencyResult>,
}

impl ContingencyReport {
    pub fn violations(&self) -> usize {
        self.results.iter().filter(|r| r.violation).count()
    }

    pub fn worst_rho(&self) -> f64 {
        self.results.iter().map(|r| r.max_rho).fold(0.0, f64::max)
    }
}

/// N-1 screening of a post-action state: each listed line is removed in turn
/// from the state's topology and the flow re-solved with its injections.
pub fn screen_state(grid: &Grid, state: &GridState, outages: &[usize]) -> ContingencyReport {
    let inj = state.injections();
    let results = outages
        .iter()
        .map(|&line| {
            if state.blackout {
                return ContingencyResult {
                    line,
                    max_rho: f64::INFINITY,
                    diverged: true,
                    violation: true,
                };
            }
            let mut topo = state.topology.clone();
            topo.set_line_status(line, false);
            match dc_solve(grid, &topo, &inj) {
                Ok(sol) => {
                    let max_rho = sol.max_rho();
                    ContingencyResult {
                        line,
                        max_rho,
                        diverged: false,
                        violation: max_rho > 1.0,
                    }
                }
                Err(_) => ContingencyResult {
                    line,
                    max_rho: f64::INFINITY,
                    diverged: true,
                    violation: true,
                },
            }
        })
        .collect();
    ContingencyReport { results }
}

/// Simulates `action` on `row`, then screens each outage of `outage_set`.
pub fn contingency_screen(
    grid: &Grid,
    state: &GridState,
    action: &Action,
    row: &ChronicRow,
    outage_set: &[usize],
    config: &EngineConfig,
) -> ContingencyReport {
    if outage_set.is_empty() {
        return ContingencyReport::default();
    }
    let after = simulate(grid, state, action, row, config);
    screen_state(grid, &after, outage_set)
}

/// Lines screened by default: every in-service line, or the configured subset.
pub fn screening_set(grid: &Grid, state: &GridState, config: &EngineConfig) -> Vec<usize> {
    if config.screening.lines.is_empty() {
        (0..grid.lines.len())
            .filter(|&l| state.topology.line_in_service[l])
            .collect()
    } else {
        config
            .screening
            .lines
            .iter()
            .filter_map(|id| grid.line_index(id))
            .collect()
    }
}

/// Topology distance of a state to the grid's reference.
pub fn distance_to_reference(grid: &Grid, state: &GridState) -> crate::topology::TopologyDistance {
    topology_distance(&state.topology, &grid.reference_topology).expect("same grid")
}

/// Endpoints whose busbar differs from the reference, with that busbar.
pub fn displaced_endpoints(grid: &Grid, state: &GridState) -> Vec<Endpoint> {
    grid.endpoints()
        .filter(|&e| state.topology.bus(e) != grid.reference_topology.bus(e))
        .collect()
}
