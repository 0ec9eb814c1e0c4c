//! One operator session over a live simulated grid.
//!
//! A session holds the engine state, a cursor into its chronic (the index of
//! the row the next advance realizes), the staged operator action, the
//! candidate cache and the audit log. Everything here is synchronous; the
//! HTTP layer serializes mutations per session and publishes [`Snapshot`]s.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use gridplan::agent::{decide, observe, GridStatus, StatusLevel, Trigger};
use gridplan::engine::{check_action_strict, distance_to_reference, screen_state, screening_set, simulate_horizon, step};
use gridplan::grid::TopologyRecord;
use gridplan::planner::lookahead;
use gridplan::search::{search, SearchVerdict};
use gridplan::{Action, ActionSpec, Chronic, ChronicRow, EngineConfig, Grid, GridState, TopologyAction};

use crate::error::{ErrorKind, ServiceError};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// The operator stages actions; advances execute them or NoOp.
    #[default]
    Paused,
    /// The agent decides every step. For demos and tests.
    AutoAdvance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    Operator,
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditEvent {
    Create,
    Apply,
    Advance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub seq: usize,
    /// Row realized by an advance; the session cursor for other events.
    pub step: usize,
    pub actor: Actor,
    pub event: AuditEvent,
    pub action: Option<ActionSpec>,
    pub outcome: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryPoint {
    /// Chronic row realized by this advance.
    pub step: usize,
    pub max_rho: Option<f64>,
    pub redispatch_mw: f64,
    pub curtailed_mw: f64,
    pub topo_distance: usize,
    pub level: StatusLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineView {
    pub id: String,
    pub from: String,
    pub to: String,
    pub in_service: bool,
    pub flow_mw: Option<f64>,
    pub rho: Option<f64>,
    pub thermal_limit: f64,
    pub overflow_timer: u32,
    pub cooldown: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstationView {
    pub id: String,
    pub split: bool,
    pub cooldown: u32,
    pub position: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorView {
    pub id: String,
    pub substation: String,
    pub kind: gridplan::grid::GenKind,
    pub dispatch_mw: f64,
    pub planned_mw: f64,
    pub deviation_mw: f64,
    pub cap_mw: Option<f64>,
}

/// Read-only view of a session, published after every mutation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub session: String,
    pub grid: String,
    pub scenario_id: String,
    pub mode: Mode,
    /// Rows realized so far; the next advance realizes this row.
    pub step: usize,
    pub steps_total: usize,
    pub blackout: bool,
    pub status: GridStatus,
    pub max_rho: Option<f64>,
    pub topology: TopologyRecord,
    pub topo_distance: usize,
    pub lines: Vec<LineView>,
    pub substations: Vec<SubstationView>,
    pub generators: Vec<GeneratorView>,
    pub redispatch_mw: f64,
    pub curtailed_mw: f64,
    pub staged: Option<Staged>,
    pub history: Vec<HistoryPoint>,
    pub audit_tail: Vec<AuditEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct N1Summary {
    /// Size of the screening set.
    pub screened: usize,
    pub violations: usize,
    /// `None` when some outage makes the flow diverge.
    pub worst_rho: Option<f64>,
    pub diverged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    /// Lines the observer flagged on this state.
    pub triggers: Vec<Trigger>,
    /// Substation, line or generators the action touches.
    pub affected: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    /// 1-based; `None` for operator what-ifs outside the ranked list.
    pub rank: Option<usize>,
    pub candidate_id: String,
    pub kind: String,
    pub action: ActionSpec,
    pub prior_score: Option<f64>,
    pub objective: Option<f64>,
    /// Max ρ per forecast step, `None` at blackout.
    pub projected_max_rho: Vec<Option<f64>>,
    pub n1: N1Summary,
    pub explanation: Explanation,
    /// Additional post-action checks by name. Only `n1` for now.
    pub checks: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateList {
    /// Cursor the list was computed for.
    pub step: usize,
    pub status: GridStatus,
    pub verdict: Option<SearchVerdict>,
    pub note: Option<String>,
    pub recommendations: Vec<Recommendation>,
    /// Time spent computing the list when it was cold.
    pub compute_ms: f64,
    pub cached: bool,
    pub enumerated: usize,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Staged {
    pub action: ActionSpec,
    pub candidate_id: String,
    /// Cursor the action was staged on.
    pub step: usize,
}

/// Body of an apply request: a cached candidate or an explicit action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplyRequest {
    #[serde(default)]
    pub candidate_id: Option<String>,
    #[serde(default)]
    pub action: Option<ActionSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionRequest {
    pub grid: String,
    pub chronic: String,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Replaces the service's engine configuration for this session.
    #[serde(default)]
    pub config: Option<EngineConfig>,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    pub grid: Arc<Grid>,
    pub chronic: Arc<Chronic>,
    pub config: EngineConfig,
    pub mode: Mode,
    state: GridState,
    cursor: usize,
    status: GridStatus,
    staged: Option<(Action, Staged)>,
    cache: Option<CandidateList>,
    history: Vec<HistoryPoint>,
    audit: Vec<AuditEntry>,
}

const AUDIT_TAIL: usize = 20;

impl Session {
    pub fn new(id: String, grid: Arc<Grid>, chronic: Arc<Chronic>, config: EngineConfig, mode: Mode) -> Result<Session, ServiceError> {
        config.validate()?;
        if chronic.step_count() == 0 {
            return Err(ServiceError::bad_request(format!("chronic `{}` has no rows", chronic.scenario_id)));
        }
        let state = GridState::initial(&grid, chronic.row(0), 0);
        let mut s = Session {
            id,
            grid,
            chronic,
            config,
            mode,
            state,
            cursor: 0,
            status: GridStatus {
                level: StatusLevel::Safe,
                max_rho: 0.0,
                triggers: vec![],
            },
            staged: None,
            cache: None,
            history: vec![],
            audit: vec![],
        };
        s.status = s.observe();
        s.log(Actor::Operator, AuditEvent::Create, None, format!("session on {}", s.chronic.scenario_id));
        Ok(s)
    }

    pub fn state(&self) -> &GridState {
        &self.state
    }

    pub fn status(&self) -> &GridStatus {
        &self.status
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn audit(&self) -> &[AuditEntry] {
        &self.audit
    }

    pub fn history(&self) -> &[HistoryPoint] {
        &self.history
    }

    pub fn staged(&self) -> Option<&Staged> {
        self.staged.as_ref().map(|(_, s)| s)
    }

    /// Forecast rows from the cursor, at most `horizon` of them.
    pub fn forecast(&self, horizon: usize) -> &[ChronicRow] {
        let n = self.chronic.step_count();
        let end = (self.cursor + horizon).min(n);
        &self.chronic.rows[self.cursor.min(n)..end]
    }

    fn observe(&self) -> GridStatus {
        observe(&self.grid, &self.state, self.forecast(self.config.agent.observer_horizon), &self.config)
    }

    fn log(&mut self, actor: Actor, event: AuditEvent, action: Option<ActionSpec>, outcome: String) {
        self.audit.push(AuditEntry {
            seq: self.audit.len(),
            step: self.cursor,
            actor,
            event,
            action,
            outcome,
        });
    }

    fn ensure_live(&self) -> Result<(), ServiceError> {
        if self.state.blackout {
            return Err(ServiceError::new(ErrorKind::Conflict, "blackout", "the grid is blacked out; the session is terminal")
                .with_detail(&self.status));
        }
        if self.cursor >= self.chronic.step_count() {
            return Err(ServiceError::new(
                ErrorKind::Conflict,
                "end_of_chronic",
                format!("all {} rows of the chronic have been played", self.chronic.step_count()),
            ));
        }
        Ok(())
    }

    pub fn snapshot(&self) -> Snapshot {
        let g = &self.grid;
        let st = &self.state;
        let flow = st.flow().filter(|_| !st.blackout);
        let split = {
            let mut v = vec![false; g.substations.len()];
            for e in gridplan::engine::displaced_endpoints(g, st) {
                v[g.substation_of(e)] = true;
            }
            v
        };
        Snapshot {
            session: self.id.clone(),
            grid: g.name.clone(),
            scenario_id: self.chronic.scenario_id.clone(),
            mode: self.mode,
            step: self.cursor,
            steps_total: self.chronic.step_count(),
            blackout: st.blackout,
            status: self.status.clone(),
            max_rho: flow.map(|f| f.max_rho()),
            topology: TopologyRecord::from_state(g, &st.topology),
            topo_distance: distance_to_reference(g, st).total(),
            lines: g
                .lines
                .iter()
                .enumerate()
                .map(|(l, line)| LineView {
                    id: line.id.clone(),
                    from: g.substations[line.from].id.clone(),
                    to: g.substations[line.to].id.clone(),
                    in_service: st.topology.in_service(l),
                    flow_mw: flow.map(|f| f.flows[l]),
                    rho: flow.map(|f| f.rho[l]),
                    thermal_limit: line.thermal_limit,
                    overflow_timer: st.overflow_timers[l],
                    cooldown: st.line_cooldowns[l],
                })
                .collect(),
            substations: g
                .substations
                .iter()
                .enumerate()
                .map(|(s, sub)| SubstationView {
                    id: sub.id.clone(),
                    split: split[s],
                    cooldown: st.substation_cooldowns[s],
                    position: g.layout.as_ref().and_then(|l| l.get(&sub.id).copied()),
                })
                .collect(),
            generators: g
                .generators
                .iter()
                .enumerate()
                .map(|(i, gen)| GeneratorView {
                    id: gen.id.clone(),
                    substation: g.substations[gen.substation].id.clone(),
                    kind: gen.kind,
                    dispatch_mw: st.dispatch[i],
                    planned_mw: st.planned[i],
                    deviation_mw: st.deviation[i],
                    cap_mw: st.curtail_caps[i],
                })
                .collect(),
            redispatch_mw: st.redispatch_mw(g),
            curtailed_mw: st.curtailed_mw(g),
            staged: self.staged().cloned(),
            history: self.history.clone(),
            audit_tail: self.audit[self.audit.len().saturating_sub(AUDIT_TAIL)..].to_vec(),
        }
    }

    /// Projection and N-1 screening of `action` on the current state. The
    /// projection covers the planner's lookahead; N-1 runs on the state
    /// after the first step.
    fn evaluate(&self, action: &Action) -> (Vec<Option<f64>>, N1Summary) {
        let fc = self.forecast(lookahead(&self.config));
        let traj = simulate_horizon(&self.grid, &self.state, action, fc, &self.config);
        let projected = traj.iter().map(|s| (!s.blackout).then(|| s.max_rho())).collect();
        let set = screening_set(&self.grid, &self.state, &self.config);
        let report = match traj.first() {
            Some(after) => screen_state(&self.grid, after, &set),
            None => screen_state(&self.grid, &self.state, &set),
        };
        let diverged = report.results.iter().filter(|r| r.diverged).count();
        let n1 = N1Summary {
            screened: set.len(),
            violations: report.violations(),
            worst_rho: (diverged == 0).then(|| report.worst_rho()),
            diverged,
        };
        (projected, n1)
    }

    fn affected(&self, action: &Action) -> Vec<String> {
        let g = &self.grid;
        let mut out = Vec::new();
        match action.topology() {
            Some(TopologyAction::SetSubstation { substation, .. }) => out.push(g.substations[*substation].id.clone()),
            Some(TopologyAction::SetLineStatus { line, .. }) => out.push(g.lines[*line].id.clone()),
            None => {}
        }
        if let Some(order) = action.redispatch() {
            out.extend(order.delta.iter().map(|(i, _)| g.generators[*i].id.clone()));
        }
        out.extend(action.curtail_caps().iter().map(|(i, _)| g.generators[*i].id.clone()));
        out
    }

    fn recommendation(&self, action: &Action, rank: Option<usize>, prior: Option<f64>, objective: Option<f64>) -> Recommendation {
        let (projected, n1) = self.evaluate(action);
        let mut checks = BTreeMap::new();
        checks.insert("n1".to_string(), serde_json::to_value(&n1).unwrap_or(Value::Null));
        Recommendation {
            rank,
            candidate_id: action.canonical_id(&self.grid),
            kind: action.kind().to_string(),
            action: action.to_spec(&self.grid),
            prior_score: prior,
            objective,
            projected_max_rho: projected,
            n1,
            explanation: Explanation {
                triggers: self.status.triggers.clone(),
                affected: self.affected(action),
            },
            checks,
        }
    }

    /// Ranked recommendations for the current state, from the cache when it
    /// was computed on this cursor.
    pub fn candidates(&mut self) -> CandidateList {
        if let Some(c) = &self.cache {
            if c.step == self.cursor {
                let mut hit = c.clone();
                hit.cached = true;
                return hit;
            }
        }
        let started = Instant::now();
        let mut list = CandidateList {
            step: self.cursor,
            status: self.status.clone(),
            verdict: None,
            note: None,
            recommendations: vec![],
            compute_ms: 0.0,
            cached: false,
            enumerated: 0,
            truncated: false,
        };
        if self.state.blackout {
            list.note = Some("grid is blacked out".into());
        } else if self.cursor >= self.chronic.step_count() {
            list.note = Some("end of chronic".into());
        } else if self.status.is_safe() {
            list.note = Some("grid is safe".into());
        } else {
            let fc = self.forecast(self.config.search.depth);
            let result = search(&self.grid, &self.state, fc, &self.config.search, &self.config);
            list.verdict = Some(result.verdict);
            list.enumerated = result.enumerated;
            list.truncated = result.truncated;
            list.recommendations = result
                .candidates
                .iter()
                .map(|c| self.recommendation(&c.action, Some(c.rank), Some(c.prior_score), Some(c.objective)))
                .collect();
            list.note = match result.verdict {
                SearchVerdict::ActionsFound => None,
                SearchVerdict::NoActionNeeded => Some("no topology action beats doing nothing over the search horizon".into()),
                SearchVerdict::Empty => Some("no admissible topology action".into()),
            };
        }
        list.compute_ms = started.elapsed().as_secs_f64() * 1e3;
        self.cache = Some(list.clone());
        list
    }

    fn resolve(&self, spec: &ActionSpec) -> Result<Action, ServiceError> {
        let action = spec.resolve(&self.grid)?;
        check_action_strict(&self.grid, &self.state, &action).map_err(|r| ServiceError::rejected(&r))?;
        Ok(action)
    }

    /// What-if for any action; the session is not touched.
    pub fn simulate(&self, spec: &ActionSpec) -> Result<Recommendation, ServiceError> {
        self.ensure_live()?;
        let action = self.resolve(spec)?;
        let cached = self
            .cache
            .as_ref()
            .filter(|c| c.step == self.cursor)
            .and_then(|c| c.recommendations.iter().find(|r| r.candidate_id == action.canonical_id(&self.grid)));
        let mut rec = self.recommendation(&action, None, None, None);
        if let Some(c) = cached {
            rec.rank = c.rank;
            rec.prior_score = c.prior_score;
            rec.objective = c.objective;
        }
        Ok(rec)
    }

    /// Stages an action for the next advance, replacing any staged one.
    pub fn apply(&mut self, req: &ApplyRequest) -> Result<Staged, ServiceError> {
        self.ensure_live()?;
        let spec = match (&req.candidate_id, &req.action) {
            (Some(id), None) => {
                let cache = self.cache.as_ref().filter(|c| c.step == self.cursor);
                cache
                    .and_then(|c| c.recommendations.iter().find(|r| &r.candidate_id == id))
                    .map(|r| r.action.clone())
                    .ok_or_else(|| ServiceError::unknown("candidate", id))?
            }
            (None, Some(spec)) => spec.clone(),
            _ => return Err(ServiceError::bad_request("give exactly one of `candidate_id` and `action`")),
        };
        let action = self.resolve(&spec)?;
        let staged = Staged {
            action: spec.clone(),
            candidate_id: action.canonical_id(&self.grid),
            step: self.cursor,
        };
        let replaced = self.staged.as_ref().map(|(_, s)| s.candidate_id.clone());
        let outcome = match replaced {
            Some(old) => format!("staged, replacing {old}"),
            None => "staged".to_string(),
        };
        self.log(Actor::Operator, AuditEvent::Apply, Some(spec), outcome);
        self.staged = Some((action, staged.clone()));
        Ok(staged)
    }

    /// Realizes `steps` chronic rows. The staged action (if any) runs on the
    /// first of them; otherwise NoOp, or the agent's decision in auto mode.
    /// Stops early at blackout or at the end of the chronic.
    pub fn advance(&mut self, steps: usize) -> Result<(), ServiceError> {
        if steps == 0 {
            return Err(ServiceError::bad_request("steps must be >= 1"));
        }
        self.ensure_live()?;
        for _ in 0..steps {
            if self.state.blackout || self.cursor >= self.chronic.step_count() {
                break;
            }
            let (action, actor) = match self.staged.take() {
                Some((a, _)) => (a, Actor::Operator),
                None => match self.mode {
                    Mode::Paused => (Action::NoOp, Actor::Operator),
                    Mode::AutoAdvance => {
                        let d = decide(&self.grid, &self.state, self.forecast(lookahead(&self.config)), &self.config);
                        (d.action, Actor::Auto)
                    }
                },
            };
            let row = self.chronic.row(self.cursor);
            self.state = step(&self.grid, &self.state, &action, row, &self.config);
            let outcome = self.outcome();
            let executed = self.state.report.applied.to_spec(&self.grid);
            self.log(actor, AuditEvent::Advance, Some(executed), outcome);
            let realized = self.cursor;
            self.cursor += 1;
            self.cache = None;
            self.status = self.observe();
            self.history.push(HistoryPoint {
                step: realized,
                max_rho: (!self.state.blackout).then(|| self.state.max_rho()),
                redispatch_mw: self.state.redispatch_mw(&self.grid),
                curtailed_mw: self.state.curtailed_mw(&self.grid),
                topo_distance: distance_to_reference(&self.grid, &self.state).total(),
                level: self.status.level,
            });
        }
        Ok(())
    }

    fn outcome(&self) -> String {
        let st = &self.state;
        let mut parts = vec![match st.blackout {
            true => "blackout".to_string(),
            false => format!("max rho {:.3}", st.max_rho()),
        }];
        if !st.report.tripped_lines.is_empty() {
            let ids: Vec<&str> = st.report.tripped_lines.iter().map(|l| self.grid.lines[*l].id.as_str()).collect();
            parts.push(format!("tripped {}", ids.join(", ")));
        }
        if let Some(r) = &st.report.rejection {
            parts.push(format!("rejected: {r}"));
        }
        parts.extend(st.report.notes.iter().cloned());
        parts.join("; ")
    }
}
