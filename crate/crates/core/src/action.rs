//! Grid actions and their id-keyed wire form.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GenKind, Grid};
use crate::topology::{Busbar, Endpoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TopologyAction {
    /// Moves the listed endpoints of one substation to the given busbars.
    SetSubstation {
        substation: usize,
        buses: Vec<(Endpoint, Busbar)>,
    },
    SetLineStatus { line: usize, in_service: bool },
}

impl TopologyAction {
    pub fn substation(&self) -> Option<usize> {
        match self {
            TopologyAction::SetSubstation { substation, .. } => Some(*substation),
            TopologyAction::SetLineStatus { .. } => None,
        }
    }

    /// Stable key: `sub:S4:1211` (busbar per listed endpoint) or `line:L23:on`.
    pub fn canonical_id(&self, grid: &Grid) -> String {
        match self {
            TopologyAction::SetSubstation { substation, buses } => {
                let mut sorted = buses.clone();
                sorted.sort();
                let mut id = format!("sub:{}:", grid.substations[*substation].id);
                for (_, b) in &sorted {
                    let _ = write!(id, "{}", b.number());
                }
                id
            }
            TopologyAction::SetLineStatus { line, in_service } => format!(
                "line:{}:{}",
                grid.lines[*line].id,
                if *in_service { "on" } else { "off" }
            ),
        }
    }
}

/// Generator adjustments. `delta` is the change of each generator's redispatch
/// target in MW; `curtail` sets (`Some`) or lifts (`None`) renewable caps.
/// Entries for the slack generator are informational: the slack always balances.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RedispatchOrder {
    #[serde(default)]
    pub delta: Vec<(usize, f64)>,
    #[serde(default)]
    pub curtail: Vec<(usize, Option<f64>)>,
}

impl RedispatchOrder {
    pub fn is_empty(&self) -> bool {
        self.delta.iter().all(|(_, d)| *d == 0.0) && self.curtail.is_empty()
    }

    /// Σ|Δ| over all listed generators.
    pub fn total_abs_delta(&self) -> f64 {
        self.delta.iter().map(|(_, d)| d.abs()).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Action {
    #[default]
    NoOp,
    Topology(TopologyAction),
    Redispatch(RedispatchOrder),
    Curtailment { caps: Vec<(usize, Option<f64>)> },
    Composite {
        topology: TopologyAction,
        redispatch: RedispatchOrder,
    },
}

impl Action {
    pub fn is_noop(&self) -> bool {
        match self {
            Action::NoOp => true,
            Action::Redispatch(r) => r.is_empty(),
            Action::Curtailment { caps } => caps.is_empty(),
            _ => false,
        }
    }

    pub fn topology(&self) -> Option<&TopologyAction> {
        match self {
            Action::Topology(t) | Action::Composite { topology: t, .. } => Some(t),
            _ => None,
        }
    }

    pub fn redispatch(&self) -> Option<&RedispatchOrder> {
        match self {
            Action::Redispatch(r) | Action::Composite { redispatch: r, .. } => Some(r),
            _ => None,
        }
    }

    pub fn curtail_caps(&self) -> &[(usize, Option<f64>)] {
        match self {
            Action::Curtailment { caps } => caps,
            Action::Redispatch(r) | Action::Composite { redispatch: r, .. } => &r.curtail,
            _ => &[],
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Action::NoOp => "noop",
            Action::Topology(_) => "topology",
            Action::Redispatch(_) => "redispatch",
            Action::Curtailment { .. } => "curtailment",
            Action::Composite { .. } => "composite",
        }
    }

    pub fn canonical_id(&self, grid: &Grid) -> String {
        match self {
            Action::NoOp => "noop".into(),
            Action::Topology(t) => t.canonical_id(grid),
            Action::Redispatch(r) => format!("redispatch:{}", order_key(grid, r)),
            Action::Curtailment { caps } => format!(
                "curtail:{}",
                order_key(grid, &RedispatchOrder { delta: vec![], curtail: caps.clone() })
            ),
            Action::Composite { topology, redispatch } => {
                format!("{}+{}", topology.canonical_id(grid), order_key(grid, redispatch))
            }
        }
    }

    pub fn to_spec(&self, grid: &Grid) -> ActionSpec {
        match self {
            Action::NoOp => ActionSpec::Noop,
            Action::Topology(t) => topology_spec(grid, t),
            Action::Redispatch(r) => ActionSpec::Redispatch(order_spec(grid, r)),
            Action::Curtailment { caps } => ActionSpec::Curtailment {
                caps: caps
                    .iter()
                    .map(|(g, c)| (grid.generators[*g].id.clone(), *c))
                    .collect(),
            },
            Action::Composite { topology, redispatch } => ActionSpec::Composite {
                topology: Box::new(topology_spec(grid, topology)),
                redispatch: order_spec(grid, redispatch),
            },
        }
    }
}

fn order_key(grid: &Grid, r: &RedispatchOrder) -> String {
    let mut parts: Vec<String> = r
        .delta
        .iter()
        .filter(|(_, d)| *d != 0.0)
        .map(|(g, d)| format!("{}{:+.3}", grid.generators[*g].id, d))
        .collect();
    parts.extend(r.curtail.iter().map(|(g, c)| match c {
        Some(c) => format!("{}<={:.3}", grid.generators[*g].id, c),
        None => format!("{}<=max", grid.generators[*g].id),
    }));
    parts.join(",")
}

fn topology_spec(grid: &Grid, t: &TopologyAction) -> ActionSpec {
    match t {
        TopologyAction::SetSubstation { substation, buses } => ActionSpec::SetSubstation {
            substation: grid.substations[*substation].id.clone(),
            buses: buses
                .iter()
                .map(|(e, b)| (grid.endpoint_key(*e), b.number()))
                .collect(),
        },
        TopologyAction::SetLineStatus { line, in_service } => ActionSpec::SetLineStatus {
            line: grid.lines[*line].id.clone(),
            in_service: *in_service,
        },
    }
}

fn order_spec(grid: &Grid, r: &RedispatchOrder) -> RedispatchSpec {
    RedispatchSpec {
        delta: r
            .delta
            .iter()
            .map(|(g, d)| (grid.generators[*g].id.clone(), *d))
            .collect(),
        curtail: r
            .curtail
            .iter()
            .map(|(g, c)| (grid.generators[*g].id.clone(), *c))
            .collect(),
    }
}

/// Id-keyed action used in plan files and the HTTP API.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ActionSpec {
    Noop,
    SetSubstation {
        substation: String,
        /// Endpoint key (`L12:from`, `L12:to`, generator or load id) → busbar.
        buses: BTreeMap<String, u8>,
    },
    SetLineStatus {
        line: String,
        in_service: bool,
    },
    Redispatch(RedispatchSpec),
    Curtailment {
        caps: BTreeMap<String, Option<f64>>,
    },
    Composite {
        topology: Box<ActionSpec>,
        redispatch: RedispatchSpec,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RedispatchSpec {
    #[serde(default)]
    pub delta: BTreeMap<String, f64>,
    #[serde(default)]
    pub curtail: BTreeMap<String, Option<f64>>,
}

impl ActionSpec {
    pub fn resolve(&self, grid: &Grid) -> Result<Action> {
        Ok(match self {
            ActionSpec::Noop => Action::NoOp,
            ActionSpec::SetSubstation { .. } | ActionSpec::SetLineStatus { .. } => {
                Action::Topology(self.resolve_topology(grid)?)
            }
            ActionSpec::Redispatch(r) => Action::Redispatch(r.resolve(grid)?),
            ActionSpec::Curtailment { caps } => Action::Curtailment {
                caps: resolve_caps(grid, caps)?,
            },
            ActionSpec::Composite { topology, redispatch } => Action::Composite {
                topology: topology.resolve_topology(grid)?,
                redispatch: redispatch.resolve(grid)?,
            },
        })
    }

    fn resolve_topology(&self, grid: &Grid) -> Result<TopologyAction> {
        match self {
            ActionSpec::SetSubstation { substation, buses } => {
                let s = grid
                    .substation_index(substation)
                    .ok_or_else(|| Error::Invalid(format!("unknown substation `{substation}`")))?;
                let mut out = Vec::with_capacity(buses.len());
                for (key, bus) in buses {
                    let e = grid
                        .endpoint_from_key(key)
                        .ok_or_else(|| Error::Invalid(format!("unknown endpoint `{key}`")))?;
                    if grid.substation_of(e) != s {
                        return Err(Error::Invalid(format!(
                            "endpoint `{key}` is not at substation `{substation}`"
                        )));
                    }
                    out.push((e, Busbar::try_from(*bus).map_err(Error::Invalid)?));
                }
                out.sort();
                Ok(TopologyAction::SetSubstation {
                    substation: s,
                    buses: out,
                })
            }
            ActionSpec::SetLineStatus { line, in_service } => Ok(TopologyAction::SetLineStatus {
                line: grid
                    .line_index(line)
                    .ok_or_else(|| Error::Invalid(format!("unknown line `{line}`")))?,
                in_service: *in_service,
            }),
            other => Err(Error::Invalid(format!(
                "expected a topology action, got {}",
                serde_json::to_string(other).unwrap_or_default()
            ))),
        }
    }
}

impl RedispatchSpec {
    fn resolve(&self, grid: &Grid) -> Result<RedispatchOrder> {
        let mut delta = Vec::with_capacity(self.delta.len());
        for (id, d) in &self.delta {
            let g = grid
                .generator_index(id)
                .ok_or_else(|| Error::Invalid(format!("unknown generator `{id}`")))?;
            if grid.generators[g].kind != GenKind::Dispatchable {
                return Err(Error::Invalid(format!("generator `{id}` is not dispatchable")));
            }
            if !d.is_finite() {
                return Err(Error::Invalid(format!("redispatch for `{id}` is not finite")));
            }
            delta.push((g, *d));
        }
        delta.sort_by_key(|(g, _)| *g);
        Ok(RedispatchOrder {
            delta,
            curtail: resolve_caps(grid, &self.curtail)?,
        })
    }
}

fn resolve_caps(grid: &Grid, caps: &BTreeMap<String, Option<f64>>) -> Result<Vec<(usize, Option<f64>)>> {
    let mut out = Vec::with_capacity(caps.len());
    for (id, cap) in caps {
        let g = grid
            .generator_index(id)
            .ok_or_else(|| Error::Invalid(format!("unknown generator `{id}`")))?;
        if !grid.generators[g].kind.is_renewable() {
            return Err(Error::Invalid(format!("generator `{id}` cannot be curtailed")));
        }
        if let Some(c) = cap {
            if !(c.is_finite() && *c >= 0.0) {
                return Err(Error::Invalid(format!("curtailment cap for `{id}` must be >= 0")));
            }
        }
        out.push((g, *cap));
    }
    out.sort_by_key(|(g, _)| *g);
    Ok(out)
}
