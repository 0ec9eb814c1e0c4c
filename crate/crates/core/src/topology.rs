//! Busbar assignments, electrical nodes, islands and topology distance.
//!
//! Every substation has two busbars. Each element endpoint (line end,
//! generator, load) sits on exactly one of them; an electrical node exists for
//! every busbar that holds an injection or an endpoint of an in-service line.
//! Nodes are numbered canonically by (substation index, busbar).
//!
//! Busbar legality is a reconstruction of the usual bus rules:
//! - an injection may only sit on a busbar that also holds an in-service line
//!   endpoint;
//! - busbar 2 of a split substation may not hold a single line endpoint and
//!   nothing else (that is a line disconnection, which has its own action).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Busbar {
    #[default]
    One,
    Two,
}

impl Busbar {
    pub fn number(self) -> u8 {
        match self {
            Busbar::One => 1,
            Busbar::Two => 2,
        }
    }

    fn index(self) -> usize {
        self.number() as usize - 1
    }
}

impl TryFrom<u8> for Busbar {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, String> {
        match value {
            1 => Ok(Busbar::One),
            2 => Ok(Busbar::Two),
            other => Err(format!("busbar must be 1 or 2, got {other}")),
        }
    }
}

impl From<Busbar> for u8 {
    fn from(b: Busbar) -> u8 {
        b.number()
    }
}

/// One connection point of a grid element. Indices refer to the grid's element vectors.
///
/// The derived ordering (line origins, line extremities, generators, loads) is
/// the canonical element order inside a substation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum Endpoint {
    LineFrom(usize),
    LineTo(usize),
    Generator(usize),
    Load(usize),
}

impl Endpoint {
    pub fn line(self) -> Option<usize> {
        match self {
            Endpoint::LineFrom(l) | Endpoint::LineTo(l) => Some(l),
            _ => None,
        }
    }

    pub fn is_injection(self) -> bool {
        matches!(self, Endpoint::Generator(_) | Endpoint::Load(_))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TopologyState {
    pub line_from_bus: Vec<Busbar>,
    pub line_to_bus: Vec<Busbar>,
    pub gen_bus: Vec<Busbar>,
    pub load_bus: Vec<Busbar>,
    pub line_in_service: Vec<bool>,
}

impl TopologyState {
    /// Everything on busbar 1, every line in service.
    pub fn reference(grid: &Grid) -> TopologyState {
        TopologyState {
            line_from_bus: vec![Busbar::One; grid.lines.len()],
            line_to_bus: vec![Busbar::One; grid.lines.len()],
            gen_bus: vec![Busbar::One; grid.generators.len()],
            load_bus: vec![Busbar::One; grid.loads.len()],
            line_in_service: vec![true; grid.lines.len()],
        }
    }

    pub fn bus(&self, e: Endpoint) -> Busbar {
        match e {
            Endpoint::LineFrom(l) => self.line_from_bus[l],
            Endpoint::LineTo(l) => self.line_to_bus[l],
            Endpoint::Generator(g) => self.gen_bus[g],
            Endpoint::Load(d) => self.load_bus[d],
        }
    }

    pub fn set_bus(&mut self, e: Endpoint, bus: Busbar) {
        match e {
            Endpoint::LineFrom(l) => self.line_from_bus[l] = bus,
            Endpoint::LineTo(l) => self.line_to_bus[l] = bus,
            Endpoint::Generator(g) => self.gen_bus[g] = bus,
            Endpoint::Load(d) => self.load_bus[d] = bus,
        }
    }

    pub fn in_service(&self, line: usize) -> bool {
        self.line_in_service[line]
    }

    pub fn set_line_status(&mut self, line: usize, in_service: bool) {
        self.line_in_service[line] = in_service;
    }

    /// True when the endpoint is electrically attached (injections always are).
    pub fn is_connected(&self, e: Endpoint) -> bool {
        e.line().is_none_or(|l| self.line_in_service[l])
    }

    pub(crate) fn check_shape(&self, grid: &Grid) -> Result<()> {
        let ok = self.line_from_bus.len() == grid.lines.len()
            && self.line_to_bus.len() == grid.lines.len()
            && self.line_in_service.len() == grid.lines.len()
            && self.gen_bus.len() == grid.generators.len()
            && self.load_bus.len() == grid.loads.len();
        if ok {
            Ok(())
        } else {
            Err(Error::TopologyMismatch(format!(
                "topology sized for a different grid than `{}`",
                grid.name
            )))
        }
    }

    fn same_shape(&self, other: &TopologyState) -> bool {
        self.line_from_bus.len() == other.line_from_bus.len()
            && self.line_to_bus.len() == other.line_to_bus.len()
            && self.gen_bus.len() == other.gen_bus.len()
            && self.load_bus.len() == other.load_bus.len()
            && self.line_in_service.len() == other.line_in_service.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ElectricalNode {
    pub substation: usize,
    pub busbar: Busbar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeEdge {
    pub line: usize,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeGraph {
    /// Sorted by (substation, busbar).
    pub nodes: Vec<ElectricalNode>,
    pub line_from_node: Vec<Option<usize>>,
    pub line_to_node: Vec<Option<usize>>,
    pub gen_node: Vec<usize>,
    pub load_node: Vec<usize>,
    /// In-service lines, in line order.
    pub edges: Vec<NodeEdge>,
    pub slack_node: usize,
}

impl NodeGraph {
    pub fn node_of(&self, e: Endpoint) -> Option<usize> {
        match e {
            Endpoint::LineFrom(l) => self.line_from_node[l],
            Endpoint::LineTo(l) => self.line_to_node[l],
            Endpoint::Generator(g) => Some(self.gen_node[g]),
            Endpoint::Load(d) => Some(self.load_node[d]),
        }
    }

    /// Node id of a (substation, busbar) pair, if that busbar is energized.
    pub fn find(&self, substation: usize, busbar: Busbar) -> Option<usize> {
        self.nodes
            .binary_search(&ElectricalNode { substation, busbar })
            .ok()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Derives the electrical nodes for a topology.
pub fn electrical_nodes(grid: &Grid, topology: &TopologyState) -> NodeGraph {
    let n_sub = grid.substations.len();
    let mut used = vec![[false; 2]; n_sub];
    for (l, line) in grid.lines.iter().enumerate() {
        if topology.line_in_service[l] {
            used[line.from][topology.line_from_bus[l].index()] = true;
            used[line.to][topology.line_to_bus[l].index()] = true;
        }
    }
    for (g, gen) in grid.generators.iter().enumerate() {
        used[gen.substation][topology.gen_bus[g].index()] = true;
    }
    for (d, load) in grid.loads.iter().enumerate() {
        used[load.substation][topology.load_bus[d].index()] = true;
    }

    let mut nodes = Vec::new();
    let mut id = vec![[usize::MAX; 2]; n_sub];
    for (s, flags) in used.iter().enumerate() {
        for (b, busbar) in [Busbar::One, Busbar::Two].into_iter().enumerate() {
            if flags[b] {
                id[s][b] = nodes.len();
                nodes.push(ElectricalNode { substation: s, busbar });
            }
        }
    }

    let mut line_from_node = vec![None; grid.lines.len()];
    let mut line_to_node = vec![None; grid.lines.len()];
    let mut edges = Vec::new();
    for (l, line) in grid.lines.iter().enumerate() {
        if topology.line_in_service[l] {
            let from = id[line.from][topology.line_from_bus[l].index()];
            let to = id[line.to][topology.line_to_bus[l].index()];
            line_from_node[l] = Some(from);
            line_to_node[l] = Some(to);
            edges.push(NodeEdge { line: l, from, to });
        }
    }
    let gen_node: Vec<usize> = grid
        .generators
        .iter()
        .enumerate()
        .map(|(g, gen)| id[gen.substation][topology.gen_bus[g].index()])
        .collect();
    let load_node = grid
        .loads
        .iter()
        .enumerate()
        .map(|(d, load)| id[load.substation][topology.load_bus[d].index()])
        .collect();
    let slack_node = gen_node[grid.slack];
    NodeGraph {
        nodes,
        line_from_node,
        line_to_node,
        gen_node,
        load_node,
        edges,
        slack_node,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Island {
    /// Node ids, ascending.
    pub nodes: Vec<usize>,
    pub contains_slack: bool,
    pub contains_load: bool,
    pub contains_generator: bool,
}

/// Connected components of the node graph, ordered by their smallest node id.
pub fn islands(graph: &NodeGraph) -> Vec<Island> {
    let n = graph.nodes.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for edge in &graph.edges {
        let a = root(&mut parent, edge.from);
        let b = root(&mut parent, edge.to);
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut component_of = vec![usize::MAX; n];
    let mut out: Vec<Island> = Vec::new();
    for node in 0..n {
        let r = root(&mut parent, node);
        if component_of[r] == usize::MAX {
            component_of[r] = out.len();
            out.push(Island {
                nodes: Vec::new(),
                contains_slack: false,
                contains_load: false,
                contains_generator: false,
            });
        }
        let c = component_of[r];
        component_of[node] = c;
        out[c].nodes.push(node);
    }
    out[component_of[graph.slack_node]].contains_slack = true;
    for &node in &graph.gen_node {
        out[component_of[node]].contains_generator = true;
    }
    for &node in &graph.load_node {
        out[component_of[node]].contains_load = true;
    }
    out
}

/// Endpoint-wise difference between two topologies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyDistance {
    /// Line endpoints on a different busbar.
    pub line_endpoints: usize,
    /// Generator and load endpoints on a different busbar.
    pub injection_endpoints: usize,
    /// Lines whose service status differs.
    pub line_status: usize,
}

impl TopologyDistance {
    /// Everything that must be switched to return to the reference.
    pub fn total(&self) -> usize {
        self.line_endpoints + self.injection_endpoints + self.line_status
    }

    /// Busbar changes only (line and injection endpoints).
    pub fn endpoints(&self) -> usize {
        self.line_endpoints + self.injection_endpoints
    }
}

pub fn topology_distance(topology: &TopologyState, reference: &TopologyState) -> Result<TopologyDistance> {
    if !topology.same_shape(reference) {
        return Err(Error::TopologyMismatch(
            "topologies describe different grids".into(),
        ));
    }
    let diff = |a: &[Busbar], b: &[Busbar]| a.iter().zip(b).filter(|(x, y)| x != y).count();
    Ok(TopologyDistance {
        line_endpoints: diff(&topology.line_from_bus, &reference.line_from_bus)
            + diff(&topology.line_to_bus, &reference.line_to_bus),
        injection_endpoints: diff(&topology.gen_bus, &reference.gen_bus)
            + diff(&topology.load_bus, &reference.load_bus),
        line_status: topology
            .line_in_service
            .iter()
            .zip(&reference.line_in_service)
            .filter(|(a, b)| a != b)
            .count(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    InjectionWithoutLine,
    SingleLineBusbar,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationKind::InjectionWithoutLine => "injection without line",
            ViolationKind::SingleLineBusbar => "busbar isolates a single line",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BusViolation {
    pub substation: usize,
    pub busbar: Busbar,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyVerdict {
    pub violations: Vec<BusViolation>,
}

impl TopologyVerdict {
    pub fn is_legal(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn describe(&self, grid: &Grid) -> String {
        self.violations
            .iter()
            .map(|v| {
                format!(
                    "{} busbar {}: {}",
                    grid.substations[v.substation].id,
                    v.busbar.number(),
                    v.kind
                )
            })
            .collect::<Vec<_>>()
            .join("; ")
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct BusContents {
    line_ends: usize,
    injections: usize,
}

/// Checks the busbar rules at every substation.
pub fn validate_topology(grid: &Grid, topology: &TopologyState) -> TopologyVerdict {
    let mut contents = vec![[BusContents::default(); 2]; grid.substations.len()];
    for (l, line) in grid.lines.iter().enumerate() {
        if topology.line_in_service[l] {
            contents[line.from][topology.line_from_bus[l].index()].line_ends += 1;
            contents[line.to][topology.line_to_bus[l].index()].line_ends += 1;
        }
    }
    for (g, gen) in grid.generators.iter().enumerate() {
        contents[gen.substation][topology.gen_bus[g].index()].injections += 1;
    }
    for (d, load) in grid.loads.iter().enumerate() {
        contents[load.substation][topology.load_bus[d].index()].injections += 1;
    }
    let mut violations = Vec::new();
    for (s, buses) in contents.iter().enumerate() {
        violations.extend(substation_violations(s, buses));
    }
    TopologyVerdict { violations }
}

fn substation_violations(substation: usize, buses: &[BusContents; 2]) -> Vec<BusViolation> {
    let mut out = Vec::new();
    for (b, busbar) in [Busbar::One, Busbar::Two].into_iter().enumerate() {
        let c = buses[b];
        if c.injections > 0 && c.line_ends == 0 {
            out.push(BusViolation {
                substation,
                busbar,
                kind: ViolationKind::InjectionWithoutLine,
            });
        }
    }
    let one = buses[0];
    let two = buses[1];
    if one.line_ends + one.injections > 0 && two.line_ends == 1 && two.injections == 0 {
        out.push(BusViolation {
            substation,
            busbar: Busbar::Two,
            kind: ViolationKind::SingleLineBusbar,
        });
    }
    out
}

/// Busbar rules evaluated for one substation given the busbar of each of its
/// connected endpoints. Used by the candidate enumeration to avoid rebuilding a
/// full topology per partition.
pub(crate) fn local_assignment_is_legal(connected: &[Endpoint], buses: &[Busbar]) -> bool {
    let mut contents = [BusContents::default(); 2];
    for (e, b) in connected.iter().zip(buses) {
        if e.is_injection() {
            contents[b.index()].injections += 1;
        } else {
            contents[b.index()].line_ends += 1;
        }
    }
    substation_violations(0, &contents).is_empty()
}
