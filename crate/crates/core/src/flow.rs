//! DC load flow and power transfer distribution factors.
//!
//! Flows are in MW; a line with susceptance `b` between nodes at angles
//! `θi`, `θj` carries `b (θi − θj)` from its origin to its extremity. The slack
//! node is the angle reference and absorbs the residual imbalance of its
//! island. Islands without the slack are shed when they hold only generators
//! and make the solve diverge when they hold a load.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::grid::Grid;
use crate::topology::{electrical_nodes, islands, NodeGraph, TopologyState};

/// Relative residual accepted from the linear solve.
pub const SOLVER_RESIDUAL: f64 = 1e-9;

/// MW per element: generator outputs and load consumptions (both ≥ 0 in normal operation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Injections {
    pub gen: Vec<f64>,
    pub load: Vec<f64>,
}

impl Injections {
    pub fn zeros(grid: &Grid) -> Injections {
        Injections {
            gen: vec![0.0; grid.generators.len()],
            load: vec![0.0; grid.loads.len()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DivergenceKind {
    /// A load ended up in an island without the slack.
    IslandedLoad,
    /// The nodal system could not be solved to tolerance.
    Singular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, thiserror::Error)]
pub struct Diverged {
    pub kind: DivergenceKind,
    /// Ids of the elements in the offending island.
    pub elements: Vec<String>,
}

impl fmt::Display for Diverged {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            DivergenceKind::IslandedLoad => {
                write!(f, "island without slack holds load: [{}]", self.elements.join(", "))
            }
            DivergenceKind::Singular => write!(f, "singular nodal system"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSolution {
    pub graph: NodeGraph,
    /// Voltage angle per node; `None` outside the slack island.
    pub angles: Vec<Option<f64>>,
    /// Balanced net injection per node, MW.
    pub node_injection: Vec<f64>,
    /// Signed flow per line (origin → extremity), zero when out of service.
    pub flows: Vec<f64>,
    /// |flow| / thermal limit per line.
    pub rho: Vec<f64>,
    /// Output of the slack generator after balancing.
    pub slack_output: f64,
    /// Generators dropped because their island lost the slack.
    pub shed_generators: Vec<usize>,
}

impl FlowSolution {
    pub fn max_rho(&self) -> f64 {
        self.rho.iter().copied().fold(0.0, f64::max)
    }

    /// Index and loading of the most loaded line.
    pub fn worst_line(&self) -> Option<(usize, f64)> {
        self.rho
            .iter()
            .copied()
            .enumerate()
            .fold(None, |best, (l, r)| match best {
                Some((_, b)) if b >= r => best,
                _ => Some((l, r)),
            })
    }
}

struct Reduced {
    graph: NodeGraph,
    /// Position of each node in the reduced system; `None` for the slack node
    /// and for nodes outside the slack island.
    position: Vec<Option<usize>>,
    in_slack_island: Vec<bool>,
    shed_generators: Vec<usize>,
    matrix: DMatrix<f64>,
}

fn reduce(grid: &Grid, topology: &TopologyState) -> Result<Reduced, Diverged> {
    let graph = electrical_nodes(grid, topology);
    let comps = islands(&graph);
    let mut in_slack_island = vec![false; graph.len()];
    for island in &comps {
        if island.contains_slack {
            for &n in &island.nodes {
                in_slack_island[n] = true;
            }
        } else if island.contains_load {
            return Err(Diverged {
                kind: DivergenceKind::IslandedLoad,
                elements: island_elements(grid, &graph, &island.nodes),
            });
        }
    }
    let shed_generators: Vec<usize> = (0..grid.generators.len())
        .filter(|&g| !in_slack_island[graph.gen_node[g]])
        .collect();

    let mut position = vec![None; graph.len()];
    let mut m = 0;
    for n in 0..graph.len() {
        if in_slack_island[n] && n != graph.slack_node {
            position[n] = Some(m);
            m += 1;
        }
    }
    let mut matrix = DMatrix::<f64>::zeros(m, m);
    for edge in &graph.edges {
        if !in_slack_island[edge.from] {
            continue;
        }
        let b = grid.lines[edge.line].susceptance;
        let (i, j) = (position[edge.from], position[edge.to]);
        if let Some(i) = i {
            matrix[(i, i)] += b;
        }
        if let Some(j) = j {
            matrix[(j, j)] += b;
        }
        if let (Some(i), Some(j)) = (i, j) {
            matrix[(i, j)] -= b;
            matrix[(j, i)] -= b;
        }
    }
    Ok(Reduced {
        graph,
        position,
        in_slack_island,
        shed_generators,
        matrix,
    })
}

fn island_elements(grid: &Grid, graph: &NodeGraph, nodes: &[usize]) -> Vec<String> {
    let inside = |n: usize| nodes.binary_search(&n).is_ok();
    let mut out = Vec::new();
    for (g, &n) in graph.gen_node.iter().enumerate() {
        if inside(n) {
            out.push(grid.generators[g].id.clone());
        }
    }
    for (d, &n) in graph.load_node.iter().enumerate() {
        if inside(n) {
            out.push(grid.loads[d].id.clone());
        }
    }
    for edge in &graph.edges {
        if inside(edge.from) {
            out.push(grid.lines[edge.line].id.clone());
        }
    }
    out
}

fn singular() -> Diverged {
    Diverged {
        kind: DivergenceKind::Singular,
        elements: Vec::new(),
    }
}

/// Solves the DC load flow for a topology and per-element injections.
///
/// The slack generator's entry in `injections` is ignored; its output is set
/// to balance the slack island.
pub fn dc_solve(
    grid: &Grid,
    topology: &TopologyState,
    injections: &Injections,
) -> Result<FlowSolution, Diverged> {
    let reduced = reduce(grid, topology)?;
    let graph = &reduced.graph;
    let n = graph.len();

    let mut node_injection = vec![0.0; n];
    for (g, &p) in injections.gen.iter().enumerate() {
        let node = graph.gen_node[g];
        if g != grid.slack && reduced.in_slack_island[node] {
            node_injection[node] += p;
        }
    }
    for (d, &p) in injections.load.iter().enumerate() {
        node_injection[graph.load_node[d]] -= p;
    }
    if node_injection.iter().any(|v| !v.is_finite()) {
        return Err(singular());
    }
    let slack_output = -node_injection
        .iter()
        .zip(&reduced.in_slack_island)
        .filter(|(_, &inside)| inside)
        .map(|(p, _)| p)
        .sum::<f64>();
    node_injection[graph.slack_node] += slack_output;

    let m = reduced.matrix.nrows();
    let mut rhs = DVector::<f64>::zeros(m);
    for node in 0..n {
        if let Some(i) = reduced.position[node] {
            rhs[i] = node_injection[node];
        }
    }
    let theta = if m == 0 {
        rhs.clone()
    } else {
        let chol = reduced.matrix.clone().cholesky().ok_or_else(singular)?;
        chol.solve(&rhs)
    };
    if m > 0 {
        let residual = (&reduced.matrix * &theta - &rhs).amax();
        let scale = rhs.amax().max(1.0);
        if !(residual <= SOLVER_RESIDUAL * scale) {
            return Err(singular());
        }
    }

    let angles: Vec<Option<f64>> = (0..n)
        .map(|node| {
            if node == graph.slack_node {
                Some(0.0)
            } else {
                reduced.position[node].map(|i| theta[i])
            }
        })
        .collect();
    let mut flows = vec![0.0; grid.lines.len()];
    let mut rho = vec![0.0; grid.lines.len()];
    for edge in &graph.edges {
        if let (Some(a), Some(b)) = (angles[edge.from], angles[edge.to]) {
            let line = &grid.lines[edge.line];
            let f = line.susceptance * (a - b);
            flows[edge.line] = f;
            rho[edge.line] = f.abs() / line.thermal_limit;
        }
    }
    Ok(FlowSolution {
        graph: reduced.graph,
        angles,
        node_injection,
        flows,
        rho,
        slack_output,
        shed_generators: reduced.shed_generators,
    })
}

/// Line-flow sensitivities to nodal injections, withdrawn at the slack.
#[derive(Debug, Clone, PartialEq)]
pub struct Ptdf {
    pub graph: NodeGraph,
    /// lines × nodes; rows of out-of-service lines and columns of nodes
    /// outside the slack island are zero.
    pub matrix: DMatrix<f64>,
}

impl Ptdf {
    pub fn get(&self, line: usize, node: usize) -> f64 {
        self.matrix[(line, node)]
    }

    /// Sensitivity of a line's flow to a transfer from node `a` to node `b`.
    pub fn transfer(&self, line: usize, a: usize, b: usize) -> f64 {
        self.matrix[(line, a)] - self.matrix[(line, b)]
    }

    /// Flow on every line for a vector of nodal injections (slack entry ignored).
    pub fn flows(&self, node_injection: &[f64]) -> Vec<f64> {
        let p = DVector::from_column_slice(node_injection);
        (&self.matrix * p).iter().copied().collect()
    }
}

pub fn ptdf(grid: &Grid, topology: &TopologyState) -> Result<Ptdf, Diverged> {
    let reduced = reduce(grid, topology)?;
    let graph = &reduced.graph;
    let m = reduced.matrix.nrows();
    let inverse = if m == 0 {
        DMatrix::zeros(0, 0)
    } else {
        reduced.matrix.clone().cholesky().ok_or_else(singular)?.inverse()
    };
    let mut matrix = DMatrix::<f64>::zeros(grid.lines.len(), graph.len());
    for edge in &graph.edges {
        if !reduced.in_slack_island[edge.from] {
            continue;
        }
        let b = grid.lines[edge.line].susceptance;
        let (pf, pt) = (reduced.position[edge.from], reduced.position[edge.to]);
        for node in 0..graph.len() {
            let Some(k) = reduced.position[node] else { continue };
            let xf = pf.map_or(0.0, |i| inverse[(i, k)]);
            let xt = pt.map_or(0.0, |j| inverse[(j, k)]);
            matrix[(edge.line, node)] = b * (xf - xt);
        }
    }
    Ok(Ptdf {
        graph: reduced.graph,
        matrix,
    })
}
