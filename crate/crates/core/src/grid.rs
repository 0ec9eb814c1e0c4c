//! Static grid description and the JSON grid file format.
//!
//! A grid file is a single JSON object:
//!
//! ```json
//! {
//!   "name": "t3",
//!   "substations": [{ "id": "S1", "name": "North" }],
//!   "lines": [{ "id": "L12", "from": "S1", "to": "S2", "susceptance": 1.0, "thermal_limit": 100.0 }],
//!   "generators": [{ "id": "G1", "substation": "S1", "kind": "dispatchable",
//!                    "p_min": 0.0, "p_max": 300.0, "ramp": 50.0, "cost": 30.0, "region": "west" }],
//!   "loads": [{ "id": "D3", "substation": "S3", "p_nominal": 100.0 }],
//!   "slack": "G1",
//!   "reference_topology": { "buses": { "L12:from": 1 }, "line_status": { "L12": true } },
//!   "layout": { "S1": [0.0, 0.0] },
//!   "storages": []
//! }
//! ```
//!
//! Powers are in MW, susceptances in per-unit. `reference_topology`, `layout`,
//! `region`, `cost` and `p_nominal` are optional; `storages` is accepted and
//! ignored. Entries missing from `reference_topology` default to busbar 1 and
//! in service.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{Busbar, Endpoint, TopologyState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenKind {
    Dispatchable,
    Wind,
    Solar,
}

impl GenKind {
    pub fn is_renewable(self) -> bool {
        !matches!(self, GenKind::Dispatchable)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    East,
    West,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Substation {
    pub id: String,
    #[serde(default)]
    pub name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub susceptance: f64,
    pub thermal_limit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub id: String,
    pub substation: usize,
    pub kind: GenKind,
    pub p_min: f64,
    pub p_max: f64,
    pub ramp: f64,
    pub cost: f64,
    pub region: Option<Region>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Load {
    pub id: String,
    pub substation: usize,
    /// Typical consumption, used only by synthetic scenario generation.
    pub p_nominal: Option<f64>,
}

/// A validated grid. Element references are indices into the element vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub name: String,
    pub substations: Vec<Substation>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    pub loads: Vec<Load>,
    pub slack: usize,
    pub reference_topology: TopologyState,
    pub layout: Option<BTreeMap<String, [f64; 2]>>,
}

impl Grid {
    pub fn from_json_str(text: &str) -> Result<Grid> {
        let doc: GridDocument =
            serde_json::from_str(text).map_err(|e| Error::InvalidGrid(format!("schema: {e}")))?;
        Grid::from_document(doc)
    }

    pub fn from_document(doc: GridDocument) -> Result<Grid> {
        let mut sub_index = HashMap::new();
        for (i, s) in doc.substations.iter().enumerate() {
            if sub_index.insert(s.id.clone(), i).is_some() {
                return Err(Error::InvalidGrid(format!("duplicate substation id `{}`", s.id)));
            }
        }
        let resolve = |element: &str, sub: &str| -> Result<usize> {
            sub_index
                .get(sub)
                .copied()
                .ok_or_else(|| Error::UnknownSubstation {
                    element: element.to_string(),
                    substation: sub.to_string(),
                })
        };

        let mut lines = Vec::with_capacity(doc.lines.len());
        for l in &doc.lines {
            lines.push(Line {
                id: l.id.clone(),
                from: resolve(&l.id, &l.from)?,
                to: resolve(&l.id, &l.to)?,
                susceptance: l.susceptance,
                thermal_limit: l.thermal_limit,
            });
        }
        let mut generators = Vec::with_capacity(doc.generators.len());
        for g in &doc.generators {
            generators.push(Generator {
                id: g.id.clone(),
                substation: resolve(&g.id, &g.substation)?,
                kind: g.kind,
                p_min: g.p_min,
                p_max: g.p_max,
                ramp: g.ramp,
                cost: g.cost,
                region: g.region,
            });
        }
        let mut loads = Vec::with_capacity(doc.loads.len());
        for d in &doc.loads {
            loads.push(Load {
                id: d.id.clone(),
                substation: resolve(&d.id, &d.substation)?,
                p_nominal: d.p_nominal,
            });
        }
        let slack = generators
            .iter()
            .position(|g| g.id == doc.slack)
            .ok_or_else(|| {
                Error::InvalidGrid(format!("slack generator `{}` does not exist", doc.slack))
            })?;

        let mut grid = Grid {
            name: doc.name,
            substations: doc.substations,
            lines,
            generators,
            loads,
            slack,
            reference_topology: TopologyState::default(),
            layout: doc.layout,
        };
        grid.reference_topology = TopologyState::reference(&grid);
        if let Some(reference) = doc.reference_topology {
            grid.reference_topology = reference.resolve(&grid)?;
        }
        grid.validate()?;
        Ok(grid)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Grid> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Grid::from_json_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(&self.to_document())
            .map_err(|e| Error::parse(path, e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Checks every structural invariant; called by the loaders.
    pub fn validate(&self) -> Result<()> {
        let n_sub = self.substations.len();
        if n_sub == 0 {
            return Err(Error::InvalidGrid("grid has no substations".into()));
        }
        let mut seen = HashMap::new();
        let ids = self
            .lines
            .iter()
            .map(|l| &l.id)
            .chain(self.generators.iter().map(|g| &g.id))
            .chain(self.loads.iter().map(|d| &d.id));
        for id in ids {
            if seen.insert(id.as_str(), ()).is_some() {
                return Err(Error::InvalidGrid(format!("duplicate element id `{id}`")));
            }
        }
        for l in &self.lines {
            if l.from >= n_sub || l.to >= n_sub {
                return Err(Error::InvalidGrid(format!("{}: substation index out of range", l.id)));
            }
            if l.from == l.to {
                return Err(Error::InvalidGrid(format!("{}: line connects a substation to itself", l.id)));
            }
            if !(l.susceptance > 0.0 && l.susceptance.is_finite()) {
                return Err(Error::InvalidGrid(format!("{}: susceptance must be > 0", l.id)));
            }
            if !(l.thermal_limit > 0.0 && l.thermal_limit.is_finite()) {
                return Err(Error::InvalidGrid(format!("{}: thermal_limit must be > 0", l.id)));
            }
        }
        for g in &self.generators {
            if g.substation >= n_sub {
                return Err(Error::InvalidGrid(format!("{}: substation index out of range", g.id)));
            }
            if !(g.p_min <= g.p_max) {
                return Err(Error::InvalidGrid(format!("{}: p_min must not exceed p_max", g.id)));
            }
            if !(g.ramp >= 0.0) {
                return Err(Error::InvalidGrid(format!("{}: ramp must be >= 0", g.id)));
            }
        }
        for d in &self.loads {
            if d.substation >= n_sub {
                return Err(Error::InvalidGrid(format!("{}: substation index out of range", d.id)));
            }
        }
        let slack = self
            .generators
            .get(self.slack)
            .ok_or_else(|| Error::InvalidGrid("slack generator index out of range".into()))?;
        if slack.kind != GenKind::Dispatchable {
            return Err(Error::InvalidGrid(format!(
                "{}: slack generator must be dispatchable, found {:?}",
                slack.id, slack.kind
            )));
        }
        // An injection with no line at its substation can never be connected.
        let mut has_line = vec![false; n_sub];
        for l in &self.lines {
            has_line[l.from] = true;
            has_line[l.to] = true;
        }
        for g in &self.generators {
            if !has_line[g.substation] {
                return Err(Error::InvalidGrid(format!(
                    "{}: substation `{}` has no lines",
                    g.id, self.substations[g.substation].id
                )));
            }
        }
        for d in &self.loads {
            if !has_line[d.substation] {
                return Err(Error::InvalidGrid(format!(
                    "{}: substation `{}` has no lines",
                    d.id, self.substations[d.substation].id
                )));
            }
        }
        self.reference_topology.check_shape(self)?;
        let verdict = crate::topology::validate_topology(self, &self.reference_topology);
        if !verdict.is_legal() {
            return Err(Error::InvalidGrid(format!(
                "reference topology is illegal: {}",
                verdict.describe(self)
            )));
        }
        Ok(())
    }

    pub fn substation_index(&self, id: &str) -> Option<usize> {
        self.substations.iter().position(|s| s.id == id)
    }

    pub fn line_index(&self, id: &str) -> Option<usize> {
        self.lines.iter().position(|l| l.id == id)
    }

    pub fn generator_index(&self, id: &str) -> Option<usize> {
        self.generators.iter().position(|g| g.id == id)
    }

    pub fn load_index(&self, id: &str) -> Option<usize> {
        self.loads.iter().position(|d| d.id == id)
    }

    /// Substation hosting an endpoint.
    pub fn substation_of(&self, endpoint: Endpoint) -> usize {
        match endpoint {
            Endpoint::LineFrom(l) => self.lines[l].from,
            Endpoint::LineTo(l) => self.lines[l].to,
            Endpoint::Generator(g) => self.generators[g].substation,
            Endpoint::Load(d) => self.loads[d].substation,
        }
    }

    /// All endpoints of the grid in canonical order.
    pub fn endpoints(&self) -> impl Iterator<Item = Endpoint> + '_ {
        (0..self.lines.len())
            .map(Endpoint::LineFrom)
            .chain((0..self.lines.len()).map(Endpoint::LineTo))
            .chain((0..self.generators.len()).map(Endpoint::Generator))
            .chain((0..self.loads.len()).map(Endpoint::Load))
    }

    /// Endpoints grouped per substation, each group in canonical order.
    pub fn endpoints_by_substation(&self) -> Vec<Vec<Endpoint>> {
        let mut out = vec![Vec::new(); self.substations.len()];
        for e in self.endpoints() {
            out[self.substation_of(e)].push(e);
        }
        for group in &mut out {
            group.sort();
        }
        out
    }

    /// Stable textual key of an endpoint, e.g. `L12:from`, `G1`, `D3`.
    pub fn endpoint_key(&self, endpoint: Endpoint) -> String {
        match endpoint {
            Endpoint::LineFrom(l) => format!("{}:from", self.lines[l].id),
            Endpoint::LineTo(l) => format!("{}:to", self.lines[l].id),
            Endpoint::Generator(g) => self.generators[g].id.clone(),
            Endpoint::Load(d) => self.loads[d].id.clone(),
        }
    }

    pub fn endpoint_from_key(&self, key: &str) -> Option<Endpoint> {
        if let Some(id) = key.strip_suffix(":from") {
            return self.line_index(id).map(Endpoint::LineFrom);
        }
        if let Some(id) = key.strip_suffix(":to") {
            return self.line_index(id).map(Endpoint::LineTo);
        }
        self.generator_index(key)
            .map(Endpoint::Generator)
            .or_else(|| self.load_index(key).map(Endpoint::Load))
    }

    /// Indices of dispatchable generators other than the slack.
    pub fn free_dispatchables(&self) -> impl Iterator<Item = usize> + '_ {
        self.generators
            .iter()
            .enumerate()
            .filter(move |(i, g)| *i != self.slack && g.kind == GenKind::Dispatchable)
            .map(|(i, _)| i)
    }

    pub fn renewables(&self) -> impl Iterator<Item = usize> + '_ {
        self.generators
            .iter()
            .enumerate()
            .filter(|(_, g)| g.kind.is_renewable())
            .map(|(i, _)| i)
    }

    pub fn to_document(&self) -> GridDocument {
        let sub = |i: usize| self.substations[i].id.clone();
        let reference = TopologyState::reference(self);
        GridDocument {
            name: self.name.clone(),
            substations: self.substations.clone(),
            lines: self
                .lines
                .iter()
                .map(|l| LineRecord {
                    id: l.id.clone(),
                    from: sub(l.from),
                    to: sub(l.to),
                    susceptance: l.susceptance,
                    thermal_limit: l.thermal_limit,
                })
                .collect(),
            generators: self
                .generators
                .iter()
                .map(|g| GeneratorRecord {
                    id: g.id.clone(),
                    substation: sub(g.substation),
                    kind: g.kind,
                    p_min: g.p_min,
                    p_max: g.p_max,
                    ramp: g.ramp,
                    cost: g.cost,
                    region: g.region,
                })
                .collect(),
            loads: self
                .loads
                .iter()
                .map(|d| LoadRecord {
                    id: d.id.clone(),
                    substation: sub(d.substation),
                    p_nominal: d.p_nominal,
                })
                .collect(),
            slack: self.generators[self.slack].id.clone(),
            reference_topology: (self.reference_topology != reference)
                .then(|| TopologyRecord::from_state(self, &self.reference_topology)),
            layout: self.layout.clone(),
            storages: None,
        }
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ({} substations, {} lines, {} generators, {} loads)",
            self.name,
            self.substations.len(),
            self.lines.len(),
            self.generators.len(),
            self.loads.len()
        )
    }
}

/// Loads and validates a grid file.
pub fn load_grid(path: impl AsRef<Path>) -> Result<Grid> {
    Grid::load(path)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDocument {
    #[serde(default)]
    pub name: String,
    pub substations: Vec<Substation>,
    pub lines: Vec<LineRecord>,
    pub generators: Vec<GeneratorRecord>,
    pub loads: Vec<LoadRecord>,
    pub slack: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_topology: Option<TopologyRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<BTreeMap<String, [f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub storages: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineRecord {
    pub id: String,
    pub from: String,
    pub to: String,
    pub susceptance: f64,
    pub thermal_limit: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorRecord {
    pub id: String,
    pub substation: String,
    pub kind: GenKind,
    pub p_min: f64,
    pub p_max: f64,
    pub ramp: f64,
    #[serde(default)]
    pub cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<Region>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadRecord {
    pub id: String,
    pub substation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_nominal: Option<f64>,
}

/// Topology keyed by element ids, as stored in files and sent over the wire.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyRecord {
    #[serde(default)]
    pub buses: BTreeMap<String, u8>,
    #[serde(default)]
    pub line_status: BTreeMap<String, bool>,
}

impl TopologyRecord {
    pub fn from_state(grid: &Grid, state: &TopologyState) -> TopologyRecord {
        TopologyRecord {
            buses: grid
                .endpoints()
                .map(|e| (grid.endpoint_key(e), state.bus(e).number()))
                .collect(),
            line_status: grid
                .lines
                .iter()
                .enumerate()
                .map(|(i, l)| (l.id.clone(), state.in_service(i)))
                .collect(),
        }
    }

    pub fn resolve(&self, grid: &Grid) -> Result<TopologyState> {
        let mut state = TopologyState::reference(grid);
        for (key, bus) in &self.buses {
            let e = grid.endpoint_from_key(key).ok_or_else(|| {
                Error::TopologyMismatch(format!("unknown element endpoint `{key}`"))
            })?;
            let bus = Busbar::try_from(*bus).map_err(Error::TopologyMismatch)?;
            state.set_bus(e, bus);
        }
        for (id, on) in &self.line_status {
            let l = grid
                .line_index(id)
                .ok_or_else(|| Error::TopologyMismatch(format!("unknown line `{id}`")))?;
            state.set_line_status(l, *on);
        }
        Ok(state)
    }
}
