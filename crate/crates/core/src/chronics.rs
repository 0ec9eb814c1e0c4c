//! Time series of loads, renewable availability and planned dispatch.
//!
//! CSV layout: a header row, then one row per 5-minute step.
//!
//! ```text
//! step,load_D3,wind_G2,plan_G1
//! 0,100,100,0
//! ```
//!
//! Columns are `load_<load id>`, `wind_<generator id>`, `solar_<generator id>`
//! and `plan_<generator id>` (planned dispatch of a dispatchable generator).
//! The row count must be a multiple of 288 (one day).

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GenKind, Grid, Region};

pub const STEPS_PER_DAY: usize = 288;
pub const STEPS_PER_WEEK: usize = 7 * STEPS_PER_DAY;
/// Hours per step.
pub const STEP_HOURS: f64 = 1.0 / 12.0;

/// Values for one step. Entries follow the owning chronic's column order,
/// which is the grid's element order after [`Chronic::align`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChronicRow {
    /// Consumption per load, MW.
    pub load: Vec<f64>,
    /// Per generator: availability for renewables, planned dispatch otherwise.
    pub gen: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chronic {
    pub scenario_id: String,
    pub seed: Option<u64>,
    pub load_ids: Vec<String>,
    pub gen_columns: Vec<(String, GenKind)>,
    pub rows: Vec<ChronicRow>,
    pub perturbation: Option<PerturbationKind>,
}

impl Chronic {
    pub fn step_count(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, t: usize) -> &ChronicRow {
        &self.rows[t]
    }

    /// Reorders columns to the grid's element order and checks planned
    /// dispatch against generator limits.
    pub fn align(&self, grid: &Grid) -> Result<Chronic> {
        let load_pos: HashMap<&str, usize> = self
            .load_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let gen_pos: HashMap<&str, (usize, GenKind)> = self
            .gen_columns
            .iter()
            .enumerate()
            .map(|(i, (id, kind))| (id.as_str(), (i, *kind)))
            .collect();
        let mut load_map = Vec::with_capacity(grid.loads.len());
        for d in &grid.loads {
            let i = load_pos.get(d.id.as_str()).ok_or_else(|| {
                Error::InvalidChronic(format!("{}: missing column load_{}", self.scenario_id, d.id))
            })?;
            load_map.push(*i);
        }
        let mut gen_map = Vec::with_capacity(grid.generators.len());
        for g in &grid.generators {
            let (i, kind) = gen_pos.get(g.id.as_str()).ok_or_else(|| {
                Error::InvalidChronic(format!(
                    "{}: missing column {}{}",
                    self.scenario_id,
                    column_prefix(g.kind),
                    g.id
                ))
            })?;
            if *kind != g.kind {
                return Err(Error::InvalidChronic(format!(
                    "{}: column for {} is {}, generator is {:?}",
                    self.scenario_id,
                    g.id,
                    column_prefix(*kind).trim_end_matches('_'),
                    g.kind
                )));
            }
            gen_map.push(*i);
        }
        let rows: Vec<ChronicRow> = self
            .rows
            .iter()
            .map(|r| ChronicRow {
                load: load_map.iter().map(|&i| r.load[i]).collect(),
                gen: gen_map.iter().map(|&i| r.gen[i]).collect(),
            })
            .collect();
        for (t, row) in rows.iter().enumerate() {
            for (g, gen) in grid.generators.iter().enumerate() {
                if g != grid.slack && gen.kind == GenKind::Dispatchable {
                    let p = row.gen[g];
                    if p < gen.p_min - 1e-9 || p > gen.p_max + 1e-9 {
                        return Err(Error::InvalidChronic(format!(
                            "{}: row {t}: plan_{} = {p} outside [{}, {}]",
                            self.scenario_id, gen.id, gen.p_min, gen.p_max
                        )));
                    }
                }
            }
        }
        Ok(Chronic {
            scenario_id: self.scenario_id.clone(),
            seed: self.seed,
            load_ids: grid.loads.iter().map(|d| d.id.clone()).collect(),
            gen_columns: grid
                .generators
                .iter()
                .map(|g| (g.id.clone(), g.kind))
                .collect(),
            rows,
            perturbation: self.perturbation,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Chronic> {
        let path = path.as_ref();
        let scenario_id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("chronic")
            .to_string();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Chronic::read_csv(file, scenario_id).map_err(|e| match e {
            Error::InvalidChronic(m) => Error::parse(path, m),
            other => other,
        })
    }

    pub fn read_csv(reader: impl std::io::Read, scenario_id: String) -> Result<Chronic> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::InvalidChronic(e.to_string()))?
            .clone();
        if headers.get(0) != Some("step") {
            return Err(Error::InvalidChronic("first column must be `step`".into()));
        }
        enum Col {
            Load,
            Gen,
        }
        let mut layout = Vec::new();
        let mut load_ids = Vec::new();
        let mut gen_columns = Vec::new();
        for h in headers.iter().skip(1) {
            let (kind, id) = if let Some(id) = h.strip_prefix("load_") {
                (None, id)
            } else if let Some(id) = h.strip_prefix("wind_") {
                (Some(GenKind::Wind), id)
            } else if let Some(id) = h.strip_prefix("solar_") {
                (Some(GenKind::Solar), id)
            } else if let Some(id) = h.strip_prefix("plan_") {
                (Some(GenKind::Dispatchable), id)
            } else {
                return Err(Error::InvalidChronic(format!("unrecognized column `{h}`")));
            };
            match kind {
                None => {
                    load_ids.push(id.to_string());
                    layout.push(Col::Load);
                }
                Some(k) => {
                    gen_columns.push((id.to_string(), k));
                    layout.push(Col::Gen);
                }
            }
        }
        let mut rows = Vec::new();
        for (r, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::InvalidChronic(format!("row {r}: {e}")))?;
            if record.len() != headers.len() {
                return Err(Error::InvalidChronic(format!(
                    "row {r}: expected {} fields, found {}",
                    headers.len(),
                    record.len()
                )));
            }
            record[0].trim().parse::<usize>().map_err(|_| {
                Error::InvalidChronic(format!("row {r}: step `{}` is not an integer", &record[0]))
            })?;
            let mut row = ChronicRow {
                load: Vec::with_capacity(load_ids.len()),
                gen: Vec::with_capacity(gen_columns.len()),
            };
            for (c, col) in layout.iter().enumerate() {
                let raw = record[c + 1].trim();
                let v: f64 = raw.parse().map_err(|_| {
                    Error::InvalidChronic(format!("row {r}, column {}: `{raw}` is not a number", &headers[c + 1]))
                })?;
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidChronic(format!(
                        "row {r}, column {}: value {v} must be finite and >= 0",
                        &headers[c + 1]
                    )));
                }
                match col {
                    Col::Load => row.load.push(v),
                    Col::Gen => row.gen.push(v),
                }
            }
            rows.push(row);
        }
        if rows.is_empty() || rows.len() % STEPS_PER_DAY != 0 {
            return Err(Error::InvalidChronic(format!(
                "row count {} is not a positive multiple of {STEPS_PER_DAY}",
                rows.len()
            )));
        }
        Ok(Chronic {
            scenario_id,
            seed: None,
            load_ids,
            gen_columns,
            rows,
            perturbation: None,
        })
    }

    pub fn write_csv(&self, writer: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let csv_err = |e: csv::Error| Error::Invalid(format!("csv: {e}"));
        let mut header = vec!["step".to_string()];
        header.extend(self.load_ids.iter().map(|id| format!("load_{id}")));
        header.extend(
            self.gen_columns
                .iter()
                .map(|(id, kind)| format!("{}{id}", column_prefix(*kind))),
        );
        w.write_record(&header).map_err(csv_err)?;
        for (t, row) in self.rows.iter().enumerate() {
            let mut rec = Vec::with_capacity(header.len());
            rec.push(t.to_string());
            rec.extend(row.load.iter().map(|v| v.to_string()));
            rec.extend(row.gen.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Invalid(format!("csv: {e}")))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Contiguous slice `[start, end)` as a new chronic.
    pub fn slice(&self, start: usize, end: usize, scenario_id: String) -> Chronic {
        Chronic {
            scenario_id,
            seed: self.seed,
            load_ids: self.load_ids.clone(),
            gen_columns: self.gen_columns.clone(),
            rows: self.rows[start..end].to_vec(),
            perturbation: self.perturbation,
        }
    }

    /// Splits into day-long chronics; any multiple of 288 steps is accepted.
    pub fn days(&self) -> Vec<Chronic> {
        if self.rows.len() == STEPS_PER_DAY {
            return vec![self.clone()];
        }
        (0..self.rows.len() / STEPS_PER_DAY)
            .map(|d| {
                self.slice(
                    d * STEPS_PER_DAY,
                    (d + 1) * STEPS_PER_DAY,
                    format!("{}-day-{}", self.scenario_id, d + 1),
                )
            })
            .collect()
    }
}

fn column_prefix(kind: GenKind) -> &'static str {
    match kind {
        GenKind::Dispatchable => "plan_",
        GenKind::Wind => "wind_",
        GenKind::Solar => "solar_",
    }
}

pub fn load_chronics(path: impl AsRef<Path>) -> Result<Chronic> {
    Chronic::load(path)
}

/// Splits a week (2016 steps) into seven day-long chronics.
pub fn split_week_to_days(chronic: &Chronic) -> Result<Vec<Chronic>> {
    if chronic.step_count() != STEPS_PER_WEEK {
        return Err(Error::InvalidChronic(format!(
            "{}: expected {STEPS_PER_WEEK} steps for a week, found {}",
            chronic.scenario_id,
            chronic.step_count()
        )));
    }
    Ok(chronic.days())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "model")]
pub enum ForecastModel {
    Exact,
    /// Loads and renewables multiplied by iid lognormal factors `exp(σ z)`.
    Noisy { sigma: f64 },
}

/// Rows `t .. t + horizon` as seen by a forecaster.
pub fn forecast(chronic: &Chronic, t: usize, horizon: usize, model: ForecastModel) -> Result<Vec<ChronicRow>> {
    if t + horizon > chronic.step_count() {
        return Err(Error::HorizonOverrun {
            step: t,
            horizon,
            steps: chronic.step_count(),
        });
    }
    let mut rows = chronic.rows[t..t + horizon].to_vec();
    let sigma = match model {
        ForecastModel::Exact => return Ok(rows),
        ForecastModel::Noisy { sigma } => sigma,
    };
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Invalid(format!("forecast sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(rows);
    }
    let seed = stable_hash(&chronic.scenario_id)
        ^ chronic.seed.unwrap_or(0).rotate_left(17)
        ^ (t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = LogNormal::new(0.0, sigma).map_err(|e| Error::Invalid(e.to_string()))?;
    for row in &mut rows {
        for v in &mut row.load {
            *v *= noise.sample(&mut rng);
        }
        for (v, (_, kind)) in row.gen.iter_mut().zip(&chronic.gen_columns) {
            if kind.is_renewable() {
                *v *= noise.sample(&mut rng);
            }
        }
    }
    Ok(rows)
}

/// FNV-1a; stable across platforms and toolchains.
pub(crate) fn stable_hash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    /// Unperturbed original, used as the reference series.
    Identity,
    WindAllUp10,
    WindAllDown10,
    WindEastUp25WestDown25,
    WindWestUp25EastDown25,
}

impl PerturbationKind {
    /// The four wind scenarios (identity excluded).
    pub const WIND: [PerturbationKind; 4] = [
        PerturbationKind::WindAllDown10,
        PerturbationKind::WindAllUp10,
        PerturbationKind::WindEastUp25WestDown25,
        PerturbationKind::WindWestUp25EastDown25,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PerturbationKind::Identity => "identity",
            PerturbationKind::WindAllUp10 => "wind_all_up_10",
            PerturbationKind::WindAllDown10 => "wind_all_down_10",
            PerturbationKind::WindEastUp25WestDown25 => "wind_east_up_25_west_down_25",
            PerturbationKind::WindWestUp25EastDown25 => "wind_west_up_25_east_down_25",
        }
    }

    pub fn from_name(name: &str) -> Option<PerturbationKind> {
        [PerturbationKind::Identity]
            .into_iter()
            .chain(PerturbationKind::WIND)
            .find(|k| k.name() == name)
    }

    fn needs_regions(self) -> bool {
        matches!(
            self,
            PerturbationKind::WindEastUp25WestDown25 | PerturbationKind::WindWestUp25EastDown25
        )
    }

    fn factor(self, region: Option<Region>) -> f64 {
        match (self, region) {
            (PerturbationKind::Identity, _) => 1.0,
            (PerturbationKind::WindAllUp10, _) => 1.10,
            (PerturbationKind::WindAllDown10, _) => 0.90,
            (PerturbationKind::WindEastUp25WestDown25, Some(Region::East)) => 1.25,
            (PerturbationKind::WindEastUp25WestDown25, _) => 0.75,
            (PerturbationKind::WindWestUp25EastDown25, Some(Region::West)) => 1.25,
            (PerturbationKind::WindWestUp25EastDown25, _) => 0.75,
        }
    }
}

impl fmt::Display for PerturbationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A wind perturbation resolved against a grid: one factor per wind generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationScenario {
    pub kind: PerturbationKind,
    pub factors: BTreeMap<String, f64>,
}

impl PerturbationScenario {
    pub fn new(kind: PerturbationKind, grid: &Grid) -> Result<PerturbationScenario> {
        let mut factors = BTreeMap::new();
        for g in grid.generators.iter().filter(|g| g.kind == GenKind::Wind) {
            if kind.needs_regions() && g.region.is_none() {
                return Err(Error::InvalidGrid(format!(
                    "{}: wind generator has no region tag, required by {kind}",
                    g.id
                )));
            }
            factors.insert(g.id.clone(), kind.factor(g.region));
        }
        Ok(PerturbationScenario { kind, factors })
    }
}

/// Scales wind availability columns; every other column is left untouched.
pub fn perturb(chronic: &Chronic, scenario: &PerturbationScenario) -> Chronic {
    let factors: Vec<f64> = chronic
        .gen_columns
        .iter()
        .map(|(id, kind)| match kind {
            GenKind::Wind => scenario.factors.get(id).copied().unwrap_or(1.0),
            _ => 1.0,
        })
        .collect();
    let mut out = chronic.clone();
    for row in &mut out.rows {
        for (v, f) in row.gen.iter_mut().zip(&factors) {
            if *f != 1.0 {
                *v *= f;
            }
        }
    }
    out.perturbation = Some(scenario.kind);
    out
}
