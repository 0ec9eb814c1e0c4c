//! Grids and chronics a session can be created from.
//!
//! Besides files loaded from a fixtures directory (`*.json` grids named by
//! their `name` field, `*.csv` chronics named by file stem), the registry
//! resolves two kinds of generated references:
//!
//! * `synthetic-118-<seed>`: a synthetic grid at 118-substation scale;
//! * `<grid name>-<calm|congested>-<seed>`: a one-day scenario for that grid,
//!   the same id the scenario generator gives it.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, Mutex};

use gridplan::fixtures::{self, SyntheticGridSpec};
use gridplan::scenario::{generate_scenario, Profile};
use gridplan::{Chronic, Grid};

use crate::error::ServiceError;

#[derive(Debug, Default)]
pub struct Registry {
    grids: Mutex<BTreeMap<String, Arc<Grid>>>,
    chronics: Mutex<BTreeMap<String, Arc<Chronic>>>,
}

impl Registry {
    /// The bundled grids only.
    pub fn builtin() -> Registry {
        let reg = Registry::default();
        for name in ["t3", "t3g3", "radial4", "grid14"] {
            reg.add_grid(fixtures::by_name(name).expect("bundled grid"));
        }
        reg
    }

    /// Bundled grids plus every grid and chronic file in `dir`.
    pub fn load_dir(dir: impl AsRef<Path>) -> gridplan::Result<Registry> {
        let dir = dir.as_ref();
        let reg = Registry::builtin();
        let entries = std::fs::read_dir(dir).map_err(|e| gridplan::Error::Invalid(format!("{}: {e}", dir.display())))?;
        let mut paths: Vec<_> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
        paths.sort();
        for path in paths {
            match path.extension().and_then(|e| e.to_str()) {
                Some("json") => reg.add_grid(gridplan::grid::load_grid(&path)?),
                Some("csv") => reg.add_chronic(Chronic::load(&path)?),
                _ => {}
            }
        }
        Ok(reg)
    }

    pub fn add_grid(&self, grid: Grid) {
        self.grids.lock().unwrap().insert(grid.name.clone(), Arc::new(grid));
    }

    pub fn add_chronic(&self, chronic: Chronic) {
        self.chronics
            .lock()
            .unwrap()
            .insert(chronic.scenario_id.clone(), Arc::new(chronic));
    }

    pub fn grid_names(&self) -> Vec<String> {
        self.grids.lock().unwrap().keys().cloned().collect()
    }

    pub fn grid(&self, name: &str) -> Result<Arc<Grid>, ServiceError> {
        if let Some(g) = self.grids.lock().unwrap().get(name) {
            return Ok(g.clone());
        }
        let seed = name
            .strip_prefix("synthetic-118-")
            .and_then(|s| s.parse::<u64>().ok())
            .ok_or_else(|| ServiceError::unknown("grid", name))?;
        let grid = fixtures::synthetic_grid(&SyntheticGridSpec::ieee118_scale(), seed);
        debug_assert_eq!(grid.name, name);
        let grid = Arc::new(grid);
        self.grids.lock().unwrap().insert(name.to_string(), grid.clone());
        Ok(grid)
    }

    /// Looks up a chronic and aligns its columns to `grid`.
    pub fn chronic(&self, grid: &Grid, id: &str) -> Result<Arc<Chronic>, ServiceError> {
        let found = self.chronics.lock().unwrap().get(id).cloned();
        let chronic = match found {
            Some(c) => c,
            None => {
                let (profile, seed) = parse_generated(&grid.name, id).ok_or_else(|| ServiceError::unknown("chronic", id))?;
                let c = Arc::new(generate_scenario(grid, seed, profile, 1)?);
                self.chronics.lock().unwrap().insert(id.to_string(), c.clone());
                c
            }
        };
        Ok(Arc::new(chronic.align(grid)?))
    }
}

fn parse_generated(grid: &str, id: &str) -> Option<(Profile, u64)> {
    let rest = id.strip_prefix(grid)?.strip_prefix('-')?;
    let (profile, seed) = rest.rsplit_once('-')?;
    Some((profile.parse().ok()?, seed.parse().ok()?))
}
