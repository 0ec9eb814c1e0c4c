//! Synthetic day chronics: diurnal loads, mean-reverting wind, a solar bell
//! curve and a capacity-proportional dispatch plan.
//!
//! Every day is scaled so that its peak loading on the reference topology
//! hits a profile-specific target, then checked with a `NoOp` rollout.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::action::Action;
use crate::chronics::{stable_hash, Chronic, ChronicRow, STEPS_PER_DAY, STEP_HOURS};
use crate::config::EngineConfig;
use crate::engine::{step, GridState};
use crate::error::{Error, Result};
use crate::flow::{ptdf, Ptdf};
use crate::grid::{GenKind, Grid, Region};

/// Peak reference-topology loading of a calm day.
pub const CALM_PEAK: f64 = 0.85;
/// Highest loading a calm day may reach during its check rollout.
pub const CALM_CEILING: f64 = 0.95;
/// Range the peak loading of a congested day is drawn from.
pub const CONGESTED_PEAK: (f64, f64) = (1.08, 1.2);
pub const MAX_ATTEMPTS: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Calm,
    Congested,
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Calm => "calm",
            Profile::Congested => "congested",
        })
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Profile> {
        match s {
            "calm" => Ok(Profile::Calm),
            "congested" => Ok(Profile::Congested),
            other => Err(Error::Invalid(format!("unknown profile `{other}` (calm, congested)"))),
        }
    }
}

/// Generates `days` consecutive days for `grid`. The same inputs always
/// give the same chronic.
pub fn generate_scenario(grid: &Grid, seed: u64, profile: Profile, days: usize) -> Result<Chronic> {
    grid.validate()?;
    if days == 0 {
        return Err(Error::Invalid("days must be >= 1".into()));
    }
    let reference = ptdf(grid, &grid.reference_topology)?;
    let config = EngineConfig::default();
    let scenario_id = format!("{}-{profile}-{seed}", grid.name);
    let mut rows = Vec::with_capacity(days * STEPS_PER_DAY);
    for day in 0..days {
        let mut last_peak = f64::NAN;
        let mut done = false;
        for attempt in 0..MAX_ATTEMPTS {
            let mix = stable_hash(&scenario_id) ^ seed.rotate_left(17) ^ ((day as u64) << 32) ^ attempt;
            let mut rng = ChaCha8Rng::seed_from_u64(mix);
            let target = match profile {
                Profile::Calm => CALM_PEAK,
                Profile::Congested => rng.random_range(CONGESTED_PEAK.0..CONGESTED_PEAK.1),
            };
            let shape = DayShape::draw(grid, &mut rng);
            let Some(day_rows) = scale_to_peak(grid, &reference, &shape, target) else {
                continue;
            };
            last_peak = noop_peak(grid, &day_rows, &config, profile);
            let ok = match profile {
                Profile::Calm => last_peak <= CALM_CEILING,
                Profile::Congested => last_peak > 1.0,
            };
            if ok {
                rows.extend(day_rows);
                done = true;
                break;
            }
        }
        if !done {
            return Err(Error::Generation(format!(
                "{scenario_id}: day {} failed its {profile} check after {MAX_ATTEMPTS} attempts (last peak rho {last_peak:.3})",
                day + 1
            )));
        }
    }
    Ok(Chronic {
        scenario_id,
        seed: Some(seed),
        load_ids: grid.loads.iter().map(|d| d.id.clone()).collect(),
        gen_columns: grid.generators.iter().map(|g| (g.id.clone(), g.kind)).collect(),
        rows,
        perturbation: None,
    })
}

/// Unscaled per-step demand and renewable capacity factors for one day.
struct DayShape {
    /// steps × loads, MW before scaling.
    load: Vec<Vec<f64>>,
    /// steps × generators, capacity factor in [0, 1] (0 for dispatchables).
    renewable: Vec<Vec<f64>>,
}

fn diurnal(hour: f64, industrial: f64) -> f64 {
    let bump = |centre: f64, width: f64| (-((hour - centre) / width).powi(2)).exp();
    let residential = 0.62 + 0.16 * bump(8.5, 2.2) + 0.32 * bump(18.75, 2.6);
    let working = if (7.0..19.0).contains(&hour) { 0.95 } else { 0.8 };
    industrial * working + (1.0 - industrial) * residential
}

impl DayShape {
    fn draw(grid: &Grid, rng: &mut ChaCha8Rng) -> DayShape {
        let n = STEPS_PER_DAY;
        let mut normal = || -> f64 { StandardNormal.sample(rng) };

        let level = 0.9 + 0.15 * normal().tanh().abs();
        let mut load = vec![vec![0.0; grid.loads.len()]; n];
        for (d, l) in grid.loads.iter().enumerate() {
            let nominal = l.p_nominal.unwrap_or(50.0);
            let industrial = (0.3 + 0.2 * normal()).clamp(0.0, 1.0);
            let mut ar = 0.0;
            for (t, row) in load.iter_mut().enumerate() {
                ar = 0.95 * ar + 0.006 * normal();
                let hour = t as f64 * 24.0 / n as f64;
                row[d] = nominal * level * diurnal(hour, industrial) * (1.0 + ar);
            }
        }

        // Wind: one Ornstein-Uhlenbeck capacity factor per region plus a
        // small farm-specific deviation.
        let dt = STEP_HOURS;
        let region_path = |mean: f64, normal: &mut dyn FnMut() -> f64| {
            let mut x = (mean + 0.1 * normal()).clamp(0.0, 1.0);
            let mut path = Vec::with_capacity(n);
            for _ in 0..n {
                x += 0.15 * (mean - x) * dt + 0.12 * dt.sqrt() * normal();
                x = x.clamp(0.0, 1.0);
                path.push(x);
            }
            path
        };
        let west_mean = 0.2 + 0.5 * (0.5 + 0.25 * normal()).clamp(0.0, 1.0);
        let east_mean = 0.2 + 0.5 * (0.5 + 0.25 * normal()).clamp(0.0, 1.0);
        let west = region_path(west_mean, &mut normal);
        let east = region_path(east_mean, &mut normal);
        let clearness = 0.5 + 0.5 * (0.7 + 0.2 * normal()).clamp(0.0, 1.0);

        let mut renewable = vec![vec![0.0; grid.generators.len()]; n];
        for (g, gen) in grid.generators.iter().enumerate() {
            match gen.kind {
                GenKind::Dispatchable => {}
                GenKind::Wind => {
                    let base = if gen.region == Some(Region::East) { &east } else { &west };
                    let mut dev = 0.0;
                    for (t, row) in renewable.iter_mut().enumerate() {
                        dev = 0.97 * dev + 0.01 * normal();
                        row[g] = (base[t] + dev).clamp(0.0, 1.0);
                    }
                }
                GenKind::Solar => {
                    for (t, row) in renewable.iter_mut().enumerate() {
                        let hour = t as f64 * 24.0 / n as f64;
                        let sun = if (6.0..20.0).contains(&hour) {
                            (std::f64::consts::PI * (hour - 6.0) / 14.0).sin().powf(1.5)
                        } else {
                            0.0
                        };
                        row[g] = (sun * clearness * (1.0 + 0.03 * normal())).clamp(0.0, 1.0);
                    }
                }
            }
        }
        DayShape { load, renewable }
    }

    /// Rows with demand scaled by `k`, renewable output scaled by `k` up to
    /// capacity and dispatchables sharing the remainder by capacity.
    fn rows(&self, grid: &Grid, k: f64) -> Vec<ChronicRow> {
        let capacity: f64 = grid
            .generators
            .iter()
            .filter(|g| g.kind == GenKind::Dispatchable)
            .map(|g| g.p_max)
            .sum();
        let round = |x: f64| (x * 1000.0).round() / 1000.0;
        self.load
            .iter()
            .zip(&self.renewable)
            .map(|(load, cf)| {
                let load: Vec<f64> = load.iter().map(|x| round(k * x)).collect();
                let demand: f64 = load.iter().sum();
                let mut gen = vec![0.0; grid.generators.len()];
                let mut renewable = 0.0;
                for (g, gen_spec) in grid.generators.iter().enumerate() {
                    if gen_spec.kind.is_renewable() {
                        gen[g] = round((k * cf[g]).min(1.0) * gen_spec.p_max);
                        renewable += gen[g];
                    }
                }
                let share = ((demand - renewable) / capacity).clamp(0.0, 1.0);
                for (g, gen_spec) in grid.generators.iter().enumerate() {
                    if gen_spec.kind == GenKind::Dispatchable {
                        gen[g] = round((share * gen_spec.p_max).clamp(gen_spec.p_min, gen_spec.p_max));
                    }
                }
                ChronicRow { load, gen }
            })
            .collect()
    }
}

/// Highest reference-topology loading over `rows`, slack balancing.
fn peak_rho(grid: &Grid, reference: &Ptdf, rows: &[ChronicRow]) -> f64 {
    let g = &reference.graph;
    let mut peak: f64 = 0.0;
    let mut inj = vec![0.0; g.len()];
    for row in rows {
        inj.iter_mut().for_each(|x| *x = 0.0);
        for (i, p) in row.gen.iter().enumerate() {
            if i != grid.slack {
                inj[g.gen_node[i]] += p;
            }
        }
        for (d, p) in row.load.iter().enumerate() {
            inj[g.load_node[d]] -= p;
        }
        for (l, f) in reference.flows(&inj).iter().enumerate() {
            peak = peak.max(f.abs() / grid.lines[l].thermal_limit);
        }
    }
    peak
}

fn scale_to_peak(grid: &Grid, reference: &Ptdf, shape: &DayShape, target: f64) -> Option<Vec<ChronicRow>> {
    let mut k = 1.0;
    for _ in 0..30 {
        let rows = shape.rows(grid, k);
        let peak = peak_rho(grid, reference, &rows);
        if !(peak > 0.0) {
            return None;
        }
        if (peak - target).abs() < 1e-3 {
            return Some(rows);
        }
        k *= target / peak;
        if !(0.01..100.0).contains(&k) {
            return None;
        }
    }
    None
}

/// Max ρ of a `NoOp` rollout; stops at the first overload of a congested
/// day (the check only needs one).
fn noop_peak(grid: &Grid, rows: &[ChronicRow], config: &EngineConfig, profile: Profile) -> f64 {
    let mut state = GridState::initial(grid, &rows[0], 0);
    let mut peak = state.max_rho();
    for row in &rows[1..] {
        if profile == Profile::Congested && peak > 1.0 {
            break;
        }
        state = step(grid, &state, &Action::NoOp, row, config);
        peak = peak.max(state.max_rho());
        if state.blackout {
            break;
        }
    }
    peak
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn calm_and_congested_days_meet_their_checks() {
        let grid = fixtures::grid14();
        let calm = generate_scenario(&grid, 3, Profile::Calm, 1).unwrap();
        assert_eq!(calm.step_count(), STEPS_PER_DAY);
        let cfg = EngineConfig::default();
        assert!(noop_peak(&grid, &calm.rows, &cfg, Profile::Calm) <= CALM_CEILING);
        let hot = generate_scenario(&grid, 3, Profile::Congested, 2).unwrap();
        assert_eq!(hot.step_count(), 2 * STEPS_PER_DAY);
        for day in hot.days() {
            assert!(noop_peak(&grid, &day.rows, &cfg, Profile::Congested) > 1.0);
        }
        calm.align(&grid).unwrap();
        hot.align(&grid).unwrap();
    }

    #[test]
    fn same_seed_same_bytes() {
        let grid = fixtures::grid14();
        let bytes = |seed| {
            let mut out = Vec::new();
            generate_scenario(&grid, seed, Profile::Congested, 1)
                .unwrap()
                .write_csv(&mut out)
                .unwrap();
            out
        };
        assert_eq!(bytes(11), bytes(11));
        assert_ne!(bytes(11), bytes(12));
    }

    #[test]
    fn profile_names() {
        assert_eq!("calm".parse::<Profile>().unwrap(), Profile::Calm);
        assert_eq!(Profile::Congested.to_string(), "congested");
        assert!("stormy".parse::<Profile>().is_err());
    }
}
