//! Bundled test grids and a generator for large synthetic grids.
//!
//! * `t3`: triangle S1–S2–S3, slack G1 at S1, wind G2 at S2, load D3 at S3.
//! * `t3g3`: `t3` plus dispatchable G3 at S3 and a 90 MW limit on L13.
//! * `radial4`: chain S1–S2–S3–S4 with a wind farm at the far end.
//! * `grid14`: meshed 14-substation grid with east/west wind and a solar plant.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::flow::{dc_solve, Injections};
use crate::grid::{GenKind, Generator, Grid, Line, Load, Region, Substation};
use crate::topology::TopologyState;

pub const T3_JSON: &str = include_str!("../fixtures/t3.json");
pub const T3G3_JSON: &str = include_str!("../fixtures/t3g3.json");
pub const RADIAL4_JSON: &str = include_str!("../fixtures/radial4.json");
pub const GRID14_JSON: &str = include_str!("../fixtures/grid14.json");

fn parse(text: &str) -> Grid {
    Grid::from_json_str(text).expect("bundled fixture is valid")
}

pub fn t3() -> Grid {
    parse(T3_JSON)
}

pub fn t3g3() -> Grid {
    parse(T3G3_JSON)
}

pub fn radial4() -> Grid {
    parse(RADIAL4_JSON)
}

pub fn grid14() -> Grid {
    parse(GRID14_JSON)
}

/// Looks up a bundled grid by name.
pub fn by_name(name: &str) -> Option<Grid> {
    match name {
        "t3" => Some(t3()),
        "t3g3" => Some(t3g3()),
        "radial4" => Some(radial4()),
        "grid14" => Some(grid14()),
        _ => None,
    }
}

/// Shape of a generated grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticGridSpec {
    pub substations: usize,
    pub lines: usize,
    /// Dispatchable generators including the slack.
    pub dispatchables: usize,
    pub wind: usize,
    pub solar: usize,
    pub loads: usize,
    /// Cap on lines per substation, keeps the split space tractable.
    pub max_degree: usize,
}

impl SyntheticGridSpec {
    /// Element counts of the classic 118-bus test system.
    pub fn ieee118_scale() -> SyntheticGridSpec {
        SyntheticGridSpec {
            substations: 118,
            lines: 186,
            dispatchables: 40,
            wind: 16,
            solar: 6,
            loads: 91,
            max_degree: 7,
        }
    }
}

/// Random planar-ish meshed grid. Thermal limits are set from a nominal
/// dispatch so that the grid starts comfortably loaded.
pub fn synthetic_grid(spec: &SyntheticGridSpec, seed: u64) -> Grid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.substations;
    assert!(n >= 2 && spec.lines >= n - 1, "need a connected grid");
    let pos: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.random_range(0.0..1000.0), rng.random_range(0.0..600.0)])
        .collect();
    let dist = |a: usize, b: usize| ((pos[a][0] - pos[b][0]).powi(2) + (pos[a][1] - pos[b][1]).powi(2)).sqrt();

    let mut degree = vec![0usize; n];
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(spec.lines);
    let mut has = std::collections::HashSet::new();
    // Spanning tree: each substation attaches to its nearest predecessor with room.
    for i in 1..n {
        let j = (0..i)
            .filter(|&j| degree[j] < spec.max_degree)
            .min_by(|&a, &b| dist(i, a).total_cmp(&dist(i, b)))
            .expect("degree cap too small");
        edges.push((j, i));
        has.insert((j.min(i), j.max(i)));
        degree[i] += 1;
        degree[j] += 1;
    }
    // Meshing: short chords between near neighbours.
    let mut attempts = 0;
    while edges.len() < spec.lines {
        attempts += 1;
        assert!(attempts < 100_000, "could not place {} lines", spec.lines);
        let a = rng.random_range(0..n);
        if degree[a] >= spec.max_degree {
            continue;
        }
        let mut near: Vec<usize> = (0..n).filter(|&b| b != a).collect();
        near.sort_by(|&x, &y| dist(a, x).total_cmp(&dist(a, y)));
        let pick = near
            .into_iter()
            .take(6)
            .filter(|&b| degree[b] < spec.max_degree && !has.contains(&(a.min(b), a.max(b))))
            .collect::<Vec<_>>();
        let Some(&b) = pick.choose(&mut rng) else { continue };
        edges.push((a.min(b), a.max(b)));
        has.insert((a.min(b), a.max(b)));
        degree[a] += 1;
        degree[b] += 1;
    }

    let substations: Vec<Substation> = (0..n)
        .map(|i| Substation {
            id: format!("S{}", i + 1),
            name: format!("Substation {}", i + 1),
        })
        .collect();
    let region = |s: usize| if pos[s][0] < 500.0 { Region::West } else { Region::East };

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let loads: Vec<Load> = order
        .iter()
        .take(spec.loads)
        .enumerate()
        .map(|(k, &s)| Load {
            id: format!("D{}", k + 1),
            substation: s,
            p_nominal: Some((rng.random_range(20.0..120.0f64) * 10.0).round() / 10.0),
        })
        .collect();

    let hub = (0..n).max_by_key(|&s| (degree[s], std::cmp::Reverse(s))).unwrap();
    let mut generators = Vec::new();
    let mut gen_sites: Vec<usize> = (0..n).filter(|&s| s != hub).collect();
    gen_sites.shuffle(&mut rng);
    let mut sites = std::iter::once(hub).chain(gen_sites.into_iter().cycle());
    for k in 0..spec.dispatchables {
        let s = sites.next().unwrap();
        let p_max = if k == 0 { 1500.0 } else { (rng.random_range(100.0..400.0f64) / 10.0).round() * 10.0 };
        generators.push(Generator {
            id: format!("G{}", k + 1),
            substation: s,
            kind: GenKind::Dispatchable,
            p_min: 0.0,
            p_max,
            ramp: (p_max * 0.1).round(),
            cost: rng.random_range(20.0..80.0f64).round(),
            region: Some(region(s)),
        });
    }
    for (kind, count, prefix) in [(GenKind::Wind, spec.wind, "W"), (GenKind::Solar, spec.solar, "P")] {
        for k in 0..count {
            let s = sites.next().unwrap();
            let p_max = (rng.random_range(50.0..200.0f64) / 10.0).round() * 10.0;
            generators.push(Generator {
                id: format!("{prefix}{}", k + 1),
                substation: s,
                kind,
                p_min: 0.0,
                p_max,
                ramp: p_max,
                cost: 0.0,
                region: Some(region(s)),
            });
        }
    }

    let lines: Vec<Line> = edges
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| Line {
            id: format!("L{}", k + 1),
            from: a,
            to: b,
            susceptance: (1.0 / (0.02 + dist(a, b) / 1000.0 * 0.3) * 100.0).round() / 100.0,
            thermal_limit: 1.0,
        })
        .collect();

    let mut grid = Grid {
        name: format!("synthetic-{n}-{seed}"),
        substations,
        lines,
        generators,
        loads,
        slack: 0,
        reference_topology: TopologyState {
            line_from_bus: vec![],
            line_to_bus: vec![],
            gen_bus: vec![],
            load_bus: vec![],
            line_in_service: vec![],
        },
        layout: Some(
            (0..n)
                .map(|i| (format!("S{}", i + 1), [pos[i][0].round(), pos[i][1].round()]))
                .collect(),
        ),
    };
    grid.reference_topology = TopologyState::reference(&grid);

    let inj = nominal_injections(&grid);
    let flows = dc_solve(&grid, &grid.reference_topology, &inj)
        .expect("connected synthetic grid solves")
        .flows;
    let mean = flows.iter().map(|f| f.abs()).sum::<f64>() / flows.len() as f64;
    for (line, f) in grid.lines.iter_mut().zip(&flows) {
        line.thermal_limit = ((f.abs() * 1.5).max(0.5 * mean).max(20.0) / 5.0).ceil() * 5.0;
    }
    grid.validate().expect("synthetic grid is valid");
    grid
}

/// Loads at nominal, renewables at 40 % of capacity, dispatchables sharing the
/// rest in proportion to capacity.
pub fn nominal_injections(grid: &Grid) -> Injections {
    let mut inj = Injections::zeros(grid);
    for (d, load) in grid.loads.iter().enumerate() {
        inj.load[d] = load.p_nominal.unwrap_or(0.0);
    }
    let demand: f64 = inj.load.iter().sum();
    let mut renewable = 0.0;
    for g in grid.renewables() {
        inj.gen[g] = 0.4 * grid.generators[g].p_max;
        renewable += inj.gen[g];
    }
    let capacity: f64 = grid
        .generators
        .iter()
        .filter(|g| g.kind == GenKind::Dispatchable)
        .map(|g| g.p_max)
        .sum();
    let share = ((demand - renewable) / capacity).clamp(0.0, 1.0);
    for (g, gen) in grid.generators.iter().enumerate() {
        if gen.kind == GenKind::Dispatchable {
            inj.gen[g] = share * gen.p_max;
        }
    }
    inj
}
