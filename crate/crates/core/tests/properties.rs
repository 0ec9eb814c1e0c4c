use std::collections::BTreeSet;

use gridplan::chronics::{perturb, PerturbationKind, PerturbationScenario};
use gridplan::engine::{simulate, step, GridState};
use gridplan::fixtures;
use gridplan::flow::{dc_solve, ptdf, Injections};
use gridplan::grid::{GenKind, Load, Region};
use gridplan::scenario::{generate_scenario, Profile};
use gridplan::search::enumerate_candidates;
use gridplan::topology::{electrical_nodes, islands, topology_distance, validate_topology};
use gridplan::{Action, Busbar, ChronicRow, Endpoint, EngineConfig, Grid, TopologyAction, TopologyState};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random legal topology: each actionable substation gets a random legal
/// split with probability one half; a random line may be opened if the
/// grid still solves.
fn random_topology(grid: &Grid, seed: u64) -> TopologyState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut topo = grid.reference_topology.clone();
    for (s, endpoints) in grid.endpoints_by_substation().iter().enumerate() {
        if endpoints.len() < 4 || !rng.random_bool(0.5) {
            continue;
        }
        for _ in 0..20 {
            let mut trial = topo.clone();
            for e in &endpoints[1..] {
                trial.set_bus(*e, if rng.random_bool(0.5) { Busbar::Two } else { Busbar::One });
            }
            let legal = validate_topology(grid, &trial).violations.iter().all(|v| v.substation != s);
            if legal && dc_solve(grid, &trial, &Injections::zeros(grid)).is_ok() {
                topo = trial;
                break;
            }
        }
    }
    if rng.random_bool(0.5) {
        let l = rng.random_range(0..grid.lines.len());
        let mut trial = topo.clone();
        trial.set_line_status(l, false);
        if dc_solve(grid, &trial, &Injections::zeros(grid)).is_ok() {
            topo = trial;
        }
    }
    topo
}

fn random_injections(grid: &Grid, seed: u64) -> Injections {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inj = Injections::zeros(grid);
    for (g, gen) in grid.generators.iter().enumerate() {
        if g != grid.slack {
            inj.gen[g] = rng.random_range(0.0..gen.p_max);
        }
    }
    for d in &mut inj.load {
        *d = rng.random_range(0.0..80.0);
    }
    inj
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn nodal_balance(topo_seed in any::<u64>(), inj_seed in any::<u64>()) {
        let grid = fixtures::grid14();
        let topo = random_topology(&grid, topo_seed);
        let inj = random_injections(&grid, inj_seed);
        let sol = dc_solve(&grid, &topo, &inj).unwrap();
        // Power balance over the slack island.
        let produced: f64 = inj.gen.iter().enumerate()
            .filter(|(g, _)| *g != grid.slack && !sol.shed_generators.contains(g))
            .map(|(_, p)| p)
            .sum::<f64>() + sol.slack_output;
        let consumed: f64 = inj.load.iter().sum();
        prop_assert!((produced - consumed).abs() < 1e-6);
        // Kirchhoff at every node: injection equals net outflow.
        let mut net = vec![0.0; sol.graph.len()];
        for e in &sol.graph.edges {
            net[e.from] += sol.flows[e.line];
            net[e.to] -= sol.flows[e.line];
        }
        for (n, x) in net.iter().enumerate() {
            if n != sol.graph.slack_node {
                prop_assert!((x - sol.node_injection[n]).abs() < 1e-6, "node {n}: {x} vs {}", sol.node_injection[n]);
            }
        }
    }

    #[test]
    fn flows_are_linear(topo_seed in any::<u64>(), a in any::<u64>(), b in any::<u64>(), k in -3.0f64..3.0) {
        let grid = fixtures::grid14();
        let topo = random_topology(&grid, topo_seed);
        let (x, y) = (random_injections(&grid, a), random_injections(&grid, b));
        let combo = Injections {
            gen: x.gen.iter().zip(&y.gen).map(|(p, q)| k * p + q).collect(),
            load: x.load.iter().zip(&y.load).map(|(p, q)| k * p + q).collect(),
        };
        let fx = dc_solve(&grid, &topo, &x).unwrap().flows;
        let fy = dc_solve(&grid, &topo, &y).unwrap().flows;
        let fc = dc_solve(&grid, &topo, &combo).unwrap().flows;
        for l in 0..grid.lines.len() {
            prop_assert!((fc[l] - (k * fx[l] + fy[l])).abs() < 1e-7);
        }
    }

    #[test]
    fn reversing_a_line_negates_its_flow(topo_seed in any::<u64>(), inj_seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let grid = fixtures::grid14();
        let topo = random_topology(&grid, topo_seed);
        let inj = random_injections(&grid, inj_seed);
        let l = pick.index(grid.lines.len());
        let mut flipped = grid.clone();
        let line = &mut flipped.lines[l];
        std::mem::swap(&mut line.from, &mut line.to);
        let mut ftopo = topo.clone();
        let (f, t) = (topo.line_from_bus[l], topo.line_to_bus[l]);
        ftopo.line_from_bus[l] = t;
        ftopo.line_to_bus[l] = f;
        let a = dc_solve(&grid, &topo, &inj).unwrap().flows;
        let b = dc_solve(&flipped, &ftopo, &inj).unwrap().flows;
        for k in 0..a.len() {
            let want = if k == l { -a[k] } else { a[k] };
            prop_assert!((b[k] - want).abs() < 1e-9);
        }
    }

    #[test]
    fn islands_partition_the_nodes(seed in any::<u64>(), outages in prop::collection::vec(any::<prop::sample::Index>(), 0..6)) {
        let grid = fixtures::grid14();
        let mut topo = random_topology(&grid, seed);
        for o in outages {
            topo.set_line_status(o.index(grid.lines.len()), false);
        }
        let g = electrical_nodes(&grid, &topo);
        let mut seen: Vec<usize> = islands(&g).into_iter().flat_map(|i| i.nodes).collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..g.len()).collect::<Vec<_>>());
    }

    #[test]
    fn topology_distance_is_a_metric(a in any::<u64>(), b in any::<u64>(), c in any::<u64>()) {
        let grid = fixtures::grid14();
        let (x, y, z) = (random_topology(&grid, a), random_topology(&grid, b), random_topology(&grid, c));
        let d = |p: &TopologyState, q: &TopologyState| topology_distance(p, q).unwrap().total();
        prop_assert_eq!(d(&x, &x), 0);
        prop_assert_eq!(d(&x, &y), d(&y, &x));
        prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z));
    }

    #[test]
    fn perturbation_scales_wind_only(seed in 0u64..50, which in 0usize..4) {
        let grid = fixtures::grid14();
        let day = generate_scenario(&grid, seed, Profile::Calm, 1).unwrap();
        let kind = PerturbationKind::WIND[which];
        let sc = PerturbationScenario::new(kind, &grid).unwrap();
        let out = perturb(&day, &sc);
        prop_assert_eq!(out.perturbation, Some(kind));
        for (r0, r1) in day.rows.iter().zip(&out.rows) {
            prop_assert_eq!(&r0.load, &r1.load);
            for (g, gen) in grid.generators.iter().enumerate() {
                if gen.kind == GenKind::Wind {
                    let east = gen.region == Some(Region::East);
                    let f = match kind {
                        PerturbationKind::WindAllUp10 => 1.1,
                        PerturbationKind::WindAllDown10 => 0.9,
                        PerturbationKind::WindEastUp25WestDown25 => if east { 1.25 } else { 0.75 },
                        PerturbationKind::WindWestUp25EastDown25 => if east { 0.75 } else { 1.25 },
                        PerturbationKind::Identity => 1.0,
                    };
                    let want = r0.gen[g] * f;
                    prop_assert!((r1.gen[g] - want).abs() <= 1e-12 * want.abs());
                } else {
                    prop_assert_eq!(r0.gen[g], r1.gen[g]);
                }
            }
        }
    }

    #[test]
    fn step_is_deterministic_and_pure(seed in any::<u64>(), load in 50.0f64..260.0, wind in 0.0f64..200.0) {
        let grid = fixtures::t3g3();
        let cfg = EngineConfig::default();
        let row = ChronicRow { load: vec![load], gen: vec![0.0, wind, 0.0] };
        let s = GridState::initial(&grid, &row, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cands = enumerate_candidates(&grid, &s);
        let action = if cands.is_empty() || rng.random_bool(0.3) {
            Action::NoOp
        } else {
            Action::Topology(cands[rng.random_range(0..cands.len())].clone())
        };
        let before = s.clone();
        let a = step(&grid, &s, &action, &row, &cfg);
        let b = step(&grid, &s, &action, &row, &cfg);
        let c = simulate(&grid, &s, &action, &row, &cfg);
        prop_assert_eq!(&s, &before);
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(&a, &c);
    }
}

/// Injecting one MW at a node (probe load of −1 MW) changes line flows by
/// that node's PTDF column.
fn check_ptdf_by_unit_injection(grid: &Grid, topo: &TopologyState) {
    let p = ptdf(grid, topo).unwrap();
    let live: Vec<usize> = islands(&p.graph)
        .into_iter()
        .find(|i| i.contains_slack)
        .unwrap()
        .nodes;
    for n in (0..p.graph.len()).filter(|n| !live.contains(n)) {
        assert!((0..grid.lines.len()).all(|l| p.get(l, n) == 0.0));
    }
    let mut probed = grid.clone();
    let mut ptopo = topo.clone();
    let first_probe = probed.loads.len();
    for &n in &live {
        let node = &p.graph.nodes[n];
        probed.loads.push(Load {
            id: format!("probe{n}"),
            substation: node.substation,
            p_nominal: None,
        });
        ptopo.load_bus.push(node.busbar);
    }
    probed.reference_topology.load_bus.resize(probed.loads.len(), Busbar::One);
    let zero = Injections::zeros(&probed);
    for (k, &n) in live.iter().enumerate() {
        let mut inj = zero.clone();
        inj.load[first_probe + k] = -1.0;
        let flows = dc_solve(&probed, &ptopo, &inj).unwrap().flows;
        for l in 0..grid.lines.len() {
            assert!(
                (flows[l] - p.get(l, n)).abs() < 1e-8,
                "line {l} node {n}: {} vs {}",
                flows[l],
                p.get(l, n)
            );
        }
    }
}

#[test]
fn ptdf_matches_unit_injection_resolve() {
    let grid = fixtures::grid14();
    check_ptdf_by_unit_injection(&grid, &grid.reference_topology);
    for seed in 0..5 {
        check_ptdf_by_unit_injection(&grid, &random_topology(&grid, 1000 + seed));
    }
}

/// Reference enumeration: every assignment of the connected elements,
/// mirrored so the first element sits on busbar 1, legal by the full-grid
/// validator, minus the current arrangement.
fn brute_force_splits(grid: &Grid, state: &GridState, s: usize) -> BTreeSet<String> {
    let elems: Vec<Endpoint> = {
        let mut v: Vec<Endpoint> = grid.endpoints_by_substation()[s]
            .iter()
            .copied()
            .filter(|e| state.topology.is_connected(*e))
            .collect();
        v.sort();
        v
    };
    let n = elems.len();
    let mut out = BTreeSet::new();
    if n < 4 {
        return out;
    }
    let canon = |bus: &dyn Fn(Endpoint) -> Busbar| -> Vec<Busbar> {
        let flip = bus(elems[0]) == Busbar::Two;
        elems
            .iter()
            .map(|e| {
                let b = bus(*e);
                if flip {
                    if b == Busbar::One { Busbar::Two } else { Busbar::One }
                } else {
                    b
                }
            })
            .collect()
    };
    let current = canon(&|e| state.topology.bus(e));
    for mask in 0u32..(1 << n) {
        let buses: Vec<Busbar> = (0..n)
            .map(|i| if mask >> i & 1 == 1 { Busbar::Two } else { Busbar::One })
            .collect();
        let lookup = |e: Endpoint| buses[elems.iter().position(|x| *x == e).unwrap()];
        let c = canon(&lookup);
        if c == current {
            continue;
        }
        let mut topo = state.topology.clone();
        for (e, b) in elems.iter().zip(&c) {
            topo.set_bus(*e, *b);
        }
        if validate_topology(grid, &topo).violations.iter().any(|v| v.substation == s) {
            continue;
        }
        let action = TopologyAction::SetSubstation {
            substation: s,
            buses: elems.iter().copied().zip(c).collect(),
        };
        out.insert(action.canonical_id(grid));
    }
    out
}

fn check_enumeration(grid: &Grid, state: &GridState) -> usize {
    let cands = enumerate_candidates(grid, state);
    let mut checked = 0;
    for s in 0..grid.substations.len() {
        let size = grid.endpoints_by_substation()[s]
            .iter()
            .filter(|e| state.topology.is_connected(**e))
            .count();
        if size > 6 {
            continue;
        }
        let got: BTreeSet<String> = cands
            .iter()
            .filter(|a| a.substation() == Some(s))
            .map(|a| a.canonical_id(grid))
            .collect();
        let ids: Vec<String> = cands
            .iter()
            .filter(|a| a.substation() == Some(s))
            .map(|a| a.canonical_id(grid))
            .collect();
        assert_eq!(ids.len(), got.len(), "duplicate candidates at {s}");
        assert_eq!(got, brute_force_splits(grid, state, s), "substation {}", grid.substations[s].id);
        checked += 1;
    }
    checked
}

#[test]
fn enumeration_matches_brute_force() {
    let grid = fixtures::grid14();
    let row = ChronicRow {
        load: grid.loads.iter().map(|l| l.p_nominal.unwrap_or(0.0)).collect(),
        gen: vec![0.0; grid.generators.len()],
    };
    let mut state = GridState::initial(&grid, &row, 0);
    assert!(check_enumeration(&grid, &state) > 0);
    for seed in 0..20 {
        state.topology = random_topology(&grid, seed);
        check_enumeration(&grid, &state);
    }
    let big = fixtures::synthetic_grid(&fixtures::SyntheticGridSpec::ieee118_scale(), 3);
    let row = ChronicRow {
        load: big.loads.iter().map(|l| l.p_nominal.unwrap_or(0.0)).collect(),
        gen: vec![0.0; big.generators.len()],
    };
    let state = GridState::initial(&big, &row, 0);
    assert!(check_enumeration(&big, &state) > 50);
}

#[test]
fn busbar_swaps_never_both_appear() {
    let grid = fixtures::grid14();
    let row = ChronicRow {
        load: grid.loads.iter().map(|l| l.p_nominal.unwrap_or(0.0)).collect(),
        gen: vec![0.0; grid.generators.len()],
    };
    let state = GridState::initial(&grid, &row, 0);
    let mut seen = BTreeSet::new();
    for a in enumerate_candidates(&grid, &state) {
        if let TopologyAction::SetSubstation { substation, buses } = a {
            let mirrored: Vec<(Endpoint, Busbar)> = buses
                .iter()
                .map(|(e, b)| (*e, if *b == Busbar::One { Busbar::Two } else { Busbar::One }))
                .collect();
            assert!(!seen.contains(&(substation, mirrored)));
            seen.insert((substation, buses));
        }
    }
}
