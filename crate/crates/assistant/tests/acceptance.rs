//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use gridplan::agent::{decide, observe, DecisionKind};
use gridplan::chronics::{perturb, PerturbationKind, PerturbationScenario};
use gridplan::engine::{step, GridState};
use gridplan::fixtures;
use gridplan::flow::{dc_solve, ptdf, Injections};
use gridplan::grid::{GenKind, Load, Region};
use gridplan::planner::{
    compare_alphas, congestion_episodes, episode_deltas, plan_day, rollout_day, sensitivity_run, Policy, PlannerOptions,
};
use gridplan::redispatch::optimize_redispatch;
use gridplan::scenario::{generate_scenario, Profile};
use gridplan::search::enumerate_candidates;
use gridplan::topology::{islands, validate_topology};
use gridplan::{
    Action, Busbar, Chronic, ChronicRow, Endpoint, EngineConfig, Grid, RedispatchOrder, TopologyAction, TopologyState,
};
use gridplan_assistant::session::{Mode, Session};
use gridplan_assistant::Registry;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("dc solver oracle", dc_oracle),
        ("ptdf vs unit-injection re-solve", ptdf_finite_differences),
        ("redispatch lp vs brute force", lp_brute_force),
        ("split enumeration oracle", enumeration_oracle),
        ("alpha endpoints", alpha_endpoints),
        ("alpha trend", alpha_trend),
        ("safe-state behaviour", safe_state),
        ("sensitivity pipeline", sensitivity_pipeline),
        ("recommendation latency", latency),
        ("protection semantics", protection),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let started = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {name} ({secs:.1} s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name} ({secs:.1} s): {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn dc_oracle() -> Outcome {
    let grid = fixtures::t3();
    let mut inj = Injections::zeros(&grid);
    inj.gen[1] = 100.0;
    inj.load[0] = 100.0;
    // Reduced susceptance matrix at S2, S3 is [[2, -1], [-1, 2]] with
    // P = (100, -100), so θ = (100/3, -100/3) and θ1 = 0.
    let expected = [-100.0 / 3.0, 100.0 / 3.0, 200.0 / 3.0];
    let started = Instant::now();
    let sol = dc_solve(&grid, &grid.reference_topology, &inj).map_err(|e| e.to_string())?;
    let micros = started.elapsed().as_micros();
    for (l, (got, want)) in sol.flows.iter().zip(expected).enumerate() {
        ensure!((got - want).abs() < 1e-6, "{}: {got} vs {want}", grid.lines[l].id);
    }
    Ok(format!("flows {:.4?} MW in {micros} µs", sol.flows))
}

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

fn ptdf_finite_differences() -> Outcome {
    let grid = fixtures::grid14();
    let mut worst: f64 = 0.0;
    let mut entries = 0;
    let mut split_topologies = 0;
    for seed in 0..5 {
        let topo = random_topology(&grid, 500 + seed);
        if topo != grid.reference_topology {
            split_topologies += 1;
        }
        let p = ptdf(&grid, &topo).map_err(|e| e.to_string())?;
        let live = islands(&p.graph).into_iter().find(|i| i.contains_slack).unwrap().nodes;
        for n in (0..p.graph.len()).filter(|n| !live.contains(n)) {
            ensure!((0..grid.lines.len()).all(|l| p.get(l, n) == 0.0), "non-zero column outside the slack island");
        }
        // One probe load per node; withdrawing −1 MW injects 1 MW there.
        let mut probed = grid.clone();
        let mut ptopo = topo.clone();
        let first = probed.loads.len();
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
        for (k, &n) in live.iter().enumerate() {
            let mut inj = Injections::zeros(&probed);
            inj.load[first + k] = -1.0;
            let flows = dc_solve(&probed, &ptopo, &inj).map_err(|e| e.to_string())?.flows;
            for l in 0..grid.lines.len() {
                let err = (flows[l] - p.get(l, n)).abs();
                worst = worst.max(err);
                entries += 1;
                ensure!(err < 1e-8, "topology {seed}, line {l}, node {n}: error {err:e}");
            }
        }
    }
    Ok(format!("5 topologies ({split_topologies} off reference), {entries} entries, max error {worst:.1e}"))
}

/// T3+G3 with the given parameters: G1 slack at S1, wind G2 at S2, G3 and
/// the load at S3.
fn t3g3_variant(susceptance: [f64; 3], limits: [f64; 3], g3_ramp: f64) -> Grid {
    let mut doc: serde_json::Value = serde_json::from_str(fixtures::T3G3_JSON).unwrap();
    for l in 0..3 {
        doc["lines"][l]["susceptance"] = susceptance[l].into();
        doc["lines"][l]["thermal_limit"] = limits[l].into();
    }
    doc["generators"][2]["ramp"] = g3_ramp.into();
    doc["name"] = "t3g3-variant".into();
    Grid::from_json_str(&doc.to_string()).unwrap()
}

struct BruteForce {
    delta: f64,
    worst: f64,
}

/// Scans ΔG3 at 0.1 MW (the slack takes −ΔG3), minimizing first
/// max(1, worst ρ) and then |ΔG3| + |Δslack|, with each point re-solved.
fn brute_force_g3(grid: &Grid, state: &GridState) -> BruteForce {
    let g3 = &grid.generators[2];
    let slack = &grid.generators[grid.slack];
    let d3 = state.dispatch[2];
    let d1 = state.dispatch[grid.slack];
    let lo = (-g3.ramp).max(g3.p_min - d3).max(-(slack.p_max - d1)).min(0.0);
    let hi = g3.ramp.min(g3.p_max - d3).min(-(slack.p_min - d1)).max(0.0);
    let worst_at = |delta: f64| {
        let inj = Injections {
            gen: vec![0.0, state.dispatch[1], d3 + delta],
            load: state.load.clone(),
        };
        dc_solve(grid, &state.topology, &inj).unwrap().max_rho()
    };
    let steps = ((hi - lo) / 0.1).floor() as i64;
    let points: Vec<(f64, f64)> = (0..=steps)
        .map(|i| {
            let d = lo + 0.1 * i as f64;
            (d, worst_at(d))
        })
        .chain([(0.0, worst_at(0.0))])
        .collect();
    let t_star = points.iter().map(|p| p.1.max(1.0)).fold(f64::INFINITY, f64::min);
    let best = points
        .iter()
        .filter(|p| p.1.max(1.0) <= t_star + 1e-12)
        .min_by(|a, b| a.0.abs().total_cmp(&b.0.abs()))
        .unwrap();
    BruteForce {
        delta: best.0,
        worst: best.1,
    }
}

fn check_lp(grid: &Grid, row: &ChronicRow) -> Result<(f64, f64, f64), String> {
    let state = GridState::initial(grid, row, 0);
    let r = optimize_redispatch(grid, &state).map_err(|e| e.to_string())?;
    let lp_g3 = r.order.delta.iter().find(|(g, _)| *g == 2).map_or(0.0, |d| d.1);
    let bf = brute_force_g3(grid, &state);
    let bf_total = 2.0 * bf.delta.abs();
    ensure!(
        (lp_g3 - bf.delta).abs() <= 0.2,
        "ΔG3 lp {lp_g3:.3} vs brute force {:.3} (worst ρ {:.4})",
        bf.delta,
        bf.worst
    );
    ensure!(
        (r.total_abs_delta - bf_total).abs() <= 0.2,
        "total lp {:.3} vs brute force {bf_total:.3}",
        r.total_abs_delta
    );
    Ok((lp_g3, r.total_abs_delta, bf.delta))
}

fn lp_brute_force() -> Outcome {
    let grid = fixtures::t3g3();
    let row = ChronicRow {
        load: vec![200.0],
        gen: vec![100.0, 100.0, 0.0],
    };
    let (g3, total, bf) = check_lp(&grid, &row)?;
    let state = GridState::initial(&grid, &row, 0);
    let r = optimize_redispatch(&grid, &state).map_err(|e| e.to_string())?;
    let g1 = r.order.delta.iter().find(|(g, _)| *g == grid.slack).map_or(-g3, |d| d.1);
    ensure!((g1 + 15.0).abs() < 1e-6 && (g3 - 15.0).abs() < 1e-6, "Δ = ({g1}, {g3}), expected (-15, +15)");
    ensure!((total - 30.0).abs() < 1e-6, "total {total}, expected 30");

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut fixtures_checked = 0;
    let mut insufficient = 0;
    while fixtures_checked < 10 {
        let b = [0.5, 0.5, 0.5].map(|lo: f64| rng.random_range(lo..2.0));
        let lim = [0; 3].map(|_| rng.random_range(60.0..140.0));
        let variant = t3g3_variant(b, lim, rng.random_range(15.0..80.0));
        let row = ChronicRow {
            load: vec![rng.random_range(120.0..260.0)],
            gen: vec![0.0, rng.random_range(20.0..160.0), rng.random_range(0.0..120.0)],
        };
        let state = GridState::initial(&variant, &row, 0);
        if state.max_rho() <= 1.0 + 1e-6 {
            continue;
        }
        let r = optimize_redispatch(&variant, &state).map_err(|e| e.to_string())?;
        insufficient += r.insufficient as usize;
        check_lp(&variant, &row).map_err(|e| format!("random fixture {fixtures_checked}: {e}"))?;
        fixtures_checked += 1;
    }
    Ok(format!(
        "T3+G3 Δ = ({g1:+.2}, {g3:+.2}) total {total:.2} (brute force ΔG3 {bf:+.1}); 10 random fixtures agree ({insufficient} infeasible to fully relieve)"
    ))
}

fn brute_force_splits(grid: &Grid, state: &GridState, s: usize) -> BTreeSet<String> {
    let mut elems: Vec<Endpoint> = grid.endpoints_by_substation()[s]
        .iter()
        .copied()
        .filter(|e| state.topology.is_connected(*e))
        .collect();
    elems.sort();
    let n = elems.len();
    let mut out = BTreeSet::new();
    if n < 4 {
        return out;
    }
    let flip = |b: Busbar| if b == Busbar::One { Busbar::Two } else { Busbar::One };
    let canon = |buses: Vec<Busbar>| -> Vec<Busbar> {
        if buses[0] == Busbar::Two {
            buses.into_iter().map(flip).collect()
        } else {
            buses
        }
    };
    let current = canon(elems.iter().map(|e| state.topology.bus(*e)).collect());
    for mask in 0u32..(1 << n) {
        let c = canon((0..n).map(|i| if mask >> i & 1 == 1 { Busbar::Two } else { Busbar::One }).collect());
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

fn enumeration_oracle() -> Outcome {
    let mut four_element = 0;
    let mut compared = 0;
    let mut grids = vec![fixtures::grid14()];
    grids.push(fixtures::synthetic_grid(&fixtures::SyntheticGridSpec::ieee118_scale(), 3));
    for grid in &grids {
        let row = ChronicRow {
            load: grid.loads.iter().map(|l| l.p_nominal.unwrap_or(0.0)).collect(),
            gen: vec![0.0; grid.generators.len()],
        };
        let mut state = GridState::initial(grid, &row, 0);
        for seed in 0..6 {
            if seed > 0 {
                state.topology = random_topology(grid, 900 + seed);
            }
            let cands = enumerate_candidates(grid, &state);
            for s in 0..grid.substations.len() {
                let connected: Vec<Endpoint> = grid.endpoints_by_substation()[s]
                    .iter()
                    .copied()
                    .filter(|e| state.topology.is_connected(*e))
                    .collect();
                if connected.len() > 6 || state.substation_cooldowns[s] > 0 {
                    continue;
                }
                let ids: Vec<String> = cands
                    .iter()
                    .filter(|a| a.substation() == Some(s))
                    .map(|a| a.canonical_id(grid))
                    .collect();
                let got: BTreeSet<String> = ids.iter().cloned().collect();
                ensure!(ids.len() == got.len(), "{}: duplicate candidates", grid.substations[s].id);
                let want = brute_force_splits(grid, &state, s);
                ensure!(
                    got == want,
                    "{} {}: enumerated {} vs exhaustive {}",
                    grid.name,
                    grid.substations[s].id,
                    got.len(),
                    want.len()
                );
                compared += 1;
                let lines = connected.iter().filter(|e| e.line().is_some()).count();
                let at_reference = connected.iter().all(|e| state.topology.bus(*e) == Busbar::One);
                if connected.len() == 4 && lines == 3 && at_reference {
                    ensure!(got.len() == 4, "{}: 3 lines + 1 injection gave {}", grid.substations[s].id, got.len());
                    four_element += 1;
                }
            }
        }
    }
    ensure!(four_element > 0, "no 4-element substation (3 lines + 1 injection) found");
    Ok(format!(
        "{compared} substations up to 6 elements match exhaustive enumeration; {four_element} checks of 4-element substations (3 lines + 1 injection) give exactly 4"
    ))
}

fn congested_suite(grid: &Grid) -> Vec<Chronic> {
    (1..=20)
        .map(|seed| generate_scenario(grid, seed, Profile::Congested, 1).unwrap())
        .collect()
}

fn alpha_endpoints() -> Outcome {
    let grid = fixtures::grid14();
    let suite = congested_suite(&grid);
    let cmp = compare_alphas(&grid, &suite, &[0.0, 1.0], &EngineConfig::default(), PlannerOptions::default())
        .map_err(|e| e.to_string())?;
    let a0 = cmp.table.row(Some(0.0)).ok_or("no α=0 row")?;
    let a1 = cmp.table.row(Some(1.0)).ok_or("no α=1 row")?;
    ensure!(a0.switching_operations == 0, "α=0 switching {}", a0.switching_operations);
    ensure!(a1.redispatch_mwh == 0.0, "α=1 redispatch {} MWh", a1.redispatch_mwh);
    Ok(format!(
        "{} days: α=0 switching 0 (redispatch {:.1} MWh), α=1 redispatch 0 MWh (switching {})",
        a0.days, a0.redispatch_mwh, a1.switching_operations
    ))
}

fn alpha_trend() -> Outcome {
    let grid = fixtures::grid14();
    let suite = congested_suite(&grid);
    let alphas = [0.0, 0.25, 0.5, 0.75, 1.0];
    let started = Instant::now();
    let cmp = compare_alphas(&grid, &suite, &alphas, &EngineConfig::default(), PlannerOptions::default())
        .map_err(|e| e.to_string())?;
    let secs = started.elapsed().as_secs_f64();
    let rows: Vec<_> = alphas.iter().map(|a| cmp.table.row(Some(*a)).unwrap()).collect();
    for w in rows.windows(2) {
        ensure!(
            w[1].redispatch_mwh <= w[0].redispatch_mwh + 1e-9,
            "redispatch rises from α={:?} to α={:?}",
            w[0].alpha,
            w[1].alpha
        );
        ensure!(
            w[1].switching_operations >= w[0].switching_operations,
            "switching falls from α={:?} to α={:?}",
            w[0].alpha,
            w[1].alpha
        );
    }
    let mid = rows[2].remaining_congestion_mwh;
    let bound = rows[0].remaining_congestion_mwh.max(rows[4].remaining_congestion_mwh);
    ensure!(mid <= bound, "α=0.5 congestion {mid} > {bound}");
    ensure!(secs < 300.0, "sweep took {secs:.0} s");
    let fmt: Vec<String> = rows
        .iter()
        .map(|r| format!("{}: {:.1} MWh/{} sw", r.label(), r.redispatch_mwh, r.switching_operations))
        .collect();
    Ok(format!("{} ; α=0.5 congestion {mid:.2} ≤ {bound:.2} MWh; sweep {secs:.1} s", fmt.join(", ")))
}

fn safe_state() -> Outcome {
    let grid = fixtures::grid14();
    let cfg = EngineConfig::default();
    for seed in 1..=3 {
        let day = generate_scenario(&grid, seed, Profile::Calm, 1).map_err(|e| e.to_string())?;
        let plan = plan_day(&grid, &day, 0.5, &cfg, PlannerOptions::default()).map_err(|e| e.to_string())?;
        ensure!(plan.steps.len() == 288, "{}: {} steps", day.scenario_id, plan.steps.len());
        ensure!(
            plan.steps.iter().all(|s| s.kind == DecisionKind::Skip),
            "{}: non-skip decision on a calm day",
            day.scenario_id
        );
        let m = &plan.metrics;
        ensure!(
            m.remaining_congestion_mwh == 0.0 && m.switching_operations == 0 && m.redispatch_mwh == 0.0 && m.curtailment_mwh == 0.0,
            "{}: metrics {m:?}",
            day.scenario_id
        );
    }
    let steps = recovery_convergence()?;
    Ok(format!("3 calm days all NoOp with zero metrics; seeded deviation back to reference and plan after {steps} steps"))
}

/// Seeds distance 4 (two 2-endpoint splits) and a 120 MW dispatch deviation
/// with ramps of 50 MW, then lets the agent run on a calm row. Returns the
/// steps it took.
fn recovery_convergence() -> Result<usize, String> {
    let mut grid = fixtures::grid14();
    for g in grid.generators.iter_mut().filter(|g| g.kind == GenKind::Dispatchable) {
        g.ramp = 50.0;
    }
    let cfg = EngineConfig::default();
    let day = generate_scenario(&grid, 11, Profile::Calm, 1).map_err(|e| e.to_string())?;
    let rows = [0.3, 0.5, 0.7]
        .into_iter()
        .flat_map(|share| (0..day.step_count()).step_by(12).map(move |t| (share, t)));
    for (share, t) in rows {
        let row = thermal_row(&grid, day.row(t), share);
        if let Some(seeded) = seed_deviation(&grid, &row, &cfg) {
            let fc = vec![row.clone(); 3];
            let mut s = seeded;
            for k in 1..=7 {
                let d = decide(&grid, &s, &fc, &cfg);
                ensure!(d.status.is_safe(), "alert raised during recovery at step {k}");
                s = step(&grid, &s, &d.action, &row, &cfg);
                ensure!(observe(&grid, &s, &fc, &cfg).is_safe(), "alert after step {k}");
                if s.topology == grid.reference_topology && !s.is_redispatched() {
                    return Ok(k);
                }
            }
            return Err(format!(
                "not recovered after 7 steps: distance {}, redispatched {}",
                gridplan::engine::distance_to_reference(&grid, &s).total(),
                s.is_redispatched()
            ));
        }
    }
    Err("no safe seeded deviation found".into())
}

/// The calm row with `share` of the renewable output moved onto the
/// dispatchable units in proportion to capacity, so that they have room to
/// be redispatched in both directions.
fn thermal_row(grid: &Grid, row: &ChronicRow, share: f64) -> ChronicRow {
    let mut out = row.clone();
    let mut moved = 0.0;
    for g in grid.renewables() {
        moved += share * out.gen[g];
        out.gen[g] *= 1.0 - share;
    }
    let capacity: f64 = grid
        .generators
        .iter()
        .filter(|g| g.kind == GenKind::Dispatchable)
        .map(|g| g.p_max)
        .sum();
    for (g, gen) in grid.generators.iter().enumerate() {
        if gen.kind == GenKind::Dispatchable {
            out.gen[g] += moved * gen.p_max / capacity;
        }
    }
    out
}

/// Two engine steps from the reference state: split one substation and
/// start a redispatch, then split another and complete it. The deviation is
/// measured like the redispatch metric: non-slack deviations plus the
/// slack's balancing change. `None` if nothing leaves a safe state at
/// distance 4 and 120 MW, or if the reference state itself is not safe.
fn seed_deviation(grid: &Grid, row: &ChronicRow, cfg: &EngineConfig) -> Option<GridState> {
    let base = GridState::initial(grid, row, 0);
    let fc = vec![row.clone(); 3];
    if !observe(grid, &base, &fc, cfg).is_safe() {
        return None;
    }
    let free: Vec<usize> = grid.free_dispatchables().collect();
    let fits = |g: usize, d: f64| {
        let p = base.dispatch[g] + d;
        p >= grid.generators[g].p_min && p <= grid.generators[g].p_max
    };
    let slack = &grid.generators[grid.slack];
    let slack_fits = |d: f64| {
        let p = base.dispatch[grid.slack] - d;
        p >= slack.p_min && p <= slack.p_max
    };
    // (first step, second step) orders.
    let mut moves: Vec<(Vec<(usize, f64)>, Vec<(usize, f64)>)> = Vec::new();
    for &a in &free {
        for sign in [1.0, -1.0] {
            if fits(a, 60.0 * sign) && slack_fits(60.0 * sign) {
                moves.push((vec![(a, 50.0 * sign)], vec![(a, 10.0 * sign)]));
            }
        }
        for &b in free.iter().filter(|&&b| b > a) {
            if fits(a, 60.0) && fits(b, -60.0) {
                moves.push((vec![(a, 50.0), (b, -50.0)], vec![(a, 10.0), (b, -10.0)]));
            }
            for sign in [1.0, -1.0] {
                if fits(a, 30.0 * sign) && fits(b, 30.0 * sign) && slack_fits(60.0 * sign) {
                    moves.push((vec![(a, 30.0 * sign), (b, 30.0 * sign)], vec![]));
                }
            }
        }
    }
    // One unit up 60 MW, every other free unit down as far as one ramp
    // allows and the slack covering the rest; the metric is then 2 × 60 MW.
    for &up in &free {
        let mut first = vec![(up, 50.0)];
        let mut cut = 0.0;
        for &down in free.iter().filter(|&&d| d != up) {
            let c = base.dispatch[down].floor().clamp(0.0, 50.0);
            if c > 0.0 {
                first.push((down, -c));
                cut += c;
            }
        }
        if fits(up, 60.0) && cut <= 60.0 && slack_fits(60.0 - cut) {
            moves.push((first, vec![(up, 10.0)]));
        }
    }
    let splits: Vec<TopologyAction> = enumerate_candidates(grid, &base)
        .into_iter()
        .filter(|a| match a {
            TopologyAction::SetSubstation { buses, .. } => buses.iter().filter(|(_, b)| *b == Busbar::Two).count() == 2,
            _ => false,
        })
        .collect();
    for (first, second) in &moves {
        let order = |delta: &Vec<(usize, f64)>| RedispatchOrder {
            delta: delta.clone(),
            curtail: vec![],
        };
        for (i, x) in splits.iter().enumerate() {
            for y in splits[i + 1..].iter().filter(|y| y.substation() != x.substation()) {
                let s1 = step(grid, &base, &Action::Composite { topology: x.clone(), redispatch: order(first) }, row, cfg);
                let a2 = match second.is_empty() {
                    true => Action::Topology(y.clone()),
                    false => Action::Composite { topology: y.clone(), redispatch: order(second) },
                };
                let s2 = step(grid, &s1, &a2, row, cfg);
                let distance = gridplan::engine::distance_to_reference(grid, &s2).total();
                if !s2.blackout
                    && distance == 4
                    && (s2.redispatch_mw(grid) - 120.0).abs() < 1e-9
                    && s1.report.rejection.is_none()
                    && s2.report.rejection.is_none()
                    && s1.report.notes.is_empty()
                    && s2.report.notes.is_empty()
                    && observe(grid, &s2, &fc, cfg).is_safe()
                {
                    return Some(s2);
                }
            }
        }
    }
    None
}

fn sensitivity_pipeline() -> Outcome {
    let grid = fixtures::grid14();
    let cfg = EngineConfig::default();
    let mut days = Vec::new();
    let mut noop_days = Vec::new();
    for seed in 1..=4 {
        let day = generate_scenario(&grid, seed, Profile::Congested, 1).map_err(|e| e.to_string())?;
        let plan = plan_day(&grid, &day, 1.0, &cfg, PlannerOptions::default()).map_err(|e| e.to_string())?;
        let noop = rollout_day(&grid, &day, Policy::NoOp, &cfg, PlannerOptions::default()).map_err(|e| e.to_string())?;
        noop_days.push((day.clone(), noop));
        days.push((day, plan));
    }

    let identity = sensitivity_run(&grid, &days, &[PerturbationKind::Identity], &cfg).map_err(|e| e.to_string())?;
    let mut expected = Vec::new();
    for (day, plan) in &days {
        let actions = plan.actions(&grid).map_err(|e| e.to_string())?;
        let episodes = congestion_episodes(&grid, day, &cfg);
        expected.extend(episode_deltas(&grid, day, &actions, &episodes, &cfg));
    }
    let got: Vec<Option<f64>> = identity.records.iter().map(|r| r.delta_max_rho_pp).collect();
    ensure!(!got.is_empty(), "no congestion episodes");
    ensure!(got == expected, "identity deltas differ from planning-time deltas");

    let noop = sensitivity_run(&grid, &noop_days, &PerturbationKind::WIND, &cfg).map_err(|e| e.to_string())?;
    ensure!(
        noop.records.iter().all(|r| r.delta_max_rho_pp == Some(0.0)),
        "all-NoOp plan gives a non-zero delta"
    );

    let mut worst_rel: f64 = 0.0;
    for kind in PerturbationKind::WIND {
        let sc = PerturbationScenario::new(kind, &grid).map_err(|e| e.to_string())?;
        for (day, _) in &days {
            let p = perturb(day, &sc);
            for (c, (id, gk)) in day.gen_columns.iter().enumerate() {
                let g = grid.generator_index(id).unwrap();
                let factor = match (gk, kind, grid.generators[g].region) {
                    (GenKind::Wind, PerturbationKind::WindAllUp10, _) => 1.1,
                    (GenKind::Wind, PerturbationKind::WindAllDown10, _) => 0.9,
                    (GenKind::Wind, PerturbationKind::WindEastUp25WestDown25, Some(Region::East)) => 1.25,
                    (GenKind::Wind, PerturbationKind::WindEastUp25WestDown25, _) => 0.75,
                    (GenKind::Wind, PerturbationKind::WindWestUp25EastDown25, Some(Region::West)) => 1.25,
                    (GenKind::Wind, PerturbationKind::WindWestUp25EastDown25, _) => 0.75,
                    _ => 1.0,
                };
                for (orig, new) in day.rows.iter().zip(&p.rows) {
                    let want = orig.gen[c] * factor;
                    if factor == 1.0 {
                        ensure!(new.gen[c] == orig.gen[c], "{kind}: non-wind column {id} changed");
                    } else if want != 0.0 {
                        worst_rel = worst_rel.max(((new.gen[c] - want) / want).abs());
                    }
                }
            }
            ensure!(p.rows.iter().zip(&day.rows).all(|(a, b)| a.load == b.load), "{kind}: loads changed");
        }
    }
    ensure!(worst_rel <= 1e-12, "wind scaling relative error {worst_rel:e}");

    let report = sensitivity_run(&grid, &days, &PerturbationKind::WIND, &cfg).map_err(|e| e.to_string())?;
    let fractions: Vec<String> = report
        .summary
        .iter()
        .map(|s| format!("{} {:.0}%", s.perturbation, 100.0 * s.fraction_improved))
        .collect();
    ensure!(report.summary.iter().all(|s| s.fraction_improved.is_finite()), "missing fraction improved");
    Ok(format!(
        "identity reproduces {} planning deltas, NoOp deltas all 0, wind scaling error {worst_rel:.0e}; improved: {}",
        got.len(),
        fractions.join(", ")
    ))
}

fn latency() -> Outcome {
    let reg = Registry::builtin();
    let grid = reg.grid("synthetic-118-3").map_err(|e| e.to_string())?;
    let cfg = EngineConfig::default();
    ensure!(
        cfg.search.depth == 2 && cfg.search.beam == 8 && cfg.search.k == 5 && cfg.screening.lines.is_empty(),
        "unexpected default search configuration"
    );
    let mut samples = Vec::new();
    let mut truncated = 0;
    let mut with_candidates = 0;
    let mut screened = 0;
    let mut seed = 1;
    while samples.len() < 20 && seed <= 12 {
        let chronic = reg
            .chronic(&grid, &format!("{}-congested-{seed}", grid.name))
            .map_err(|e| e.to_string())?;
        seed += 1;
        let mut s = Session::new("latency".into(), grid.clone(), chronic, cfg.clone(), Mode::Paused).map_err(|e| e.to_string())?;
        let mut per_day = 0;
        while per_day < 5 && s.cursor() < s.chronic.step_count() && !s.state().blackout {
            if !s.status().is_safe() {
                let started = Instant::now();
                let list = s.candidates();
                samples.push(started.elapsed().as_secs_f64() * 1e3);
                truncated += list.truncated as usize;
                if let Some(r) = list.recommendations.first() {
                    with_candidates += 1;
                    screened = r.n1.screened;
                }
                per_day += 1;
                // Skip ahead so the samples cover different states.
                let _ = s.advance(6);
            } else {
                let _ = s.advance(1);
            }
        }
    }
    ensure!(samples.len() >= 10, "only {} alert states sampled", samples.len());
    let mut sorted = samples.clone();
    sorted.sort_by(f64::total_cmp);
    let p95 = gridplan::planner::quantile(&sorted, 0.95);
    ensure!(p95 < 3000.0, "p95 {p95:.0} ms");
    Ok(format!(
        "{} cold calls on {} substations / {} lines, N-1 over {screened} lines: median {:.0} ms, p95 {p95:.0} ms, max {:.0} ms ({with_candidates} with candidates, {truncated} hit the search budget)",
        samples.len(),
        grid.substations.len(),
        grid.lines.len(),
        gridplan::planner::quantile(&sorted, 0.5),
        sorted.last().unwrap()
    ))
}

fn protection() -> Outcome {
    let grid = fixtures::t3();
    let cfg = EngineConfig::default();
    let l23 = grid.line_index("L23").unwrap();

    // Meshed: L23 alone at ρ = 1.05.
    let row = ChronicRow { load: vec![157.5], gen: vec![0.0, 157.5] };
    let mut s = GridState::initial(&grid, &row, 0);
    ensure!((s.rho()[l23] - 1.05).abs() < 1e-9, "L23 at ρ {}", s.rho()[l23]);
    for t in 1..=3 {
        s = step(&grid, &s, &Action::NoOp, &row, &cfg);
        let tripped = s.report.tripped_lines.contains(&l23);
        ensure!(tripped == (t == 3), "L23 tripped = {tripped} at step {t}");
    }
    ensure!(!s.blackout && s.report.tripped_lines == vec![l23], "unexpected cascade: {:?}", s.report.tripped_lines);
    let rounds_single = s.report.cascade_rounds;

    // Heavier transfer: the trip pushes both remaining lines past the hard
    // limit, the cascade re-solves until S3 is cut off and the load islanded.
    let row = ChronicRow { load: vec![205.0], gen: vec![0.0, 205.0] };
    let mut s = GridState::initial(&grid, &row, 0);
    for _ in 0..3 {
        s = step(&grid, &s, &Action::NoOp, &row, &cfg);
    }
    ensure!(s.report.tripped_lines.len() == 3, "tripped {:?}", s.report.tripped_lines);
    ensure!(s.blackout, "islanded load did not flag blackout");
    let rounds_cascade = s.report.cascade_rounds;

    // Radial: opening L12 islands the town load of the radial fixture.
    let radial = fixtures::radial4();
    let row = ChronicRow { load: vec![250.0], gen: vec![100.0, 50.0, 100.0] };
    let s = GridState::initial(&radial, &row, 0);
    let open = Action::Topology(TopologyAction::SetLineStatus { line: 0, in_service: false });
    let s = step(&radial, &s, &open, &row, &cfg);
    ensure!(s.blackout, "radial islanding did not flag blackout");

    Ok(format!(
        "ρ 1.05 line trips on step 3 ({rounds_single} rounds); hard-limit cascade trips 3 lines in {rounds_cascade} rounds and flags blackout; islanded load flags blackout"
    ))
}
