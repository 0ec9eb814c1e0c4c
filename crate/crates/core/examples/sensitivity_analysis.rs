//! Makes topology-only plans for a few congested days and replays them on
//! the four wind perturbations.

use gridplan::chronics::PerturbationKind;
use gridplan::planner::{plan_day, sensitivity_run, PlannerOptions};
use gridplan::scenario::{generate_scenario, Profile};
use gridplan::{fixtures, EngineConfig};

fn main() -> gridplan::Result<()> {
    let grid = fixtures::grid14();
    let cfg = EngineConfig::default();
    let mut days = Vec::new();
    for seed in 1..=8 {
        let day = generate_scenario(&grid, seed, Profile::Congested, 1)?;
        let plan = plan_day(&grid, &day, 1.0, &cfg, PlannerOptions::default())?;
        days.push((day, plan));
    }
    let report = sensitivity_run(&grid, &days, &PerturbationKind::WIND, &cfg)?;
    println!(
        "{:<28} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>9}",
        "scenario", "episodes", "min", "q1", "median", "q3", "max", "improved"
    );
    for s in &report.summary {
        println!(
            "{:<28} {:>8} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>8.0}%",
            s.perturbation.to_string(),
            s.episodes,
            s.min,
            s.q1,
            s.median,
            s.q3,
            s.max,
            100.0 * s.fraction_improved
        );
    }
    Ok(())
}
