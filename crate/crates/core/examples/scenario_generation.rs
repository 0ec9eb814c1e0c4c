//! Generates a calm and a congested week for the 14-substation grid, writes
//! them as chronic CSV files and prints the daily peak loading.

use gridplan::chronics::split_week_to_days;
use gridplan::flow::dc_solve;
use gridplan::flow::Injections;
use gridplan::scenario::{generate_scenario, Profile};
use gridplan::fixtures;

fn main() -> gridplan::Result<()> {
    let grid = fixtures::grid14();
    let out = std::env::temp_dir();
    for profile in [Profile::Calm, Profile::Congested] {
        let week = generate_scenario(&grid, 42, profile, 7)?;
        let path = out.join(format!("{}.csv", week.scenario_id));
        week.save(&path)?;
        println!("{profile}: {} rows -> {}", week.step_count(), path.display());
        for day in split_week_to_days(&week)? {
            let peak = day
                .rows
                .iter()
                .map(|r| {
                    let inj = Injections { gen: r.gen.clone(), load: r.load.clone() };
                    dc_solve(&grid, &grid.reference_topology, &inj).unwrap().max_rho()
                })
                .fold(0.0, f64::max);
            println!("  {:<32} peak rho {peak:.3}", day.scenario_id);
        }
    }
    Ok(())
}
