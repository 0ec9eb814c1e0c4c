//! Runs the bus-splitting search at the first alert of a congested day on
//! the 14-substation grid and prints the ranked candidates.

use gridplan::agent::observe;
use gridplan::engine::step;
use gridplan::scenario::{generate_scenario, Profile};
use gridplan::search::search;
use gridplan::{fixtures, Action, EngineConfig, GridState};

fn main() -> gridplan::Result<()> {
    let grid = fixtures::grid14();
    let cfg = EngineConfig::default();
    let day = generate_scenario(&grid, 7, Profile::Congested, 1)?;

    let mut state = GridState::initial(&grid, day.row(0), 0);
    let depth = cfg.search.depth;
    let mut t = 0;
    while observe(&grid, &state, &day.rows[t..t + depth], &cfg).is_safe() {
        state = step(&grid, &state, &Action::NoOp, day.row(t), &cfg);
        t += 1;
    }
    println!("alert before step {t}, current max rho {:.3}", state.max_rho());

    let result = search(&grid, &state, &day.rows[t..t + depth], &cfg.search, &cfg);
    println!(
        "{:?}: {} enumerated, NoOp trajectory {:?}",
        result.verdict, result.enumerated, result.baseline_max_rho
    );
    for c in &result.candidates {
        println!(
            "#{} {:<40} prior {:.2} rho {:?}",
            c.rank,
            c.canonical_id,
            c.prior_score,
            c.predicted_max_rho
                .iter()
                .map(|r| format!("{r:.3}"))
                .collect::<Vec<_>>()
        );
    }
    Ok(())
}
