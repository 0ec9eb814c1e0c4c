//! Relieves the 90 MW line of the triangle with G3 by solving the
//! redispatch LP, then checks the result in the engine.

use gridplan::engine::step;
use gridplan::redispatch::optimize_redispatch;
use gridplan::{fixtures, ChronicRow, EngineConfig, GridState};

fn main() -> gridplan::Result<()> {
    let grid = fixtures::t3g3();
    let row = ChronicRow { load: vec![200.0], gen: vec![100.0, 100.0, 0.0] };
    let state = GridState::initial(&grid, &row, 0);
    println!("before: max rho {:.3}", state.max_rho());

    let r = optimize_redispatch(&grid, &state)?;
    for (g, d) in &r.order.delta {
        println!("  {} {d:+.2} MW", grid.generators[*g].id);
    }
    println!(
        "total |delta| {:.2} MW, predicted max rho {:.3}, insufficient {}",
        r.total_abs_delta, r.predicted_max_rho, r.insufficient
    );

    let after = step(&grid, &state, &r.action(), &row, &EngineConfig::default());
    println!("after:  max rho {:.3}", after.max_rho());
    Ok(())
}
