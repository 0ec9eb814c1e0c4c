//! Solves the three-substation triangle for a wind export of 100 MW into a
//! 100 MW load and prints the line flows.

use gridplan::fixtures;
use gridplan::flow::{dc_solve, Injections};

fn main() {
    let grid = fixtures::t3();
    let mut inj = Injections::zeros(&grid);
    inj.gen[grid.generator_index("G2").unwrap()] = 100.0;
    inj.load[grid.load_index("D3").unwrap()] = 100.0;

    let sol = dc_solve(&grid, &grid.reference_topology, &inj).expect("connected grid");
    println!("{:<6} {:>10} {:>8} {:>6}", "line", "flow MW", "limit", "rho");
    for (l, line) in grid.lines.iter().enumerate() {
        println!(
            "{:<6} {:>10.2} {:>8.1} {:>6.2}",
            line.id, sol.flows[l], line.thermal_limit, sol.rho[l]
        );
    }
    println!("slack output {:.2} MW", sol.slack_output);
}
