//! One operator loop without the HTTP layer: advance a congested day until
//! the assistant has recommendations, print them, stage the second-ranked
//! one, advance, and print the end of the audit trail.

use gridplan::EngineConfig;
use gridplan_assistant::{ApplyRequest, Mode, Registry, ServiceError, Session};

fn main() -> Result<(), ServiceError> {
    let registry = Registry::builtin();
    let grid = registry.grid("grid14")?;
    let chronic = registry.chronic(&grid, "grid14-congested-7")?;
    let mut session = Session::new("demo".into(), grid, chronic, EngineConfig::default(), Mode::Paused)?;

    let list = loop {
        let list = session.candidates();
        if !list.recommendations.is_empty() {
            break list;
        }
        session.advance(1)?;
    };
    println!(
        "step {}: {:?}, max rho {:.3}, {} candidates enumerated in {:.0} ms",
        list.step,
        list.status.level,
        list.status.max_rho,
        list.enumerated,
        list.compute_ms
    );
    for r in &list.recommendations {
        let projected: Vec<String> = r
            .projected_max_rho
            .iter()
            .map(|x| x.map_or("-".into(), |x| format!("{x:.3}")))
            .collect();
        println!(
            "  #{} {:<10} {:<60} projected [{}]  N-1 violations {}",
            r.rank.unwrap_or(0),
            r.kind,
            r.candidate_id,
            projected.join(" "),
            r.n1.violations
        );
    }

    let pick = list.recommendations.get(1).unwrap_or(&list.recommendations[0]);
    let staged = session.apply(&ApplyRequest {
        candidate_id: Some(pick.candidate_id.clone()),
        action: None,
    })?;
    println!("staged {} at step {}", staged.candidate_id, staged.step);
    session.advance(1)?;
    println!("after advance: step {}, max rho {:.3}", session.cursor(), session.state().max_rho());

    let audit = session.audit();
    for e in &audit[audit.len().saturating_sub(3)..] {
        println!("  audit #{} step {} {:?} {:?}: {}", e.seq, e.step, e.actor, e.event, e.outcome);
    }
    Ok(())
}
