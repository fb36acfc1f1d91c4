//! Mach-Zehnder on a movable board: lab and board views of the click
//! statistics as the board gets heavier, then the measuring device riding
//! on the board.

use qrf::scenario::{run, ScenarioConfig, ScenarioId};

fn main() -> qrf::error::Result<()> {
    println!("{:>8} {:>10} {:>10} {:>10} {:>10}", "m_b", "d", "lab P2", "board P2", "lab V");
    for m_b in [1.0, 10.0, 100.0, 1e3, 1e6] {
        let r = run(&ScenarioConfig { m_b, ..ScenarioConfig::new(ScenarioId::Board) })?;
        let lab = r.interference_in("lab").unwrap();
        let board = r.interference_in("board").unwrap();
        println!("{m_b:>8.0e} {:>10.4e} {:>10.4} {:>10.2e} {:>10.4}", r.d.unwrap(), lab.p2, board.p2, lab.visibility);
    }

    let md = run(&ScenarioConfig::new(ScenarioId::BoardMd))?;
    println!("\nMD on the board: d' = {:.4}", md.d_prime.unwrap());
    for v in &md.verdicts {
        println!("  {:<24} {}", v.name, v.holds);
    }
    Ok(())
}
