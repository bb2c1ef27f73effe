//! Checks a program with an installed Dafny. Looks at PF_DAFNY_PATH, then
//! PATH; prints a note and exits cleanly when neither has it.
//!
//! cargo run --example live_dafny -- [file.dfy]

use pforge::verifier::{locate_dafny, DafnyCli, Verifier};

const SMOKE: &str = include_str!("../tests/data/smoke/program.dfy");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let Some(path) = locate_dafny() else {
        println!("no Dafny found; set PF_DAFNY_PATH to run this example");
        return Ok(());
    };
    let dafny = DafnyCli::new(path)?;
    let program = match std::env::args().nth(1) {
        Some(p) => std::fs::read_to_string(p)?,
        None => SMOKE.to_string(),
    };
    println!("{:?} via {}", dafny.dialect(), dafny.command_line(60).unwrap_or_default().join(" "));
    let report = dafny.verify(&program, 60)?;
    println!("{:?} in {:.1}s", report.status, report.wall_time_seconds);
    for d in &report.diagnostics {
        println!("  {:?} line {:?}: {}", d.kind, d.line, d.message);
    }
    Ok(())
}
