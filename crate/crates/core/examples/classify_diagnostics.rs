//! Classifies raw Dafny output into typed diagnostics.
//!
//! cargo run --example classify_diagnostics -- [dafny-output.txt]

use pforge::verifier::{classify_diagnostics, summarize};

const SAMPLE: &str = "\
program.dfy(14,4): Error: a postcondition could not be proved on this return path
program.dfy(8,12): Related location: this is the postcondition that could not be proved
program.dfy(22,16): Error: this invariant could not be proved to be maintained by the loop
program.dfy(30,11): Error: assertion might not hold

Dafny program verifier finished with 2 verified, 3 errors
";

fn main() -> std::io::Result<()> {
    let raw = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path)?,
        None => SAMPLE.to_string(),
    };
    for d in classify_diagnostics(&raw, Some(4)) {
        let line = d.line.map_or("-".to_string(), |l| l.to_string());
        println!("{:<24} line {line:>4}  {}", format!("{:?}", d.kind), d.message);
    }
    println!("{:?}", summarize(&raw));
    Ok(())
}
