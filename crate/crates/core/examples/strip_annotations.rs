//! Removes every proof annotation from a Dafny program and checks that the
//! executable part is untouched.
//!
//! cargo run --example strip_annotations -- [file.dfy]

use pforge::refactor::{same_executable_code, strip_annotations};

const ANNOTATED: &str = include_str!("../tests/data/maxsub/annotated.dfy");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path)?,
        None => ANNOTATED.to_string(),
    };
    let stripped = strip_annotations(&text)?;
    print!("{stripped}");
    eprintln!(
        "{} -> {} lines, executable code unchanged: {}, idempotent: {}",
        text.lines().count(),
        stripped.lines().count(),
        same_executable_code(&text, &stripped)?,
        strip_annotations(&stripped)? == stripped,
    );
    Ok(())
}
