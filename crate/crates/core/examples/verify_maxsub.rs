//! The end-to-end pipeline on the maximum-subarray program, replayed from
//! its recorded cassette and verifier script: decomposition, proof search,
//! restoration and the written outputs.
//!
//! cargo run --example verify_maxsub

use std::path::Path;

use pforge::bench::{cmd_verify, Mode, RunArgs, VerifierChoice, VerifyArgs};
use pforge::model::Strategy;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let task = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/corpus/maxsub");
    let work = tempfile::tempdir()?;
    let input = work.path().join("maxsub.dfy");
    std::fs::copy(task.join("program.dfy"), &input)?;

    let out = cmd_verify(&VerifyArgs {
        input,
        outline: Some(task.join("outline.md")),
        transcript: Some(work.path().join("transcript.json")),
        run: RunArgs {
            mode: Mode::Replay,
            cassette: Some(task.join("cassette.json")),
            strategy: Some(Strategy::Decoupled),
            verifier: VerifierChoice::Script(task.join("verifier.json")),
            ..RunArgs::default()
        },
    })?;
    println!("exit: {:?}", out.exit);
    if let Some(attempt) = out.outcome.attempts.last() {
        let t = &attempt.transcript.totals;
        println!("model calls: {}, verifier runs: {}, virtual time: {} ms", t.llm_calls, t.verifier_runs, t.wall_time_ms);
    }
    if let Some(p) = &out.verified_path {
        println!("\n{}", std::fs::read_to_string(p)?);
    }
    Ok(())
}
