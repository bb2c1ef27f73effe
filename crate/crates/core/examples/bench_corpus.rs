//! Runs the bundled corpus offline and prints the per-task records and the
//! verify@k rate.
//!
//! cargo run --example bench_corpus -- [corpus dir]

use std::path::PathBuf;

use pforge::bench::{cmd_bench, BenchArgs, RunArgs};
use pforge::model::Strategy;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/corpus"));
    let report = cmd_bench(&BenchArgs { corpus, report: None, jobs: 2, scripted_verifier: true, run: RunArgs { strategy: Some(Strategy::Decoupled), ..RunArgs::default() } })?;
    for t in &report.tasks {
        println!(
            "{:<10} verified={:<5} attempts={} lemmas={:?} calls={} runs={} {:.1}s",
            t.id, t.verified, t.attempts, t.lemma_count, t.llm_calls, t.verifier_runs, t.wall_time_seconds
        );
    }
    println!("verify@{}: {}", report.k, report.rate);
    Ok(())
}
