//! Success-rate labels and the per-retry temperature schedule.
//!
//! cargo run --example metrics

use pforge::model::{temperature_schedule, verify_at_k_from_runs, RunConfig, SuccessRate};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (successes, tasks) in [(19, 22), (7, 8), (4, 13)] {
        println!("{}", SuccessRate { successes, tasks });
    }

    // Five attempts per task; a task counts if any of its first k attempts verified.
    let runs = vec![vec![false, false, true, false, false], vec![false; 5], vec![true, false, false, false, false]];
    for k in 1..=5 {
        println!("verify@{k}: {}", verify_at_k_from_runs(&runs, k)?);
    }

    let config = RunConfig::default();
    let temps: Vec<String> =
        (0..config.retry_budget_s).map(|i| temperature_schedule(&config, i).map(|t| t.to_string())).collect::<Result<_, _>>()?;
    println!("temperatures for s={}: {}", config.retry_budget_s, temps.join(", "));
    Ok(())
}
