//! Mechanical decomposition: nested loops are lifted into their own
//! methods, with no model involved, until every method holds at most one
//! loop.
//!
//! cargo run --example lift_loops

use pforge::model::Strategy;
use pforge::refactor::{check_plan_invariants, lift_loops, plan_from_decomposed};

const STRIPPED: &str = include_str!("../tests/data/maxsub/stripped.dfy");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = lift_loops(STRIPPED, "MaxSubImpl")?;
    println!("{}", out.program);
    println!("// lifted: {}", out.lifted.join(", "));

    let plan = plan_from_decomposed(STRIPPED, &out.program, "MaxSubImpl", Strategy::FullSharing)?;
    check_plan_invariants(STRIPPED, &plan)?;
    for site in &plan.call_sites {
        println!("// {} called with ({})", site.callee, site.arguments.join(", "));
    }
    Ok(())
}
