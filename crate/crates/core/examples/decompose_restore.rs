//! Model-driven decomposition and restoration with a scripted model: the
//! decomposition is checked for consistency, the verified modular program
//! is merged back, and the executable tokens are compared with the
//! original.
//!
//! cargo run --example decompose_restore

use pforge::engine::code;
use pforge::llm::{LlmGateway, ScriptedLlm, CONSISTENCY, DECOMPOSE, MERGE};
use pforge::model::{RunConfig, Strategy, VerifierReport};
use pforge::refactor::{decompose_checked, executable_tokens, restore_code, LlmSettings};
use pforge::verifier::FnVerifier;

const STRIPPED: &str = include_str!("../tests/data/maxsub/stripped.dfy");
const DECOMPOSED: &str = include_str!("../tests/data/maxsub/decomposed_decoupled.dfy");
const VERIFIED: &str = include_str!("../tests/data/maxsub/verified_decoupled.dfy");
const ANNOTATED: &str = include_str!("../tests/data/maxsub/annotated.dfy");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let merged = code::decl_text(ANNOTATED, "MaxSubImpl").expect("fixture has the method");
    let llm = LlmGateway::new(ScriptedLlm::from_fn(move |r| {
        Ok(match r.template_id {
            DECOMPOSE => format!("```dafny\n{DECOMPOSED}```"),
            CONSISTENCY => "Yes, the decomposition preserves the behavior.".into(),
            MERGE => format!("```dafny\n{merged}\n```"),
            _ => String::new(),
        })
    }));
    // Stands in for Dafny; the scripted answers are known to verify.
    let verifier = FnVerifier::new(|_| VerifierReport::verified());
    let settings = LlmSettings::from(&RunConfig::default());
    let mut log = Vec::new();

    let plan = decompose_checked(STRIPPED, "MaxSubImpl", Strategy::Decoupled, &llm, &verifier, &settings, &mut log)?;
    println!("decomposed into {} method(s):", plan.lifted_methods.len());
    for m in &plan.lifted_methods {
        println!("  {}", m.definition.signature.render_header(false).lines().next().unwrap_or(""));
    }

    let restored = restore_code(STRIPPED, &plan, VERIFIED, &llm, &verifier, &settings, &mut log)?;
    println!("restoration: {:?}", restored.method);
    println!("same executable tokens: {}", executable_tokens(&restored.program)? == executable_tokens(STRIPPED)?);
    println!("model calls: {}", log.len());
    println!("\n{}", restored.program);
    Ok(())
}
