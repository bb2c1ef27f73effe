//! Records model answers into a cassette, then replays them offline. A
//! replayed request must match the recorded digest exactly; anything else
//! is a miss.
//!
//! cargo run --example cassette_replay

use std::collections::BTreeMap;

use pforge::llm::{subs, CassetteBackend, LlmGateway, ScriptedLlm, GENERATE};
use pforge::model::Temperature;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("cassette.json");
    let request: BTreeMap<String, String> = subs([
        ("program", "function F(n: nat): nat { n }".to_string()),
        ("signature", "lemma FNonNeg(n: nat)\n  ensures F(n) >= 0".to_string()),
        ("textual_proof", "F returns its argument, a natural number.".to_string()),
        ("reusable_lemmas", String::new()),
        ("attempt", "1".to_string()),
        ("feedback", String::new()),
    ]);
    let t = Temperature::from_millis(500);

    {
        let model = ScriptedLlm::queued([(
            GENERATE,
            vec!["```dafny\nlemma FNonNeg(n: nat)\n  ensures F(n) >= 0\n{\n}\n```".to_string()],
        )]);
        let recorder = LlmGateway::new(CassetteBackend::record(&path, Box::new(model))?);
        let ex = recorder.complete(GENERATE, &request, t, 512)?;
        println!("recorded {} ({:?})", &ex.request_digest[..12], ex.source);
    }
    println!("cassette: {} entries", CassetteBackend::load(&path)?.len());

    let replay = LlmGateway::new(CassetteBackend::replay(&path)?);
    let ex = replay.complete(GENERATE, &request, t, 512)?;
    println!("replayed {} ({:?}):\n{}", &ex.request_digest[..12], ex.source, ex.response_text);

    match replay.complete(GENERATE, &request, Temperature::from_millis(200), 512) {
        Ok(_) => println!("unexpected hit"),
        Err(e) => println!("different temperature: {e}"),
    }
    Ok(())
}
