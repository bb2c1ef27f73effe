//! Acceptance checks, one line per criterion. Runs without the test
//! harness so the lines show up in plain `cargo test` output; the process
//! fails if any criterion fails. Criteria that need an installed Dafny or
//! model credentials report their gated part as SKIP when those are absent.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use pforge::bench::{cmd_verify, Exit, Mode, RunArgs, TranscriptFile, VerifierChoice, VerifyArgs};
use pforge::engine::{run_task, AttemptResult, VirtualClock};
use pforge::llm::{
    parse_declaration, CassetteBackend, LlmGateway, LlmRequest, ScriptedLlm, ASSERTION_GATE, AUGMENT, CONSISTENCY,
    DECOMPOSE, GATE, GENERATE, INVARIANT_GATE, MERGE, REPAIR, SUBLEMMA_ASSERTION, SUBLEMMA_INVARIANT,
};
use pforge::model::{
    verify_at_k, CallPurpose, Diagnostic, DiagnosticKind, Event, FinalStatus, NodeId, RunConfig, Strategy,
    Temperature, VerificationTask, VerifierReport,
};
use pforge::refactor::{
    check_plan_invariants, decompose_checked, executable_tokens, lift_loops, plan_from_decomposed, restore_code,
    strip_annotations, LlmSettings,
};
use pforge::verifier::{
    classify_diagnostics, locate_dafny, program_digest, DafnyCli, FnVerifier, ScriptedVerifier, Verifier,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Verdict {
    Pass(String),
    Fail(String),
}

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(rel)
}

fn read(rel: &str) -> String {
    std::fs::read_to_string(data(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

fn check(cond: bool, what: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what.into())
    }
}

// ---------------------------------------------------------------------------
// 1. end-to-end replay

struct ReplayRun {
    exit: Exit,
    program: String,
    transcript: String,
    elapsed: Duration,
}

fn replay_maxsub(verifier: VerifierChoice, work: &Path) -> Result<ReplayRun, String> {
    let task = data("corpus/maxsub");
    let input = work.join("maxsub.dfy");
    std::fs::copy(task.join("program.dfy"), &input).map_err(|e| e.to_string())?;
    let transcript = work.join("transcript.json");
    let args = VerifyArgs {
        input: input.clone(),
        outline: Some(task.join("outline.md")),
        transcript: Some(transcript.clone()),
        run: RunArgs {
            mode: Mode::Replay,
            cassette: Some(task.join("cassette.json")),
            strategy: Some(Strategy::Decoupled),
            verifier,
            ..RunArgs::default()
        },
    };
    let start = Instant::now();
    let out = cmd_verify(&args).map_err(|e| format!("verify failed: {e}"))?;
    let elapsed = start.elapsed();
    let program = out.verified_path.map(|p| std::fs::read_to_string(p).unwrap_or_default()).unwrap_or_default();
    let transcript = std::fs::read_to_string(transcript).map_err(|e| e.to_string())?;
    Ok(ReplayRun { exit: out.exit, program, transcript, elapsed })
}

fn replay_twice(verifier: VerifierChoice) -> Result<ReplayRun, String> {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = replay_maxsub(verifier.clone(), a.path())?;
    let second = replay_maxsub(verifier, b.path())?;
    check(first.exit == Exit::Verified, format!("exit {:?}", first.exit))?;
    check(first.elapsed < Duration::from_secs(300), format!("wall time {:?}", first.elapsed))?;
    check(first.program == second.program, "verified programs differ between runs")?;
    check(first.transcript == second.transcript, "transcripts differ between runs")?;
    check(!first.program.is_empty(), "no verified program written")?;
    let original = read("corpus/maxsub/program.dfy");
    check(
        executable_tokens(&first.program).ok() == executable_tokens(&original).ok(),
        "the verified program changes executable code",
    )?;
    Ok(first)
}

fn criterion_1() -> Verdict {
    let script = VerifierChoice::Script(data("corpus/maxsub/verifier.json"));
    let mock = match replay_twice(script) {
        Ok(run) => format!("recorded verifier: exit 0, {:.2}s, repeat bit-identical", run.elapsed.as_secs_f64()),
        Err(e) => return Verdict::Fail(format!("recorded verifier: {e}")),
    };
    let Some(dafny) = locate_dafny() else {
        return Verdict::Pass(format!("{mock}; real Dafny part SKIP (set PF_DAFNY_PATH)"));
    };
    let real = replay_twice(VerifierChoice::Dafny).and_then(|run| {
        let cli = DafnyCli::new(dafny).map_err(|e| e.to_string())?;
        let report = cli.verify(&run.program, 120).map_err(|e| e.to_string())?;
        check(report.is_verified(), format!("independent Dafny check failed:\n{}", report.feedback()))?;
        Ok(run)
    });
    match real {
        Ok(run) => Verdict::Pass(format!(
            "{mock}; real Dafny: exit 0, {:.1}s < 300s, independently verified, repeat bit-identical",
            run.elapsed.as_secs_f64()
        )),
        Err(e) => Verdict::Fail(format!("{mock}; real Dafny: {e}")),
    }
}

// ---------------------------------------------------------------------------
// 2. search-automaton bounds over randomized scenarios

fn seeded(seed: u64, text: &str) -> ChaCha8Rng {
    let digest = program_digest(&format!("{seed}:{text}"));
    ChaCha8Rng::seed_from_u64(u64::from_str_radix(&digest[..16], 16).expect("hex digest"))
}

#[derive(Clone, Copy, Debug)]
struct World {
    seed: u64,
    p_verify: f64,
    p_yes: f64,
    p_junk: f64,
    max_helpers: u32,
    verifier_seconds: u64,
    llm_seconds: u64,
}

const TASK_2: &str = "lemma Goal(n: nat)\n  ensures Q0(n)\n";

fn header_of(r: &LlmRequest<'_>) -> Option<String> {
    let s = r.substitutions;
    match r.template_id {
        GENERATE => Some(s["signature"].clone()),
        AUGMENT => parse_declaration(&s["body"]).ok().map(|(sig, _)| sig.render_header(false)),
        REPAIR => parse_declaration(&s["candidate"]).ok().map(|(sig, _)| sig.render_header(false)),
        _ => None,
    }
}

fn answer(world: World, r: &LlmRequest<'_>) -> String {
    let mut rng = seeded(world.seed, r.digest);
    let tag = |rng: &mut ChaCha8Rng| rng.gen_range(0..1_000_000u32);
    match r.template_id {
        GATE | ASSERTION_GATE | INVARIANT_GATE => {
            let x: f64 = rng.gen();
            if x < world.p_junk {
                "I am not sure.".into()
            } else if x < world.p_junk + (1.0 - world.p_junk) * world.p_yes {
                "Yes".into()
            } else {
                "No, it does not hold.".into()
            }
        }
        SUBLEMMA_ASSERTION | SUBLEMMA_INVARIANT => {
            if rng.gen::<f64>() < world.p_junk {
                return "Nothing to add.".into();
            }
            let k = tag(&mut rng);
            format!("```dafny\nlemma S{k}(n: nat)\n  ensures C{k}(n)\n```\n```dafny\nS{k}(n);\n```")
        }
        _ => {
            let Some(header) = header_of(r) else { return "no idea".into() };
            let x: f64 = rng.gen();
            if x < world.p_junk {
                return "Let me think about it.".into();
            }
            if x < world.p_junk * 1.5 {
                return "```dafny\nlemma Elsewhere(n: nat)\n{\n}\n```".into();
            }
            let mut body = Vec::new();
            let mut helpers = Vec::new();
            for _ in 0..rng.gen_range(0..=2) {
                body.push(format!("  assert A{}(n);", tag(&mut rng)));
            }
            if rng.gen_bool(0.3) {
                let k = tag(&mut rng);
                body.push(format!("  var i := 0;\n  while i < n\n    invariant I{k}(i)\n  {{\n    i := i + 1;\n  }}"));
            }
            for _ in 0..rng.gen_range(0..=world.max_helpers) {
                let k = tag(&mut rng);
                body.push(format!("  H{k}(n);"));
                helpers.push(format!("lemma H{k}(n: nat)\n  ensures B{k}(n)\n{{\n}}"));
            }
            if rng.gen_bool(0.1) {
                body.push("  assert SYNTAXERR(n);".into());
            }
            let mut text = format!("{header}\n{{\n{}\n}}", body.join("\n"));
            for h in helpers {
                text.push_str("\n\n");
                text.push_str(&h);
            }
            format!("```dafny\n{text}\n```")
        }
    }
}

fn judge(world: World, program: &str) -> VerifierReport {
    let mut rng = seeded(world.seed ^ 0x5eed, program);
    let line_of = |needle: &str| program.lines().position(|l| l.contains(needle)).map(|i| i as u32 + 1);
    let lines_with = |needle: &str| -> Vec<u32> {
        program.lines().enumerate().filter(|(_, l)| l.contains(needle)).map(|(i, _)| i as u32 + 1).collect()
    };
    let mut report = if program.contains("SYNTAXERR") {
        VerifierReport::failed(vec![Diagnostic::new(DiagnosticKind::SyntaxError, line_of("SYNTAXERR"), "invalid expression")])
    } else if program == TASK_2 || rng.gen::<f64>() >= world.p_verify {
        let asserts = lines_with("assert A");
        let invariants = lines_with("invariant I");
        let d = match rng.gen_range(0..5) {
            0 if !asserts.is_empty() => {
                let mut ds: Vec<Diagnostic> = asserts
                    .iter()
                    .filter(|_| rng.gen_bool(0.7))
                    .map(|l| Diagnostic::new(DiagnosticKind::AssertionFailure, Some(*l), "assertion might not hold"))
                    .collect();
                if ds.is_empty() {
                    ds.push(Diagnostic::new(DiagnosticKind::AssertionFailure, Some(asserts[0]), "assertion might not hold"));
                }
                ds
            }
            1 if !invariants.is_empty() => {
                let kind = if rng.gen_bool(0.5) { DiagnosticKind::InvariantOnEntry } else { DiagnosticKind::InvariantMaintenance };
                vec![Diagnostic::new(kind, Some(invariants[0]), "invariant could not be proved")]
            }
            2 => vec![Diagnostic::new(DiagnosticKind::Timeout, None, "verification timed out")],
            3 => vec![Diagnostic::new(DiagnosticKind::Unknown, None, "unexpected failure")],
            _ => vec![Diagnostic::new(DiagnosticKind::PostconditionFailure, line_of("ensures"), "postcondition might not hold")],
        };
        VerifierReport::failed(d)
    } else {
        VerifierReport::verified()
    };
    report.wall_time_seconds = rng.gen_range(1..=world.verifier_seconds * 10) as f64 / 10.0;
    report
}

fn check_attempt(a: &AttemptResult, config: &RunConfig) -> Result<(), String> {
    let t = &a.transcript;
    t.check_well_formed()?;
    a.tree.check_acyclic().map_err(|e| e.to_string())?;
    check(a.error.is_none(), format!("attempt error {:?}", a.error))?;
    let schedule = config.schedule();
    let mut visits: HashMap<NodeId, Vec<Temperature>> = HashMap::new();
    let mut calls_this_visit: HashMap<NodeId, u32> = HashMap::new();
    let events: Vec<&Event> = t.events().collect();
    let budget_ms = config.global_timeout_seconds * 1000;
    for (i, e) in events.iter().enumerate() {
        match e {
            Event::VisitStarted { node, retry_index, temperature } => {
                let seq = visits.entry(*node).or_default();
                check(*retry_index as usize == seq.len(), format!("node {node:?}: retry index {retry_index} out of order"))?;
                seq.push(*temperature);
                calls_this_visit.insert(*node, 0);
            }
            Event::LlmCall { node: Some(node), purpose, temperature, .. } => {
                let current = visits.get(node).and_then(|v| v.last()).copied();
                check(current == Some(*temperature), format!("node {node:?}: call at {temperature} during visit at {current:?}"))?;
                if matches!(purpose, CallPurpose::Generation | CallPurpose::Repair) {
                    let n = calls_this_visit.entry(*node).or_default();
                    *n += 1;
                    check(*n <= config.max_generation_attempts_t, format!("node {node:?}: {n} generation calls in one visit"))?;
                }
            }
            Event::Rollback { from, to, .. } => {
                check(a.tree.get(*from).parent_id == Some(*to), format!("rollback {from:?} -> {to:?} skips a level"))?;
            }
            Event::GlobalTimeout => {
                check(i + 2 == events.len(), "events after the global timeout")?;
                check(
                    matches!(events[i + 1], Event::FinalResult { status: FinalStatus::Aborted }),
                    "global timeout not followed by an aborted result",
                )?;
                check(t.events[i].at_ms >= budget_ms, "global timeout reported early")?;
            }
            _ => {}
        }
    }
    for (node, temps) in &visits {
        check(temps.len() as u32 <= config.retry_budget_s, format!("node {node:?}: {} visits", temps.len()))?;
        check(temps[..] == schedule[..temps.len()], format!("node {node:?}: temperatures {temps:?} vs {schedule:?}"))?;
    }
    let last_ms = t.events.last().map_or(0, |e| e.at_ms);
    let slack = config.verifier_timeout_seconds.max(5) * 1000;
    check(last_ms <= budget_ms + slack, format!("ran {last_ms} ms against a budget of {budget_ms} ms"))?;
    if a.status == FinalStatus::Failed {
        let root = a.tree.root().expect("tree has a root");
        let n = events.len();
        check(
            matches!(events[n - 2], Event::NodeExhausted { node } if *node == root),
            "failure does not end with the root exhausted",
        )?;
    }
    Ok(())
}

fn criterion_2() -> Verdict {
    let scenarios = 120u64;
    let start = Instant::now();
    let mut tally: HashMap<FinalStatus, usize> = HashMap::new();
    let mut rollbacks = 0usize;
    for seed in 0..scenarios {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let world = World {
            seed,
            p_verify: rng.gen_range(0.1..0.9),
            p_yes: rng.gen_range(0.3..1.0),
            p_junk: rng.gen_range(0.0..0.3),
            max_helpers: rng.gen_range(0..=2),
            verifier_seconds: rng.gen_range(1..=20),
            llm_seconds: rng.gen_range(1..=5),
        };
        let mut config = RunConfig::default();
        if seed % 3 != 0 {
            config.max_generation_attempts_t = rng.gen_range(1..=6);
            config.retry_budget_s = rng.gen_range(1..=3);
            config.temperature_step = Temperature::from_millis([200, 300, 500][rng.gen_range(0..3)]);
            config.global_timeout_seconds = rng.gen_range(60..=500);
            config.verify_at_k = rng.gen_range(1..=2);
        }
        let clock = Arc::new(VirtualClock::default());
        let (c1, c2) = (clock.clone(), clock.clone());
        let llm = LlmGateway::new(ScriptedLlm::from_fn(move |r| {
            c1.advance_ms(world.llm_seconds * 1000);
            Ok(answer(world, r))
        }));
        let verifier = FnVerifier::new(move |p| {
            let report = judge(world, p);
            c2.advance_ms((report.wall_time_seconds * 1000.0) as u64);
            report
        });
        let mut task = VerificationTask::new(format!("scenario-{seed}"), TASK_2);
        task.config = config.clone();
        let outcome = match run_task(&task, &llm, &verifier, clock.as_ref()) {
            Ok(o) => o,
            Err(e) => return Verdict::Fail(format!("scenario {seed}: {e}")),
        };
        for a in &outcome.attempts {
            if let Err(e) = check_attempt(a, &config) {
                return Verdict::Fail(format!("scenario {seed} ({world:?}): {e}"));
            }
            *tally.entry(a.status).or_default() += 1;
            rollbacks += a.transcript.events().filter(|e| matches!(e, Event::Rollback { .. })).count();
        }
    }
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(30) {
        return Verdict::Fail(format!("{scenarios} scenarios took {:.1}s (limit 30s)", elapsed.as_secs_f64()));
    }
    let n = |s| tally.get(&s).copied().unwrap_or(0);
    Verdict::Pass(format!(
        "{scenarios} scenarios in {:.1}s (< 30s): attempts verified {}, failed {}, aborted {}; {rollbacks} rollbacks; all bounds hold",
        elapsed.as_secs_f64(),
        n(FinalStatus::Verified),
        n(FinalStatus::Failed),
        n(FinalStatus::Aborted),
    ))
}

// ---------------------------------------------------------------------------
// 3. snapshot soundness

/// Re-checks every successful visit's snapshot with `checker`.
fn snapshot_violations(engine_verifier: &dyn Verifier, checker: &dyn Verifier) -> Result<(usize, usize), String> {
    let dir = data("corpus/maxsub");
    let llm = LlmGateway::new(CassetteBackend::replay(&dir.join("cassette.json")).map_err(|e| e.to_string())?);
    let mut task = VerificationTask::new("maxsub", read("corpus/maxsub/program.dfy"));
    task.outline = Some(read("corpus/maxsub/outline.md"));
    task.strategy = Some(Strategy::Decoupled);
    let clock = VirtualClock::default();
    let outcome = run_task(&task, &llm, engine_verifier, &clock).map_err(|e| e.to_string())?;
    let attempt = outcome.success().ok_or("the fixture did not verify")?;
    let mut checked = 0;
    let mut violations = 0;
    for node in attempt.tree.nodes() {
        if let Some(code) = &node.verified_code {
            checked += 1;
            if !checker.verify(code, 120).map_err(|e| e.to_string())?.is_verified() {
                violations += 1;
            }
        }
    }
    Ok((checked, violations))
}

fn criterion_3() -> Verdict {
    let script = match ScriptedVerifier::from_file(&data("corpus/maxsub/verifier.json")) {
        Ok(s) => s,
        Err(e) => return Verdict::Fail(e.to_string()),
    };
    let mock = match snapshot_violations(&script, &script) {
        Ok((n, 0)) => format!("recorded verifier: {n} snapshots, 0 violations"),
        Ok((n, v)) => return Verdict::Fail(format!("recorded verifier: {v} of {n} snapshots rejected")),
        Err(e) => return Verdict::Fail(e),
    };
    let Some(dafny) = locate_dafny().and_then(|p| DafnyCli::new(p).ok()) else {
        return Verdict::Pass(format!("{mock}; real Dafny part SKIP (set PF_DAFNY_PATH)"));
    };
    match snapshot_violations(&dafny, &dafny) {
        Ok((n, 0)) => Verdict::Pass(format!("{mock}; real Dafny: {n} snapshots, 0 violations")),
        Ok((n, v)) => Verdict::Fail(format!("{mock}; real Dafny: {v} of {n} snapshots rejected")),
        Err(e) => Verdict::Fail(format!("{mock}; real Dafny: {e}")),
    }
}

// ---------------------------------------------------------------------------
// 4. diagnostic classification

#[derive(serde::Deserialize)]
struct Corpus {
    cases: Vec<Case>,
}

#[derive(serde::Deserialize)]
struct Case {
    id: String,
    exit_code: Option<i32>,
    raw_output: String,
    expected: Vec<Label>,
}

#[derive(serde::Deserialize, Debug, PartialEq)]
struct Label {
    kind: DiagnosticKind,
    line: Option<u32>,
}

fn criterion_4() -> Verdict {
    let corpus: Corpus = match serde_json::from_str(&read("diagnostics_corpus.json")) {
        Ok(c) => c,
        Err(e) => return Verdict::Fail(e.to_string()),
    };
    let required = [
        DiagnosticKind::SyntaxError,
        DiagnosticKind::AssertionFailure,
        DiagnosticKind::InvariantOnEntry,
        DiagnosticKind::InvariantMaintenance,
        DiagnosticKind::PostconditionFailure,
        DiagnosticKind::Timeout,
    ];
    let mut matched = 0;
    for case in &corpus.cases {
        let got: Vec<Label> = classify_diagnostics(&case.raw_output, case.exit_code)
            .into_iter()
            .map(|d| Label { kind: d.kind, line: d.line })
            .collect();
        if got == case.expected {
            matched += 1;
        } else {
            return Verdict::Fail(format!("case {}: got {got:?}, expected {:?}", case.id, case.expected));
        }
    }
    let covered = required.iter().all(|k| corpus.cases.iter().any(|c| c.expected.iter().any(|l| l.kind == *k)));
    if corpus.cases.len() < 12 || !covered {
        return Verdict::Fail(format!("corpus too small or missing kinds ({} cases)", corpus.cases.len()));
    }
    Verdict::Pass(format!("{matched}/{} cases exact (kind + line), all six required kinds covered", corpus.cases.len()))
}

// ---------------------------------------------------------------------------
// 5. refactor round trip

fn dfy_fixtures(dir: &Path, out: &mut Vec<PathBuf>) {
    for entry in std::fs::read_dir(dir).into_iter().flatten().flatten() {
        let p = entry.path();
        if p.is_dir() {
            dfy_fixtures(&p, out);
        } else if p.extension().is_some_and(|e| e == "dfy") {
            out.push(p);
        }
    }
}

fn fenced(code: &str) -> String {
    format!("```dafny\n{}\n```", code.trim_end())
}

fn round_trip(strategy: Strategy, decomposed: &str, verified: &str) -> Result<String, String> {
    let original = read("maxsub/stripped.dfy");
    let restored_outer = pforge::engine::code::decl_text(&read("maxsub/annotated.dfy"), "MaxSubImpl").expect("fixture");
    let decomposed = decomposed.to_string();
    let llm = LlmGateway::new(ScriptedLlm::from_fn(move |r| {
        Ok(match r.template_id {
            DECOMPOSE => fenced(&decomposed),
            CONSISTENCY => "Yes".into(),
            MERGE => fenced(&restored_outer),
            other => panic!("unexpected {other}"),
        })
    }));
    let verifier = FnVerifier::new(|_| VerifierReport::verified());
    let settings = LlmSettings::from(&RunConfig::default());
    let mut log = Vec::new();
    let plan = decompose_checked(&original, "MaxSubImpl", strategy, &llm, &verifier, &settings, &mut log)
        .map_err(|e| format!("{strategy}: decompose: {e}"))?;
    check_plan_invariants(&original, &plan).map_err(|e| format!("{strategy}: plan: {e}"))?;
    let restored = restore_code(&original, &plan, verified, &llm, &verifier, &settings, &mut log)
        .map_err(|e| format!("{strategy}: restore: {e}"))?;
    check(restored.complete(), format!("{strategy}: restoration incomplete: {:?}", restored.report.notes))?;
    check(
        executable_tokens(&restored.program).map_err(|e| e.to_string())? == executable_tokens(&original).map_err(|e| e.to_string())?,
        format!("{strategy}: executable tokens differ after restore"),
    )?;
    Ok(restored.program)
}

fn criterion_5() -> Verdict {
    let run = || -> Result<String, String> {
        let mut files = Vec::new();
        dfy_fixtures(&data(""), &mut files);
        for f in &files {
            let text = std::fs::read_to_string(f).map_err(|e| e.to_string())?;
            let once = strip_annotations(&text).map_err(|e| format!("{}: {e}", f.display()))?;
            let twice = strip_annotations(&once).map_err(|e| format!("{}: {e}", f.display()))?;
            check(once == twice, format!("strip is not idempotent on {}", f.display()))?;
        }
        check(
            strip_annotations(&read("maxsub/annotated.dfy")).map_err(|e| e.to_string())? == read("maxsub/stripped.dfy"),
            "stripping the annotated fixture does not give its hand-stripped twin",
        )?;
        let full = round_trip(Strategy::FullSharing, &read("maxsub/decomposed_full_sharing.dfy"), &read("maxsub/verified_full_sharing.dfy"))?;
        check(full == read("maxsub/restored_full_sharing.dfy"), "full-sharing restore differs from the golden file")?;
        round_trip(Strategy::Decoupled, &read("maxsub/decomposed_decoupled.dfy"), &read("maxsub/verified_decoupled.dfy"))?;
        round_trip(
            Strategy::FullyDecoupled,
            &read("maxsub/decomposed_fully_decoupled.dfy"),
            &read("maxsub/verified_fully_decoupled.dfy"),
        )?;
        let original = read("maxsub/stripped.dfy");
        let lifted = lift_loops(&original, "MaxSubImpl").map_err(|e| e.to_string())?;
        let plan = plan_from_decomposed(&original, &lifted.program, "MaxSubImpl", Strategy::FullSharing)?;
        check_plan_invariants(&original, &plan)?;
        Ok(format!("strip idempotent on {} fixtures; 3 strategies restore token-exact; <=1 loop per method in 4 plans", files.len()))
    };
    match run() {
        Ok(s) => Verdict::Pass(s),
        Err(e) => Verdict::Fail(e),
    }
}

// ---------------------------------------------------------------------------
// 6. metric arithmetic

fn criterion_6() -> Verdict {
    let cases = [(19, 22, "86%"), (15, 22, "68%"), (7, 8, "87.5%"), (5, 8, "62.5%"), (9, 13, "69%"), (4, 13, "30%")];
    for (s, n, want) in cases {
        let outcomes: Vec<bool> = (0..n).map(|i| i < s).collect();
        let got = verify_at_k(&outcomes).map(|r| r.label()).unwrap_or_default();
        if got != want {
            return Verdict::Fail(format!("{s}/{n}: got {got}, expected {want}"));
        }
    }
    Verdict::Pass("19/22=86%, 15/22=68%, 7/8=87.5%, 5/8=62.5%, 9/13=69%, 4/13=30%, exact".into())
}

// ---------------------------------------------------------------------------
// 7. live smoke

fn schema_valid(text: &str) -> Result<usize, String> {
    let file: TranscriptFile = serde_json::from_str(text).map_err(|e| format!("transcript schema: {e}"))?;
    for t in &file.attempts {
        t.check_well_formed()?;
        check(t.final_status().is_some(), "transcript without a final result")?;
    }
    Ok(file.attempts.len())
}

fn criterion_7() -> Verdict {
    // Offline stand-in: a scripted model that never produces a usable
    // answer still has to leave a complete transcript behind.
    let mock = (|| -> Result<String, String> {
        let llm = LlmGateway::new(ScriptedLlm::from_fn(|_| Ok("I cannot help with that.".into())));
        let verifier = FnVerifier::new(|p| {
            if p.contains("invariant") {
                VerifierReport::verified()
            } else {
                VerifierReport::failed(vec![Diagnostic::new(DiagnosticKind::AssertionFailure, Some(14), "assertion might not hold")])
            }
        });
        let mut task = VerificationTask::new("smoke", read("smoke/program.dfy"));
        task.config.verify_at_k = 1;
        let clock = VirtualClock::default();
        let out = run_task(&task, &llm, &verifier, &clock).map_err(|e| e.to_string())?;
        let file = TranscriptFile { task_id: "smoke".into(), attempts: out.attempts.iter().map(|a| a.transcript.clone()).collect() };
        let n = schema_valid(&serde_json::to_string(&file).map_err(|e| e.to_string())?)?;
        Ok(format!("scripted model: {n} schema-valid transcript(s)"))
    })();
    let mock = match mock {
        Ok(s) => s,
        Err(e) => return Verdict::Fail(e),
    };
    let creds = ["PF_LLM_ENDPOINT", "PF_LLM_MODEL"].iter().all(|k| std::env::var(k).is_ok_and(|v| !v.is_empty()));
    if !creds || locate_dafny().is_none() {
        return Verdict::Pass(format!("{mock}; live part SKIP (needs PF_LLM_ENDPOINT, PF_LLM_MODEL and Dafny)"));
    }
    let live = (|| -> Result<String, String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let input = dir.path().join("smoke.dfy");
        std::fs::copy(data("smoke/program.dfy"), &input).map_err(|e| e.to_string())?;
        let transcript = dir.path().join("transcript.json");
        let args = VerifyArgs {
            input,
            outline: None,
            transcript: Some(transcript.clone()),
            run: RunArgs { mode: Mode::Live, k: Some(1), strategy: None, ..RunArgs::default() },
        };
        let start = Instant::now();
        let result = cmd_verify(&args);
        let elapsed = start.elapsed();
        check(elapsed < Duration::from_secs(500 + 20), format!("took {:.0}s", elapsed.as_secs_f64()))?;
        let n = schema_valid(&std::fs::read_to_string(&transcript).map_err(|e| format!("no transcript: {e}"))?)?;
        let status = match result {
            Ok(o) => format!("{:?}", o.exit),
            Err(e) => format!("error: {e}"),
        };
        Ok(format!("live: {status} in {:.0}s, {n} schema-valid transcript(s)", elapsed.as_secs_f64()))
    })();
    match live {
        Ok(s) => Verdict::Pass(format!("{mock}; {s}")),
        Err(e) => Verdict::Fail(format!("{mock}; live: {e}")),
    }
}

fn main() {
    // `cargo test -- --list` and friends expect a listing, not a run.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    type Criterion = (&'static str, fn() -> Verdict);
    let criteria: [Criterion; 7] = [
        ("end-to-end replay", criterion_1),
        ("search-automaton bounds", criterion_2),
        ("snapshot soundness", criterion_3),
        ("diagnostic parser", criterion_4),
        ("refactor round trip", criterion_5),
        ("metric arithmetic", criterion_6),
        ("live smoke", criterion_7),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (tag, detail) = match std::panic::catch_unwind(run) {
            Ok(Verdict::Pass(d)) => ("PASS", d),
            Ok(Verdict::Fail(d)) => ("FAIL", d),
            Err(_) => ("FAIL", "panicked".to_string()),
        };
        if tag == "FAIL" {
            failed += 1;
        }
        println!("criterion {} [{name}]: {tag}: {detail}", i + 1);
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
