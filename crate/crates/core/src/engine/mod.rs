//! Lemma-tree proof search: per-node generate/verify/repair visits,
//! depth-first exploration with rollback, and the end-to-end task driver.

mod clock;
pub mod code;

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

pub use clock::{Clock, SystemClock, VirtualClock};

use crate::dafny::{normalize_ws, Program, SyntaxError};
use crate::llm::{
    extract_code_block, parse_declaration, parse_sublemma, parse_verdict, subs, LlmBackend, LlmError, LlmGateway,
    ASSERTION_GATE, AUGMENT, CONSISTENCY, GATE, GENERATE, INVARIANT_GATE, REPAIR, STRENGTHEN, SUBLEMMA_ASSERTION,
    SUBLEMMA_INVARIANT,
};
use crate::model::{
    temperature_schedule, CallPurpose, DeclKind, DecompositionPlan, DiagnosticKind, Event, FinalStatus, Goal,
    LlmExchange, MethodSignature, ModelError, NodeId, NodeStatus, ProofTree, RepairKind, RunConfig, RunTranscript,
    Strategy, VerificationTask, VerifierReport,
};
use crate::refactor::{
    decompose_checked, find_target_method, restore_code, same_executable_code, LlmSettings, RefactorError, Restoration,
};
use crate::verifier::{declare_bodiless, program_digest, run_verifier, Verifier, VerifierError};

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("task program: {0}")]
    Syntax(#[from] SyntaxError),
    #[error("the task program has no method or lemma to verify")]
    NoTarget,
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Verifier(#[from] VerifierError),
    #[error(transparent)]
    Refactor(#[from] RefactorError),
    #[error(transparent)]
    Model(#[from] ModelError),
    /// The global budget ran out; turned into an aborted result by the driver.
    #[error("global timeout")]
    Timeout,
}

impl EngineError {
    pub fn is_environment(&self) -> bool {
        match self {
            EngineError::Llm(e) => e.is_environment(),
            EngineError::Verifier(e) => e.is_environment(),
            EngineError::Refactor(e) => e.is_environment(),
            _ => false,
        }
    }
}

/// Result of one visit of a node.
#[derive(Debug, Clone, PartialEq)]
pub enum VisitOutcome {
    Verified { code: String, goals: Vec<Goal> },
    /// The verifiability gate said no: roll back without further visits.
    GateRejected,
    Exhausted(String),
}

/// A proven lemma (with its helpers) kept across rollbacks.
#[derive(Debug, Clone)]
struct PoolEntry {
    signature: MethodSignature,
    names: Vec<String>,
    text: String,
}

struct Merged {
    program: String,
    new_goals: Vec<Goal>,
    reused: Vec<String>,
}

/// The method or lemma a task is about when nothing was decomposed: the
/// first method with nested loops, else the last method with a body, else
/// the last lemma.
pub fn root_target(program: &str) -> Result<String, EngineError> {
    if let Some(m) = find_target_method(program)? {
        return Ok(m);
    }
    let p = Program::parse(program)?;
    p.decls
        .iter()
        .rev()
        .find(|d| d.kind == DeclKind::Method && d.body.is_some())
        .or_else(|| p.decls.iter().rev().find(|d| d.kind == DeclKind::Lemma))
        .map(|d| d.name.clone())
        .ok_or(EngineError::NoTarget)
}

/// Builds the one-node tree. With a plan, the root is the outer method,
/// lifted methods are declared bodiless in its starting code and wait in
/// its working list with their bodies as seeds.
pub fn init_tree(task: &VerificationTask, plan: Option<&DecompositionPlan>) -> Result<ProofTree, EngineError> {
    Program::parse(&task.program)?;
    let config = &task.config;
    let mut tree = ProofTree::new();
    let (program, root_name) = match plan.filter(|p| !p.is_identity()) {
        Some(plan) => {
            let mut program = plan.program.clone();
            for m in &plan.lifted_methods {
                program = code::replace_decl(&program, &m.definition.signature.name, &m.definition.signature.render_bodiless())
                    .map_err(RefactorError::Internal)?;
            }
            (program, plan.outer_method.signature.name.clone())
        }
        None => (task.program.clone(), root_target(&task.program)?),
    };
    let p = Program::parse(&program)?;
    let d = p.decl(&root_name).ok_or(EngineError::NoTarget)?;
    let root = tree.add_node(None, d.signature.clone(), program.clone(), task.outline.clone(), config.initial_temperature)?;
    let node = tree.get_mut(root);
    node.seed_body = d.body.map(|(o, c)| p.slice(o, c).to_string());
    if let Some(plan) = plan {
        let source = Program::parse(&plan.program)?;
        for m in &plan.lifted_methods {
            let ld = source.decl(&m.definition.signature.name).ok_or(EngineError::NoTarget)?;
            node.seeded_goals.push(Goal {
                signature: ld.signature.clone(),
                seed_body: ld.body.map(|(o, c)| source.slice(o, c).to_string()),
            });
        }
        node.working_list = node.seeded_goals.clone();
    }
    Ok(tree)
}

/// Drives the search for one end-to-end attempt.
pub struct Engine<'a, B: LlmBackend> {
    llm: &'a LlmGateway<B>,
    verifier: &'a dyn Verifier,
    clock: &'a dyn Clock,
    config: RunConfig,
    started_ms: u64,
    pub transcript: RunTranscript,
    pub tree: ProofTree,
    /// The current whole program: root code plus everything proven so far.
    program: String,
    pool: Vec<PoolEntry>,
    completed: HashMap<NodeId, PoolEntry>,
    lifted: HashSet<String>,
    requeue: Vec<NodeId>,
    dropped: HashSet<NodeId>,
}

impl<'a, B: LlmBackend> Engine<'a, B> {
    pub fn new(
        task_id: &str,
        llm: &'a LlmGateway<B>,
        verifier: &'a dyn Verifier,
        clock: &'a dyn Clock,
        config: RunConfig,
    ) -> Self {
        let mut transcript = RunTranscript::new(task_id);
        transcript.verifier_command = verifier.command_line(config.verifier_timeout_seconds);
        Engine {
            llm,
            verifier,
            clock,
            started_ms: clock.elapsed_ms(),
            config,
            transcript,
            tree: ProofTree::new(),
            program: String::new(),
            pool: Vec::new(),
            completed: HashMap::new(),
            lifted: HashSet::new(),
            requeue: Vec::new(),
            dropped: HashSet::new(),
        }
    }

    fn now(&self) -> u64 {
        self.clock.elapsed_ms().saturating_sub(self.started_ms)
    }

    fn log(&mut self, event: Event) {
        let at = self.now();
        self.transcript.push(at, event);
    }

    fn check_deadline(&self) -> Result<(), EngineError> {
        if self.now() >= self.config.global_timeout_seconds * 1000 {
            return Err(EngineError::Timeout);
        }
        Ok(())
    }

    fn log_exchange(&mut self, node: Option<NodeId>, ex: &LlmExchange, purpose: CallPurpose) {
        self.log(Event::LlmCall {
            node,
            template_id: ex.template_id.clone(),
            purpose,
            temperature: ex.temperature,
            digest: ex.request_digest.clone(),
            truncated: ex.truncated,
        });
        if ex.transport_retries > 0 {
            self.log(Event::TransportRetry { template_id: ex.template_id.clone(), retries: ex.transport_retries });
        }
        if ex.overwrote {
            self.log(Event::CassetteOverwrite { digest: ex.request_digest.clone() });
        }
    }

    fn ask(
        &mut self,
        node: NodeId,
        template: &str,
        substitutions: BTreeMap<String, String>,
        purpose: CallPurpose,
    ) -> Result<LlmExchange, EngineError> {
        self.check_deadline()?;
        let temperature = self.tree.get(node).temperature;
        let ex = self.llm.complete(template, &substitutions, temperature, self.config.max_tokens)?;
        self.log_exchange(Some(node), &ex, purpose);
        Ok(ex)
    }

    fn verify(&mut self, node: Option<NodeId>, program: &str) -> Result<VerifierReport, EngineError> {
        self.check_deadline()?;
        let report = run_verifier(program, self.verifier, self.config.verifier_timeout_seconds)?;
        self.log(Event::VerifierRun {
            node,
            status: report.status,
            wall_time_seconds: report.wall_time_seconds,
            program_digest: program_digest(program),
            first_error: report.diagnostics.first().map(|d| d.kind),
        });
        Ok(report)
    }

    /// The whole-program snapshot the search has reached.
    pub fn program(&self) -> &str {
        &self.program
    }

    fn settings(&self) -> LlmSettings {
        LlmSettings::from(&self.config)
    }

    fn reusable_lemmas(&self) -> String {
        if self.pool.is_empty() {
            "(none)".into()
        } else {
            self.pool.iter().map(|e| e.text.as_str()).collect::<Vec<_>>().join("\n\n")
        }
    }

    fn statements_above(&self, id: NodeId) -> Vec<String> {
        std::iter::once(id)
            .chain(self.tree.ancestors(id))
            .map(|n| self.tree.get(n).signature.normalized_statement())
            .collect()
    }

    /// Replaces the node's definition in `into` with the candidate's. New
    /// lemmas are declared bodiless and queued (or taken from the pool),
    /// new functions are kept, anything redefining an existing symbol is
    /// refused.
    fn merge_candidate(&self, id: NodeId, into: &str, candidate: &str, goals: &[Goal]) -> Result<Merged, String> {
        let sig = &self.tree.get(id).signature;
        let cp = Program::parse(candidate).map_err(|e| format!("the candidate does not parse: {e}"))?;
        let d = cp.decl(&sig.name).ok_or_else(|| format!("the candidate does not define `{}`", sig.name))?;
        if d.body.is_none() {
            return Err(format!("the candidate gives `{}` no body", sig.name));
        }
        if !d.signature.same_contract(sig) {
            return Err(format!("the candidate changes the signature or contract of `{}`", sig.name));
        }
        let ip = Program::parse(into).map_err(|e| e.to_string())?;
        let mut above = self.statements_above(id);
        above.extend(goals.iter().map(|g| g.signature.normalized_statement()));
        let mut before = String::new();
        let mut new_goals: Vec<Goal> = Vec::new();
        let mut reused = Vec::new();
        for other in cp.decls.iter().filter(|o| o.name != sig.name) {
            if let Some(existing) = ip.decl(&other.name) {
                let identical = normalize_ws(ip.decl_text(existing)) == normalize_ws(cp.decl_text(other));
                let restated = other.is_bodiless() && existing.signature.same_contract(&other.signature);
                if identical || restated {
                    continue;
                }
                return Err(format!("the candidate redefines `{}`, which it must not touch", other.name));
            }
            if ip.other_names.contains(&other.name) {
                return Err(format!("the candidate redefines `{}`, which it must not touch", other.name));
            }
            match other.kind {
                DeclKind::Lemma => {
                    let mut gsig = other.signature.clone();
                    gsig.other_clauses.retain(|c| !c.starts_with("decreases"));
                    let stmt = gsig.normalized_statement();
                    if above.contains(&stmt) {
                        return Err(format!("helper lemma `{}` restates a goal that is already open", other.name));
                    }
                    above.push(stmt.clone());
                    match self.pool.iter().find(|e| e.signature.normalized_statement() == stmt) {
                        Some(e) if e.names.iter().all(|n| !ip.has_name(n)) && e.signature.name == other.name => {
                            before.push_str(&e.text);
                            before.push_str("\n\n");
                            reused.push(e.signature.name.clone());
                        }
                        _ => new_goals.push(Goal::new(gsig)),
                    }
                }
                DeclKind::Function | DeclKind::Predicate => {
                    before.push_str(cp.decl_text(other));
                    before.push_str("\n\n");
                }
                DeclKind::Method => return Err(format!("the candidate adds a method `{}`; only lemmas may be added", other.name)),
            }
        }
        // Pool lemmas called by name without being declared.
        let node_text = cp.decl_text(d);
        for e in &self.pool {
            let missing = e.names.iter().all(|n| !ip.has_name(n) && cp.decl(n).is_none());
            if missing && code::mentions(node_text, &e.signature.name) && !reused.contains(&e.signature.name) {
                before.push_str(&e.text);
                before.push_str("\n\n");
                reused.push(e.signature.name.clone());
            }
        }
        let nd = ip.decl(&sig.name).ok_or_else(|| format!("`{}` is missing from the working program", sig.name))?;
        let replaced = crate::dafny::apply_edits(
            &ip.src,
            vec![crate::dafny::TextEdit::replace(ip.decl_range(nd), format!("{before}{node_text}"))],
        );
        let sigs: Vec<MethodSignature> = new_goals.iter().map(|g| g.signature.clone()).collect();
        let program = declare_bodiless(&replaced, &sigs).map_err(|e| e.to_string())?;
        if nd.body.is_some() {
            match same_executable_code(into, &program) {
                Ok(true) => {}
                Ok(false) => {
                    return Err("the candidate changes executable statements; only annotations may be added".into())
                }
                Err(e) => return Err(format!("the merged program does not parse: {e}")),
            }
        }
        Ok(Merged { program, new_goals, reused })
    }

    /// Runs the gate, then up to `t` generation and repair calls until the
    /// node's code verifies with its pending lemmas assumed.
    pub fn visit_node(&mut self, id: NodeId) -> Result<VisitOutcome, EngineError> {
        let t = self.config.max_generation_attempts_t;
        let node = self.tree.get(id).clone();
        let sig = node.signature.clone();
        let base = node.base_code.clone();
        let proof = node.textual_proof.clone().unwrap_or_default();
        let mut attempts = 0u32;
        let exhausted = |this: &mut Self, attempts: u32, why: &str| {
            this.tree.get_mut(id).generation_attempts = attempts;
            Ok(VisitOutcome::Exhausted(why.to_string()))
        };

        if node.parent_id.is_some() {
            loop {
                if attempts >= t {
                    return exhausted(self, attempts, "no readable verdict from the verifiability gate");
                }
                let s = subs([
                    ("signature", sig.render_header(false)),
                    ("program", base.clone()),
                    ("textual_proof", proof.clone()),
                ]);
                let ex = self.ask(id, GATE, s, CallPurpose::Gate)?;
                match parse_verdict(&ex.response_text) {
                    Ok(true) => break,
                    Ok(false) => return Ok(VisitOutcome::GateRejected),
                    Err(_) => attempts += 1,
                }
            }
        }

        let mut goals: Vec<Goal> = node.seeded_goals.clone();
        let mut current: Option<String> = None;
        let mut feedback = String::new();
        let mut repair: Option<(String, String)> = None;
        loop {
            if attempts >= t {
                return exhausted(self, attempts, "generation attempts used up");
            }
            let attempt = (attempts + 1).to_string();
            let (template, s, into, purpose) = match (&repair, &current) {
                (Some((diagnostics, hint)), Some(cur)) => (
                    REPAIR,
                    subs([
                        ("candidate", code::decl_text(cur, &sig.name).unwrap_or_default()),
                        ("diagnostics", diagnostics.clone()),
                        ("hint", hint.clone()),
                        ("program", cur.clone()),
                        ("attempt", attempt),
                    ]),
                    cur.clone(),
                    CallPurpose::Repair,
                ),
                _ if code::has_body(&base, &sig.name) => (
                    AUGMENT,
                    subs([
                        ("body", code::decl_text(&base, &sig.name).unwrap_or_default()),
                        ("program", base.clone()),
                        ("textual_proof", proof.clone()),
                        ("reusable_lemmas", self.reusable_lemmas()),
                        ("feedback", feedback.clone()),
                        ("attempt", attempt),
                    ]),
                    base.clone(),
                    CallPurpose::Generation,
                ),
                _ => (
                    GENERATE,
                    subs([
                        ("signature", sig.render_header(false)),
                        ("program", base.clone()),
                        ("textual_proof", proof.clone()),
                        ("reusable_lemmas", self.reusable_lemmas()),
                        ("feedback", feedback.clone()),
                        ("attempt", attempt),
                    ]),
                    base.clone(),
                    CallPurpose::Generation,
                ),
            };
            attempts += 1;
            let ex = self.ask(id, template, s, purpose)?;
            let rejected = |why: String, repair: &mut Option<(String, String)>, feedback: &mut String| match repair {
                Some((_, hint)) => *hint = format!("Your previous answer was rejected: {why}"),
                None => *feedback = format!("Your previous answer was rejected: {why}\n"),
            };
            if ex.truncated {
                rejected("the answer was cut off".into(), &mut repair, &mut feedback);
                continue;
            }
            let candidate = match extract_code_block(&ex.response_text) {
                Ok(c) => c.code,
                Err(LlmError::EmptyResponse) => {
                    rejected("the answer was empty".into(), &mut repair, &mut feedback);
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let keep: Vec<Goal> = if template == REPAIR { goals.clone() } else { node.seeded_goals.clone() };
            match self.merge_candidate(id, &into, &candidate, &keep) {
                Err(why) => {
                    rejected(why, &mut repair, &mut feedback);
                    continue;
                }
                Ok(m) => {
                    for name in &m.reused {
                        self.log(Event::RepairApplied { node: id, kind: RepairKind::LemmaReused, line: None, lemma: Some(name.clone()) });
                    }
                    goals = keep;
                    goals.extend(m.new_goals);
                    current = Some(m.program);
                }
            }

            // Verify, then repair locally as long as repairs apply.
            loop {
                let cur = current.clone().expect("set above");
                let report = self.verify(Some(id), &cur)?;
                if report.is_verified() {
                    self.tree.get_mut(id).generation_attempts = attempts;
                    return Ok(VisitOutcome::Verified { code: cur, goals });
                }
                let text = report.feedback();
                let has = |k: DiagnosticKind| report.diagnostics.iter().any(|d| d.kind == k);
                if has(DiagnosticKind::SyntaxError) || has(DiagnosticKind::ResolutionError) {
                    repair = Some((text, "Fix the syntax and resolution errors.".into()));
                    break;
                }
                if has(DiagnosticKind::PostconditionFailure) {
                    let callee = code::callees(&cur, &sig.name).into_iter().find(|c| self.lifted.contains(c) && c != &sig.name);
                    if let Some(callee) = callee {
                        if attempts >= t {
                            return exhausted(self, attempts, "generation attempts used up");
                        }
                        attempts += 1;
                        match self.strengthen(id, &cur, &callee, &text)? {
                            Ok(next) => {
                                for g in goals.iter_mut().filter(|g| g.signature.name == callee) {
                                    g.signature = Program::parse(&next)
                                        .ok()
                                        .and_then(|p| p.decl(&callee).map(|d| d.signature.clone()))
                                        .unwrap_or_else(|| g.signature.clone());
                                }
                                current = Some(next);
                                continue;
                            }
                            Err(why) => {
                                repair = Some((text, format!("Strengthening `{callee}` failed: {why}")));
                                break;
                            }
                        }
                    }
                }
                let mut failing: Vec<u32> = report
                    .diagnostics
                    .iter()
                    .filter(|d| d.kind == DiagnosticKind::AssertionFailure)
                    .filter_map(|d| d.line)
                    .collect();
                failing.sort_unstable();
                failing.dedup();
                if !failing.is_empty() {
                    match self.repair_assertions(id, &cur, &failing, &text, &mut goals, &mut attempts)? {
                        AssertionRepair::Changed(next) => {
                            current = Some(next);
                            continue;
                        }
                        AssertionRepair::Removed(next) => {
                            current = Some(next);
                            repair = Some((text, "Assertions that do not hold were removed; prove the remaining goals differently.".into()));
                            break;
                        }
                        AssertionRepair::Unchanged => {
                            if attempts >= t {
                                return exhausted(self, attempts, "generation attempts used up");
                            }
                            repair = Some((text, "Prove the failing assertions.".into()));
                            break;
                        }
                    }
                }
                let invariant = report
                    .diagnostics
                    .iter()
                    .filter(|d| d.kind.is_invariant())
                    .filter_map(|d| d.line.map(|l| (l, d.kind == DiagnosticKind::InvariantOnEntry)))
                    .min();
                if let Some((line, on_entry)) = invariant {
                    if attempts >= t {
                        return exhausted(self, attempts, "generation attempts used up");
                    }
                    match self.repair_invariant(id, &cur, line, on_entry, &text, &mut goals, &mut attempts)? {
                        AssertionRepair::Changed(next) => {
                            current = Some(next);
                            continue;
                        }
                        AssertionRepair::Removed(next) => {
                            current = Some(next);
                            repair = Some((text, "An invariant that does not hold was removed; find a correct one.".into()));
                            break;
                        }
                        AssertionRepair::Unchanged => {
                            repair = Some((text, "Fix the failing loop invariant.".into()));
                            break;
                        }
                    }
                }
                let hint = if has(DiagnosticKind::Timeout) {
                    "The verifier timed out. Simplify the proof: split it with intermediate assertions or helper lemmas."
                } else {
                    "Fix the declaration so that every reported obligation is proved."
                };
                repair = Some((text, hint.into()));
                break;
            }
        }
    }

    fn existing_names(&self, program: &str) -> String {
        Program::parse(program)
            .map(|p| p.decls.iter().map(|d| d.name.clone()).chain(p.other_names.clone()).collect::<Vec<_>>().join(", "))
            .unwrap_or_default()
    }

    /// Checks a proposed sub-lemma against names and open goals.
    fn admissible(&self, id: NodeId, program: &str, sig: &MethodSignature, goals: &[Goal]) -> Result<(), String> {
        if Program::parse(program).map(|p| p.has_name(&sig.name)).unwrap_or(true) {
            return Err(format!("the name `{}` is taken", sig.name));
        }
        let stmt = sig.normalized_statement();
        if self.statements_above(id).contains(&stmt) || goals.iter().any(|g| g.signature.normalized_statement() == stmt) {
            return Err("the lemma restates a goal that is already open".into());
        }
        Ok(())
    }

    fn repair_assertions(
        &mut self,
        id: NodeId,
        cur: &str,
        lines: &[u32],
        diagnostics: &str,
        goals: &mut Vec<Goal>,
        attempts: &mut u32,
    ) -> Result<AssertionRepair, EngineError> {
        let t = self.config.max_generation_attempts_t;
        // Judged in source order; edits applied bottom-up so lines stay valid.
        let mut by_calls: Vec<(u32, String)> = Vec::new();
        let mut removals: Vec<u32> = Vec::new();
        let mut new_sigs: Vec<MethodSignature> = Vec::new();
        for &line in lines {
            if *attempts >= t {
                break;
            }
            let Some(assertion) = code::assertion_at(cur, line) else { continue };
            let ex = self.ask(id, ASSERTION_GATE, subs([("assertion", assertion.clone()), ("program", cur.to_string())]), CallPurpose::Gate)?;
            match parse_verdict(&ex.response_text) {
                Ok(true) => {}
                Ok(false) => {
                    removals.push(line);
                    continue;
                }
                Err(_) => {
                    *attempts += 1;
                    continue;
                }
            }
            if *attempts >= t {
                break;
            }
            *attempts += 1;
            let mut names = self.existing_names(cur);
            for s in &new_sigs {
                names.push_str(", ");
                names.push_str(&s.name);
            }
            let s = subs([
                ("assertion", assertion),
                ("diagnostic", diagnostics.to_string()),
                ("program", cur.to_string()),
                ("existing_names", names),
            ]);
            let ex = self.ask(id, SUBLEMMA_ASSERTION, s, CallPurpose::Repair)?;
            let Ok(proposal) = parse_sublemma(&ex.response_text) else { continue };
            let mut all_goals = goals.clone();
            all_goals.extend(new_sigs.iter().cloned().map(Goal::new));
            if self.admissible(id, cur, &proposal.signature, &all_goals).is_err()
                || new_sigs.iter().any(|s| s.name == proposal.signature.name)
            {
                continue;
            }
            by_calls.push((line, proposal.call));
            new_sigs.push(proposal.signature);
        }
        if by_calls.is_empty() && removals.is_empty() {
            return Ok(AssertionRepair::Unchanged);
        }
        let mut next = cur.to_string();
        let mut edits: Vec<(u32, Option<String>)> =
            by_calls.iter().map(|(l, c)| (*l, Some(c.clone()))).chain(removals.iter().map(|l| (*l, None))).collect();
        edits.sort_by_key(|e| std::cmp::Reverse(e.0));
        for (line, call) in &edits {
            next = match call {
                Some(c) => code::add_assert_by(&next, *line, c),
                None => code::remove_assertion(&next, *line),
            }
            .map_err(RefactorError::Internal)?;
        }
        next = declare_bodiless(&next, &new_sigs)?;
        for (line, call) in edits.iter().rev() {
            let (kind, lemma) = match call {
                Some(c) => (RepairKind::AssertionSubLemma, c.split('(').next().map(str::to_string)),
                None => (RepairKind::AssertionRemoved, None),
            };
            self.log(Event::RepairApplied { node: id, kind, line: Some(*line), lemma });
        }
        goals.extend(new_sigs.into_iter().map(Goal::new));
        Ok(if removals.is_empty() { AssertionRepair::Changed(next) } else { AssertionRepair::Removed(next) })
    }

    #[allow(clippy::too_many_arguments)]
    fn repair_invariant(
        &mut self,
        id: NodeId,
        cur: &str,
        line: u32,
        on_entry: bool,
        diagnostics: &str,
        goals: &mut Vec<Goal>,
        attempts: &mut u32,
    ) -> Result<AssertionRepair, EngineError> {
        let Some((invariant, loop_text)) = code::invariant_at(cur, line) else { return Ok(AssertionRepair::Unchanged) };
        let ex = self.ask(id, INVARIANT_GATE, subs([("invariant", invariant.clone()), ("program", cur.to_string())]), CallPurpose::Gate)?;
        match parse_verdict(&ex.response_text) {
            Ok(true) => {}
            Ok(false) => {
                let next = code::remove_invariant(cur, line).map_err(RefactorError::Internal)?;
                self.log(Event::RepairApplied { node: id, kind: RepairKind::InvariantRemoved, line: Some(line), lemma: None });
                return Ok(AssertionRepair::Removed(next));
            }
            Err(_) => {
                *attempts += 1;
                return Ok(AssertionRepair::Unchanged);
            }
        }
        if *attempts >= self.config.max_generation_attempts_t {
            return Ok(AssertionRepair::Unchanged);
        }
        *attempts += 1;
        let s = subs([
            ("invariant", invariant),
            ("loop", loop_text),
            ("diagnostic", diagnostics.to_string()),
            ("program", cur.to_string()),
            ("existing_names", self.existing_names(cur)),
        ]);
        let ex = self.ask(id, SUBLEMMA_INVARIANT, s, CallPurpose::Repair)?;
        let Ok(proposal) = parse_sublemma(&ex.response_text) else { return Ok(AssertionRepair::Unchanged) };
        if self.admissible(id, cur, &proposal.signature, goals).is_err() {
            return Ok(AssertionRepair::Unchanged);
        }
        let next = code::insert_invariant_call(cur, line, &proposal.call, on_entry).map_err(RefactorError::Internal)?;
        let next = declare_bodiless(&next, std::slice::from_ref(&proposal.signature))?;
        self.log(Event::RepairApplied {
            node: id,
            kind: RepairKind::InvariantSubLemma,
            line: Some(line),
            lemma: Some(proposal.signature.name.clone()),
        });
        goals.push(Goal::new(proposal.signature));
        Ok(AssertionRepair::Changed(next))
    }

    /// Asks for stronger ensures clauses on a lifted callee and installs
    /// them. A callee that was already proven goes back to pending.
    fn strengthen(&mut self, id: NodeId, cur: &str, callee: &str, diagnostics: &str) -> Result<Result<String, String>, EngineError> {
        let caller = &self.tree.get(id).signature.name;
        let s = subs([
            ("callee", callee.to_string()),
            ("caller", code::decl_text(cur, caller).unwrap_or_default()),
            ("diagnostic", diagnostics.to_string()),
            ("callee_signature", code::decl_text(cur, callee).unwrap_or_default()),
            ("program", cur.to_string()),
        ]);
        let ex = self.ask(id, STRENGTHEN, s, CallPurpose::Repair)?;
        let code_text = match extract_code_block(&ex.response_text) {
            Ok(c) => c.code,
            Err(LlmError::EmptyResponse) => return Ok(Err("empty answer".into())),
            Err(e) => return Err(e.into()),
        };
        let Ok((new_sig, _)) = parse_declaration(&code_text) else { return Ok(Err("no declaration in the answer".into())) };
        let old = match Program::parse(cur).ok().and_then(|p| p.decl(callee).map(|d| d.signature.clone())) {
            Some(s) => s,
            None => return Ok(Err(format!("`{callee}` is not declared"))),
        };
        let norm = |v: &[String]| v.iter().map(|s| normalize_ws(s)).collect::<Vec<_>>();
        let same_shape = new_sig.name == old.name
            && new_sig.parameters == old.parameters
            && new_sig.returns == old.returns
            && norm(&new_sig.requires_clauses) == norm(&old.requires_clauses);
        if !same_shape {
            return Ok(Err("parameters, results and requires clauses must stay as they are".into()));
        }
        if norm(&new_sig.ensures_clauses) == norm(&old.ensures_clauses) || new_sig.ensures_clauses.is_empty() {
            return Ok(Err("the ensures clauses were not strengthened".into()));
        }
        let mut new_sig = new_sig;
        new_sig.kind = old.kind;
        new_sig.other_clauses = old.other_clauses.clone();
        let next = match code::replace_decl(cur, callee, &new_sig.render_bodiless()) {
            Ok(n) => n,
            Err(e) => return Ok(Err(e)),
        };
        // Carry the stronger contract everywhere the callee is still open.
        let ids: Vec<NodeId> = self.tree.nodes().map(|n| n.id).collect();
        for n in ids {
            if self.tree.get(n).status == NodeStatus::Aborted {
                continue;
            }
            if self.tree.get(n).signature.name == callee {
                if self.tree.get(n).status == NodeStatus::Verified {
                    self.tree.invalidate(n);
                    self.requeue.push(n);
                }
                self.tree.get_mut(n).signature = new_sig.clone();
            }
            let node = self.tree.get_mut(n);
            for g in node.seeded_goals.iter_mut().chain(node.working_list.iter_mut()).filter(|g| g.signature.name == callee) {
                g.signature = new_sig.clone();
            }
            if code::decl_text(&node.base_code, callee).is_some() && !code::has_body(&node.base_code, callee) {
                if let Ok(b) = code::replace_decl(&node.base_code, callee, &new_sig.render_bodiless()) {
                    node.base_code = b;
                }
            }
        }
        if !code::has_body(&self.program, callee) {
            if let Ok(p) = code::replace_decl(&self.program, callee, &new_sig.render_bodiless()) {
                self.program = p;
            }
        }
        self.log(Event::RepairApplied {
            node: id,
            kind: RepairKind::CalleeContractStrengthened,
            line: None,
            lemma: Some(callee.to_string()),
        });
        Ok(Ok(next))
    }

    /// Moves proven lemmas of the discarded subtree into the reuse pool.
    fn discard_children(&mut self, id: NodeId) {
        for n in self.tree.discard_subtree(id) {
            if let Some(entry) = self.completed.remove(&n) {
                let stmt = entry.signature.normalized_statement();
                if !self.pool.iter().any(|e| e.signature.normalized_statement() == stmt) {
                    self.pool.push(entry);
                }
            }
        }
    }

    fn record_completed(&mut self, id: NodeId) {
        let node = self.tree.get(id);
        if node.signature.kind != DeclKind::Lemma || node.parent_id.is_none() {
            return;
        }
        let mut names = vec![node.signature.name.clone()];
        for d in self.tree.descendants(id) {
            if !self.dropped.contains(&d) {
                names.push(self.tree.get(d).signature.name.clone());
            }
        }
        let Ok(p) = Program::parse(&self.program) else { return };
        let texts: Vec<&str> = names.iter().filter_map(|n| p.decl(n)).map(|d| p.decl_text(d)).collect();
        if texts.len() == names.len() {
            self.completed.insert(id, PoolEntry { signature: node.signature.clone(), names, text: texts.join("\n\n") });
        }
    }

    /// Visits `id` up to `s` times, exploring its children depth-first
    /// after each successful visit. Returns whether the whole subtree was
    /// proven.
    pub fn solve(&mut self, id: NodeId) -> Result<bool, EngineError> {
        let snapshot = self.program.clone();
        let s = self.config.retry_budget_s;
        while self.tree.get(id).retries_used < s {
            let retry = self.tree.get(id).retries_used;
            self.check_deadline()?;
            self.discard_children(id);
            self.program = snapshot.clone();
            let temperature = temperature_schedule(&self.config, retry)?;
            let base = {
                let node = self.tree.get(id);
                match &node.seed_body {
                    Some(seed) if !code::has_body(&self.program, &node.signature.name) => {
                        code::with_body(&self.program, &node.signature, seed).map_err(RefactorError::Internal)?
                    }
                    _ => self.program.clone(),
                }
            };
            {
                let node = self.tree.get_mut(id);
                node.base_code = base;
                node.temperature = temperature;
                node.status = NodeStatus::InProgress;
                node.retries_used = retry + 1;
                node.generation_attempts = 0;
                node.working_list = node.seeded_goals.clone();
                node.verified_code = None;
            }
            self.log(Event::VisitStarted { node: id, retry_index: retry, temperature });
            match self.visit_node(id)? {
                VisitOutcome::GateRejected => {
                    self.log(Event::VisitFailed { node: id, reason: "judged not verifiable".into() });
                    break;
                }
                VisitOutcome::Exhausted(reason) => {
                    self.log(Event::VisitFailed { node: id, reason });
                }
                VisitOutcome::Verified { code: verified, goals } => {
                    let node = self.tree.get(id).clone();
                    let is_sublemma =
                        node.parent_id.is_some() && node.signature.kind == DeclKind::Lemma && !self.lifted.contains(&node.signature.name);
                    if is_sublemma {
                        if let Ok(without) = code::remove_lemma(&snapshot, &node.signature.name) {
                            if self.verify(node.parent_id, &without)?.is_verified() {
                                self.program = without;
                                self.dropped.insert(id);
                                let n = self.tree.get_mut(id);
                                n.status = NodeStatus::Verified;
                                n.verified_code = Some(verified);
                                self.log(Event::RepairApplied {
                                    node: node.parent_id.expect("sub-lemmas have parents"),
                                    kind: RepairKind::LemmaDroppedAsUseless,
                                    line: None,
                                    lemma: Some(node.signature.name.clone()),
                                });
                                self.log(Event::NodeVerified { node: id, pending_children: 0 });
                                return Ok(true);
                            }
                        }
                    }
                    self.program = verified.clone();
                    {
                        let n = self.tree.get_mut(id);
                        n.status = NodeStatus::Verified;
                        n.verified_code = Some(verified.clone());
                        n.working_list = goals.clone();
                    }
                    let mut queue = VecDeque::new();
                    for g in goals {
                        let child = self.tree.add_node(
                            Some(id),
                            g.signature.clone(),
                            verified.clone(),
                            None,
                            self.config.initial_temperature,
                        )?;
                        self.tree.get_mut(child).seed_body = g.seed_body;
                        self.log(Event::NodeCreated { node: child, parent: Some(id), name: g.signature.name });
                        queue.push_back(child);
                    }
                    self.log(Event::NodeVerified { node: id, pending_children: queue.len() });
                    let mut failed = None;
                    while let Some(c) = queue.pop_front() {
                        if !self.solve(c)? {
                            failed = Some(c);
                            break;
                        }
                        let back: Vec<NodeId> = self.requeue.drain(..).collect();
                        for r in back {
                            if self.tree.get(r).parent_id == Some(id) {
                                queue.push_back(r);
                            } else {
                                self.requeue.push(r);
                            }
                        }
                    }
                    match failed {
                        None if self.tree.get(id).status == NodeStatus::Verified => {
                            self.record_completed(id);
                            return Ok(true);
                        }
                        None => {
                            // Invalidated while its children were explored: visit again.
                        }
                        Some(c) => {
                            self.tree.get_mut(id).status = NodeStatus::Pending;
                            if retry + 1 < s {
                                let next = temperature_schedule(&self.config, retry + 1)?;
                                self.log(Event::Rollback { from: c, to: id, temperature: next });
                            }
                        }
                    }
                }
            }
        }
        self.discard_children(id);
        self.program = snapshot;
        self.tree.get_mut(id).status = NodeStatus::Exhausted;
        self.log(Event::NodeExhausted { node: id });
        Ok(false)
    }

    /// One full attempt: decomposition, search, fresh final check and
    /// restoration. Returns the final status and, on success, the program.
    fn attempt(&mut self, task: &VerificationTask) -> Result<(FinalStatus, Option<String>, Option<Restoration>), EngineError> {
        Program::parse(&task.program)?;
        let given = self.verify(None, &task.program)?;
        if given.is_verified() {
            return Ok((FinalStatus::Verified, Some(task.program.clone()), None));
        }
        let settings = self.settings();
        let mut plan = None;
        if let Some(strategy) = task.strategy {
            if let Some(method) = find_target_method(&task.program)? {
                self.check_deadline()?;
                let mut log = Vec::new();
                let result = decompose_checked(&task.program, &method, strategy, self.llm, self.verifier, &settings, &mut log);
                for ex in &log {
                    let purpose = if ex.template_id == CONSISTENCY { CallPurpose::Gate } else { CallPurpose::Decomposition };
                    self.log_exchange(None, ex, purpose);
                }
                match result {
                    Ok(p) => {
                        self.log(Event::DecompositionProposed { method, accepted: true, reason: None });
                        plan = Some(p);
                    }
                    Err(e @ (RefactorError::DecompositionFailed { .. } | RefactorError::DecompositionAbandoned { .. })) => {
                        self.log(Event::DecompositionProposed { method, accepted: false, reason: Some(e.to_string()) });
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }
        self.tree = init_tree(task, plan.as_ref())?;
        if let Some(p) = &plan {
            self.lifted = p.lifted_names().into_iter().map(str::to_string).collect();
        }
        let root = self.tree.root().expect("just created");
        self.program = self.tree.get(root).base_code.clone();
        self.log(Event::NodeCreated { node: root, parent: None, name: self.tree.get(root).signature.name.clone() });
        if !self.solve(root)? {
            return Ok((FinalStatus::Failed, None, None));
        }
        let program = self.program.clone();
        let fresh = self.verify(None, &program)?;
        if !fresh.is_verified() {
            return Ok((FinalStatus::Failed, None, None));
        }
        match plan.filter(|p| !p.is_identity()) {
            None => Ok((FinalStatus::Verified, Some(program), None)),
            Some(plan) => {
                self.check_deadline()?;
                let mut log = Vec::new();
                let restored = restore_code(&task.program, &plan, &program, self.llm, self.verifier, &settings, &mut log);
                for ex in &log {
                    self.log_exchange(None, ex, CallPurpose::Restoration);
                }
                let restored = restored?;
                self.log(Event::Restored { complete: restored.complete() });
                Ok((FinalStatus::Verified, Some(restored.program.clone()), Some(restored)))
            }
        }
    }
}

enum AssertionRepair {
    Changed(String),
    Removed(String),
    Unchanged,
}

/// Outcome of one end-to-end attempt.
#[derive(Debug)]
pub struct AttemptResult {
    pub status: FinalStatus,
    pub program: Option<String>,
    pub restoration: Option<Restoration>,
    pub transcript: RunTranscript,
    pub tree: ProofTree,
    /// Why the attempt could not run to a verdict, if it could not.
    pub error: Option<EngineError>,
}

/// All attempts of a task, stopping at the first success.
#[derive(Debug)]
pub struct TaskOutcome {
    pub task_id: String,
    pub attempts: Vec<AttemptResult>,
}

impl TaskOutcome {
    pub fn success(&self) -> Option<&AttemptResult> {
        self.attempts.iter().find(|a| a.status == FinalStatus::Verified)
    }

    /// The error that stopped the last attempt, if any.
    pub fn error(&self) -> Option<&EngineError> {
        self.attempts.last().and_then(|a| a.error.as_ref())
    }

    pub fn verified(&self) -> bool {
        self.success().is_some()
    }

    /// Lemmas in the final program that the task did not have.
    pub fn new_lemma_count(&self, task_program: &str) -> usize {
        let lemmas = |src: &str| -> HashSet<String> {
            Program::parse(src)
                .map(|p| p.decls.iter().filter(|d| d.kind == DeclKind::Lemma).map(|d| d.name.clone()).collect())
                .unwrap_or_default()
        };
        match self.success().and_then(|a| a.program.as_deref()) {
            Some(p) => lemmas(p).difference(&lemmas(task_program)).count(),
            None => 0,
        }
    }

    pub fn wall_time_ms(&self) -> u64 {
        self.attempts.iter().map(|a| a.transcript.totals.wall_time_ms).sum()
    }
}

/// Runs one attempt and closes its transcript. A failure of the
/// surroundings (model or verifier unreachable) still yields a closed,
/// aborted transcript, with the error kept alongside.
pub fn run_attempt<B: LlmBackend>(
    task: &VerificationTask,
    attempt: u32,
    llm: &LlmGateway<B>,
    verifier: &dyn Verifier,
    clock: &dyn Clock,
) -> AttemptResult {
    let mut engine = Engine::new(&task.id, llm, verifier, clock, task.config.clone());
    engine.log(Event::AttemptStarted { attempt });
    let mut error = None;
    let (status, program, restoration) = match engine.attempt(task) {
        Ok(r) => r,
        Err(EngineError::Timeout) => {
            engine.log(Event::GlobalTimeout);
            (FinalStatus::Aborted, None, None)
        }
        Err(e) => {
            error = Some(e);
            (FinalStatus::Aborted, None, None)
        }
    };
    engine.log(Event::FinalResult { status });
    AttemptResult { status, program, restoration, transcript: engine.transcript, tree: engine.tree, error }
}

/// Up to `verify_at_k` independent attempts, stopping at the first success
/// or at the first attempt that could not run.
pub fn run_task<B: LlmBackend>(
    task: &VerificationTask,
    llm: &LlmGateway<B>,
    verifier: &dyn Verifier,
    clock: &dyn Clock,
) -> Result<TaskOutcome, EngineError> {
    task.config.validate()?;
    let mut attempts = Vec::new();
    for k in 1..=task.config.verify_at_k {
        let r = run_attempt(task, k, llm, verifier, clock);
        let done = r.status == FinalStatus::Verified || r.error.is_some();
        attempts.push(r);
        if done {
            break;
        }
    }
    Ok(TaskOutcome { task_id: task.id.clone(), attempts })
}

/// Strategy name accepted on the command line, `none` disabling decomposition.
pub fn parse_strategy(s: &str) -> Result<Option<Strategy>, String> {
    match s {
        "none" => Ok(None),
        other => other.parse().map(Some),
    }
}


#[cfg(test)]
mod tests;
