use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::backends::{load_config, ClockedVerifier, Mode, VerifierChoice};
use super::corpus::{load_corpus, TaskDescriptor};
use super::report::{BenchReport, TaskRecord};
use super::{read_file, to_json, write_file, BenchError, Exit};
use crate::engine::{root_target, run_task, Clock, SystemClock, TaskOutcome, VirtualClock};
use crate::llm::{LlmBackend, LlmGateway};
use crate::model::{RunConfig, RunTranscript, Strategy, VerificationTask};
use crate::refactor::{
    decompose_checked, find_target_method, identity_plan, lift_loops, plan_from_decomposed, restore_code,
    strip_annotations, LlmSettings, MappingReport,
};
use crate::verifier::{structural_check, Verifier, VerifierError};

/// Settings shared by every command that talks to a model or verifier.
#[derive(Debug, Clone, Default)]
pub struct RunArgs {
    pub mode: Mode,
    pub cassette: Option<PathBuf>,
    pub config: Option<PathBuf>,
    /// Overrides `verify_at_k` from the config.
    pub k: Option<u32>,
    pub global_timeout_seconds: Option<u64>,
    /// `None` keeps the program in its original shape.
    pub strategy: Option<Strategy>,
    pub verifier: VerifierChoice,
}

impl RunArgs {
    fn run_config(&self) -> Result<RunConfig, BenchError> {
        let mut config = load_config(self.config.as_deref())?;
        if let Some(k) = self.k {
            config.verify_at_k = k;
        }
        if let Some(g) = self.global_timeout_seconds {
            config.global_timeout_seconds = g;
        }
        config.validate().map_err(|e| BenchError::Usage(e.to_string()))?;
        Ok(config)
    }
}

/// Attempts of one task as written by `--transcript`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptFile {
    pub task_id: String,
    pub attempts: Vec<RunTranscript>,
}

#[derive(Debug, Clone, Default)]
pub struct VerifyArgs {
    pub input: PathBuf,
    pub outline: Option<PathBuf>,
    pub transcript: Option<PathBuf>,
    pub run: RunArgs,
}

#[derive(Debug)]
pub struct VerifyOutcome {
    pub exit: Exit,
    pub verified_path: Option<PathBuf>,
    pub mapping_path: Option<PathBuf>,
    pub outcome: TaskOutcome,
}

fn sibling(input: &Path, suffix: &str) -> PathBuf {
    let mut name = input.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    input.with_file_name(name)
}

/// Runs one task to completion with the given backends. Replay runs keep
/// time on a virtual clock charged with the verifier's reported durations.
fn execute(
    task: &VerificationTask,
    llm: Box<dyn LlmBackend>,
    verifier: Box<dyn Verifier>,
    replay: bool,
) -> Result<TaskOutcome, BenchError> {
    let gateway = LlmGateway::new(llm);
    if replay {
        let clock = Arc::new(VirtualClock::default());
        let verifier = ClockedVerifier::new(verifier, clock.clone());
        Ok(run_task(task, &gateway, &verifier, clock.as_ref())?)
    } else {
        let clock = SystemClock::default();
        Ok(run_task(task, &gateway, &verifier, &clock as &dyn Clock)?)
    }
}

/// `verify`: runs the whole pipeline on one file and writes
/// `<input>.verified.dfy` on success.
pub fn cmd_verify(args: &VerifyArgs) -> Result<VerifyOutcome, BenchError> {
    if !args.input.is_file() {
        return Err(BenchError::Usage(format!("input file {} does not exist", args.input.display())));
    }
    let program = read_file(&args.input)?;
    let config = args.run.run_config()?;
    let mut task = VerificationTask::new(
        args.input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        program,
    );
    task.config = config;
    task.strategy = args.run.strategy;
    task.outline = match &args.outline {
        Some(p) => Some(read_file(p)?),
        None => None,
    };
    let verifier = args.run.verifier.build()?;
    let llm = args.run.mode.backend(args.run.cassette.as_deref())?;
    let outcome = execute(&task, llm, verifier, args.run.mode == Mode::Replay)?;
    if let Some(path) = &args.transcript {
        let file = TranscriptFile {
            task_id: task.id.clone(),
            attempts: outcome.attempts.iter().map(|a| a.transcript.clone()).collect(),
        };
        write_file(path, &to_json(&file))?;
    }
    if let Some(e) = outcome.error() {
        let msg = e.to_string();
        return Err(if e.is_environment() { BenchError::Environment(msg) } else { BenchError::Failed(msg) });
    }
    let Some(success) = outcome.success() else {
        return Ok(VerifyOutcome { exit: Exit::Failed, verified_path: None, mapping_path: None, outcome });
    };
    let verified_path = sibling(&args.input, ".verified.dfy");
    write_file(&verified_path, success.program.as_deref().unwrap_or_default())?;
    let mut mapping_path = None;
    if let Some(r) = &success.restoration {
        let path = sibling(&args.input, ".mapping.json");
        write_file(&path, &to_json(&r.report))?;
        mapping_path = Some(path);
    }
    Ok(VerifyOutcome { exit: Exit::Verified, verified_path: Some(verified_path), mapping_path, outcome })
}

/// `strip`: removes every verification annotation.
pub fn cmd_strip(input: &Path, output: Option<&Path>) -> Result<String, BenchError> {
    let stripped = strip_annotations(&read_file(input)?)?;
    if let Some(out) = output {
        write_file(out, &stripped)?;
    }
    Ok(stripped)
}

#[derive(Debug, Clone, Default)]
pub struct DecomposeArgs {
    pub input: PathBuf,
    /// Directory receiving `program.dfy` and `plan.json`; defaults to
    /// `<input>.decomposed` next to the input.
    pub out: Option<PathBuf>,
    /// Lift loops without a model (full sharing only).
    pub mechanical: bool,
    pub run: RunArgs,
}

/// Verifier used where only resolution is needed: Dafny when it is
/// installed, else the structural check.
struct ResolveOnly(Option<Box<dyn Verifier>>);

impl Verifier for ResolveOnly {
    fn name(&self) -> &str {
        "resolve-only"
    }
    fn verify(&self, program: &str, timeout_seconds: u64) -> Result<crate::model::VerifierReport, VerifierError> {
        match &self.0 {
            Some(v) => v.verify(program, timeout_seconds),
            None => Ok(structural_check(program)),
        }
    }
    fn resolve(&self, program: &str) -> Result<crate::model::VerifierReport, VerifierError> {
        match &self.0 {
            Some(v) => v.resolve(program),
            None => Ok(structural_check(program)),
        }
    }
}

/// `decompose`: lifts the loops of the first multi-loop method.
pub fn cmd_decompose(args: &DecomposeArgs) -> Result<PathBuf, BenchError> {
    let program = read_file(&args.input)?;
    let strategy = args.run.strategy.unwrap_or(Strategy::Decoupled);
    let out = args.out.clone().unwrap_or_else(|| sibling(&args.input, ".decomposed"));
    let plan = match find_target_method(&program)? {
        None => identity_plan(&program, &root_target(&program)?, strategy).map_err(BenchError::Failed)?,
        Some(method) if args.mechanical => {
            if strategy != Strategy::FullSharing {
                return Err(BenchError::Usage("--mechanical lifting only implements --strategy full-sharing".into()));
            }
            let lifted = lift_loops(&program, &method)?;
            plan_from_decomposed(&program, &lifted.program, &method, strategy).map_err(BenchError::Failed)?
        }
        Some(method) => {
            let config = args.run.run_config()?;
            let gateway = LlmGateway::new(args.run.mode.backend(args.run.cassette.as_deref())?);
            let verifier = ResolveOnly(args.run.verifier.build().ok());
            let mut log = Vec::new();
            decompose_checked(&program, &method, strategy, &gateway, &verifier, &LlmSettings::from(&config), &mut log)?
        }
    };
    write_file(&out.join("program.dfy"), &plan.program)?;
    write_file(&out.join("plan.json"), &to_json(&plan))?;
    Ok(out)
}

#[derive(Debug, Clone, Default)]
pub struct RestoreArgs {
    pub original: PathBuf,
    /// A verified program, or a directory holding `verified.dfy` (or
    /// `program.dfy`) and optionally `plan.json`.
    pub verified: PathBuf,
    pub plan: Option<PathBuf>,
    /// Defaults to `<original>.restored.dfy`.
    pub output: Option<PathBuf>,
    pub run: RunArgs,
}

/// `restore`: maps a verified modular program back onto the original
/// shape. Without a plan the verified program is copied through.
pub fn cmd_restore(args: &RestoreArgs) -> Result<(PathBuf, MappingReport), BenchError> {
    let original = read_file(&args.original)?;
    let (verified_file, dir_plan) = if args.verified.is_dir() {
        let v = ["verified.dfy", "program.dfy"]
            .iter()
            .map(|n| args.verified.join(n))
            .find(|p| p.is_file())
            .ok_or_else(|| BenchError::Usage(format!("{} holds no verified.dfy or program.dfy", args.verified.display())))?;
        (v, Some(args.verified.join("plan.json")).filter(|p| p.is_file()))
    } else {
        (args.verified.clone(), None)
    };
    let verified = read_file(&verified_file)?;
    let strategy = args.run.strategy.unwrap_or(Strategy::Decoupled);
    let plan = match args.plan.clone().or(dir_plan) {
        Some(p) => serde_json::from_str(&read_file(&p)?).map_err(|e| BenchError::Usage(format!("{}: {e}", p.display())))?,
        None => identity_plan(&verified, &root_target(&verified)?, strategy).map_err(BenchError::Failed)?,
    };
    let config = args.run.run_config()?;
    let gateway = LlmGateway::new(args.run.mode.backend(args.run.cassette.as_deref())?);
    let verifier: Box<dyn Verifier> = if plan.is_identity() { Box::new(ResolveOnly(None)) } else { args.run.verifier.build()? };
    let mut log = Vec::new();
    let restored = restore_code(&original, &plan, &verified, &gateway, &verifier, &LlmSettings::from(&config), &mut log)?;
    let out = args.output.clone().unwrap_or_else(|| sibling(&args.original, ".restored.dfy"));
    write_file(&out, &restored.program)?;
    write_file(&out.with_extension("mapping.json"), &to_json(&restored.report))?;
    Ok((out, restored.report))
}

#[derive(Debug, Clone, Default)]
pub struct BenchArgs {
    pub corpus: PathBuf,
    pub report: Option<PathBuf>,
    pub jobs: usize,
    /// Use each task's `verifier.json` instead of Dafny.
    pub scripted_verifier: bool,
    pub run: RunArgs,
}

fn run_one(task: &TaskDescriptor, config: &RunConfig, args: &BenchArgs) -> TaskRecord {
    let mut record = TaskRecord {
        id: task.id.clone(),
        expected: task.expected,
        verified: false,
        attempts: 0,
        wall_time_seconds: 0.0,
        lemma_count: None,
        llm_calls: 0,
        verifier_runs: 0,
        restored: None,
        error: None,
    };
    let run = || -> Result<TaskOutcome, BenchError> {
        let verifier = if args.scripted_verifier {
            let script = task
                .verifier_script
                .clone()
                .ok_or_else(|| BenchError::Usage(format!("task {} has no verifier.json", task.id)))?;
            VerifierChoice::Script(script).build()?
        } else {
            args.run.verifier.build()?
        };
        let llm = args.run.mode.backend(task.cassette.as_deref())?;
        let mut vt = VerificationTask::new(task.id.clone(), task.program.clone());
        vt.outline = task.outline.clone();
        vt.config = config.clone();
        vt.strategy = args.run.strategy;
        execute(&vt, llm, verifier, args.run.mode == Mode::Replay)
    };
    match run() {
        Ok(outcome) => {
            record.verified = outcome.verified();
            record.attempts = outcome.attempts.len() as u32;
            record.wall_time_seconds = outcome.wall_time_ms() as f64 / 1000.0;
            record.llm_calls = outcome.attempts.iter().map(|a| a.transcript.totals.llm_calls).sum();
            record.verifier_runs = outcome.attempts.iter().map(|a| a.transcript.totals.verifier_runs).sum();
            record.error = outcome.error().map(|e| e.to_string());
            if let Some(s) = outcome.success() {
                record.lemma_count = Some(outcome.new_lemma_count(&task.program));
                record.restored = s.restoration.as_ref().map(|r| r.complete());
            }
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record
}

/// `bench`: runs every task of a corpus directory and writes a JSON report.
pub fn cmd_bench(args: &BenchArgs) -> Result<BenchReport, BenchError> {
    let (tasks, settings) = load_corpus(&args.corpus)?;
    let mut config = args.run.run_config()?;
    if let (Some(g), None) = (settings.global_timeout_seconds, args.run.global_timeout_seconds) {
        config.global_timeout_seconds = g;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.max(1))
        .build()
        .map_err(|e| BenchError::Environment(e.to_string()))?;
    let records: Vec<TaskRecord> = pool.install(|| tasks.par_iter().map(|t| run_one(t, &config, args)).collect());
    let report = BenchReport::new(config.verify_at_k, records).map_err(|e| BenchError::Usage(e.to_string()))?;
    if let Some(path) = &args.report {
        write_file(path, &to_json(&report))?;
    }
    Ok(report)
}
