use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pforge::bench::{
    cmd_bench, cmd_decompose, cmd_restore, cmd_strip, cmd_verify, BenchArgs, BenchError, DecomposeArgs, Exit, Mode,
    RestoreArgs, RunArgs, VerifierChoice, VerifyArgs,
};
use pforge::engine::parse_strategy;

#[derive(Parser)]
#[command(name = "pforge", version, about = "Verify Dafny programs with model-generated proofs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decompose, prove and restore one program.
    Verify {
        input: PathBuf,
        #[arg(long)]
        outline: Option<PathBuf>,
        /// Where to write the event log of every attempt.
        #[arg(long)]
        transcript: Option<PathBuf>,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Remove all verification annotations.
    Strip {
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Lift nested loops into separate methods.
    Decompose {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Lift without a model; implies full sharing.
        #[arg(long)]
        mechanical: bool,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Map a verified modular program back onto the original code.
    Restore {
        #[arg(long)]
        original: PathBuf,
        #[arg(long)]
        verified: PathBuf,
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Run a corpus of task directories and report verify@k.
    Bench {
        corpus: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Answer verification from each task's verifier.json.
        #[arg(long)]
        scripted_verifier: bool,
        #[command(flatten)]
        run: RunFlags,
    },
}

#[derive(Args)]
struct RunFlags {
    #[arg(long, default_value = "replay", value_parser = |s: &str| s.parse::<Mode>())]
    mode: Mode,
    #[arg(long)]
    cassette: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    k: Option<u32>,
    #[arg(long)]
    global_timeout: Option<u64>,
    /// full-sharing, decoupled, fully-decoupled or none.
    #[arg(long, default_value = "decoupled")]
    strategy: String,
    /// Answer verification from a recorded verdict table instead of Dafny.
    #[arg(long)]
    verifier_script: Option<PathBuf>,
}

impl RunFlags {
    fn into_args(self) -> Result<RunArgs, BenchError> {
        Ok(RunArgs {
            mode: self.mode,
            cassette: self.cassette,
            config: self.config,
            k: self.k,
            global_timeout_seconds: self.global_timeout,
            strategy: parse_strategy(&self.strategy).map_err(BenchError::Usage)?,
            verifier: self.verifier_script.map_or(VerifierChoice::Dafny, VerifierChoice::Script),
        })
    }
}

fn run(cli: Cli) -> Result<Exit, BenchError> {
    match cli.command {
        Command::Verify { input, outline, transcript, run } => {
            let out = cmd_verify(&VerifyArgs { input, outline, transcript, run: run.into_args()? })?;
            match &out.verified_path {
                Some(p) => println!("verified: {}", p.display()),
                None => println!("not verified after {} attempt(s)", out.outcome.attempts.len()),
            }
            if let Some(p) = &out.mapping_path {
                println!("mapping report: {}", p.display());
            }
            Ok(out.exit)
        }
        Command::Strip { input, output } => {
            let text = cmd_strip(&input, output.as_deref())?;
            if output.is_none() {
                print!("{text}");
            }
            Ok(Exit::Verified)
        }
        Command::Decompose { input, out, mechanical, run } => {
            let dir = cmd_decompose(&DecomposeArgs { input, out, mechanical, run: run.into_args()? })?;
            println!("decomposed: {}", dir.display());
            Ok(Exit::Verified)
        }
        Command::Restore { original, verified, plan, output, run } => {
            let (path, report) = cmd_restore(&RestoreArgs { original, verified, plan, output, run: run.into_args()? })?;
            println!("restored: {} ({})", path.display(), if report.complete { "complete" } else { "incomplete" });
            Ok(Exit::Verified)
        }
        Command::Bench { corpus, report, jobs, scripted_verifier, run } => {
            let r = cmd_bench(&BenchArgs { corpus, report, jobs, scripted_verifier, run: run.into_args()? })?;
            println!("verify@{}: {}", r.k, r.rate);
            let env = r.tasks.iter().any(|t| t.error.is_some());
            Ok(if env { Exit::Environment } else { Exit::Verified })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Exit::Usage.code() } else { 0 });
        }
    };
    match run(cli) {
        Ok(exit) => ExitCode::from(exit.code()),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit().code())
        }
    }
}

