use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{mpsc, OnceLock};
use std::time::{Duration, Instant};

use super::{classify_diagnostics, summarize, Verifier, VerifierError};
use crate::model::{DiagnosticKind, VerifierReport, VerifierStatus};

/// Command-line dialect of the installed Dafny.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CliDialect {
    /// `dafny verify ...` (4.x and later).
    Modern { json_diagnostics: bool },
    /// `dafny /compile:0 ...` (3.x).
    Legacy,
}

/// Runs the real Dafny verifier as a subprocess.
#[derive(Debug)]
pub struct DafnyCli {
    executable: PathBuf,
    dialect: OnceLock<CliDialect>,
}

static FILE_COUNTER: AtomicU64 = AtomicU64::new(0);

/// `PF_DAFNY_PATH`, else the first `dafny` on `PATH`.
pub fn locate_dafny() -> Option<PathBuf> {
    if let Some(p) = std::env::var_os("PF_DAFNY_PATH").filter(|p| !p.is_empty()) {
        let p = PathBuf::from(p);
        return p.is_file().then_some(p);
    }
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path)
        .flat_map(|dir| [dir.join("dafny"), dir.join("dafny.exe")])
        .find(|p| p.is_file())
}

impl DafnyCli {
    pub fn new(executable: impl Into<PathBuf>) -> Result<Self, VerifierError> {
        let executable = executable.into();
        if !executable.is_file() {
            return Err(VerifierError::MissingExecutable(executable.display().to_string()));
        }
        Ok(DafnyCli { executable, dialect: OnceLock::new() })
    }

    pub fn from_env() -> Result<Self, VerifierError> {
        match locate_dafny() {
            Some(p) => DafnyCli::new(p),
            None => Err(VerifierError::MissingExecutable(
                "dafny (set PF_DAFNY_PATH or put dafny on PATH)".to_string(),
            )),
        }
    }

    pub fn dialect(&self) -> CliDialect {
        *self.dialect.get_or_init(|| probe_dialect(&self.executable))
    }

    fn verify_args(&self, file: &Path, timeout_seconds: u64) -> Vec<String> {
        let file = file.display().to_string();
        match self.dialect() {
            CliDialect::Modern { json_diagnostics } => {
                let mut args =
                    vec!["verify".into(), "--verification-time-limit".into(), timeout_seconds.to_string()];
                if json_diagnostics {
                    args.push("--json-diagnostics".into());
                }
                args.push(file);
                args
            }
            CliDialect::Legacy => vec!["/compile:0".into(), format!("/timeLimit:{timeout_seconds}"), file],
        }
    }

    fn resolve_args(&self, file: &Path) -> Vec<String> {
        let file = file.display().to_string();
        match self.dialect() {
            CliDialect::Modern { .. } => vec!["resolve".into(), file],
            CliDialect::Legacy => vec!["/compile:0".into(), "/noVerify".into(), file],
        }
    }

    fn run(&self, program: &str, args: impl Fn(&Path) -> Vec<String>, timeout: Duration) -> Result<VerifierReport, VerifierError> {
        let n = FILE_COUNTER.fetch_add(1, Ordering::Relaxed);
        let dir = std::env::temp_dir().join(format!("pforge-{}", std::process::id()));
        std::fs::create_dir_all(&dir)?;
        let file = dir.join(format!("program{n}.dfy"));
        std::fs::write(&file, program)?;
        let result = run_with_deadline(&self.executable, &args(&file), timeout);
        let _ = std::fs::remove_file(&file);
        let (raw, exit, elapsed) = result?;
        Ok(report_from(raw, exit, elapsed))
    }
}

fn probe_dialect(exe: &Path) -> CliDialect {
    let version = Command::new(exe).arg("--version").output().ok();
    let text = version.map(|o| String::from_utf8_lossy(&o.stdout).into_owned()).unwrap_or_default();
    let major: u32 = text
        .split(|c: char| !c.is_ascii_digit())
        .find(|s| !s.is_empty())
        .and_then(|s| s.parse().ok())
        .unwrap_or(4);
    if major < 4 {
        return CliDialect::Legacy;
    }
    let help = Command::new(exe).args(["verify", "--help"]).output().ok();
    let json_diagnostics = help.is_some_and(|o| {
        String::from_utf8_lossy(&o.stdout).contains("--json-diagnostics")
            || String::from_utf8_lossy(&o.stderr).contains("--json-diagnostics")
    });
    CliDialect::Modern { json_diagnostics }
}

/// Runs `exe` and kills it at the deadline. Returns combined output, the exit
/// code (`None` when killed) and the elapsed time.
fn run_with_deadline(exe: &Path, args: &[String], timeout: Duration) -> Result<(String, Option<i32>, Duration), VerifierError> {
    let start = Instant::now();
    let mut cmd = Command::new(exe);
    cmd.args(args).stdin(Stdio::null()).stdout(Stdio::piped()).stderr(Stdio::piped());
    #[cfg(unix)]
    {
        // Own process group, so the solver processes Dafny starts die with it.
        use std::os::unix::process::CommandExt;
        cmd.process_group(0);
    }
    let mut child = cmd
        .spawn()
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied => {
                VerifierError::MissingExecutable(format!("{}: {e}", exe.display()))
            }
            _ => VerifierError::Io(e),
        })?;
    let mut stdout = child.stdout.take().expect("piped stdout");
    let mut stderr = child.stderr.take().expect("piped stderr");
    let (out_tx, out_rx) = mpsc::channel();
    let (err_tx, err_rx) = mpsc::channel();
    std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stdout.read_to_end(&mut buf);
        let _ = out_tx.send(String::from_utf8_lossy(&buf).into_owned());
    });
    std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stderr.read_to_end(&mut buf);
        let _ = err_tx.send(String::from_utf8_lossy(&buf).into_owned());
    });
    let exit = loop {
        if let Some(status) = child.try_wait()? {
            break status.code();
        }
        if start.elapsed() >= timeout {
            kill_tree(&mut child);
            let _ = child.wait();
            break None;
        }
        std::thread::sleep(Duration::from_millis(10));
    };
    // A grandchild that escaped the kill may still hold a pipe open.
    let grace = Duration::from_secs(1);
    let mut raw = out_rx.recv_timeout(grace).unwrap_or_default();
    let err = err_rx.recv_timeout(grace).unwrap_or_default();
    if !err.is_empty() {
        if !raw.is_empty() && !raw.ends_with('\n') {
            raw.push('\n');
        }
        raw.push_str(&err);
    }
    Ok((raw, exit, start.elapsed()))
}

fn kill_tree(child: &mut std::process::Child) {
    #[cfg(unix)]
    {
        if let Ok(pid) = i32::try_from(child.id()) {
            // SAFETY: plain syscall on a process group we created.
            unsafe {
                libc::kill(-pid, libc::SIGKILL);
            }
        }
    }
    let _ = child.kill();
}

pub(super) fn report_from(raw: String, exit: Option<i32>, elapsed: Duration) -> VerifierReport {
    let diagnostics = classify_diagnostics(&raw, exit);
    let summary = summarize(&raw);
    let has_errors = diagnostics.iter().any(|d| d.kind != DiagnosticKind::Unknown);
    let has_timeouts = diagnostics.iter().any(|d| d.kind == DiagnosticKind::Timeout);
    let only_timeouts = has_timeouts && diagnostics.iter().all(|d| matches!(d.kind, DiagnosticKind::Timeout | DiagnosticKind::Unknown));
    let status = if exit.is_none() || only_timeouts {
        VerifierStatus::Timeout
    } else if has_errors || summary.errors.is_some_and(|e| e > 0) || summary.time_outs > 0 {
        if diagnostics.is_empty() {
            VerifierStatus::CrashOrUnusable
        } else {
            VerifierStatus::Failed
        }
    } else if exit == Some(0) || summary.errors == Some(0) {
        VerifierStatus::Verified
    } else if !diagnostics.is_empty() {
        VerifierStatus::Failed
    } else {
        VerifierStatus::CrashOrUnusable
    };
    VerifierReport { status, diagnostics, wall_time_seconds: elapsed.as_secs_f64(), raw_output: raw }
}

impl Verifier for DafnyCli {
    fn name(&self) -> &str {
        "dafny"
    }

    fn verify(&self, program: &str, timeout_seconds: u64) -> Result<VerifierReport, VerifierError> {
        self.run(program, |f| self.verify_args(f, timeout_seconds), Duration::from_secs(timeout_seconds))
    }

    fn resolve(&self, program: &str) -> Result<VerifierReport, VerifierError> {
        self.run(program, |f| self.resolve_args(f), Duration::from_secs(60))
    }

    fn command_line(&self, timeout_seconds: u64) -> Option<Vec<String>> {
        let mut v = vec![self.executable.display().to_string()];
        v.extend(self.verify_args(Path::new("<program>.dfy"), timeout_seconds));
        Some(v)
    }
}
