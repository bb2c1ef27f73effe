use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use super::BenchError;
use crate::engine::VirtualClock;
use crate::llm::{CassetteBackend, LiveBackend, LlmBackend};
use crate::model::{RunConfig, VerifierReport};
use crate::verifier::{DafnyCli, ScriptedVerifier, Verifier, VerifierError};

/// Where model answers come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    Live,
    Record,
    #[default]
    Replay,
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(Mode::Live),
            "record" => Ok(Mode::Record),
            "replay" => Ok(Mode::Replay),
            other => Err(format!("unknown mode `{other}` (expected live, record or replay)")),
        }
    }
}

impl Mode {
    /// Builds the model backend. Replay without a cassette yields an empty
    /// one, so runs that need no model call still work.
    pub fn backend(self, cassette: Option<&Path>) -> Result<Box<dyn LlmBackend>, BenchError> {
        let env = |e: crate::llm::LlmError| BenchError::Environment(e.to_string());
        match (self, cassette) {
            (Mode::Live, _) => Ok(Box::new(LiveBackend::from_env().map_err(env)?)),
            (Mode::Record, Some(path)) => {
                let live = LiveBackend::from_env().map_err(env)?;
                Ok(Box::new(CassetteBackend::record(path, Box::new(live)).map_err(env)?))
            }
            (Mode::Record, None) => Err(BenchError::Usage("--mode record needs --cassette".into())),
            (Mode::Replay, Some(path)) => {
                if !path.is_file() {
                    return Err(BenchError::Usage(format!("cassette {} does not exist", path.display())));
                }
                Ok(Box::new(
                    CassetteBackend::replay(path).map_err(|e| BenchError::Usage(format!("{}: {e}", path.display())))?,
                ))
            }
            (Mode::Replay, None) => Ok(Box::new(CassetteBackend::replay_entries(Vec::new()))),
        }
    }
}

/// Which verifier answers.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum VerifierChoice {
    /// The Dafny executable from `PF_DAFNY_PATH` or `PATH`.
    #[default]
    Dafny,
    /// A recorded verdict table.
    Script(PathBuf),
}

impl VerifierChoice {
    pub fn build(&self) -> Result<Box<dyn Verifier>, BenchError> {
        match self {
            VerifierChoice::Dafny => {
                Ok(Box::new(DafnyCli::from_env().map_err(|e| BenchError::Environment(e.to_string()))?))
            }
            VerifierChoice::Script(path) => Ok(Box::new(
                ScriptedVerifier::from_file(path).map_err(|e| BenchError::Usage(format!("{}: {e}", path.display())))?,
            )),
        }
    }
}

/// Reads a TOML file of run settings; absent fields keep their defaults.
pub fn load_config(path: Option<&Path>) -> Result<RunConfig, BenchError> {
    let config = match path {
        None => RunConfig::default(),
        Some(p) => {
            let text = super::read_file(p)?;
            toml::from_str(&text).map_err(|e| BenchError::Usage(format!("{}: {e}", p.display())))?
        }
    };
    config.validate().map_err(|e| BenchError::Usage(e.to_string()))?;
    Ok(config)
}

/// Charges each verifier run's reported duration to a virtual clock, so
/// replayed runs produce the same timings every time.
pub struct ClockedVerifier<V> {
    inner: V,
    clock: Arc<VirtualClock>,
}

impl<V: Verifier> ClockedVerifier<V> {
    pub fn new(inner: V, clock: Arc<VirtualClock>) -> Self {
        ClockedVerifier { inner, clock }
    }
}

impl<V: Verifier> Verifier for ClockedVerifier<V> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn verify(&self, program: &str, timeout_seconds: u64) -> Result<VerifierReport, VerifierError> {
        let report = self.inner.verify(program, timeout_seconds)?;
        self.clock.advance_ms((report.wall_time_seconds * 1000.0).round() as u64);
        Ok(report)
    }

    fn resolve(&self, program: &str) -> Result<VerifierReport, VerifierError> {
        self.inner.resolve(program)
    }

    fn command_line(&self, timeout_seconds: u64) -> Option<Vec<String>> {
        self.inner.command_line(timeout_seconds)
    }
}
