use serde::{Deserialize, Serialize};

use super::{DiagnosticKind, NodeId, Temperature, VerifierStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallPurpose {
    /// Yes/no verifiability question; does not consume the generation budget.
    Gate,
    Generation,
    Repair,
    Decomposition,
    Restoration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairKind {
    AssertionSubLemma,
    AssertionRemoved,
    InvariantSubLemma,
    InvariantRemoved,
    CalleeContractStrengthened,
    LemmaReused,
    LemmaDroppedAsUseless,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalStatus {
    Verified,
    Failed,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    AttemptStarted {
        attempt: u32,
    },
    DecompositionProposed {
        method: String,
        accepted: bool,
        reason: Option<String>,
    },
    NodeCreated {
        node: NodeId,
        parent: Option<NodeId>,
        name: String,
    },
    VisitStarted {
        node: NodeId,
        retry_index: u32,
        temperature: Temperature,
    },
    LlmCall {
        node: Option<NodeId>,
        template_id: String,
        purpose: CallPurpose,
        temperature: Temperature,
        digest: String,
        truncated: bool,
    },
    TransportRetry {
        template_id: String,
        retries: u32,
    },
    CassetteOverwrite {
        digest: String,
    },
    VerifierRun {
        node: Option<NodeId>,
        status: VerifierStatus,
        wall_time_seconds: f64,
        program_digest: String,
        first_error: Option<DiagnosticKind>,
    },
    RepairApplied {
        node: NodeId,
        kind: RepairKind,
        line: Option<u32>,
        lemma: Option<String>,
    },
    VisitFailed {
        node: NodeId,
        reason: String,
    },
    NodeVerified {
        node: NodeId,
        pending_children: usize,
    },
    NodeExhausted {
        node: NodeId,
    },
    Rollback {
        from: NodeId,
        to: NodeId,
        temperature: Temperature,
    },
    GlobalTimeout,
    Restored {
        complete: bool,
    },
    FinalResult {
        status: FinalStatus,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedEvent {
    pub seq: u64,
    /// Elapsed run time when the event was logged.
    pub at_ms: u64,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub llm_calls: u64,
    pub generation_calls: u64,
    pub verifier_runs: u64,
    pub wall_time_ms: u64,
}

/// Ordered event log of one end-to-end attempt.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTranscript {
    pub task_id: String,
    pub verifier_command: Option<Vec<String>>,
    pub events: Vec<TimedEvent>,
    pub totals: Totals,
}

impl RunTranscript {
    pub fn new(task_id: impl Into<String>) -> Self {
        RunTranscript { task_id: task_id.into(), ..Default::default() }
    }

    pub fn push(&mut self, at_ms: u64, event: Event) {
        match &event {
            Event::LlmCall { purpose, .. } => {
                self.totals.llm_calls += 1;
                if *purpose != CallPurpose::Gate {
                    self.totals.generation_calls += 1;
                }
            }
            Event::VerifierRun { .. } => self.totals.verifier_runs += 1,
            _ => {}
        }
        self.totals.wall_time_ms = self.totals.wall_time_ms.max(at_ms);
        let seq = self.events.len() as u64;
        self.events.push(TimedEvent { seq, at_ms, event });
    }

    pub fn final_status(&self) -> Option<FinalStatus> {
        match self.events.last().map(|e| &e.event) {
            Some(Event::FinalResult { status }) => Some(*status),
            _ => None,
        }
    }

    /// Sequence numbers strictly increase and exactly one `FinalResult` closes the log.
    pub fn check_well_formed(&self) -> Result<(), String> {
        for w in self.events.windows(2) {
            if w[1].seq <= w[0].seq {
                return Err(format!("sequence numbers not increasing at {}", w[1].seq));
            }
        }
        let finals = self.events.iter().filter(|e| matches!(e.event, Event::FinalResult { .. })).count();
        if finals != 1 {
            return Err(format!("expected exactly one FinalResult, found {finals}"));
        }
        if self.final_status().is_none() {
            return Err("FinalResult is not the last event".into());
        }
        Ok(())
    }

    pub fn events(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().map(|e| &e.event)
    }
}
