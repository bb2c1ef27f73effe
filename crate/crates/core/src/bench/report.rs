use serde::{Deserialize, Serialize};

use super::Expected;
use crate::model::{verify_at_k, SuccessRate};

/// Outcome of one benchmark task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<Expected>,
    pub verified: bool,
    /// Attempts run; on success the last one is the successful attempt.
    pub attempts: u32,
    pub wall_time_seconds: f64,
    /// Lemmas in the final program that the task did not have.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lemma_count: Option<usize>,
    pub llm_calls: u64,
    pub verifier_runs: u64,
    /// Whether the proof ended up on the original code shape.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restored: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Per-task records and the aggregate verify@k figures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub k: u32,
    pub tasks: Vec<TaskRecord>,
    pub successes: usize,
    pub total: usize,
    pub verify_at_k: SuccessRate,
    /// `"86% (19/22)"`-style rendering of the rate.
    pub rate: String,
    pub mean_success_time_seconds: Option<f64>,
    pub mean_lemmas_per_success: Option<f64>,
}

impl BenchReport {
    pub fn new(k: u32, tasks: Vec<TaskRecord>) -> Result<Self, crate::model::ModelError> {
        let outcomes: Vec<bool> = tasks.iter().map(|t| t.verified).collect();
        let rate = verify_at_k(&outcomes)?;
        let wins: Vec<&TaskRecord> = tasks.iter().filter(|t| t.verified).collect();
        let mean = |xs: Vec<f64>| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
        Ok(BenchReport {
            k,
            successes: wins.len(),
            total: tasks.len(),
            verify_at_k: rate,
            rate: rate.to_string(),
            mean_success_time_seconds: mean(wins.iter().map(|t| t.wall_time_seconds).collect()),
            mean_lemmas_per_success: mean(wins.iter().filter_map(|t| t.lemma_count).map(|n| n as f64).collect()),
            tasks,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, verified: bool, lemmas: usize) -> TaskRecord {
        TaskRecord {
            id: id.into(),
            expected: None,
            verified,
            attempts: 1,
            wall_time_seconds: 10.0,
            lemma_count: verified.then_some(lemmas),
            llm_calls: 3,
            verifier_runs: 2,
            restored: None,
            error: None,
        }
    }

    #[test]
    fn aggregates_only_successes() {
        let mut tasks: Vec<TaskRecord> = (0..19).map(|i| record(&format!("t{i}"), true, 3)).collect();
        tasks.extend((19..22).map(|i| record(&format!("t{i}"), false, 0)));
        let r = BenchReport::new(5, tasks).unwrap();
        assert_eq!(r.rate, "86% (19/22)");
        assert_eq!(r.mean_lemmas_per_success, Some(3.0));
        assert_eq!(r.mean_success_time_seconds, Some(10.0));
    }
}
