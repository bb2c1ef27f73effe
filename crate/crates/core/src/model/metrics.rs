use serde::{Deserialize, Serialize};

use super::ModelError;

/// Share of tasks solved, kept as exact counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuccessRate {
    pub successes: u32,
    pub tasks: u32,
}

impl SuccessRate {
    pub fn fraction(&self) -> f64 {
        f64::from(self.successes) / f64::from(self.tasks)
    }

    pub fn percent(&self) -> f64 {
        100.0 * self.fraction()
    }

    /// Percentage text: exact when it has at most one decimal (87.5%),
    /// otherwise truncated to a whole percent (19/22 -> 86%, 4/13 -> 30%).
    pub fn label(&self) -> String {
        let num = u64::from(self.successes) * 1000;
        let den = u64::from(self.tasks);
        if num % den == 0 {
            let tenths = num / den;
            if tenths % 10 == 0 {
                format!("{}%", tenths / 10)
            } else {
                format!("{}.{}%", tenths / 10, tenths % 10)
            }
        } else {
            format!("{}%", u64::from(self.successes) * 100 / den)
        }
    }
}

impl std::fmt::Display for SuccessRate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({}/{})", self.label(), self.successes, self.tasks)
    }
}

/// verify@k over per-task outcomes, each already reduced to "any of its runs succeeded".
pub fn verify_at_k(outcomes: &[bool]) -> Result<SuccessRate, ModelError> {
    if outcomes.is_empty() {
        return Err(ModelError::UndefinedRate);
    }
    Ok(SuccessRate { successes: outcomes.iter().filter(|s| **s).count() as u32, tasks: outcomes.len() as u32 })
}

/// Reduces per-task run lists to task outcomes using the first `k` runs.
pub fn verify_at_k_from_runs(runs: &[Vec<bool>], k: usize) -> Result<SuccessRate, ModelError> {
    let outcomes: Vec<bool> = runs.iter().map(|r| r.iter().take(k).any(|s| *s)).collect();
    verify_at_k(&outcomes)
}
