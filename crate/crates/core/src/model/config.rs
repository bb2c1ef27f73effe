use serde::{Deserialize, Serialize};

use super::ModelError;

/// A sampling temperature, held in thousandths so that schedules built by
/// repeated subtraction stay exact (0.5 - 0.3 is 0.2, not 0.19999...).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Temperature(u32);

impl Temperature {
    pub const ZERO: Temperature = Temperature(0);

    pub fn from_millis(millis: u32) -> Self {
        Temperature(millis)
    }

    /// Rounds to the nearest thousandth; negative values clamp to zero.
    pub fn from_f64(value: f64) -> Self {
        if !value.is_finite() || value <= 0.0 {
            return Temperature(0);
        }
        Temperature((value * 1000.0).round() as u32)
    }

    pub fn millis(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0) / 1000.0
    }

    pub fn saturating_sub(self, other: Temperature) -> Temperature {
        Temperature(self.0.saturating_sub(other.0))
    }
}

impl std::fmt::Display for Temperature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}.{:03}", self.0 / 1000, self.0 % 1000)
    }
}

impl Serialize for Temperature {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Temperature {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        Ok(Temperature::from_f64(v))
    }
}

/// Search and budget knobs for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Per-node LLM calls (candidate generations and repairs) allowed in one visit.
    pub max_generation_attempts_t: u32,
    /// Visits a node gets before its parent has to roll back.
    pub retry_budget_s: u32,
    pub temperature_step: Temperature,
    pub initial_temperature: Temperature,
    pub max_tokens: u32,
    pub verifier_timeout_seconds: u64,
    pub global_timeout_seconds: u64,
    pub verify_at_k: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            max_generation_attempts_t: 10,
            retry_budget_s: 2,
            temperature_step: Temperature::from_millis(300),
            initial_temperature: Temperature::from_millis(500),
            max_tokens: 4028,
            verifier_timeout_seconds: 20,
            global_timeout_seconds: 500,
            verify_at_k: 5,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let ints = [
            ("max_generation_attempts_t", u64::from(self.max_generation_attempts_t)),
            ("retry_budget_s", u64::from(self.retry_budget_s)),
            ("max_tokens", u64::from(self.max_tokens)),
            ("verifier_timeout_seconds", self.verifier_timeout_seconds),
            ("global_timeout_seconds", self.global_timeout_seconds),
            ("verify_at_k", u64::from(self.verify_at_k)),
        ];
        for (name, value) in ints {
            if value == 0 {
                return Err(ModelError::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        for (name, t) in [
            ("temperature_step", self.temperature_step),
            ("initial_temperature", self.initial_temperature),
        ] {
            if t.millis() > 1000 {
                return Err(ModelError::InvalidConfig(format!("{name} must lie in [0, 1]")));
            }
        }
        Ok(())
    }

    /// All temperatures a node can be visited at, in visit order.
    pub fn schedule(&self) -> Vec<Temperature> {
        (0..self.retry_budget_s)
            .map(|i| temperature_schedule(self, i).expect("index within budget"))
            .collect()
    }
}

/// Temperature for the `retry_index`-th visit of a node (0-based).
pub fn temperature_schedule(config: &RunConfig, retry_index: u32) -> Result<Temperature, ModelError> {
    if retry_index >= config.retry_budget_s {
        return Err(ModelError::OutOfBudget { retry_index, budget: config.retry_budget_s });
    }
    let drop = Temperature::from_millis(config.temperature_step.millis().saturating_mul(retry_index));
    Ok(config.initial_temperature.saturating_sub(drop))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(t0: f64, step: f64, s: u32) -> RunConfig {
        RunConfig {
            initial_temperature: Temperature::from_f64(t0),
            temperature_step: Temperature::from_f64(step),
            retry_budget_s: s,
            ..RunConfig::default()
        }
    }

    #[test]
    fn default_schedule_is_half_then_two_tenths() {
        let c = RunConfig::default();
        assert_eq!(temperature_schedule(&c, 0).unwrap().as_f64(), 0.5);
        assert_eq!(temperature_schedule(&c, 1).unwrap().as_f64(), 0.2);
        assert!(matches!(temperature_schedule(&c, 2), Err(ModelError::OutOfBudget { .. })));
    }

    #[test]
    fn schedule_clamps_at_zero() {
        assert_eq!(temperature_schedule(&cfg(0.5, 0.5, 2), 1).unwrap(), Temperature::ZERO);
        // hand table: 0.5, 0.5-0.3=0.2, max(0, 0.5-0.6)=0
        let c = cfg(0.5, 0.3, 3);
        let got: Vec<f64> = c.schedule().iter().map(|t| t.as_f64()).collect();
        assert_eq!(got, vec![0.5, 0.2, 0.0]);
    }

    #[test]
    fn validate_rejects_zero_budgets_and_large_fractions() {
        let mut c = RunConfig::default();
        assert!(c.validate().is_ok());
        c.retry_budget_s = 0;
        assert!(c.validate().is_err());
        let c = RunConfig { initial_temperature: Temperature::from_f64(1.5), ..RunConfig::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_parses_partial_toml_with_defaults() {
        let c: RunConfig = toml::from_str("global_timeout_seconds = 1500\ntemperature_step = 0.25").unwrap();
        assert_eq!(c.global_timeout_seconds, 1500);
        assert_eq!(c.temperature_step.millis(), 250);
        assert_eq!(c.max_tokens, 4028);
    }
}
