use crate::error::{ensure, Result};

/// Channel and target parameters shared by the experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Overt packet rate λ (packets/s).
    pub lambda: f64,
    /// Queue service rate μ (packets/s).
    pub mu: f64,
    /// Observation horizon T (s).
    pub horizon: f64,
    /// Covertness ε.
    pub epsilon: f64,
    /// Failure-probability target ζ.
    pub zeta: f64,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        ensure(
            self.lambda > 0.0 && self.lambda.is_finite(),
            "lambda",
            || format!("must be positive, got {}", self.lambda),
        )?;
        ensure(self.horizon > 0.0 && self.horizon.is_finite(), "T", || {
            format!("must be positive, got {}", self.horizon)
        })?;
        ensure(self.epsilon > 0.0 && self.epsilon < 1.0, "epsilon", || {
            format!("must lie in (0, 1), got {}", self.epsilon)
        })?;
        ensure(self.zeta > 0.0 && self.zeta < 1.0, "zeta", || {
            format!("must lie in (0, 1), got {}", self.zeta)
        })
    }

    /// Validation for the queue scenarios, which also need `mu > lambda`.
    pub fn validate_timing(&self) -> Result<()> {
        self.validate()?;
        ensure(self.mu.is_finite() && self.mu > self.lambda, "mu", || {
            format!("must exceed lambda = {}, got {}", self.lambda, self.mu)
        })
    }
}
