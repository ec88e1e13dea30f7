//! Binary decision rules turning a classifier probability into a fixed/free
//! label. The deterministic rule is a strict cut at `t`; the stochastic rule
//! adds a tolerance band around `t` inside which edges are accepted with a
//! configured probability, for robustness near the boundary under class
//! imbalance.

use rand::Rng;
use serde::{Deserialize, Serialize};

pub const DEFAULT_EPSILON: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ThresholdRule {
    /// Label 1 iff `prob > t` (strict).
    Deterministic { t: f64 },
    /// Label 1 iff `prob > t + epsilon`, or `|prob - t| < epsilon` and a
    /// fresh uniform draw falls below `p`.
    Stochastic { t: f64, epsilon: f64, p: f64 },
}

impl ThresholdRule {
    pub fn deterministic(t: f64) -> Self {
        assert!(t > 0.0 && t < 1.0, "threshold must lie in (0,1)");
        ThresholdRule::Deterministic { t }
    }

    pub fn stochastic(t: f64, p: f64) -> Self {
        Self::stochastic_with_epsilon(t, p, DEFAULT_EPSILON)
    }

    pub fn stochastic_with_epsilon(t: f64, p: f64, epsilon: f64) -> Self {
        assert!(t > 0.0 && t < 1.0, "threshold must lie in (0,1)");
        assert!(epsilon > 0.0, "epsilon must be positive");
        assert!((0.0..=1.0).contains(&p), "acceptance probability must lie in [0,1]");
        ThresholdRule::Stochastic { t, epsilon, p }
    }

    pub fn threshold(&self) -> f64 {
        match *self {
            ThresholdRule::Deterministic { t } => t,
            ThresholdRule::Stochastic { t, .. } => t,
        }
    }
}

/// Applies the rule to a probability, returning the binary label.
pub fn apply_threshold<R: Rng>(prob: f64, rule: &ThresholdRule, rng: &mut R) -> u8 {
    debug_assert!((0.0..=1.0).contains(&prob), "probability out of range: {prob}");
    match *rule {
        ThresholdRule::Deterministic { t } => u8::from(prob > t),
        ThresholdRule::Stochastic { t, epsilon, p } => {
            if prob > t + epsilon {
                1
            } else if (prob - t).abs() < epsilon {
                u8::from(rng.gen::<f64>() < p)
            } else {
                0
            }
        }
    }
}
