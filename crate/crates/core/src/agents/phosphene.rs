use rand::Rng;
use serde::{Deserialize, Serialize};

use super::AgentError;

/// Psychometric model of phosphene perception for one Receiver.
///
/// `P(seen | x) = lapse + (1 − 2·lapse) · F(x)` where `F` is a logistic in
/// `slope · (x − threshold)`, or a hard step when `psychometric_slope` is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhospheneModel {
    /// Intensity as a fraction of maximum stimulator output.
    pub true_threshold: f64,
    pub psychometric_slope: Option<f64>,
    pub lapse_rate: f64,
}

impl Default for PhospheneModel {
    fn default() -> Self {
        Self {
            true_threshold: 0.6,
            psychometric_slope: Some(20.0),
            lapse_rate: 0.02,
        }
    }
}

impl PhospheneModel {
    pub fn step(threshold: f64) -> Self {
        Self {
            true_threshold: threshold,
            psychometric_slope: None,
            lapse_rate: 0.0,
        }
    }

    pub fn logistic(threshold: f64, slope: f64) -> Self {
        Self {
            true_threshold: threshold,
            psychometric_slope: Some(slope),
            lapse_rate: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if !(0.0..=1.0).contains(&self.true_threshold) {
            return Err(AgentError::Config(format!(
                "threshold {} outside [0, 1]",
                self.true_threshold
            )));
        }
        if !(0.0..0.5).contains(&self.lapse_rate) {
            return Err(AgentError::Config(format!(
                "lapse rate {} outside [0, 0.5)",
                self.lapse_rate
            )));
        }
        if let Some(s) = self.psychometric_slope {
            if !(s > 0.0 && s.is_finite()) {
                return Err(AgentError::Config(format!("slope {s} must be positive")));
            }
        }
        Ok(())
    }

    pub fn probability(&self, intensity: f64) -> f64 {
        let d = intensity - self.true_threshold;
        let core = match self.psychometric_slope {
            None if d > 0.0 => 1.0,
            None if d < 0.0 => 0.0,
            None => 0.5,
            Some(s) => 1.0 / (1.0 + (-s * d).exp()),
        };
        self.lapse_rate + (1.0 - 2.0 * self.lapse_rate) * core
    }
}

/// One stimulation pulse; true when a phosphene is perceived.
pub fn perceive<R: Rng + ?Sized>(intensity: f64, model: &PhospheneModel, rng: &mut R) -> bool {
    rng.random::<f64>() < model.probability(intensity)
}
