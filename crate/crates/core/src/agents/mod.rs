//! Simulated participants: Sender attention, Receiver phosphene perception and
//! threshold calibration, and the Receiver's trust-learning decision rule.

mod pest;
mod phosphene;
mod policy;
mod trust;

use thiserror::Error;

pub use pest::{
    derive_stim_levels, pest_calibrate, PestConfig, PestResult, PestTrial, StimLevels,
    StimSearchConfig,
};
pub use phosphene::{perceive, PhospheneModel};
pub use policy::{receiver_decide, sender_decide, ReceiverPolicy, ReceiverStrategy, SenderPolicy};
pub use trust::{update_trust, TrustState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("PEST did not converge after {trials} trials (last level {partial_estimate:.3})")]
    Calibration { partial_estimate: f64, trials: usize },
    #[error("stimulation level search left [0, 1] at {last_level:.3}")]
    StimSearch { last_level: f64 },
    #[error("role error: {0}")]
    Role(&'static str),
}

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReceiverParams {
    pub phosphene: PhospheneModel,
    pub pest: PestConfig,
    pub stim_search: StimSearchConfig,
    pub strategy: ReceiverStrategy,
    pub trust_prior_successes: f64,
    pub trust_prior_failures: f64,
}

impl Default for ReceiverParams {
    fn default() -> Self {
        Self {
            phosphene: PhospheneModel::default(),
            pest: PestConfig::default(),
            stim_search: StimSearchConfig::default(),
            strategy: ReceiverStrategy::default(),
            trust_prior_successes: 1.0,
            trust_prior_failures: 1.0,
        }
    }
}

/// Parameters of every simulated participant in a triad.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentParams {
    pub sender: SenderPolicy,
    pub receiver: ReceiverParams,
}

impl AgentParams {
    pub fn validate(&self) -> Result<(), AgentError> {
        self.sender.validate()?;
        self.receiver.phosphene.validate()?;
        if !(self.receiver.trust_prior_successes > 0.0 && self.receiver.trust_prior_failures > 0.0) {
            return Err(AgentError::Config("trust prior counts must be positive".into()));
        }
        Ok(())
    }
}
