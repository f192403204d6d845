use serde::{Deserialize, Serialize};

use crate::game::Decision;

/// Beta-Bernoulli evidence about how often each Sender's conveyed decision was right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustState {
    pub prior_successes: f64,
    pub prior_failures: f64,
    pub successes: Vec<u32>,
    pub failures: Vec<u32>,
}

impl TrustState {
    pub fn new(n_senders: usize) -> Self {
        Self::with_prior(n_senders, 1.0, 1.0)
    }

    pub fn with_prior(n_senders: usize, alpha: f64, beta: f64) -> Self {
        Self {
            prior_successes: alpha,
            prior_failures: beta,
            successes: vec![0; n_senders],
            failures: vec![0; n_senders],
        }
    }

    pub fn n_senders(&self) -> usize {
        self.successes.len()
    }

    /// Posterior mean reliability of sender `i`.
    pub fn estimate(&self, i: usize) -> f64 {
        let a = self.prior_successes + f64::from(self.successes[i]);
        let b = self.prior_failures + f64::from(self.failures[i]);
        a / (a + b)
    }

    pub fn estimates(&self) -> Vec<f64> {
        (0..self.n_senders()).map(|i| self.estimate(i)).collect()
    }
}

/// One trial's worth of evidence: a sender scores a success when every decision
/// it conveyed in the trial matched the action revealed as correct for that round.
///
/// `conveyed[i][r]` is sender `i`'s decision in round `r`; `correct[r]` the revealed answer.
pub fn update_trust(trust: &TrustState, conveyed: &[Vec<Decision>], correct: &[Decision]) -> TrustState {
    let mut next = trust.clone();
    for (i, rounds) in conveyed.iter().enumerate().take(trust.n_senders()) {
        let right = rounds.iter().zip(correct).all(|(d, c)| d == c);
        if right {
            next.successes[i] += 1;
        } else {
            next.failures[i] += 1;
        }
    }
    next
}
