use rand::Rng;
use serde::{Deserialize, Serialize};

use super::trust::TrustState;
use super::AgentError;
use crate::game::{Role, ViewModel};
use crate::signal::Ssvep;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SenderPolicy {
    /// Probability of attending the wrong LED, in [0, 0.5].
    pub attention_error_rate: f64,
}

impl Default for SenderPolicy {
    fn default() -> Self {
        Self {
            attention_error_rate: 0.05,
        }
    }
}

impl SenderPolicy {
    pub fn validate(&self) -> Result<(), AgentError> {
        if !(0.0..=0.5).contains(&self.attention_error_rate) {
            return Err(AgentError::Config(format!(
                "attention error rate {} outside [0, 0.5]",
                self.attention_error_rate
            )));
        }
        Ok(())
    }
}

/// LED a Sender attends given its view of the game.
pub fn sender_decide<R: Rng + ?Sized>(
    view: &ViewModel,
    policy: &SenderPolicy,
    rng: &mut R,
) -> Result<Ssvep, AgentError> {
    if view.role != Role::Sender || view.gap.is_none() {
        return Err(AgentError::Role("sender policy needs a view that includes the gap line"));
    }
    let correct = view
        .correct_action()
        .ok_or(AgentError::Role("view does not determine a unique correct action"))?;
    let target = Ssvep::for_decision(correct);
    let slip = rng.random::<f64>() < policy.attention_error_rate;
    Ok(if slip { target.other() } else { target })
}

/// How a Receiver turns the phosphene percepts of one round into an attended LED.
pub trait ReceiverPolicy {
    fn decide<R: Rng + ?Sized>(&self, phosphenes: &[bool], trust: &TrustState, rng: &mut R) -> Ssvep;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ReceiverStrategy {
    /// Follow the sender with the highest reliability estimate; lowest index wins ties.
    FollowMostTrusted,
    /// Always follow one sender (0-based index), ignoring the rest.
    AlwaysFollow { sender: usize },
    /// Agreement is followed; conflicts are settled by a coin flip.
    CoinFlipOnConflict,
}

impl Default for ReceiverStrategy {
    fn default() -> Self {
        ReceiverStrategy::FollowMostTrusted
    }
}

fn to_target(seen: bool) -> Ssvep {
    if seen {
        Ssvep::F17
    } else {
        Ssvep::F15
    }
}

impl ReceiverPolicy for ReceiverStrategy {
    fn decide<R: Rng + ?Sized>(&self, phosphenes: &[bool], trust: &TrustState, rng: &mut R) -> Ssvep {
        if let Some(&first) = phosphenes.first() {
            if phosphenes.iter().all(|&p| p == first) {
                return to_target(first);
            }
        }
        match *self {
            ReceiverStrategy::FollowMostTrusted => {
                let mut best = 0;
                for i in 1..phosphenes.len() {
                    if trust.estimate(i) > trust.estimate(best) {
                        best = i;
                    }
                }
                to_target(phosphenes[best])
            }
            ReceiverStrategy::AlwaysFollow { sender } => {
                to_target(phosphenes.get(sender).copied().unwrap_or(false))
            }
            ReceiverStrategy::CoinFlipOnConflict => to_target(rng.random::<bool>()),
        }
    }
}

/// Default Receiver rule for two senders.
pub fn receiver_decide(phosphenes: (bool, bool), trust: &TrustState) -> Ssvep {
    // FollowMostTrusted never consumes randomness
    let mut unused = crate::rng::rng_from_seed(0);
    ReceiverStrategy::FollowMostTrusted.decide(&[phosphenes.0, phosphenes.1], trust, &mut unused)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{render_view, TrialState, SHAPE_CATALOG};
    use crate::rng::rng_from_seed;

    fn trust_counts(s: [u32; 2], f: [u32; 2]) -> TrustState {
        let mut t = TrustState::new(2);
        t.successes = s.to_vec();
        t.failures = f.to_vec();
        t
    }

    #[test]
    fn agreement_is_followed() {
        let t = TrustState::new(2);
        assert_eq!(receiver_decide((true, true), &t), Ssvep::F17);
        assert_eq!(receiver_decide((false, false), &t), Ssvep::F15);
    }

    #[test]
    fn conflict_follows_higher_trust() {
        let t = trust_counts([8, 1], [0, 2]);
        assert!((t.estimate(0) - 0.9).abs() < 1e-12);
        assert!((t.estimate(1) - 0.4).abs() < 1e-12);
        assert_eq!(receiver_decide((true, false), &t), Ssvep::F17);
        assert_eq!(receiver_decide((false, true), &t), Ssvep::F15);
        let t = trust_counts([1, 8], [2, 0]);
        assert_eq!(receiver_decide((true, false), &t), Ssvep::F15);
    }

    #[test]
    fn tie_goes_to_sender_one() {
        let t = TrustState::new(2);
        assert_eq!(receiver_decide((true, false), &t), Ssvep::F17);
        assert_eq!(receiver_decide((false, true), &t), Ssvep::F15);
    }

    #[test]
    fn baselines() {
        let t = trust_counts([0, 9], [9, 0]);
        let mut rng = rng_from_seed(1);
        let s = ReceiverStrategy::AlwaysFollow { sender: 0 };
        assert_eq!(s.decide(&[true, false], &t, &mut rng), Ssvep::F17);
        let flips: usize = (0..1000)
            .filter(|_| {
                ReceiverStrategy::CoinFlipOnConflict.decide(&[true, false], &t, &mut rng) == Ssvep::F17
            })
            .count();
        assert!((400..600).contains(&flips));
    }

    #[test]
    fn sender_without_errors_attends_correct_led() {
        let s = TrialState::new(0, SHAPE_CATALOG[1], 0, true);
        let v = render_view(&s, Role::Sender);
        let p = SenderPolicy {
            attention_error_rate: 0.0,
        };
        assert_eq!(sender_decide(&v, &p, &mut rng_from_seed(1)).unwrap(), Ssvep::F17);
    }

    #[test]
    fn receiver_view_is_rejected() {
        let s = TrialState::new(0, SHAPE_CATALOG[1], 0, true);
        let v = render_view(&s, Role::Receiver);
        assert!(matches!(
            sender_decide(&v, &SenderPolicy::default(), &mut rng_from_seed(1)),
            Err(AgentError::Role(_))
        ));
    }
}
