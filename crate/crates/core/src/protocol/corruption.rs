use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ProtocolError;
use crate::game::Decision;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BadSender {
    Sender1,
    Sender2,
    #[default]
    Random,
}

/// Which sender is forced wrong, and in which trials (both rounds of each).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionPlan {
    pub victim: u8,
    pub corrupted_trials: BTreeSet<usize>,
}

impl CorruptionPlan {
    pub fn is_corrupted(&self, sender_id: u8, trial_index: usize) -> bool {
        sender_id == self.victim && self.corrupted_trials.contains(&trial_index)
    }
}

pub fn plan_corruption<R: Rng + ?Sized>(
    bad_sender: BadSender,
    corruption_count: usize,
    n_trials: usize,
    rng: &mut R,
) -> Result<CorruptionPlan, ProtocolError> {
    if corruption_count > n_trials {
        return Err(ProtocolError::Config(format!(
            "corruption count {corruption_count} exceeds {n_trials} trials"
        )));
    }
    // draw the victim even when forced so the trial draw does not depend on the setting
    let drawn = rng.random_range(1..=2u8);
    let victim = match bad_sender {
        BadSender::Sender1 => 1,
        BadSender::Sender2 => 2,
        BadSender::Random => drawn,
    };
    let corrupted_trials = rand::seq::index::sample(rng, n_trials, corruption_count)
        .into_iter()
        .collect();
    Ok(CorruptionPlan {
        victim,
        corrupted_trials,
    })
}

/// Decision conveyed to the Receiver: forced to the wrong answer for the
/// victim's planned trials, otherwise passed through.
pub fn corrupt(
    decision: Decision,
    trial_index: usize,
    plan: &CorruptionPlan,
    sender_id: u8,
    correct: Decision,
) -> Decision {
    if plan.is_corrupted(sender_id, trial_index) {
        correct.flipped()
    } else {
        decision
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn default_plan_has_ten_distinct_trials() {
        for seed in 0..50 {
            let p = plan_corruption(BadSender::Random, 10, 16, &mut rng_from_seed(seed)).unwrap();
            assert_eq!(p.corrupted_trials.len(), 10);
            assert!(p.corrupted_trials.iter().all(|&t| t < 16));
            assert!(p.victim == 1 || p.victim == 2);
        }
    }

    #[test]
    fn forced_victim_and_determinism() {
        let p = plan_corruption(BadSender::Sender1, 10, 16, &mut rng_from_seed(4)).unwrap();
        assert_eq!(p.victim, 1);
        let q = plan_corruption(BadSender::Sender1, 10, 16, &mut rng_from_seed(4)).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn random_victim_is_roughly_uniform() {
        let ones = (0..1000)
            .filter(|&s| {
                plan_corruption(BadSender::Random, 10, 16, &mut rng_from_seed(s))
                    .unwrap()
                    .victim
                    == 1
            })
            .count();
        assert!((430..570).contains(&ones), "{ones}");
    }

    #[test]
    fn too_many_corruptions() {
        assert!(plan_corruption(BadSender::Random, 17, 16, &mut rng_from_seed(1)).is_err());
    }

    #[test]
    fn corrupt_flips_relative_to_correct_action() {
        let plan = CorruptionPlan {
            victim: 2,
            corrupted_trials: [3].into_iter().collect(),
        };
        use Decision::*;
        assert_eq!(corrupt(Rotate, 3, &plan, 2, Rotate), NoRotate);
        // an erring sender may already be wrong; still forced wrong
        assert_eq!(corrupt(NoRotate, 3, &plan, 2, Rotate), NoRotate);
        assert_eq!(corrupt(Rotate, 3, &plan, 1, Rotate), Rotate);
        assert_eq!(corrupt(Rotate, 4, &plan, 2, Rotate), Rotate);
    }
}
