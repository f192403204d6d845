//! Parameter Estimation by Sequential Testing, plus the ±5% search for the
//! stimulation levels used to signal "rotate" and "do not rotate".
//!
//! Step rules (Taylor & Creelman):
//! 1. every reversal halves the step;
//! 2. the second step in a direction keeps the size of the first;
//! 3. the fourth and later steps in a direction double;
//! 4. the third step doubles unless the step just before the last reversal was itself doubled.
//!
//! The level changes only when a Wald sequential test decides the detection
//! count at the current level departs from the target rate by more than the bound.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::phosphene::{perceive, PhospheneModel};
use super::AgentError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PestConfig {
    pub start_level: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub target_rate: f64,
    pub wald_bound: f64,
    pub max_trials: usize,
}

impl Default for PestConfig {
    fn default() -> Self {
        Self {
            start_level: 0.5,
            initial_step: 0.08,
            min_step: 0.01,
            max_step: 0.32,
            target_rate: 0.5,
            wald_bound: 1.0,
            max_trials: 5000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PestTrial {
    pub level: f64,
    pub seen: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PestResult {
    pub threshold: f64,
    pub trajectory: Vec<PestTrial>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dir {
    Up,
    Down,
}

impl Dir {
    fn sign(self) -> f64 {
        match self {
            Dir::Up => 1.0,
            Dir::Down => -1.0,
        }
    }
}

pub fn pest_calibrate<R: Rng + ?Sized>(
    model: &PhospheneModel,
    config: &PestConfig,
    rng: &mut R,
) -> Result<PestResult, AgentError> {
    model.validate()?;
    let mut level = config.start_level.clamp(0.0, 1.0);
    let mut step = config.initial_step;
    let mut last_dir: Option<Dir> = None;
    let mut run_len = 0usize;
    let mut last_doubled = false;
    let mut doubled_before_reversal = false;
    let (mut n, mut k) = (0usize, 0usize);
    let mut trajectory = Vec::new();

    for _ in 0..config.max_trials {
        let seen = perceive(level, model, rng);
        trajectory.push(PestTrial { level, seen });
        n += 1;
        k += usize::from(seen);
        let expected = config.target_rate * n as f64;
        let dir = if k as f64 > expected + config.wald_bound {
            Dir::Down
        } else if (k as f64) < expected - config.wald_bound {
            Dir::Up
        } else {
            continue;
        };
        n = 0;
        k = 0;

        match last_dir {
            Some(prev) if prev != dir => {
                step /= 2.0;
                run_len = 1;
                doubled_before_reversal = last_doubled;
                last_doubled = false;
            }
            Some(_) => {
                run_len += 1;
                let double = match run_len {
                    2 => false,
                    3 => !doubled_before_reversal,
                    _ => true,
                };
                if double {
                    step *= 2.0;
                }
                last_doubled = double;
            }
            None => run_len = 1,
        }
        step = step.min(config.max_step);
        if step < config.min_step {
            return Ok(PestResult {
                threshold: (level + dir.sign() * step).clamp(0.0, 1.0),
                trajectory,
            });
        }
        level = (level + dir.sign() * step).clamp(0.0, 1.0);
        last_dir = Some(dir);
    }
    Err(AgentError::Calibration {
        partial_estimate: level,
        trials: trajectory.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StimLevels {
    pub yes_intensity: f64,
    pub no_intensity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StimSearchConfig {
    pub increment: f64,
    pub consecutive: usize,
}

impl Default for StimSearchConfig {
    fn default() -> Self {
        Self {
            increment: 0.05,
            consecutive: 10,
        }
    }
}

/// Steps away from the threshold until a level yields `consecutive` identical
/// percepts in a row: all seen going up, none seen going down.
pub fn derive_stim_levels<R: Rng + ?Sized>(
    threshold: f64,
    model: &PhospheneModel,
    config: &StimSearchConfig,
    rng: &mut R,
) -> Result<StimLevels, AgentError> {
    let search = |sign: f64, want_seen: bool, rng: &mut R| -> Result<f64, AgentError> {
        for i in 1usize.. {
            let level = threshold + sign * config.increment * i as f64;
            if !(-1e-9..=1.0 + 1e-9).contains(&level) {
                return Err(AgentError::StimSearch { last_level: level });
            }
            let level = level.clamp(0.0, 1.0);
            if (0..config.consecutive).all(|_| perceive(level, model, rng) == want_seen) {
                return Ok(level);
            }
        }
        unreachable!()
    };
    let yes_intensity = search(1.0, true, rng)?;
    let no_intensity = search(-1.0, false, rng)?;
    Ok(StimLevels {
        yes_intensity,
        no_intensity,
    })
}
