//! Synthetic SSVEP EEG and the decoding pipeline that turns ten seconds of
//! occipital signal into a rotate / do-not-rotate decision.
//!
//! Pipeline: 4th-order Butterworth low-pass at 30 Hz → 1-s epochs → Welch PSD
//! → 17 Hz vs 15 Hz vote per epoch → cursor walk → decision.

mod decode;
mod filter;
mod synth;
mod welch;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use decode::{
    classify_epoch, tally_decision, update_cursor, CursorState, EpochVote, SsvepDecoder,
    TallyOutcome, DEFAULT_CURSOR_STEP,
};
pub use filter::{design_filter, Biquad, FilterCoefficients, FilterSpec};
pub use synth::{synthesize_eeg, SsvepParams};
pub use welch::{hann, welch_psd, PowerSpectrum, WelchConfig, WelchEstimator};

pub const SENDER_FS: f64 = 250.0;
pub const RECEIVER_FS: f64 = 500.0;
pub const YES_HZ: f64 = 17.0;
pub const NO_HZ: f64 = 15.0;

/// Sampling and decoding settings for Sender and Receiver pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineParams {
    pub sender_ssvep: SsvepParams,
    pub receiver_ssvep: SsvepParams,
    pub sender_fs: f64,
    pub receiver_fs: f64,
    pub welch: WelchConfig,
    pub cursor_step: f64,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            sender_ssvep: SsvepParams::default(),
            receiver_ssvep: SsvepParams::default(),
            sender_fs: SENDER_FS,
            receiver_fs: RECEIVER_FS,
            welch: WelchConfig::default(),
            cursor_step: DEFAULT_CURSOR_STEP,
        }
    }
}

impl PipelineParams {
    pub fn validate(&self) -> Result<(), SignalError> {
        self.sender_ssvep.validate()?;
        self.receiver_ssvep.validate()?;
        SsvepDecoder::new(self.sender_fs, &self.welch, self.cursor_step)?;
        SsvepDecoder::new(self.receiver_fs, &self.welch, self.cursor_step)?;
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("empty input")]
    EmptyInput,
    #[error("window too short: need {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("spectrum has no bin at {0} Hz")]
    MissingBin(f64),
    #[error("no spectra for phase {0:?}")]
    EmptyPhase(TaskPhase),
}

/// Flicker frequency a participant attends: 17 Hz means "yes, rotate", 15 Hz means "no".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ssvep {
    #[serde(rename = "17hz")]
    F17,
    #[serde(rename = "15hz")]
    F15,
}

impl Ssvep {
    pub fn hz(self) -> f64 {
        match self {
            Ssvep::F17 => YES_HZ,
            Ssvep::F15 => NO_HZ,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Ssvep::F17 => Ssvep::F15,
            Ssvep::F15 => Ssvep::F17,
        }
    }

    pub fn for_decision(d: crate::game::Decision) -> Self {
        match d {
            crate::game::Decision::Rotate => Ssvep::F17,
            crate::game::Decision::NoRotate => Ssvep::F15,
        }
    }

    pub fn decision(self) -> crate::game::Decision {
        match self {
            Ssvep::F17 => crate::game::Decision::Rotate,
            Ssvep::F15 => crate::game::Decision::NoRotate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EegWindow {
    pub samples: Vec<f64>,
    pub fs: f64,
}

impl EegWindow {
    pub fn new(samples: Vec<f64>, fs: f64) -> Self {
        Self { samples, fs }
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|s| s.is_finite())
    }

    fn samples_per_second(&self) -> usize {
        self.fs.round() as usize
    }
}

/// Splits into consecutive non-overlapping 1-s windows; a trailing partial second is dropped.
pub fn epoch(window: &EegWindow) -> Vec<EegWindow> {
    let per = window.samples_per_second();
    if per == 0 {
        return Vec::new();
    }
    window
        .samples
        .chunks_exact(per)
        .map(|c| EegWindow::new(c.to_vec(), window.fs))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskPhase {
    PreTask,
    During,
    PostTask,
}

/// Elementwise mean spectrum for each task phase.
pub fn average_spectra(
    groups: &[(TaskPhase, Vec<PowerSpectrum>)],
) -> Result<BTreeMap<TaskPhase, PowerSpectrum>, SignalError> {
    let mut out = BTreeMap::new();
    for (phase, spectra) in groups {
        let first = spectra.first().ok_or(SignalError::EmptyPhase(*phase))?;
        let mut mean = PowerSpectrum::zeros_like(first);
        for s in spectra {
            if s.power.len() != mean.power.len() {
                return Err(SignalError::Config(format!(
                    "phase {phase:?} mixes spectra of {} and {} bins",
                    mean.power.len(),
                    s.power.len()
                )));
            }
            for (m, p) in mean.power.iter_mut().zip(&s.power) {
                *m += p;
            }
        }
        let n = spectra.len() as f64;
        mean.power.iter_mut().for_each(|m| *m /= n);
        out.insert(*phase, mean);
    }
    Ok(out)
}
