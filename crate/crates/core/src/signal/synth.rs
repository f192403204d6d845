//! Generative stand-in for an occipital channel while a participant attends one LED.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{EegWindow, SignalError, Ssvep};

/// Amplitudes are in microvolts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SsvepParams {
    pub target_amp: f64,
    /// Leakage from the unattended LED.
    pub distractor_amp: f64,
    /// RMS of the background noise (pink plus white floor).
    pub noise_amp: f64,
    /// Spectral exponent of the pink component, power ∝ 1/f^exponent.
    pub noise_exponent: f64,
    /// Fraction of noise variance carried by the pink component.
    pub pink_share: f64,
    /// Number of harmonics of each flicker frequency, the fundamental included.
    pub harmonics: usize,
}

impl Default for SsvepParams {
    fn default() -> Self {
        Self {
            target_amp: 3.0,
            distractor_amp: 0.5,
            noise_amp: 10.0,
            noise_exponent: 1.0,
            pink_share: 0.1,
            harmonics: 2,
        }
    }
}

impl SsvepParams {
    pub fn validate(&self) -> Result<(), SignalError> {
        let amps = [self.target_amp, self.distractor_amp, self.noise_amp];
        if amps.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(SignalError::Config("amplitudes must be finite and ≥ 0".into()));
        }
        if !(0.0..=1.0).contains(&self.pink_share) {
            return Err(SignalError::Config(format!(
                "pink_share {} outside [0, 1]",
                self.pink_share
            )));
        }
        if !self.noise_exponent.is_finite() {
            return Err(SignalError::Config("noise_exponent must be finite".into()));
        }
        Ok(())
    }
}

fn add_tone<R: Rng + ?Sized>(out: &mut [f64], freq: f64, amp: f64, harmonics: usize, fs: f64, rng: &mut R) {
    for h in 1..=harmonics.max(1) {
        let f = freq * h as f64;
        // phase is drawn even for silent components so the stream does not depend on amplitudes
        let phase = rng.random::<f64>() * 2.0 * PI;
        if amp == 0.0 || f >= fs / 2.0 {
            continue;
        }
        let a = amp / h as f64;
        for (i, o) in out.iter_mut().enumerate() {
            *o += a * (2.0 * PI * f * i as f64 / fs + phase).sin();
        }
    }
}

fn pink_noise<R: Rng + ?Sized>(n: usize, fs: f64, exponent: f64, rms: f64, rng: &mut R) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = (0..n)
        .map(|_| Complex::new(StandardNormal.sample(rng), 0.0))
        .collect();
    if rms == 0.0 || n < 2 {
        return vec![0.0; n];
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let gain = |k: usize| {
        let kk = k.min(n - k);
        if kk == 0 {
            0.0
        } else {
            (kk as f64 * fs / n as f64).powf(-exponent / 2.0)
        }
    };
    let mut mean_g2 = 0.0;
    for (k, b) in buf.iter_mut().enumerate() {
        let g = gain(k);
        mean_g2 += g * g;
        *b *= g;
    }
    mean_g2 /= n as f64;
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = rms / (n as f64 * mean_g2.sqrt());
    buf.iter().map(|c| c.re * scale).collect()
}

/// Target tone plus distractor tone plus background noise; deterministic for a given RNG state.
pub fn synthesize_eeg<R: Rng + ?Sized>(
    target: Ssvep,
    duration_s: f64,
    fs: f64,
    params: &SsvepParams,
    rng: &mut R,
) -> Result<EegWindow, SignalError> {
    params.validate()?;
    if !(duration_s > 0.0) {
        return Err(SignalError::Config(format!("duration {duration_s} s must be positive")));
    }
    let n = (duration_s * fs).round() as usize;
    let mut x = vec![0.0; n];
    add_tone(&mut x, target.hz(), params.target_amp, params.harmonics, fs, rng);
    add_tone(&mut x, target.other().hz(), params.distractor_amp, params.harmonics, fs, rng);
    let pink_rms = params.noise_amp * params.pink_share.sqrt();
    let white_rms = params.noise_amp * (1.0 - params.pink_share).sqrt();
    let pink = pink_noise(n, fs, params.noise_exponent, pink_rms, rng);
    for (o, p) in x.iter_mut().zip(pink) {
        let w: f64 = StandardNormal.sample(rng);
        *o += p + white_rms * w;
    }
    Ok(EegWindow::new(x, fs))
}
