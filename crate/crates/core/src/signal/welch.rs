//! Welch power spectral density: Hann-windowed segments, averaged one-sided periodograms.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{EegWindow, SignalError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSpectrum {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
    pub resolution: f64,
}

impl PowerSpectrum {
    pub fn zeros_like(other: &PowerSpectrum) -> Self {
        Self {
            freqs: other.freqs.clone(),
            power: vec![0.0; other.power.len()],
            resolution: other.resolution,
        }
    }

    /// Index of the bin centred exactly on `freq_hz`, if the grid has one.
    pub fn bin_of(&self, freq_hz: f64) -> Option<usize> {
        let k = freq_hz / self.resolution;
        let idx = k.round();
        if (k - idx).abs() > 1e-9 || idx < 0.0 {
            return None;
        }
        let idx = idx as usize;
        (idx < self.power.len()).then_some(idx)
    }

    pub fn power_at(&self, freq_hz: f64) -> Option<f64> {
        self.bin_of(freq_hz).map(|k| self.power[k])
    }

    pub fn argmax(&self) -> usize {
        self.power
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &p)| if p > best.1 { (i, p) } else { best })
            .0
    }

    /// Integrated power over all bins.
    pub fn total(&self) -> f64 {
        self.power.iter().sum::<f64>() * self.resolution
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WelchConfig {
    /// Segment length in samples; `None` uses the whole epoch as one segment.
    pub segment_len: Option<usize>,
    /// Fractional overlap between consecutive segments, in [0, 1).
    pub overlap: f64,
}

impl Default for WelchConfig {
    fn default() -> Self {
        Self {
            segment_len: None,
            overlap: 0.5,
        }
    }
}

/// Reusable estimator holding the FFT plan and window for one segment length.
pub struct WelchEstimator {
    nperseg: usize,
    step: usize,
    window: Vec<f64>,
    window_power: f64,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for WelchEstimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WelchEstimator")
            .field("nperseg", &self.nperseg)
            .field("step", &self.step)
            .finish()
    }
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

impl WelchEstimator {
    pub fn new(nperseg: usize, overlap: f64) -> Result<Self, SignalError> {
        if nperseg < 2 {
            return Err(SignalError::Config(format!("segment length {nperseg} is too short")));
        }
        if !(0.0..1.0).contains(&overlap) {
            return Err(SignalError::Config(format!("overlap {overlap} outside [0, 1)")));
        }
        let noverlap = (nperseg as f64 * overlap).floor() as usize;
        let window = hann(nperseg);
        let window_power = window.iter().map(|w| w * w).sum();
        let fft = FftPlanner::new().plan_fft_forward(nperseg);
        Ok(Self {
            nperseg,
            step: nperseg - noverlap,
            window,
            window_power,
            fft,
        })
    }

    pub fn for_epoch(epoch_len: usize, config: &WelchConfig) -> Result<Self, SignalError> {
        Self::new(config.segment_len.unwrap_or(epoch_len), config.overlap)
    }

    pub fn estimate(&self, epoch: &EegWindow) -> Result<PowerSpectrum, SignalError> {
        let x = &epoch.samples;
        if x.is_empty() {
            return Err(SignalError::EmptyInput);
        }
        if x.len() < self.nperseg {
            return Err(SignalError::TooShort {
                needed: self.nperseg,
                got: x.len(),
            });
        }
        let n = self.nperseg;
        let n_bins = n / 2 + 1;
        let mut acc = vec![0.0; n_bins];
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        let mut segments = 0usize;
        let mut start = 0;
        while start + n <= x.len() {
            let seg = &x[start..start + n];
            let mean = seg.iter().sum::<f64>() / n as f64;
            for ((b, &s), &w) in buf.iter_mut().zip(seg).zip(&self.window) {
                *b = Complex::new((s - mean) * w, 0.0);
            }
            self.fft.process(&mut buf);
            for (a, c) in acc.iter_mut().zip(&buf) {
                *a += c.norm_sqr();
            }
            segments += 1;
            start += self.step;
        }
        let scale = 1.0 / (epoch.fs * self.window_power * segments as f64);
        let power = acc
            .iter()
            .enumerate()
            .map(|(k, &p)| {
                let one_sided = if k == 0 || (n % 2 == 0 && k == n / 2) { 1.0 } else { 2.0 };
                p * scale * one_sided
            })
            .collect();
        let resolution = epoch.fs / n as f64;
        Ok(PowerSpectrum {
            freqs: (0..n_bins).map(|k| k as f64 * resolution).collect(),
            power,
            resolution,
        })
    }
}

/// One-off estimate with the default single-segment configuration.
pub fn welch_psd(epoch: &EegWindow) -> Result<PowerSpectrum, SignalError> {
    if epoch.samples.is_empty() {
        return Err(SignalError::EmptyInput);
    }
    WelchEstimator::for_epoch(epoch.samples.len(), &WelchConfig::default())?.estimate(epoch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn sine(freq: f64, fs: f64, n: usize) -> EegWindow {
        EegWindow::new(
            (0..n)
                .map(|i| (2.0 * PI * freq * i as f64 / fs).sin())
                .collect(),
            fs,
        )
    }

    #[test]
    fn zero_signal_zero_spectrum() {
        let psd = welch_psd(&EegWindow::new(vec![0.0; 250], 250.0)).unwrap();
        assert!(psd.power.iter().all(|&p| p == 0.0));
        assert_eq!(psd.power.len(), 126);
        assert_eq!(psd.freqs[125], 125.0);
    }

    #[test]
    fn empty_epoch_is_an_error() {
        assert!(matches!(
            welch_psd(&EegWindow::new(vec![], 250.0)),
            Err(SignalError::EmptyInput)
        ));
    }

    #[test]
    fn single_tone_peaks_at_its_bin() {
        let psd = welch_psd(&sine(17.0, 250.0, 250)).unwrap();
        assert_eq!(psd.resolution, 1.0);
        assert_eq!(psd.argmax(), 17);
        assert_eq!(psd.bin_of(15.0), Some(15));
        assert!(psd.power.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn integer_tone_power_sits_in_bin_and_neighbours() {
        for f in [5.0, 15.0, 17.0, 23.0] {
            let psd = welch_psd(&sine(f, 250.0, 250)).unwrap();
            let k = psd.bin_of(f).unwrap();
            let local: f64 = psd.power[k - 1..=k + 1].iter().sum();
            let total: f64 = psd.power.iter().sum();
            assert!(local / total >= 0.999, "{f} Hz: {}", local / total);
        }
    }

    #[test]
    fn tone_total_power_matches_variance() {
        // unit sine has variance 1/2
        let psd = welch_psd(&sine(17.0, 250.0, 250)).unwrap();
        assert!((psd.total() - 0.5).abs() < 1e-9, "{}", psd.total());
    }

    #[test]
    fn multi_segment_configuration_averages() {
        let w = sine(20.0, 250.0, 1000);
        let est = WelchEstimator::new(250, 0.5).unwrap();
        let psd = est.estimate(&w).unwrap();
        assert_eq!(psd.argmax(), 20);
        assert!(matches!(
            est.estimate(&sine(20.0, 250.0, 100)),
            Err(SignalError::TooShort { .. })
        ));
    }

    #[test]
    fn white_noise_is_flat_on_average() {
        let est = WelchEstimator::new(250, 0.5).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut acc = vec![0.0; 126];
        for _ in 0..1000 {
            let x: Vec<f64> = (0..250).map(|_| StandardNormal.sample(&mut rng)).collect();
            let psd = est.estimate(&EegWindow::new(x, 250.0)).unwrap();
            for (a, p) in acc.iter_mut().zip(&psd.power) {
                *a += p;
            }
        }
        let band = &acc[5..=30];
        let max = band.iter().cloned().fold(f64::MIN, f64::max);
        let min = band.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max / min < 1.5, "ratio {}", max / min);
    }
}
