//! Butterworth low-pass design as cascaded biquads.
//!
//! Each conjugate pole pair of the analog prototype becomes one second-order
//! section via the bilinear transform with cutoff prewarping, so the digital
//! response is exactly −3.01 dB at the cutoff.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::SignalError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub order: usize,
    pub cutoff_hz: f64,
    pub fs: f64,
}

impl FilterSpec {
    pub fn lowpass_30hz(fs: f64) -> Self {
        Self {
            order: 4,
            cutoff_hz: 30.0,
            fs,
        }
    }
}

/// Normalized biquad: `a0` is implicitly 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Complex response at `freq_hz`, returned as (re, im).
    fn response(&self, freq_hz: f64, fs: f64) -> (f64, f64) {
        let w = 2.0 * PI * freq_hz / fs;
        // z^-1 = e^{-jw}
        let (c1, s1) = (w.cos(), -w.sin());
        let (c2, s2) = ((2.0 * w).cos(), -(2.0 * w).sin());
        let num = (
            self.b[0] + self.b[1] * c1 + self.b[2] * c2,
            self.b[1] * s1 + self.b[2] * s2,
        );
        let den = (1.0 + self.a[0] * c1 + self.a[1] * c2, self.a[0] * s1 + self.a[1] * s2);
        let d = den.0 * den.0 + den.1 * den.1;
        (
            (num.0 * den.0 + num.1 * den.1) / d,
            (num.1 * den.0 - num.0 * den.1) / d,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterCoefficients {
    pub spec: FilterSpec,
    pub sections: Vec<Biquad>,
}

impl FilterCoefficients {
    /// Magnitude of the cascaded frequency response.
    pub fn magnitude(&self, freq_hz: f64) -> f64 {
        self.sections
            .iter()
            .map(|s| {
                let (re, im) = s.response(freq_hz, self.spec.fs);
                (re * re + im * im).sqrt()
            })
            .product()
    }

    /// Forward-only (causal) filtering with zero initial state.
    pub fn apply(&self, input: &[f64]) -> Vec<f64> {
        let mut state = vec![[0.0f64; 2]; self.sections.len()];
        input
            .iter()
            .map(|&x| {
                let mut v = x;
                for (sec, z) in self.sections.iter().zip(state.iter_mut()) {
                    // transposed direct form II
                    let y = sec.b[0] * v + z[0];
                    z[0] = sec.b[1] * v - sec.a[0] * y + z[1];
                    z[1] = sec.b[2] * v - sec.a[1] * y;
                    v = y;
                }
                v
            })
            .collect()
    }
}

pub fn design_filter(spec: FilterSpec) -> Result<FilterCoefficients, SignalError> {
    if !(spec.fs > 0.0) || !spec.fs.is_finite() {
        return Err(SignalError::Config(format!("sampling rate {} is not positive", spec.fs)));
    }
    if spec.order == 0 || spec.order % 2 != 0 {
        return Err(SignalError::Config(format!(
            "filter order {} must be a positive even number",
            spec.order
        )));
    }
    if !(spec.cutoff_hz > 0.0) || spec.cutoff_hz >= spec.fs / 2.0 {
        return Err(SignalError::Config(format!(
            "cutoff {} Hz must lie in (0, {}) Hz",
            spec.cutoff_hz,
            spec.fs / 2.0
        )));
    }
    let k = (PI * spec.cutoff_hz / spec.fs).tan();
    let k2 = k * k;
    let n = spec.order as f64;
    let sections = (1..=spec.order / 2)
        .map(|i| {
            let theta = (2 * i - 1) as f64 * PI / (2.0 * n);
            let inv_q = 2.0 * theta.sin();
            let norm = 1.0 / (1.0 + k * inv_q + k2);
            let b0 = k2 * norm;
            Biquad {
                b: [b0, 2.0 * b0, b0],
                a: [2.0 * (k2 - 1.0) * norm, (1.0 - k * inv_q + k2) * norm],
            }
        })
        .collect();
    Ok(FilterCoefficients { spec, sections })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp250() -> FilterCoefficients {
        design_filter(FilterSpec::lowpass_30hz(250.0)).unwrap()
    }

    fn steady_state_ratio(f: &FilterCoefficients, freq: f64) -> f64 {
        let fs = f.spec.fs;
        let n = (fs * 20.0) as usize;
        let x: Vec<f64> = (0..n)
            .map(|i| (2.0 * PI * freq * i as f64 / fs).sin())
            .collect();
        let y = f.apply(&x);
        let tail = &y[n / 2..];
        let peak = tail.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        peak
    }

    #[test]
    fn rejects_cutoff_at_or_above_nyquist() {
        assert!(design_filter(FilterSpec { order: 4, cutoff_hz: 125.0, fs: 250.0 }).is_err());
        assert!(design_filter(FilterSpec { order: 4, cutoff_hz: 200.0, fs: 250.0 }).is_err());
        assert!(design_filter(FilterSpec { order: 3, cutoff_hz: 30.0, fs: 250.0 }).is_err());
    }

    #[test]
    fn four_poles_two_sections() {
        assert_eq!(lp250().sections.len(), 2);
    }

    #[test]
    fn dc_gain_is_one() {
        let f = lp250();
        assert!((f.magnitude(0.0) - 1.0).abs() < 1e-12);
        let y = f.apply(&vec![3.5; 2000]);
        assert!((y[1999] - 3.5).abs() < 1e-9);
    }

    #[test]
    fn half_power_at_cutoff() {
        let f = lp250();
        assert!((f.magnitude(30.0) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        let r = steady_state_ratio(&f, 30.0);
        assert!((r - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.02, "ratio {r}");
    }

    #[test]
    fn strong_attenuation_at_60hz() {
        let f = lp250();
        let r = steady_state_ratio(&f, 60.0);
        // analog prototype bound: |H(60)|^2 = 1/(1 + 2^8)
        assert!(r * r <= 0.004, "power ratio {}", r * r);
        assert!(r <= (1.0f64 / 257.0).sqrt());
    }

    #[test]
    fn works_at_500hz() {
        let f = design_filter(FilterSpec::lowpass_30hz(500.0)).unwrap();
        assert!((f.magnitude(30.0) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(f.magnitude(17.0) > 0.99);
    }
}
