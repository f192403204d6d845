//! Per-epoch frequency votes and the cursor that accumulates them into a decision.

use serde::{Deserialize, Serialize};

use super::filter::{design_filter, FilterCoefficients, FilterSpec};
use super::welch::{PowerSpectrum, WelchConfig, WelchEstimator};
use super::{epoch, EegWindow, SignalError, Ssvep, NO_HZ, YES_HZ};
use crate::game::Decision;

/// Ten consistent votes carry the cursor from centre to a wall.
pub const DEFAULT_CURSOR_STEP: f64 = 0.1;

const WALL_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochVote {
    /// `None` on an exact power tie (abstention).
    pub winner: Option<Ssvep>,
    pub p17: f64,
    pub p15: f64,
}

pub fn classify_epoch(psd: &PowerSpectrum) -> Result<EpochVote, SignalError> {
    let p17 = psd.power_at(YES_HZ).ok_or(SignalError::MissingBin(YES_HZ))?;
    let p15 = psd.power_at(NO_HZ).ok_or(SignalError::MissingBin(NO_HZ))?;
    Ok(EpochVote::from_powers(p17, p15))
}

impl EpochVote {
    pub fn from_powers(p17: f64, p15: f64) -> Self {
        let winner = if p17 > p15 {
            Some(Ssvep::F17)
        } else if p15 > p17 {
            Some(Ssvep::F15)
        } else {
            None
        };
        Self { winner, p17, p15 }
    }
}

/// Horizontal cursor: −1 is the "YES" (rotate) wall, +1 the "NO" wall.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CursorState {
    pub position: f64,
    pub step: f64,
    pub latched: Option<Decision>,
}

impl CursorState {
    pub fn centered(step: f64) -> Self {
        Self {
            position: 0.0,
            step,
            latched: None,
        }
    }
}

impl Default for CursorState {
    fn default() -> Self {
        Self::centered(DEFAULT_CURSOR_STEP)
    }
}

pub fn update_cursor(c: CursorState, vote: &EpochVote) -> CursorState {
    if c.latched.is_some() {
        return c;
    }
    let delta = match vote.winner {
        Some(Ssvep::F17) => -c.step,
        Some(Ssvep::F15) => c.step,
        None => 0.0,
    };
    let mut position = (c.position + delta).clamp(-1.0, 1.0);
    let mut latched = None;
    if position <= -1.0 + WALL_EPS {
        position = -1.0;
        latched = Some(Decision::Rotate);
    } else if position >= 1.0 - WALL_EPS {
        position = 1.0;
        latched = Some(Decision::NoRotate);
    }
    CursorState {
        position,
        step: c.step,
        latched,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TallyOutcome {
    pub decision: Decision,
    pub f17_votes: usize,
    pub f15_votes: usize,
    pub final_position: f64,
    /// Number of epochs consumed before a wall hit.
    pub latched_after: Option<usize>,
}

impl TallyOutcome {
    pub fn timed_out(&self) -> bool {
        self.latched_after.is_none()
    }
}

/// Walks the cursor through the votes. A wall hit decides immediately; on timeout
/// the side the cursor ended on wins, and a centred cursor falls back to the
/// summed 17 vs 15 Hz power over the window.
pub fn tally_decision(votes: &[EpochVote], cursor: CursorState) -> TallyOutcome {
    let mut c = cursor;
    let (mut f17, mut f15) = (0, 0);
    let mut latched_after = None;
    for (i, v) in votes.iter().enumerate() {
        match v.winner {
            Some(Ssvep::F17) => f17 += 1,
            Some(Ssvep::F15) => f15 += 1,
            None => {}
        }
        c = update_cursor(c, v);
        if c.latched.is_some() {
            latched_after = Some(i + 1);
            break;
        }
    }
    let decision = match c.latched {
        Some(d) => d,
        None if c.position < -WALL_EPS => Decision::Rotate,
        None if c.position > WALL_EPS => Decision::NoRotate,
        None => {
            let s17: f64 = votes.iter().map(|v| v.p17).sum();
            let s15: f64 = votes.iter().map(|v| v.p15).sum();
            if s17 > s15 {
                Decision::Rotate
            } else {
                Decision::NoRotate
            }
        }
    };
    TallyOutcome {
        decision,
        f17_votes: f17,
        f15_votes: f15,
        final_position: c.position,
        latched_after,
    }
}

/// The full filter → epoch → Welch → vote → cursor chain for one sampling rate.
#[derive(Debug)]
pub struct SsvepDecoder {
    filter: FilterCoefficients,
    welch: WelchEstimator,
    fs: f64,
    cursor_step: f64,
}

impl SsvepDecoder {
    pub fn new(fs: f64, welch: &WelchConfig, cursor_step: f64) -> Result<Self, SignalError> {
        let filter = design_filter(FilterSpec::lowpass_30hz(fs))?;
        let epoch_len = fs.round() as usize;
        let welch = WelchEstimator::for_epoch(epoch_len, welch)?;
        if !(cursor_step > 0.0 && cursor_step <= 1.0) {
            return Err(SignalError::Config(format!("cursor step {cursor_step} outside (0, 1]")));
        }
        Ok(Self {
            filter,
            welch,
            fs,
            cursor_step,
        })
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn spectra(&self, window: &EegWindow) -> Result<Vec<PowerSpectrum>, SignalError> {
        let filtered = EegWindow::new(self.filter.apply(&window.samples), window.fs);
        epoch(&filtered)
            .iter()
            .map(|e| self.welch.estimate(e))
            .collect()
    }

    pub fn votes(&self, window: &EegWindow) -> Result<Vec<EpochVote>, SignalError> {
        self.spectra(window)?.iter().map(classify_epoch).collect()
    }

    pub fn decode(&self, window: &EegWindow) -> Result<TallyOutcome, SignalError> {
        let votes = self.votes(window)?;
        if votes.is_empty() {
            return Err(SignalError::TooShort {
                needed: self.fs.round() as usize,
                got: window.samples.len(),
            });
        }
        Ok(tally_decision(&votes, CursorState::centered(self.cursor_step)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(w: Option<Ssvep>) -> EpochVote {
        match w {
            Some(Ssvep::F17) => EpochVote::from_powers(2.0, 1.0),
            Some(Ssvep::F15) => EpochVote::from_powers(1.0, 2.0),
            None => EpochVote::from_powers(1.0, 1.0),
        }
    }

    #[test]
    fn classify_compares_bins() {
        assert_eq!(EpochVote::from_powers(5.0, 1.0).winner, Some(Ssvep::F17));
        assert_eq!(EpochVote::from_powers(1.0, 5.0).winner, Some(Ssvep::F15));
        assert_eq!(EpochVote::from_powers(3.0, 3.0).winner, None);
    }

    #[test]
    fn classify_needs_exact_bins() {
        let psd = PowerSpectrum {
            freqs: vec![0.0, 2.0, 4.0],
            power: vec![0.0; 3],
            resolution: 2.0,
        };
        assert_eq!(classify_epoch(&psd), Err(SignalError::MissingBin(17.0)));
    }

    #[test]
    fn cursor_moves_and_latches() {
        let c = update_cursor(CursorState::default(), &v(Some(Ssvep::F17)));
        assert!((c.position + 0.1).abs() < 1e-12);
        assert!(c.latched.is_none());

        let near = CursorState {
            position: -0.95,
            step: 0.1,
            latched: None,
        };
        let c = update_cursor(near, &v(Some(Ssvep::F17)));
        assert_eq!(c.position, -1.0);
        assert_eq!(c.latched, Some(Decision::Rotate));
        // latched cursors ignore further votes
        assert_eq!(update_cursor(c, &v(Some(Ssvep::F15))), c);

        let c = update_cursor(CursorState::default(), &v(None));
        assert_eq!(c.position, 0.0);
    }

    #[test]
    fn unanimous_votes_hit_the_wall_on_the_tenth_epoch() {
        let out = tally_decision(&[v(Some(Ssvep::F17)); 10], CursorState::default());
        assert_eq!(out.decision, Decision::Rotate);
        assert_eq!(out.latched_after, Some(10));
        let out = tally_decision(&[v(Some(Ssvep::F15)); 10], CursorState::default());
        assert_eq!(out.decision, Decision::NoRotate);
        assert_eq!(out.final_position, 1.0);
    }

    #[test]
    fn six_to_four_times_out_left_of_centre() {
        let mut votes = vec![v(Some(Ssvep::F17)); 6];
        votes.extend(vec![v(Some(Ssvep::F15)); 4]);
        let out = tally_decision(&votes, CursorState::default());
        assert!(out.timed_out());
        assert!((out.final_position + 0.2).abs() < 1e-9);
        assert_eq!(out.decision, Decision::Rotate);
        assert_eq!((out.f17_votes, out.f15_votes), (6, 4));
    }

    #[test]
    fn alternating_votes_oscillate_and_time_out() {
        let mut c = CursorState::default();
        let mut positions = vec![];
        for i in 0..1000 {
            let w = if i % 2 == 0 { Ssvep::F17 } else { Ssvep::F15 };
            c = update_cursor(c, &v(Some(w)));
            positions.push(c.position);
        }
        assert!(c.latched.is_none());
        assert!(positions.iter().all(|p| p.abs() <= 0.1 + 1e-9));
        let votes: Vec<_> = (0..10)
            .map(|i| v(Some(if i % 2 == 0 { Ssvep::F17 } else { Ssvep::F15 })))
            .collect();
        assert!(tally_decision(&votes, CursorState::default()).timed_out());
    }

    #[test]
    fn centred_timeout_uses_summed_power() {
        let votes = [
            EpochVote::from_powers(9.0, 1.0),
            EpochVote::from_powers(1.0, 2.0),
        ];
        assert_eq!(
            tally_decision(&votes, CursorState::default()).decision,
            Decision::Rotate
        );
        let votes = [
            EpochVote::from_powers(2.0, 1.0),
            EpochVote::from_powers(1.0, 9.0),
        ];
        assert_eq!(
            tally_decision(&votes, CursorState::default()).decision,
            Decision::NoRotate
        );
    }

    #[test]
    fn decoder_rejects_short_windows() {
        let d = SsvepDecoder::new(250.0, &WelchConfig::default(), 0.1).unwrap();
        assert!(d.decode(&EegWindow::new(vec![0.0; 100], 250.0)).is_err());
        assert!(SsvepDecoder::new(250.0, &WelchConfig::default(), 0.0).is_err());
    }
}
