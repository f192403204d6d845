//! Line-oriented session log: one JSON record per line, header first.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::corruption::CorruptionPlan;
use super::session::SessionConfig;
use super::wire::{Calibration, IntensityClass};
use crate::game::{apply_decision, correct_action, score_trial, Decision, TrialState};
use crate::signal::Ssvep;

pub const LOG_SCHEMA: &str = "brainnet.session-log";
pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("empty log")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub schema: String,
    pub version: u32,
    pub session_id: String,
    pub config: SessionConfig,
    pub plan: CorruptionPlan,
    pub schedule: Vec<TrialState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SenderRound {
    pub sender_id: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attended: Option<Ssvep>,
    pub submitted: Decision,
    pub conveyed: Decision,
    pub corrupted: bool,
    /// No submission arrived in time; `submitted` is the timeout fallback.
    pub late: bool,
    pub f17_votes: usize,
    pub f15_votes: usize,
    pub submitted_at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StimEvent {
    pub sender_id: u8,
    pub intensity: IntensityClass,
    pub tick: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub trial_index: usize,
    pub round: u8,
    pub started_at: u64,
    pub correct_action: Decision,
    pub senders: Vec<SenderRound>,
    pub stims: Vec<StimEvent>,
    pub percepts: Vec<bool>,
    /// Receiver's trust in each Sender when it made this decision.
    pub trust: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub receiver_attended: Option<Ssvep>,
    pub receiver_decision: Decision,
    pub receiver_late: bool,
    pub receiver_f17_votes: usize,
    pub receiver_f15_votes: usize,
    pub decided_at: u64,
    pub state_after: TrialState,
}

impl RoundRecord {
    pub fn sender(&self, sender_id: u8) -> Option<&SenderRound> {
        self.senders.iter().find(|s| s.sender_id == sender_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: usize,
    pub requires_rotation: bool,
    pub correct_actions: Vec<Decision>,
    pub receiver_decisions: Vec<Decision>,
    pub outcome: bool,
    pub feedback_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEnd {
    pub score: u32,
    pub completed_trials: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aborted: Option<String>,
    pub end_tick: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum LogRecord {
    Header(SessionHeader),
    Calibration(Calibration),
    Round(RoundRecord),
    Trial(TrialRecord),
    End(SessionEnd),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceEntry {
    pub trial_index: usize,
    pub round: u8,
    /// `None` for the Receiver.
    pub sender_id: Option<u8>,
    pub decision: Decision,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub records: Vec<LogRecord>,
}

impl SessionLog {
    pub fn push(&mut self, r: LogRecord) {
        self.records.push(r);
    }

    pub fn header(&self) -> Option<&SessionHeader> {
        match self.records.first() {
            Some(LogRecord::Header(h)) => Some(h),
            _ => None,
        }
    }

    pub fn calibration(&self) -> Option<&Calibration> {
        self.records.iter().find_map(|r| match r {
            LogRecord::Calibration(c) => Some(c),
            _ => None,
        })
    }

    pub fn rounds(&self) -> impl Iterator<Item = &RoundRecord> {
        self.records.iter().filter_map(|r| match r {
            LogRecord::Round(x) => Some(x),
            _ => None,
        })
    }

    pub fn trials(&self) -> impl Iterator<Item = &TrialRecord> {
        self.records.iter().filter_map(|r| match r {
            LogRecord::Trial(x) => Some(x),
            _ => None,
        })
    }

    pub fn end(&self) -> Option<&SessionEnd> {
        self.records.iter().rev().find_map(|r| match r {
            LogRecord::End(e) => Some(e),
            _ => None,
        })
    }

    pub fn is_aborted(&self) -> bool {
        self.end().is_none_or(|e| e.aborted.is_some())
    }

    /// Completed without abort and with every scheduled trial logged.
    pub fn is_complete(&self) -> bool {
        !self.is_aborted()
            && self
                .header()
                .is_some_and(|h| self.trials().count() == h.schedule.len())
    }

    /// Every submitted decision in order: senders by id, then the Receiver, per round.
    pub fn decision_sequence(&self) -> Vec<SequenceEntry> {
        let mut out = Vec::new();
        for r in self.rounds() {
            for s in &r.senders {
                out.push(SequenceEntry {
                    trial_index: r.trial_index,
                    round: r.round,
                    sender_id: Some(s.sender_id),
                    decision: s.submitted,
                });
            }
            out.push(SequenceEntry {
                trial_index: r.trial_index,
                round: r.round,
                sender_id: None,
                decision: r.receiver_decision,
            });
        }
        out
    }

    fn ticks(&self) -> Vec<u64> {
        let mut t = Vec::new();
        for r in &self.records {
            match r {
                LogRecord::Round(x) => {
                    t.push(x.started_at);
                    t.extend(x.senders.iter().map(|s| s.submitted_at));
                    t.extend(x.stims.iter().map(|s| s.tick));
                    t.push(x.decided_at);
                }
                LogRecord::Trial(x) => t.push(x.feedback_at),
                LogRecord::End(x) => t.push(x.end_tick),
                _ => {}
            }
        }
        t
    }

    pub fn is_monotone(&self) -> bool {
        self.ticks().windows(2).all(|w| w[0] <= w[1])
    }
}

pub fn write_log<W: Write>(w: &mut W, log: &SessionLog) -> Result<(), LogError> {
    for r in &log.records {
        serde_json::to_writer(&mut *w, r).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_log<R: BufRead>(r: R) -> Result<SessionLog, LogError> {
    let mut log = SessionLog::default();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LogRecord = serde_json::from_str(&line).map_err(|e| LogError::Parse {
            line: n,
            message: e.to_string(),
        })?;
        match (&rec, log.records.is_empty()) {
            (LogRecord::Header(h), true) => {
                if h.schema != LOG_SCHEMA || h.version != LOG_VERSION {
                    return Err(LogError::Schema {
                        line: n,
                        message: format!("unsupported schema {} v{}", h.schema, h.version),
                    });
                }
            }
            (_, true) => {
                return Err(LogError::Schema {
                    line: n,
                    message: "first record must be the header".into(),
                })
            }
            (LogRecord::Header(_), false) => {
                return Err(LogError::Schema {
                    line: n,
                    message: "duplicate header".into(),
                })
            }
            _ => {}
        }
        log.push(rec);
    }
    if log.records.is_empty() {
        return Err(LogError::Empty);
    }
    Ok(log)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ReplayVerdict {
    Pass {
        trials: usize,
    },
    Fail {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        trial_index: Option<usize>,
        reason: String,
    },
}

impl ReplayVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, ReplayVerdict::Pass { .. })
    }

    fn fail(trial_index: Option<usize>, reason: impl Into<String>) -> Self {
        ReplayVerdict::Fail {
            trial_index,
            reason: reason.into(),
        }
    }
}

impl std::fmt::Display for ReplayVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ReplayVerdict::Pass { trials } => write!(f, "PASS ({trials} trials)"),
            ReplayVerdict::Fail {
                trial_index: Some(t),
                reason,
            } => write!(f, "FAIL trial {t}: {reason}"),
            ReplayVerdict::Fail { reason, .. } => write!(f, "FAIL: {reason}"),
        }
    }
}

/// Re-runs the game from the logged schedule and Receiver decisions and checks
/// every logged transition and outcome.
pub fn replay(log: &SessionLog) -> ReplayVerdict {
    let Some(header) = log.header() else {
        return ReplayVerdict::fail(None, "empty log: no header record");
    };
    if !log.is_monotone() {
        return ReplayVerdict::fail(None, "timestamps are not monotone");
    }
    let rounds: Vec<&RoundRecord> = log.rounds().collect();
    let mut score = 0;
    let mut n_trials = 0;
    for trial in log.trials() {
        let t = trial.trial_index;
        let Some(mut state) = header.schedule.get(t).cloned() else {
            return ReplayVerdict::fail(Some(t), "trial not in schedule");
        };
        let mine: Vec<&&RoundRecord> = rounds.iter().filter(|r| r.trial_index == t).collect();
        if mine.len() != 2 || mine[0].round != 1 || mine[1].round != 2 {
            return ReplayVerdict::fail(Some(t), format!("expected rounds 1 and 2, found {}", mine.len()));
        }
        for r in &mine {
            match correct_action(&state) {
                Ok(c) if c == r.correct_action => {}
                Ok(_) => return ReplayVerdict::fail(Some(t), format!("round {} correct action differs", r.round)),
                Err(e) => return ReplayVerdict::fail(Some(t), e.to_string()),
            }
            state = match apply_decision(&state, r.receiver_decision) {
                Ok(s) => s,
                Err(e) => return ReplayVerdict::fail(Some(t), e.to_string()),
            };
            if state != r.state_after {
                return ReplayVerdict::fail(Some(t), format!("round {} state differs", r.round));
            }
        }
        let decisions: Vec<Decision> = mine.iter().map(|r| r.receiver_decision).collect();
        if decisions != trial.receiver_decisions {
            return ReplayVerdict::fail(Some(t), "trial decisions differ from rounds");
        }
        let fits = match score_trial(&state) {
            Ok(s) => s == 1,
            Err(e) => return ReplayVerdict::fail(Some(t), e.to_string()),
        };
        if fits != trial.outcome {
            return ReplayVerdict::fail(
                Some(t),
                format!("logged outcome {} but replay gives {}", trial.outcome, fits),
            );
        }
        score += u32::from(fits);
        n_trials += 1;
    }
    if n_trials == 0 {
        return ReplayVerdict::fail(None, "log has no completed trials");
    }
    match log.end() {
        Some(e) if e.score != score || e.completed_trials != n_trials => ReplayVerdict::fail(
            None,
            format!("end record claims {}/{} but replay gives {}/{}", e.score, e.completed_trials, score, n_trials),
        ),
        _ => ReplayVerdict::Pass { trials: n_trials },
    }
}
