use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::clock::{advance_clock, secs, ClockMode, SessionClock};
use super::corruption::{corrupt, plan_corruption, BadSender, CorruptionPlan};
use super::log::{
    LogRecord, RoundRecord, SenderRound, SessionEnd, SessionHeader, SessionLog, StimEvent,
    TrialRecord, LOG_SCHEMA, LOG_VERSION,
};
use super::transport::{Peer, Transport};
use super::wire::{DecisionReport, IntensityClass, MessageBody, ParticipantSetup, ProtocolMessage};
use super::ProtocolError;
use crate::agents::AgentParams;
use crate::game::{
    apply_decision, correct_action, generate_schedule, render_view, score_trial, Decision, Role,
    TrialState,
};
use crate::rng::{derive_seed, rng_from_seed};
use crate::signal::{tally_decision, CursorState, PipelineParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub seed: u64,
    pub n_trials: usize,
    pub n_senders: usize,
    pub bad_sender: BadSender,
    pub corruption_count: usize,
    pub stim_gap_s: f64,
    pub decision_window_s: f64,
    pub clock: ClockMode,
    /// Wall-clock wait for a participant reply before the timeout rule applies.
    pub response_timeout_s: f64,
    pub agents: AgentParams,
    pub signal: PipelineParams,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_trials: 16,
            n_senders: 2,
            bad_sender: BadSender::Random,
            corruption_count: 10,
            stim_gap_s: 8.0,
            decision_window_s: 10.0,
            clock: ClockMode::Virtual,
            response_timeout_s: 30.0,
            agents: AgentParams::default(),
            signal: PipelineParams::default(),
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let cfg = |m: String| Err(ProtocolError::Config(m));
        if self.n_senders != 2 {
            return cfg(format!("a triad has exactly 2 senders, got {}", self.n_senders));
        }
        if self.n_trials == 0 || self.n_trials % 4 != 0 {
            return cfg(format!("n_trials must be a positive multiple of 4, got {}", self.n_trials));
        }
        if self.corruption_count > self.n_trials {
            return cfg(format!(
                "corruption_count {} exceeds n_trials {}",
                self.corruption_count, self.n_trials
            ));
        }
        if !(self.stim_gap_s >= 0.0 && self.stim_gap_s.is_finite()) {
            return cfg(format!("stim_gap_s must be non-negative, got {}", self.stim_gap_s));
        }
        if !(self.decision_window_s >= 1.0 && self.decision_window_s <= 600.0) {
            return cfg(format!(
                "decision_window_s must lie in [1, 600], got {}",
                self.decision_window_s
            ));
        }
        if !(self.response_timeout_s > 0.0 && self.response_timeout_s.is_finite()) {
            return cfg(format!("response_timeout_s must be positive, got {}", self.response_timeout_s));
        }
        self.agents.validate().map_err(|e| ProtocolError::Config(e.to_string()))?;
        self.signal.validate().map_err(|e| ProtocolError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn session_id(&self) -> String {
        format!("s{:016x}", self.seed)
    }

    pub fn peers(&self) -> Vec<Peer> {
        let mut p: Vec<Peer> = (1..=self.n_senders as u8).map(Peer::Sender).collect();
        p.push(Peer::Receiver);
        p
    }

    /// Setup handed to `peer` at role assignment.
    pub fn setup_for(&self, peer: Peer) -> ParticipantSetup {
        let seed = match peer {
            Peer::Sender(i) => derive_seed(self.seed, "sender", u64::from(i)),
            Peer::Receiver => derive_seed(self.seed, "receiver", 0),
        };
        ParticipantSetup {
            seed,
            n_senders: self.n_senders,
            decision_window_s: self.decision_window_s,
            agents: self.agents,
            signal: self.signal,
        }
    }
}

struct Orchestrator<'a, T: Transport + ?Sized> {
    config: &'a SessionConfig,
    transport: &'a mut T,
    session_id: String,
    clock: SessionClock,
    log: SessionLog,
    score: u32,
    completed: usize,
    calibration_logged: bool,
}

impl<T: Transport + ?Sized> Orchestrator<'_, T> {
    fn msg(&self, body: MessageBody, trial_index: usize, round: u8) -> ProtocolMessage {
        ProtocolMessage::new(&self.session_id, body).at(trial_index, round, self.clock.now_ms())
    }

    fn advance(&mut self, s: f64) {
        self.clock = advance_clock(self.clock, secs(s));
    }

    fn timeout(&self) -> Duration {
        secs(self.config.response_timeout_s)
    }

    /// Waits for the DecisionSubmit of this round from `peer`; stale messages
    /// are skipped and `None` means the peer missed the deadline.
    fn await_decision(
        &mut self,
        peer: Peer,
        trial_index: usize,
        round: u8,
    ) -> Result<Option<(Decision, DecisionReport)>, ProtocolError> {
        loop {
            let m = match self.transport.recv(peer, self.timeout()) {
                Ok(m) => m,
                Err(ProtocolError::Timeout(_)) => return Ok(None),
                Err(e) => return Err(e),
            };
            match m.body {
                MessageBody::DecisionSubmit { decision, report }
                    if m.trial_index == trial_index && m.round == round =>
                {
                    return Ok(Some((decision, report)))
                }
                MessageBody::Error { code, message } => {
                    return Err(ProtocolError::Remote(format!("{peer} {code:?}: {message}")))
                }
                _ => continue,
            }
        }
    }

    fn fallback(&self) -> Decision {
        tally_decision(&[], CursorState::centered(self.config.signal.cursor_step)).decision
    }

    fn handshake(&mut self) -> Result<(), ProtocolError> {
        for peer in self.config.peers() {
            let (role, id) = match peer {
                Peer::Sender(i) => (Role::Sender, Some(i)),
                Peer::Receiver => (Role::Receiver, None),
            };
            let mut m = self.msg(
                MessageBody::RoleAssign {
                    accepted: true,
                    role,
                    reason: None,
                    setup: Some(self.config.setup_for(peer)),
                },
                0,
                0,
            );
            m.sender_id = id;
            self.transport.send(peer, &m)?;
        }
        Ok(())
    }

    fn play_round(
        &mut self,
        state: &TrialState,
        plan: &CorruptionPlan,
    ) -> Result<RoundRecord, ProtocolError> {
        let (t, round) = (state.trial_index, state.round);
        let correct = correct_action(state)?;
        let started_at = self.clock.now_ms();
        for peer in self.config.peers() {
            let role = if peer == Peer::Receiver { Role::Receiver } else { Role::Sender };
            let m = self.msg(MessageBody::StatePush { view: render_view(state, role) }, t, round);
            self.transport.send(peer, &m)?;
        }

        self.advance(self.config.decision_window_s);
        let mut senders = Vec::with_capacity(self.config.n_senders);
        for id in 1..=self.config.n_senders as u8 {
            let got = self.await_decision(Peer::Sender(id), t, round)?;
            let late = got.is_none();
            let (submitted, report) = got.unwrap_or_else(|| (self.fallback(), DecisionReport::default()));
            let conveyed = corrupt(submitted, t, plan, id, correct);
            senders.push(SenderRound {
                sender_id: id,
                attended: report.attended,
                submitted,
                conveyed,
                corrupted: plan.is_corrupted(id, t),
                late,
                f17_votes: report.f17_votes,
                f15_votes: report.f15_votes,
                submitted_at: self.clock.now_ms(),
            });
        }

        let mut stims = Vec::with_capacity(senders.len());
        for (k, s) in senders.iter().enumerate() {
            if k > 0 {
                self.advance(self.config.stim_gap_s);
            }
            let intensity = IntensityClass::for_decision(s.conveyed);
            let m = self
                .msg(
                    MessageBody::StimDeliver {
                        intensity,
                        prompt: format!("Sender {}", s.sender_id),
                    },
                    t,
                    round,
                )
                .from_sender(s.sender_id);
            self.transport.send(Peer::Receiver, &m)?;
            stims.push(StimEvent {
                sender_id: s.sender_id,
                intensity,
                tick: self.clock.now_ms(),
            });
        }

        self.advance(self.config.decision_window_s);
        let got = self.await_decision(Peer::Receiver, t, round)?;
        let receiver_late = got.is_none();
        let (decision, report) = got.unwrap_or_else(|| (self.fallback(), DecisionReport::default()));
        if let Some(c) = report.calibration {
            if !self.calibration_logged {
                self.log.push(LogRecord::Calibration(c));
                self.calibration_logged = true;
            }
        }
        let state_after = apply_decision(state, decision)?;
        Ok(RoundRecord {
            trial_index: t,
            round,
            started_at,
            correct_action: correct,
            senders,
            stims,
            percepts: report.percepts,
            trust: report.trust,
            receiver_attended: report.attended,
            receiver_decision: decision,
            receiver_late,
            receiver_f17_votes: report.f17_votes,
            receiver_f15_votes: report.f15_votes,
            decided_at: self.clock.now_ms(),
            state_after,
        })
    }

    fn play(&mut self, schedule: &[TrialState], plan: &CorruptionPlan) -> Result<(), ProtocolError> {
        self.handshake()?;
        for trial in schedule {
            let mut state = trial.clone();
            let mut correct_actions = Vec::with_capacity(2);
            let mut decisions = Vec::with_capacity(2);
            while !state.is_dropped() {
                let rec = self.play_round(&state, plan)?;
                correct_actions.push(rec.correct_action);
                decisions.push(rec.receiver_decision);
                state = rec.state_after.clone();
                self.log.push(LogRecord::Round(rec));
            }
            let outcome = score_trial(&state)? == 1;
            let t = state.trial_index;
            for peer in self.config.peers() {
                let role = if peer == Peer::Receiver { Role::Receiver } else { Role::Sender };
                let m = self.msg(
                    MessageBody::FeedbackPush {
                        view: render_view(&state, role),
                        outcome,
                        correct_actions: correct_actions.clone(),
                    },
                    t,
                    2,
                );
                self.transport.send(peer, &m)?;
            }
            self.log.push(LogRecord::Trial(TrialRecord {
                trial_index: t,
                requires_rotation: trial.requires_rotation,
                correct_actions,
                receiver_decisions: decisions,
                outcome,
                feedback_at: self.clock.now_ms(),
            }));
            self.score += u32::from(outcome);
            self.completed += 1;
        }
        Ok(())
    }

    fn finish(&mut self, aborted: Option<String>) {
        let (score, n) = (self.score, self.completed);
        let body = MessageBody::SessionEnd {
            score,
            n_trials: n,
            aborted: aborted.clone(),
        };
        // best effort: a peer may already be gone
        for peer in self.config.peers() {
            let m = self.msg(body.clone(), n, 0);
            let _ = self.transport.send(peer, &m);
        }
        self.log.push(LogRecord::End(SessionEnd {
            score,
            completed_trials: n,
            aborted,
            end_tick: self.clock.now_ms(),
        }));
    }
}

/// Runs one triad session. Configuration problems are errors; failures after
/// the session has started yield a partial log whose end record is flagged.
pub fn run_session<T: Transport + ?Sized>(
    config: &SessionConfig,
    transport: &mut T,
) -> Result<SessionLog, ProtocolError> {
    config.validate()?;
    let schedule = generate_schedule(derive_seed(config.seed, "schedule", 0), config.n_trials)?;
    let plan = plan_corruption(
        config.bad_sender,
        config.corruption_count,
        config.n_trials,
        &mut rng_from_seed(derive_seed(config.seed, "corruption", 0)),
    )?;
    let session_id = config.session_id();
    let mut o = Orchestrator {
        config,
        transport,
        session_id: session_id.clone(),
        clock: SessionClock::new(config.clock),
        log: SessionLog::default(),
        score: 0,
        completed: 0,
        calibration_logged: false,
    };
    o.log.push(LogRecord::Header(SessionHeader {
        schema: LOG_SCHEMA.to_owned(),
        version: LOG_VERSION,
        session_id,
        config: config.clone(),
        plan: plan.clone(),
        schedule: schedule.trials.clone(),
    }));
    let aborted = o.play(&schedule.trials, &plan).err().map(|e| e.to_string());
    o.finish(aborted);
    Ok(o.log)
}
