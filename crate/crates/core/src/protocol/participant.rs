//! Simulated participants as message handlers.
//!
//! The same handlers run in-process and behind a TCP client; their behaviour
//! depends only on the messages they receive and the seed in their setup.

use crate::agents::{
    derive_stim_levels, pest_calibrate, perceive, update_trust, ReceiverPolicy, StimLevels,
    TrustState,
};
use crate::game::{Decision, Role};
use crate::rng::{rng_from_seed, SimRng};
use crate::signal::{synthesize_eeg, SsvepDecoder, SsvepParams};

use super::wire::{
    Calibration, DecisionReport, ErrorCode, IntensityClass, MessageBody, ParticipantSetup,
    ProtocolMessage,
};

/// Something that reacts to protocol messages with zero or more replies.
pub trait Participant: Send {
    fn role(&self) -> Role;
    fn on_message(&mut self, msg: &ProtocolMessage) -> Vec<ProtocolMessage>;
    fn finished(&self) -> bool;
}

fn reply(to: &ProtocolMessage, body: MessageBody) -> ProtocolMessage {
    ProtocolMessage::new(&to.session_id, body).at(to.trial_index, to.round, to.timestamp)
}

fn error_reply(to: &ProtocolMessage, code: ErrorCode, message: String) -> ProtocolMessage {
    reply(to, MessageBody::Error { code, message })
}

struct Pipeline {
    rng: SimRng,
    decoder: SsvepDecoder,
    params: SsvepParams,
    window_s: f64,
}

impl Pipeline {
    fn new(setup: &ParticipantSetup, fs: f64, params: SsvepParams) -> Result<Self, String> {
        let decoder = SsvepDecoder::new(fs, &setup.signal.welch, setup.signal.cursor_step)
            .map_err(|e| e.to_string())?;
        Ok(Self {
            rng: rng_from_seed(setup.seed),
            decoder,
            params,
            window_s: setup.decision_window_s,
        })
    }

    /// Attend `target` for one decision window and decode the result.
    fn convey(&mut self, target: crate::signal::Ssvep) -> Result<(Decision, DecisionReport), String> {
        let eeg = synthesize_eeg(
            target,
            self.window_s,
            self.decoder.fs(),
            &self.params,
            &mut self.rng,
        )
        .map_err(|e| e.to_string())?;
        let out = self.decoder.decode(&eeg).map_err(|e| e.to_string())?;
        Ok((
            out.decision,
            DecisionReport {
                attended: Some(target),
                f17_votes: out.f17_votes,
                f15_votes: out.f15_votes,
                latched_after: out.latched_after,
                ..Default::default()
            },
        ))
    }
}

pub struct SenderAgent {
    sender_id: u8,
    pipeline: Option<(ParticipantSetup, Pipeline)>,
    done: bool,
}

impl SenderAgent {
    pub fn new(sender_id: u8) -> Self {
        Self {
            sender_id,
            pipeline: None,
            done: false,
        }
    }

    pub fn sender_id(&self) -> u8 {
        self.sender_id
    }
}

impl Participant for SenderAgent {
    fn role(&self) -> Role {
        Role::Sender
    }

    fn finished(&self) -> bool {
        self.done
    }

    fn on_message(&mut self, msg: &ProtocolMessage) -> Vec<ProtocolMessage> {
        match &msg.body {
            MessageBody::RoleAssign {
                accepted: true,
                setup: Some(setup),
                ..
            } => {
                if let Some(id) = msg.sender_id {
                    self.sender_id = id;
                }
                match Pipeline::new(setup, setup.signal.sender_fs, setup.signal.sender_ssvep) {
                    Ok(p) => self.pipeline = Some((setup.clone(), p)),
                    Err(e) => return vec![error_reply(msg, ErrorCode::Internal, e)],
                }
                vec![]
            }
            MessageBody::RoleAssign { accepted: false, .. } => {
                self.done = true;
                vec![]
            }
            MessageBody::StatePush { view } => {
                let Some((setup, pipeline)) = self.pipeline.as_mut() else {
                    return vec![error_reply(msg, ErrorCode::Protocol, "no role assigned".into())];
                };
                let target = match crate::agents::sender_decide(view, &setup.agents.sender, &mut pipeline.rng) {
                    Ok(t) => t,
                    Err(e) => return vec![error_reply(msg, ErrorCode::Protocol, e.to_string())],
                };
                match pipeline.convey(target) {
                    Ok((decision, report)) => vec![reply(
                        msg,
                        MessageBody::DecisionSubmit { decision, report },
                    )
                    .from_sender(self.sender_id)],
                    Err(e) => vec![error_reply(msg, ErrorCode::Internal, e)],
                }
            }
            MessageBody::SessionEnd { .. } | MessageBody::Error { .. } => {
                self.done = true;
                vec![]
            }
            _ => vec![],
        }
    }
}

struct ReceiverState {
    setup: ParticipantSetup,
    pipeline: Pipeline,
    calibration: Calibration,
    calibration_reported: bool,
    trust: TrustState,
    round_percepts: Vec<Option<bool>>,
    trial_percepts: Vec<Vec<bool>>,
}

pub struct ReceiverAgent {
    state: Option<ReceiverState>,
    done: bool,
}

impl Default for ReceiverAgent {
    fn default() -> Self {
        Self::new()
    }
}

impl ReceiverAgent {
    pub fn new() -> Self {
        Self {
            state: None,
            done: false,
        }
    }

    pub fn trust(&self) -> Option<&TrustState> {
        self.state.as_ref().map(|s| &s.trust)
    }

    pub fn stim_levels(&self) -> Option<StimLevels> {
        self.state.as_ref().map(|s| s.calibration.levels)
    }

    fn setup(&mut self, setup: &ParticipantSetup) -> Result<(), (ErrorCode, String)> {
        let mut pipeline = Pipeline::new(setup, setup.signal.receiver_fs, setup.signal.receiver_ssvep)
            .map_err(|e| (ErrorCode::Internal, e))?;
        let rp = &setup.agents.receiver;
        let pest = pest_calibrate(&rp.phosphene, &rp.pest, &mut pipeline.rng)
            .map_err(|e| (ErrorCode::Calibration, e.to_string()))?;
        let levels = derive_stim_levels(pest.threshold, &rp.phosphene, &rp.stim_search, &mut pipeline.rng)
            .map_err(|e| (ErrorCode::Calibration, e.to_string()))?;
        let n = setup.n_senders;
        self.state = Some(ReceiverState {
            setup: setup.clone(),
            pipeline,
            calibration: Calibration {
                threshold: pest.threshold,
                levels,
                pest_trials: pest.trajectory.len(),
            },
            calibration_reported: false,
            trust: TrustState::with_prior(n, rp.trust_prior_successes, rp.trust_prior_failures),
            round_percepts: vec![None; n],
            trial_percepts: vec![Vec::new(); n],
        });
        Ok(())
    }
}

impl Participant for ReceiverAgent {
    fn role(&self) -> Role {
        Role::Receiver
    }

    fn finished(&self) -> bool {
        self.done
    }

    fn on_message(&mut self, msg: &ProtocolMessage) -> Vec<ProtocolMessage> {
        match &msg.body {
            MessageBody::RoleAssign {
                accepted: true,
                setup: Some(setup),
                ..
            } => match self.setup(setup) {
                Ok(()) => vec![],
                Err((code, e)) => {
                    self.done = true;
                    vec![error_reply(msg, code, e)]
                }
            },
            MessageBody::RoleAssign { accepted: false, .. }
            | MessageBody::SessionEnd { .. }
            | MessageBody::Error { .. } => {
                self.done = true;
                vec![]
            }
            MessageBody::StatePush { .. } => {
                if let Some(st) = self.state.as_mut() {
                    st.round_percepts.iter_mut().for_each(|p| *p = None);
                    if msg.round == 1 {
                        st.trial_percepts.iter_mut().for_each(Vec::clear);
                    }
                }
                vec![]
            }
            MessageBody::StimDeliver { intensity, .. } => {
                let Some(st) = self.state.as_mut() else {
                    return vec![error_reply(msg, ErrorCode::Protocol, "no role assigned".into())];
                };
                let idx = match msg.sender_id {
                    Some(id) if (1..=st.round_percepts.len()).contains(&(id as usize)) => id as usize - 1,
                    _ => {
                        return vec![error_reply(
                            msg,
                            ErrorCode::Protocol,
                            format!("stimulation from unknown sender {:?}", msg.sender_id),
                        )]
                    }
                };
                let level = match intensity {
                    IntensityClass::AboveThreshold => st.calibration.levels.yes_intensity,
                    IntensityClass::BelowThreshold => st.calibration.levels.no_intensity,
                };
                let seen = perceive(level, &st.setup.agents.receiver.phosphene, &mut st.pipeline.rng);
                st.round_percepts[idx] = Some(seen);
                if st.round_percepts.iter().any(Option::is_none) {
                    return vec![];
                }
                let percepts: Vec<bool> = st.round_percepts.iter().map(|p| p.unwrap_or(false)).collect();
                for (tp, &p) in st.trial_percepts.iter_mut().zip(&percepts) {
                    tp.push(p);
                }
                let strategy = st.setup.agents.receiver.strategy;
                let target = strategy.decide(&percepts, &st.trust, &mut st.pipeline.rng);
                match st.pipeline.convey(target) {
                    Ok((decision, mut report)) => {
                        report.percepts = percepts;
                        report.trust = st.trust.estimates();
                        if !st.calibration_reported {
                            report.calibration = Some(st.calibration);
                            st.calibration_reported = true;
                        }
                        vec![reply(msg, MessageBody::DecisionSubmit { decision, report })]
                    }
                    Err(e) => vec![error_reply(msg, ErrorCode::Internal, e)],
                }
            }
            MessageBody::FeedbackPush { correct_actions, .. } => {
                if let Some(st) = self.state.as_mut() {
                    let conveyed: Vec<Vec<Decision>> = st
                        .trial_percepts
                        .iter()
                        .map(|ps| ps.iter().map(|&p| Decision::from_bit(p)).collect())
                        .collect();
                    st.trust = update_trust(&st.trust, &conveyed, correct_actions);
                }
                vec![]
            }
            _ => vec![],
        }
    }
}
