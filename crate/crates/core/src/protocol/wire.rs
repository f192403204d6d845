//! Message schema and framing.
//!
//! A frame is a 4-byte big-endian payload length followed by the payload. The
//! payload is a canonical JSON object: fields appear in declaration order,
//! absent optionals are omitted, floats use the shortest round-trip form, and
//! there is no whitespace. Equal messages therefore encode to identical bytes.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

use super::ProtocolError;
use crate::agents::{AgentParams, StimLevels};
use crate::game::{Decision, Role, ViewModel};
use crate::signal::{PipelineParams, Ssvep};

pub const PROTOCOL_VERSION: u32 = 1;
pub const MAX_FRAME_LEN: usize = 1 << 20;

pub const MESSAGE_KINDS: [&str; 8] = [
    "hello",
    "role_assign",
    "state_push",
    "decision_submit",
    "stim_deliver",
    "feedback_push",
    "session_end",
    "error",
];

/// Stimulation intensity class: above threshold encodes "rotate".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntensityClass {
    AboveThreshold,
    BelowThreshold,
}

impl IntensityClass {
    pub fn for_decision(d: Decision) -> Self {
        match d {
            Decision::Rotate => IntensityClass::AboveThreshold,
            Decision::NoRotate => IntensityClass::BelowThreshold,
        }
    }
}

/// Everything a participant process needs to behave deterministically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantSetup {
    pub seed: u64,
    pub n_senders: usize,
    pub decision_window_s: f64,
    pub agents: AgentParams,
    pub signal: PipelineParams,
}

/// Diagnostics riding along with a decision; none of it affects the game.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecisionReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attended: Option<Ssvep>,
    pub f17_votes: usize,
    pub f15_votes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latched_after: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub percepts: Vec<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trust: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<Calibration>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub threshold: f64,
    pub levels: StimLevels,
    pub pest_trials: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    VersionMismatch,
    RoleTaken,
    Protocol,
    Calibration,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum MessageBody {
    Hello {
        role: Role,
    },
    RoleAssign {
        accepted: bool,
        role: Role,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reason: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        setup: Option<ParticipantSetup>,
    },
    StatePush {
        view: ViewModel,
    },
    DecisionSubmit {
        decision: Decision,
        report: DecisionReport,
    },
    StimDeliver {
        intensity: IntensityClass,
        prompt: String,
    },
    FeedbackPush {
        view: ViewModel,
        outcome: bool,
        correct_actions: Vec<Decision>,
    },
    SessionEnd {
        score: u32,
        n_trials: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        aborted: Option<String>,
    },
    Error {
        code: ErrorCode,
        message: String,
    },
}

impl MessageBody {
    pub fn kind(&self) -> &'static str {
        match self {
            MessageBody::Hello { .. } => "hello",
            MessageBody::RoleAssign { .. } => "role_assign",
            MessageBody::StatePush { .. } => "state_push",
            MessageBody::DecisionSubmit { .. } => "decision_submit",
            MessageBody::StimDeliver { .. } => "stim_deliver",
            MessageBody::FeedbackPush { .. } => "feedback_push",
            MessageBody::SessionEnd { .. } => "session_end",
            MessageBody::Error { .. } => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolMessage {
    pub version: u32,
    #[serde(flatten)]
    pub body: MessageBody,
    pub session_id: String,
    pub trial_index: usize,
    pub round: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sender_id: Option<u8>,
    /// Session clock in milliseconds.
    pub timestamp: u64,
}

impl ProtocolMessage {
    pub fn new(session_id: &str, body: MessageBody) -> Self {
        Self {
            version: PROTOCOL_VERSION,
            body,
            session_id: session_id.to_owned(),
            trial_index: 0,
            round: 0,
            sender_id: None,
            timestamp: 0,
        }
    }

    pub fn at(mut self, trial_index: usize, round: u8, timestamp: u64) -> Self {
        self.trial_index = trial_index;
        self.round = round;
        self.timestamp = timestamp;
        self
    }

    pub fn from_sender(mut self, sender_id: u8) -> Self {
        self.sender_id = Some(sender_id);
        self
    }

    pub fn kind(&self) -> &'static str {
        self.body.kind()
    }
}

/// Payload bytes (no length prefix).
pub fn encode_payload(m: &ProtocolMessage) -> Vec<u8> {
    serde_json::to_vec(m).expect("protocol messages always serialize")
}

pub fn decode_payload(bytes: &[u8]) -> Result<ProtocolMessage, ProtocolError> {
    let value: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
    let version = value
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| ProtocolError::Malformed("missing version".into()))?;
    if version != u64::from(PROTOCOL_VERSION) {
        return Err(ProtocolError::VersionMismatch {
            expected: PROTOCOL_VERSION,
            got: version,
        });
    }
    let kind = value
        .get("kind")
        .and_then(|v| v.as_str())
        .ok_or_else(|| ProtocolError::Malformed("missing kind".into()))?;
    if !MESSAGE_KINDS.contains(&kind) {
        return Err(ProtocolError::UnknownKind(kind.to_owned()));
    }
    serde_json::from_value(value).map_err(|e| ProtocolError::Malformed(e.to_string()))
}

/// Length-prefixed frame.
pub fn encode(m: &ProtocolMessage) -> Vec<u8> {
    let payload = encode_payload(m);
    let mut frame = Vec::with_capacity(payload.len() + 4);
    frame.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    frame.extend_from_slice(&payload);
    frame
}

fn declared_len(prefix: [u8; 4]) -> Result<usize, ProtocolError> {
    let len = u32::from_be_bytes(prefix) as usize;
    if len > MAX_FRAME_LEN {
        return Err(ProtocolError::FrameTooLarge(len));
    }
    Ok(len)
}

/// Decodes exactly one complete frame.
pub fn decode(frame: &[u8]) -> Result<ProtocolMessage, ProtocolError> {
    let prefix: [u8; 4] = frame
        .get(..4)
        .and_then(|p| p.try_into().ok())
        .ok_or(ProtocolError::Truncated {
            expected: 4,
            got: frame.len(),
        })?;
    let len = declared_len(prefix)?;
    let body = &frame[4..];
    if body.len() < len {
        return Err(ProtocolError::Truncated {
            expected: len,
            got: body.len(),
        });
    }
    if body.len() > len {
        return Err(ProtocolError::Malformed(format!(
            "{} trailing bytes after frame",
            body.len() - len
        )));
    }
    decode_payload(body)
}

pub fn write_frame<W: Write>(w: &mut W, m: &ProtocolMessage) -> Result<(), ProtocolError> {
    w.write_all(&encode(m))?;
    w.flush()?;
    Ok(())
}

/// Reads one frame. A clean EOF before any byte yields `Disconnected`.
pub fn read_frame<R: Read>(r: &mut R) -> Result<ProtocolMessage, ProtocolError> {
    let mut prefix = [0u8; 4];
    let mut filled = 0;
    while filled < 4 {
        match r.read(&mut prefix[filled..]) {
            Ok(0) if filled == 0 => return Err(ProtocolError::Disconnected),
            Ok(0) => {
                return Err(ProtocolError::Truncated {
                    expected: 4,
                    got: filled,
                })
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let len = declared_len(prefix)?;
    let mut body = vec![0u8; len];
    r.read_exact(&mut body).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => ProtocolError::Truncated {
            expected: len,
            got: 0,
        },
        _ => e.into(),
    })?;
    decode_payload(&body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{render_view, TrialState, SHAPE_CATALOG};

    fn sample(body: MessageBody) -> ProtocolMessage {
        ProtocolMessage::new("s1", body).at(3, 2, 12_000)
    }

    pub(crate) fn all_kinds() -> Vec<ProtocolMessage> {
        let st = TrialState::new(3, SHAPE_CATALOG[2], 1, true);
        vec![
            sample(MessageBody::Hello { role: Role::Sender }),
            sample(MessageBody::RoleAssign {
                accepted: true,
                role: Role::Receiver,
                reason: None,
                setup: Some(ParticipantSetup {
                    seed: 99,
                    n_senders: 2,
                    decision_window_s: 10.0,
                    agents: AgentParams::default(),
                    signal: PipelineParams::default(),
                }),
            }),
            sample(MessageBody::StatePush {
                view: render_view(&st, Role::Sender),
            }),
            sample(MessageBody::DecisionSubmit {
                decision: Decision::Rotate,
                report: DecisionReport {
                    attended: Some(Ssvep::F17),
                    f17_votes: 10,
                    trust: vec![0.1 + 0.2, 1.0 / 3.0],
                    ..Default::default()
                },
            })
            .from_sender(1),
            sample(MessageBody::StimDeliver {
                intensity: IntensityClass::AboveThreshold,
                prompt: "Sender 2".into(),
            })
            .from_sender(2),
            sample(MessageBody::FeedbackPush {
                view: render_view(&st, Role::Receiver),
                outcome: true,
                correct_actions: vec![Decision::Rotate, Decision::NoRotate],
            }),
            sample(MessageBody::SessionEnd {
                score: 13,
                n_trials: 16,
                aborted: None,
            }),
            sample(MessageBody::Error {
                code: ErrorCode::RoleTaken,
                message: "full".into(),
            }),
        ]
    }

    #[test]
    fn roundtrip_every_kind() {
        let msgs = all_kinds();
        let kinds: Vec<_> = msgs.iter().map(|m| m.kind()).collect();
        assert_eq!(kinds, MESSAGE_KINDS);
        for m in msgs {
            let frame = encode(&m);
            assert_eq!(decode(&frame).unwrap(), m);
            assert_eq!(
                u32::from_be_bytes(frame[..4].try_into().unwrap()) as usize,
                frame.len() - 4
            );
        }
    }

    #[test]
    fn equal_messages_encode_identically() {
        for (a, b) in all_kinds().iter().zip(all_kinds().iter()) {
            assert_eq!(encode(a), encode(b));
            // re-encoding a decoded message is stable
            assert_eq!(encode(&decode(&encode(a)).unwrap()), encode(a));
        }
    }

    #[test]
    fn canonical_field_order() {
        let m = &all_kinds()[4];
        let text = String::from_utf8(encode_payload(m)).unwrap();
        assert!(text.starts_with(r#"{"version":1,"kind":"stim_deliver","payload":{"#));
        assert!(text.ends_with(r#""session_id":"s1","trial_index":3,"round":2,"sender_id":2,"timestamp":12000}"#));
    }

    #[test]
    fn truncated_frames_are_rejected() {
        let frame = encode(&all_kinds()[0]);
        assert!(matches!(decode(&frame[..2]), Err(ProtocolError::Truncated { .. })));
        assert!(matches!(
            decode(&frame[..frame.len() - 1]),
            Err(ProtocolError::Truncated { .. })
        ));
        let mut cursor = &frame[..frame.len() - 3];
        assert!(matches!(read_frame(&mut cursor), Err(ProtocolError::Truncated { .. })));
    }

    #[test]
    fn oversized_frames_are_rejected() {
        let mut frame = ((MAX_FRAME_LEN + 1) as u32).to_be_bytes().to_vec();
        frame.extend_from_slice(b"{}");
        assert!(matches!(decode(&frame), Err(ProtocolError::FrameTooLarge(_))));
        let mut cursor = &frame[..];
        assert!(matches!(read_frame(&mut cursor), Err(ProtocolError::FrameTooLarge(_))));
    }

    #[test]
    fn unknown_kind_and_version() {
        let bad_kind = br#"{"version":1,"kind":"teleport","payload":{},"session_id":"s","trial_index":0,"round":0,"timestamp":0}"#;
        assert!(matches!(
            decode_payload(bad_kind),
            Err(ProtocolError::UnknownKind(k)) if k == "teleport"
        ));
        let bad_version = br#"{"version":7,"kind":"hello","payload":{"role":"sender"},"session_id":"s","trial_index":0,"round":0,"timestamp":0}"#;
        assert!(matches!(
            decode_payload(bad_version),
            Err(ProtocolError::VersionMismatch { got: 7, .. })
        ));
    }

    #[test]
    fn stream_of_frames() {
        let mut buf = Vec::new();
        for m in all_kinds() {
            write_frame(&mut buf, &m).unwrap();
        }
        let mut r = &buf[..];
        for m in all_kinds() {
            assert_eq!(read_frame(&mut r).unwrap(), m);
        }
        assert!(matches!(read_frame(&mut r), Err(ProtocolError::Disconnected)));
    }
}
