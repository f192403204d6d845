//! Wire protocol, session orchestration and the transports that carry it.

mod clock;
mod corruption;
mod log;
pub mod net;
mod participant;
mod session;
mod transport;
mod wire;

use thiserror::Error;

pub use clock::{advance_clock, secs, ClockMode, SessionClock};
pub use corruption::{corrupt, plan_corruption, BadSender, CorruptionPlan};
pub use log::{
    read_log, replay, write_log, LogError, LogRecord, ReplayVerdict, RoundRecord, SenderRound,
    SequenceEntry, SessionEnd, SessionHeader, SessionLog, StimEvent, TrialRecord, LOG_SCHEMA,
    LOG_VERSION,
};
pub use participant::{Participant, ReceiverAgent, SenderAgent};
pub use session::{run_session, SessionConfig};
pub use transport::{LocalTransport, Peer, Transport};
pub use wire::{
    decode, decode_payload, encode, encode_payload, read_frame, write_frame, Calibration,
    DecisionReport, ErrorCode, IntensityClass, MessageBody, ParticipantSetup, ProtocolMessage,
    MAX_FRAME_LEN, MESSAGE_KINDS, PROTOCOL_VERSION,
};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("protocol version mismatch: expected {expected}, got {got}")]
    VersionMismatch { expected: u32, got: u64 },
    #[error("unknown message kind {0:?}")]
    UnknownKind(String),
    #[error("truncated frame: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
    #[error("frame of {0} bytes exceeds the 1 MiB limit")]
    FrameTooLarge(usize),
    #[error("peer disconnected")]
    Disconnected,
    #[error("timed out waiting for {0}")]
    Timeout(String),
    #[error("unexpected message: {0}")]
    Unexpected(String),
    #[error("role rejected: {0}")]
    RoleRejected(String),
    #[error("peer reported error: {0}")]
    Remote(String),
    #[error(transparent)]
    Game(#[from] crate::game::GameError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
