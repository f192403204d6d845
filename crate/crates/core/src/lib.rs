//! Desk-scale simulator of a three-person brain-to-brain interface.
//!
//! Two simulated Senders watch a block-rotation game and convey rotate /
//! do-not-rotate decisions through synthetic SSVEP EEG; a server forwards
//! them as above- or below-threshold stimulation to a simulated Receiver, who
//! perceives phosphenes, learns which Sender to trust and plays the game.

pub mod game;
pub mod rng;
pub mod signal;
pub mod agents;
pub mod protocol;
pub mod analysis;
pub mod harness;
