use std::collections::VecDeque;
use std::time::Duration;

use super::participant::{Participant, ReceiverAgent, SenderAgent};
use super::wire::{decode, encode, ProtocolMessage};
use super::ProtocolError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Peer {
    Sender(u8),
    Receiver,
}

impl std::fmt::Display for Peer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Peer::Sender(i) => write!(f, "sender {i}"),
            Peer::Receiver => f.write_str("receiver"),
        }
    }
}

/// Message delivery between the orchestrator and its participants.
pub trait Transport {
    fn send(&mut self, to: Peer, msg: &ProtocolMessage) -> Result<(), ProtocolError>;
    /// Next message from `from`, in arrival order.
    fn recv(&mut self, from: Peer, timeout: Duration) -> Result<ProtocolMessage, ProtocolError>;
}

struct Slot {
    peer: Peer,
    agent: Box<dyn Participant>,
    outbox: VecDeque<ProtocolMessage>,
}

/// In-process participants. Every message passes through the frame codec so
/// agents see exactly what they would see over TCP.
pub struct LocalTransport {
    slots: Vec<Slot>,
}

impl LocalTransport {
    pub fn new(n_senders: u8) -> Self {
        let mut slots: Vec<Slot> = (1..=n_senders)
            .map(|i| Slot {
                peer: Peer::Sender(i),
                agent: Box::new(SenderAgent::new(i)),
                outbox: VecDeque::new(),
            })
            .collect();
        slots.push(Slot {
            peer: Peer::Receiver,
            agent: Box::new(ReceiverAgent::new()),
            outbox: VecDeque::new(),
        });
        Self { slots }
    }

    pub fn with_agents(agents: Vec<(Peer, Box<dyn Participant>)>) -> Self {
        Self {
            slots: agents
                .into_iter()
                .map(|(peer, agent)| Slot {
                    peer,
                    agent,
                    outbox: VecDeque::new(),
                })
                .collect(),
        }
    }

    fn slot(&mut self, peer: Peer) -> Result<&mut Slot, ProtocolError> {
        self.slots
            .iter_mut()
            .find(|s| s.peer == peer)
            .ok_or_else(|| ProtocolError::Unexpected(format!("no {peer} connected")))
    }
}

impl Transport for LocalTransport {
    fn send(&mut self, to: Peer, msg: &ProtocolMessage) -> Result<(), ProtocolError> {
        let slot = self.slot(to)?;
        let msg = decode(&encode(msg))?;
        for r in slot.agent.on_message(&msg) {
            slot.outbox.push_back(decode(&encode(&r))?);
        }
        Ok(())
    }

    fn recv(&mut self, from: Peer, _timeout: Duration) -> Result<ProtocolMessage, ProtocolError> {
        // replies are produced synchronously, so an empty outbox can never fill
        self.slot(from)?
            .outbox
            .pop_front()
            .ok_or_else(|| ProtocolError::Timeout(from.to_string()))
    }
}
