//! TCP server and client. One session per server; each connection gets a
//! reader thread feeding a channel, and the orchestrator owns all state.

use std::collections::BTreeMap;
use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use super::log::SessionLog;
use super::participant::{Participant, ReceiverAgent, SenderAgent};
use super::session::{run_session, SessionConfig};
use super::transport::{Peer, Transport};
use super::wire::{read_frame, write_frame, ErrorCode, MessageBody, ProtocolMessage};
use super::ProtocolError;
use crate::game::Role;

const HELLO_TIMEOUT: Duration = Duration::from_secs(10);
const POLL: Duration = Duration::from_millis(20);

struct Connection {
    writer: TcpStream,
    inbox: Receiver<Result<ProtocolMessage, ProtocolError>>,
    reader: Option<JoinHandle<()>>,
}

impl Connection {
    fn start(stream: TcpStream) -> Result<Self, ProtocolError> {
        stream.set_read_timeout(None)?;
        let mut reading = stream.try_clone()?;
        let (tx, rx) = mpsc::channel();
        let reader = thread::spawn(move || loop {
            let r = read_frame(&mut reading);
            let stop = r.is_err();
            if tx.send(r).is_err() || stop {
                break;
            }
        });
        Ok(Self {
            writer: stream,
            inbox: rx,
            reader: Some(reader),
        })
    }
}

/// Transport over accepted client connections.
pub struct TcpTransport {
    conns: BTreeMap<Peer, Connection>,
}

impl TcpTransport {
    fn close(&mut self) {
        for c in self.conns.values_mut() {
            let _ = c.writer.shutdown(std::net::Shutdown::Both);
            if let Some(h) = c.reader.take() {
                let _ = h.join();
            }
        }
    }
}

impl Transport for TcpTransport {
    fn send(&mut self, to: Peer, msg: &ProtocolMessage) -> Result<(), ProtocolError> {
        let c = self
            .conns
            .get_mut(&to)
            .ok_or_else(|| ProtocolError::Unexpected(format!("no {to} connected")))?;
        write_frame(&mut c.writer, msg).map_err(|e| match e {
            ProtocolError::Io(_) => ProtocolError::Disconnected,
            e => e,
        })
    }

    fn recv(&mut self, from: Peer, timeout: Duration) -> Result<ProtocolMessage, ProtocolError> {
        let c = self
            .conns
            .get(&from)
            .ok_or_else(|| ProtocolError::Unexpected(format!("no {from} connected")))?;
        match c.inbox.recv_timeout(timeout) {
            Ok(Ok(m)) => Ok(m),
            Ok(Err(ProtocolError::Disconnected)) | Err(RecvTimeoutError::Disconnected) => Err(
                ProtocolError::Remote(format!("{from} disconnected")),
            ),
            Ok(Err(e)) => Err(e),
            Err(RecvTimeoutError::Timeout) => Err(ProtocolError::Timeout(from.to_string())),
        }
    }
}

fn reject(stream: &mut TcpStream, role: Role, reason: &str) {
    let m = ProtocolMessage::new(
        "",
        MessageBody::RoleAssign {
            accepted: false,
            role,
            reason: Some(reason.to_owned()),
            setup: None,
        },
    );
    let _ = write_frame(stream, &m);
    let _ = stream.shutdown(std::net::Shutdown::Both);
}

fn send_error(stream: &mut TcpStream, code: ErrorCode, message: String) {
    let m = ProtocolMessage::new("", MessageBody::Error { code, message });
    let _ = write_frame(stream, &m);
    let _ = stream.shutdown(std::net::Shutdown::Both);
}

/// Reads the Hello of a fresh connection; `None` if it was answered and closed.
fn read_hello(stream: &mut TcpStream) -> Option<Role> {
    if stream.set_read_timeout(Some(HELLO_TIMEOUT)).is_err() {
        return None;
    }
    match read_frame(stream) {
        Ok(ProtocolMessage {
            body: MessageBody::Hello { role },
            ..
        }) => Some(role),
        Ok(m) => {
            send_error(stream, ErrorCode::Protocol, format!("expected hello, got {}", m.kind()));
            None
        }
        Err(e @ ProtocolError::VersionMismatch { .. }) => {
            send_error(stream, ErrorCode::VersionMismatch, e.to_string());
            None
        }
        Err(e) => {
            send_error(stream, ErrorCode::Protocol, e.to_string());
            None
        }
    }
}

/// Rejects every connection that arrives after the roles are filled.
fn spawn_rejector(listener: TcpListener, stop: Arc<AtomicBool>) -> JoinHandle<()> {
    thread::spawn(move || {
        if listener.set_nonblocking(true).is_err() {
            return;
        }
        while !stop.load(Ordering::Relaxed) {
            match listener.accept() {
                Ok((mut s, _)) => {
                    let _ = s.set_nonblocking(false);
                    if let Some(role) = read_hello(&mut s) {
                        reject(&mut s, role, "session full: all roles are taken");
                    }
                }
                Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(POLL),
                Err(_) => thread::sleep(POLL),
            }
        }
    })
}

/// Accepts one Receiver and `config.n_senders` Senders, runs the session and
/// returns its log. Surplus or mismatched clients are answered and closed.
pub fn serve(listener: TcpListener, config: &SessionConfig) -> Result<SessionLog, ProtocolError> {
    config.validate()?;
    let mut conns = BTreeMap::new();
    let mut next_sender = 1u8;
    while conns.len() < config.n_senders + 1 {
        let (mut stream, _) = listener.accept()?;
        let _ = stream.set_nodelay(true);
        let Some(role) = read_hello(&mut stream) else {
            continue;
        };
        let peer = match role {
            Role::Receiver if conns.contains_key(&Peer::Receiver) => None,
            Role::Receiver => Some(Peer::Receiver),
            Role::Sender if usize::from(next_sender) > config.n_senders => None,
            Role::Sender => {
                next_sender += 1;
                Some(Peer::Sender(next_sender - 1))
            }
        };
        match peer {
            Some(p) => {
                conns.insert(p, Connection::start(stream)?);
            }
            None => reject(&mut stream, role, &format!("{role:?} role already taken")),
        }
    }
    let stop = Arc::new(AtomicBool::new(false));
    let rejector = spawn_rejector(listener.try_clone()?, stop.clone());
    let mut transport = TcpTransport { conns };
    let log = run_session(config, &mut transport);
    stop.store(true, Ordering::Relaxed);
    let _ = rejector.join();
    transport.close();
    log
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientSummary {
    pub role: Role,
    pub sender_id: Option<u8>,
    pub score: u32,
    pub n_trials: usize,
    pub aborted: Option<String>,
}

fn connect(addr: &str, attempts: u32) -> Result<TcpStream, ProtocolError> {
    let addrs: Vec<SocketAddr> = addr.to_socket_addrs()?.collect();
    let mut last = None;
    for i in 0..attempts.max(1) {
        if i > 0 {
            thread::sleep(Duration::from_millis(100));
        }
        match TcpStream::connect(&addrs[..]) {
            Ok(s) => return Ok(s),
            Err(e) => last = Some(e),
        }
    }
    Err(last
        .map(ProtocolError::Io)
        .unwrap_or_else(|| ProtocolError::Config(format!("{addr} resolves to no address"))))
}

/// Connects as `role`, runs the simulated participant until the session ends.
pub fn run_client(addr: &str, role: Role, connect_attempts: u32) -> Result<ClientSummary, ProtocolError> {
    let mut stream = connect(addr, connect_attempts)?;
    let _ = stream.set_nodelay(true);
    write_frame(&mut stream, &ProtocolMessage::new("", MessageBody::Hello { role }))?;
    let mut agent: Box<dyn Participant> = match role {
        Role::Sender => Box::new(SenderAgent::new(0)),
        Role::Receiver => Box::new(ReceiverAgent::new()),
    };
    let mut sender_id = None;
    loop {
        let m = match read_frame(&mut stream) {
            Ok(m) => m,
            Err(ProtocolError::Disconnected) => {
                return Err(ProtocolError::Remote("server closed the connection".into()))
            }
            Err(e) => return Err(e),
        };
        match &m.body {
            MessageBody::RoleAssign {
                accepted: false,
                reason,
                ..
            } => {
                return Err(ProtocolError::RoleRejected(
                    reason.clone().unwrap_or_else(|| "no reason given".into()),
                ))
            }
            MessageBody::RoleAssign { accepted: true, .. } => sender_id = m.sender_id,
            MessageBody::Error { code, message } => {
                return Err(ProtocolError::Remote(format!("{code:?}: {message}")))
            }
            _ => {}
        }
        for r in agent.on_message(&m) {
            write_frame(&mut stream, &r)?;
        }
        if let MessageBody::SessionEnd {
            score,
            n_trials,
            aborted,
        } = m.body
        {
            return Ok(ClientSummary {
                role,
                sender_id,
                score,
                n_trials,
                aborted,
            });
        }
    }
}
