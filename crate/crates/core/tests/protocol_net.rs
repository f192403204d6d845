use std::io::Write;
use std::net::{TcpListener, TcpStream};
use std::thread;

use brainnet::game::Role;
use brainnet::protocol::net::{run_client, serve};
use brainnet::protocol::{
    read_frame, replay, write_frame, ProtocolMessage, run_session, LocalTransport, MessageBody, ProtocolError, SessionConfig,
};

fn config(seed: u64) -> SessionConfig {
    SessionConfig {
        seed,
        n_trials: 8,
        corruption_count: 5,
        ..SessionConfig::default()
    }
}

fn start_server(cfg: SessionConfig) -> (String, thread::JoinHandle<Result<brainnet::protocol::SessionLog, ProtocolError>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    (addr, thread::spawn(move || serve(listener, &cfg)))
}

#[test]
fn tcp_session_matches_in_process_session() {
    let cfg = config(11);
    let (addr, server) = start_server(cfg.clone());
    let clients: Vec<_> = [Role::Sender, Role::Receiver, Role::Sender]
        .into_iter()
        .map(|role| {
            let a = addr.clone();
            thread::spawn(move || run_client(&a, role, 50))
        })
        .collect();
    let tcp_log = server.join().unwrap().unwrap();
    for c in clients {
        let s = c.join().unwrap().unwrap();
        assert!(s.aborted.is_none());
        assert_eq!(s.n_trials, 8);
    }
    let local = run_session(&cfg, &mut LocalTransport::new(2)).unwrap();
    assert!(tcp_log.is_complete());
    assert_eq!(tcp_log.decision_sequence(), local.decision_sequence());
    assert!(replay(&tcp_log).passed());
}

#[test]
fn fourth_client_and_wrong_version_are_rejected() {
    let (addr, server) = start_server(config(12));
    // wrong version before any role is taken
    let mut raw = TcpStream::connect(&addr).unwrap();
    let payload = br#"{"version":9,"kind":"hello","payload":{"role":"sender"},"session_id":"","trial_index":0,"round":0,"timestamp":0}"#;
    raw.write_all(&(payload.len() as u32).to_be_bytes()).unwrap();
    raw.write_all(payload).unwrap();
    match read_frame(&mut raw).unwrap().body {
        MessageBody::Error { message, .. } => assert!(message.contains("version"), "{message}"),
        b => panic!("{b:?}"),
    }
    assert!(matches!(read_frame(&mut raw), Err(ProtocolError::Disconnected)));

    // three silent clients fill the roles and stall the session
    let silent: Vec<TcpStream> = [Role::Sender, Role::Sender, Role::Receiver]
        .into_iter()
        .map(|role| {
            let mut s = TcpStream::connect(&addr).unwrap();
            write_frame(&mut s, &ProtocolMessage::new("", MessageBody::Hello { role })).unwrap();
            s
        })
        .collect();
    let extra = run_client(&addr, Role::Sender, 50);
    assert!(matches!(extra, Err(ProtocolError::RoleRejected(_))), "{extra:?}");
    let extra = run_client(&addr, Role::Receiver, 50);
    assert!(matches!(extra, Err(ProtocolError::RoleRejected(_))), "{extra:?}");
    drop(silent);
    let log = server.join().unwrap().unwrap();
    assert!(log.is_aborted());
}

#[test]
fn refused_connection_is_reported() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    drop(listener);
    assert!(matches!(run_client(&addr, Role::Sender, 2), Err(ProtocolError::Io(_))));
}
