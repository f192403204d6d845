use brainnet::protocol::{
    read_log, replay, run_session, write_log, BadSender, ClockMode, LocalTransport, LogRecord,
    ReplayVerdict, SessionConfig,
};

fn run(config: &SessionConfig) -> brainnet::protocol::SessionLog {
    let mut t = LocalTransport::new(config.n_senders as u8);
    run_session(config, &mut t).unwrap()
}

fn seeded(seed: u64) -> SessionConfig {
    SessionConfig {
        seed,
        ..SessionConfig::default()
    }
}

#[test]
fn default_session_has_64_stimulations_and_passes_replay() {
    let log = run(&seeded(1));
    assert!(log.is_complete(), "{:?}", log.end());
    assert_eq!(log.trials().count(), 16);
    assert_eq!(log.rounds().count(), 32);
    assert_eq!(log.rounds().map(|r| r.stims.len()).sum::<usize>(), 64);
    assert!(log.calibration().is_some());
    assert!(log.is_monotone());
    assert_eq!(replay(&log), ReplayVerdict::Pass { trials: 16 });
}

#[test]
fn stimulations_are_eight_seconds_apart_in_sender_order() {
    let log = run(&seeded(2));
    for r in log.rounds() {
        let ids: Vec<u8> = r.stims.iter().map(|s| s.sender_id).collect();
        assert_eq!(ids, [1, 2]);
        assert_eq!(r.stims[1].tick - r.stims[0].tick, 8000);
        let last_submit = r.senders.iter().map(|s| s.submitted_at).max().unwrap();
        assert!(last_submit <= r.stims[0].tick);
        assert!(r.stims[1].tick <= r.decided_at);
        assert_eq!(r.percepts.len(), 2);
        assert_eq!(r.trust.len(), 2);
    }
}

#[test]
fn session_time_covers_all_configured_durations() {
    let log = run(&seeded(3));
    let end = log.end().unwrap().end_tick;
    assert!(end >= 16 * 2 * (8_000 + 10_000), "{end}");
}

#[test]
fn same_seed_same_decisions() {
    let a = run(&seeded(4));
    let b = run(&seeded(4));
    assert_eq!(a.decision_sequence(), b.decision_sequence());
    assert_eq!(a, b);
    let c = run(&seeded(5));
    assert_ne!(a.decision_sequence(), c.decision_sequence());
}

#[test]
fn victim_conveys_wrong_answers_in_planned_trials() {
    let mut cfg = seeded(6);
    cfg.agents.sender.attention_error_rate = 0.0;
    cfg.bad_sender = BadSender::Sender2;
    let log = run(&cfg);
    let plan = &log.header().unwrap().plan;
    assert_eq!(plan.victim, 2);
    for r in log.rounds() {
        let v = r.sender(2).unwrap();
        assert_eq!(v.conveyed != r.correct_action, plan.corrupted_trials.contains(&r.trial_index));
        assert_eq!(r.sender(1).unwrap().conveyed, r.sender(1).unwrap().submitted);
    }
}

#[test]
fn log_roundtrips_through_text() {
    let log = run(&seeded(7));
    let mut buf = Vec::new();
    write_log(&mut buf, &log).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.lines().next().unwrap().contains("\"schema\":\"brainnet.session-log\""));
    let back = read_log(&buf[..]).unwrap();
    assert_eq!(back, log);
}

#[test]
fn flipped_outcome_fails_replay_naming_trial() {
    let mut log = run(&seeded(8));
    for r in log.records.iter_mut() {
        if let LogRecord::Trial(t) = r {
            if t.trial_index == 5 {
                t.outcome = !t.outcome;
            }
        }
    }
    match replay(&log) {
        ReplayVerdict::Fail { trial_index, .. } => assert_eq!(trial_index, Some(5)),
        v => panic!("{v:?}"),
    }
}

#[test]
fn bad_config_is_rejected() {
    let mut cfg = seeded(1);
    cfg.corruption_count = 17;
    let mut t = LocalTransport::new(2);
    assert!(run_session(&cfg, &mut t).is_err());
    cfg = seeded(1);
    cfg.n_senders = 3;
    assert!(run_session(&cfg, &mut LocalTransport::new(3)).is_err());
}

#[test]
fn missing_participant_aborts_with_partial_log() {
    let mut t = LocalTransport::with_agents(vec![]);
    let log = run_session(&seeded(1), &mut t).unwrap();
    assert!(log.is_aborted());
    assert!(log.end().unwrap().aborted.as_deref().unwrap().contains("sender 1"));
}

#[test]
fn realtime_clock_mode_is_configurable() {
    let cfg = SessionConfig {
        clock: ClockMode::Realtime,
        ..seeded(1)
    };
    assert!(cfg.validate().is_ok());
}
