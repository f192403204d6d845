//! Acceptance run: one line per criterion, nonzero exit if any fails.

use std::io::{BufRead, BufReader};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use brainnet::agents::{derive_stim_levels, pest_calibrate, PestConfig, PhospheneModel, StimSearchConfig};
use brainnet::analysis::{
    mi_bias, mutual_information, report, sender_ids, wilcoxon_rank_sum, wilcoxon_signed_rank,
    Alternative, ExclusionMask, JointCounts,
};
use brainnet::harness::{read_log_file, simulate_campaign, triad_seed, HarnessConfig};
use brainnet::protocol::{replay, run_session, LocalTransport, SessionConfig};
use brainnet::rng::rng_from_seed;
use brainnet::signal::{
    design_filter, synthesize_eeg, FilterSpec, Ssvep, SsvepDecoder, SsvepParams, WelchConfig, SENDER_FS,
};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within_budget(o: Outcome, started: Instant, budget: Duration) -> Outcome {
    let took = started.elapsed();
    let detail = format!("{} [{:.2}s, budget {}s]", o.detail, took.as_secs_f64(), budget.as_secs());
    outcome(o.pass && took <= budget, detail)
}

fn exact_rank_anchors() -> Outcome {
    let v = wilcoxon_signed_rank(&[0.12, 0.31, 0.05, 0.44, 0.2], 0.0, Alternative::Greater).unwrap();
    let w = wilcoxon_rank_sum(&[6.0, 7.0, 8.0, 9.0, 10.0], &[1.0, 2.0, 3.0, 4.0, 5.0], Alternative::TwoSided)
        .unwrap();
    let pass = v.statistic == 15.0
        && (v.p - 0.03125).abs() <= 1e-9
        && w.statistic == 25.0
        && (w.p - 2.0 / 252.0).abs() <= 1e-9;
    outcome(pass, format!("V={} p={:.6}; W={} p={:.6}", v.statistic, v.p, w.statistic, w.p))
}

fn bias_anchor() -> Outcome {
    let b = mi_bias(2, 32).unwrap();
    outcome((b + 0.045).abs() <= 0.0005, format!("b={b:.5}"))
}

fn mi_oracle(n: [[u64; 2]; 2]) -> f64 {
    let t = n.iter().flatten().sum::<u64>() as f64;
    let mut mi = 0.0;
    for r in 0..2 {
        for s in 0..2 {
            let p = n[r][s] as f64 / t;
            if p > 0.0 {
                let pr = (n[r][0] + n[r][1]) as f64 / t;
                let ps = (n[0][s] + n[1][s]) as f64 / t;
                mi += p * (p / (pr * ps)).log2();
            }
        }
    }
    mi
}

fn mi_endpoints() -> Outcome {
    let perfect = mutual_information(&JointCounts { n: [[16, 0], [0, 16]] }).unwrap();
    let independent = mutual_information(&JointCounts { n: [[8, 8], [8, 8]] }).unwrap();
    let mut rng = rng_from_seed(3);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let mut n = [[0u64; 2]; 2];
        for c in n.iter_mut().flatten() {
            *c = rng.random_range(0..200);
        }
        n[0][0] += 1;
        let got = mutual_information(&JointCounts { n }).unwrap();
        worst = worst.max((got - mi_oracle(n).max(0.0)).abs());
    }
    let pass = (perfect - 1.0).abs() <= 1e-12 && independent.abs() <= 1e-12 && worst <= 1e-12;
    outcome(pass, format!("perfect={perfect} independent={independent} max oracle diff={worst:.2e}"))
}

fn decode_rate(target_amp: f64, runs: u64) -> f64 {
    let dec = SsvepDecoder::new(SENDER_FS, &WelchConfig::default(), 0.1).unwrap();
    let params = SsvepParams {
        target_amp,
        distractor_amp: 0.0,
        noise_amp: 1.0,
        ..SsvepParams::default()
    };
    let mut ok = 0;
    for i in 0..runs {
        let target = if i % 2 == 0 { Ssvep::F17 } else { Ssvep::F15 };
        let eeg = synthesize_eeg(target, 10.0, SENDER_FS, &params, &mut rng_from_seed(100_000 + i)).unwrap();
        ok += usize::from(dec.decode(&eeg).unwrap().decision == target.decision());
    }
    ok as f64 / runs as f64
}

fn dsp_pipeline() -> Outcome {
    let strong = decode_rate(2.0, 1000);
    let chance = decode_rate(0.0, 1000);
    let f = design_filter(FilterSpec::lowpass_30hz(SENDER_FS)).unwrap();
    let db = 20.0 * f.magnitude(30.0).log10();
    let pass = strong >= 0.95 && (chance - 0.5).abs() <= 0.05 && (db + 3.01).abs() <= 0.1;
    outcome(pass, format!("ratio 2: {strong:.3}; zero target: {chance:.3}; 30 Hz: {db:.3} dB"))
}

fn campaign_properties() -> Outcome {
    let campaigns = 100u64;
    let (mut acc, mut mi, mut beta, mut corr) = (0, 0, 0, 0);
    for master in 1..=campaigns {
        let config = HarnessConfig {
            master_seed: master,
            ..HarnessConfig::default()
        };
        let logs = simulate_campaign(&config).unwrap();
        let r = report(&logs, &ExclusionMask::default()).unwrap();
        acc += usize::from(r.accuracy.mean > 0.5 && r.accuracy.binomial_p < 0.01);
        if let (Some(g), Some(b)) = (r.mi.good.mean, r.mi.bad.mean) {
            mi += usize::from(g > b);
        }
        let z_pos = |d: Option<brainnet::analysis::SlopeDifference>| usize::from(d.is_some_and(|d| d.z > 0.0));
        beta += z_pos(r.learning.beta.difference);
        corr += z_pos(r.learning.correlation.difference);
    }
    let n = campaigns as usize;
    let pass = acc * 100 >= 95 * n && mi * 100 >= 90 * n && beta * 100 >= 90 * n && corr * 100 >= 90 * n;
    outcome(
        pass,
        format!("binomial {acc}/{n} (need 95%), MI good>bad {mi}/{n}, Z beta>0 {beta}/{n}, Z corr>0 {corr}/{n} (need 90%)"),
    )
}

/// Wrong conveyed rounds of (victim, other sender) in one session.
fn wrong_rounds(config: &SessionConfig) -> (usize, usize) {
    let log = run_session(config, &mut LocalTransport::new(2)).unwrap();
    let (good, bad) = sender_ids(&log).unwrap();
    let (mut victim, mut other) = (0, 0);
    for r in log.rounds() {
        victim += usize::from(r.sender(bad).unwrap().conveyed != r.correct_action);
        other += usize::from(r.sender(good).unwrap().conveyed != r.correct_action);
    }
    (victim, other)
}

fn corruption_accounting() -> Outcome {
    let mut failures = Vec::new();
    let mut noisy_slips = 0;
    for seed in 0..100u64 {
        // no attention slips and a clean Sender EEG channel, so no decode slips either
        let mut config = SessionConfig {
            seed,
            ..SessionConfig::default()
        };
        config.agents.sender.attention_error_rate = 0.0;
        let noisy = config.clone();
        config.signal.sender_ssvep.noise_amp = 0.0;
        config.signal.sender_ssvep.distractor_amp = 0.0;
        let (victim, other) = wrong_rounds(&config);
        if victim != 20 || other != 0 {
            failures.push(format!("seed {seed}: victim {victim}, other {other}"));
        }
        noisy_slips += wrong_rounds(&noisy).1;
    }
    let detail = if failures.is_empty() {
        "100/100 logs: victim wrong in 20 rounds, other sender never".to_owned()
    } else {
        format!("{} logs off: {}", failures.len(), failures.join("; "))
    };
    let detail = format!("{detail} (default EEG noise: {noisy_slips} decode slips over 3200 rounds)");
    outcome(failures.is_empty(), detail)
}

fn transport_equivalence() -> Outcome {
    let dir = tempfile::TempDir::new().unwrap();
    let tcp_path = dir.path().join("tcp.jsonl");
    let bin = env!("CARGO_BIN_EXE_brainnet");
    let mut server = Command::new(bin)
        .args(["serve", "--host", "127.0.0.1", "--port", "0", "--log", tcp_path.to_str().unwrap()])
        .env_remove("BRAINNET_PORT")
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(server.stderr.take().unwrap()).lines();
    let addr = loop {
        match lines.next() {
            Some(Ok(l)) => {
                if let Some(a) = l.strip_prefix("listening on ") {
                    break a.to_owned();
                }
            }
            _ => return outcome(false, "server exited before listening".into()),
        }
    };
    // drain the rest so the server never blocks on stderr
    std::thread::spawn(move || lines.for_each(drop));
    let clients: Vec<_> = ["sender", "sender", "receiver"]
        .iter()
        .map(|role| {
            Command::new(bin)
                .args(["client", "--role", role, "--connect", &addr])
                .stdout(Stdio::null())
                .stderr(Stdio::null())
                .spawn()
                .unwrap()
        })
        .collect();
    let mut codes: Vec<Option<i32>> = clients.into_iter().map(|mut c| c.wait().unwrap().code()).collect();
    codes.push(server.wait().unwrap().code());
    if codes.iter().any(|c| *c != Some(0)) {
        return outcome(false, format!("process exit codes {codes:?}"));
    }
    let tcp = read_log_file(&tcp_path).unwrap();
    let session = SessionConfig {
        seed: triad_seed(HarnessConfig::default().master_seed, 0),
        ..SessionConfig::default()
    };
    let local = run_session(&session, &mut LocalTransport::new(2)).unwrap();
    let (a, b) = (tcp.decision_sequence(), local.decision_sequence());
    let (va, vb) = (replay(&tcp), replay(&local));
    let pass = !a.is_empty() && a == b && va.passed() && vb.passed();
    outcome(pass, format!("{} decisions, equal={}, replay tcp {va}, local {vb}", a.len(), a == b))
}

fn pest_calibration() -> Outcome {
    let model = PhospheneModel::default();
    let (mut within, mut ordered) = (0, 0);
    let runs = 500;
    for seed in 0..runs {
        let mut rng = rng_from_seed(seed);
        let Ok(r) = pest_calibrate(&model, &PestConfig::default(), &mut rng) else {
            continue;
        };
        within += usize::from((r.threshold - model.true_threshold).abs() <= 0.05);
        if let Ok(s) = derive_stim_levels(r.threshold, &model, &StimSearchConfig::default(), &mut rng) {
            ordered += usize::from(s.no_intensity < r.threshold && r.threshold < s.yes_intensity);
        }
    }
    let n = runs as usize;
    outcome(
        within * 100 >= 95 * n && ordered == n,
        format!("within 0.05: {within}/{n}; ordered stim levels: {ordered}/{n}"),
    )
}

fn full_simulation() -> Outcome {
    let t0 = Instant::now();
    let logs = simulate_campaign(&HarnessConfig::default()).unwrap();
    let wall = t0.elapsed();
    let min_virtual_ms = 16 * 2 * 8 * 1000;
    let covered = logs.iter().all(|l| l.end().is_some_and(|e| e.end_tick >= min_virtual_ms));
    let complete = logs.len() == 5 && logs.iter().all(|l| l.is_complete());
    let virtual_s = logs[0].end().map_or(0, |e| e.end_tick) / 1000;
    outcome(
        covered && complete && wall < Duration::from_secs(10),
        format!("5 triads in {:.2}s wall, {virtual_s}s virtual per session", wall.as_secs_f64()),
    )
}

fn main() {
    let criteria: [(u32, fn() -> Outcome, u64); 9] = [
        (1, exact_rank_anchors, 1),
        (2, bias_anchor, 1),
        (3, mi_endpoints, 5),
        (4, dsp_pipeline, 60),
        (5, campaign_properties, 300),
        (6, corruption_accounting, 60),
        (7, transport_equivalence, 30),
        (8, pest_calibration, 10),
        (9, full_simulation, 10),
    ];
    let mut failed = 0;
    for (id, check, budget) in criteria {
        let t0 = Instant::now();
        let o = within_budget(check(), t0, Duration::from_secs(budget));
        println!("criterion {id}: {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
