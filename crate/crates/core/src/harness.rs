//! Command-line glue: configuration, seed fan-out, campaign runs, TCP
//! serve/client, analysis and replay.

use std::fs;
use std::io::{BufReader, BufWriter};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{self, AnalysisError, ExclusionMask};
use crate::game::Role;
use crate::protocol::{
    self, net, read_log, replay, run_session, write_log, ClockMode, LocalTransport, LogError,
    ProtocolError, ReplayVerdict, SessionConfig, SessionLog,
};
use crate::rng::derive_seed;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PROTOCOL: i32 = 3;
pub const EXIT_ANALYSIS: i32 = 4;
pub const EXIT_IO: i32 = 5;
pub const EXIT_REPLAY_FAIL: i32 = 6;

pub const DEFAULT_PORT: u16 = 7878;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("protocol error: {0}")]
    Protocol(#[from] ProtocolError),
    #[error("analysis error: {0}")]
    Analysis(#[from] AnalysisError),
    #[error("{path}: {source}")]
    Log { path: PathBuf, source: LogError },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("replay failed: {0}")]
    ReplayFailed(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => EXIT_CONFIG,
            HarnessError::Protocol(ProtocolError::Config(_)) => EXIT_CONFIG,
            HarnessError::Protocol(_) => EXIT_PROTOCOL,
            HarnessError::Analysis(_) | HarnessError::Log { .. } => EXIT_ANALYSIS,
            HarnessError::Io { .. } => EXIT_IO,
            HarnessError::ReplayFailed(_) => EXIT_REPLAY_FAIL,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_owned(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub log_dir: PathBuf,
    pub report: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            log_dir: PathBuf::from("logs"),
            report: PathBuf::from("report/report.json"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub host: String,
    pub port: u16,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: DEFAULT_PORT,
        }
    }
}

/// Everything a run needs. `session.seed` is ignored: each session's seed is
/// derived from `master_seed` and the triad index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub master_seed: u64,
    pub triads: usize,
    pub session: SessionConfig,
    pub server: ServerConfig,
    pub output: OutputConfig,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            master_seed: 1,
            triads: 5,
            session: SessionConfig::default(),
            server: ServerConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl HarnessConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let c: HarnessConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        c.session.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml(&text).map_err(|e| match e {
            HarnessError::Config(m) => HarnessError::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self, HarnessError> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn session_for(&self, triad: usize) -> SessionConfig {
        SessionConfig {
            seed: triad_seed(self.master_seed, triad),
            ..self.session.clone()
        }
    }
}

pub fn triad_seed(master: u64, triad: usize) -> u64 {
    derive_seed(master, "triad", triad as u64)
}

/// Runs `config.triads` in-process sessions, in parallel, in triad order.
pub fn simulate_campaign(config: &HarnessConfig) -> Result<Vec<SessionLog>, HarnessError> {
    config.session.validate()?;
    (0..config.triads)
        .into_par_iter()
        .map(|i| {
            let s = config.session_for(i);
            run_session(&s, &mut LocalTransport::new(s.n_senders as u8)).map_err(HarnessError::from)
        })
        .collect()
}

pub fn write_log_file(path: &Path, log: &SessionLog) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let f = fs::File::create(path).map_err(io_err(path))?;
    write_log(&mut BufWriter::new(f), log).map_err(|e| match e {
        LogError::Io(source) => HarnessError::Io {
            path: path.to_owned(),
            source,
        },
        source => HarnessError::Log {
            path: path.to_owned(),
            source,
        },
    })
}

pub fn read_log_file(path: &Path) -> Result<SessionLog, HarnessError> {
    let f = fs::File::open(path).map_err(io_err(path))?;
    read_log(BufReader::new(f)).map_err(|source| HarnessError::Log {
        path: path.to_owned(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub triad: usize,
    pub seed: u64,
    pub session_id: String,
    pub log: PathBuf,
    pub score: u32,
    pub completed_trials: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aborted: Option<String>,
    pub virtual_duration_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub protocol_version: u32,
    pub log_version: u32,
    pub config: HarnessConfig,
    pub sessions: Vec<ManifestEntry>,
    pub wall_duration_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RoleArg {
    Sender,
    Receiver,
}

impl From<RoleArg> for Role {
    fn from(r: RoleArg) -> Self {
        match r {
            RoleArg::Sender => Role::Sender,
            RoleArg::Receiver => Role::Receiver,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "brainnet", version, about = "Three-person brain-to-brain interface simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run simulated triad sessions in-process and write their logs.
    Simulate(SimulateArgs),
    /// Run one session as a TCP server for three clients.
    Serve(ServeArgs),
    /// Attach a simulated participant to a server.
    Client(ClientArgs),
    /// Analyse session logs.
    Analyze(AnalyzeArgs),
    /// Re-run the game from a log and check its recorded outcomes.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub triads: Option<u64>,
    #[arg(long, conflicts_with = "realtime")]
    pub r#virtual: bool,
    #[arg(long)]
    pub realtime: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, env = "BRAINNET_LOG_DIR")]
    pub log_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, env = "BRAINNET_PORT")]
    pub port: Option<u16>,
    #[arg(long)]
    pub host: Option<String>,
    /// Session seed; defaults to the first triad seed of the master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub realtime: bool,
    #[arg(long, env = "BRAINNET_LOG_DIR")]
    pub log_dir: Option<PathBuf>,
    /// Explicit log file path; overrides the log directory.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClientArgs {
    #[arg(long, value_enum)]
    pub role: RoleArg,
    #[arg(long)]
    pub connect: String,
    #[arg(long, default_value_t = 50)]
    pub attempts: u32,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(required = true)]
    pub logs: Vec<PathBuf>,
    /// Report JSON path; the measurement table goes next to it as .csv.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Trials to leave out, as triad:trial with 1-based triads (repeatable).
    #[arg(long, value_parser = parse_exclusion)]
    pub exclude: Vec<(usize, usize)>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub log: PathBuf,
}

fn parse_exclusion(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected triad:trial, got {s:?}"))?;
    let triad: usize = a.parse().map_err(|_| format!("bad triad in {s:?}"))?;
    let trial: usize = b.parse().map_err(|_| format!("bad trial in {s:?}"))?;
    if triad == 0 {
        return Err("triads are numbered from 1".into());
    }
    Ok((triad - 1, trial))
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<RunManifest, HarnessError> {
    let mut config = HarnessConfig::load_or_default(args.config.as_deref())?;
    if let Some(n) = args.triads {
        config.triads = n as usize;
    }
    if config.triads == 0 {
        return Err(HarnessError::Config("--triads must be at least 1".into()));
    }
    if let Some(s) = args.seed {
        config.master_seed = s;
    }
    if args.realtime {
        config.session.clock = ClockMode::Realtime;
    } else if args.r#virtual {
        config.session.clock = ClockMode::Virtual;
    }
    if let Some(d) = &args.log_dir {
        config.output.log_dir = d.clone();
    }
    let t0 = Instant::now();
    let logs = simulate_campaign(&config)?;
    let mut sessions = Vec::with_capacity(logs.len());
    for (i, log) in logs.iter().enumerate() {
        let path = config.output.log_dir.join(format!("triad-{:02}.jsonl", i + 1));
        write_log_file(&path, log)?;
        let end = log.end();
        sessions.push(ManifestEntry {
            triad: i + 1,
            seed: triad_seed(config.master_seed, i),
            session_id: config.session_for(i).session_id(),
            log: path,
            score: end.map_or(0, |e| e.score),
            completed_trials: end.map_or(0, |e| e.completed_trials),
            aborted: end.and_then(|e| e.aborted.clone()),
            virtual_duration_ms: end.map_or(0, |e| e.end_tick),
        });
    }
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        protocol_version: protocol::PROTOCOL_VERSION,
        log_version: protocol::LOG_VERSION,
        config: config.clone(),
        sessions,
        wall_duration_ms: t0.elapsed().as_millis() as u64,
    };
    let path = config.output.log_dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_text(&path, &(text + "\n"))?;
    Ok(manifest)
}

pub fn cmd_serve(args: &ServeArgs) -> Result<(PathBuf, SessionLog), HarnessError> {
    let config = HarnessConfig::load_or_default(args.config.as_deref())?;
    let mut session = config.session_for(0);
    if let Some(s) = args.seed {
        session.seed = s;
    }
    if args.realtime {
        session.clock = ClockMode::Realtime;
    }
    session.validate()?;
    let host = args.host.clone().unwrap_or(config.server.host);
    let port = args.port.unwrap_or(config.server.port);
    let addr = format!("{host}:{port}");
    let listener = TcpListener::bind(&addr).map_err(|e| HarnessError::Protocol(e.into()))?;
    let bound = listener.local_addr().map_err(|e| HarnessError::Protocol(e.into()))?;
    eprintln!("listening on {bound}");
    let log = net::serve(listener, &session)?;
    let path = args.log.clone().unwrap_or_else(|| {
        args.log_dir
            .clone()
            .unwrap_or(config.output.log_dir)
            .join(format!("{}.jsonl", session.session_id()))
    });
    write_log_file(&path, &log)?;
    Ok((path, log))
}

pub fn cmd_client(args: &ClientArgs) -> Result<net::ClientSummary, HarnessError> {
    Ok(net::run_client(&args.connect, args.role.into(), args.attempts)?)
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<analysis::AnalysisReport, HarnessError> {
    let logs = args
        .logs
        .iter()
        .map(|p| read_log_file(p))
        .collect::<Result<Vec<_>, _>>()?;
    let mut mask = ExclusionMask::default();
    for &(triad, trial) in &args.exclude {
        mask.trials.entry(triad).or_default().insert(trial);
    }
    let report = analysis::report(&logs, &mask)?;
    let path = args
        .report
        .clone()
        .unwrap_or_else(|| OutputConfig::default().report);
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_text(&path, &(json + "\n"))?;
    write_text(&path.with_extension("csv"), &analysis::report_table(&report))?;
    Ok(report)
}

pub fn cmd_replay(args: &ReplayArgs) -> Result<ReplayVerdict, HarnessError> {
    let log = match read_log_file(&args.log) {
        Ok(l) => l,
        Err(HarnessError::Log {
            source: LogError::Empty,
            ..
        }) => {
            return Ok(ReplayVerdict::Fail {
                trial_index: None,
                reason: "empty log".into(),
            })
        }
        Err(e) => return Err(e),
    };
    Ok(replay(&log))
}

/// Runs a parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a).map(|m| {
            for s in &m.sessions {
                println!(
                    "triad {}: score {}/{} -> {}",
                    s.triad,
                    s.score,
                    s.completed_trials,
                    s.log.display()
                );
            }
            EXIT_OK
        }),
        Command::Serve(a) => cmd_serve(a).map(|(path, log)| {
            let end = log.end();
            println!(
                "session {}: score {}/{}{} -> {}",
                log.header().map_or("?", |h| h.session_id.as_str()),
                end.map_or(0, |e| e.score),
                end.map_or(0, |e| e.completed_trials),
                end.and_then(|e| e.aborted.as_ref())
                    .map_or(String::new(), |r| format!(" (aborted: {r})")),
                path.display()
            );
            if log.is_aborted() {
                EXIT_PROTOCOL
            } else {
                EXIT_OK
            }
        }),
        Command::Client(a) => cmd_client(a).map(|s| {
            println!("{:?} finished: score {}/{}", s.role, s.score, s.n_trials);
            if s.aborted.is_some() {
                EXIT_PROTOCOL
            } else {
                EXIT_OK
            }
        }),
        Command::Analyze(a) => cmd_analyze(a).map(|r| {
            println!(
                "{} triads, mean accuracy {:.4}, report written",
                r.triads.len(),
                r.accuracy.mean
            );
            EXIT_OK
        }),
        Command::Replay(a) => cmd_replay(a).map(|v| {
            println!("{v}");
            if v.passed() {
                EXIT_OK
            } else {
                EXIT_REPLAY_FAIL
            }
        }),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
