use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::oracle::PlainIndex;
use crate::client::{PopeClient, SearchResult};
use crate::crypto::keygen;
use crate::error::{Error, Result};
use crate::leakage::{pair_bound, FactLog, KnowledgeSnapshot, PairBound, PartialOrderState};
use crate::mope::MopeServer;
use crate::protocol::{
    CiphertextTally, LocalSession, Op, OpKind, RangeServer, Session, SocketSession, Transcript,
};
use crate::server::PopeServer;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Pope,
    Mope,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Pope => "pope",
            Scheme::Mope => "mope",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pope" => Ok(Scheme::Pope),
            "mope" => Ok(Scheme::Mope),
            other => Err(Error::config(format!("unknown scheme {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportKind {
    #[default]
    Inproc,
    Socket,
}

impl fmt::Display for TransportKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransportKind::Inproc => "inproc",
            TransportKind::Socket => "socket",
        })
    }
}

impl FromStr for TransportKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inproc" => Ok(TransportKind::Inproc),
            "socket" => Ok(TransportKind::Socket),
            other => Err(Error::config(format!("unknown transport {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub scheme: Scheme,
    pub capacity: usize,
    pub transport: TransportKind,
    /// Simulated delay per blocking exchange; in-process only.
    pub latency: Duration,
    /// Operation counts after which leakage is measured. The end of the run
    /// is always measured.
    pub checkpoints: Vec<usize>,
    pub chunk_size: usize,
    /// Key, client and server randomness all derive from this.
    pub seed: u64,
    /// Compare every search against the plaintext index.
    pub verify: bool,
    /// Replay the server's facts to count incomparable pairs.
    pub leakage: bool,
    /// Attach knowledge snapshots to checkpoints.
    pub snapshots: bool,
    /// Keep the per-message event log in the returned transcript.
    pub keep_events: bool,
}

impl ExperimentConfig {
    pub fn new(scheme: Scheme, capacity: usize) -> Self {
        ExperimentConfig {
            scheme,
            capacity,
            transport: TransportKind::Inproc,
            latency: Duration::ZERO,
            checkpoints: Vec::new(),
            chunk_size: crate::server::DEFAULT_CHUNK_SIZE,
            seed: 0,
            verify: true,
            leakage: true,
            snapshots: false,
            keep_events: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.capacity < 2 {
            return Err(Error::config(format!(
                "capacity must be at least 2, got {}",
                self.capacity
            )));
        }
        if self.chunk_size == 0 {
            return Err(Error::config("chunk size must be positive"));
        }
        if self.transport == TransportKind::Socket && !self.latency.is_zero() {
            return Err(Error::config(
                "simulated latency needs the in-process transport",
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub ops: usize,
    pub pivots: u64,
    pub incomparable_pairs: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<KnowledgeSnapshot>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvInfo {
    pub version: String,
    pub os: String,
    pub arch: String,
    pub cpus: usize,
}

impl EnvInfo {
    pub fn current() -> Self {
        EnvInfo {
            version: env!("CARGO_PKG_VERSION").to_string(),
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            cpus: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

/// Outcome of one experiment. Everything except `elapsed_secs`,
/// `ops_per_sec` and `env` is a function of the operations and the config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub scheme: Scheme,
    pub transport: TransportKind,
    pub capacity: usize,
    pub seed: u64,
    pub latency_ms: f64,
    pub chunk_size: usize,
    pub inserts: u64,
    pub searches: u64,
    pub ops_completed: u64,
    pub total_rounds: u64,
    pub insert_rounds: u64,
    pub search_rounds: u64,
    pub rounds_per_insert: f64,
    pub rounds_per_search: f64,
    pub max_rounds_per_search: u64,
    pub one_way_msgs: u64,
    pub ciphertexts_sent: u64,
    pub ciphertexts_per_op: f64,
    pub tally: CiphertextTally,
    pub result_blocks: u64,
    pub elapsed_secs: f64,
    pub ops_per_sec: f64,
    pub pivots: Option<u64>,
    pub incomparable_pairs: Option<u64>,
    pub bound: Option<PairBound>,
    pub checkpoints: Vec<Checkpoint>,
    /// Searches whose answer differed from the plaintext index.
    pub mismatches: Option<u64>,
    pub complete: bool,
    pub error: Option<String>,
    pub env: EnvInfo,
}

impl Report {
    /// Copy with timing and environment fields cleared.
    pub fn without_timing(&self) -> Report {
        Report {
            elapsed_secs: 0.0,
            ops_per_sec: 0.0,
            env: EnvInfo {
                version: String::new(),
                os: String::new(),
                arch: String::new(),
                cpus: 0,
            },
            ..self.clone()
        }
    }
}

/// A finished run with everything the report was built from.
pub struct Execution {
    pub report: Report,
    pub transcript: Transcript,
    /// Answers to the searches that completed, in order.
    pub results: Vec<SearchResult>,
    pub facts: Option<FactLog>,
}

struct Driven {
    completed: usize,
    results: Vec<SearchResult>,
    mismatches: u64,
    error: Option<Error>,
    elapsed: Duration,
}

fn drive(session: &mut impl Session, ops: &[Op], verify: bool) -> Driven {
    let mut plain = PlainIndex::new();
    let mut d = Driven {
        completed: 0,
        results: Vec::new(),
        mismatches: 0,
        error: None,
        elapsed: Duration::ZERO,
    };
    let start = Instant::now();
    for op in ops {
        let res = match op {
            Op::Insert { label, payload } => {
                if verify {
                    plain.insert(*label, payload);
                }
                session.insert(*label, payload)
            }
            Op::Search { lo, hi } => session.search(*lo, *hi).map(|r| {
                if verify && r.clone().sorted() != plain.range(*lo, *hi) {
                    d.mismatches += 1;
                }
                d.results.push(r);
            }),
        };
        if let Err(e) = res {
            d.error = Some(e);
            break;
        }
        d.completed += 1;
    }
    d.elapsed = start.elapsed();
    d
}

fn transcript_for(cfg: &ExperimentConfig) -> Transcript {
    if cfg.keep_events {
        Transcript::new()
    } else {
        Transcript::metrics_only()
    }
}

trait Measured: RangeServer + Send + 'static {
    fn fact_log(&mut self) -> Option<FactLog>;
}

impl Measured for PopeServer {
    fn fact_log(&mut self) -> Option<FactLog> {
        self.facts().cloned()
    }
}

impl Measured for MopeServer {
    fn fact_log(&mut self) -> Option<FactLog> {
        self.facts().cloned()
    }
}

fn run_with<S: Measured>(
    server: S,
    client: PopeClient,
    ops: &[Op],
    cfg: &ExperimentConfig,
) -> (Driven, Transcript, Option<FactLog>) {
    match cfg.transport {
        TransportKind::Inproc => {
            let mut s = LocalSession::with_transcript(server, client, transcript_for(cfg))
                .with_latency(cfg.latency);
            let d = drive(&mut s, ops, cfg.verify);
            let (mut server, _, transcript) = s.into_parts();
            let facts = server.fact_log();
            (d, transcript, facts)
        }
        TransportKind::Socket => {
            match SocketSession::connect_with(server, client, transcript_for(cfg)) {
                Ok(mut s) => {
                    let mut d = drive(&mut s, ops, cfg.verify);
                    match s.finish() {
                        Ok((mut server, transcript)) => {
                            let facts = server.fact_log();
                            (d, transcript, facts)
                        }
                        Err(e) => {
                            d.error.get_or_insert(e);
                            (d, Transcript::new(), None)
                        }
                    }
                }
                Err(e) => (
                    Driven {
                        completed: 0,
                        results: Vec::new(),
                        mismatches: 0,
                        error: Some(e),
                        elapsed: Duration::ZERO,
                    },
                    Transcript::new(),
                    None,
                ),
            }
        }
    }
}

/// Replays `log` and measures at each checkpoint.
pub fn leakage_checkpoints(
    log: &FactLog,
    checkpoints: &[usize],
    snapshots: bool,
) -> Result<Vec<Checkpoint>> {
    let mut cps: Vec<usize> = checkpoints.iter().map(|&c| c.min(log.ops())).collect();
    cps.push(log.ops());
    cps.sort_unstable();
    cps.dedup();
    let mut state = PartialOrderState::new();
    let mut applied = 0;
    let mut out = Vec::with_capacity(cps.len());
    for ops in cps {
        let upto = log.after_ops(ops).len();
        for f in &log.facts()[applied..upto] {
            state.apply(f)?;
        }
        applied = upto;
        out.push(Checkpoint {
            ops,
            pivots: state.pivot_count() as u64,
            incomparable_pairs: state.incomparable_pairs(),
            snapshot: snapshots.then(|| KnowledgeSnapshot::of(&state)),
        });
    }
    Ok(out)
}

/// Runs `ops` end to end. Configuration problems are errors; a session that
/// fails part-way yields a report with `complete == false`.
pub fn execute(ops: &[Op], cfg: &ExperimentConfig) -> Result<Execution> {
    cfg.validate()?;
    let key = keygen(Some(cfg.seed));
    let client = PopeClient::with_seed(&key, cfg.capacity, cfg.seed ^ 0x636c_6965_6e74)?;
    let server_seed = cfg.seed ^ 0x7365_7276_6572;
    let (driven, transcript, facts) = match cfg.scheme {
        Scheme::Pope => {
            let mut server =
                PopeServer::new(cfg.capacity, server_seed)?.with_chunk_size(cfg.chunk_size)?;
            if !cfg.leakage {
                server = server.without_leakage();
            }
            run_with(server, client, ops, cfg)
        }
        Scheme::Mope => {
            let mut server = MopeServer::new();
            if !cfg.leakage {
                server = server.without_leakage();
            }
            run_with(server, client, ops, cfg)
        }
    };

    let inserts = ops
        .iter()
        .filter(|o| matches!(o, Op::Insert { .. }))
        .count() as u64;
    let searches = ops.len() as u64 - inserts;
    let mut insert_rounds = 0;
    let mut search_rounds = 0;
    let mut max_rounds_per_search = 0;
    let (mut done_inserts, mut done_searches) = (0u64, 0u64);
    for c in transcript.ops() {
        match c.kind {
            OpKind::Insert => {
                insert_rounds += c.rounds;
                done_inserts += 1;
            }
            OpKind::Search => {
                search_rounds += c.rounds;
                done_searches += 1;
                max_rounds_per_search = max_rounds_per_search.max(c.rounds);
            }
        }
    }
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let m = transcript.metrics();

    let mut error = driven.error.map(|e| e.to_string());
    let checkpoints = match facts.as_ref().filter(|_| cfg.leakage) {
        Some(log) => {
            leakage_checkpoints(log, &cfg.checkpoints, cfg.snapshots).unwrap_or_else(|e| {
                error.get_or_insert(e.to_string());
                Vec::new()
            })
        }
        None => Vec::new(),
    };
    let last = checkpoints.last();
    let pivots = last.map(|c| c.pivots);
    let elapsed = driven.elapsed.as_secs_f64();
    let report = Report {
        schema_version: REPORT_SCHEMA_VERSION,
        scheme: cfg.scheme,
        transport: cfg.transport,
        capacity: cfg.capacity,
        seed: cfg.seed,
        latency_ms: cfg.latency.as_secs_f64() * 1e3,
        chunk_size: cfg.chunk_size,
        inserts,
        searches,
        ops_completed: driven.completed as u64,
        total_rounds: m.rounds,
        insert_rounds,
        search_rounds,
        rounds_per_insert: ratio(insert_rounds, done_inserts),
        rounds_per_search: ratio(search_rounds, done_searches),
        max_rounds_per_search,
        one_way_msgs: m.one_way_msgs,
        ciphertexts_sent: m.ciphertexts_sent,
        ciphertexts_per_op: ratio(m.ciphertexts_sent, done_inserts + done_searches),
        tally: m.tally,
        result_blocks: m.result_blocks,
        elapsed_secs: elapsed,
        ops_per_sec: if elapsed > 0.0 {
            driven.completed as f64 / elapsed
        } else {
            0.0
        },
        pivots,
        incomparable_pairs: last.map(|c| c.incomparable_pairs),
        bound: pivots.map(|k| pair_bound(done_inserts, done_searches, cfg.capacity as u64, k)),
        checkpoints,
        mismatches: cfg.verify.then_some(driven.mismatches),
        complete: error.is_none(),
        error,
        env: EnvInfo::current(),
    };
    Ok(Execution {
        report,
        transcript,
        results: driven.results,
        facts,
    })
}

pub fn run_experiment(ops: &[Op], cfg: &ExperimentConfig) -> Result<Report> {
    execute(ops, cfg).map(|e| e.report)
}
