//! Benchmark harness behind the `ldpc-bench` CLI: per-vector execution time
//! versus worker count for stream/batch x encode/decode sweeps across code
//! rates, plus end-to-end BER evaluation.
//!
//! For each (rate, workers) pair the harness builds or loads the code,
//! generates the input vectors from the configured seed, runs one untimed
//! full warm-up pass, then times one full pass on a monotonic clock. Code
//! construction, plan building, and input generation are excluded from the
//! timed region; scatter/gather and per-vector broadcasts are included,
//! matching the total-time-over-N-vectors definition of per-vector time.
//! Seeded runs produce identical output bits across repetitions and across
//! worker counts; only the timings move.

use crate::alist::{read_alist_file, AlistError};
use crate::batch::{batch_decode_with, batch_encode};
use crate::channel::{awgn, bpsk_modulate, channel_llr, ChannelError, ChannelParams};
use crate::codec::{encode, CodecError, DecodeOptions, LdpcCode, LlrVector, TannerGraph};
use crate::gf2::{CodeParams, Gf2Error};
use crate::mprt::mailbox::run_threads;
use crate::mprt::socket::{alloc_port_base, SocketComm, SocketConfig, SocketWorldAddr};
use crate::mprt::{Comm, LatencyModel, WorldOptions};
use crate::stream::{
    stream_decode_with_plan, stream_encode_with_plan, DistError, StreamDecodePlan,
    StreamEncodePlan, ROOT,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid benchmark config: {0}")]
    InvalidConfig(String),
    #[error("parity-check file: {0}")]
    Alist(#[from] AlistError),
    #[error(transparent)]
    Gf2(#[from] Gf2Error),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Mprt(#[from] crate::mprt::MprtError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("worker handoff: {0}")]
    Handoff(#[from] serde_json::Error),
    #[error("worker process rank {rank} failed: {detail}")]
    Worker { rank: usize, detail: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Stream,
    Batch,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Stream => "stream",
            Mode::Batch => "batch",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Encode,
    Decode,
    EndToEnd,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Encode => "encode",
            Phase::Decode => "decode",
            Phase::EndToEnd => "e2e",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportKind {
    Threads,
    Procs,
}

impl fmt::Display for TransportKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransportKind::Threads => "threads",
            TransportKind::Procs => "procs",
        })
    }
}

/// Full description of a benchmark sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchConfig {
    pub n: usize,
    pub wr: usize,
    /// Design rates; each maps to a column weight `wc = wr * (1 - rate)`.
    pub rates: Vec<f64>,
    pub iterations: usize,
    pub num_vectors: usize,
    pub workers: Vec<usize>,
    pub mode: Mode,
    pub phase: Phase,
    pub sigma: f64,
    pub seed: u64,
    pub transport: TransportKind,
    /// Emulated server count; ranks are split into contiguous blocks.
    pub servers: usize,
    pub inter_server_latency_us: u64,
    pub intra_server_latency_us: u64,
    pub h_file: Option<PathBuf>,
    /// CSV destination; records always also go to the caller.
    pub out: Option<PathBuf>,
    /// Gnuplot data destination.
    pub plot: Option<PathBuf>,
    pub early_exit: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            n: 1032,
            wr: 12,
            rates: vec![0.25, 0.5, 0.75],
            iterations: 10,
            num_vectors: 1000,
            workers: vec![1],
            mode: Mode::Batch,
            phase: Phase::Decode,
            sigma: 0.8,
            seed: 1,
            transport: TransportKind::Threads,
            servers: 1,
            inter_server_latency_us: 0,
            intra_server_latency_us: 0,
            h_file: None,
            out: None,
            plot: None,
            early_exit: false,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let fail = |msg: String| Err(BenchError::InvalidConfig(msg));
        if self.num_vectors < 1 {
            return fail("need at least one vector".into());
        }
        if self.iterations < 1 {
            return fail("need at least one decoding iteration".into());
        }
        if self.rates.is_empty() {
            return fail("need at least one rate".into());
        }
        if self.workers.is_empty() || self.workers.iter().any(|&w| w < 1) {
            return fail("worker counts must be >= 1".into());
        }
        if self.servers < 1 {
            return fail("server count must be >= 1".into());
        }
        if self.phase != Phase::Encode && (!self.sigma.is_finite() || self.sigma <= 0.0) {
            return fail(format!("sigma must be positive for {} runs, got {}", self.phase, self.sigma));
        }
        if self.early_exit && self.mode == Mode::Stream {
            return fail("early exit is only available for batch decoding; stream decoding runs the fixed iteration count".into());
        }
        if self.h_file.is_none() {
            for &rate in &self.rates {
                self.column_weight(rate)?;
            }
        }
        Ok(())
    }

    /// Column weight for a design rate: `wc = wr * (1 - rate)`, which must
    /// land on an integer in `[1, wr)`.
    pub fn column_weight(&self, rate: f64) -> Result<usize, BenchError> {
        let wc = self.wr as f64 * (1.0 - rate);
        let rounded = wc.round();
        if (wc - rounded).abs() > 1e-9 || rounded < 1.0 || rounded >= self.wr as f64 {
            return Err(BenchError::InvalidConfig(format!(
                "rate {rate} with wr {} needs column weight {wc}, which is not a usable integer",
                self.wr
            )));
        }
        Ok(rounded as usize)
    }

    fn world_options(&self, workers: usize) -> WorldOptions {
        let latency = if self.servers > 1 || self.inter_server_latency_us > 0 || self.intra_server_latency_us > 0 {
            Some(LatencyModel::two_tier(
                workers,
                self.servers,
                self.intra_server_latency_us,
                self.inter_server_latency_us,
            ))
        } else {
            None
        };
        WorldOptions { latency, recv_timeout: Duration::from_secs(120) }
    }
}

/// One timing measurement row.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRecord {
    pub mode: Mode,
    pub phase: Phase,
    pub design_rate: f64,
    pub realized_rate: f64,
    pub n: usize,
    pub workers: usize,
    pub servers: usize,
    pub total_seconds: f64,
    pub per_vector_seconds: f64,
    pub ber: Option<f64>,
    /// FNV-1a over the root's output bits; equal across repetitions and
    /// worker counts of a seeded run.
    pub output_hash: u64,
}

/// One BER sweep point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BerPoint {
    pub sigma: f64,
    pub ber: f64,
    pub fer: f64,
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

const NOISE_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Inputs shared by every worker count of one rate: the code and the
/// pre-generated vectors.
pub(crate) struct Prepared {
    pub code: LdpcCode,
    pub graph: TannerGraph,
    /// `num_vectors * k` message bits.
    pub messages: Vec<u8>,
    /// `num_vectors * n` transmitted codeword bits (decode and e2e phases).
    pub codewords: Vec<u8>,
    /// `num_vectors * n` channel LLRs (decode phase).
    pub llrs: Vec<f64>,
}

pub(crate) fn prepare_inputs(cfg: &BenchConfig, rate_index: usize) -> Result<Prepared, BenchError> {
    let code = match &cfg.h_file {
        Some(path) => {
            let h = read_alist_file(path)?;
            if h.cols() != cfg.n {
                return Err(BenchError::InvalidConfig(format!(
                    "parity-check file has n={}, config says n={}",
                    h.cols(),
                    cfg.n
                )));
            }
            LdpcCode::from_h(h)?
        }
        None => {
            let wc = cfg.column_weight(cfg.rates[rate_index])?;
            LdpcCode::construct(CodeParams::new(cfg.n, cfg.wr, wc)?, cfg.seed)?
        }
    };
    let graph = code.graph();
    let k = code.k();

    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    rng.set_stream(rate_index as u64 + 1);
    let messages: Vec<u8> = (0..cfg.num_vectors * k).map(|_| rng.random_range(0..2u8)).collect();

    let (codewords, llrs) = match cfg.phase {
        Phase::Encode => (Vec::new(), Vec::new()),
        Phase::Decode | Phase::EndToEnd => {
            let mut codewords = Vec::with_capacity(cfg.num_vectors * code.n());
            for m in messages.chunks_exact(k) {
                codewords.extend_from_slice(&encode(m, &code.generator)?);
            }
            let llrs = if cfg.phase == Phase::Decode {
                let params = channel_params(cfg, rate_index)?;
                let y = awgn(&bpsk_modulate(&codewords), &params);
                channel_llr(&y, &params).0
            } else {
                Vec::new() // e2e generates noise inside the timed pipeline
            };
            (codewords, llrs)
        }
    };
    Ok(Prepared { code, graph, messages, codewords, llrs })
}

fn channel_params(cfg: &BenchConfig, rate_index: usize) -> Result<ChannelParams, BenchError> {
    let seed = cfg.seed ^ NOISE_SEED_SALT.wrapping_mul(rate_index as u64 + 1);
    Ok(ChannelParams::new(cfg.sigma, seed)?)
}

/// The per-sweep-point subset of the config a worker needs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub(crate) struct PointSpec {
    mode: Mode,
    phase: Phase,
    iterations: usize,
    num_vectors: usize,
    sigma: f64,
    seed: u64,
    rate_index: usize,
    early_exit: bool,
}

impl PointSpec {
    fn new(cfg: &BenchConfig, rate_index: usize) -> Self {
        PointSpec {
            mode: cfg.mode,
            phase: cfg.phase,
            iterations: cfg.iterations,
            num_vectors: cfg.num_vectors,
            sigma: cfg.sigma,
            seed: cfg.seed,
            rate_index,
            early_exit: cfg.early_exit,
        }
    }

    fn noise_params(&self) -> Result<ChannelParams, ChannelError> {
        ChannelParams::new(self.sigma, self.seed ^ NOISE_SEED_SALT.wrapping_mul(self.rate_index as u64 + 1))
    }
}

/// Root's view of one timed pass.
pub(crate) struct PointOutcome {
    pub total: Duration,
    pub bits: Vec<u8>,
    pub ber: Option<f64>,
}

/// Runs warm-up plus timed pass on this rank; returns the outcome at the
/// root, `None` elsewhere. Every rank executes the same call sequence.
pub(crate) fn run_point<C: Comm>(
    spec: &PointSpec,
    prep: &Prepared,
    comm: &mut C,
) -> Result<Option<PointOutcome>, BenchError> {
    let me = comm.rank();
    let world_size = comm.world_size();

    // Plan construction is setup, outside the timed region.
    let enc_plan = match (spec.mode, spec.phase) {
        (Mode::Stream, Phase::Encode) | (Mode::Stream, Phase::EndToEnd) => {
            Some(StreamEncodePlan::new(&prep.code.generator, world_size, me))
        }
        _ => None,
    };
    let dec_plan = match (spec.mode, spec.phase) {
        (Mode::Stream, Phase::Decode) | (Mode::Stream, Phase::EndToEnd) => {
            Some(StreamDecodePlan::new(&prep.graph, world_size, me))
        }
        _ => None,
    };

    let mut timed: Option<(Duration, Option<Vec<u8>>)> = None;
    for pass in 0..2 {
        let started = Instant::now();
        let bits = run_pass(spec, prep, enc_plan.as_ref(), dec_plan.as_ref(), comm)?;
        let elapsed = started.elapsed();
        if pass == 1 {
            timed = Some((elapsed, bits));
        }
    }
    let (total, bits) = timed.expect("timed pass ran");

    if me != ROOT {
        return Ok(None);
    }
    let bits = bits.expect("root holds the output");
    let ber = match spec.phase {
        Phase::Encode => None,
        Phase::Decode | Phase::EndToEnd => {
            let errors = bits.iter().zip(&prep.codewords).filter(|(a, b)| a != b).count();
            Some(errors as f64 / prep.codewords.len() as f64)
        }
    };
    Ok(Some(PointOutcome { total, bits, ber }))
}

/// One full pass over the workload. Returns the output bits at the root.
fn run_pass<C: Comm>(
    spec: &PointSpec,
    prep: &Prepared,
    enc_plan: Option<&StreamEncodePlan>,
    dec_plan: Option<&StreamDecodePlan>,
    comm: &mut C,
) -> Result<Option<Vec<u8>>, BenchError> {
    let root = comm.rank() == ROOT;
    let k = prep.code.k();
    let n = prep.code.n();
    let opts = DecodeOptions { early_exit: spec.early_exit };

    let out = match (spec.mode, spec.phase) {
        (Mode::Batch, Phase::Encode) => {
            batch_encode(root.then_some(prep.messages.as_slice()), &prep.code.generator, comm)?
        }
        (Mode::Batch, Phase::Decode) => {
            batch_decode_with(root.then_some(prep.llrs.as_slice()), &prep.graph, spec.iterations, opts, comm)?
        }
        (Mode::Batch, Phase::EndToEnd) => {
            let encoded = batch_encode(root.then_some(prep.messages.as_slice()), &prep.code.generator, comm)?;
            let llrs = match encoded {
                Some(bits) => {
                    let params = spec.noise_params()?;
                    let y = awgn(&bpsk_modulate(&bits), &params);
                    Some(channel_llr(&y, &params).0)
                }
                None => None,
            };
            batch_decode_with(llrs.as_deref(), &prep.graph, spec.iterations, opts, comm)?
        }
        (Mode::Stream, Phase::Encode) => {
            let plan = enc_plan.expect("encode plan prepared");
            let mut all = root.then(|| Vec::with_capacity(spec.num_vectors * n));
            for i in 0..spec.num_vectors {
                let m = root.then(|| &prep.messages[i * k..(i + 1) * k]);
                let p = stream_encode_with_plan(m, &prep.code.generator, plan, comm)?;
                if let (Some(all), Some(p)) = (all.as_mut(), p) {
                    all.extend_from_slice(&p);
                }
            }
            all
        }
        (Mode::Stream, Phase::Decode) => {
            let plan = dec_plan.expect("decode plan prepared");
            let mut all = root.then(|| Vec::with_capacity(spec.num_vectors * n));
            for i in 0..spec.num_vectors {
                let r = root.then(|| LlrVector(prep.llrs[i * n..(i + 1) * n].to_vec()));
                let result = stream_decode_with_plan(r.as_ref(), &prep.graph, plan, spec.iterations, comm)?;
                if let (Some(all), Some(result)) = (all.as_mut(), result) {
                    all.extend_from_slice(&result.bits);
                }
            }
            all
        }
        (Mode::Stream, Phase::EndToEnd) => {
            let enc_plan = enc_plan.expect("encode plan prepared");
            let dec_plan = dec_plan.expect("decode plan prepared");
            let params = spec.noise_params()?;
            let mut all = root.then(|| Vec::with_capacity(spec.num_vectors * n));
            for i in 0..spec.num_vectors {
                let m = root.then(|| &prep.messages[i * k..(i + 1) * k]);
                let p = stream_encode_with_plan(m, &prep.code.generator, enc_plan, comm)?;
                let r = p.map(|bits| {
                    let params = ChannelParams::new(params.sigma(), params.seed().wrapping_add(i as u64))
                        .expect("sigma already validated");
                    let y = awgn(&bpsk_modulate(&bits), &params);
                    channel_llr(&y, &params)
                });
                let result = stream_decode_with_plan(r.as_ref(), &prep.graph, dec_plan, spec.iterations, comm)?;
                if let (Some(all), Some(result)) = (all.as_mut(), result) {
                    all.extend_from_slice(&result.bits);
                }
            }
            all
        }
    };
    Ok(out)
}

/// Runs the configured sweep: one record per (rate, workers) pair, rates
/// outermost, in the order given.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<Vec<BenchRecord>, BenchError> {
    cfg.validate()?;
    let mut records = Vec::new();
    for rate_index in 0..cfg.rates.len() {
        let prep = prepare_inputs(cfg, rate_index)?;
        let design_rate = match cfg.h_file {
            // For an explicit matrix the design rate follows its shape.
            Some(_) => 1.0 - prep.code.h.rows() as f64 / prep.code.n() as f64,
            None => 1.0 - cfg.column_weight(cfg.rates[rate_index])? as f64 / cfg.wr as f64,
        };
        for &workers in &cfg.workers {
            let outcome = execute_point(cfg, &prep, rate_index, workers)?;
            let total_seconds = outcome.total.as_secs_f64();
            records.push(BenchRecord {
                mode: cfg.mode,
                phase: cfg.phase,
                design_rate,
                realized_rate: prep.code.realized_rate(),
                n: prep.code.n(),
                workers,
                servers: cfg.servers,
                total_seconds,
                per_vector_seconds: total_seconds / cfg.num_vectors as f64,
                ber: outcome.ber,
                output_hash: fnv1a64(&outcome.bits),
            });
        }
        // With an explicit parity-check file every rate maps to the same
        // code; one sweep suffices.
        if cfg.h_file.is_some() {
            break;
        }
    }
    if let Some(path) = &cfg.out {
        emit_csv_file(&records, path)?;
    }
    if let Some(path) = &cfg.plot {
        emit_plotdata_file(&records, path)?;
    }
    Ok(records)
}

fn execute_point(
    cfg: &BenchConfig,
    prep: &Prepared,
    rate_index: usize,
    workers: usize,
) -> Result<PointOutcome, BenchError> {
    let spec = PointSpec::new(cfg, rate_index);
    let opts = cfg.world_options(workers);
    match cfg.transport {
        TransportKind::Threads => {
            let results = run_threads(workers, opts, |comm| run_point(&spec, prep, comm));
            let mut root_outcome = None;
            for (rank, result) in results.into_iter().enumerate() {
                match result {
                    Ok(Some(outcome)) => root_outcome = Some(outcome),
                    Ok(None) => {}
                    Err(e) => return Err(BenchError::Worker { rank, detail: e.to_string() }),
                }
            }
            Ok(root_outcome.expect("rank 0 produces the outcome"))
        }
        TransportKind::Procs => execute_point_procs(cfg, prep, rate_index, workers, opts),
    }
}

/// Environment variable carrying the worker handoff; when set, the binary
/// runs as a worker rank instead of parsing CLI flags.
pub const WORKER_ENV: &str = "LDPC_BENCH_WORKER";
/// Overrides the binary spawned for worker ranks (used by tests).
pub const WORKER_BIN_ENV: &str = "LDPC_BENCH_BIN";

#[derive(Serialize, Deserialize)]
struct WorkerSpec {
    config: BenchConfig,
    rate_index: usize,
    workers: usize,
    rank: usize,
    base_port: u16,
}

fn worker_binary() -> Result<PathBuf, BenchError> {
    if let Ok(path) = std::env::var(WORKER_BIN_ENV) {
        return Ok(PathBuf::from(path));
    }
    Ok(std::env::current_exe()?)
}

fn execute_point_procs(
    cfg: &BenchConfig,
    prep: &Prepared,
    rate_index: usize,
    workers: usize,
    opts: WorldOptions,
) -> Result<PointOutcome, BenchError> {
    let base_port = alloc_port_base(workers);
    let bin = worker_binary()?;
    let mut children = Vec::new();
    for rank in 1..workers {
        let spec = WorkerSpec { config: cfg.clone(), rate_index, workers, rank, base_port };
        let child = Command::new(&bin)
            .env(WORKER_ENV, serde_json::to_string(&spec)?)
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .spawn()
            .map_err(|e| BenchError::Worker { rank, detail: format!("spawn {}: {e}", bin.display()) })?;
        children.push((rank, child));
    }

    let point = PointSpec::new(cfg, rate_index);
    let outcome = (|| {
        let socket_cfg = SocketConfig::new(workers, ROOT, SocketWorldAddr::loopback(base_port), opts);
        let mut comm = SocketComm::connect(socket_cfg)?;
        run_point(&point, prep, &mut comm)
    })();

    let mut child_failure = None;
    for (rank, mut child) in children {
        match child.wait() {
            Ok(status) if status.success() => {}
            Ok(status) => child_failure = Some(BenchError::Worker { rank, detail: format!("exit {status}") }),
            Err(e) => child_failure = Some(BenchError::Worker { rank, detail: e.to_string() }),
        }
    }
    let outcome = outcome?;
    if let Some(failure) = child_failure {
        return Err(failure);
    }
    Ok(outcome.expect("rank 0 produces the outcome"))
}

/// Entry point for a spawned worker rank; `json` is the handoff payload from
/// the parent process.
pub fn worker_main(json: &str) -> Result<(), BenchError> {
    let spec: WorkerSpec = serde_json::from_str(json)?;
    let prep = prepare_inputs(&spec.config, spec.rate_index)?;
    let opts = spec.config.world_options(spec.workers);
    let socket_cfg = SocketConfig::new(
        spec.workers,
        spec.rank,
        SocketWorldAddr::loopback(spec.base_port),
        opts,
    );
    let mut comm = SocketComm::connect(socket_cfg)?;
    let point = PointSpec::new(&spec.config, spec.rate_index);
    run_point(&point, &prep, &mut comm)?;
    Ok(())
}

/// End-to-end BER/FER per noise level. The decoding itself is the serial
/// reference path; distribution never changes decoded bits, so the curve is
/// transport- and worker-invariant by construction.
pub fn run_ber(cfg: &BenchConfig, sigmas: &[f64]) -> Result<Vec<BerPoint>, BenchError> {
    if cfg.phase != Phase::EndToEnd {
        return Err(BenchError::InvalidConfig(format!(
            "BER evaluation is an end-to-end run; got phase {}",
            cfg.phase
        )));
    }
    cfg.validate()?;
    let prep = prepare_inputs(cfg, 0)?;
    let k = prep.code.k();
    let n = prep.code.n();
    let mut codewords = Vec::with_capacity(cfg.num_vectors * n);
    for m in prep.messages.chunks_exact(k) {
        codewords.extend_from_slice(&encode(m, &prep.code.generator)?);
    }
    let tx = bpsk_modulate(&codewords);

    let mut points = Vec::with_capacity(sigmas.len());
    for (i, &sigma) in sigmas.iter().enumerate() {
        let params = ChannelParams::new(sigma, cfg.seed ^ NOISE_SEED_SALT.wrapping_mul(i as u64 + 1))?;
        let y = awgn(&tx, &params);
        let llrs = channel_llr(&y, &params);
        let mut bit_errors = 0usize;
        let mut frame_errors = 0usize;
        for (v, chunk) in llrs.as_slice().chunks_exact(n).enumerate() {
            let result = crate::codec::decode_sum_product_with(
                &prep.graph,
                &LlrVector(chunk.to_vec()),
                cfg.iterations,
                DecodeOptions { early_exit: cfg.early_exit },
            );
            let reference = &codewords[v * n..(v + 1) * n];
            let errors = result.bits.iter().zip(reference).filter(|(a, b)| a != b).count();
            bit_errors += errors;
            frame_errors += usize::from(errors > 0);
        }
        points.push(BerPoint {
            sigma,
            ber: bit_errors as f64 / (cfg.num_vectors * n) as f64,
            fer: frame_errors as f64 / cfg.num_vectors as f64,
        });
    }
    Ok(points)
}

/// BER of raw (uncoded) BPSK over AWGN at `sigma`, measured over `num_bits`
/// random bits; the reference point coded runs are compared against.
pub fn uncoded_ber(sigma: f64, num_bits: usize, seed: u64) -> Result<f64, BenchError> {
    let params = ChannelParams::new(sigma, seed)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ NOISE_SEED_SALT);
    let bits: Vec<u8> = (0..num_bits).map(|_| rng.random_range(0..2u8)).collect();
    let y = awgn(&bpsk_modulate(&bits), &params);
    let decided = crate::codec::hard_decision(&channel_llr(&y, &params));
    Ok(bits.iter().zip(&decided).filter(|(a, b)| a != b).count() as f64 / num_bits as f64)
}

const CSV_HEADER: &str = "mode,phase,design_rate,realized_rate,n,workers,servers,total_s,per_vector_s,ber";

fn format_per_vector(value: f64) -> String {
    format!("{value:.12}")
}

/// Writes the records as CSV with fixed field formatting.
pub fn emit_csv<W: Write>(records: &[BenchRecord], mut w: W) -> Result<(), BenchError> {
    assert!(!records.is_empty(), "nothing to emit");
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{:.4},{:.6},{},{},{},{:.9},{},{}",
            r.mode,
            r.phase,
            r.design_rate,
            r.realized_rate,
            r.n,
            r.workers,
            r.servers,
            r.total_seconds,
            format_per_vector(r.per_vector_seconds),
            r.ber.map_or(String::new(), |b| format!("{b:.8e}")),
        )?;
    }
    Ok(())
}

pub fn emit_csv_file(records: &[BenchRecord], path: &std::path::Path) -> Result<(), BenchError> {
    let mut buf = Vec::new();
    emit_csv(records, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

/// Writes gnuplot-ready blocks: one series per (mode, phase, design rate) in
/// first-appearance order, `workers per_vector_seconds` per line, blank line
/// between series. The y values match the CSV `per_vector_s` field exactly.
pub fn emit_plotdata<W: Write>(records: &[BenchRecord], mut w: W) -> Result<(), BenchError> {
    assert!(!records.is_empty(), "nothing to emit");
    let mut series: Vec<(Mode, Phase, f64)> = Vec::new();
    for r in records {
        let key = (r.mode, r.phase, r.design_rate);
        if !series.contains(&key) {
            series.push(key);
        }
    }
    for (i, (mode, phase, rate)) in series.iter().enumerate() {
        if i > 0 {
            writeln!(w)?;
        }
        writeln!(w, "# mode={mode} phase={phase} design_rate={rate:.4}")?;
        for r in records {
            if r.mode == *mode && r.phase == *phase && r.design_rate == *rate {
                writeln!(w, "{} {}", r.workers, format_per_vector(r.per_vector_seconds))?;
            }
        }
    }
    Ok(())
}

pub fn emit_plotdata_file(records: &[BenchRecord], path: &std::path::Path) -> Result<(), BenchError> {
    let mut buf = Vec::new();
    emit_plotdata(records, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}
