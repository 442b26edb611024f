//! Benchmark CLI: per-vector execution time for stream/batch encoding and
//! decoding of regular LDPC codes across worker counts and code rates, with
//! CSV and gnuplot-ready output.
//!
//! Examples:
//!
//! ```text
//! ldpc-bench --mode batch --phase decode --workers 1,2,4 --out results.csv
//! ldpc-bench --mode stream --phase encode --rates 0.5 --vectors 200
//! ldpc-bench --mode batch --phase decode --transport procs --workers 4 \
//!     --servers 2 --inter-server-latency-us 150
//! ```

use anyhow::Context;
use clap::{Parser, ValueEnum};
use ldpc_mp::bench::{
    emit_csv, run_benchmark, worker_main, BenchConfig, Mode, Phase, TransportKind, WORKER_ENV,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Stream,
    Batch,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PhaseArg {
    Encode,
    Decode,
    E2e,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TransportArg {
    Threads,
    Procs,
}

#[derive(Parser, Debug)]
#[command(name = "ldpc-bench", about = "Stream vs batch benchmark for distributed LDPC processing")]
struct Cli {
    /// Codeword length in bits; the row weight must divide it.
    #[arg(long, default_value_t = 1032)]
    n: usize,
    /// Ones per parity-check row.
    #[arg(long, default_value_t = 12)]
    wr: usize,
    /// Comma-separated design rates; each needs an integer wr*(1-rate).
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75")]
    rates: Vec<f64>,
    /// Sum-product decoding iterations.
    #[arg(long, default_value_t = 10)]
    iters: usize,
    /// Vectors processed per sweep point.
    #[arg(long, default_value_t = 1000)]
    vectors: usize,
    /// Comma-separated worker counts.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
    workers: Vec<usize>,
    #[arg(long, value_enum, default_value_t = ModeArg::Batch)]
    mode: ModeArg,
    #[arg(long, value_enum, default_value_t = PhaseArg::Decode)]
    phase: PhaseArg,
    /// AWGN noise standard deviation for decode and e2e runs.
    #[arg(long, default_value_t = 0.8)]
    sigma: f64,
    /// Seed for code construction, messages, and noise.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// threads: in-process worker ranks; procs: one OS process per rank over
    /// local sockets.
    #[arg(long, value_enum, default_value_t = TransportArg::Threads)]
    transport: TransportArg,
    /// Emulated server count for latency injection.
    #[arg(long, default_value_t = 1)]
    servers: usize,
    /// Injected latency for messages crossing emulated servers.
    #[arg(long = "inter-server-latency-us", default_value_t = 0)]
    inter_server_latency_us: u64,
    /// Load the parity-check matrix from a MacKay alist file instead of
    /// constructing one.
    #[arg(long = "h-file")]
    h_file: Option<PathBuf>,
    /// Write records as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write gnuplot-ready series (workers vs per-vector seconds).
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Stop decoding a vector once its syndrome is zero (batch mode only;
    /// benchmark comparisons keep this off).
    #[arg(long, default_value_t = false)]
    early_exit: bool,
}

impl Cli {
    fn into_config(self) -> BenchConfig {
        BenchConfig {
            n: self.n,
            wr: self.wr,
            rates: self.rates,
            iterations: self.iters,
            num_vectors: self.vectors,
            workers: self.workers,
            mode: match self.mode {
                ModeArg::Stream => Mode::Stream,
                ModeArg::Batch => Mode::Batch,
            },
            phase: match self.phase {
                PhaseArg::Encode => Phase::Encode,
                PhaseArg::Decode => Phase::Decode,
                PhaseArg::E2e => Phase::EndToEnd,
            },
            sigma: self.sigma,
            seed: self.seed,
            transport: match self.transport {
                TransportArg::Threads => TransportKind::Threads,
                TransportArg::Procs => TransportKind::Procs,
            },
            servers: self.servers,
            inter_server_latency_us: self.inter_server_latency_us,
            intra_server_latency_us: 0,
            h_file: self.h_file,
            out: self.out,
            plot: self.plot,
            early_exit: self.early_exit,
        }
    }
}

fn main() -> ExitCode {
    // Spawned worker ranks carry their task in the environment and never
    // touch the CLI surface.
    if let Ok(handoff) = std::env::var(WORKER_ENV) {
        return match worker_main(&handoff) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("ldpc-bench worker: {e}");
                ExitCode::FAILURE
            }
        };
    }

    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ldpc-bench: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = cli.into_config();
    let records = run_benchmark(&cfg).context("benchmark run failed")?;
    let mut stdout = std::io::stdout().lock();
    emit_csv(&records, &mut stdout).context("writing results")?;
    Ok(())
}
