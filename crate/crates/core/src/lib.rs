//! Forward-error-correction toolkit for regular LDPC codes with distributed
//! encoding and decoding over message-passing worker ranks.
//!
//! The crate is organised in layers:
//!
//! - [`gf2`]: dense bit matrices over GF(2): Gallager parity-check
//!   construction, rank/null-space computation, standard-form conversion.
//! - [`alist`]: MacKay alist file I/O for parity-check matrices.
//! - [`codec`]: the serial reference codec: Tanner graphs, systematic
//!   encoding, and sum-product (belief propagation) decoding.
//! - [`channel`]: BPSK modulation, AWGN corruption, channel LLRs.
//! - [`mprt`]: message-passing runtime: ranks, send/recv/gatherv/bcast over
//!   in-process mailboxes or local sockets, and balanced work partitioning.
//! - [`stream`]: stream processing: one vector distributed across all ranks.
//! - [`batch`]: batch processing: many vectors, each rank working serially
//!   on its own share.
//! - [`mod@bench`]: the benchmark harness behind the `ldpc-bench` CLI.
//!
//! Distributed results are bit-identical to the serial codec for every world
//! size and transport; distribution changes wall time, never data.

pub mod alist;
pub mod batch;
pub mod bench;
pub mod channel;
pub mod codec;
pub mod gf2;
pub mod mprt;
pub mod stream;

pub use codec::{DecodeResult, LdpcCode, LlrVector, SystematicGenerator, TannerGraph};
pub use gf2::{CodeParams, ColumnPermutation, Gf2Matrix};
pub use mprt::{Comm, Partition, Rank};
