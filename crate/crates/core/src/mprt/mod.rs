//! Message-passing runtime: worker ranks, the four communication routines
//! (send, recv, gatherv, bcast), and balanced work partitioning.
//!
//! Two transports implement the same [`Comm`] contract:
//!
//! - [`mailbox`]: in-process worker threads with per-rank mailboxes; the
//!   default for tests and desk-scale benchmarks.
//! - [`socket`]: length-prefix framed TCP between ranks that may live in
//!   separate processes.
//!
//! Per `(sender, receiver, tag)` channel, delivery is reliable and FIFO.
//! `send` never blocks; `recv` blocks until a matching message arrives or
//! the configured timeout expires. Collectives (`gatherv`, `bcast`) are
//! synchronization points every rank must enter in the same order. Both
//! transports support optional injected per-message latency keyed on an
//! intra-server/inter-server split of the ranks, which emulates multi-server
//! deployments at desk scale.

pub mod mailbox;
pub mod socket;

use std::time::Duration;
use thiserror::Error;

/// Index of one worker in the world, in `[0, world_size)`.
pub type Rank = usize;

/// Tags at or above this value are reserved for collective operations.
pub const COLLECTIVE_TAG_BASE: u32 = 1 << 31;

#[derive(Debug, Error, PartialEq)]
pub enum MprtError {
    #[error("rank {rank} out of range for world of {world_size}")]
    UnknownRank { rank: Rank, world_size: usize },
    #[error("rank {rank} cannot send to or receive from itself")]
    SelfMessage { rank: Rank },
    #[error("tag {tag:#x} is reserved for collective operations")]
    ReservedTag { tag: u32 },
    #[error("recv timed out after {waited_ms} ms waiting for rank {from}, tag {tag} (possible deadlock)")]
    RecvTimeout { from: Rank, tag: u32, waited_ms: u64 },
    #[error("payload of {got} bytes does not match partition count {count} x {elem_bytes} bytes for rank {rank}")]
    PayloadSizeMismatch { rank: Rank, got: usize, count: usize, elem_bytes: usize },
    #[error("partition describes {partition_ranks} ranks but world has {world_size}")]
    PartitionMismatch { partition_ranks: usize, world_size: usize },
    #[error("cannot partition among zero processors")]
    ZeroProcessors,
    #[error("transport failure involving rank {rank}: {detail}")]
    Transport { rank: Rank, detail: String },
}

/// Balanced block distribution of `l` elements over ranks: per-rank counts
/// and starting offsets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    counts: Vec<usize>,
    displs: Vec<usize>,
}

impl Partition {
    /// Builds a partition from explicit per-rank counts, for gathers whose
    /// block sizes do not come from the balanced splitter.
    pub fn from_counts(counts: Vec<usize>) -> Self {
        assert!(!counts.is_empty(), "need at least one rank");
        let mut displs = Vec::with_capacity(counts.len());
        let mut off = 0;
        for &c in &counts {
            displs.push(off);
            off += c;
        }
        Partition { counts, displs }
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn displs(&self) -> &[usize] {
        &self.displs
    }

    pub fn count(&self, rank: Rank) -> usize {
        self.counts[rank]
    }

    pub fn displ(&self, rank: Rank) -> usize {
        self.displs[rank]
    }

    /// Element range owned by `rank`.
    pub fn range(&self, rank: Rank) -> std::ops::Range<usize> {
        self.displs[rank]..self.displs[rank] + self.counts[rank]
    }

    pub fn num_ranks(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.displs.last().map_or(0, |d| d + self.counts[self.counts.len() - 1])
    }
}

/// Splits `l` elements over `n_proc` ranks: `floor(l/n_proc) + 1` elements
/// for ranks below `l % n_proc`, `floor(l/n_proc)` for the rest, so counts
/// never differ by more than one and low ranks carry the remainder.
pub fn partition(l: usize, n_proc: usize) -> Result<Partition, MprtError> {
    if n_proc == 0 {
        return Err(MprtError::ZeroProcessors);
    }
    let base = l / n_proc;
    let rem = l % n_proc;
    let counts: Vec<usize> = (0..n_proc).map(|q| base + usize::from(q < rem)).collect();
    let mut displs = Vec::with_capacity(n_proc);
    let mut off = 0;
    for &c in &counts {
        displs.push(off);
        off += c;
    }
    Ok(Partition { counts, displs })
}

/// Owner of node `index` under interleaved (modulo) distribution.
pub fn interleaved_owner(index: usize, n_proc: usize) -> Rank {
    assert!(n_proc >= 1, "world must have at least one rank");
    index % n_proc
}

/// Counts and displacements of the interleaved ownership classes: rank `r`
/// owns indices `r, r + n_proc, r + 2*n_proc, ...` of `l` total. Gathering
/// one element per owned index in ascending order yields blocks laid out by
/// this partition.
pub fn interleaved_partition(l: usize, n_proc: usize) -> Result<Partition, MprtError> {
    if n_proc == 0 {
        return Err(MprtError::ZeroProcessors);
    }
    let counts: Vec<usize> = (0..n_proc).map(|r| if l > r { (l - r).div_ceil(n_proc) } else { 0 }).collect();
    let mut displs = Vec::with_capacity(n_proc);
    let mut off = 0;
    for &c in &counts {
        displs.push(off);
        off += c;
    }
    Ok(Partition { counts, displs })
}

/// Injected communication latency between ranks grouped into servers.
#[derive(Clone, Debug)]
pub struct LatencyModel {
    server_of: Vec<usize>,
    intra: Duration,
    inter: Duration,
}

impl LatencyModel {
    /// Ranks are split into `servers` contiguous blocks; messages within a
    /// block incur `intra_us`, messages across blocks `inter_us`.
    pub fn two_tier(world_size: usize, servers: usize, intra_us: u64, inter_us: u64) -> Self {
        let servers = servers.max(1);
        let server_of = (0..world_size).map(|r| r * servers / world_size.max(1)).collect();
        LatencyModel {
            server_of,
            intra: Duration::from_micros(intra_us),
            inter: Duration::from_micros(inter_us),
        }
    }

    pub fn server_of(&self, rank: Rank) -> usize {
        self.server_of[rank]
    }

    pub fn delay(&self, from: Rank, to: Rank) -> Duration {
        if self.server_of[from] == self.server_of[to] {
            self.intra
        } else {
            self.inter
        }
    }

    pub fn is_zero(&self) -> bool {
        self.intra.is_zero() && self.inter.is_zero()
    }
}

/// Per-world runtime knobs shared by both transports.
#[derive(Clone, Debug)]
pub struct WorldOptions {
    pub latency: Option<LatencyModel>,
    pub recv_timeout: Duration,
}

impl Default for WorldOptions {
    fn default() -> Self {
        WorldOptions { latency: None, recv_timeout: Duration::from_secs(30) }
    }
}

/// The communication contract each rank holds: point-to-point send/recv plus
/// the gatherv and bcast collectives, built on the same channels.
///
/// The `raw_*` methods are the transport surface; library users call the
/// validated wrappers and collectives.
pub trait Comm {
    fn rank(&self) -> Rank;
    fn world_size(&self) -> usize;

    #[doc(hidden)]
    fn raw_send(&mut self, to: Rank, tag: u32, payload: &[u8]) -> Result<(), MprtError>;
    #[doc(hidden)]
    fn raw_recv(&mut self, from: Rank, tag: u32) -> Result<Vec<u8>, MprtError>;
    /// Fresh reserved tag for the next collective; every rank's sequence
    /// advances identically because all ranks enter collectives in the same
    /// order.
    #[doc(hidden)]
    fn next_collective_tag(&mut self) -> u32;

    /// Reliable ordered delivery to `to` on the `(self, to, tag)` channel.
    /// Non-blocking; buffering is bounded only by memory.
    fn send(&mut self, to: Rank, tag: u32, payload: &[u8]) -> Result<(), MprtError> {
        self.check_peer(to)?;
        check_tag(tag)?;
        self.raw_send(to, tag, payload)
    }

    /// Blocks until a message from `from` with `tag` arrives, or times out
    /// with a deadlock-diagnosis error naming the channel.
    fn recv(&mut self, from: Rank, tag: u32) -> Result<Vec<u8>, MprtError> {
        self.check_peer(from)?;
        check_tag(tag)?;
        self.raw_recv(from, tag)
    }

    /// Every rank receives a copy of the root's payload.
    fn bcast(&mut self, root: Rank, payload: &[u8]) -> Result<Vec<u8>, MprtError> {
        let world_size = self.world_size();
        if root >= world_size {
            return Err(MprtError::UnknownRank { rank: root, world_size });
        }
        let tag = self.next_collective_tag();
        if self.rank() == root {
            for r in 0..world_size {
                if r != root {
                    self.raw_send(r, tag, payload)?;
                }
            }
            Ok(payload.to_vec())
        } else {
            self.raw_recv(root, tag)
        }
    }

    /// Root receives every rank's block concatenated in rank order per the
    /// partition displacements; other ranks receive an empty vector. Each
    /// rank's payload must be exactly `count(rank) * elem_bytes` long.
    fn gatherv(
        &mut self,
        root: Rank,
        local: &[u8],
        part: &Partition,
        elem_bytes: usize,
    ) -> Result<Vec<u8>, MprtError> {
        let world_size = self.world_size();
        if root >= world_size {
            return Err(MprtError::UnknownRank { rank: root, world_size });
        }
        if part.num_ranks() != world_size {
            return Err(MprtError::PartitionMismatch { partition_ranks: part.num_ranks(), world_size });
        }
        assert!(elem_bytes >= 1, "element width must be at least one byte");
        let me = self.rank();
        if local.len() != part.count(me) * elem_bytes {
            return Err(MprtError::PayloadSizeMismatch {
                rank: me,
                got: local.len(),
                count: part.count(me),
                elem_bytes,
            });
        }
        let tag = self.next_collective_tag();
        if me == root {
            let mut out = vec![0u8; part.total() * elem_bytes];
            for r in 0..world_size {
                let offset = part.displ(r) * elem_bytes;
                let expected = part.count(r) * elem_bytes;
                if r == root {
                    out[offset..offset + expected].copy_from_slice(local);
                    continue;
                }
                let block = self.raw_recv(r, tag)?;
                if block.len() != expected {
                    return Err(MprtError::PayloadSizeMismatch {
                        rank: r,
                        got: block.len(),
                        count: part.count(r),
                        elem_bytes,
                    });
                }
                out[offset..offset + expected].copy_from_slice(&block);
            }
            Ok(out)
        } else {
            self.raw_send(root, tag, local)?;
            Ok(Vec::new())
        }
    }

    #[doc(hidden)]
    fn check_peer(&self, peer: Rank) -> Result<(), MprtError> {
        let world_size = self.world_size();
        if peer >= world_size {
            return Err(MprtError::UnknownRank { rank: peer, world_size });
        }
        if peer == self.rank() {
            return Err(MprtError::SelfMessage { rank: peer });
        }
        Ok(())
    }
}

fn check_tag(tag: u32) -> Result<(), MprtError> {
    if tag >= COLLECTIVE_TAG_BASE {
        return Err(MprtError::ReservedTag { tag });
    }
    Ok(())
}
