//! Batch processing: MANY vectors distributed over ranks, each rank running
//! the full serial codec on its contiguous share.
//!
//! The root holds the whole input, scatters per-rank blocks by point-to-point
//! sends (staying within the runtime's four routines), and gathers the
//! outputs in rank order, so output vector `i` always corresponds to input
//! vector `i`. Each vector's computation is untouched by distribution:
//! results are bit-identical for every world size. Ranks compute fully
//! independently between scatter and gather.
//!
//! Worlds larger than the vector count are allowed; surplus ranks receive
//! empty blocks and stay idle, though utilization obviously favors more
//! vectors than ranks.

use crate::codec::{
    decode_batch_serial_with, encode, DecodeOptions, LlrVector, SystematicGenerator, TannerGraph,
};
use crate::mprt::{partition, Comm};
use crate::stream::{DistError, ROOT};

const TAG_BATCH_SCATTER: u32 = 0x20;

/// Broadcast the batch size so every rank can derive the same partition.
fn share_batch_size<C: Comm>(count_at_root: Option<usize>, comm: &mut C) -> Result<usize, DistError> {
    let me = comm.rank();
    let payload = if me == ROOT {
        (count_at_root.ok_or(DistError::MissingRootInput)? as u64).to_le_bytes().to_vec()
    } else {
        Vec::new()
    };
    let bytes = comm.bcast(ROOT, &payload)?;
    if bytes.len() != 8 {
        return Err(DistError::LengthMismatch { what: "batch size broadcast", got: bytes.len(), expected: 8 });
    }
    Ok(u64::from_le_bytes(bytes.try_into().expect("checked length")) as usize)
}

/// Scatter `elem_bytes`-sized elements from the root by rank blocks; returns
/// this rank's block.
fn scatter_blocks<C: Comm>(
    all: Option<&[u8]>,
    part: &crate::mprt::Partition,
    elem_bytes: usize,
    comm: &mut C,
) -> Result<Vec<u8>, DistError> {
    let me = comm.rank();
    if me == ROOT {
        let all = all.ok_or(DistError::MissingRootInput)?;
        for r in 1..comm.world_size() {
            let range = part.range(r);
            comm.send(r, TAG_BATCH_SCATTER, &all[range.start * elem_bytes..range.end * elem_bytes])?;
        }
        let mine = part.range(ROOT);
        Ok(all[mine.start * elem_bytes..mine.end * elem_bytes].to_vec())
    } else {
        let block = comm.recv(ROOT, TAG_BATCH_SCATTER)?;
        if block.len() != part.count(me) * elem_bytes {
            return Err(DistError::LengthMismatch {
                what: "scattered block",
                got: block.len(),
                expected: part.count(me) * elem_bytes,
            });
        }
        Ok(block)
    }
}

/// Distributed batch encoding.
///
/// `m_all` is the root's concatenation of `N_e` messages of `k` bits each
/// (one byte per bit). Vectors are distributed contiguously in order; each
/// rank encodes its block serially; the root returns the `n * N_e` output
/// bits in input order. `None` elsewhere.
pub fn batch_encode<C: Comm>(
    m_all: Option<&[u8]>,
    generator: &SystematicGenerator,
    comm: &mut C,
) -> Result<Option<Vec<u8>>, DistError> {
    let k = generator.k();
    let n = generator.n();
    let me = comm.rank();

    if me == ROOT {
        let m_all = m_all.ok_or(DistError::MissingRootInput)?;
        if m_all.len() % k != 0 {
            return Err(DistError::LengthMismatch {
                what: "batch input not divisible by k",
                got: m_all.len(),
                expected: (m_all.len() / k) * k,
            });
        }
    }
    let num_vectors = share_batch_size(m_all.map(|m| m.len() / k), comm)?;
    let part = partition(num_vectors, comm.world_size())?;
    let mine = scatter_blocks(m_all, &part, k, comm)?;

    let mut out = Vec::with_capacity(part.count(me) * n);
    for chunk in mine.chunks_exact(k) {
        out.extend_from_slice(&encode(chunk, generator)?);
    }
    let gathered = comm.gatherv(ROOT, &out, &part, n)?;
    Ok((me == ROOT).then_some(gathered))
}

/// Distributed batch decoding.
///
/// `llrs_all` is the root's concatenation of `N_d` channel-LLR vectors of
/// length `n`. Each rank decodes its contiguous block serially; the root
/// returns the `n * N_d` hard-decision bits in input order. `None`
/// elsewhere.
pub fn batch_decode<C: Comm>(
    llrs_all: Option<&[f64]>,
    graph: &TannerGraph,
    iterations: usize,
    comm: &mut C,
) -> Result<Option<Vec<u8>>, DistError> {
    batch_decode_with(llrs_all, graph, iterations, DecodeOptions::default(), comm)
}

pub fn batch_decode_with<C: Comm>(
    llrs_all: Option<&[f64]>,
    graph: &TannerGraph,
    iterations: usize,
    opts: DecodeOptions,
    comm: &mut C,
) -> Result<Option<Vec<u8>>, DistError> {
    let n = graph.num_vars();
    let me = comm.rank();

    if me == ROOT {
        let llrs = llrs_all.ok_or(DistError::MissingRootInput)?;
        if llrs.len() % n != 0 {
            return Err(DistError::LengthMismatch {
                what: "batch input not divisible by n",
                got: llrs.len(),
                expected: (llrs.len() / n) * n,
            });
        }
    }
    let num_vectors = share_batch_size(llrs_all.map(|y| y.len() / n), comm)?;
    let part = partition(num_vectors, comm.world_size())?;

    let packed_root: Option<Vec<u8>> = llrs_all.map(|y| y.iter().flat_map(|v| v.to_le_bytes()).collect());
    let mine = scatter_blocks(packed_root.as_deref(), &part, n * 8, comm)?;

    let inputs: Vec<LlrVector> = mine
        .chunks_exact(n * 8)
        .map(|vec_bytes| {
            LlrVector(
                vec_bytes
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("chunks_exact")))
                    .collect(),
            )
        })
        .collect();
    let results = decode_batch_serial_with(graph, &inputs, iterations, opts);
    let mut bits = Vec::with_capacity(part.count(me) * n);
    for r in &results {
        bits.extend_from_slice(&r.bits);
    }
    let gathered = comm.gatherv(ROOT, &bits, &part, n)?;
    Ok((me == ROOT).then_some(gathered))
}
