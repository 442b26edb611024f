//! Serial LDPC codec: Tanner-graph construction, systematic encoding, and
//! sum-product (belief propagation) decoding.
//!
//! This is the reference implementation that every distributed mode must
//! match bit-exactly, so all per-node update arithmetic lives here in single
//! functions shared by the serial and distributed paths, and every sum or
//! product is accumulated in ascending neighbor-index order with a fixed
//! association.
//!
//! # Sign convention
//!
//! Externally, LLRs follow the channel convention: positive favors bit 1,
//! and the hard decision is `z = 1` iff `L >= 0`. The check-node tanh
//! product rule is stated for log(p0/p1) quantities, so
//! [`decode_sum_product`] negates the channel LLRs on entry, iterates in the
//! log(p0/p1) domain, and negates the totals on exit. The free-standing
//! message-update operations ([`check_node_update`], [`variable_node_update`],
//! [`total_llr`]) are the plain domain-agnostic formulas.

use crate::gf2::{
    gallager_construct, mat_vec_mul_gf2, null_space, to_standard_form, CodeParams,
    ColumnPermutation, Gf2Error, Gf2Matrix,
};
use thiserror::Error;

/// Magnitude bound applied to LLR values before `tanh`, and to channel LLRs.
pub const LLR_CLAMP: f64 = 30.0;
/// Bound on `atanh` arguments; keeps check-node outputs finite.
pub const ATANH_CLAMP: f64 = 1.0 - 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum CodecError {
    #[error("dimension mismatch: got {got}, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("generator is not in standard form [I_k : P]")]
    NotStandardForm,
    #[error(transparent)]
    Gf2(#[from] Gf2Error),
}

/// Per-variable log-likelihood ratios; positive favors bit 1.
#[derive(Clone, Debug, PartialEq)]
pub struct LlrVector(pub Vec<f64>);

impl LlrVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Bipartite adjacency between variable nodes (codeword bits) and check
/// nodes (parity constraints), stored CSR in both directions.
///
/// Edge ids are dense in `[0, edge_count)` and assigned in check-major
/// order: checks ascending, and within a check its variables ascending.
#[derive(Clone, Debug)]
pub struct TannerGraph {
    num_vars: usize,
    num_checks: usize,
    check_ptr: Vec<usize>,
    check_var: Vec<usize>,
    var_ptr: Vec<usize>,
    var_check: Vec<usize>,
    var_edge: Vec<usize>,
}

impl TannerGraph {
    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_checks(&self) -> usize {
        self.num_checks
    }

    pub fn edge_count(&self) -> usize {
        self.check_var.len()
    }

    /// Edge ids incident to check `c`; identical to the range of its
    /// variable neighbors in [`Self::check_vars`].
    pub fn check_edges(&self, c: usize) -> std::ops::Range<usize> {
        self.check_ptr[c]..self.check_ptr[c + 1]
    }

    /// Variable neighbors of check `c`, ascending.
    pub fn check_vars(&self, c: usize) -> &[usize] {
        &self.check_var[self.check_ptr[c]..self.check_ptr[c + 1]]
    }

    /// Check neighbors of variable `v`, ascending.
    pub fn var_checks(&self, v: usize) -> &[usize] {
        &self.var_check[self.var_ptr[v]..self.var_ptr[v + 1]]
    }

    /// Check-major edge ids incident to variable `v`, in ascending check
    /// order.
    pub fn var_edges(&self, v: usize) -> &[usize] {
        &self.var_edge[self.var_ptr[v]..self.var_ptr[v + 1]]
    }

    /// Dense edge id for the pair `(c, v)`, if adjacent.
    pub fn edge_id(&self, c: usize, v: usize) -> Option<usize> {
        let vars = self.check_vars(c);
        vars.binary_search(&v).ok().map(|pos| self.check_ptr[c] + pos)
    }

    /// True when the hard-decided bits satisfy every parity check.
    pub fn syndrome_ok(&self, bits: &[u8]) -> bool {
        assert_eq!(bits.len(), self.num_vars);
        (0..self.num_checks).all(|c| {
            self.check_vars(c).iter().fold(0u8, |acc, &v| acc ^ (bits[v] & 1)) == 0
        })
    }
}

/// Builds the Tanner graph mirroring the ones of `h`.
pub fn build_graph(h: &Gf2Matrix) -> TannerGraph {
    let num_checks = h.rows();
    let num_vars = h.cols();
    let mut check_ptr = Vec::with_capacity(num_checks + 1);
    let mut check_var = Vec::new();
    check_ptr.push(0);
    for c in 0..num_checks {
        check_var.extend(h.row_support(c));
        check_ptr.push(check_var.len());
    }

    let mut var_counts = vec![0usize; num_vars];
    for &v in &check_var {
        var_counts[v] += 1;
    }
    let mut var_ptr = Vec::with_capacity(num_vars + 1);
    var_ptr.push(0);
    for v in 0..num_vars {
        var_ptr.push(var_ptr[v] + var_counts[v]);
    }
    let mut var_check = vec![0usize; check_var.len()];
    let mut var_edge = vec![0usize; check_var.len()];
    let mut fill = var_ptr.clone();
    for c in 0..num_checks {
        let start = check_ptr[c];
        for (offset, &v) in check_var[start..check_ptr[c + 1]].iter().enumerate() {
            var_check[fill[v]] = c;
            var_edge[fill[v]] = start + offset;
            fill[v] += 1;
        }
    }
    TannerGraph { num_vars, num_checks, check_ptr, check_var, var_ptr, var_check, var_edge }
}

/// Per-edge message state, indexed by dense edge id.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeMessages {
    pub check_to_var: Vec<f64>,
    pub var_to_check: Vec<f64>,
}

impl EdgeMessages {
    pub fn zeroed(graph: &TannerGraph) -> Self {
        EdgeMessages {
            check_to_var: vec![0.0; graph.edge_count()],
            var_to_check: vec![0.0; graph.edge_count()],
        }
    }
}

/// Result of a sum-product decode.
#[derive(Clone, Debug, PartialEq)]
pub struct DecodeResult {
    pub bits: Vec<u8>,
    pub total_llr: LlrVector,
    pub iterations_run: usize,
    pub syndrome_zero: bool,
}

#[inline]
fn clamp_llr(x: f64) -> f64 {
    x.clamp(-LLR_CLAMP, LLR_CLAMP)
}

#[inline]
fn clamp_tanh_product(x: f64) -> f64 {
    x.clamp(-ATANH_CLAMP, ATANH_CLAMP)
}

/// One check node's update: for each incident edge, the tanh-product of all
/// *other* incoming messages, via prefix/suffix products in ascending
/// neighbor order.
pub(crate) fn update_check_node(
    graph: &TannerGraph,
    c: usize,
    var_to_check: &[f64],
    check_to_var: &mut [f64],
    scratch: &mut NodeScratch,
) {
    let range = graph.check_edges(c);
    let deg = range.len();
    if deg == 0 {
        return;
    }
    scratch.terms.clear();
    scratch.prefix.clear();
    // prefix[j] = product of terms 0..j, ascending.
    let mut acc = 1.0;
    scratch.prefix.push(acc);
    for e in range.clone() {
        let t = (clamp_llr(var_to_check[e]) * 0.5).tanh();
        scratch.terms.push(t);
        acc *= t;
        scratch.prefix.push(acc);
    }
    // suffix product accumulated descending; combined once per edge.
    let mut suffix = 1.0;
    for (j, e) in range.clone().enumerate().rev() {
        let product = scratch.prefix[j] * suffix;
        check_to_var[e] = 2.0 * clamp_tanh_product(product).atanh();
        suffix *= scratch.terms[j];
    }
}

/// One variable node's update: for each incident edge, the channel LLR plus
/// all *other* incoming check messages, via prefix/suffix sums in ascending
/// neighbor order.
pub(crate) fn update_variable_node(
    graph: &TannerGraph,
    v: usize,
    channel: &[f64],
    check_to_var: &[f64],
    var_to_check: &mut [f64],
    scratch: &mut NodeScratch,
) {
    let edges = graph.var_edges(v);
    let deg = edges.len();
    if deg == 0 {
        return;
    }
    scratch.terms.clear();
    scratch.prefix.clear();
    let mut acc = 0.0;
    scratch.prefix.push(acc);
    for &e in edges {
        let m = check_to_var[e];
        scratch.terms.push(m);
        acc += m;
        scratch.prefix.push(acc);
    }
    let mut suffix = 0.0;
    for (j, &e) in edges.iter().enumerate().rev() {
        var_to_check[e] = (channel[v] + scratch.prefix[j]) + suffix;
        suffix += scratch.terms[j];
    }
}

/// Total LLR for one variable: channel value plus every incident check
/// message, ascending.
pub(crate) fn total_llr_at(graph: &TannerGraph, v: usize, channel: &[f64], check_to_var: &[f64]) -> f64 {
    let mut acc = channel[v];
    for &e in graph.var_edges(v) {
        acc += check_to_var[e];
    }
    acc
}

/// Reused per-node work buffers; contents are transient.
#[derive(Default)]
pub(crate) struct NodeScratch {
    terms: Vec<f64>,
    prefix: Vec<f64>,
}

/// Updates every check-to-variable message from the variable-to-check
/// messages in `msgs`. Pure: returns a new message set.
pub fn check_node_update(graph: &TannerGraph, msgs: &EdgeMessages) -> EdgeMessages {
    let mut out = msgs.clone();
    let mut scratch = NodeScratch::default();
    for c in 0..graph.num_checks() {
        update_check_node(graph, c, &msgs.var_to_check, &mut out.check_to_var, &mut scratch);
    }
    out
}

/// Updates every variable-to-check message from the check-to-variable
/// messages in `msgs` and the channel LLRs. Pure: returns a new message set.
pub fn variable_node_update(graph: &TannerGraph, msgs: &EdgeMessages, channel: &LlrVector) -> EdgeMessages {
    assert_eq!(channel.len(), graph.num_vars());
    let mut out = msgs.clone();
    let mut scratch = NodeScratch::default();
    for v in 0..graph.num_vars() {
        update_variable_node(graph, v, channel.as_slice(), &msgs.check_to_var, &mut out.var_to_check, &mut scratch);
    }
    out
}

/// Total LLR per variable: `L_v = R_v + sum of incident check messages`.
pub fn total_llr(graph: &TannerGraph, msgs: &EdgeMessages, channel: &LlrVector) -> LlrVector {
    assert_eq!(channel.len(), graph.num_vars());
    LlrVector(
        (0..graph.num_vars())
            .map(|v| total_llr_at(graph, v, channel.as_slice(), &msgs.check_to_var))
            .collect(),
    )
}

/// Hard decision: `z_v = 1` iff `L_v >= 0` (positive LLR favors bit 1; the
/// zero boundary decides 1).
pub fn hard_decision(llr: &LlrVector) -> Vec<u8> {
    llr.as_slice().iter().map(|&l| u8::from(l >= 0.0)).collect()
}

#[derive(Clone, Copy, Debug, Default)]
pub struct DecodeOptions {
    /// Stop as soon as the hard decision satisfies all checks. Off by
    /// default: benchmark runs use the fixed iteration count.
    pub early_exit: bool,
}

/// Sum-product decoding with the flooding schedule.
///
/// Initializes every edge with the channel LLR of its variable, then runs
/// exactly `iterations` rounds of check-node then variable-node updates
/// (no early exit unless opted in), computes totals, and hard-decides.
pub fn decode_sum_product(graph: &TannerGraph, channel: &LlrVector, iterations: usize) -> DecodeResult {
    decode_sum_product_with(graph, channel, iterations, DecodeOptions::default())
}

pub fn decode_sum_product_with(
    graph: &TannerGraph,
    channel: &LlrVector,
    iterations: usize,
    opts: DecodeOptions,
) -> DecodeResult {
    assert!(iterations >= 1, "need at least one iteration");
    assert_eq!(channel.len(), graph.num_vars(), "channel LLR length mismatch");

    // Internal log(p0/p1) domain.
    let internal: Vec<f64> = channel.as_slice().iter().map(|&r| -r).collect();
    let mut var_to_check = vec![0.0; graph.edge_count()];
    for (v, &value) in internal.iter().enumerate() {
        for &e in graph.var_edges(v) {
            var_to_check[e] = value;
        }
    }
    let mut check_to_var = vec![0.0; graph.edge_count()];
    let mut scratch = NodeScratch::default();

    let mut iterations_run = iterations;
    for it in 1..=iterations {
        for c in 0..graph.num_checks() {
            update_check_node(graph, c, &var_to_check, &mut check_to_var, &mut scratch);
        }
        for v in 0..graph.num_vars() {
            update_variable_node(graph, v, &internal, &check_to_var, &mut var_to_check, &mut scratch);
        }
        if opts.early_exit {
            let totals = finish_totals(graph, &internal, &check_to_var);
            let bits = hard_decision(&totals);
            if graph.syndrome_ok(&bits) {
                iterations_run = it;
                return DecodeResult { syndrome_zero: true, bits, total_llr: totals, iterations_run };
            }
        }
    }

    let totals = finish_totals(graph, &internal, &check_to_var);
    let bits = hard_decision(&totals);
    let syndrome_zero = graph.syndrome_ok(&bits);
    DecodeResult { bits, total_llr: totals, iterations_run, syndrome_zero }
}

/// Totals in the external convention (negated out of the internal domain).
fn finish_totals(graph: &TannerGraph, internal: &[f64], check_to_var: &[f64]) -> LlrVector {
    LlrVector(
        (0..graph.num_vars())
            .map(|v| -total_llr_at(graph, v, internal, check_to_var))
            .collect(),
    )
}

/// Decodes a batch of vectors one after the other; element `i` of the output
/// equals `decode_sum_product` applied to element `i` of the input.
pub fn decode_batch_serial(graph: &TannerGraph, inputs: &[LlrVector], iterations: usize) -> Vec<DecodeResult> {
    decode_batch_serial_with(graph, inputs, iterations, DecodeOptions::default())
}

pub fn decode_batch_serial_with(
    graph: &TannerGraph,
    inputs: &[LlrVector],
    iterations: usize,
    opts: DecodeOptions,
) -> Vec<DecodeResult> {
    inputs.iter().map(|r| decode_sum_product_with(graph, r, iterations, opts)).collect()
}

/// Generator matrix validated to be in standard form `[I_k : P]`, so the
/// first `k` output bits are a copy of the message.
#[derive(Clone, Debug)]
pub struct SystematicGenerator {
    matrix: Gf2Matrix,
}

impl SystematicGenerator {
    pub fn new(matrix: Gf2Matrix) -> Result<Self, CodecError> {
        let k = matrix.rows();
        if matrix.cols() < k {
            return Err(CodecError::NotStandardForm);
        }
        for r in 0..k {
            for c in 0..k {
                if matrix.get(r, c) != u8::from(r == c) {
                    return Err(CodecError::NotStandardForm);
                }
            }
        }
        Ok(SystematicGenerator { matrix })
    }

    pub fn k(&self) -> usize {
        self.matrix.rows()
    }

    pub fn n(&self) -> usize {
        self.matrix.cols()
    }

    pub fn parity_cols(&self) -> usize {
        self.n() - self.k()
    }

    pub fn matrix(&self) -> &Gf2Matrix {
        &self.matrix
    }

    /// Entry of the parity block `P` at message row `r`, parity column `j`.
    #[inline]
    pub fn parity_bit(&self, r: usize, j: usize) -> u8 {
        self.matrix.get(r, self.k() + j)
    }
}

/// Systematic encoding: `p[0..k) = m`, `p[k..n) = m^T P`.
pub fn encode(m: &[u8], generator: &SystematicGenerator) -> Result<Vec<u8>, CodecError> {
    if m.len() != generator.k() {
        return Err(CodecError::DimensionMismatch { got: m.len(), expected: generator.k() });
    }
    Ok(mat_vec_mul_gf2(m, generator.matrix())?)
}

/// Syndrome `s = H p^T` over GF(2); zero iff `p` is a codeword.
pub fn syndrome(h: &Gf2Matrix, p: &[u8]) -> Result<Vec<u8>, CodecError> {
    if p.len() != h.cols() {
        return Err(CodecError::DimensionMismatch { got: p.len(), expected: h.cols() });
    }
    let words = p.len().div_ceil(64);
    let mut packed = vec![0u64; words];
    for (i, &bit) in p.iter().enumerate() {
        if bit & 1 == 1 {
            packed[i / 64] |= 1 << (i % 64);
        }
    }
    Ok((0..h.rows())
        .map(|r| {
            let ones: u32 = h.row_words(r).iter().zip(&packed).map(|(a, b)| (a & b).count_ones()).sum();
            (ones & 1) as u8
        })
        .collect())
}

/// A complete code: parity-check matrix, systematic generator, and the
/// column permutation that aligns them.
///
/// The generator produced by null-space computation generally needs a column
/// permutation to reach standard form; the same permutation is applied to
/// the parity-check matrix here so that `h * encode(m)^T = 0` holds for the
/// bundled pair. Permuting columns relabels codeword bits but preserves row
/// and column weights, so a regular construction stays regular.
#[derive(Clone, Debug)]
pub struct LdpcCode {
    pub h: Gf2Matrix,
    pub generator: SystematicGenerator,
    pub column_perm: ColumnPermutation,
    pub params: Option<CodeParams>,
}

impl LdpcCode {
    /// Gallager construction, null space, standard form.
    pub fn construct(params: CodeParams, seed: u64) -> Result<Self, CodecError> {
        let h = gallager_construct(params, seed);
        let mut code = Self::from_h(h)?;
        code.params = Some(params);
        Ok(code)
    }

    /// Builds a code from an externally supplied parity-check matrix.
    pub fn from_h(h: Gf2Matrix) -> Result<Self, CodecError> {
        let g = null_space(&h)?;
        let (g_std, perm) = to_standard_form(&g)?;
        let h_aligned = h.permute_columns(&perm)?;
        Ok(LdpcCode {
            h: h_aligned,
            generator: SystematicGenerator::new(g_std)?,
            column_perm: perm,
            params: None,
        })
    }

    pub fn n(&self) -> usize {
        self.h.cols()
    }

    pub fn k(&self) -> usize {
        self.generator.k()
    }

    /// `k/n`; at least the design rate since dependent parity rows only
    /// enlarge the null space.
    pub fn realized_rate(&self) -> f64 {
        self.k() as f64 / self.n() as f64
    }

    pub fn graph(&self) -> TannerGraph {
        build_graph(&self.h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_h_2_4() -> Gf2Matrix {
        Gf2Matrix::from_rows(&[
            vec![1, 1, 0, 0, 0, 1, 1, 0],
            vec![0, 0, 1, 1, 1, 0, 0, 1],
            vec![1, 1, 0, 0, 0, 1, 0, 1],
            vec![0, 0, 1, 1, 1, 0, 1, 0],
        ])
    }

    fn sample_generator_4x8() -> SystematicGenerator {
        SystematicGenerator::new(Gf2Matrix::from_rows(&[
            vec![1, 0, 0, 0, 0, 1, 0, 0],
            vec![0, 1, 0, 0, 1, 0, 0, 0],
            vec![0, 0, 1, 0, 0, 0, 1, 0],
            vec![0, 0, 0, 1, 1, 1, 1, 1],
        ]))
        .unwrap()
    }

    #[test]
    fn graph_sample_h_shape() {
        let g = build_graph(&sample_h_2_4());
        assert_eq!(g.num_vars(), 8);
        assert_eq!(g.num_checks(), 4);
        assert_eq!(g.edge_count(), 16);
        assert_eq!(g.check_vars(0), &[0, 1, 5, 6]);
        assert_eq!(g.var_checks(0), &[0, 2]);
        assert_eq!(g.edge_id(0, 5), Some(2));
        assert_eq!(g.edge_id(0, 2), None);
    }

    #[test]
    fn graph_zero_and_identity() {
        let zero = build_graph(&Gf2Matrix::zeros(3, 5));
        assert_eq!(zero.edge_count(), 0);
        let ident = build_graph(&Gf2Matrix::identity(3));
        assert_eq!(ident.edge_count(), 3);
        for c in 0..3 {
            assert_eq!(ident.check_vars(c), &[c]);
        }
    }

    #[test]
    fn graph_adjacency_is_symmetric() {
        let g = build_graph(&sample_h_2_4());
        for c in 0..g.num_checks() {
            for &v in g.check_vars(c) {
                assert!(g.var_checks(v).contains(&c));
            }
        }
        for v in 0..g.num_vars() {
            for &c in g.var_checks(v) {
                assert!(g.check_vars(c).contains(&v));
            }
        }
    }

    #[test]
    fn encode_worked_example() {
        let g = sample_generator_4x8();
        let p = encode(&[1, 0, 1, 1], &g).unwrap();
        assert_eq!(p, vec![1, 0, 1, 1, 1, 0, 0, 1]);
        assert_eq!(encode(&[0, 0, 0, 0], &g).unwrap(), vec![0; 8]);
        assert!(matches!(encode(&[1, 0], &g), Err(CodecError::DimensionMismatch { .. })));
    }

    #[test]
    fn non_standard_generator_rejected() {
        let g = Gf2Matrix::from_rows(&[vec![0, 1], vec![1, 0]]);
        assert!(matches!(SystematicGenerator::new(g), Err(CodecError::NotStandardForm)));
    }

    #[test]
    fn syndrome_on_generator_rows_is_zero() {
        let code = LdpcCode::from_h(sample_h_2_4()).unwrap();
        for r in 0..code.k() {
            let row: Vec<u8> = (0..code.n()).map(|c| code.generator.matrix().get(r, c)).collect();
            let s = syndrome(&code.h, &row).unwrap();
            assert!(s.iter().all(|&b| b == 0), "generator row {r}");
        }
    }

    #[test]
    fn syndrome_single_flip_weight() {
        let code = LdpcCode::construct(CodeParams::new(24, 6, 3).unwrap(), 5).unwrap();
        let m: Vec<u8> = (0..code.k()).map(|i| ((i * 5 + 1) % 3 == 0) as u8).collect();
        let mut p = encode(&m, &code.generator).unwrap();
        assert!(syndrome(&code.h, &p).unwrap().iter().all(|&b| b == 0));
        let flip = 7;
        p[flip] ^= 1;
        let s = syndrome(&code.h, &p).unwrap();
        let ones = s.iter().filter(|&&b| b == 1).count();
        assert_eq!(ones, code.h.col_weight(flip));
    }

    #[test]
    fn syndrome_of_sample_codeword_against_its_code() {
        // The generator's rows span a code whose parity-check matrix can be
        // derived directly: rows of H are a basis of the null space of G,
        // since H G^T = 0 is symmetric in the two matrices.
        let g = sample_generator_4x8();
        let h = crate::gf2::null_space(g.matrix()).unwrap();
        let p = encode(&[1, 0, 1, 1], &g).unwrap();
        let s = syndrome(&h, &p).unwrap();
        assert!(s.iter().all(|&b| b == 0));
    }

    /// Frozen from a high-precision scalar evaluation of
    /// 2*atanh(tanh(0.25)*tanh(-0.5)).
    const DEG3_CHECK_EXPECTED: f64 = -0.22733629380264573;

    #[test]
    fn check_node_degree3_frozen_value() {
        let h = Gf2Matrix::from_rows(&[vec![1, 1, 1]]);
        let graph = build_graph(&h);
        let mut msgs = EdgeMessages::zeroed(&graph);
        msgs.var_to_check = vec![0.5, -1.0, 9.0];
        let out = check_node_update(&graph, &msgs);
        // Edge 2's output excludes its own incoming 9.0.
        assert!((out.check_to_var[2] - DEG3_CHECK_EXPECTED).abs() < 1e-12);
        // Inputs unchanged.
        assert_eq!(out.var_to_check, msgs.var_to_check);
    }

    #[test]
    fn check_node_degree2_passthrough() {
        let h = Gf2Matrix::from_rows(&[vec![1, 1]]);
        let graph = build_graph(&h);
        let mut msgs = EdgeMessages::zeroed(&graph);
        msgs.var_to_check = vec![3.0, -0.25];
        let out = check_node_update(&graph, &msgs);
        assert!((out.check_to_var[1] - 3.0).abs() < 1e-12);
        assert!((out.check_to_var[0] - (-0.25)).abs() < 1e-12);
        // At clamp strength the atanh guard saturates instead of overflowing.
        msgs.var_to_check = vec![LLR_CLAMP, 0.0];
        let out = check_node_update(&graph, &msgs);
        assert!(out.check_to_var[1].is_finite());
        assert!(out.check_to_var[1] > 28.0 && out.check_to_var[1] <= LLR_CLAMP);
    }

    #[test]
    fn check_node_zero_annihilates() {
        let h = Gf2Matrix::from_rows(&[vec![1, 1, 1, 1]]);
        let graph = build_graph(&h);
        let mut msgs = EdgeMessages::zeroed(&graph);
        msgs.var_to_check = vec![0.0, 2.0, -3.0, 1.0];
        let out = check_node_update(&graph, &msgs);
        for e in 1..4 {
            assert_eq!(out.check_to_var[e], 0.0, "edge {e} sees the zero input");
        }
    }

    #[test]
    fn variable_node_examples() {
        // Degree-3 variable: one variable shared by three checks.
        let h = Gf2Matrix::from_rows(&[vec![1], vec![1], vec![1]]);
        let graph = build_graph(&h);
        let mut msgs = EdgeMessages::zeroed(&graph);
        msgs.check_to_var = vec![0.2, -0.5, 0.0];
        let out = variable_node_update(&graph, &msgs, &LlrVector(vec![1.0]));
        assert_eq!(out.var_to_check, vec![0.5, 1.2, 0.7]);

        // Degree-2 variable: each outgoing message is the channel value plus
        // the single message from the other edge.
        let h2 = Gf2Matrix::from_rows(&[vec![1], vec![1]]);
        let g2 = build_graph(&h2);
        let mut m2 = EdgeMessages::zeroed(&g2);
        m2.check_to_var = vec![0.75, -2.0];
        let out2 = variable_node_update(&g2, &m2, &LlrVector(vec![1.0]));
        assert_eq!(out2.var_to_check, vec![-1.0, 1.75]);

        // Degree-1 variable: empty sum leaves the channel value.
        let h1 = Gf2Matrix::identity(1);
        let g1 = build_graph(&h1);
        let mut m1 = EdgeMessages::zeroed(&g1);
        m1.check_to_var = vec![42.0];
        let out1 = variable_node_update(&g1, &m1, &LlrVector(vec![-1.5]));
        assert_eq!(out1.var_to_check, vec![-1.5]);
    }

    #[test]
    fn total_llr_examples() {
        let h = sample_h_2_4();
        let graph = build_graph(&h);
        // All R = r and all E = e: column weight 2 gives L = r + 2e.
        let mut msgs = EdgeMessages::zeroed(&graph);
        msgs.check_to_var = vec![0.25; graph.edge_count()];
        let totals = total_llr(&graph, &msgs, &LlrVector(vec![1.5; 8]));
        for v in 0..8 {
            assert!((totals.as_slice()[v] - 2.0).abs() < 1e-15);
        }
        // Zero messages: identity on R.
        let zero = EdgeMessages::zeroed(&graph);
        let r = LlrVector(vec![0.5, -1.0, 2.0, 0.0, -0.25, 3.0, -3.0, 1.0]);
        assert_eq!(total_llr(&graph, &zero, &r), r);

        // A variable with no incident checks keeps its channel value.
        let lonely = build_graph(&Gf2Matrix::from_rows(&[vec![1, 0], vec![1, 0]]));
        let mut m = EdgeMessages::zeroed(&lonely);
        m.check_to_var = vec![1.0, -4.0];
        let totals = total_llr(&lonely, &m, &LlrVector(vec![0.5, -2.5]));
        assert_eq!(totals.as_slice()[1], -2.5);
        assert_eq!(totals.as_slice()[0], 0.5 + 1.0 - 4.0);
    }

    #[test]
    fn hard_decision_rule() {
        assert_eq!(hard_decision(&LlrVector(vec![2.3, -0.1])), vec![1, 0]);
        assert_eq!(hard_decision(&LlrVector(vec![0.0])), vec![1]);
        assert_eq!(hard_decision(&LlrVector(vec![-1.0, -0.5, -7.0])), vec![0, 0, 0]);
    }

    #[test]
    fn decode_noiseless_codeword_is_fixed_point() {
        let code = LdpcCode::from_h(sample_h_2_4()).unwrap();
        let graph = code.graph();
        let m = [1u8, 1, 0, 1, 0];
        let p = encode(&m[..code.k()], &code.generator).unwrap();
        let r: Vec<f64> = p.iter().map(|&b| if b == 1 { LLR_CLAMP } else { -LLR_CLAMP }).collect();
        let result = decode_sum_product(&graph, &LlrVector(r), 5);
        assert_eq!(result.bits, p);
        assert!(result.syndrome_zero);
        assert_eq!(result.iterations_run, 5);
    }

    #[test]
    fn decode_corrects_single_weak_error() {
        let code = LdpcCode::from_h(sample_h_2_4()).unwrap();
        let graph = code.graph();
        let p = encode(&[1, 0, 1, 1, 0], &code.generator).unwrap();
        let mut r: Vec<f64> = p.iter().map(|&b| if b == 1 { 8.0 } else { -8.0 }).collect();
        // One flipped-sign, low-confidence position.
        r[3] = if p[3] == 1 { -0.5 } else { 0.5 };
        let result = decode_sum_product(&graph, &LlrVector(r.clone()), 10);
        assert_eq!(result.bits, p, "decoder should correct the weak error");
        assert!(result.syndrome_zero);
        // Agrees with the exhaustive minimum-distance oracle.
        let ml = brute_force_ml(&code, &r);
        assert_eq!(result.bits, ml);
    }

    /// Exhaustive maximum-likelihood decoding: the codeword whose BPSK image
    /// is closest (squared Euclidean) to the received soft values. LLRs are
    /// proportional to the received amplitudes here, so correlation with the
    /// LLR vector ranks candidates identically.
    fn brute_force_ml(code: &LdpcCode, r: &[f64]) -> Vec<u8> {
        let k = code.k();
        let mut best: Option<(f64, Vec<u8>)> = None;
        for msg_bits in 0u32..(1 << k) {
            let m: Vec<u8> = (0..k).map(|i| ((msg_bits >> i) & 1) as u8).collect();
            let cw = encode(&m, &code.generator).unwrap();
            let score: f64 = cw
                .iter()
                .zip(r)
                .map(|(&b, &y)| if b == 1 { y } else { -y })
                .sum();
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, cw));
            }
        }
        best.unwrap().1
    }

    #[test]
    fn decode_single_iteration_unrolls_to_pipeline() {
        let code = LdpcCode::from_h(sample_h_2_4()).unwrap();
        let graph = code.graph();
        let r = LlrVector(vec![1.2, -0.3, 0.8, -2.0, 0.1, 1.1, -0.9, 0.4]);
        let decoded = decode_sum_product(&graph, &r, 1);

        // Manual composition in the internal log(p0/p1) domain.
        let internal = LlrVector(r.as_slice().iter().map(|&x| -x).collect());
        let mut msgs = EdgeMessages::zeroed(&graph);
        for v in 0..graph.num_vars() {
            for &e in graph.var_edges(v) {
                msgs.var_to_check[e] = internal.as_slice()[v];
            }
        }
        let msgs = check_node_update(&graph, &msgs);
        let msgs = variable_node_update(&graph, &msgs, &internal);
        let totals_internal = total_llr(&graph, &msgs, &internal);
        let totals = LlrVector(totals_internal.as_slice().iter().map(|&x| -x).collect());
        let bits = hard_decision(&totals);

        assert_eq!(decoded.total_llr, totals);
        assert_eq!(decoded.bits, bits);
    }

    /// Expected totals computed by an independent straight-from-the-rules
    /// reference (naive per-edge exclusion products, same clamp policy) on
    /// the sample (2,4) code, three iterations.
    #[test]
    fn decode_matches_independent_reference_values() {
        let graph = build_graph(&sample_h_2_4());
        let r = LlrVector(vec![1.25, -0.5, 0.75, -2.25, 0.375, 1.625, -0.875, 0.0625]);
        let expected_totals = [
            1.443706341678125e0,
            -9.02836759674146e-1,
            9.778536798391338e-1,
            -2.357532628417218e0,
            7.560540136682852e-1,
            1.786647575608034e0,
            -1.19023553230865e0,
            -4.926505588013388e-1,
        ];
        let result = decode_sum_product(&graph, &r, 3);
        for (v, (&got, &want)) in result.total_llr.as_slice().iter().zip(&expected_totals).enumerate() {
            assert!((got - want).abs() < 1e-9, "variable {v}: {got} vs {want}");
        }
        assert_eq!(result.bits, vec![1, 0, 1, 0, 1, 1, 0, 0]);
    }

    #[test]
    fn decode_batch_matches_individual() {
        let code = LdpcCode::from_h(sample_h_2_4()).unwrap();
        let graph = code.graph();
        assert!(decode_batch_serial(&graph, &[], 3).is_empty());
        let inputs: Vec<LlrVector> = (0..10)
            .map(|i| LlrVector((0..8).map(|v| ((i * 8 + v) as f64 * 0.37).sin() * 4.0).collect()))
            .collect();
        let batch = decode_batch_serial(&graph, &inputs, 3);
        for (i, r) in inputs.iter().enumerate() {
            assert_eq!(batch[i], decode_sum_product(&graph, r, 3), "vector {i}");
        }
    }

    #[test]
    fn early_exit_stops_at_clean_syndrome() {
        let code = LdpcCode::from_h(sample_h_2_4()).unwrap();
        let graph = code.graph();
        let p = encode(&[1, 0, 1, 1, 0], &code.generator).unwrap();
        let r: Vec<f64> = p.iter().map(|&b| if b == 1 { 10.0 } else { -10.0 }).collect();
        let result = decode_sum_product_with(&graph, &LlrVector(r), 50, DecodeOptions { early_exit: true });
        assert!(result.syndrome_zero);
        assert!(result.iterations_run < 50);
        assert_eq!(result.bits, p);
    }

    #[test]
    fn deterministic_across_runs() {
        let code = LdpcCode::construct(CodeParams::new(48, 6, 3).unwrap(), 77).unwrap();
        let graph = code.graph();
        let r = LlrVector((0..48).map(|v| ((v * 31 % 17) as f64 - 8.0) * 0.43).collect());
        let a = decode_sum_product(&graph, &r, 8);
        let b = decode_sum_product(&graph, &r, 8);
        assert_eq!(a, b);
    }

    #[test]
    fn constructed_code_realized_rate_bound() {
        for (wc, rate) in [(9usize, 0.25), (6, 0.5), (3, 0.75)] {
            let params = CodeParams::new(1032, 12, wc).unwrap();
            assert_eq!(params.design_rate(), rate);
            let code = LdpcCode::construct(params, 2024).unwrap();
            assert!(code.realized_rate() >= params.design_rate() - 1e-12);
            assert_eq!(code.h.rows(), params.check_rows());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Negating all channel LLRs negates all messages and totals and
        /// flips every decided bit with nonzero LLR. Valid on even row
        /// weight codes, where the all-ones word is a codeword.
        #[test]
        fn sign_equivariance_on_even_weight_code(r in proptest::collection::vec(-6.0f64..6.0, 8)) {
            let graph = build_graph(&sample_h_2_4());
            let pos = decode_sum_product(&graph, &LlrVector(r.clone()), 4);
            let neg_r: Vec<f64> = r.iter().map(|&x| -x).collect();
            let neg = decode_sum_product(&graph, &LlrVector(neg_r), 4);
            for v in 0..8 {
                let lp = pos.total_llr.as_slice()[v];
                let ln = neg.total_llr.as_slice()[v];
                prop_assert!((lp + ln).abs() < 1e-9, "totals not mirrored at {v}: {lp} vs {ln}");
                if lp.abs() > 1e-9 {
                    prop_assert_eq!(pos.bits[v] ^ neg.bits[v], 1);
                }
            }
        }

        #[test]
        fn encode_then_syndrome_is_zero(seed in any::<u64>(), msg_seed in any::<u32>()) {
            let code = LdpcCode::construct(CodeParams::new(24, 6, 3).unwrap(), seed).unwrap();
            let m: Vec<u8> = (0..code.k()).map(|i| ((msg_seed >> (i % 32)) & 1) as u8).collect();
            let p = encode(&m, &code.generator).unwrap();
            prop_assert_eq!(&p[..code.k()], &m[..]);
            let s = syndrome(&code.h, &p).unwrap();
            prop_assert!(s.iter().all(|&b| b == 0));
        }
    }
}
