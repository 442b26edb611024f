//! Dense bit matrices over GF(2) and the linear algebra behind code
//! construction: Gallager's regular parity-check construction, rank and
//! null-space computation by Gaussian elimination, and conversion of a
//! generator matrix to systematic standard form `[I_k : P]`.
//!
//! Matrices are stored row-major with 64 entries packed per word. Packing is
//! an internal choice only; every public contract is in terms of per-entry
//! 0/1 values.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum Gf2Error {
    #[error("matrix dimensions must be at least 1x1, got {rows}x{cols}")]
    EmptyMatrix { rows: usize, cols: usize },
    #[error("dimension mismatch: vector length {vec_len} does not match {expected}")]
    DimensionMismatch { vec_len: usize, expected: usize },
    #[error("row weight {wr} must divide code length {n}")]
    RowWeightDoesNotDivide { n: usize, wr: usize },
    #[error("invalid code parameters n={n}, wr={wr}, wc={wc}: {reason}")]
    InvalidParams {
        n: usize,
        wr: usize,
        wc: usize,
        reason: &'static str,
    },
    #[error("code has no information bits")]
    NoInformationBits,
    #[error("matrix rows are linearly dependent (rank {rank} < {rows} rows)")]
    RankDeficient { rank: usize, rows: usize },
    #[error("permutation of length {len} is not a bijection")]
    NotABijection { len: usize },
    #[error("permutation length {perm_len} does not match column count {cols}")]
    PermutationLengthMismatch { perm_len: usize, cols: usize },
}

const WORD_BITS: usize = 64;

/// Dense binary matrix; entries are 0 or 1.
#[derive(Clone, PartialEq, Eq)]
pub struct Gf2Matrix {
    rows: usize,
    cols: usize,
    words_per_row: usize,
    bits: Vec<u64>,
}

impl Gf2Matrix {
    /// All-zero matrix. Panics if either dimension is zero; zero-sized
    /// matrices are rejected because no operation here produces or accepts
    /// them.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be >= 1");
        let words_per_row = cols.div_ceil(WORD_BITS);
        Gf2Matrix {
            rows,
            cols,
            words_per_row,
            bits: vec![0; rows * words_per_row],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    /// Builds a matrix from per-row entry slices (values 0/1).
    pub fn from_rows(rows: &[Vec<u8>]) -> Self {
        assert!(!rows.is_empty(), "need at least one row");
        let cols = rows[0].len();
        let mut m = Self::zeros(rows.len(), cols);
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), cols, "ragged rows");
            for (c, &bit) in row.iter().enumerate() {
                m.set(r, c, bit);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u8 {
        debug_assert!(r < self.rows && c < self.cols);
        let word = self.bits[r * self.words_per_row + c / WORD_BITS];
        ((word >> (c % WORD_BITS)) & 1) as u8
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, bit: u8) {
        debug_assert!(r < self.rows && c < self.cols);
        let idx = r * self.words_per_row + c / WORD_BITS;
        let mask = 1u64 << (c % WORD_BITS);
        if bit & 1 == 1 {
            self.bits[idx] |= mask;
        } else {
            self.bits[idx] &= !mask;
        }
    }

    /// Packed words of one row; trailing bits beyond `cols` are zero.
    pub fn row_words(&self, r: usize) -> &[u64] {
        &self.bits[r * self.words_per_row..(r + 1) * self.words_per_row]
    }

    pub fn row_weight(&self, r: usize) -> usize {
        self.row_words(r).iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn col_weight(&self, c: usize) -> usize {
        (0..self.rows).filter(|&r| self.get(r, c) == 1).count()
    }

    /// Column indices of the ones in row `r`, ascending.
    pub fn row_support(&self, r: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.row_weight(r));
        for (wi, &w) in self.row_words(r).iter().enumerate() {
            let mut word = w;
            while word != 0 {
                let bit = word.trailing_zeros() as usize;
                out.push(wi * WORD_BITS + bit);
                word &= word - 1;
            }
        }
        out
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let (a0, b0) = (a * self.words_per_row, b * self.words_per_row);
        for i in 0..self.words_per_row {
            self.bits.swap(a0 + i, b0 + i);
        }
    }

    /// XORs row `src` into row `dst`.
    pub fn xor_row_into(&mut self, src: usize, dst: usize) {
        assert_ne!(src, dst);
        let (s0, d0) = (src * self.words_per_row, dst * self.words_per_row);
        for i in 0..self.words_per_row {
            let v = self.bits[s0 + i];
            self.bits[d0 + i] ^= v;
        }
    }

    /// Returns the matrix whose column `j` is column `perm[j]` of `self`.
    pub fn permute_columns(&self, perm: &ColumnPermutation) -> Result<Gf2Matrix, Gf2Error> {
        if perm.len() != self.cols {
            return Err(Gf2Error::PermutationLengthMismatch {
                perm_len: perm.len(),
                cols: self.cols,
            });
        }
        let mut out = Gf2Matrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (new_c, &old_c) in perm.as_slice().iter().enumerate() {
                if self.get(r, old_c) == 1 {
                    out.set(r, new_c, 1);
                }
            }
        }
        Ok(out)
    }

    /// Entry-wise 0/1 rows, mostly for tests and debugging.
    pub fn to_dense(&self) -> Vec<Vec<u8>> {
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self.get(r, c)).collect())
            .collect()
    }
}

impl std::fmt::Debug for Gf2Matrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "Gf2Matrix {}x{}", self.rows, self.cols)?;
        for r in 0..self.rows {
            for c in 0..self.cols {
                write!(f, "{}", self.get(r, c))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Parameters of a regular Gallager code: length `n`, `wr` ones per row,
/// `wc` ones per column.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CodeParams {
    pub n: usize,
    pub wr: usize,
    pub wc: usize,
}

impl CodeParams {
    pub fn new(n: usize, wr: usize, wc: usize) -> Result<Self, Gf2Error> {
        if n == 0 || wr == 0 || wc == 0 {
            return Err(Gf2Error::InvalidParams { n, wr, wc, reason: "all parameters must be >= 1" });
        }
        if !n.is_multiple_of(wr) {
            return Err(Gf2Error::RowWeightDoesNotDivide { n, wr });
        }
        if wc >= wr {
            return Err(Gf2Error::InvalidParams { n, wr, wc, reason: "need wr > wc for a positive design rate" });
        }
        // wc bands of n/wr rows each must not exceed n rows; implied by wc < wr.
        Ok(CodeParams { n, wr, wc })
    }

    /// Rows of the constructed parity-check matrix: one band of `n/wr` rows
    /// per unit of column weight.
    pub fn check_rows(&self) -> usize {
        self.wc * (self.n / self.wr)
    }

    /// Design rate `1 - wc/wr`. The realized rate `k/n` can be higher when
    /// the construction yields linearly dependent rows.
    pub fn design_rate(&self) -> f64 {
        1.0 - self.wc as f64 / self.wr as f64
    }
}

/// Bijective map over column indices; `perm[new] = old`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnPermutation {
    perm: Vec<usize>,
}

impl ColumnPermutation {
    pub fn new(perm: Vec<usize>) -> Result<Self, Gf2Error> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &p in &perm {
            if p >= n || seen[p] {
                return Err(Gf2Error::NotABijection { len: n });
            }
            seen[p] = true;
        }
        Ok(ColumnPermutation { perm })
    }

    pub fn identity(n: usize) -> Self {
        ColumnPermutation { perm: (0..n).collect() }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(i, &p)| i == p)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.perm
    }

    pub fn inverse(&self) -> ColumnPermutation {
        let mut inv = vec![0; self.perm.len()];
        for (new, &old) in self.perm.iter().enumerate() {
            inv[old] = new;
        }
        ColumnPermutation { perm: inv }
    }
}

/// Gallager's construction for a regular `(wc, wr)` parity-check matrix.
///
/// The matrix is `wc` stacked bands of `n/wr` rows. Band 0 has row `i` with
/// ones at columns `[i*wr, (i+1)*wr)`; every further band is an independent
/// uniform-random column permutation of band 0 drawn from the seeded
/// generator. The same seed always yields the same matrix.
pub fn gallager_construct(params: CodeParams, seed: u64) -> Gf2Matrix {
    let CodeParams { n, wr, wc } = params;
    let rows_per_band = n / wr;
    let mut h = Gf2Matrix::zeros(params.check_rows(), n);

    // Band 0: contiguous blocks of wr ones.
    for i in 0..rows_per_band {
        for c in i * wr..(i + 1) * wr {
            h.set(i, c, 1);
        }
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for band in 1..wc {
        let perm = fisher_yates(n, &mut rng);
        // Column j of band 0 becomes column perm[j] of this band, so each
        // band still touches every column exactly once.
        for i in 0..rows_per_band {
            for &col in &perm[i * wr..(i + 1) * wr] {
                h.set(band * rows_per_band + i, col, 1);
            }
        }
    }
    h
}

fn fisher_yates<R: Rng>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    perm
}

/// GF(2) rank by Gaussian elimination on a scratch copy.
pub fn rank_gf2(m: &Gf2Matrix) -> usize {
    rref(m).1.len()
}

/// Reduced row echelon form and the pivot columns, ascending.
fn rref(m: &Gf2Matrix) -> (Gf2Matrix, Vec<usize>) {
    let mut a = m.clone();
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..a.cols {
        if row == a.rows {
            break;
        }
        // Lowest-index row at or below `row` with a one in this column.
        let Some(pivot_row) = (row..a.rows).find(|&r| a.get(r, col) == 1) else {
            continue;
        };
        a.swap_rows(row, pivot_row);
        for r in 0..a.rows {
            if r != row && a.get(r, col) == 1 {
                a.xor_row_into(row, r);
            }
        }
        pivots.push(col);
        row += 1;
    }
    (a, pivots)
}

/// Basis of the null space of `h`: a `k x n` matrix `G` with
/// `k = n - rank(h)` linearly independent rows, each satisfying
/// `h * g^T = 0`.
pub fn null_space(h: &Gf2Matrix) -> Result<Gf2Matrix, Gf2Error> {
    let n = h.cols();
    let (reduced, pivots) = rref(h);
    let k = n - pivots.len();
    if k == 0 {
        return Err(Gf2Error::NoInformationBits);
    }
    let is_pivot = {
        let mut v = vec![false; n];
        for &p in &pivots {
            v[p] = true;
        }
        v
    };
    let free_cols: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();

    let mut g = Gf2Matrix::zeros(k, n);
    for (gi, &f) in free_cols.iter().enumerate() {
        g.set(gi, f, 1);
        for (pr, &p) in pivots.iter().enumerate() {
            if reduced.get(pr, f) == 1 {
                g.set(gi, p, 1);
            }
        }
    }
    Ok(g)
}

/// Converts a full-row-rank generator into standard form `[I_k : P]`.
///
/// Returns the standard-form matrix and the column permutation that was
/// applied (`perm[new] = old`): permuting the original generator's columns
/// by it and row-reducing reproduces the returned matrix exactly. Pivot
/// ties are broken toward the lowest-index column, so the result is
/// deterministic; a generator already in standard form comes back unchanged
/// with the identity permutation.
pub fn to_standard_form(g: &Gf2Matrix) -> Result<(Gf2Matrix, ColumnPermutation), Gf2Error> {
    let (reduced, pivots) = rref(g);
    if pivots.len() < g.rows() {
        return Err(Gf2Error::RankDeficient { rank: pivots.len(), rows: g.rows() });
    }
    let n = g.cols();
    let is_pivot = {
        let mut v = vec![false; n];
        for &p in &pivots {
            v[p] = true;
        }
        v
    };
    let mut order: Vec<usize> = pivots.clone();
    order.extend((0..n).filter(|&c| !is_pivot[c]));
    let perm = ColumnPermutation::new(order).expect("pivot/free split is a bijection");
    let std_form = reduced.permute_columns(&perm)?;
    Ok((std_form, perm))
}

/// Row-vector times matrix over GF(2): `p^T = m^T G`.
pub fn mat_vec_mul_gf2(m: &[u8], g: &Gf2Matrix) -> Result<Vec<u8>, Gf2Error> {
    if m.len() != g.rows() {
        return Err(Gf2Error::DimensionMismatch { vec_len: m.len(), expected: g.rows() });
    }
    let mut acc = vec![0u64; g.words_per_row];
    for (i, &bit) in m.iter().enumerate() {
        if bit & 1 == 1 {
            for (a, &w) in acc.iter_mut().zip(g.row_words(i)) {
                *a ^= w;
            }
        }
    }
    let mut out = vec![0u8; g.cols()];
    for (c, o) in out.iter_mut().enumerate() {
        *o = ((acc[c / WORD_BITS] >> (c % WORD_BITS)) & 1) as u8;
    }
    Ok(out)
}
