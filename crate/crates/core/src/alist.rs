//! MacKay alist file format for binary parity-check matrices.
//!
//! Layout, for an `m x n` matrix:
//!
//! ```text
//! n m
//! max_col_weight max_row_weight
//! <n column weights>
//! <m row weights>
//! <n lines: 1-based row indices per column, zero-padded to max_col_weight>
//! <m lines: 1-based column indices per row, zero-padded to max_row_weight>
//! ```
//!
//! The writer emits exactly this shape (single spaces, `\n` line ends) so a
//! write/read/write cycle is byte-identical. The reader tokenizes on any
//! whitespace and accepts files from other tools, rejecting inconsistent
//! adjacency between the column and row sections.

use crate::gf2::Gf2Matrix;
use std::fs;
use std::io::{self, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AlistError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("expected integer token, got {got:?} (token {index})")]
    BadToken { got: String, index: usize },
    #[error("truncated file: expected {expected} tokens, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("invalid dimensions {rows}x{cols}")]
    BadDimensions { rows: usize, cols: usize },
    #[error("weight {weight} out of range for {what} {index}")]
    BadWeight { what: &'static str, index: usize, weight: usize },
    #[error("index {value} out of range in {what} {index} (1..={max})")]
    IndexOutOfRange { what: &'static str, index: usize, value: usize, max: usize },
    #[error("duplicate entry at row {row}, column {col}")]
    DuplicateEntry { row: usize, col: usize },
    #[error("column and row sections disagree at row {row}, column {col}")]
    InconsistentAdjacency { row: usize, col: usize },
}

pub fn write_alist<W: Write>(m: &Gf2Matrix, mut w: W) -> io::Result<()> {
    let (rows, cols) = (m.rows(), m.cols());
    let col_weights: Vec<usize> = (0..cols).map(|c| m.col_weight(c)).collect();
    let row_weights: Vec<usize> = (0..rows).map(|r| m.row_weight(r)).collect();
    let max_col = col_weights.iter().copied().max().unwrap_or(0);
    let max_row = row_weights.iter().copied().max().unwrap_or(0);

    writeln!(w, "{} {}", cols, rows)?;
    writeln!(w, "{} {}", max_col, max_row)?;
    writeln!(w, "{}", join(&col_weights))?;
    writeln!(w, "{}", join(&row_weights))?;
    for c in 0..cols {
        let mut entries: Vec<usize> = (0..rows).filter(|&r| m.get(r, c) == 1).map(|r| r + 1).collect();
        entries.resize(max_col, 0);
        writeln!(w, "{}", join(&entries))?;
    }
    for r in 0..rows {
        let mut entries: Vec<usize> = m.row_support(r).iter().map(|&c| c + 1).collect();
        entries.resize(max_row, 0);
        writeln!(w, "{}", join(&entries))?;
    }
    Ok(())
}

fn join(vals: &[usize]) -> String {
    vals.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn read_alist(input: &str) -> Result<Gf2Matrix, AlistError> {
    let mut toks = Tokens::new(input);
    let cols = toks.next_usize()?;
    let rows = toks.next_usize()?;
    if rows == 0 || cols == 0 {
        return Err(AlistError::BadDimensions { rows, cols });
    }
    let max_col = toks.next_usize()?;
    let max_row = toks.next_usize()?;

    let mut col_weights = Vec::with_capacity(cols);
    for c in 0..cols {
        let w = toks.next_usize()?;
        if w > max_col || w > rows {
            return Err(AlistError::BadWeight { what: "column", index: c, weight: w });
        }
        col_weights.push(w);
    }
    let mut row_weights = Vec::with_capacity(rows);
    for r in 0..rows {
        let w = toks.next_usize()?;
        if w > max_row || w > cols {
            return Err(AlistError::BadWeight { what: "row", index: r, weight: w });
        }
        row_weights.push(w);
    }

    let mut m = Gf2Matrix::zeros(rows, cols);
    for (c, &expected) in col_weights.iter().enumerate() {
        let mut seen = 0usize;
        for _ in 0..max_col {
            let v = toks.next_usize()?;
            if v == 0 {
                continue; // padding
            }
            if v > rows {
                return Err(AlistError::IndexOutOfRange { what: "column", index: c, value: v, max: rows });
            }
            let r = v - 1;
            if m.get(r, c) == 1 {
                return Err(AlistError::DuplicateEntry { row: r, col: c });
            }
            m.set(r, c, 1);
            seen += 1;
        }
        if seen != expected {
            return Err(AlistError::BadWeight { what: "column", index: c, weight: seen });
        }
    }
    // Row section must restate the same adjacency.
    for (r, &expected) in row_weights.iter().enumerate() {
        let mut marked = vec![false; cols];
        let mut seen = 0usize;
        for _ in 0..max_row {
            let v = toks.next_usize()?;
            if v == 0 {
                continue;
            }
            if v > cols {
                return Err(AlistError::IndexOutOfRange { what: "row", index: r, value: v, max: cols });
            }
            let c = v - 1;
            if m.get(r, c) == 0 {
                return Err(AlistError::InconsistentAdjacency { row: r, col: c });
            }
            if marked[c] {
                return Err(AlistError::DuplicateEntry { row: r, col: c });
            }
            marked[c] = true;
            seen += 1;
        }
        if seen != expected {
            return Err(AlistError::BadWeight { what: "row", index: r, weight: seen });
        }
    }
    Ok(m)
}

pub fn write_alist_file<P: AsRef<Path>>(m: &Gf2Matrix, path: P) -> io::Result<()> {
    let mut buf = Vec::new();
    write_alist(m, &mut buf)?;
    fs::write(path, buf)
}

pub fn read_alist_file<P: AsRef<Path>>(path: P) -> Result<Gf2Matrix, AlistError> {
    let text = fs::read_to_string(path)?;
    read_alist(&text)
}

struct Tokens<'a> {
    iter: std::str::SplitWhitespace<'a>,
    consumed: usize,
}

impl<'a> Tokens<'a> {
    fn new(s: &'a str) -> Self {
        Tokens { iter: s.split_whitespace(), consumed: 0 }
    }

    fn next_usize(&mut self) -> Result<usize, AlistError> {
        match self.iter.next() {
            None => Err(AlistError::Truncated { expected: self.consumed + 1, found: self.consumed }),
            Some(tok) => {
                self.consumed += 1;
                tok.parse::<usize>().map_err(|_| AlistError::BadToken {
                    got: tok.to_string(),
                    index: self.consumed - 1,
                })
            }
        }
    }
}
