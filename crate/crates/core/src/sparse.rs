//! Triplet accumulation and compressed row storage.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// One matrix contribution `(row, col, value)`; duplicates are summed.
pub type Triplet = (usize, usize, f64);

/// Square matrix in compressed sparse row form.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    dim: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Sums duplicate triplets and sorts columns within each row.
    pub fn compress(dim: usize, triplets: &[Triplet]) -> Result<Self> {
        let mut counts = vec![0usize; dim + 1];
        for &(r, c, _) in triplets {
            if r >= dim || c >= dim {
                return Err(Error::IndexOutOfRange { row: r, col: c, dim });
            }
            counts[r + 1] += 1;
        }
        for i in 0..dim {
            counts[i + 1] += counts[i];
        }
        // bucket by row, keeping input order inside each row
        let mut next = counts.clone();
        let mut bucket = vec![(0usize, 0.0f64); triplets.len()];
        for &(r, c, v) in triplets {
            bucket[next[r]] = (c, v);
            next[r] += 1;
        }
        let mut row_offsets = Vec::with_capacity(dim + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for r in 0..dim {
            let row = &mut bucket[counts[r]..counts[r + 1]];
            // stable sort: duplicate sums follow input order, hence deterministic
            row.sort_by_key(|&(c, _)| c);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut s = 0.0;
                while k < row.len() && row[k].0 == c {
                    s += row[k].1;
                    k += 1;
                }
                col_indices.push(c);
                values.push(s);
            }
            row_offsets.push(col_indices.len());
        }
        Ok(CsrMatrix { dim, row_offsets, col_indices, values })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_offsets[r]..self.row_offsets[r + 1];
        self.col_indices[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_offsets[r]..self.row_offsets[r + 1];
        match self.col_indices[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        Ok((0..self.dim).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect())
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn transpose(&self) -> CsrMatrix {
        let triplets: Vec<Triplet> =
            (0..self.dim).flat_map(|r| self.row(r).map(move |(c, v)| (c, r, v))).collect();
        CsrMatrix::compress(self.dim, &triplets).expect("transposed indices stay in range")
    }
}
