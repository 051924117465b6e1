//! Compressed sparse row matrices with exact nonzero tracking.

use serde::{Deserialize, Serialize};

/// A CSR matrix. Stored values are never `0.0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    pub rows: usize,
    pub cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)))
    }

    /// Duplicates are summed; entries summing to zero are dropped.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Self {
        let mut t: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        t.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0; rows + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut values = Vec::with_capacity(t.len());
        let mut i = 0;
        while i < t.len() {
            let (r, c, mut v) = t[i];
            assert!(r < rows && c < cols, "triplet ({r}, {c}) outside {rows}x{cols}");
            i += 1;
            while i < t.len() && t[i].0 == r && t[i].1 == c {
                v += t[i].2;
                i += 1;
            }
            if v != 0.0 {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
            }
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        Self::from_triplets(
            rows.len(),
            cols,
            rows.iter()
                .enumerate()
                .flat_map(|(i, r)| r.iter().enumerate().map(move |(j, &v)| (i, j, v))),
        )
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.cols]; self.rows];
        for (r, c, v) in self.triplets() {
            out[r][c] = v;
        }
        out
    }

    /// `y = A x + b`.
    pub fn affine(&self, x: &[f64], b: &[f64], y: &mut Vec<f64>) {
        y.clear();
        y.extend((0..self.rows).map(|r| self.row(r).fold(b[r], |acc, (c, v)| acc + v * x[c])));
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = Vec::new();
        self.affine(x, &vec![0.0; self.rows], &mut y);
        y
    }

    /// `self · other`.
    pub fn matmul(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut triplets = Vec::new();
        let mut acc = vec![0.0; other.cols];
        let mut touched = Vec::new();
        let mut seen = vec![false; other.cols];
        for r in 0..self.rows {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if !seen[c] {
                        seen[c] = true;
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            for &c in &touched {
                triplets.push((r, c, acc[c]));
                acc[c] = 0.0;
                seen[c] = false;
            }
            touched.clear();
        }
        CsrMatrix::from_triplets(self.rows, other.cols, triplets)
    }

    /// Block-diagonal concatenation.
    pub fn block_diag(blocks: &[&CsrMatrix]) -> CsrMatrix {
        let rows = blocks.iter().map(|b| b.rows).sum();
        let cols = blocks.iter().map(|b| b.cols).sum();
        let mut triplets = Vec::new();
        let (mut r0, mut c0) = (0, 0);
        for b in blocks {
            triplets.extend(b.triplets().map(|(r, c, v)| (r + r0, c + c0, v)));
            r0 += b.rows;
            c0 += b.cols;
        }
        CsrMatrix::from_triplets(rows, cols, triplets)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_and_duplicates() {
        let a = CsrMatrix::from_triplets(2, 2, [(0, 0, 1.0), (0, 0, 1.0), (1, 1, 3.0), (0, 1, 0.0)]);
        assert_eq!(a.nnz(), 2);
        let b = CsrMatrix::from_dense(&[vec![1.0, -1.0], vec![0.5, 0.0]]);
        let c = a.matmul(&b);
        assert_eq!(c.to_dense(), vec![vec![2.0, -2.0], vec![1.5, 0.0]]);
        assert_eq!(c.nnz(), 3);
        assert_eq!(c.mul_vec(&[1.0, 1.0]), vec![0.0, 1.5]);
    }
}
