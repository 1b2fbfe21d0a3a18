use ndarray::Array2;

use crate::Scalar;

/// Constant compressed-sparse-row matrix, used for block-diagonal propagation
/// over a batch of graphs.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> SparseMatrix<T> {
    /// Builds from `(row, col, value)` triplets. Duplicate coordinates are summed.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, T)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < rows && c < cols, "triplet ({r},{c}) outside {rows}x{cols}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            indices.push(c);
            values.push(v);
            indptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        Self { rows, cols, indptr, indices, values }
    }

    /// Block-diagonal stack of dense blocks; zero entries are dropped.
    pub fn block_diagonal<'a, I>(blocks: I) -> Self
    where
        I: IntoIterator<Item = &'a Array2<T>>,
        T: 'a,
    {
        let mut triplets = Vec::new();
        let mut offset = 0;
        for block in blocks {
            for ((r, c), &v) in block.indexed_iter() {
                if v != T::zero() {
                    triplets.push((offset + r, offset + c, v));
                }
            }
            offset += block.nrows();
        }
        Self::from_triplets(offset, offset, triplets)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn to_dense(&self) -> Array2<T> {
        let mut out = Array2::zeros((self.rows, self.cols));
        for r in 0..self.rows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                out[[r, self.indices[k]]] += self.values[k];
            }
        }
        out
    }

    /// `self · dense`
    pub fn matmul(&self, dense: &Array2<T>) -> Array2<T> {
        let mut out = Array2::zeros((self.rows, dense.ncols()));
        for r in 0..self.rows {
            let mut row = out.row_mut(r);
            for k in self.indptr[r]..self.indptr[r + 1] {
                row.scaled_add(self.values[k], &dense.row(self.indices[k]));
            }
        }
        out
    }

    /// `selfᵀ · dense`
    pub fn transpose_matmul(&self, dense: &Array2<T>) -> Array2<T> {
        let mut out = Array2::zeros((self.cols, dense.ncols()));
        for r in 0..self.rows {
            let src = dense.row(r);
            for k in self.indptr[r]..self.indptr[r + 1] {
                out.row_mut(self.indices[k]).scaled_add(self.values[k], &src);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn matmul_matches_dense() {
        let a = array![[1.0, 0.0, 2.0], [0.0, 0.0, 3.0]];
        let b = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let triplets = vec![(0, 0, 1.0), (0, 2, 2.0), (1, 2, 1.0), (1, 2, 2.0)];
        let s = SparseMatrix::from_triplets(2, 3, triplets);
        assert_eq!(s.to_dense(), a);
        assert_eq!(s.nnz(), 3);
        assert_eq!(s.matmul(&b), a.dot(&b));
        let g = array![[1.0, -1.0], [0.5, 2.0]];
        assert_eq!(s.transpose_matmul(&g), a.t().dot(&g));
    }

    #[test]
    fn block_diagonal_offsets_blocks() {
        let a = array![[1.0, 2.0], [3.0, 0.0]];
        let b = array![[5.0]];
        let s = SparseMatrix::block_diagonal([&a, &b]);
        assert_eq!(s.to_dense(), array![[1.0, 2.0, 0.0], [3.0, 0.0, 0.0], [0.0, 0.0, 5.0]]);
    }
}
