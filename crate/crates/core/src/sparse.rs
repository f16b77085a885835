//! Compressed sparse row storage with a fixed pattern.

use nalgebra::DMatrix;

/// Square CSR matrix. Columns within a row are sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a zero matrix from per-row column lists (deduplicated here).
    pub fn from_pattern(mut rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for cols in rows.iter_mut() {
            cols.sort_unstable();
            cols.dedup();
            col_idx.extend_from_slice(cols);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        Self { n, row_ptr, col_idx, values: vec![0.0; nnz] }
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        let rows = (0..a.nrows()).map(|i| (0..a.ncols()).filter(|&j| a[(i, j)] != 0.0).collect()).collect();
        let mut m = Self::from_pattern(rows);
        for i in 0..m.n {
            for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                m.values[k] = a[(i, m.col_idx[k])];
            }
        }
        m
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    /// Index into `values` of entry (i, j), if it is in the pattern.
    pub fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()].binary_search(&j).ok().map(|k| range.start + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "dimension mismatch in CSR product");
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                a[(i, j)] = v;
            }
        }
        a
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_and_product() {
        let mut m = CsrMatrix::from_pattern(vec![vec![1, 0, 1], vec![1], vec![2, 0]]);
        assert_eq!(m.nnz(), 5);
        let k = m.slot(2, 0).unwrap();
        m.values[k] = 3.0;
        let k = m.slot(0, 1).unwrap();
        m.values[k] = 2.0;
        assert_eq!(m.get(2, 0), 3.0);
        assert_eq!(m.get(1, 2), 0.0);
        assert_eq!(m.mul_vec(&[1.0, 1.0, 1.0]), vec![2.0, 0.0, 3.0]);
        let back = CsrMatrix::from_dense(&m.to_dense());
        assert_eq!(back.nnz(), 2);
        assert_eq!(back.to_dense(), m.to_dense());
    }
}
