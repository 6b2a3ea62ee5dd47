use crate::matrix::Mat;
use crate::scalar::Scalar;

/// Compressed sparse rows. Used for the banded products inside the
/// iteration loop and the power iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr<T> {
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> Csr<T> {
    /// Keeps every entry that is not exactly zero.
    pub fn from_dense(m: &Mat<T>) -> Self {
        let mut row_ptr = Vec::with_capacity(m.rows() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..m.rows() {
            for (j, &v) in m.row(i).iter().enumerate() {
                if v != T::zero() {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { cols: m.cols(), row_ptr, col_idx, values }
    }

    pub fn from_rows(cols: usize, rows: &[Vec<(usize, T)>]) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for r in rows {
            for &(j, v) in r {
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Self { cols, row_ptr, col_idx, values }
    }

    pub fn rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    /// `self · x` for a dense `x`.
    pub fn mul_mat(&self, x: &Mat<T>) -> Mat<T> {
        assert_eq!(self.cols, x.rows(), "sparse product dimension mismatch");
        let d = x.cols();
        let mut out = Mat::zeros(self.rows(), d);
        for i in 0..self.rows() {
            let out_row = out.row_mut(i);
            for (j, a) in self.row(i) {
                for (o, &b) in out_row.iter_mut().zip(x.row(j)) {
                    *o = *o + a * b;
                }
            }
        }
        out
    }

    /// `selfᵀ · x` for a dense `x`.
    pub fn tr_mul_mat(&self, x: &Mat<T>) -> Mat<T> {
        assert_eq!(self.rows(), x.rows(), "sparse product dimension mismatch");
        let d = x.cols();
        let mut out = Mat::zeros(self.cols, d);
        for i in 0..self.rows() {
            for (j, a) in self.row(i) {
                let out_row = out.row_mut(j);
                for (o, &b) in out_row.iter_mut().zip(x.row(i)) {
                    *o = *o + a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.rows()).map(|i| self.row(i).fold(T::zero(), |s, (j, a)| s + a * x[j])).collect()
    }

    pub fn to_dense(&self) -> Mat<T> {
        let mut m = Mat::zeros(self.rows(), self.cols);
        for i in 0..self.rows() {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }
}
