use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Symmetric sparse matrix in compressed sparse row form.
///
/// Both triangles are stored; column indices within a row are sorted.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricSparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SymmetricSparseMatrix {
    /// Zero matrix with the given sorted per-row column pattern.
    pub fn with_pattern(pattern: &[Vec<usize>]) -> Self {
        let n = pattern.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for cols in pattern {
            col_idx.extend_from_slice(cols);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        Self {
            n,
            row_ptr,
            col_idx,
            values: vec![0.0; nnz],
        }
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[lo..hi].binary_search(&j).ok().map(|k| lo + k)
    }

    /// Adds `v` to entry `(i, j)`, which must be in the pattern.
    pub(crate) fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .position(i, j)
            .expect("entry outside the assembled sparsity pattern");
        self.values[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.values[k])
    }

    /// Iterator over `(column, value)` of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[lo..hi]
            .iter()
            .copied()
            .zip(self.values[lo..hi].iter().copied())
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::dims("sparse matvec", self.n, x.len()));
        }
        Ok(self.matvec_unchecked(x))
    }

    fn matvec_unchecked(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `x^T A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n {
            return Err(Error::dims("quadratic form", self.n, x.len()));
        }
        Ok((0..self.n)
            .map(|i| x[i] * self.row(i).map(|(j, v)| v * x[j]).sum::<f64>())
            .sum())
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != self.n || y.len() != self.n {
            return Err(Error::dims("bilinear form", self.n, x.len().min(y.len())));
        }
        Ok((0..self.n)
            .map(|i| x[i] * self.row(i).map(|(j, v)| v * y[j]).sum::<f64>())
            .sum())
    }

    /// Applies the matrix to every row of `x` (`X A`, equal to `(A X^T)^T`).
    pub fn apply_rows(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.n {
            return Err(Error::dims("sparse apply_rows", self.n, x.cols()));
        }
        let mut out = Matrix::zeros(x.rows(), self.n);
        for r in 0..x.rows() {
            let src = x.row(r);
            let dst = out.row_mut(r);
            for (i, d) in dst.iter_mut().enumerate() {
                *d = self.row(i).map(|(j, v)| v * src[j]).sum();
            }
        }
        Ok(out)
    }

    /// Row sums, the diagonal of the lumped matrix.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v).sum())
            .collect()
    }

    pub fn sum_all(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= c;
        }
        out
    }

    /// Bitwise symmetry check.
    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| {
            self.row(i)
                .all(|(j, v)| self.get(j, i).to_bits() == v.to_bits())
        })
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m.set(i, j, v);
            }
        }
        m
    }
}
