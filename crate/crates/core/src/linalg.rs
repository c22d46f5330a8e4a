//! Dense row-major matrices, a `matrixmultiply` backed GEMM, a symmetric
//! eigensolver front-end and a banded Cholesky factorization.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims("Matrix::from_vec", rows * cols, data.len()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::dims("Matrix::from_rows", cols, r.len()));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Copies the listed rows, in order, into a new matrix.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(idx.len(), self.cols);
        for (k, &i) in idx.iter().enumerate() {
            out.row_mut(k).copy_from_slice(self.row(i));
        }
        out
    }

    /// Stacks `self` on top of `other`.
    pub fn vstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::dims("Matrix::vstack", self.cols, other.cols));
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(Matrix {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }

    /// Splits rows `[0, at)` and `[at, rows)`.
    pub fn split_rows(&self, at: usize) -> (Matrix, Matrix) {
        let at = at.min(self.rows);
        let top = Matrix {
            rows: at,
            cols: self.cols,
            data: self.data[..at * self.cols].to_vec(),
        };
        let bottom = Matrix {
            rows: self.rows - at,
            cols: self.cols,
            data: self.data[at * self.cols..].to_vec(),
        };
        (top, bottom)
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<f64>) -> Matrix {
        Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(self.rows, other.cols);
        gemm(1.0, self, Trans::No, other, Trans::No, 0.0, &mut out)?;
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trans {
    No,
    Yes,
}

/// `c <- alpha * op(a) * op(b) + beta * c`.
pub fn gemm(
    alpha: f64,
    a: &Matrix,
    ta: Trans,
    b: &Matrix,
    tb: Trans,
    beta: f64,
    c: &mut Matrix,
) -> Result<()> {
    let (m, k, rsa, csa) = match ta {
        Trans::No => (a.rows, a.cols, a.cols as isize, 1isize),
        Trans::Yes => (a.cols, a.rows, 1isize, a.cols as isize),
    };
    let (kb, n, rsb, csb) = match tb {
        Trans::No => (b.rows, b.cols, b.cols as isize, 1isize),
        Trans::Yes => (b.cols, b.rows, 1isize, b.cols as isize),
    };
    if k != kb {
        return Err(Error::dims("gemm inner", k, kb));
    }
    if c.rows != m || c.cols != n {
        return Err(Error::dims("gemm output", m * n, c.rows * c.cols));
    }
    if m == 0 || n == 0 {
        return Ok(());
    }
    if k == 0 {
        for v in &mut c.data {
            *v *= beta;
        }
        return Ok(());
    }
    // SAFETY: dimensions and strides were checked against the backing
    // buffers above; `c` does not alias `a` or `b` (exclusive borrow).
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.data.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    Ok(())
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues sorted in
/// nonincreasing order. Column `k` of the returned matrix is the eigenvector
/// of `values[k]`.
pub fn symmetric_eigen_desc(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    if a.rows != a.cols {
        return Err(Error::dims("symmetric_eigen_desc", a.rows, a.cols));
    }
    let n = a.rows;
    let eig = SymmetricEigen::new(a.to_nalgebra());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// Flips the sign of each column so that its entry of largest magnitude is
/// positive (first such entry on ties).
pub fn normalize_column_signs(v: &mut Matrix) {
    for j in 0..v.cols {
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for i in 0..v.rows {
            let x = v.get(i, j);
            if x.abs() > best {
                best = x.abs();
                sign = x.signum();
            }
        }
        if sign < 0.0 {
            for i in 0..v.rows {
                let x = v.get(i, j);
                v.set(i, j, -x);
            }
        }
    }
}

/// Cholesky factor `L` of a symmetric positive definite band matrix,
/// stored row by row as the `bandwidth + 1` entries left of and including the
/// diagonal.
#[derive(Clone, Debug)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    lower: Vec<f64>,
}

impl BandedCholesky {
    /// Factors the matrix given by `entries(i)`, which yields `(j, a_ij)`
    /// pairs of row `i`; only `j <= i` entries are read.
    pub fn factor<I>(n: usize, mut entries: impl FnMut(usize) -> I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
        let mut bw = 0;
        for i in 0..n {
            let r: Vec<(usize, f64)> = entries(i).into_iter().filter(|&(j, _)| j <= i).collect();
            for &(j, _) in &r {
                bw = bw.max(i - j);
            }
            rows.push(r);
        }
        let w = bw + 1;
        let mut lower = vec![0.0; n * w];
        for (i, r) in rows.iter().enumerate() {
            for &(j, v) in r {
                lower[i * w + (j + bw - i)] += v;
            }
        }
        for i in 0..n {
            let i0 = i.saturating_sub(bw);
            for j in i0..=i {
                let j0 = j.saturating_sub(bw).max(i0);
                let mut s = lower[i * w + (j + bw - i)];
                for k in j0..j {
                    s -= lower[i * w + (k + bw - i)] * lower[j * w + (k + bw - j)];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::NotPositiveDefinite(format!(
                            "pivot {i} = {s:e} in banded Cholesky"
                        )));
                    }
                    lower[i * w + bw] = s.sqrt();
                } else {
                    lower[i * w + (j + bw - i)] = s / lower[j * w + bw];
                }
            }
        }
        Ok(Self { n, bw, lower })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.n {
            return Err(Error::dims("BandedCholesky::solve", self.n, rhs.len()));
        }
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        let mut y = rhs.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.lower[i * w + (k + bw - i)] * y[k];
            }
            y[i] = s / self.lower[i * w + bw];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n.min(i + bw + 1) {
                s -= self.lower[k * w + (i + bw - k)] * y[k];
            }
            y[i] = s / self.lower[i * w + bw];
        }
        Ok(y)
    }
}
