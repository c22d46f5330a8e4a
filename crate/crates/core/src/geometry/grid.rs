use crate::error::{Error, Result};

use super::SymmetricSparseMatrix;

/// Uniform cell-centered grid on `(0, L)`.
#[derive(Clone, Debug, PartialEq)]
pub struct UniformGrid1D {
    length: f64,
    n_cells: usize,
}

impl UniformGrid1D {
    pub fn new(length: f64, n_cells: usize) -> Result<Self> {
        if !(length > 0.0) || n_cells == 0 {
            return Err(Error::InvalidArgument(format!(
                "grid needs L > 0 and n_cells >= 1 (got L={length}, n_cells={n_cells})"
            )));
        }
        Ok(Self { length, n_cells })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn h(&self) -> f64 {
        self.length / self.n_cells as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.h()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| self.center(i)).collect()
    }

    /// Finite-volume mass matrix `h * I`.
    pub fn mass_matrix(&self) -> SymmetricSparseMatrix {
        SymmetricSparseMatrix::diagonal(&vec![self.h(); self.n_cells])
    }
}
