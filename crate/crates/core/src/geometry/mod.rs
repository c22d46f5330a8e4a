//! Discrete domains, P1 assembly on the unit square, cell-centered 1D grids
//! and the discrete L2 norm.

mod fem;
mod grid;
mod mesh;
mod sparse;

pub use fem::{
    assemble_darcy_stiffness, assemble_mass_matrix, assemble_stiffness, darcy_coefficients,
    vh_norm, DirichletSystem, FieldVector,
};
pub use grid::UniformGrid1D;
pub use mesh::{Point, StructuredTriMesh};
pub use sparse::SymmetricSparseMatrix;

/// Convenience wrapper with the same contract as
/// [`StructuredTriMesh::unit_square`].
pub fn build_unit_square_mesh(n_div: usize) -> crate::Result<StructuredTriMesh> {
    StructuredTriMesh::unit_square(n_div)
}
