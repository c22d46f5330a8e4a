//! P1 finite elements on [`StructuredTriMesh`].

use std::collections::BTreeSet;
use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};
use crate::linalg::BandedCholesky;

use super::{StructuredTriMesh, SymmetricSparseMatrix};

/// Nodal (or cell) coefficient vector of a discrete function.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FieldVector(pub Vec<f64>);

impl FieldVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self(vec![c; n])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn sup_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl From<Vec<f64>> for FieldVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl Deref for FieldVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for FieldVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

fn node_pattern(mesh: &StructuredTriMesh) -> Vec<Vec<usize>> {
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); mesh.node_count()];
    for t in mesh.triangles() {
        for &a in t {
            for &b in t {
                adj[a].insert(b);
            }
        }
    }
    adj.into_iter().map(|s| s.into_iter().collect()).collect()
}

/// Gradients of the three barycentric hat functions on triangle `t`, and its
/// area.
fn p1_gradients(mesh: &StructuredTriMesh, t: usize) -> ([[f64; 2]; 3], f64) {
    let [a, b, c] = mesh.triangles()[t];
    let (p0, p1, p2) = (mesh.nodes()[a], mesh.nodes()[b], mesh.nodes()[c]);
    let area = mesh.signed_area(t);
    let s = 1.0 / (2.0 * area);
    (
        [
            [(p1[1] - p2[1]) * s, (p2[0] - p1[0]) * s],
            [(p2[1] - p0[1]) * s, (p0[0] - p2[0]) * s],
            [(p0[1] - p1[1]) * s, (p1[0] - p0[0]) * s],
        ],
        area,
    )
}

/// Adds a symmetric 3x3 element block; entry `(a, b)` and `(b, a)` receive
/// the same value in the same order so the result stays bitwise symmetric.
fn scatter(m: &mut SymmetricSparseMatrix, tri: [usize; 3], local: &[[f64; 3]; 3]) {
    for a in 0..3 {
        m.add(tri[a], tri[a], local[a][a]);
        for b in (a + 1)..3 {
            m.add(tri[a], tri[b], local[a][b]);
            m.add(tri[b], tri[a], local[a][b]);
        }
    }
}

/// Consistent P1 mass matrix. Element block `(A/12) [[2,1,1],[1,2,1],[1,1,2]]`.
pub fn assemble_mass_matrix(mesh: &StructuredTriMesh) -> SymmetricSparseMatrix {
    let mut m = SymmetricSparseMatrix::with_pattern(&node_pattern(mesh));
    for (t, &tri) in mesh.triangles().iter().enumerate() {
        let a12 = mesh.signed_area(t) / 12.0;
        let local = [
            [2.0 * a12, a12, a12],
            [a12, 2.0 * a12, a12],
            [a12, a12, 2.0 * a12],
        ];
        scatter(&mut m, tri, &local);
    }
    m
}

/// P1 stiffness for `-div(k grad u)` with one coefficient value per element.
pub fn assemble_stiffness(
    mesh: &StructuredTriMesh,
    element_coeff: &[f64],
) -> Result<SymmetricSparseMatrix> {
    if element_coeff.len() != mesh.triangles().len() {
        return Err(Error::dims(
            "assemble_stiffness coefficients",
            mesh.triangles().len(),
            element_coeff.len(),
        ));
    }
    let mut k = SymmetricSparseMatrix::with_pattern(&node_pattern(mesh));
    for (t, &tri) in mesh.triangles().iter().enumerate() {
        let (g, area) = p1_gradients(mesh, t);
        let c = element_coeff[t] * area;
        let mut local = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in a..3 {
                let v = c * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                local[a][b] = v;
                local[b][a] = v;
            }
        }
        scatter(&mut k, tri, &local);
    }
    Ok(k)
}

/// Per-element `exp(sigma)` with sigma taken at the barycenter as the
/// average of the three nodal values.
pub fn darcy_coefficients(mesh: &StructuredTriMesh, sigma: &[f64]) -> Result<Vec<f64>> {
    if sigma.len() != mesh.node_count() {
        return Err(Error::dims("darcy sigma", mesh.node_count(), sigma.len()));
    }
    Ok(mesh
        .triangles()
        .iter()
        .map(|&[a, b, c]| ((sigma[a] + sigma[b] + sigma[c]) / 3.0).exp())
        .collect())
}

/// Stiffness of `-div(e^sigma grad u)`.
pub fn assemble_darcy_stiffness(
    mesh: &StructuredTriMesh,
    sigma: &FieldVector,
) -> Result<SymmetricSparseMatrix> {
    assemble_stiffness(mesh, &darcy_coefficients(mesh, sigma)?)
}

/// `sqrt(v^T M v)`.
pub fn vh_norm(mass: &SymmetricSparseMatrix, v: &[f64]) -> Result<f64> {
    Ok(mass.quadratic_form(v)?.max(0.0).sqrt())
}

/// Dirichlet problem with the boundary rows and columns eliminated; the
/// remaining interior system is factored once and can be solved repeatedly.
pub struct DirichletSystem {
    interior: Vec<usize>,
    factor: BandedCholesky,
    reduced: SymmetricSparseMatrix,
}

impl DirichletSystem {
    /// `fixed[k]` is true for constrained nodes.
    pub fn new(a: &SymmetricSparseMatrix, fixed: &[bool]) -> Result<Self> {
        if fixed.len() != a.dim() {
            return Err(Error::dims("DirichletSystem", a.dim(), fixed.len()));
        }
        let interior: Vec<usize> = (0..a.dim()).filter(|&k| !fixed[k]).collect();
        let mut local = vec![usize::MAX; a.dim()];
        for (r, &k) in interior.iter().enumerate() {
            local[k] = r;
        }
        let pattern: Vec<Vec<usize>> = interior
            .iter()
            .map(|&k| {
                a.row(k)
                    .filter(|&(j, _)| !fixed[j])
                    .map(|(j, _)| local[j])
                    .collect()
            })
            .collect();
        let mut reduced = SymmetricSparseMatrix::with_pattern(&pattern);
        for (r, &k) in interior.iter().enumerate() {
            for (j, v) in a.row(k).filter(|&(j, _)| !fixed[j]) {
                reduced.add(r, local[j], v);
            }
        }
        let factor =
            BandedCholesky::factor(interior.len(), |r| reduced.row(r).collect::<Vec<_>>())?;
        Ok(Self {
            interior,
            factor,
            reduced,
        })
    }

    /// Solves `A u = rhs` with `u = values` on fixed nodes. Boundary entries
    /// of the result are copied from `values` exactly.
    pub fn solve(
        &self,
        a: &SymmetricSparseMatrix,
        rhs: &[f64],
        values: &[f64],
        rel_tol: f64,
    ) -> Result<Vec<f64>> {
        let n = a.dim();
        if rhs.len() != n || values.len() != n {
            return Err(Error::dims(
                "DirichletSystem::solve",
                n,
                rhs.len().min(values.len()),
            ));
        }
        let mut lifted = vec![0.0; n];
        let mut is_interior = vec![false; n];
        for &k in &self.interior {
            is_interior[k] = true;
        }
        for k in 0..n {
            if !is_interior[k] {
                lifted[k] = values[k];
            }
        }
        let a_lift = a.matvec(&lifted)?;
        let b: Vec<f64> = self.interior.iter().map(|&k| rhs[k] - a_lift[k]).collect();
        let x = self.factor.solve(&b)?;

        let ax = self.reduced.matvec(&x)?;
        let res: f64 = ax
            .iter()
            .zip(&b)
            .map(|(p, q)| (p - q).powi(2))
            .sum::<f64>()
            .sqrt();
        let bn: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if res > rel_tol * bn.max(f64::MIN_POSITIVE) {
            return Err(Error::SolverFailure(format!(
                "relative residual {:.3e} exceeds {rel_tol:.1e}",
                res / bn
            )));
        }
        let mut u = lifted;
        for (r, &k) in self.interior.iter().enumerate() {
            u[k] = x[r];
        }
        Ok(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mass_sums_to_domain_measure() {
        for n in [1, 2, 5, 13] {
            let mesh = StructuredTriMesh::unit_square(n).unwrap();
            let m = assemble_mass_matrix(&mesh);
            assert!((m.sum_all() - 1.0).abs() < 1e-13);
            assert!(m.is_symmetric());
        }
    }

    #[test]
    fn single_triangle_block() {
        let mesh = StructuredTriMesh::unit_square(1).unwrap();
        let m = assemble_mass_matrix(&mesh);
        // node 1 = (1,0) belongs only to the first triangle, area 1/2
        let a = 0.5;
        assert!((m.get(1, 1) - 2.0 * a / 12.0).abs() < 1e-16);
        assert!((m.get(1, 0) - a / 12.0).abs() < 1e-16);
        assert!((m.get(1, 3) - a / 12.0).abs() < 1e-16);
        assert_eq!(m.get(1, 2), 0.0);
    }

    #[test]
    fn constant_field_has_unit_norm() {
        let mesh = StructuredTriMesh::unit_square(9).unwrap();
        let m = assemble_mass_matrix(&mesh);
        let one = vec![1.0; mesh.node_count()];
        assert!((vh_norm(&m, &one).unwrap() - 1.0).abs() < 1e-13);
        assert_eq!(vh_norm(&m, &vec![0.0; mesh.node_count()]).unwrap(), 0.0);
        assert!(vh_norm(&m, &[1.0]).is_err());
    }

    #[test]
    fn laplacian_kills_constants_on_interior_rows() {
        let mesh = StructuredTriMesh::unit_square(6).unwrap();
        let k = assemble_darcy_stiffness(&mesh, &FieldVector::zeros(mesh.node_count())).unwrap();
        assert!(k.is_symmetric());
        let y = k.matvec(&vec![1.0; mesh.node_count()]).unwrap();
        for i in mesh.interior_nodes() {
            assert!(y[i].abs() < 1e-12);
        }
    }

    #[test]
    fn constant_coefficient_factors_out() {
        let mesh = StructuredTriMesh::unit_square(4).unwrap();
        let n = mesh.node_count();
        let k0 = assemble_darcy_stiffness(&mesh, &FieldVector::zeros(n)).unwrap();
        let c = 0.7f64;
        let kc = assemble_darcy_stiffness(&mesh, &FieldVector::constant(n, c)).unwrap();
        for i in 0..n {
            for (j, v) in kc.row(i) {
                assert!((v - c.exp() * k0.get(i, j)).abs() < 1e-13 * v.abs().max(1.0));
            }
        }
    }

    #[test]
    fn darcy_dimension_mismatch() {
        let mesh = StructuredTriMesh::unit_square(2).unwrap();
        assert!(assemble_darcy_stiffness(&mesh, &FieldVector::zeros(3)).is_err());
    }

    #[test]
    fn dirichlet_solve_reproduces_linear_function() {
        // linear functions are reproduced exactly by P1 for the Laplacian
        let mesh = StructuredTriMesh::unit_square(5).unwrap();
        let n = mesh.node_count();
        let k = assemble_darcy_stiffness(&mesh, &FieldVector::zeros(n)).unwrap();
        let fixed: Vec<bool> = (0..n).map(|i| mesh.is_boundary(i)).collect();
        let exact: Vec<f64> = mesh
            .nodes()
            .iter()
            .map(|p| 1.0 + 2.0 * p[0] - p[1])
            .collect();
        let sys = DirichletSystem::new(&k, &fixed).unwrap();
        let u = sys.solve(&k, &vec![0.0; n], &exact, 1e-12).unwrap();
        for (a, b) in u.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
