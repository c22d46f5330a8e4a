//! Full-order models and snapshot generation.
//!
//! * Darcy: `-div(e^sigma grad u) = 10` on the unit square, `u = 0` on the
//!   boundary, P1 elements.
//! * Cookie: `-div((1/2 + mu_1 1_{Omega_0}) grad u) = f_mu`, `u = 0.1` on the
//!   boundary, with a Gaussian source of width `epsilon` centred at
//!   `(mu_2, mu_3)`.
//! * Burgers: `v_t + (v^2/4)_x = 0` on `(0, L)`, Godunov finite volumes with a
//!   fixed inflow state on the left and zero-gradient outflow on the right.

use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{
    assemble_darcy_stiffness, assemble_mass_matrix, assemble_stiffness, vh_norm, DirichletSystem,
    FieldVector, Point, StructuredTriMesh, SymmetricSparseMatrix, UniformGrid1D,
};
use crate::linalg::Matrix;
use crate::random_fields::{
    assemble_covariance_matrix, kl_decompose, sample_burgers_ic, sample_field, CovarianceKernel,
    KLBasis, BURGERS_SERIES_TERMS,
};
use crate::rng;

/// Relative residual accepted from the direct solver.
pub const SOLVER_RTOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct DarcyProblem {
    pub mesh: StructuredTriMesh,
    pub mass: SymmetricSparseMatrix,
    pub forcing: f64,
}

impl DarcyProblem {
    pub fn new(n_div: usize) -> Result<Self> {
        let mesh = StructuredTriMesh::unit_square(n_div)?;
        let mass = assemble_mass_matrix(&mesh);
        Ok(Self {
            mesh,
            mass,
            forcing: 10.0,
        })
    }

    fn fixed(&self) -> Vec<bool> {
        (0..self.mesh.node_count())
            .map(|k| self.mesh.is_boundary(k))
            .collect()
    }

    /// Solution for log-permeability `sigma` and the constant forcing.
    pub fn solve(&self, sigma: &FieldVector) -> Result<FieldVector> {
        let f = vec![self.forcing; self.mesh.node_count()];
        self.solve_with_source(sigma, &f)
    }

    /// Same operator with a nodal source `f` (interpolated, consistent load).
    pub fn solve_with_source(&self, sigma: &FieldVector, source: &[f64]) -> Result<FieldVector> {
        let n = self.mesh.node_count();
        if source.len() != n {
            return Err(Error::dims("darcy source", n, source.len()));
        }
        let k = assemble_darcy_stiffness(&self.mesh, sigma)?;
        let rhs = self.mass.matvec(source)?;
        let sys = DirichletSystem::new(&k, &self.fixed())?;
        Ok(sys.solve(&k, &rhs, &vec![0.0; n], SOLVER_RTOL)?.into())
    }
}

pub fn solve_darcy(problem: &DarcyProblem, sigma: &FieldVector) -> Result<FieldVector> {
    problem.solve(sigma)
}

/// `||u - u'||_{V_h} / (||sigma - sigma'||_inf exp(3 ||sigma||_inf + 3 ||sigma'||_inf))`
/// for `pairs` independent pairs of log-permeability draws from `field`.
/// Pair `k` uses seeds `derive_seed(seed, 2k)` and `derive_seed(seed, 2k + 1)`.
pub fn darcy_perturbation_ratios(
    problem: &DarcyProblem,
    field: &KLBasis,
    pairs: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    (0..pairs as u64)
        .map(|k| {
            let a = sample_field(field, field.len(), rng::derive_seed(seed, 2 * k))?;
            let b = sample_field(field, field.len(), rng::derive_seed(seed, 2 * k + 1))?;
            let du: Vec<f64> = problem
                .solve(&a)?
                .iter()
                .zip(problem.solve(&b)?.iter())
                .map(|(x, y)| x - y)
                .collect();
            let num = vh_norm(&problem.mass, &du)?;
            let dsigma = a
                .iter()
                .zip(b.iter())
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            let weight = (3.0 * a.sup_norm() + 3.0 * b.sup_norm()).exp();
            Ok(num / (dsigma * weight))
        })
        .collect()
}

/// Disk-shaped inclusion where the cookie permeability is raised.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Inclusion {
    pub center: Point,
    pub radius: f64,
}

impl Inclusion {
    pub fn contains(&self, p: &Point) -> bool {
        (p[0] - self.center[0]).powi(2) + (p[1] - self.center[1]).powi(2)
            <= self.radius * self.radius
    }
}

impl Default for Inclusion {
    fn default() -> Self {
        Self {
            center: [0.5, 0.5],
            radius: 0.2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CookieProblem {
    pub mesh: StructuredTriMesh,
    pub mass: SymmetricSparseMatrix,
    pub epsilon: f64,
    pub boundary_value: f64,
    pub inclusion: Inclusion,
}

/// Parameter box of the cookie problem: `mu_1` then `mu_2`, `mu_3`.
pub const COOKIE_BOX: [(f64, f64); 3] = [(1.0, 4.0), (0.1, 0.9), (0.1, 0.9)];

impl CookieProblem {
    pub fn new(n_div: usize) -> Result<Self> {
        let mesh = StructuredTriMesh::unit_square(n_div)?;
        let mass = assemble_mass_matrix(&mesh);
        Ok(Self {
            mesh,
            mass,
            epsilon: 0.01,
            boundary_value: 0.1,
            inclusion: Inclusion::default(),
        })
    }

    /// Nodal values of the Gaussian source centred at `(mu_2, mu_3)`.
    pub fn source(&self, mu: &[f64; 3]) -> Vec<f64> {
        let e2 = self.epsilon * self.epsilon;
        let scale = 1.0 / (2.0 * std::f64::consts::PI * e2);
        self.mesh
            .nodes()
            .iter()
            .map(|p| {
                let d2 = (p[0] - mu[1]).powi(2) + (p[1] - mu[2]).powi(2);
                scale * (-d2 / (2.0 * e2)).exp()
            })
            .collect()
    }

    pub fn solve(&self, mu: &[f64; 3]) -> Result<FieldVector> {
        for (k, (&m, &(lo, hi))) in mu.iter().zip(COOKIE_BOX.iter()).enumerate() {
            if !(lo..=hi).contains(&m) {
                return Err(Error::InvalidArgument(format!(
                    "mu_{} = {m} outside [{lo}, {hi}]",
                    k + 1
                )));
            }
        }
        let coeff: Vec<f64> = (0..self.mesh.triangles().len())
            .map(|t| {
                if self.inclusion.contains(&self.mesh.barycenter(t)) {
                    0.5 + mu[0]
                } else {
                    0.5
                }
            })
            .collect();
        let k = assemble_stiffness(&self.mesh, &coeff)?;
        let rhs = self.mass.matvec(&self.source(mu))?;
        let n = self.mesh.node_count();
        let fixed: Vec<bool> = (0..n).map(|i| self.mesh.is_boundary(i)).collect();
        let sys = DirichletSystem::new(&k, &fixed)?;
        Ok(sys
            .solve(&k, &rhs, &vec![self.boundary_value; n], SOLVER_RTOL)?
            .into())
    }
}

pub fn solve_cookie(problem: &CookieProblem, mu: &[f64; 3]) -> Result<FieldVector> {
    problem.solve(mu)
}

#[derive(Clone, Debug)]
pub struct BurgersProblem {
    pub grid: UniformGrid1D,
    pub dt: f64,
    pub t_final: f64,
}

impl Default for BurgersProblem {
    fn default() -> Self {
        Self {
            grid: UniformGrid1D::new(5.0, 500).expect("valid grid"),
            dt: 0.01,
            t_final: 2.0,
        }
    }
}

#[inline]
fn burgers_flux(v: f64) -> f64 {
    0.25 * v * v
}

/// Exact Riemann-solver (Godunov) flux for the convex flux `v^2/4`, whose
/// minimum is at `v = 0`.
#[inline]
pub fn godunov_flux(left: f64, right: f64) -> f64 {
    if left <= right {
        if left <= 0.0 && right >= 0.0 {
            0.0
        } else {
            burgers_flux(left).min(burgers_flux(right))
        }
    } else {
        burgers_flux(left).max(burgers_flux(right))
    }
}

/// Per-step bookkeeping of a Burgers run.
#[derive(Clone, Debug, Default)]
pub struct BurgersTrace {
    /// `sum v_i h` after each step (index 0 is the initial state).
    pub mass: Vec<f64>,
    /// `dt * (F_in - F_out)` of each step.
    pub boundary_flux: Vec<f64>,
    /// Discrete total variation after each step (index 0 initial).
    pub total_variation: Vec<f64>,
}

impl BurgersProblem {
    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn solve(&self, ic: &FieldVector) -> Result<FieldVector> {
        self.run(ic, None)
    }

    pub fn solve_traced(&self, ic: &FieldVector) -> Result<(FieldVector, BurgersTrace)> {
        let mut trace = BurgersTrace::default();
        let v = self.run(ic, Some(&mut trace))?;
        Ok((v, trace))
    }

    fn run(&self, ic: &FieldVector, mut trace: Option<&mut BurgersTrace>) -> Result<FieldVector> {
        let n = self.grid.n_cells();
        if ic.len() != n {
            return Err(Error::dims("burgers initial condition", n, ic.len()));
        }
        let h = self.grid.h();
        let ratio = self.dt / h;
        let inflow = ic[0];
        let mut v = ic.0.clone();
        let mut flux = vec![0.0; n + 1];
        let tv = |v: &[f64]| v.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>();
        if let Some(t) = trace.as_deref_mut() {
            t.mass.push(v.iter().sum::<f64>() * h);
            t.total_variation.push(tv(&v));
        }
        for step in 0..self.steps() {
            let vmax = v.iter().fold(inflow.abs(), |m, x| m.max(x.abs()));
            let cfl = self.dt * vmax / (2.0 * h);
            if cfl > 1.0 || !cfl.is_finite() {
                return Err(Error::CflViolation { step, cfl });
            }
            flux[0] = godunov_flux(inflow, v[0]);
            for i in 1..n {
                flux[i] = godunov_flux(v[i - 1], v[i]);
            }
            flux[n] = godunov_flux(v[n - 1], v[n - 1]);
            for i in 0..n {
                v[i] -= ratio * (flux[i + 1] - flux[i]);
            }
            if let Some(t) = trace.as_deref_mut() {
                t.mass.push(v.iter().sum::<f64>() * h);
                t.boundary_flux.push(self.dt * (flux[0] - flux[n]));
                t.total_variation.push(tv(&v));
            }
        }
        Ok(v.into())
    }
}

pub fn solve_burgers(problem: &BurgersProblem, ic: &FieldVector) -> Result<FieldVector> {
    problem.solve(ic)
}

/// Input sampler plus solver for one of the three case studies.
#[derive(Clone, Debug)]
pub enum ProblemSpec {
    Darcy {
        problem: DarcyProblem,
        field: KLBasis,
    },
    Burgers {
        problem: BurgersProblem,
        terms: usize,
    },
    Cookie {
        problem: CookieProblem,
    },
}

impl ProblemSpec {
    /// Darcy on an `n_div` mesh with log-permeability drawn from the full
    /// Karhunen-Loeve expansion of the given kernel.
    pub fn darcy(n_div: usize, kernel: CovarianceKernel) -> Result<Self> {
        let problem = DarcyProblem::new(n_div)?;
        let c = assemble_covariance_matrix(&kernel, problem.mesh.nodes());
        let field = kl_decompose(&c, &problem.mass, problem.mesh.node_count())?;
        Ok(ProblemSpec::Darcy { problem, field })
    }

    pub fn burgers(problem: BurgersProblem) -> Self {
        ProblemSpec::Burgers {
            problem,
            terms: BURGERS_SERIES_TERMS,
        }
    }

    pub fn cookie(n_div: usize) -> Result<Self> {
        Ok(ProblemSpec::Cookie {
            problem: CookieProblem::new(n_div)?,
        })
    }

    pub fn input_dim(&self) -> usize {
        match self {
            ProblemSpec::Darcy { problem, .. } => problem.mesh.node_count(),
            ProblemSpec::Burgers { problem, .. } => problem.grid.n_cells(),
            ProblemSpec::Cookie { .. } => 3,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            ProblemSpec::Darcy { problem, .. } => problem.mesh.node_count(),
            ProblemSpec::Burgers { problem, .. } => problem.grid.n_cells(),
            ProblemSpec::Cookie { problem } => problem.mesh.node_count(),
        }
    }

    /// Mass matrix of the output space (also of the input space where the
    /// input is a field).
    pub fn mass(&self) -> SymmetricSparseMatrix {
        match self {
            ProblemSpec::Darcy { problem, .. } => problem.mass.clone(),
            ProblemSpec::Burgers { problem, .. } => problem.grid.mass_matrix(),
            ProblemSpec::Cookie { problem } => problem.mass.clone(),
        }
    }

    /// Mass matrix of the input space, when the input is a discrete field.
    pub fn input_mass(&self) -> Option<SymmetricSparseMatrix> {
        match self {
            ProblemSpec::Cookie { .. } => None,
            _ => Some(self.mass()),
        }
    }

    /// Coordinates of the output degrees of freedom (1D grids use `y = 0`).
    pub fn output_coords(&self) -> Vec<Point> {
        match self {
            ProblemSpec::Darcy { problem, .. } => problem.mesh.nodes().to_vec(),
            ProblemSpec::Burgers { problem, .. } => problem
                .grid
                .centers()
                .into_iter()
                .map(|x| [x, 0.0])
                .collect(),
            ProblemSpec::Cookie { problem } => problem.mesh.nodes().to_vec(),
        }
    }

    /// Draws input `seed` and solves for it.
    pub fn sample(&self, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
        match self {
            ProblemSpec::Darcy { problem, field } => {
                let sigma = sample_field(field, field.len(), seed)?;
                let u = problem.solve(&sigma)?;
                Ok((sigma.into_inner(), u.into_inner()))
            }
            ProblemSpec::Burgers { problem, terms } => {
                let ic = sample_burgers_ic(&problem.grid, *terms, seed)?;
                let v = problem.solve(&ic)?;
                Ok((ic.into_inner(), v.into_inner()))
            }
            ProblemSpec::Cookie { problem } => {
                let mut r = rng::from_seed(seed);
                let mu = COOKIE_BOX.map(|(lo, hi)| r.random_range(lo..=hi));
                let u = problem.solve(&mu)?;
                Ok((mu.to_vec(), u.into_inner()))
            }
        }
    }
}

/// Paired input/output realizations with a train/test split: rows
/// `[0, n_train)` are training data, the rest test data.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotSet {
    pub inputs: Matrix,
    pub outputs: Matrix,
    pub n_train: usize,
    pub seed: u64,
}

impl SnapshotSet {
    pub fn new(inputs: Matrix, outputs: Matrix, n_train: usize, seed: u64) -> Result<Self> {
        if inputs.rows() != outputs.rows() {
            return Err(Error::dims("snapshot rows", inputs.rows(), outputs.rows()));
        }
        if n_train > inputs.rows() {
            return Err(Error::InvalidArgument(format!(
                "train split {n_train} larger than {} snapshots",
                inputs.rows()
            )));
        }
        Ok(Self {
            inputs,
            outputs,
            n_train,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_test(&self) -> usize {
        self.len() - self.n_train
    }

    pub fn train_inputs(&self) -> Matrix {
        self.inputs.split_rows(self.n_train).0
    }

    pub fn test_inputs(&self) -> Matrix {
        self.inputs.split_rows(self.n_train).1
    }

    pub fn train_outputs(&self) -> Matrix {
        self.outputs.split_rows(self.n_train).0
    }

    pub fn test_outputs(&self) -> Matrix {
        self.outputs.split_rows(self.n_train).1
    }
}

/// Number of training rows for `n` snapshots and a train fraction.
pub fn train_count(n: usize, train_fraction: f64) -> usize {
    ((n as f64 * train_fraction).round() as usize).min(n)
}

/// Generates `n` snapshots; snapshot `i` uses seed `derive_seed(seed, i)` so
/// results do not depend on `jobs`.
pub fn generate_snapshots(
    spec: &ProblemSpec,
    n: usize,
    seed: u64,
    train_fraction: f64,
    jobs: usize,
) -> Result<SnapshotSet> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 snapshots, got {n}"
        )));
    }
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::InvalidArgument(format!(
            "train fraction {train_fraction} outside [0, 1]"
        )));
    }
    let one = |i: usize| {
        spec.sample(rng::derive_seed(seed, i as u64))
            .map_err(|e| Error::Snapshot {
                index: i,
                source: Box::new(e),
            })
    };
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = if jobs <= 1 {
        (0..n).map(one).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        pool.install(|| (0..n).into_par_iter().map(one).collect::<Result<_>>())?
    };
    let (din, dout) = (spec.input_dim(), spec.output_dim());
    let mut inputs = Vec::with_capacity(n * din);
    let mut outputs = Vec::with_capacity(n * dout);
    for (x, y) in pairs {
        inputs.extend(x);
        outputs.extend(y);
    }
    SnapshotSet::new(
        Matrix::from_vec(n, din, inputs)?,
        Matrix::from_vec(n, dout, outputs)?,
        train_count(n, train_fraction),
        seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn darcy_constant_sigma_scales_solution() {
        let p = DarcyProblem::new(8).unwrap();
        let n = p.mesh.node_count();
        let u0 = p.solve(&FieldVector::zeros(n)).unwrap();
        let u1 = p.solve(&FieldVector::constant(n, 1.0)).unwrap();
        let s = (-1.0f64).exp();
        for (a, b) in u1.iter().zip(u0.iter()) {
            assert!((a - s * b).abs() < 1e-12);
        }
        for &b in p.mesh.boundary_nodes() {
            assert_eq!(u0[b], 0.0);
        }
    }

    #[test]
    fn cookie_rejects_out_of_box() {
        let p = CookieProblem::new(6).unwrap();
        assert!(p.solve(&[0.5, 0.5, 0.5]).is_err());
        assert!(p.solve(&[2.0, 0.95, 0.5]).is_err());
        let u = p.solve(&[2.0, 0.3, 0.6]).unwrap();
        for &b in p.mesh.boundary_nodes() {
            assert_eq!(u[b], 0.1);
        }
    }

    #[test]
    fn godunov_flux_cases() {
        assert_eq!(godunov_flux(1.0, 1.0), 0.25);
        assert_eq!(godunov_flux(-1.0, 1.0), 0.0); // transonic rarefaction
        assert_eq!(godunov_flux(1.0, 0.0), 0.25); // shock, max
        assert!((godunov_flux(0.2, 0.6) - 0.01).abs() < 1e-17); // rarefaction, min
    }

    #[test]
    fn burgers_constant_state_is_stationary() {
        let p = BurgersProblem::default();
        let ic = FieldVector::constant(500, 0.3);
        let v = p.solve(&ic).unwrap();
        assert_eq!(v, ic);
    }

    #[test]
    fn burgers_cfl_violation_aborts() {
        let p = BurgersProblem::default();
        let ic = FieldVector::constant(500, 3.0);
        assert!(matches!(
            p.solve(&ic),
            Err(Error::CflViolation { step: 0, .. })
        ));
    }

    #[test]
    fn snapshot_split_and_shape() {
        let spec = ProblemSpec::burgers(BurgersProblem {
            grid: UniformGrid1D::new(5.0, 50).unwrap(),
            dt: 0.05,
            t_final: 0.5,
        });
        let s = generate_snapshots(&spec, 20, 1, 0.9, 1).unwrap();
        assert_eq!((s.inputs.rows(), s.inputs.cols()), (20, 50));
        assert_eq!((s.n_train, s.n_test()), (18, 2));
        let par = generate_snapshots(&spec, 20, 1, 0.9, 3).unwrap();
        assert_eq!(s, par);
        assert!(generate_snapshots(&spec, 1, 1, 0.9, 1).is_err());
    }
}
