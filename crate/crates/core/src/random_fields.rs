//! Covariance kernels, discrete Karhunen-Loeve decompositions, field
//! samplers and eigenvalue tails.

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::{FieldVector, Point, SymmetricSparseMatrix, UniformGrid1D};
use crate::linalg::{normalize_column_signs, symmetric_eigen_desc, Matrix};
use crate::rng;

/// Squared-exponential covariance `exp(-|x - y|^2 / l^2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CovarianceKernel {
    pub length_scale: f64,
}

impl Default for CovarianceKernel {
    fn default() -> Self {
        Self { length_scale: 1.0 }
    }
}

impl CovarianceKernel {
    pub fn squared_exponential(length_scale: f64) -> Result<Self> {
        if !(length_scale > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "length scale must be positive, got {length_scale}"
            )));
        }
        Ok(Self { length_scale })
    }

    #[inline]
    pub fn eval(&self, x: &Point, y: &Point) -> f64 {
        let d2 = (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2);
        (-d2 / (self.length_scale * self.length_scale)).exp()
    }
}

/// `C_ij = Cov(x_i, x_j)` over the given points.
pub fn assemble_covariance_matrix(kernel: &CovarianceKernel, points: &[Point]) -> Matrix {
    let n = points.len();
    let mut c = Matrix::zeros(n, n);
    for i in 0..n {
        c.set(i, i, 1.0);
        for j in 0..i {
            let v = kernel.eval(&points[i], &points[j]);
            c.set(i, j, v);
            c.set(j, i, v);
        }
    }
    c
}

/// Truncated discrete Karhunen-Loeve expansion.
#[derive(Clone, Debug)]
pub struct KLBasis {
    /// Nonincreasing, nonnegative.
    pub eigenvalues: Vec<f64>,
    /// `N_h x m`, columns orthonormal in the lumped-mass inner product.
    pub modes: Matrix,
    pub mean: FieldVector,
    /// Trace of the covariance operator, `sum_i C_ii w_i`.
    pub total_energy: f64,
    /// Lumped mass used for the weighting.
    pub weights: Vec<f64>,
}

impl KLBasis {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.modes.rows()
    }
}

/// Mass-weighted eigen-decomposition of a covariance matrix.
///
/// With `S = diag(sqrt(w))`, `w` the row sums of `mass`, the symmetric matrix
/// `S C S` is diagonalized; modes are `S^{-1} v`. Eigenvalues in
/// `(-1e-12 lambda_1, 0)` are clamped to zero, anything below is an error.
pub fn kl_decompose(
    covariance: &Matrix,
    mass: &SymmetricSparseMatrix,
    m: usize,
) -> Result<KLBasis> {
    let n = covariance.rows();
    if covariance.cols() != n {
        return Err(Error::dims("kl_decompose covariance", n, covariance.cols()));
    }
    if mass.dim() != n {
        return Err(Error::dims("kl_decompose mass", n, mass.dim()));
    }
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!(
            "truncation m = {m} outside 1..={n}"
        )));
    }
    let weights = mass.row_sums();
    if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !(**w > 0.0)) {
        return Err(Error::NotPositiveDefinite(format!(
            "lumped mass entry {i} = {w:e}"
        )));
    }
    let sqrt_w: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let scaled = Matrix::from_fn(n, n, |i, j| sqrt_w[i] * covariance.get(i, j) * sqrt_w[j]);
    let (mut values, vectors) = symmetric_eigen_desc(&scaled)?;

    let lead = values[0].max(0.0);
    for (i, v) in values.iter_mut().enumerate() {
        if *v < 0.0 {
            if *v < -1e-12 * lead {
                return Err(Error::NotPositiveDefinite(format!(
                    "covariance eigenvalue {i} = {v:e} is not clamped-negligible"
                )));
            }
            *v = 0.0;
        }
    }

    let mut modes = Matrix::from_fn(n, m, |i, k| vectors.get(i, k) / sqrt_w[i]);
    normalize_column_signs(&mut modes);
    let total_energy = (0..n).map(|i| covariance.get(i, i) * weights[i]).sum();
    values.truncate(m);
    Ok(KLBasis {
        eigenvalues: values,
        modes,
        mean: FieldVector::zeros(n),
        total_energy,
        weights,
    })
}

/// `mean + sum_{i < eta.len()} sqrt(lambda_i) eta_i phi_i`.
pub fn field_from_coefficients(basis: &KLBasis, eta: &[f64]) -> Result<FieldVector> {
    if eta.len() > basis.len() {
        return Err(Error::InvalidArgument(format!(
            "{} coefficients for a basis of {} modes",
            eta.len(),
            basis.len()
        )));
    }
    let mut out = basis.mean.clone();
    for (i, &e) in eta.iter().enumerate() {
        let a = basis.eigenvalues[i].sqrt() * e;
        if a == 0.0 {
            continue;
        }
        for (r, o) in out.iter_mut().enumerate() {
            *o += a * basis.modes.get(r, i);
        }
    }
    Ok(out)
}

/// Draws one realization using the first `n_trunc` modes and standard
/// normal coefficients from a generator seeded with `seed`.
pub fn sample_field(basis: &KLBasis, n_trunc: usize, seed: u64) -> Result<FieldVector> {
    if n_trunc > basis.len() {
        return Err(Error::InvalidArgument(format!(
            "n_trunc = {n_trunc} exceeds the {} available modes",
            basis.len()
        )));
    }
    let mut r = rng::from_seed(seed);
    let eta: Vec<f64> = (0..n_trunc).map(|_| r.sample(StandardNormal)).collect();
    field_from_coefficients(basis, &eta)
}

/// Default series truncation for [`sample_burgers_ic`].
pub const BURGERS_SERIES_TERMS: usize = 200;

fn burgers_bump(x: f64) -> f64 {
    if (1.0..=2.0).contains(&x) {
        (x - 1.0) * (2.0 - x)
    } else {
        0.0
    }
}

/// Initial-condition law evaluated at `x`:
/// `0.5 * clamp(phi0(x) + sum_k k^-2 eta_k sin(k pi x / L))` with
/// `clamp(t) = min(max(t, 0), 1)` and `phi0(x) = (x-1)(2-x)` on `[1, 2]`,
/// zero elsewhere.
pub fn burgers_ic_value(x: f64, length: f64, eta: &[f64]) -> f64 {
    let series: f64 = eta
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let k = (k + 1) as f64;
            e / (k * k) * (k * std::f64::consts::PI * x / length).sin()
        })
        .sum();
    0.5 * (burgers_bump(x) + series).clamp(0.0, 1.0)
}

/// [`burgers_ic_value`] at every cell center.
pub fn burgers_ic_from_coefficients(grid: &UniformGrid1D, eta: &[f64]) -> FieldVector {
    grid.centers()
        .into_iter()
        .map(|x| burgers_ic_value(x, grid.length(), eta))
        .collect::<Vec<_>>()
        .into()
}

pub fn sample_burgers_ic(grid: &UniformGrid1D, terms: usize, seed: u64) -> Result<FieldVector> {
    if terms == 0 {
        return Err(Error::InvalidArgument(
            "series needs at least one term".into(),
        ));
    }
    let mut r = rng::from_seed(seed);
    let eta: Vec<f64> = (0..terms).map(|_| r.sample(StandardNormal)).collect();
    Ok(burgers_ic_from_coefficients(grid, &eta))
}

/// `total_energy - sum_{i <= n} lambda_i`, clamped at zero.
pub fn spectral_tail(eigenvalues: &[f64], total_energy: f64, n: usize) -> f64 {
    let head: f64 = eigenvalues.iter().take(n).sum();
    (total_energy - head).max(0.0)
}

impl KLBasis {
    pub fn tail(&self, n: usize) -> f64 {
        spectral_tail(&self.eigenvalues, self.total_energy, n)
    }
}
