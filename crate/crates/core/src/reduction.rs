//! Mass-weighted proper orthogonal decomposition (method of snapshots),
//! projection errors and log-log rate fitting.

use log::{debug, warn};

use crate::error::{Error, Result};
use crate::geometry::SymmetricSparseMatrix;
use crate::linalg::{dot, gemm, normalize_column_signs, symmetric_eigen_desc, Matrix, Trans};

/// Relative threshold under which Gram eigenvalues count as zero.
pub const RANK_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct PODBasis {
    /// `N_h x n`, M-orthonormal columns.
    pub modes: Matrix,
    /// Full uncentered spectrum (Gram eigenvalues), nonincreasing, `>= 0`.
    pub eigenvalues: Vec<f64>,
    /// Mean squared V_h norm of the snapshots.
    pub total_energy: f64,
    pub rank: usize,
    /// Set when fewer modes than requested were available.
    pub rank_limited: bool,
}

impl PODBasis {
    pub fn n_modes(&self) -> usize {
        self.modes.cols()
    }

    pub fn tail(&self, n: usize) -> f64 {
        crate::random_fields::spectral_tail(&self.eigenvalues, self.total_energy, n)
    }

    /// Basis restricted to its first `n` modes.
    pub fn truncated(&self, n: usize) -> PODBasis {
        let n = n.min(self.n_modes());
        PODBasis {
            modes: Matrix::from_fn(self.modes.rows(), n, |i, j| self.modes.get(i, j)),
            eigenvalues: self.eigenvalues.clone(),
            total_energy: self.total_energy,
            rank: self.rank,
            rank_limited: self.rank_limited,
        }
    }

    /// `V^T M u` for every row `u`.
    pub fn encode(&self, rows: &Matrix, mass: &SymmetricSparseMatrix) -> Result<Matrix> {
        let mu = mass.apply_rows(rows)?;
        mu.matmul(&self.modes)
    }

    /// `V c` for every row `c`.
    pub fn decode(&self, coeffs: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(coeffs.rows(), self.modes.rows());
        gemm(
            1.0,
            coeffs,
            Trans::No,
            &self.modes,
            Trans::Yes,
            0.0,
            &mut out,
        )?;
        Ok(out)
    }

    pub fn project(&self, rows: &Matrix, mass: &SymmetricSparseMatrix) -> Result<Matrix> {
        self.decode(&self.encode(rows, mass)?)
    }
}

fn m_orthonormalize(v: &mut Matrix, mass: &SymmetricSparseMatrix) -> Result<()> {
    let (nh, n) = (v.rows(), v.cols());
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| v.column(j)).collect();
    // two sweeps of modified Gram-Schmidt
    for _ in 0..2 {
        for j in 0..n {
            for k in 0..j {
                let mk = mass.matvec(&cols[k])?;
                let c = dot(&cols[j], &mk);
                for i in 0..nh {
                    cols[j][i] -= c * cols[k][i];
                }
            }
            let nrm = mass.quadratic_form(&cols[j])?.sqrt();
            if !(nrm > 0.0) {
                return Err(Error::NotPositiveDefinite(format!(
                    "POD mode {j} collapsed during orthonormalization"
                )));
            }
            for x in &mut cols[j] {
                *x /= nrm;
            }
        }
    }
    for (j, c) in cols.iter().enumerate() {
        for (i, &x) in c.iter().enumerate() {
            v.set(i, j, x);
        }
    }
    Ok(())
}

/// POD of the rows of `snapshots` in the inner product of `mass`, keeping
/// `n` modes. Uncentered: no mean is subtracted.
pub fn pod(snapshots: &Matrix, mass: &SymmetricSparseMatrix, n: usize) -> Result<PODBasis> {
    let (ns, nh) = (snapshots.rows(), snapshots.cols());
    if nh != mass.dim() {
        return Err(Error::dims("pod snapshot width", mass.dim(), nh));
    }
    if ns == 0 {
        return Err(Error::InvalidArgument(
            "pod needs at least one snapshot".into(),
        ));
    }
    if n > ns.min(nh) {
        return Err(Error::InvalidArgument(format!(
            "n = {n} exceeds min(N, N_h) = {}",
            ns.min(nh)
        )));
    }
    let mu = mass.apply_rows(snapshots)?;
    let mut gram = Matrix::zeros(ns, ns);
    gemm(
        1.0 / ns as f64,
        snapshots,
        Trans::No,
        &mu,
        Trans::Yes,
        0.0,
        &mut gram,
    )?;
    for i in 0..ns {
        for j in 0..i {
            let s = 0.5 * (gram.get(i, j) + gram.get(j, i));
            gram.set(i, j, s);
            gram.set(j, i, s);
        }
    }
    let total_energy = (0..ns).map(|i| gram.get(i, i)).sum::<f64>();
    let (mut values, vectors) = symmetric_eigen_desc(&gram)?;
    for v in &mut values {
        *v = v.max(0.0);
    }
    let lead = values[0];
    let rank = values.iter().take_while(|&&v| v > RANK_TOL * lead).count();
    let kept = n.min(rank);
    let rank_limited = kept < n;
    if rank_limited {
        warn!("POD: requested {n} modes but numerical rank is {rank}");
    }

    let coeffs = Matrix::from_fn(ns, kept, |i, k| {
        vectors.get(i, k) / (ns as f64 * values[k]).sqrt()
    });
    let mut modes = Matrix::zeros(nh, kept);
    gemm(
        1.0,
        snapshots,
        Trans::Yes,
        &coeffs,
        Trans::No,
        0.0,
        &mut modes,
    )?;
    m_orthonormalize(&mut modes, mass)?;
    normalize_column_signs(&mut modes);
    Ok(PODBasis {
        modes,
        eigenvalues: values,
        total_energy,
        rank,
        rank_limited,
    })
}

/// Monte Carlo error summary over a set of samples.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorStats {
    /// Mean of `||u - u_hat||_{V_h}`.
    pub absolute: f64,
    /// Mean of `||u - u_hat|| / ||u||` over samples with `||u|| > 0`.
    pub relative: f64,
    /// Mean of `||u - u_hat||^2`.
    pub mean_square: f64,
    /// Samples left out of `relative` because `||u|| = 0`.
    pub skipped: usize,
    pub samples: usize,
}

/// Error statistics of the reconstructions `approx` of `exact` (rows).
pub fn error_stats(
    exact: &Matrix,
    approx: &Matrix,
    mass: &SymmetricSparseMatrix,
) -> Result<ErrorStats> {
    if exact.rows() != approx.rows() || exact.cols() != approx.cols() {
        return Err(Error::dims(
            "error_stats",
            exact.rows() * exact.cols(),
            approx.rows() * approx.cols(),
        ));
    }
    if exact.cols() != mass.dim() {
        return Err(Error::dims("error_stats mass", mass.dim(), exact.cols()));
    }
    let n = exact.rows();
    if n == 0 {
        return Err(Error::InvalidArgument("empty sample set".into()));
    }
    let (mut abs, mut sq, mut rel, mut counted) = (0.0, 0.0, 0.0, 0usize);
    let mut diff = vec![0.0; exact.cols()];
    for r in 0..n {
        for ((d, a), b) in diff.iter_mut().zip(exact.row(r)).zip(approx.row(r)) {
            *d = a - b;
        }
        let e2 = mass.quadratic_form(&diff)?.max(0.0);
        let u = mass.quadratic_form(exact.row(r))?.max(0.0).sqrt();
        abs += e2.sqrt();
        sq += e2;
        if u > 0.0 {
            rel += e2.sqrt() / u;
            counted += 1;
        }
    }
    if counted < n {
        debug!(
            "{} zero-norm samples left out of the relative error",
            n - counted
        );
    }
    Ok(ErrorStats {
        absolute: abs / n as f64,
        relative: if counted > 0 {
            rel / counted as f64
        } else {
            0.0
        },
        mean_square: sq / n as f64,
        skipped: n - counted,
        samples: n,
    })
}

/// Errors of `u - V V^T M u` over the rows of `test`.
pub fn pod_projection_error(
    basis: &PODBasis,
    test: &Matrix,
    mass: &SymmetricSparseMatrix,
) -> Result<ErrorStats> {
    if test.cols() != basis.modes.rows() {
        return Err(Error::dims(
            "pod_projection_error",
            basis.modes.rows(),
            test.cols(),
        ));
    }
    let approx = basis.project(test, mass)?;
    error_stats(test, &approx, mass)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Least-squares line through `(ln n_k, ln value_k)`.
pub fn fit_loglog_slope(ns: &[f64], values: &[f64]) -> Result<LogLogFit> {
    if ns.len() != values.len() {
        return Err(Error::dims("fit_loglog_slope", ns.len(), values.len()));
    }
    if ns.len() < 2 {
        return Err(Error::InvalidArgument(
            "slope fit needs at least 2 points".into(),
        ));
    }
    if let Some(v) = ns.iter().chain(values).find(|v| !(**v > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "log-log fit needs positive data, got {v}"
        )));
    }
    let xs: Vec<f64> = ns.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("slope fit needs distinct n".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok(LogLogFit {
        slope,
        intercept: my - slope * mx,
    })
}
