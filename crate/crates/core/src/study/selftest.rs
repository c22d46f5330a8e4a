use crate::error::Result;
use crate::geometry::{assemble_mass_matrix, FieldVector, StructuredTriMesh, UniformGrid1D};
use crate::linalg::Matrix;
use crate::neural::Activation;
use crate::random_fields::{assemble_covariance_matrix, kl_decompose, CovarianceKernel};
use crate::reduction::{fit_loglog_slope, pod};
use crate::solvers::{BurgersProblem, CookieProblem};

#[derive(Clone, Debug, PartialEq)]
pub struct SelfTestResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> SelfTestResult {
    SelfTestResult {
        name,
        passed,
        detail,
    }
}

/// Quick oracle examples across the modules; each takes well under a
/// second.
pub fn selftest() -> Result<Vec<SelfTestResult>> {
    let mut out = Vec::new();

    let mesh = StructuredTriMesh::unit_square(50)?;
    out.push(check(
        "mesh_counts",
        mesh.node_count() == 2601 && mesh.triangles().len() == 5000,
        format!(
            "{} nodes, {} triangles",
            mesh.node_count(),
            mesh.triangles().len()
        ),
    ));

    let m10 = StructuredTriMesh::unit_square(10)?;
    let mass = assemble_mass_matrix(&m10);
    let total = mass.sum_all();
    out.push(check(
        "mass_matrix_total",
        (total - 1.0).abs() < 1e-12,
        format!("1^T M 1 = {total}"),
    ));

    let leaky = Activation::LeakyRelu(0.1);
    let l: Vec<f64> = [-1.0, 0.0, 2.0].iter().map(|&x| leaky.apply(x)).collect();
    let s: Vec<f64> = [-1.0, 0.25, 1.0]
        .iter()
        .map(|&x| Activation::SoftClamp.apply(x))
        .collect();
    let soft_ok = s
        .iter()
        .zip([-0.1, 0.25, 0.55])
        .all(|(a, b)| (a - b).abs() < 1e-15);
    out.push(check(
        "activations",
        l == vec![-0.1, 0.0, 2.0] && soft_ok,
        format!("leaky {l:?}, soft clamp {s:?}"),
    ));

    let fit = fit_loglog_slope(&[1.0, 2.0], &[8.0, 1.0])?;
    out.push(check(
        "loglog_two_points",
        (fit.slope + 3.0).abs() < 1e-12,
        format!("slope {}", fit.slope),
    ));

    let p = BurgersProblem::default();
    let ic: FieldVector = p
        .grid
        .centers()
        .iter()
        .map(|&x| if x < 1.0 { 1.0 } else { 0.0 })
        .collect::<Vec<_>>()
        .into();
    let v = p.solve(&ic)?;
    let shock = shock_position(&p.grid, &v);
    out.push(check(
        "burgers_shock_speed",
        (shock - 1.5).abs() <= 2.0 * p.grid.h(),
        format!("shock at {shock:.4}, expected 1.5"),
    ));

    let m4 = StructuredTriMesh::unit_square(4)?;
    let mass4 = assemble_mass_matrix(&m4);
    let c = assemble_covariance_matrix(&CovarianceKernel::default(), m4.nodes());
    let kl = kl_decompose(&c, &mass4, m4.node_count())?;
    let sum: f64 = kl.eigenvalues.iter().sum();
    out.push(check(
        "kl_trace_identity",
        ((sum - kl.total_energy) / kl.total_energy).abs() < 1e-8,
        format!("sum lambda = {sum}, trace = {}", kl.total_energy),
    ));

    let snaps = Matrix::from_fn(5, m4.node_count(), |i, j| {
        ((i + 1) as f64 * (j as f64 * 0.3).sin()).cos()
    });
    let basis = pod(&snaps, &mass4, 3)?;
    let gram = mass4
        .apply_rows(&basis.modes.transpose())?
        .matmul(&basis.modes)?;
    let orth = gram.max_abs_diff(&Matrix::identity(basis.n_modes()));
    out.push(check(
        "pod_mass_orthonormal",
        orth < 1e-8,
        format!("max |V^T M V - I| = {orth:.2e}"),
    ));

    let cookie = CookieProblem::new(10)?;
    let a = cookie.solve(&[2.0, 0.3, 0.7])?;
    let b = cookie.solve(&[2.0, 0.7, 0.3])?;
    let mirror = (0..a.len())
        .map(|i| (a[i] - b[cookie.mesh.mirror_node(i)]).abs())
        .fold(0.0, f64::max);
    out.push(check(
        "cookie_mirror_symmetry",
        mirror < 1e-10,
        format!("max mirror gap {mirror:.2e}"),
    ));

    Ok(out)
}

/// Position where the profile first drops through the midpoint between its
/// extreme values, by linear interpolation between cell centres.
pub(crate) fn shock_position(grid: &UniformGrid1D, v: &[f64]) -> f64 {
    let hi = v.iter().cloned().fold(f64::MIN, f64::max);
    let lo = v.iter().cloned().fold(f64::MAX, f64::min);
    let mid = 0.5 * (hi + lo);
    for i in 0..v.len() - 1 {
        if v[i] >= mid && v[i + 1] < mid {
            let t = (v[i] - mid) / (v[i] - v[i + 1]);
            return grid.center(i) + t * grid.h();
        }
    }
    f64::NAN
}
