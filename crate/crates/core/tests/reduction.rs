use proptest::prelude::*;

use dlrom_core::geometry::{assemble_mass_matrix, StructuredTriMesh, SymmetricSparseMatrix};
use dlrom_core::linalg::Matrix;
use dlrom_core::random_fields::kl_decompose;
use dlrom_core::reduction::{error_stats, fit_loglog_slope, pod, pod_projection_error};

fn snapshots(rows: usize, mesh: &StructuredTriMesh) -> Matrix {
    Matrix::from_fn(rows, mesh.node_count(), |i, j| {
        let p = mesh.nodes()[j];
        let a = 1.0 + i as f64 * 0.37;
        (a * p[0]).sin() * (1.0 + p[1] * p[1]) + (0.3 * a * p[1]).cos() / (1.0 + i as f64)
    })
}

#[test]
fn pod_and_kl_spectra_agree_on_empirical_covariance() {
    // N = 5 snapshots on a 3x3 node grid, lumped mass on both paths
    let mesh = StructuredTriMesh::unit_square(2).unwrap();
    let lumped = SymmetricSparseMatrix::diagonal(&assemble_mass_matrix(&mesh).row_sums());
    let s = snapshots(5, &mesh);
    let nh = mesh.node_count();
    let cov = Matrix::from_fn(nh, nh, |a, b| {
        (0..5).map(|r| s.get(r, a) * s.get(r, b)).sum::<f64>() / 5.0
    });
    let kl = kl_decompose(&cov, &lumped, nh).unwrap();
    let p = pod(&s, &lumped, 5).unwrap();
    for k in 0..5 {
        assert!(
            (kl.eigenvalues[k] - p.eigenvalues[k]).abs() < 1e-8 * kl.eigenvalues[0],
            "{k}: {} vs {}",
            kl.eigenvalues[k],
            p.eigenvalues[k]
        );
    }
    assert!(kl.eigenvalues[5..].iter().all(|&l| l < 1e-12));
    assert!((kl.total_energy - p.total_energy).abs() < 1e-12 * p.total_energy);
}

#[test]
fn modes_are_mass_orthonormal() {
    let mesh = StructuredTriMesh::unit_square(30).unwrap();
    let mass = assemble_mass_matrix(&mesh);
    let s = snapshots(200, &mesh);
    let p = pod(&s, &mass, 12).unwrap();
    for a in 0..p.n_modes() {
        let ma = mass.matvec(&p.modes.column(a)).unwrap();
        for b in 0..p.n_modes() {
            let ip: f64 = ma.iter().zip(p.modes.column(b)).map(|(x, y)| x * y).sum();
            let expect = if a == b { 1.0 } else { 0.0 };
            assert!((ip - expect).abs() < 1e-8, "({a},{b}) {ip}");
        }
    }
}

#[test]
fn training_energy_splits_into_captured_and_tail() {
    let mesh = StructuredTriMesh::unit_square(8).unwrap();
    let mass = assemble_mass_matrix(&mesh);
    let s = snapshots(40, &mesh);
    let full = pod(&s, &mass, 10).unwrap();
    for n in [1, 2, 4, 7] {
        let b = full.truncated(n);
        let e = pod_projection_error(&b, &s, &mass).unwrap();
        let tail = full.tail(n);
        assert!(
            (e.mean_square - tail).abs() <= 1e-6 * tail.max(1e-300),
            "n={n}"
        );
        let captured: f64 = full.eigenvalues[..n].iter().sum();
        assert!(((e.mean_square + captured) - full.total_energy).abs() < 1e-6 * full.total_energy);
    }
}

#[test]
fn mass_orthogonal_complement_projects_to_zero() {
    let mesh = StructuredTriMesh::unit_square(6).unwrap();
    let mass = assemble_mass_matrix(&mesh);
    let s = snapshots(10, &mesh);
    let b = pod(&s, &mass, 3).unwrap();
    let mut v: Vec<f64> = (0..mesh.node_count())
        .map(|i| ((i * 7) % 5) as f64 - 2.0)
        .collect();
    for k in 0..3 {
        let phi = b.modes.column(k);
        let c: f64 = mass
            .matvec(&v)
            .unwrap()
            .iter()
            .zip(&phi)
            .map(|(x, y)| x * y)
            .sum();
        for (x, p) in v.iter_mut().zip(&phi) {
            *x -= c * p;
        }
    }
    let row = Matrix::from_rows(&[v]).unwrap();
    let proj = b.project(&row, &mass).unwrap();
    assert!(proj.as_slice().iter().all(|x| x.abs() < 1e-10));
    // and a mode is reproduced exactly
    let mode = Matrix::from_rows(&[b.modes.column(1)]).unwrap();
    assert!(b.project(&mode, &mass).unwrap().max_abs_diff(&mode) < 1e-10);
}

#[test]
fn rank_deficient_snapshots_are_flagged() {
    let mesh = StructuredTriMesh::unit_square(4).unwrap();
    let mass = assemble_mass_matrix(&mesh);
    let base = snapshots(2, &mesh);
    let s = Matrix::from_fn(6, mesh.node_count(), |i, j| {
        (i as f64 + 1.0) * base.get(0, j) - (i as f64) * base.get(1, j)
    });
    let p = pod(&s, &mass, 4).unwrap();
    assert_eq!(p.rank, 2);
    assert!(p.rank_limited);
    assert_eq!(p.n_modes(), 2);
    assert!(pod(&s, &mass, 7).is_err());
}

#[test]
fn zero_rows_are_left_out_of_relative_error() {
    let mass = SymmetricSparseMatrix::diagonal(&[0.5, 0.5]);
    let exact = Matrix::from_rows(&[vec![0.0, 0.0], vec![2.0, 0.0]]).unwrap();
    let approx = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
    let e = error_stats(&exact, &approx, &mass).unwrap();
    let r = 0.5f64.sqrt();
    assert!((e.absolute - r).abs() < 1e-15);
    assert!((e.relative - 0.5).abs() < 1e-15);
    assert!((e.mean_square - 0.5).abs() < 1e-15);
    assert_eq!((e.skipped, e.samples), (1, 2));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn slope_fit_recovers_power_laws(beta in -4.0f64..1.0, c in 1e-3f64..1e3, n0 in 1usize..5, k in 2usize..8) {
        let ns: Vec<f64> = (0..k).map(|i| (n0 + 2 * i) as f64).collect();
        let vs: Vec<f64> = ns.iter().map(|n| c * n.powf(beta)).collect();
        let fit = fit_loglog_slope(&ns, &vs).unwrap();
        prop_assert!((fit.slope - beta).abs() < 1e-10);
        prop_assert!((fit.intercept - c.ln()).abs() < 1e-9);
    }

    #[test]
    fn slope_is_scale_invariant(vals in prop::collection::vec(1e-6f64..1.0, 3..7), s in 1e-3f64..1e3) {
        let ns: Vec<f64> = (1..=vals.len()).map(|i| i as f64).collect();
        let scaled: Vec<f64> = vals.iter().map(|v| v * s).collect();
        let a = fit_loglog_slope(&ns, &vals).unwrap();
        let b = fit_loglog_slope(&ns, &scaled).unwrap();
        prop_assert!((a.slope - b.slope).abs() < 1e-9);
    }

    #[test]
    fn projection_never_increases_norm(seed in 0u64..1000) {
        let mesh = StructuredTriMesh::unit_square(4).unwrap();
        let mass = assemble_mass_matrix(&mesh);
        let b = pod(&snapshots(8, &mesh), &mass, 3).unwrap();
        let v: Vec<f64> = (0..mesh.node_count())
            .map(|i| (((i as u64 + 1) * (seed + 3)) % 17) as f64 - 8.0)
            .collect();
        let row = Matrix::from_rows(std::slice::from_ref(&v)).unwrap();
        let p = b.project(&row, &mass).unwrap();
        prop_assert!(mass.quadratic_form(p.row(0)).unwrap() <= mass.quadratic_form(&v).unwrap() + 1e-10);
    }
}
