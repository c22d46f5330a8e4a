//! Experiment orchestration behind the `dlrom` command line: snapshot
//! generation, latent sweeps, the error table and the built-in checks.

pub mod config;
pub mod io;
mod selftest;

use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};

use crate::dlrom::{
    input_mass, latent_sweep, loss_gradient_check, table1_config, table1_errors, ErrorDecayReport,
    Table1Row,
};
use crate::error::{Error, Result};
use crate::neural::gradcheck::{network_gradient_suite, GradCheckCase};
use crate::neural::save_network;
use crate::reduction::pod;
use crate::solvers::{generate_snapshots, train_count, ProblemSpec, SnapshotSet};

pub use config::{ProblemKind, StudyConfig};
pub use io::fmt_f64;
pub use selftest::{selftest, SelfTestResult};

pub const INPUTS_FILE: &str = "inputs.ldsn";
pub const OUTPUTS_FILE: &str = "outputs.ldsn";
pub const SNAPSHOT_MANIFEST: &str = "snapshots.manifest";
pub const REPORT_FILE: &str = "report.csv";
pub const SLOPES_FILE: &str = "slopes.csv";
pub const SPECTRUM_FILE: &str = "spectrum.csv";
pub const EIGEN_LINF_FILE: &str = "eigen_linf.csv";
pub const TRACES_FILE: &str = "loss_traces.csv";
pub const TABLE1_FILE: &str = "table1.csv";
pub const MODEL_MANIFEST: &str = "model.manifest";

/// Number of input eigenfunctions whose sup norms are reported.
pub const EIGEN_LINF_COUNT: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct GenerateSummary {
    pub rows: usize,
    pub input_cols: usize,
    pub output_cols: usize,
    pub n_train: usize,
    pub inputs_checksum: String,
    pub outputs_checksum: String,
    pub inputs_path: PathBuf,
    pub outputs_path: PathBuf,
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

/// Samples and solves `config.n_snapshots` problems and writes the input and
/// output matrices plus a manifest to `out`.
pub fn generate(config: &StudyConfig, jobs: usize, out: &Path) -> Result<GenerateSummary> {
    config.validate()?;
    ensure_dir(out)?;
    let spec = config.problem_spec()?;
    let set = generate_snapshots(
        &spec,
        config.n_snapshots,
        config.seed,
        config.train_fraction,
        jobs,
    )?;
    let inputs_path = out.join(INPUTS_FILE);
    let outputs_path = out.join(OUTPUTS_FILE);
    io::write_snapshot_matrix(&set.inputs, &inputs_path)?;
    io::write_snapshot_matrix(&set.outputs, &outputs_path)?;
    let summary = GenerateSummary {
        rows: set.len(),
        input_cols: set.inputs.cols(),
        output_cols: set.outputs.cols(),
        n_train: set.n_train,
        inputs_checksum: io::file_checksum(&inputs_path)?,
        outputs_checksum: io::file_checksum(&outputs_path)?,
        inputs_path,
        outputs_path,
    };
    io::write_manifest(
        &out.join(SNAPSHOT_MANIFEST),
        "snapshots",
        &config.hash(),
        config.seed,
        &[
            ("problem", config.problem.name().into()),
            ("rows", summary.rows.to_string()),
            ("input_cols", summary.input_cols.to_string()),
            ("output_cols", summary.output_cols.to_string()),
            ("n_train", summary.n_train.to_string()),
            ("inputs_sha256", summary.inputs_checksum.clone()),
            ("outputs_sha256", summary.outputs_checksum.clone()),
        ],
    )?;
    Ok(summary)
}

/// Reads the snapshot pair written by [`generate`] and checks it against
/// the problem dimensions.
pub fn load_snapshots(config: &StudyConfig, spec: &ProblemSpec, dir: &Path) -> Result<SnapshotSet> {
    let (pi, po) = (dir.join(INPUTS_FILE), dir.join(OUTPUTS_FILE));
    for p in [&pi, &po] {
        if !p.exists() {
            return Err(Error::Config(format!(
                "snapshot file {} not found; run `generate` first",
                p.display()
            )));
        }
    }
    let inputs = io::read_snapshot_matrix(&pi)?;
    let outputs = io::read_snapshot_matrix(&po)?;
    if inputs.cols() != spec.input_dim() || outputs.cols() != spec.output_dim() {
        return Err(Error::Config(format!(
            "snapshots in {} have widths {}/{} but the configured problem needs {}/{}",
            dir.display(),
            inputs.cols(),
            outputs.cols(),
            spec.input_dim(),
            spec.output_dim()
        )));
    }
    let manifest = dir.join(SNAPSHOT_MANIFEST);
    if manifest.exists() {
        let entries = io::read_manifest(&manifest)?;
        let seed = entries
            .iter()
            .find(|(k, _)| k == "seed")
            .map(|(_, v)| v.as_str());
        if seed != Some(config.seed.to_string().as_str()) {
            warn!(
                "snapshot manifest seed {:?} differs from the configured seed {}",
                seed, config.seed
            );
        }
    }
    let n_train = train_count(inputs.rows(), config.train_fraction);
    SnapshotSet::new(inputs, outputs, n_train, config.seed)
}

/// Sup norms of the leading input eigenfunctions: Karhunen-Loeve modes for
/// Darcy, POD modes of the training inputs otherwise.
pub fn eigen_linf_norms(
    spec: &ProblemSpec,
    snapshots: &SnapshotSet,
    count: usize,
) -> Result<Vec<f64>> {
    let sup = |m: &crate::linalg::Matrix, k: usize| -> Vec<f64> {
        (0..k.min(m.cols()))
            .map(|j| (0..m.rows()).fold(0.0f64, |a, i| a.max(m.get(i, j).abs())))
            .collect()
    };
    match spec {
        ProblemSpec::Darcy { field, .. } => Ok(sup(&field.modes, count)),
        _ => {
            let x = snapshots.train_inputs();
            let basis = pod(&x, &input_mass(spec), count.min(x.cols()).min(x.rows()))?;
            Ok(sup(&basis.modes, count))
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "absent".to_string(), fmt_f64)
}

/// Runs the latent sweep on the snapshots in `out` and writes the report,
/// slopes, spectra, eigenfunction norms and loss traces.
pub fn sweep(config: &StudyConfig, jobs: usize, out: &Path) -> Result<ErrorDecayReport> {
    config.validate()?;
    let spec = config.problem_spec()?;
    let snapshots = load_snapshots(config, &spec, out)?;
    let arch = config.architecture(&spec);
    info!(
        "sweep over n = {:?} with autoencoder widths {:?}",
        config.sweep_ns,
        arch.variant_widths()
    );
    let report = latent_sweep(
        &spec,
        &snapshots,
        &config.sweep_ns,
        &arch,
        &config.train,
        jobs,
    )?;
    write_sweep_outputs(config, &spec, &snapshots, &report, out)?;
    Ok(report)
}

pub fn write_sweep_outputs(
    config: &StudyConfig,
    spec: &ProblemSpec,
    snapshots: &SnapshotSet,
    report: &ErrorDecayReport,
    out: &Path,
) -> Result<()> {
    ensure_dir(out)?;
    let hash = config.hash();
    let seed = config.seed;
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                fmt_f64(r.e_ae),
                fmt_f64(r.e_pod),
                fmt_f64(r.sqrt_tail_mu),
                fmt_f64(r.sqrt_tail_u),
            ]
        })
        .collect();
    io::write_csv(
        &out.join(REPORT_FILE),
        "report",
        &hash,
        seed,
        &["n", "e_ae", "e_pod", "sqrt_tail_mu", "sqrt_tail_u"],
        &rows,
    )?;
    let s = &report.slopes;
    io::write_csv(
        &out.join(SLOPES_FILE),
        "slopes",
        &hash,
        seed,
        &["quantity", "slope"],
        &[
            vec!["beta_ae".into(), opt(s.ae)],
            vec!["beta_pod".into(), opt(s.pod)],
            vec!["beta_mu".into(), opt(s.mu)],
            vec!["beta_u".into(), opt(s.u)],
        ],
    )?;
    let len = report.spectrum_mu.len().max(report.spectrum_u.len());
    let cell = |v: &[f64], i: usize| v.get(i).map_or_else(String::new, |x| fmt_f64(*x));
    let spectrum: Vec<Vec<String>> = (0..len)
        .map(|i| {
            vec![
                (i + 1).to_string(),
                cell(&report.spectrum_mu, i),
                cell(&report.spectrum_u, i),
            ]
        })
        .collect();
    io::write_csv(
        &out.join(SPECTRUM_FILE),
        "spectrum",
        &hash,
        seed,
        &["i", "lambda_mu", "lambda_u"],
        &spectrum,
    )?;
    let linf: Vec<Vec<String>> = eigen_linf_norms(spec, snapshots, EIGEN_LINF_COUNT)?
        .into_iter()
        .enumerate()
        .map(|(i, v)| vec![(i + 1).to_string(), fmt_f64(v)])
        .collect();
    io::write_csv(
        &out.join(EIGEN_LINF_FILE),
        "eigen_linf",
        &hash,
        seed,
        &["i", "linf_norm_phi_i"],
        &linf,
    )?;
    let epochs = report.traces.iter().map(Vec::len).max().unwrap_or(0);
    let mut cols = vec!["epoch".to_string()];
    cols.extend(report.rows.iter().map(|r| format!("loss_n{}", r.n)));
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let traces: Vec<Vec<String>> = (0..epochs)
        .map(|e| {
            let mut row = vec![(e + 1).to_string()];
            row.extend(report.traces.iter().map(|t| cell(t, e)));
            row
        })
        .collect();
    io::write_csv(
        &out.join(TRACES_FILE),
        "loss_traces",
        &hash,
        seed,
        &col_refs,
        &traces,
    )?;
    Ok(())
}

/// Trains the full DL-ROM at `config.table1_n`, writes the relative error
/// table (in percent), the three network checkpoints and a manifest tying
/// them together.
pub fn table1(config: &StudyConfig, out: &Path) -> Result<Table1Row> {
    config.validate()?;
    let spec = config.problem_spec()?;
    let snapshots = load_snapshots(config, &spec, out)?;
    let arch = config.architecture(&spec);
    let train = table1_config(&spec, &config.train);
    let (row, model, trace) = table1_errors(&spec, &snapshots, config.table1_n, &arch, &train)?;
    if row.rank_limited {
        warn!(
            "n = {} exceeds the numerical rank of the training snapshots",
            config.table1_n
        );
    }
    let hash = config.hash();
    io::write_csv(
        &out.join(TABLE1_FILE),
        "table1",
        &hash,
        config.seed,
        &["n", "pod_percent", "ae_percent", "dlrom_percent"],
        &[vec![
            row.n.to_string(),
            fmt_f64(100.0 * row.pod),
            fmt_f64(100.0 * row.ae),
            fmt_f64(100.0 * row.dlrom),
        ]],
    )?;
    let files = [
        ("encoder", "encoder.ldlm"),
        ("decoder", "decoder.ldlm"),
        ("reduced_map", "reduced_map.ldlm"),
    ];
    save_network(&model.encoder, &out.join(files[0].1))?;
    save_network(&model.decoder, &out.join(files[1].1))?;
    save_network(&model.reduced_map, &out.join(files[2].1))?;
    let mut entries: Vec<(&str, String)> = vec![
        ("problem", config.problem.name().into()),
        ("latent_dim", model.latent_dim.to_string()),
        ("epochs", trace.len().to_string()),
        (
            "final_loss",
            trace.last().map_or_else(String::new, |v| fmt_f64(*v)),
        ),
    ];
    for (k, f) in files {
        entries.push((k, f.to_string()));
    }
    io::write_manifest(
        &out.join(MODEL_MANIFEST),
        "model",
        &hash,
        config.seed,
        &entries,
    )?;
    Ok(row)
}

/// Finite-difference checks of every layer/activation combination and of
/// the full three-term loss.
pub fn gradcheck(seed: u64) -> Result<Vec<GradCheckCase>> {
    let mut cases = network_gradient_suite(seed)?;
    cases.extend(loss_gradient_check(seed)?);
    Ok(cases)
}
