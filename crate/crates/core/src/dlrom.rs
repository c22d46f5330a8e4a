//! DL-ROM assembly: encoder, decoder and reduced map trained jointly on the
//! three-term loss, plus Monte Carlo test errors and the latent sweep.

use log::{info, warn};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{build_unit_square_mesh, Point, SymmetricSparseMatrix};
use crate::linalg::Matrix;
use crate::neural::gradcheck::{
    gradients_relative_error, numeric_gradients, random_matrix, GradCheckCase, FD_STEP,
};
use crate::neural::{
    adam_step, Activation, AdamConfig, AdamState, AffineLayer, Gradients, Network,
};
use crate::reduction::{
    error_stats, fit_loglog_slope, pod, pod_projection_error, ErrorStats, PODBasis,
};
use crate::rng::{self, Rng};
use crate::solvers::{ProblemSpec, SnapshotSet};

/// Slope of every leaky ReLU in the reference architectures.
pub const LEAKY_SLOPE: f64 = 0.1;

/// Loss above which training is declared divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;

#[derive(Clone, Debug, PartialEq)]
pub struct DLROM {
    /// `Psi'`: output field to latent code.
    pub encoder: Network,
    /// `Psi`: latent code to output field.
    pub decoder: Network,
    /// `phi`: input to latent code.
    pub reduced_map: Network,
    pub latent_dim: usize,
}

impl DLROM {
    pub fn new(encoder: Network, decoder: Network, reduced_map: Network) -> Result<Self> {
        let n = encoder.output_width();
        if decoder.input_width() != n {
            return Err(Error::dims(
                "decoder latent width",
                n,
                decoder.input_width(),
            ));
        }
        if reduced_map.output_width() != n {
            return Err(Error::dims(
                "reduced map latent width",
                n,
                reduced_map.output_width(),
            ));
        }
        if decoder.output_width() != encoder.input_width() {
            return Err(Error::dims(
                "decoder output width",
                encoder.input_width(),
                decoder.output_width(),
            ));
        }
        Ok(Self {
            encoder,
            decoder,
            reduced_map,
            latent_dim: n,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.decoder.output_width()
    }

    pub fn input_dim(&self) -> usize {
        self.reduced_map.input_width()
    }

    /// `Psi(Psi'(u))` row by row.
    pub fn reconstruct(&self, outputs: &Matrix) -> Result<Matrix> {
        self.decoder.predict(&self.encoder.predict(outputs)?)
    }

    /// `Psi(phi(mu))` row by row.
    pub fn predict(&self, inputs: &Matrix) -> Result<Matrix> {
        self.decoder.predict(&self.reduced_map.predict(inputs)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    /// Weight of `||u - Psi(phi(mu))||^2`.
    pub alpha1: f64,
    /// Weight of `||u - Psi(Psi'(u))||^2`.
    pub alpha2: f64,
    /// Weight of `|Psi'(u) - phi(mu)|^2`.
    pub alpha3: f64,
    /// Replace the first term by `||u - Psi(phi(mu))|| / ||u||`.
    pub rel_first_term: bool,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha1: 0.0,
            alpha2: 1.0,
            alpha3: 0.0,
            rel_first_term: false,
            epochs: 300,
            lr: 1e-3,
            batch_size: 32,
            seed: 0,
            weight_decay: 0.0,
        }
    }
}

impl TrainConfig {
    /// Autoencoder-only training (`alpha1 = alpha3 = 0`).
    pub fn autoencoder_only(self) -> Self {
        Self {
            alpha1: 0.0,
            alpha2: 1.0,
            alpha3: 0.0,
            rel_first_term: false,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let alphas = [self.alpha1, self.alpha2, self.alpha3];
        if alphas.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
            return Err(Error::Config(format!(
                "loss weights must be nonnegative, got {alphas:?}"
            )));
        }
        if alphas.iter().all(|a| *a == 0.0) {
            return Err(Error::Config(
                "at least one loss weight must be positive".into(),
            ));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(Error::Config(format!(
                "learning rate must be nonnegative, got {}",
                self.lr
            )));
        }
        if !(self.weight_decay >= 0.0) || !self.weight_decay.is_finite() {
            return Err(Error::Config(format!(
                "weight decay must be nonnegative, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }

    fn uses_reduced_map(&self) -> bool {
        self.alpha1 > 0.0 || self.alpha3 > 0.0
    }

    fn uses_encoder(&self) -> bool {
        self.alpha2 > 0.0 || self.alpha3 > 0.0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossValue {
    pub total: f64,
    /// Unweighted batch means of the three terms.
    pub terms: [f64; 3],
    /// Zero-norm samples left out of the relative first term.
    pub skipped: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DlromGradients {
    pub encoder: Gradients,
    pub decoder: Gradients,
    pub reduced_map: Gradients,
}

/// Batch loss and its exact gradient with respect to all three networks.
///
/// The first two terms use the `V_h` norm `v^T M v`, the third the Euclidean
/// norm of the latent mismatch; each is averaged over the batch. Under
/// `rel_first_term` the first term is averaged over nonzero samples only.
pub fn dlrom_loss(
    model: &DLROM,
    inputs: &Matrix,
    outputs: &Matrix,
    mass: &SymmetricSparseMatrix,
    config: &TrainConfig,
) -> Result<(LossValue, DlromGradients)> {
    let b = outputs.rows();
    if inputs.rows() != b {
        return Err(Error::dims("loss batch rows", b, inputs.rows()));
    }
    if b == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if outputs.cols() != model.output_dim() || mass.dim() != model.output_dim() {
        return Err(Error::dims(
            "loss output width",
            model.output_dim(),
            outputs.cols(),
        ));
    }
    let (a1, a2, a3) = (config.alpha1, config.alpha2, config.alpha3);
    let bf = b as f64;
    let n = model.latent_dim;

    let phi = if config.uses_reduced_map() {
        Some(model.reduced_map.forward(inputs)?)
    } else {
        None
    };
    let enc = if config.uses_encoder() {
        Some(model.encoder.forward(outputs)?)
    } else {
        None
    };

    // Decoder runs once on the stacked codes [phi(mu); Psi'(u)].
    let use1 = a1 > 0.0;
    let use2 = a2 > 0.0;
    let mut codes: Option<Matrix> = None;
    if use1 {
        codes = Some(phi.as_ref().expect("phi computed").0.clone());
    }
    if use2 {
        let z = &enc.as_ref().expect("encoder computed").0;
        codes = Some(match codes {
            Some(c) => c.vstack(z)?,
            None => z.clone(),
        });
    }

    let mut value = LossValue::default();
    let mut dec_grads = Gradients::zeros_like(&model.decoder);
    let mut dz_phi = Matrix::zeros(b, n);
    let mut dz_enc = Matrix::zeros(b, n);

    if let Some(codes) = codes {
        let (recon, cache) = model.decoder.forward(&codes)?;
        let mut resid = Matrix::zeros(recon.rows(), recon.cols());
        for r in 0..recon.rows() {
            let u = outputs.row(r % b);
            for ((d, x), y) in resid.row_mut(r).iter_mut().zip(u).zip(recon.row(r)) {
                *d = x - y;
            }
        }
        let m_resid = mass.apply_rows(&resid)?;
        let mut upstream = Matrix::zeros(recon.rows(), recon.cols());
        let mut offset = 0;
        if use1 {
            if config.rel_first_term {
                let m_u = mass.apply_rows(outputs)?;
                let mut counted = 0usize;
                let mut sum = 0.0;
                let mut scales = vec![0.0; b];
                for r in 0..b {
                    let un = crate::linalg::dot(outputs.row(r), m_u.row(r))
                        .max(0.0)
                        .sqrt();
                    let rn = crate::linalg::dot(resid.row(r), m_resid.row(r))
                        .max(0.0)
                        .sqrt();
                    if un > 0.0 {
                        counted += 1;
                        sum += rn / un;
                        if rn > 0.0 {
                            scales[r] = 1.0 / (rn * un);
                        }
                    }
                }
                value.skipped = b - counted;
                if counted > 0 {
                    let c = counted as f64;
                    value.terms[0] = sum / c;
                    for (r, s) in scales.iter().enumerate() {
                        let g = -a1 * s / c;
                        for (up, mr) in upstream.row_mut(r).iter_mut().zip(m_resid.row(r)) {
                            *up = g * mr;
                        }
                    }
                }
            } else {
                let mut sum = 0.0;
                for r in 0..b {
                    sum += crate::linalg::dot(resid.row(r), m_resid.row(r));
                    for (up, mr) in upstream.row_mut(r).iter_mut().zip(m_resid.row(r)) {
                        *up = -2.0 * a1 / bf * mr;
                    }
                }
                value.terms[0] = sum / bf;
            }
            offset = b;
        }
        if use2 {
            let mut sum = 0.0;
            for r in offset..offset + b {
                sum += crate::linalg::dot(resid.row(r), m_resid.row(r));
                for (up, mr) in upstream.row_mut(r).iter_mut().zip(m_resid.row(r)) {
                    *up = -2.0 * a2 / bf * mr;
                }
            }
            value.terms[1] = sum / bf;
        }
        let (g, dcodes) = model.decoder.backward(&cache, &upstream)?;
        dec_grads = g;
        if use1 {
            for r in 0..b {
                dz_phi.row_mut(r).copy_from_slice(dcodes.row(r));
            }
        }
        if use2 {
            for r in 0..b {
                dz_enc.row_mut(r).copy_from_slice(dcodes.row(offset + r));
            }
        }
    }

    if a3 > 0.0 {
        let zp = &phi.as_ref().expect("phi computed").0;
        let ze = &enc.as_ref().expect("encoder computed").0;
        let mut sum = 0.0;
        for r in 0..b {
            for k in 0..n {
                let d = ze.get(r, k) - zp.get(r, k);
                sum += d * d;
                let g = 2.0 * a3 / bf * d;
                dz_enc.set(r, k, dz_enc.get(r, k) + g);
                dz_phi.set(r, k, dz_phi.get(r, k) - g);
            }
        }
        value.terms[2] = sum / bf;
    }

    let encoder = match &enc {
        Some((_, cache)) => model.encoder.backward_params(cache, &dz_enc)?,
        None => Gradients::zeros_like(&model.encoder),
    };
    let reduced_map = match &phi {
        Some((_, cache)) => model.reduced_map.backward_params(cache, &dz_phi)?,
        None => Gradients::zeros_like(&model.reduced_map),
    };
    value.total = a1 * value.terms[0] + a2 * value.terms[1] + a3 * value.terms[2];
    Ok((
        value,
        DlromGradients {
            encoder,
            decoder: dec_grads,
            reduced_map,
        },
    ))
}

fn tiny_model(seed: u64) -> Result<DLROM> {
    let mut r = rng::from_seed(seed);
    let enc = Network::new(vec![
        AffineLayer::dense(5, 4, Activation::Tanh, &mut r)?,
        AffineLayer::dense(4, 2, leaky(), &mut r)?,
    ])?;
    let dec = Network::new(vec![
        AffineLayer::dense(2, 6, leaky(), &mut r)?,
        AffineLayer::dense(6, 5, Activation::SoftClamp, &mut r)?,
    ])?;
    let phi = Network::new(vec![
        AffineLayer::dense(3, 4, Activation::Tanh, &mut r)?,
        AffineLayer::dense(4, 2, Activation::Identity, &mut r)?,
    ])?;
    DLROM::new(enc, dec, phi)
}

/// Finite-difference check of the full three-term loss on a tiny model, in
/// both the absolute and the relative first-term variants.
pub fn loss_gradient_check(seed: u64) -> Result<Vec<GradCheckCase>> {
    let model = tiny_model(seed)?;
    let mut r = rng::from_seed(seed.wrapping_add(1));
    let mu = random_matrix(4, 3, 2.0, &mut r);
    let u = Matrix::from_fn(4, 5, |i, j| 0.1 * (i + 1) as f64 + 0.05 * j as f64);
    let mass = SymmetricSparseMatrix::diagonal(&[0.2; 5]);
    let mut cases = Vec::new();
    for rel in [false, true] {
        let cfg = TrainConfig {
            alpha1: 0.7,
            alpha2: 0.3,
            alpha3: 0.5,
            rel_first_term: rel,
            ..TrainConfig::default()
        };
        let (_, g) = dlrom_loss(&model, &mu, &u, &mass, &cfg)?;
        let f = |m: &DLROM| dlrom_loss(m, &mu, &u, &mass, &cfg).map(|v| v.0.total);
        let ge = numeric_gradients(&model.encoder, FD_STEP, |n| {
            f(&DLROM {
                encoder: n.clone(),
                ..model.clone()
            })
        })?;
        let gd = numeric_gradients(&model.decoder, FD_STEP, |n| {
            f(&DLROM {
                decoder: n.clone(),
                ..model.clone()
            })
        })?;
        let gp = numeric_gradients(&model.reduced_map, FD_STEP, |n| {
            f(&DLROM {
                reduced_map: n.clone(),
                ..model.clone()
            })
        })?;
        let err = gradients_relative_error(&g.encoder, &ge)
            .max(gradients_relative_error(&g.decoder, &gd))
            .max(gradients_relative_error(&g.reduced_map, &gp));
        cases.push(GradCheckCase {
            name: format!("dlrom_loss/{}", if rel { "relative" } else { "absolute" }),
            max_relative_error: err,
        });
    }
    Ok(cases)
}

/// Per-epoch record of a training run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    /// Mean batch loss per epoch (weighted by batch size).
    pub loss_trace: Vec<f64>,
    /// Zero-norm samples met by the relative first term over the whole run.
    pub skipped_samples: usize,
}

/// Shuffled mini-batch Adam on the joint parameter set, for the training
/// split of `snapshots`. Networks that do not enter the loss are left
/// untouched.
pub fn train(
    model: &mut DLROM,
    snapshots: &SnapshotSet,
    mass: &SymmetricSparseMatrix,
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    if snapshots.n_train == 0 {
        return Err(Error::InvalidArgument("training split is empty".into()));
    }
    let x = snapshots.train_inputs();
    let u = snapshots.train_outputs();
    if x.cols() != model.input_dim() {
        return Err(Error::dims(
            "training input width",
            model.input_dim(),
            x.cols(),
        ));
    }
    let adam = AdamConfig {
        lr: config.lr,
        weight_decay: config.weight_decay,
        ..AdamConfig::default()
    };
    let mut s_enc = AdamState::new(&model.encoder, adam);
    let mut s_dec = AdamState::new(&model.decoder, adam);
    let mut s_phi = AdamState::new(&model.reduced_map, adam);
    let mut rng: Rng = rng::from_seed(config.seed);
    let mut order: Vec<usize> = (0..u.rows()).collect();
    let mut report = TrainReport::default();

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for idx in order.chunks(config.batch_size) {
            let xb = x.select_rows(idx);
            let ub = u.select_rows(idx);
            let (loss, g) = dlrom_loss(model, &xb, &ub, mass, config)?;
            if !loss.total.is_finite() || loss.total > DIVERGENCE_THRESHOLD {
                return Err(Error::Divergence {
                    epoch,
                    loss: loss.total,
                });
            }
            report.skipped_samples += loss.skipped;
            total += loss.total * idx.len() as f64;
            if config.uses_encoder() {
                adam_step(&mut s_enc, &mut model.encoder, &g.encoder)?;
            }
            adam_step(&mut s_dec, &mut model.decoder, &g.decoder)?;
            if config.uses_reduced_map() {
                adam_step(&mut s_phi, &mut model.reduced_map, &g.reduced_map)?;
            }
        }
        let mean = total / u.rows() as f64;
        if epoch % 50 == 49 || epoch + 1 == config.epochs {
            info!("epoch {} loss {:.6e}", epoch + 1, mean);
        }
        report.loss_trace.push(mean);
    }
    if report.skipped_samples > 0 {
        warn!(
            "{} zero-norm samples left out of the relative loss term",
            report.skipped_samples
        );
    }
    Ok(report)
}

/// Which approximation of the test outputs [`test_error`] measures.
#[derive(Clone, Copy, Debug)]
pub enum ErrorMode<'a> {
    /// `Psi(Psi'(u))`.
    AeReconstruction(&'a DLROM),
    /// `Psi(phi(mu))`.
    RomPrediction(&'a DLROM),
    /// `V V^T M u`.
    PodProjection(&'a PODBasis),
}

/// Monte Carlo estimate of the mean `V_h` error over the test split; the
/// relative variant divides each sample by `||u||_{V_h}`.
pub fn test_error(
    mode: ErrorMode<'_>,
    snapshots: &SnapshotSet,
    mass: &SymmetricSparseMatrix,
) -> Result<ErrorStats> {
    if snapshots.n_test() == 0 {
        return Err(Error::InvalidArgument("test split is empty".into()));
    }
    let u = snapshots.test_outputs();
    match mode {
        ErrorMode::AeReconstruction(m) => error_stats(&u, &m.reconstruct(&u)?, mass),
        ErrorMode::RomPrediction(m) => error_stats(&u, &m.predict(&snapshots.test_inputs())?, mass),
        ErrorMode::PodProjection(basis) => pod_projection_error(basis, &u, mass),
    }
}

/// Outer widths of the reference architectures; only the latent width
/// varies along a sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Architecture {
    /// Hidden width of the autoencoder next to the field layers.
    pub ae_width: usize,
    /// Number of autoencoders trained per latent dimension in a sweep,
    /// with hidden widths `ae_width / 2^k`; the best test error is kept.
    pub variants: usize,
}

impl Architecture {
    pub fn default_for(spec: &ProblemSpec) -> Self {
        let ae_width = match spec {
            // 500 hidden units at 2601 nodes, rescaled to the mesh
            ProblemSpec::Darcy { .. } => {
                ((500 * spec.output_dim()) as f64 / 2601.0).round() as usize
            }
            ProblemSpec::Burgers { .. } => 200,
            ProblemSpec::Cookie { .. } => 400,
        };
        let variants = match spec {
            ProblemSpec::Cookie { .. } => 3,
            _ => 1,
        };
        Self {
            ae_width: ae_width.max(1),
            variants,
        }
    }

    /// Hidden widths of the sweep variants, ascending and ending at
    /// `ae_width`.
    pub fn variant_widths(&self) -> Vec<usize> {
        let v = self.variants.max(1);
        (0..v)
            .map(|k| (self.ae_width >> (v - 1 - k)).max(1))
            .collect()
    }
}

fn leaky() -> Activation {
    Activation::LeakyRelu(LEAKY_SLOPE)
}

fn square_grid(n_div: usize) -> Result<Vec<Point>> {
    Ok(build_unit_square_mesh(n_div)?.nodes().to_vec())
}

fn line_grid(length: f64, cells: usize) -> Vec<Point> {
    let h = length / cells as f64;
    (0..cells).map(|i| [(i as f64 + 0.5) * h, 0.0]).collect()
}

/// Freshly initialized DL-ROM for `spec` with latent dimension `n`.
///
/// * Darcy: autoencoder `N_h -> w -> n -> w -> N_h`; reduced map through
///   mesh-informed layers onto 16x16 and 8x8 node grids (supports 0.125 and
///   0.25), then dense to `n`.
/// * Burgers: encoder `N_h -> n`, decoder `n -> w -> N_h` with the soft
///   clamp on the output; reduced map through mesh-informed layers onto
///   `N_h/2` and `N_h/4` cells (supports 0.25 and 0.5), then dense to `n`.
/// * Cookie: autoencoder `N_h -> w -> w/4 -> n -> w/4 -> w -> N_h`; dense reduced map
///   `3 -> 64 -> 64 -> n`.
pub fn build_dlrom(spec: &ProblemSpec, arch: &Architecture, n: usize, seed: u64) -> Result<DLROM> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "latent dimension must be positive".into(),
        ));
    }
    let mut rng = rng::from_seed(seed);
    let r = &mut rng;
    let nh = spec.output_dim();
    let w = arch.ae_width;
    let coords = spec.output_coords();
    let (encoder, decoder, reduced_map) = match spec {
        ProblemSpec::Darcy { .. } => {
            let g16 = square_grid(15)?;
            let g8 = square_grid(7)?;
            let enc = vec![
                AffineLayer::dense(nh, w, leaky(), r)?,
                AffineLayer::dense(w, n, leaky(), r)?,
            ];
            let dec = vec![
                AffineLayer::dense(n, w, leaky(), r)?,
                AffineLayer::dense(w, nh, Activation::Identity, r)?,
            ];
            let phi = vec![
                AffineLayer::mesh_informed(&coords, &g16, 0.125, Activation::Tanh, r)?,
                AffineLayer::mesh_informed(&g16, &g8, 0.25, leaky(), r)?,
                AffineLayer::dense(g8.len(), n, leaky(), r)?,
            ];
            (enc, dec, phi)
        }
        ProblemSpec::Burgers { problem, .. } => {
            let length = problem.grid.length();
            let c2 = line_grid(length, (nh / 2).max(1));
            let c4 = line_grid(length, (nh / 4).max(1));
            let enc = vec![AffineLayer::dense(nh, n, leaky(), r)?];
            let dec = vec![
                AffineLayer::dense(n, w, leaky(), r)?,
                AffineLayer::dense(w, nh, Activation::SoftClamp, r)?,
            ];
            let phi = vec![
                AffineLayer::mesh_informed(&coords, &c2, 0.25, leaky(), r)?,
                AffineLayer::mesh_informed(&c2, &c4, 0.5, leaky(), r)?,
                AffineLayer::dense(c4.len(), n, leaky(), r)?,
            ];
            (enc, dec, phi)
        }
        ProblemSpec::Cookie { .. } => {
            let q = (w / 4).max(1);
            let enc = vec![
                AffineLayer::dense(nh, w, leaky(), r)?,
                AffineLayer::dense(w, q, leaky(), r)?,
                AffineLayer::dense(q, n, leaky(), r)?,
            ];
            let dec = vec![
                AffineLayer::dense(n, q, leaky(), r)?,
                AffineLayer::dense(q, w, leaky(), r)?,
                AffineLayer::dense(w, nh, Activation::Identity, r)?,
            ];
            let phi = vec![
                AffineLayer::dense(spec.input_dim(), 64, Activation::Tanh, r)?,
                AffineLayer::dense(64, 64, leaky(), r)?,
                AffineLayer::dense(64, n, leaky(), r)?,
            ];
            (enc, dec, phi)
        }
    };
    DLROM::new(
        Network::new(encoder)?,
        Network::new(decoder)?,
        Network::new(reduced_map)?,
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayRow {
    pub n: usize,
    /// Mean autoencoder test error in the `V_h` norm.
    pub e_ae: f64,
    /// Mean POD projection test error with `n` modes.
    pub e_pod: f64,
    pub sqrt_tail_mu: f64,
    pub sqrt_tail_u: f64,
}

/// Log-log decay rates; `None` when fewer than two positive points exist.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DecaySlopes {
    pub ae: Option<f64>,
    pub pod: Option<f64>,
    pub mu: Option<f64>,
    pub u: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorDecayReport {
    pub rows: Vec<DecayRow>,
    pub slopes: DecaySlopes,
    /// Uncentered empirical spectrum of the training inputs.
    pub spectrum_mu: Vec<f64>,
    /// Uncentered empirical spectrum of the training outputs.
    pub spectrum_u: Vec<f64>,
    /// Per-`n` loss traces.
    pub traces: Vec<Vec<f64>>,
    pub seed: u64,
}

fn slope_of(ns: &[usize], values: impl Fn(&DecayRow) -> f64, rows: &[DecayRow]) -> Option<f64> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = ns
        .iter()
        .zip(rows)
        .map(|(n, r)| (*n as f64, values(r)))
        .filter(|(_, v)| *v > 0.0)
        .unzip();
    if xs.len() < 2 {
        return None;
    }
    fit_loglog_slope(&xs, &ys).ok().map(|f| f.slope)
}

impl ErrorDecayReport {
    pub fn compute_slopes(rows: &[DecayRow]) -> DecaySlopes {
        let ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
        DecaySlopes {
            ae: slope_of(&ns, |r| r.e_ae, rows),
            pod: slope_of(&ns, |r| r.e_pod, rows),
            mu: slope_of(&ns, |r| r.sqrt_tail_mu, rows),
            u: slope_of(&ns, |r| r.sqrt_tail_u, rows),
        }
    }
}

/// Input-space mass matrix, or the identity when the input is a parameter
/// vector.
pub fn input_mass(spec: &ProblemSpec) -> SymmetricSparseMatrix {
    spec.input_mass()
        .unwrap_or_else(|| SymmetricSparseMatrix::diagonal(&vec![1.0; spec.input_dim()]))
}

/// Nested-architecture sweep over the latent dimensions `ns`: for each `n` a
/// fresh autoencoder is trained alone (`alpha1 = alpha3 = 0`) and compared
/// with the POD projection error and the square-rooted eigenvalue tails of
/// inputs and outputs. Sweep points run on up to `jobs` workers; results do
/// not depend on `jobs`.
pub fn latent_sweep(
    spec: &ProblemSpec,
    snapshots: &SnapshotSet,
    ns: &[usize],
    arch: &Architecture,
    config: &TrainConfig,
    jobs: usize,
) -> Result<ErrorDecayReport> {
    if ns.is_empty() {
        return Err(Error::InvalidArgument(
            "latent sweep needs at least one n".into(),
        ));
    }
    if ns.windows(2).any(|w| w[0] >= w[1]) || ns[0] == 0 {
        return Err(Error::InvalidArgument(format!(
            "latent dimensions must be positive and strictly ascending, got {ns:?}"
        )));
    }
    let cfg = config.autoencoder_only();
    cfg.validate()?;
    let mass = spec.mass();
    let n_max = *ns.last().expect("nonempty");
    let pod_u = pod(&snapshots.train_outputs(), &mass, n_max)?;
    let train_inputs = snapshots.train_inputs();
    let mu_modes = n_max.min(train_inputs.cols()).min(train_inputs.rows());
    let pod_mu = pod(&train_inputs, &input_mass(spec), mu_modes)?;

    let one = |n: usize| -> Result<(DecayRow, Vec<f64>)> {
        let run = || -> Result<(DecayRow, Vec<f64>)> {
            let seed = rng::derive_seed(cfg.seed, n as u64);
            let mut best: Option<(f64, Vec<f64>)> = None;
            for width in arch.variant_widths() {
                let a = Architecture {
                    ae_width: width,
                    variants: 1,
                };
                let mut model = build_dlrom(spec, &a, n, seed)?;
                let report = train(&mut model, snapshots, &mass, &TrainConfig { seed, ..cfg })?;
                let e = test_error(ErrorMode::AeReconstruction(&model), snapshots, &mass)?.absolute;
                if arch.variants > 1 {
                    info!("n = {n}, width {width}: ae {e:.4e}");
                }
                if best.as_ref().is_none_or(|(b, _)| e < *b) {
                    best = Some((e, report.loss_trace));
                }
            }
            let (e_ae, loss_trace) = best.expect("at least one variant");
            let e_pod = test_error(
                ErrorMode::PodProjection(&pod_u.truncated(n)),
                snapshots,
                &mass,
            )?
            .absolute;
            info!("n = {n}: ae {e_ae:.4e}, pod {e_pod:.4e}");
            Ok((
                DecayRow {
                    n,
                    e_ae,
                    e_pod,
                    sqrt_tail_mu: pod_mu.tail(n).sqrt(),
                    sqrt_tail_u: pod_u.tail(n).sqrt(),
                },
                loss_trace,
            ))
        };
        run().map_err(|e| Error::Sweep {
            n,
            source: Box::new(e),
        })
    };

    let results: Vec<(DecayRow, Vec<f64>)> = if jobs <= 1 {
        ns.iter().map(|&n| one(n)).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        pool.install(|| ns.par_iter().map(|&n| one(n)).collect::<Result<_>>())?
    };
    let (rows, traces): (Vec<DecayRow>, Vec<Vec<f64>>) = results.into_iter().unzip();
    Ok(ErrorDecayReport {
        slopes: ErrorDecayReport::compute_slopes(&rows),
        rows,
        spectrum_mu: pod_mu.eigenvalues,
        spectrum_u: pod_u.eigenvalues,
        traces,
        seed: config.seed,
    })
}

/// Relative test errors (as fractions) of POD, autoencoder and full DL-ROM
/// at one latent dimension.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Table1Row {
    pub n: usize,
    pub pod: f64,
    pub ae: f64,
    pub dlrom: f64,
    pub rank_limited: bool,
}

/// Trains the full three-term DL-ROM at latent dimension `n` and reports the
/// relative test errors next to the POD projection error.
pub fn table1_errors(
    spec: &ProblemSpec,
    snapshots: &SnapshotSet,
    n: usize,
    arch: &Architecture,
    config: &TrainConfig,
) -> Result<(Table1Row, DLROM, Vec<f64>)> {
    let mass = spec.mass();
    let basis = pod(&snapshots.train_outputs(), &mass, n)?;
    let mut model = build_dlrom(spec, arch, n, rng::derive_seed(config.seed, n as u64))?;
    let report = train(&mut model, snapshots, &mass, config)?;
    let pod_err = test_error(ErrorMode::PodProjection(&basis), snapshots, &mass)?;
    if pod_err.skipped > 0 {
        warn!(
            "{} zero-norm test samples left out of the relative errors",
            pod_err.skipped
        );
    }
    let pod_err = pod_err.relative;
    let ae = test_error(ErrorMode::AeReconstruction(&model), snapshots, &mass)?.relative;
    let rom = test_error(ErrorMode::RomPrediction(&model), snapshots, &mass)?.relative;
    Ok((
        Table1Row {
            n,
            pod: pod_err,
            ae,
            dlrom: rom,
            rank_limited: basis.rank_limited,
        },
        model,
        report.loss_trace,
    ))
}

/// Loss weights used for full DL-ROM training of each problem.
pub fn table1_config(spec: &ProblemSpec, base: &TrainConfig) -> TrainConfig {
    match spec {
        ProblemSpec::Burgers { .. } => TrainConfig {
            alpha1: 1.0,
            alpha2: 1.0,
            alpha3: 1.0 / 16.0,
            rel_first_term: true,
            ..*base
        },
        _ => TrainConfig {
            alpha1: 0.2,
            alpha2: 0.2,
            alpha3: 1.0 / 16.0,
            rel_first_term: false,
            ..*base
        },
    }
}
