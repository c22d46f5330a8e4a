//! Central finite-difference checks of [`Network::backward`].

use rand::Rng as _;

use crate::error::Result;
use crate::linalg::Matrix;
use crate::rng::{self, Rng};

use super::{Activation, AffineLayer, Gradients, Network};

pub const FD_STEP: f64 = 1e-5;
pub const GRADCHECK_TOL: f64 = 1e-6;

/// `max|a - b| / max(|a|_inf, |b|_inf)`, or the absolute gap when both are
/// tiny.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let scale = a.iter().chain(b).fold(0.0f64, |m, v| m.max(v.abs()));
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

/// Largest per-tensor relative error between two gradient sets.
pub fn gradients_relative_error(a: &Gradients, b: &Gradients) -> f64 {
    a.layers
        .iter()
        .zip(&b.layers)
        .map(|(x, y)| {
            relative_error(x.weights.as_slice(), y.weights.as_slice())
                .max(relative_error(&x.bias, &y.bias))
        })
        .fold(0.0, f64::max)
}

/// Central-difference gradient of `loss` with respect to every trainable
/// parameter of `net`. Masked weights get 0.
pub fn numeric_gradients(
    net: &Network,
    step: f64,
    mut loss: impl FnMut(&Network) -> Result<f64>,
) -> Result<Gradients> {
    let mut out = Gradients::zeros_like(net);
    let mut work = net.clone();
    for l in 0..net.layers().len() {
        let (rows, cols) = (net.layers()[l].outputs(), net.layers()[l].inputs());
        for i in 0..rows {
            for j in 0..cols {
                if let Some(m) = &net.layers()[l].mask {
                    if !m.get(i, j) {
                        continue;
                    }
                }
                let v = net.layers()[l].weights.get(i, j);
                work.layers_mut()[l].weights.set(i, j, v + step);
                let fp = loss(&work)?;
                work.layers_mut()[l].weights.set(i, j, v - step);
                let fm = loss(&work)?;
                work.layers_mut()[l].weights.set(i, j, v);
                out.layers[l].weights.set(i, j, (fp - fm) / (2.0 * step));
            }
            let v = net.layers()[l].bias[i];
            work.layers_mut()[l].bias[i] = v + step;
            let fp = loss(&work)?;
            work.layers_mut()[l].bias[i] = v - step;
            let fm = loss(&work)?;
            work.layers_mut()[l].bias[i] = v;
            out.layers[l].bias[i] = (fp - fm) / (2.0 * step);
        }
    }
    Ok(out)
}

/// Test loss `sum(c .* y) + 0.5 |y|^2` and its gradient in `y`.
fn probe_loss(y: &Matrix, c: &Matrix) -> (f64, Matrix) {
    let mut g = Matrix::zeros(y.rows(), y.cols());
    let mut l = 0.0;
    for ((gv, &yv), &cv) in g
        .as_mut_slice()
        .iter_mut()
        .zip(y.as_slice())
        .zip(c.as_slice())
    {
        l += cv * yv + 0.5 * yv * yv;
        *gv = cv + yv;
    }
    (l, g)
}

/// Analytic vs numeric gradients of `net` under a random probe loss.
/// Returns the largest relative error over parameters and the input.
pub fn check_network(net: &Network, batch: &Matrix, rng: &mut Rng) -> Result<f64> {
    let c = random_matrix(batch.rows(), net.output_width(), 1.0, rng);
    let (y, cache) = net.forward(batch)?;
    let (_, up) = probe_loss(&y, &c);
    let (analytic, dx) = net.backward(&cache, &up)?;
    let numeric = numeric_gradients(net, FD_STEP, |n| Ok(probe_loss(&n.predict(batch)?, &c).0))?;
    let mut worst = gradients_relative_error(&analytic, &numeric);

    let mut xin = batch.clone();
    let mut ndx = vec![0.0; xin.as_slice().len()];
    for k in 0..ndx.len() {
        let v = xin.as_slice()[k];
        xin.as_mut_slice()[k] = v + FD_STEP;
        let fp = probe_loss(&net.predict(&xin)?, &c).0;
        xin.as_mut_slice()[k] = v - FD_STEP;
        let fm = probe_loss(&net.predict(&xin)?, &c).0;
        xin.as_mut_slice()[k] = v;
        ndx[k] = (fp - fm) / (2.0 * FD_STEP);
    }
    worst = worst.max(relative_error(dx.as_slice(), &ndx));
    Ok(worst)
}

pub fn random_matrix(rows: usize, cols: usize, half_width: f64, rng: &mut Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-half_width..half_width))
}

/// Randomizes biases so that every activation region is exercised.
fn jitter_biases(net: &mut Network, rng: &mut Rng) {
    for layer in net.layers_mut() {
        for b in &mut layer.bias {
            *b = rng.random_range(-0.5..0.5);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckCase {
    pub name: String,
    pub max_relative_error: f64,
}

impl GradCheckCase {
    pub fn passed(&self) -> bool {
        self.max_relative_error < GRADCHECK_TOL
    }
}

/// Every layer kind (dense, mesh-informed) crossed with every activation,
/// plus a mixed-activation three-layer network. Inputs are drawn in
/// `[-2, 2]`.
pub fn network_gradient_suite(seed: u64) -> Result<Vec<GradCheckCase>> {
    let mut rng = rng::from_seed(seed);
    let acts = [
        ("leaky_relu", Activation::LeakyRelu(0.1)),
        ("tanh", Activation::Tanh),
        ("soft_clamp", Activation::SoftClamp),
        ("identity", Activation::Identity),
    ];
    let line =
        |k: usize| -> Vec<[f64; 2]> { (0..k).map(|i| [i as f64 / (k - 1) as f64, 0.0]).collect() };
    let (p6, p5, p4, p3) = (line(6), line(5), line(4), line(3));
    let mut cases = Vec::new();
    for (name, act) in acts {
        for kind in ["dense", "mesh_informed"] {
            let layers = if kind == "dense" {
                vec![
                    AffineLayer::dense(6, 5, act, &mut rng)?,
                    AffineLayer::dense(5, 4, act, &mut rng)?,
                    AffineLayer::dense(4, 3, act, &mut rng)?,
                ]
            } else {
                vec![
                    AffineLayer::mesh_informed(&p6, &p5, 0.3, act, &mut rng)?,
                    AffineLayer::mesh_informed(&p5, &p4, 0.4, act, &mut rng)?,
                    AffineLayer::mesh_informed(&p4, &p3, 0.5, act, &mut rng)?,
                ]
            };
            let mut net = Network::new(layers)?;
            jitter_biases(&mut net, &mut rng);
            let x = random_matrix(4, 6, 2.0, &mut rng);
            cases.push(GradCheckCase {
                name: format!("{kind}/{name}"),
                max_relative_error: check_network(&net, &x, &mut rng)?,
            });
        }
    }
    let mut mixed = Network::new(vec![
        AffineLayer::mesh_informed(&p6, &p5, 0.3, Activation::Tanh, &mut rng)?,
        AffineLayer::dense(5, 4, Activation::LeakyRelu(0.1), &mut rng)?,
        AffineLayer::dense(4, 3, Activation::SoftClamp, &mut rng)?,
    ])?;
    jitter_biases(&mut mixed, &mut rng);
    let x = random_matrix(5, 6, 2.0, &mut rng);
    cases.push(GradCheckCase {
        name: "mixed/tanh-leaky_relu-soft_clamp".into(),
        max_relative_error: check_network(&mixed, &x, &mut rng)?,
    });
    Ok(cases)
}
