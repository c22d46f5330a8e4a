use rand::Rng as _;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::linalg::Matrix;
use crate::rng::Rng;

use super::Activation;

/// Binary `out x in` sparsity pattern; `true` marks a trainable weight.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                bits.push(f(i, j));
            }
        }
        Self { rows, cols, bits }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.cols + j]
    }

    pub fn row_count(&self, i: usize) -> usize {
        self.bits[i * self.cols..(i + 1) * self.cols]
            .iter()
            .filter(|b| **b)
            .count()
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// Zeroes the entries of `m` outside the pattern.
    pub fn apply(&self, m: &mut Matrix) {
        for (v, &keep) in m.as_mut_slice().iter_mut().zip(&self.bits) {
            if !keep {
                *v = 0.0;
            }
        }
    }

    /// Row-wise bit packing, least significant bit first, each row padded to
    /// whole bytes.
    pub fn to_packed_rows(&self) -> Vec<u8> {
        let stride = self.cols.div_ceil(8);
        let mut out = vec![0u8; self.rows * stride];
        for i in 0..self.rows {
            for j in 0..self.cols {
                if self.get(i, j) {
                    out[i * stride + j / 8] |= 1 << (j % 8);
                }
            }
        }
        out
    }

    pub fn from_packed_rows(rows: usize, cols: usize, bytes: &[u8]) -> Result<Self> {
        let stride = cols.div_ceil(8);
        if bytes.len() != rows * stride {
            return Err(Error::dims("packed mask", rows * stride, bytes.len()));
        }
        Ok(Self::from_fn(rows, cols, |i, j| {
            bytes[i * stride + j / 8] & (1 << (j % 8)) != 0
        }))
    }
}

/// `mask[i][j] = |x_i^out - x_j^in| <= support` (Euclidean).
pub fn build_support_mask(coords_out: &[Point], coords_in: &[Point], support: f64) -> Result<Mask> {
    if !(support >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "support must be nonnegative, got {support}"
        )));
    }
    let s2 = support * support;
    Ok(Mask::from_fn(coords_out.len(), coords_in.len(), |i, j| {
        let (p, q) = (coords_out[i], coords_in[j]);
        (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) <= s2
    }))
}

/// `x -> act(W x + b)`, optionally with a fixed sparsity mask on `W`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineLayer {
    /// `out x in`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub mask: Option<Mask>,
    pub activation: Activation,
}

impl AffineLayer {
    pub fn new(
        weights: Matrix,
        bias: Vec<f64>,
        mask: Option<Mask>,
        activation: Activation,
    ) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::dims("layer bias", weights.rows(), bias.len()));
        }
        if let Some(m) = &mask {
            if m.rows() != weights.rows() || m.cols() != weights.cols() {
                return Err(Error::dims(
                    "layer mask",
                    weights.rows() * weights.cols(),
                    m.rows() * m.cols(),
                ));
            }
        }
        let mut layer = Self {
            weights,
            bias,
            mask,
            activation,
        };
        layer.enforce_mask();
        Ok(layer)
    }

    /// He-style uniform initialization, `U(-sqrt(6/fan_in), sqrt(6/fan_in))`
    /// with the fan-in of each row counted over unmasked entries; zero bias.
    pub fn init(
        inputs: usize,
        outputs: usize,
        mask: Option<Mask>,
        activation: Activation,
        rng: &mut Rng,
    ) -> Result<Self> {
        let mut w = Matrix::zeros(outputs, inputs);
        for i in 0..outputs {
            let fan_in = mask.as_ref().map_or(inputs, |m| m.row_count(i)).max(1);
            let limit = (6.0 / fan_in as f64).sqrt();
            for v in w.row_mut(i) {
                *v = rng.random_range(-limit..limit);
            }
        }
        Self::new(w, vec![0.0; outputs], mask, activation)
    }

    pub fn dense(
        inputs: usize,
        outputs: usize,
        activation: Activation,
        rng: &mut Rng,
    ) -> Result<Self> {
        Self::init(inputs, outputs, None, activation, rng)
    }

    /// Layer between two point clouds keeping only weights whose endpoints
    /// lie within `support` of each other.
    pub fn mesh_informed(
        coords_in: &[Point],
        coords_out: &[Point],
        support: f64,
        activation: Activation,
        rng: &mut Rng,
    ) -> Result<Self> {
        let mask = build_support_mask(coords_out, coords_in, support)?;
        Self::init(
            coords_in.len(),
            coords_out.len(),
            Some(mask),
            activation,
            rng,
        )
    }

    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }

    pub fn enforce_mask(&mut self) {
        if let Some(m) = &self.mask {
            m.apply(&mut self.weights);
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.mask
            .as_ref()
            .map_or(self.weights.rows() * self.weights.cols(), Mask::count_ones)
            + self.bias.len()
    }
}
