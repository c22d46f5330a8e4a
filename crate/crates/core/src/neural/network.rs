use crate::error::{Error, Result};
use crate::linalg::{gemm, Matrix, Trans};

use super::AffineLayer;

/// Feed-forward chain of affine layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    layers: Vec<AffineLayer>,
}

/// Values kept by [`Network::forward`] for the backward pass.
#[derive(Clone, Debug, Default)]
pub struct ForwardCache {
    inputs: Vec<Matrix>,
    pre_activations: Vec<Matrix>,
}

impl ForwardCache {
    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn batch_size(&self) -> usize {
        self.inputs.first().map_or(0, Matrix::rows)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGradient {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Parameter gradients, one entry per layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradient {
                    weights: Matrix::zeros(l.outputs(), l.inputs()),
                    bias: vec![0.0; l.outputs()],
                })
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a
                .weights
                .as_mut_slice()
                .iter_mut()
                .zip(b.weights.as_slice())
            {
                *x += y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += y;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.as_slice().iter().chain(&l.bias))
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Network {
    pub fn new(layers: Vec<AffineLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument(
                "network needs at least one layer".into(),
            ));
        }
        for w in layers.windows(2) {
            if w[0].outputs() != w[1].inputs() {
                return Err(Error::dims(
                    "network layer chain",
                    w[0].outputs(),
                    w[1].inputs(),
                ));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[AffineLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [AffineLayer] {
        &mut self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(AffineLayer::parameter_count).sum()
    }

    /// Output for a `B x in` batch without keeping a cache.
    pub fn predict(&self, batch: &Matrix) -> Result<Matrix> {
        self.check_input(batch)?;
        let mut x = batch.clone();
        for layer in &self.layers {
            let mut z = affine(layer, &x)?;
            for v in z.as_mut_slice() {
                *v = layer.activation.apply(*v);
            }
            x = z;
        }
        Ok(x)
    }

    /// Output for a `B x in` batch plus the cache needed by
    /// [`Network::backward`].
    pub fn forward(&self, batch: &Matrix) -> Result<(Matrix, ForwardCache)> {
        self.check_input(batch)?;
        let mut cache = ForwardCache {
            inputs: Vec::with_capacity(self.layers.len()),
            pre_activations: Vec::with_capacity(self.layers.len()),
        };
        let mut x = batch.clone();
        for layer in &self.layers {
            let z = affine(layer, &x)?;
            let mut a = z.clone();
            for v in a.as_mut_slice() {
                *v = layer.activation.apply(*v);
            }
            cache.inputs.push(x);
            cache.pre_activations.push(z);
            x = a;
        }
        Ok((x, cache))
    }

    /// Reverse-mode pass: given `dL/d(output)` for the batch of `cache`,
    /// returns the parameter gradients and `dL/d(input)`. Gradients of masked
    /// weights are zero.
    pub fn backward(&self, cache: &ForwardCache, upstream: &Matrix) -> Result<(Gradients, Matrix)> {
        let (g, dx) = self.backward_impl(cache, upstream, true)?;
        Ok((g, dx.expect("input gradient requested")))
    }

    /// [`Network::backward`] without the input gradient, which saves the
    /// widest product when the input layer is large.
    pub fn backward_params(&self, cache: &ForwardCache, upstream: &Matrix) -> Result<Gradients> {
        Ok(self.backward_impl(cache, upstream, false)?.0)
    }

    fn backward_impl(
        &self,
        cache: &ForwardCache,
        upstream: &Matrix,
        input_gradient: bool,
    ) -> Result<(Gradients, Option<Matrix>)> {
        if cache.is_empty() {
            return Err(Error::MissingCache(
                "backward called without a forward cache",
            ));
        }
        if cache.inputs.len() != self.layers.len() {
            return Err(Error::MissingCache(
                "cache was produced by a different network",
            ));
        }
        for (layer, (x, z)) in self
            .layers
            .iter()
            .zip(cache.inputs.iter().zip(&cache.pre_activations))
        {
            if x.cols() != layer.inputs() || z.cols() != layer.outputs() {
                return Err(Error::MissingCache("cache shapes do not match the network"));
            }
        }
        if upstream.rows() != cache.batch_size() || upstream.cols() != self.output_width() {
            return Err(Error::dims(
                "backward upstream",
                cache.batch_size() * self.output_width(),
                upstream.rows() * upstream.cols(),
            ));
        }

        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = upstream.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let z = &cache.pre_activations[l];
            let x = &cache.inputs[l];
            for (d, &zv) in delta.as_mut_slice().iter_mut().zip(z.as_slice()) {
                *d *= layer.activation.derivative(zv);
            }
            let mut gw = Matrix::zeros(layer.outputs(), layer.inputs());
            gemm(1.0, &delta, Trans::Yes, x, Trans::No, 0.0, &mut gw)?;
            if let Some(m) = &layer.mask {
                m.apply(&mut gw);
            }
            let mut gb = vec![0.0; layer.outputs()];
            for r in 0..delta.rows() {
                for (b, d) in gb.iter_mut().zip(delta.row(r)) {
                    *b += d;
                }
            }
            grads.push(LayerGradient {
                weights: gw,
                bias: gb,
            });
            if l == 0 && !input_gradient {
                break;
            }
            let mut dx = Matrix::zeros(delta.rows(), layer.inputs());
            gemm(
                1.0,
                &delta,
                Trans::No,
                &layer.weights,
                Trans::No,
                0.0,
                &mut dx,
            )?;
            delta = dx;
        }
        grads.reverse();
        Ok((Gradients { layers: grads }, input_gradient.then_some(delta)))
    }

    fn check_input(&self, batch: &Matrix) -> Result<()> {
        if batch.cols() != self.input_width() {
            return Err(Error::dims(
                "network input width",
                self.input_width(),
                batch.cols(),
            ));
        }
        Ok(())
    }
}

fn affine(layer: &AffineLayer, x: &Matrix) -> Result<Matrix> {
    let mut z = Matrix::zeros(x.rows(), layer.outputs());
    gemm(1.0, x, Trans::No, &layer.weights, Trans::Yes, 0.0, &mut z)?;
    for r in 0..z.rows() {
        for (v, b) in z.row_mut(r).iter_mut().zip(&layer.bias) {
            *v += b;
        }
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::Activation;

    fn identity_layer(n: usize) -> AffineLayer {
        AffineLayer::new(
            Matrix::identity(n),
            vec![0.0; n],
            None,
            Activation::Identity,
        )
        .unwrap()
    }

    #[test]
    fn identity_network_passes_input_through() {
        let net = Network::new(vec![identity_layer(3)]).unwrap();
        let x = Matrix::from_rows(&[vec![1.0, -2.0, 3.5], vec![0.0, 0.1, 0.2]]).unwrap();
        let (y, _) = net.forward(&x).unwrap();
        assert_eq!(y, x);
        assert_eq!(net.predict(&x).unwrap(), x);
    }

    #[test]
    fn width_mismatch_rejected() {
        let net = Network::new(vec![identity_layer(3)]).unwrap();
        assert!(net.forward(&Matrix::zeros(1, 2)).is_err());
        assert!(Network::new(vec![identity_layer(3), identity_layer(2)]).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let net = Network::new(vec![identity_layer(2), identity_layer(2)]).unwrap();
        let x = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let (_, cache) = net.forward(&x).unwrap();
        let (g, dx) = net.backward(&cache, &Matrix::zeros(1, 2)).unwrap();
        assert_eq!(g.max_abs(), 0.0);
        assert!(dx.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn linear_layer_weight_gradient_is_outer_product() {
        let w = Matrix::from_rows(&[vec![0.5, -1.0, 2.0], vec![1.5, 0.0, 0.25]]).unwrap();
        let layer = AffineLayer::new(w, vec![0.1, 0.2], None, Activation::Identity).unwrap();
        let net = Network::new(vec![layer]).unwrap();
        let x = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![-1.0, 0.5, 0.0]]).unwrap();
        let up = Matrix::from_rows(&[vec![1.0, -1.0], vec![2.0, 0.5]]).unwrap();
        let (_, cache) = net.forward(&x).unwrap();
        let (g, _) = net.backward(&cache, &up).unwrap();
        let expect = up.transpose().matmul(&x).unwrap();
        assert!(g.layers[0].weights.max_abs_diff(&expect) < 1e-15);
        assert_eq!(g.layers[0].bias, vec![3.0, -0.5]);
    }

    #[test]
    fn missing_cache_is_an_error() {
        let net = Network::new(vec![identity_layer(2)]).unwrap();
        let r = net.backward(&ForwardCache::default(), &Matrix::zeros(1, 2));
        assert!(matches!(r, Err(Error::MissingCache(_))));
    }
}
