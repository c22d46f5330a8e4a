use crate::error::{Error, Result};

use super::{Gradients, Network};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Decoupled weight decay coefficient; 0 disables it.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Adam moments for the parameters of one [`Network`].
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    first: Gradients,
    second: Gradients,
    step: u64,
}

impl AdamState {
    pub fn new(net: &Network, config: AdamConfig) -> Self {
        Self {
            config,
            first: Gradients::zeros_like(net),
            second: Gradients::zeros_like(net),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update of `net` in place. Weight decay, if set,
/// shrinks the parameters before the moment update; masks are re-applied
/// afterwards.
pub fn adam_step(state: &mut AdamState, net: &mut Network, grads: &Gradients) -> Result<()> {
    let n = net.layers().len();
    if grads.layers.len() != n || state.first.layers.len() != n {
        return Err(Error::dims("adam layer count", n, grads.layers.len()));
    }
    for (l, layer) in net.layers().iter().enumerate() {
        let g = &grads.layers[l];
        let m = &state.first.layers[l];
        if g.weights.rows() != layer.outputs()
            || g.weights.cols() != layer.inputs()
            || g.bias.len() != layer.outputs()
            || m.weights.rows() != layer.outputs()
            || m.weights.cols() != layer.inputs()
        {
            return Err(Error::dims(
                "adam parameter shape",
                layer.parameter_count(),
                g.weights.rows() * g.weights.cols() + g.bias.len(),
            ));
        }
    }

    let c = state.config;
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - c.beta1.powi(t);
    let bc2 = 1.0 - c.beta2.powi(t);
    let decay = 1.0 - c.lr * c.weight_decay;

    let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
        for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            if c.weight_decay != 0.0 {
                *p *= decay;
            }
            *m = c.beta1 * *m + (1.0 - c.beta1) * g;
            *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
            let mh = *m / bc1;
            let vh = *v / bc2;
            *p -= c.lr * mh / (vh.sqrt() + c.epsilon);
        }
    };

    for (l, layer) in net.layers_mut().iter_mut().enumerate() {
        let g = &grads.layers[l];
        let m = &mut state.first.layers[l];
        let v = &mut state.second.layers[l];
        update(
            layer.weights.as_mut_slice(),
            g.weights.as_slice(),
            m.weights.as_mut_slice(),
            v.weights.as_mut_slice(),
        );
        update(&mut layer.bias, &g.bias, &mut m.bias, &mut v.bias);
        layer.enforce_mask();
    }
    Ok(())
}
