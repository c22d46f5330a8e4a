use crate::error::{Error, Result};

/// Slope of the leaky ReLU inside [`Activation::SoftClamp`].
const SOFT_CLAMP_SLOPE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    /// `x` for `x >= 0`, `alpha x` otherwise.
    LeakyRelu(f64),
    Tanh,
    /// `rho(0.5 - rho(0.5 - x))` with `rho` the 0.1-leaky ReLU: identity on
    /// `[0, 0.5]`, slope 0.1 outside.
    SoftClamp,
    Identity,
}

#[inline]
fn leaky(alpha: f64, x: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        alpha * x
    }
}

#[inline]
fn leaky_grad(alpha: f64, x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        alpha
    }
}

impl Activation {
    pub fn leaky_relu(alpha: f64) -> Result<Self> {
        if !(alpha.abs() < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "leaky ReLU slope must satisfy |alpha| < 1, got {alpha}"
            )));
        }
        Ok(Activation::LeakyRelu(alpha))
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            Activation::LeakyRelu(a) => leaky(a, x),
            Activation::Tanh => x.tanh(),
            Activation::SoftClamp => {
                let a = SOFT_CLAMP_SLOPE;
                leaky(a, 0.5 - leaky(a, 0.5 - x))
            }
            Activation::Identity => x,
        }
    }

    /// Derivative at pre-activation `x`.
    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Activation::LeakyRelu(a) => leaky_grad(a, x),
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::SoftClamp => {
                let a = SOFT_CLAMP_SLOPE;
                let inner = 0.5 - x;
                leaky_grad(a, 0.5 - leaky(a, inner)) * leaky_grad(a, inner)
            }
            Activation::Identity => 1.0,
        }
    }

    pub(crate) fn tag(&self) -> (u8, f64) {
        match *self {
            Activation::Identity => (0, 0.0),
            Activation::LeakyRelu(a) => (1, a),
            Activation::Tanh => (2, 0.0),
            Activation::SoftClamp => (3, 0.0),
        }
    }

    pub(crate) fn from_tag(tag: u8, param: f64) -> Option<Self> {
        match tag {
            0 => Some(Activation::Identity),
            1 => Activation::leaky_relu(param).ok(),
            2 => Some(Activation::Tanh),
            3 => Some(Activation::SoftClamp),
            _ => None,
        }
    }
}
