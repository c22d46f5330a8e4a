//! Feed-forward networks with dense and mesh-informed (masked) affine
//! layers, exact backpropagation and Adam.

mod activation;
mod adam;
pub mod checkpoint;
pub mod gradcheck;
mod layer;
mod network;

pub use activation::Activation;
pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{load_network, read_network, save_network, write_network};
pub use layer::{build_support_mask, AffineLayer, Mask};
pub use network::{ForwardCache, Gradients, LayerGradient, Network};
