//! Latent-dimension laboratory for deep-learning reduced order models.
//!
//! Each model problem has a full-order solver in [`solvers`]. The
//! Karhunen-Loeve and POD spectra from [`random_fields`] and [`reduction`]
//! are the linear baselines that the autoencoders trained in [`dlrom`] are
//! measured against.

pub mod dlrom;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod neural;
pub mod random_fields;
pub mod reduction;
pub mod rng;
pub mod solvers;
pub mod study;

pub use error::{Error, Result};
