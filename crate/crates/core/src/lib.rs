//! Riemannian geometry of symmetric positive-definite matrices and
//! unsupervised multi-domain adaptation by parallel transport.

pub mod adapt;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod io;
pub mod mean;
pub mod random;
pub mod spd;
pub mod transport;

pub use error::{Error, Result};
