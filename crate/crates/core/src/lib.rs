//! Singular random walks on the torus: lattice constructions, Fourier-side
//! bounds on Wasserstein distance to Haar measure, exact transport oracles and
//! ergodic-sum experiments.

pub mod ergodic;
pub mod error;
pub mod lattice;
pub mod spectral;
pub mod torus;
pub mod wasserstein;

pub use error::{Error, Result};
