//! Linear Rayleigh-Taylor stability engine for two stratified viscous layers.
//!
//! Each horizontal Fourier mode reduces to a constrained Hermitian eigenproblem on
//! a two-layer Chebyshev discretization. The modified energy
//! `F(w, s) = E(w) + s * visc(w)` is minimized mode by mode to give `alpha(s)`,
//! and the largest growth rate solves `s^2 + alpha(s) = 0`.

pub mod cheb;
pub mod cli;
pub mod config;
pub mod discretize;
pub mod error;
pub mod growth;
mod linalg;
pub mod model;
pub mod spectrum;
pub mod stokes;
pub mod thresholds;

pub use error::{Error, Result};
pub use model::{validate_parameters, Layer, ModeProfile, RTParameters, WaveVector};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

/// Engine version written into result provenance.
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");
