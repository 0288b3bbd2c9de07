//! Random multiplicative cascades on the dyadic tree: sampling, exact
//! Fourier coefficients, spectral constants and Hölder exponents, and Monte
//! Carlo checks against finite-depth oracles.

// Range checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cascade;
pub mod entropy;
pub mod error;
mod ext_real;
pub mod fourier;
pub mod optimize;
pub mod quadrature;
pub mod rng;
pub mod selftest;
pub mod spectral;
pub mod stats;
pub mod weights;

pub use cascade::{BranchingWalkSummary, CascadeRealization, NodePath};
pub use error::{Error, Result};
pub use fourier::{ComplexCoefficient, DyadicSample};
pub use rng::RngStream;
pub use spectral::{ExponentResult, SpectralConstants};
pub use stats::{CltReport, McSummary};
pub use weights::{Atom, LawKind, WeightLaw};
