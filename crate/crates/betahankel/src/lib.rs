//! Weighted Hankel transform calculus for the radial k-th models of
//! ∂ₜu − |x|^β Δu = ±|u|^b u, with a Picard/Duhamel mild-solution solver.
//!
//! Modules build bottom-up: [`model_core`] holds (n, β, k) and the derived
//! exponents, [`specfun`] the Bessel and Gamma functions, [`radial_numerics`]
//! grids and weighted norms, [`hankel`] the transform pair, [`kernels`] the
//! closed-form kernels and ♯-convolution, [`evolution`] the semigroup and the
//! nonlinear solver, [`estimates`] the space-time norms and audits, and
//! [`verify`] the packaged check suites.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // negated comparisons reject NaN

pub mod error;
pub mod estimates;
pub mod evolution;
pub mod hankel;
pub mod kernels;
pub mod model_core;
pub mod quadrature;
pub mod radial_numerics;
pub mod specfun;
pub mod verify;

pub use error::{Error, Result};
pub use model_core::{derive_params, ModelParams, NonlinearitySpec, Sign, Triplet, TripletKind};
pub use radial_numerics::{GridFunction, RadialGrid, Space};
