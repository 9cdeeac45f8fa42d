//! Ricci and Ricci-deTurck flow on compact manifolds with boundary.
//!
//! The boundary conditions fix the conformal class of the induced boundary
//! metric and let the mean curvature evolve by
//! `∂_t H = -(2(n-1))⁻¹ tr_{g^T}(∂_t g^T) H`. Metrics are restricted to two
//! symmetry-reduced backends (warped products `I × S^{n-1}` and conformally
//! flat annuli) so that exact reference solutions are available.

// Index loops follow the component formulas, and `!(x > 0.0)` also rejects NaN.
#![allow(
    clippy::needless_range_loop,
    clippy::neg_cmp_op_on_partial_ord,
    clippy::suspicious_arithmetic_impl,
    clippy::too_many_arguments
)]

pub mod complementarity;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod grid;
pub mod presets;
pub mod spectral;
pub mod tensor;
pub mod variations;

pub use error::{Error, Result};
