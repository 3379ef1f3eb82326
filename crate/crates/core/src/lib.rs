//! Numerical toolkit for the Zakharov system
//!
//! ```text
//! i ∂_t u + Δu = v u,      ∂_t² v − Δv = Δ|u|²
//! ```
//!
//! on a periodic box, written in first-order form with `V = v − i|∇|⁻¹∂_t v`.
//! The crate provides Fourier multipliers, adapted dyadic norms, Duhamel and
//! Picard machinery, a split-step solver, second-iterate ill-posedness
//! diagnostics and randomized checks of the multilinear estimates.

// `!(x > 0.0)` is used on purpose to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod evolution;
pub mod fft;
pub mod grid;
pub mod illposed;
pub mod io;
pub mod multipliers;
pub mod norms;
pub mod par;
pub mod random;
pub mod stats;
pub mod stress;

pub use grid::{make_grid, Field, Grid, GridBuilder, GridError, Repr, SpacetimeField, C64};
