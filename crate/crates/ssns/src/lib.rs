//! Spectral toolkit for the dynamically rescaled Navier-Stokes equations.
//!
//! The crate works in self-similar variables: physical fields `u(x, t)` that
//! may focus toward a reference time `T` are mapped onto profile fields
//! `U(y, tau)` on a slow time scale `tau = log(T / (T - t)) / 2`.  In these
//! variables the linear part of the equation generates an explicit semigroup
//! (heat flow composed with an exponential dilation), the nonlinearity enters
//! through a Leray-projected bilinear form, and mild solutions are built by
//! Picard iteration on the Duhamel integral.  Alongside the field machinery
//! the crate carries the scalar bookkeeping (decay exponents, iteration
//! majorants, smallness thresholds) needed to certify that a computed profile
//! stays below a non-blow-up envelope.
//!
//! Everything runs on a periodic cube sampled on an `n^3` grid with Fourier
//! collocation; coefficients follow the unitary-frequency convention where a
//! plane wave `exp(2 pi i x . xi)` sits at frequency `xi = k / L`.
//!
//! The `parallel` feature (on by default) runs grid loops on a rayon pool;
//! without it the same code paths execute sequentially.  Reductions are
//! chunked identically in both modes so results are bitwise reproducible.

// Validation guards are written `!(x > 0.0)` so that NaN fails them; the
// positive form `x <= 0.0` would wave NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Stencil kernels index several arrays with one loop variable; zipping the
// arrays would hide which axis is being walked.
#![allow(clippy::needless_range_loop)]

pub mod error;
mod par;

pub mod field;
pub mod fft;
pub mod grid;
pub mod io;
pub mod ops;
pub mod synth;

pub mod quad;
pub mod scalar_lemmas;
pub mod semigroup;

pub mod nonlinear;
pub mod picard;
pub mod rescaling;
pub mod solver;

pub mod report;

pub use error::SsnsError;
pub use field::{ScalarFieldP, SpectralField, VectorField};
pub use grid::Grid;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, SsnsError>;
