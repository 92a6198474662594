//! Uniform periodic grid on the cube `[-L/2, L/2)^3`.
//!
//! The cube stands in for all of space: profiles of interest decay fast
//! enough that the periodic images are negligible at the box sizes used in
//! the tests.  Points are `x_i = -L/2 + i*h` with `h = L/n`, indices in
//! row-major `(i0, i1, i2)` order, axis 2 fastest.  The Fourier dual grid
//! carries signed integer wavenumbers `k` in `[-n/2, n/2)` (the Nyquist
//! index `n/2` maps to `-n/2`) with physical frequency `xi = k / L`, so a
//! plane wave is `exp(2*pi*i x . xi)`.

use crate::error::SsnsError;
use serde::{Deserialize, Serialize};

/// Fraction of the spectrum kept by [`Grid::dealias_mask`] by default
/// (the classical two-thirds rule for quadratic products).
pub const DEFAULT_DEALIAS_FRACTION: f64 = 2.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    /// Points per axis; must be even so the Nyquist mode is unambiguous.
    pub n: usize,
    /// Side length `L` of the periodic cube.
    pub box_side: f64,
    /// Fraction of modes kept when dealiasing products; `>= 1` keeps all.
    pub dealias_fraction: f64,
}

impl Grid {
    pub fn new(n: usize, box_side: f64) -> Result<Self, SsnsError> {
        Self::with_dealias(n, box_side, DEFAULT_DEALIAS_FRACTION)
    }

    pub fn with_dealias(n: usize, box_side: f64, dealias_fraction: f64) -> Result<Self, SsnsError> {
        if n == 0 || !n.is_multiple_of(2) {
            return Err(SsnsError::domain(
                "Grid::new",
                format!("n must be positive and even, got {n}"),
            ));
        }
        if !(box_side > 0.0) || !box_side.is_finite() {
            return Err(SsnsError::domain(
                "Grid::new",
                format!("box_side must be positive and finite, got {box_side}"),
            ));
        }
        if !(dealias_fraction > 0.0) || !dealias_fraction.is_finite() {
            return Err(SsnsError::domain(
                "Grid::new",
                format!("dealias_fraction must be positive, got {dealias_fraction}"),
            ));
        }
        Ok(Grid {
            n,
            box_side,
            dealias_fraction,
        })
    }

    /// Grid spacing `h = L/n`.
    #[inline]
    pub fn h(&self) -> f64 {
        self.box_side / self.n as f64
    }

    /// Total number of points `n^3`.
    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of index `i` along any axis: `-L/2 + i*h`.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -0.5 * self.box_side + i as f64 * self.h()
    }

    /// Signed integer wavenumber for FFT bin `i`: `0..n/2` then `-n/2..0`.
    /// The Nyquist bin `i = n/2` is reported as `-n/2`.
    #[inline]
    pub fn signed_k(&self, i: usize) -> i64 {
        debug_assert!(i < self.n);
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Physical frequency `xi = k/L` for FFT bin `i`.
    #[inline]
    pub fn freq(&self, i: usize) -> f64 {
        self.signed_k(i) as f64 / self.box_side
    }

    /// True if bin `i` is the Nyquist bin `n/2`.
    #[inline]
    pub fn is_nyquist(&self, i: usize) -> bool {
        i == self.n / 2
    }

    /// Largest |k| kept by the dealias rule: `floor(fraction * n/2)`.
    /// With `dealias_fraction >= 1` every mode is kept.
    #[inline]
    pub fn dealias_cutoff(&self) -> i64 {
        if self.dealias_fraction >= 1.0 {
            (self.n / 2) as i64
        } else {
            (self.dealias_fraction * (self.n / 2) as f64).floor() as i64
        }
    }

    /// True if the mode `(k0,k1,k2)` at bins `(i0,i1,i2)` survives dealiasing.
    #[inline]
    pub fn mode_kept(&self, i0: usize, i1: usize, i2: usize) -> bool {
        let c = self.dealias_cutoff();
        self.signed_k(i0).abs() <= c && self.signed_k(i1).abs() <= c && self.signed_k(i2).abs() <= c
    }

    /// Row-major flat index of `(i0, i1, i2)`.
    #[inline]
    pub fn idx(&self, i0: usize, i1: usize, i2: usize) -> usize {
        (i0 * self.n + i1) * self.n + i2
    }

    /// All axis coordinates `x_0..x_{n-1}` as a vector.
    pub fn coords(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.coord(i)).collect()
    }

    /// All signed wavenumbers in FFT bin order.
    pub fn signed_ks(&self) -> Vec<i64> {
        (0..self.n).map(|i| self.signed_k(i)).collect()
    }

    /// Check another field's grid matches ours (same `n` and `L`).
    pub fn check_same(&self, other: &Grid, op: &'static str) -> Result<(), SsnsError> {
        if self.n != other.n || self.box_side != other.box_side {
            return Err(SsnsError::GridMismatch {
                op,
                msg: format!(
                    "expected n={}, L={}, got n={}, L={}",
                    self.n, self.box_side, other.n, other.box_side
                ),
            });
        }
        Ok(())
    }
}
