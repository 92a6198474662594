//! Field containers: velocity in physical or Fourier form, plus scalars.

use num_complex::Complex64;

use crate::error::SsnsError;
use crate::fft;
use crate::grid::Grid;
use crate::par;
use crate::Result;

/// Three real components sampled on the grid (velocity, residual, test
/// function...).  Row-major per component, axis 2 fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: Grid,
    pub components: [Vec<f64>; 3],
}

/// Fourier coefficients of a [`VectorField`] under the convention
/// `F(xi) = integral f exp(-2 pi i x.xi) dx`, bins in signed-`k` FFT order.
#[derive(Debug, Clone)]
pub struct SpectralField {
    pub grid: Grid,
    pub components: [Vec<Complex64>; 3],
}

/// One real scalar on the grid (pressure, magnitude, bump profile...).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarFieldP {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: Grid) -> Self {
        let len = grid.len();
        VectorField {
            grid,
            components: [vec![0.0; len], vec![0.0; len], vec![0.0; len]],
        }
    }

    /// Sample `f(x0,x1,x2) -> [f64;3]` at every grid point.
    pub fn from_fn<F>(grid: Grid, f: F) -> Self
    where
        F: Fn(f64, f64, f64) -> [f64; 3] + Sync,
    {
        let n = grid.n;
        let slabs = par::map_range_collect(n, |i0| {
            let x0 = grid.coord(i0);
            let mut slab = [
                Vec::with_capacity(n * n),
                Vec::with_capacity(n * n),
                Vec::with_capacity(n * n),
            ];
            for i1 in 0..n {
                let x1 = grid.coord(i1);
                for i2 in 0..n {
                    let v = f(x0, x1, grid.coord(i2));
                    slab[0].push(v[0]);
                    slab[1].push(v[1]);
                    slab[2].push(v[2]);
                }
            }
            slab
        });
        let mut components = [
            Vec::with_capacity(grid.len()),
            Vec::with_capacity(grid.len()),
            Vec::with_capacity(grid.len()),
        ];
        for slab in slabs {
            for (c, s) in components.iter_mut().zip(slab) {
                c.extend_from_slice(&s);
            }
        }
        VectorField { grid, components }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for comp in &mut out.components {
            par::for_each_chunk_mut(comp, crate::ops::CHUNK, |_, ch| {
                for v in ch {
                    *v *= c;
                }
            });
        }
        out
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, c: f64, other: &VectorField) -> Result<()> {
        self.grid.check_same(&other.grid, "VectorField::add_scaled")?;
        for (a, b) in self.components.iter_mut().zip(&other.components) {
            par::for_each_chunk_mut(a, crate::ops::CHUNK, |ci, ch| {
                let start = ci * crate::ops::CHUNK;
                for (j, v) in ch.iter_mut().enumerate() {
                    *v += c * b[start + j];
                }
            });
        }
        Ok(())
    }

    /// `a*f + b*g` as a new field.
    pub fn lin_comb(a: f64, f: &VectorField, b: f64, g: &VectorField) -> Result<Self> {
        let mut out = f.scaled(a);
        out.add_scaled(b, g)?;
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.components
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    /// Largest pointwise Euclidean magnitude `max |f(x)|`.
    pub fn max_magnitude(&self) -> f64 {
        let [u0, u1, u2] = &self.components;
        let mut m = 0.0f64;
        for i in 0..u0.len() {
            m = m.max(u0[i] * u0[i] + u1[i] * u1[i] + u2[i] * u2[i]);
        }
        m.sqrt()
    }

    pub fn check_finite(&self, op: &'static str) -> Result<()> {
        for c in &self.components {
            if !c.iter().all(|v| v.is_finite()) {
                return Err(SsnsError::NonFinite { op });
            }
        }
        Ok(())
    }
}

impl SpectralField {
    pub fn zeros(grid: Grid) -> Self {
        let len = grid.len();
        let z = Complex64::new(0.0, 0.0);
        SpectralField {
            grid,
            components: [vec![z; len], vec![z; len], vec![z; len]],
        }
    }
}

impl ScalarFieldP {
    pub fn zeros(grid: Grid) -> Self {
        let len = grid.len();
        ScalarFieldP {
            grid,
            values: vec![0.0; len],
        }
    }

    pub fn from_fn<F>(grid: Grid, f: F) -> Self
    where
        F: Fn(f64, f64, f64) -> f64 + Sync,
    {
        let n = grid.n;
        let slabs = par::map_range_collect(n, |i0| {
            let x0 = grid.coord(i0);
            let mut slab = Vec::with_capacity(n * n);
            for i1 in 0..n {
                let x1 = grid.coord(i1);
                for i2 in 0..n {
                    slab.push(f(x0, x1, grid.coord(i2)));
                }
            }
            slab
        });
        ScalarFieldP {
            grid,
            values: slabs.concat(),
        }
    }

    pub fn check_finite(&self, op: &'static str) -> Result<()> {
        if !self.values.iter().all(|v| v.is_finite()) {
            return Err(SsnsError::NonFinite { op });
        }
        Ok(())
    }
}

/// Physical to Fourier, all three components.
pub fn to_spectral(f: &VectorField) -> SpectralField {
    let comps = par::map_range_collect(3, |i| fft::forward(&f.grid, &f.components[i]));
    let mut it = comps.into_iter();
    SpectralField {
        grid: f.grid,
        components: [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()],
    }
}

/// Fourier back to physical samples.
pub fn from_spectral(fh: &SpectralField) -> VectorField {
    let comps = par::map_range_collect(3, |i| fft::inverse(&fh.grid, &fh.components[i]));
    let mut it = comps.into_iter();
    VectorField {
        grid: fh.grid,
        components: [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()],
    }
}
