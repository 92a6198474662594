//! Spectral differential operators, Leray projection, and L^p norms.
//!
//! All derivatives act as Fourier multipliers `2 pi i xi` with the Nyquist
//! frequency zeroed per axis; the Laplacian uses the squares of the same
//! per-axis frequencies so `divergence(gradient(s)) == laplacian(s)` holds
//! bin by bin, and the Leray projector is built from them too, making
//! `div . P = 0` and `P . grad = 0` exact up to FFT roundoff.
//!
//! Norm reductions sum fixed 4096-element chunks in index order and fold the
//! partial sums sequentially, so parallel and serial builds agree bitwise.

use num_complex::Complex64;

use crate::error::SsnsError;
use crate::field::{from_spectral, to_spectral, ScalarFieldP, SpectralField, VectorField};
use crate::grid::Grid;
use crate::par;
use crate::Result;

/// Fixed reduction chunk; also reused as the parallel grain for maps.
pub const CHUNK: usize = 4096;

/// Sum `term(i)` for `i in 0..len` with a deterministic reduction order.
pub fn deterministic_sum<F>(len: usize, term: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let nchunks = len.div_ceil(CHUNK);
    let partials = par::map_range_collect(nchunks, |ci| {
        let start = ci * CHUNK;
        let end = (start + CHUNK).min(len);
        let mut s = 0.0;
        for i in start..end {
            s += term(i);
        }
        s
    });
    partials.iter().sum()
}

fn check_p(p: f64, op: &'static str) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(SsnsError::domain(op, format!("p must be finite and >= 1, got {p}")));
    }
    Ok(())
}

#[inline]
fn pow_half(m2: f64, p: f64) -> f64 {
    // m2 = |f|^2; returns |f|^p with fast paths for the common exponents.
    if p == 2.0 {
        m2
    } else if p == 4.0 {
        m2 * m2
    } else if p == 1.0 {
        m2.sqrt()
    } else {
        m2.powf(0.5 * p)
    }
}

/// `( sum_points |f|^p h^3 )^(1/p)` with `|f|` the Euclidean magnitude.
pub fn lp_norm(f: &VectorField, p: f64) -> Result<f64> {
    check_p(p, "lp_norm")?;
    f.check_finite("lp_norm")?;
    let [u0, u1, u2] = &f.components;
    let s = deterministic_sum(u0.len(), |i| {
        pow_half(u0[i] * u0[i] + u1[i] * u1[i] + u2[i] * u2[i], p)
    });
    let h3 = f.grid.h().powi(3);
    Ok((s * h3).powf(1.0 / p))
}

pub fn lp_norm_scalar(s: &ScalarFieldP, p: f64) -> Result<f64> {
    check_p(p, "lp_norm_scalar")?;
    s.check_finite("lp_norm_scalar")?;
    let v = &s.values;
    let acc = deterministic_sum(v.len(), |i| pow_half(v[i] * v[i], p));
    let h3 = s.grid.h().powi(3);
    Ok((acc * h3).powf(1.0 / p))
}

pub fn l2_norm(f: &VectorField) -> f64 {
    lp_norm(f, 2.0).expect("p=2 is always valid")
}

/// L^2 inner product `sum f.g h^3`.
pub fn l2_inner(f: &VectorField, g: &VectorField) -> Result<f64> {
    f.grid.check_same(&g.grid, "l2_inner")?;
    let s = deterministic_sum(f.components[0].len(), |i| {
        f.components[0][i] * g.components[0][i]
            + f.components[1][i] * g.components[1][i]
            + f.components[2][i] * g.components[2][i]
    });
    Ok(s * f.grid.h().powi(3))
}

/// Frobenius L^p norm of the velocity gradient,
/// `( sum (sum_ij |d_j f_i|^2)^(p/2) h^3 )^(1/p)`.
pub fn lp_norm_gradient(f: &VectorField, p: f64) -> Result<f64> {
    check_p(p, "lp_norm_gradient")?;
    let g = gradient(f)?;
    let len = f.components[0].len();
    let s = deterministic_sum(len, |i| {
        let mut m2 = 0.0;
        for gj in &g {
            for c in &gj.components {
                m2 += c[i] * c[i];
            }
        }
        pow_half(m2, p)
    });
    let h3 = f.grid.h().powi(3);
    Ok((s * h3).powf(1.0 / p))
}

/// Per-axis frequency used inside derivatives: `k/L`, but 0 at Nyquist.
pub(crate) fn deriv_freqs(grid: &Grid) -> Vec<f64> {
    (0..grid.n)
        .map(|i| if grid.is_nyquist(i) { 0.0 } else { grid.freq(i) })
        .collect()
}

/// Per-axis frequency with the Nyquist mode kept (as `-n/2 / L`). Used by
/// multipliers that damp rather than differentiate, e.g. the heat kernel.
pub(crate) fn full_freqs(grid: &Grid) -> Vec<f64> {
    (0..grid.n).map(|i| grid.freq(i)).collect()
}

/// Multiply every bin of `spec` by `m(xi0, xi1, xi2)` with the per-axis
/// frequency table supplied by the caller.
pub(crate) fn apply_multiplier_freqs<M>(grid: &Grid, spec: &mut [Complex64], freqs: &[f64], m: M)
where
    M: Fn(f64, f64, f64) -> Complex64 + Sync,
{
    let n = grid.n;
    debug_assert_eq!(freqs.len(), n);
    par::for_each_chunk_mut(spec, n * n, |i0, slab| {
        let xi0 = freqs[i0];
        for i1 in 0..n {
            let xi1 = freqs[i1];
            let row = &mut slab[i1 * n..(i1 + 1) * n];
            for (i2, v) in row.iter_mut().enumerate() {
                *v *= m(xi0, xi1, freqs[i2]);
            }
        }
    });
}

/// Multiply every bin of `spec` by `m(xi0, xi1, xi2)` built from the
/// derivative frequencies (Nyquist already zeroed).
pub(crate) fn apply_multiplier<M>(grid: &Grid, spec: &mut [Complex64], m: M)
where
    M: Fn(f64, f64, f64) -> Complex64 + Sync,
{
    let df = deriv_freqs(grid);
    apply_multiplier_freqs(grid, spec, &df, m);
}

/// Derivative along one axis as a spectral multiplier `2 pi i xi_axis`.
fn derivative_spectral(grid: &Grid, spec: &mut [Complex64], axis: usize) {
    let tau = 2.0 * std::f64::consts::PI;
    apply_multiplier(grid, spec, |x0, x1, x2| {
        let xi = [x0, x1, x2][axis];
        Complex64::new(0.0, tau * xi)
    });
}

/// Full velocity gradient; `result[j].components[i]` is `d_j f_i`.
pub fn gradient(f: &VectorField) -> Result<[VectorField; 3]> {
    f.check_finite("gradient")?;
    let fh = to_spectral(f);
    let mut out = Vec::with_capacity(3);
    for axis in 0..3 {
        let mut d = fh.clone();
        for c in &mut d.components {
            derivative_spectral(&f.grid, c, axis);
        }
        out.push(from_spectral(&d));
    }
    let mut it = out.into_iter();
    Ok([it.next().unwrap(), it.next().unwrap(), it.next().unwrap()])
}

pub fn gradient_scalar(s: &ScalarFieldP) -> Result<VectorField> {
    s.check_finite("gradient_scalar")?;
    let sh = crate::fft::forward(&s.grid, &s.values);
    let comps = par::map_range_collect(3, |axis| {
        let mut d = sh.clone();
        derivative_spectral(&s.grid, &mut d, axis);
        crate::fft::inverse(&s.grid, &d)
    });
    let mut it = comps.into_iter();
    Ok(VectorField {
        grid: s.grid,
        components: [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()],
    })
}

pub fn divergence(f: &VectorField) -> Result<ScalarFieldP> {
    f.check_finite("divergence")?;
    let fh = to_spectral(f);
    let mut acc = vec![Complex64::new(0.0, 0.0); f.grid.len()];
    for axis in 0..3 {
        let mut d = fh.components[axis].clone();
        derivative_spectral(&f.grid, &mut d, axis);
        for (a, b) in acc.iter_mut().zip(&d) {
            *a += b;
        }
    }
    Ok(ScalarFieldP {
        grid: f.grid,
        values: crate::fft::inverse(&f.grid, &acc),
    })
}

fn laplacian_multiplier(grid: &Grid, spec: &mut [Complex64]) {
    let c = -4.0 * std::f64::consts::PI * std::f64::consts::PI;
    apply_multiplier(grid, spec, |x0, x1, x2| {
        Complex64::new(c * (x0 * x0 + x1 * x1 + x2 * x2), 0.0)
    });
}

pub fn laplacian(f: &VectorField) -> Result<VectorField> {
    f.check_finite("laplacian")?;
    let mut fh = to_spectral(f);
    for c in &mut fh.components {
        laplacian_multiplier(&f.grid, c);
    }
    Ok(from_spectral(&fh))
}

pub fn laplacian_scalar(s: &ScalarFieldP) -> Result<ScalarFieldP> {
    s.check_finite("laplacian_scalar")?;
    let mut sh = crate::fft::forward(&s.grid, &s.values);
    laplacian_multiplier(&s.grid, &mut sh);
    Ok(ScalarFieldP {
        grid: s.grid,
        values: crate::fft::inverse(&s.grid, &sh),
    })
}

/// Leray projection in place on the spectral side:
/// `P_ij = delta_ij - xi_i xi_j / |xi|^2`, identity on the mean mode.
pub fn leray_spectral(fh: &mut SpectralField) {
    let n = fh.grid.n;
    let df = deriv_freqs(&fh.grid);
    // Work slab by slab over i0; the three components are mixed per bin,
    // so we read/write them via raw chunk views of equal layout.
    let len = fh.grid.len();
    let slabs = len / (n * n);
    let updates = par::map_range_collect(slabs, |i0| {
        let xi0 = df[i0];
        let base = i0 * n * n;
        let mut out = [
            Vec::with_capacity(n * n),
            Vec::with_capacity(n * n),
            Vec::with_capacity(n * n),
        ];
        for i1 in 0..n {
            let xi1 = df[i1];
            for i2 in 0..n {
                let xi2 = df[i2];
                let q = xi0 * xi0 + xi1 * xi1 + xi2 * xi2;
                let idx = base + i1 * n + i2;
                let v = [
                    fh.components[0][idx],
                    fh.components[1][idx],
                    fh.components[2][idx],
                ];
                if q == 0.0 {
                    for (o, vi) in out.iter_mut().zip(v) {
                        o.push(vi);
                    }
                } else {
                    let dot = (v[0] * xi0 + v[1] * xi1 + v[2] * xi2) / q;
                    out[0].push(v[0] - dot * xi0);
                    out[1].push(v[1] - dot * xi1);
                    out[2].push(v[2] - dot * xi2);
                }
            }
        }
        out
    });
    for (i0, upd) in updates.into_iter().enumerate() {
        let base = i0 * n * n;
        for (c, u) in fh.components.iter_mut().zip(upd) {
            c[base..base + n * n].copy_from_slice(&u);
        }
    }
}

/// Project out the gradient part: result is divergence-free, gradients map
/// to their mean, and divergence-free fields are fixed points.
pub fn leray_project(f: &VectorField) -> Result<VectorField> {
    f.check_finite("leray_project")?;
    let mut fh = to_spectral(f);
    leray_spectral(&mut fh);
    Ok(from_spectral(&fh))
}

/// `|| div f ||_2 / || f ||_2`, the relative solenoidality defect.
pub fn div_rel(f: &VectorField) -> Result<f64> {
    let nf = l2_norm(f);
    if nf == 0.0 {
        return Ok(0.0);
    }
    let d = divergence(f)?;
    Ok(lp_norm_scalar(&d, 2.0)? / nf)
}

/// Zero every bin outside the retained band (no-op when fraction >= 1).
pub fn dealias_spectral(grid: &Grid, spec: &mut [Complex64]) {
    if grid.dealias_fraction >= 1.0 {
        return;
    }
    let n = grid.n;
    let cutoff = grid.dealias_cutoff();
    let keep: Vec<bool> = (0..n).map(|i| grid.signed_k(i).abs() <= cutoff).collect();
    par::for_each_chunk_mut(spec, n * n, |i0, slab| {
        if !keep[i0] {
            slab.fill(Complex64::new(0.0, 0.0));
            return;
        }
        for i1 in 0..n {
            let row = &mut slab[i1 * n..(i1 + 1) * n];
            if !keep[i1] {
                row.fill(Complex64::new(0.0, 0.0));
                continue;
            }
            for (i2, v) in row.iter_mut().enumerate() {
                if !keep[i2] {
                    *v = Complex64::new(0.0, 0.0);
                }
            }
        }
    });
}

/// Band-limit a physical field to the dealias band.
pub fn dealias_field(f: &VectorField) -> VectorField {
    if f.grid.dealias_fraction >= 1.0 {
        return f.clone();
    }
    let mut fh = to_spectral(f);
    for c in &mut fh.components {
        dealias_spectral(&f.grid, c);
    }
    from_spectral(&fh)
}

/// `w_i = sum_j d_j (U_j V_i)` with the classical dealiasing treatment:
/// both factors and the product are truncated to the retained band.
pub fn tensor_divergence(u: &VectorField, v: &VectorField) -> Result<VectorField> {
    u.grid.check_same(&v.grid, "tensor_divergence")?;
    u.check_finite("tensor_divergence")?;
    v.check_finite("tensor_divergence")?;
    let grid = u.grid;
    let ut = dealias_field(u);
    let vt = dealias_field(v);
    let out_comps = par::map_range_collect(3, |i| {
        let mut acc = vec![Complex64::new(0.0, 0.0); grid.len()];
        for j in 0..3 {
            let prod: Vec<f64> = ut.components[j]
                .iter()
                .zip(&vt.components[i])
                .map(|(a, b)| a * b)
                .collect();
            let mut ph = crate::fft::forward(&grid, &prod);
            dealias_spectral(&grid, &mut ph);
            derivative_spectral(&grid, &mut ph, j);
            for (a, b) in acc.iter_mut().zip(&ph) {
                *a += b;
            }
        }
        crate::fft::inverse(&grid, &acc)
    });
    let mut it = out_comps.into_iter();
    Ok(VectorField {
        grid,
        components: [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()],
    })
}

/// Convective derivative `(U . grad) V` evaluated pseudo-spectrally
/// (band-limited factors, pointwise product, product re-truncated).
pub fn convective_derivative(u: &VectorField, v: &VectorField) -> Result<VectorField> {
    u.grid.check_same(&v.grid, "convective_derivative")?;
    let grid = u.grid;
    let ut = dealias_field(u);
    let gv = gradient(&dealias_field(v))?;
    let out_comps = par::map_range_collect(3, |i| {
        let prod: Vec<f64> = (0..grid.len())
            .map(|idx| {
                ut.components[0][idx] * gv[0].components[i][idx]
                    + ut.components[1][idx] * gv[1].components[i][idx]
                    + ut.components[2][idx] * gv[2].components[i][idx]
            })
            .collect();
        let mut ph = crate::fft::forward(&grid, &prod);
        dealias_spectral(&grid, &mut ph);
        crate::fft::inverse(&grid, &ph)
    });
    let mut it = out_comps.into_iter();
    Ok(VectorField {
        grid,
        components: [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::VectorField;
    use crate::grid::Grid;

    fn harmonic_field(g: Grid) -> VectorField {
        // (sin(2 pi x1 / L), 0, 0): divergence-free single harmonic.
        let l = g.box_side;
        VectorField::from_fn(g, |_, x1, _| {
            [(2.0 * std::f64::consts::PI * x1 / l).sin(), 0.0, 0.0]
        })
    }

    #[test]
    fn divergence_of_perpendicular_harmonic_is_zero() {
        let g = Grid::new(16, 2.0).unwrap();
        let f = harmonic_field(g);
        let d = divergence(&f).unwrap();
        let err = d.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err < 1e-12, "divergence leaked {err}");
    }

    #[test]
    fn laplacian_eigenfunction() {
        let g = Grid::new(16, 3.0).unwrap();
        let f = harmonic_field(g);
        let lf = laplacian(&f).unwrap();
        let lam = -(2.0 * std::f64::consts::PI / g.box_side).powi(2);
        let err = lf.components[0]
            .iter()
            .zip(&f.components[0])
            .map(|(a, b)| (a - lam * b).abs())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-12, "eigenvalue defect {err}");
    }

    #[test]
    fn div_grad_equals_laplacian_binwise() {
        use rand::{Rng, SeedableRng};
        let g = Grid::new(12, 2.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let s = ScalarFieldP {
            grid: g,
            values: (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        };
        let gs = gradient_scalar(&s).unwrap();
        let dgs = divergence(&gs).unwrap();
        let ls = laplacian_scalar(&s).unwrap();
        let scale = ls.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = dgs
            .values
            .iter()
            .zip(&ls.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-10 * scale.max(1.0), "div grad != lap: {err}");
    }

    #[test]
    fn leray_annihilates_gradients_and_fixes_solenoidal() {
        use rand::{Rng, SeedableRng};
        let g = Grid::new(16, 2.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let s = ScalarFieldP {
            grid: g,
            values: (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        };
        let grad = gradient_scalar(&s).unwrap();
        let pg = leray_project(&grad).unwrap();
        assert!(l2_norm(&pg) < 1e-10 * l2_norm(&grad).max(1.0));

        let f = harmonic_field(g);
        let pf = leray_project(&f).unwrap();
        let err = pf.components[0]
            .iter()
            .zip(&f.components[0])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-12, "solenoidal field moved by {err}");
    }

    #[test]
    fn lp_norm_rejects_bad_exponent() {
        let g = Grid::new(8, 1.0).unwrap();
        let f = VectorField::zeros(g);
        assert!(lp_norm(&f, 0.5).is_err());
        assert!(lp_norm(&f, f64::INFINITY).is_err());
        assert_eq!(lp_norm(&f, 3.0).unwrap(), 0.0);
    }
}
