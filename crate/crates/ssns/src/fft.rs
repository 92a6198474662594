//! 3D FFT with continuum normalization.
//!
//! Forward output approximates `F(xi) = integral f(x) exp(-2 pi i x.xi) dx`
//! on the signed-wavenumber grid `xi = k/L`: the raw DFT is scaled by `h^3`
//! and by the centering phase `(-1)^(k0+k1+k2)` that accounts for the box
//! starting at `-L/2` instead of `0`.  The inverse undoes both, dividing by
//! `L^3`, so `inverse(forward(f)) == f` to roundoff and Plancherel holds in
//! the form `sum |f_j|^2 h^3 == sum |F_k|^2 / L^3`.
//!
//! The 3D transform runs as three contiguous-axis passes, each followed by
//! an axis rotation `(i,j,k) -> (k,i,j)` so the next axis becomes unit
//! stride; three rotations restore the original layout.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::grid::Grid;
use crate::par;

pub(crate) fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    #[allow(clippy::type_complexity)]
    static CACHE: OnceLock<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap();
    map.entry((n, forward))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if forward {
                planner.plan_fft_forward(n)
            } else {
                planner.plan_fft_inverse(n)
            }
        })
        .clone()
}

/// `dst[(c,a,b)] = src[(a,b,c)]` for an `n^3` row-major array.
pub(crate) fn rotate_axes<T: Copy + Send + Sync>(n: usize, src: &[T], dst: &mut [T]) {
    par::for_each_chunk_mut(dst, n * n, |c, slab| {
        for a in 0..n {
            let row = &src[a * n * n + c..];
            for b in 0..n {
                slab[a * n + b] = row[b * n];
            }
        }
    });
}

/// Run `process` over every contiguous line of each of the three axes in
/// turn (line length `n`), restoring the original axis order afterwards.
/// `process` gets per-worker scratch from `make_scratch`.
pub(crate) fn for_each_axis_line<T, S, I, F>(n: usize, data: &mut [T], make_scratch: I, process: F)
where
    T: Copy + Send + Sync + Default,
    S: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, &mut [T]) + Sync + Send,
{
    let mut tmp = vec![T::default(); data.len()];
    for _ in 0..3 {
        par::for_each_chunk_mut_with(data, n, &make_scratch, |s, _i, line| process(s, line));
        rotate_axes(n, data, &mut tmp);
        data.copy_from_slice(&tmp);
    }
}

/// Unscaled in-place 3D DFT (forward `e^{-2 pi i jk/n}` or inverse `e^{+...}`).
pub fn fft3_raw(n: usize, data: &mut [Complex64], forward: bool) {
    assert_eq!(data.len(), n * n * n, "fft3_raw: bad buffer length");
    let p = plan(n, forward);
    let scratch = p.get_inplace_scratch_len();
    for_each_axis_line(
        n,
        data,
        || vec![Complex64::new(0.0, 0.0); scratch],
        |scr, line| p.process_with_scratch(line, scr),
    );
}

/// Multiply bin `(i0,i1,i2)` by `scale * (-1)^(i0+i1+i2)`.
fn scale_and_center(n: usize, data: &mut [Complex64], scale: f64) {
    par::for_each_chunk_mut(data, n * n, |i0, slab| {
        for i1 in 0..n {
            let base = if (i0 + i1) % 2 == 0 { scale } else { -scale };
            let row = &mut slab[i1 * n..(i1 + 1) * n];
            for (i2, v) in row.iter_mut().enumerate() {
                *v *= if i2 % 2 == 0 { base } else { -base };
            }
        }
    });
}

/// Forward transform of real samples; output in FFT bin order.
pub fn forward(grid: &Grid, data: &[f64]) -> Vec<Complex64> {
    assert_eq!(data.len(), grid.len(), "forward: bad buffer length");
    let mut c: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft3_raw(grid.n, &mut c, true);
    let h = grid.h();
    scale_and_center(grid.n, &mut c, h * h * h);
    c
}

/// Inverse transform back to real samples (imaginary parts are dropped;
/// they are roundoff for Hermitian-symmetric input).
pub fn inverse(grid: &Grid, coeffs: &[Complex64]) -> Vec<f64> {
    assert_eq!(coeffs.len(), grid.len(), "inverse: bad buffer length");
    let mut c = coeffs.to_vec();
    let l3 = grid.box_side.powi(3);
    scale_and_center(grid.n, &mut c, 1.0 / l3);
    fft3_raw(grid.n, &mut c, false);
    c.iter().map(|v| v.re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_random() {
        use rand::{Rng, SeedableRng};
        let g = Grid::new(16, 3.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let data: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let back = inverse(&g, &forward(&g, &data));
        let err = data
            .iter()
            .zip(&back)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-12, "roundtrip error {err}");
    }

    #[test]
    fn constant_concentrates_at_zero_mode() {
        let g = Grid::new(8, 2.0).unwrap();
        let data = vec![1.5; g.len()];
        let c = forward(&g, &data);
        // zero bin carries the integral over the box, 1.5 * L^3
        assert!((c[0].re - 1.5 * 8.0).abs() < 1e-12);
        assert!(c[0].im.abs() < 1e-12);
        let rest: f64 = c.iter().skip(1).map(|v| v.norm()).sum();
        assert!(rest < 1e-10, "leakage {rest}");
    }

    #[test]
    fn harmonic_lands_on_signed_bins() {
        // cos(2 pi 3 x0 / L) has weight L^3/2 at k0 = +-3.
        let g = Grid::new(16, 5.0).unwrap();
        let mut data = vec![0.0; g.len()];
        for i0 in 0..g.n {
            let v = (2.0 * std::f64::consts::PI * 3.0 * g.coord(i0) / g.box_side).cos();
            for i1 in 0..g.n {
                for i2 in 0..g.n {
                    data[g.idx(i0, i1, i2)] = v;
                }
            }
        }
        let c = forward(&g, &data);
        let l3 = g.box_side.powi(3);
        let plus = c[g.idx(3, 0, 0)];
        let minus = c[g.idx(16 - 3, 0, 0)];
        assert!((plus.re - 0.5 * l3).abs() < 1e-9 * l3);
        assert!((minus.re - 0.5 * l3).abs() < 1e-9 * l3);
        assert!(plus.im.abs() < 1e-9 * l3);
        let energy: f64 = c.iter().map(|v| v.norm_sqr()).sum();
        let peak = plus.norm_sqr() + minus.norm_sqr();
        assert!((energy - peak) / energy < 1e-12);
    }

    #[test]
    fn plancherel_identity() {
        use rand::{Rng, SeedableRng};
        let g = Grid::new(12, 2.5).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let data: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c = forward(&g, &data);
        let h3 = g.h().powi(3);
        let phys: f64 = data.iter().map(|v| v * v * h3).sum();
        let spec: f64 = c.iter().map(|v| v.norm_sqr() / g.box_side.powi(3)).sum();
        assert!((phys - spec).abs() < 1e-12 * phys.max(1.0));
    }
}
