//! Exact solution operator for the linear part of the rescaled flow:
//! uniform damping, radial drift, and diffusion, i.e.
//! `d/dtau V = -V - (y . grad) V + 2 lap V`.
//!
//! The operator factors exactly: smooth with the heat kernel for the
//! remapped time `t0(tau) = 1 - e^{-2 tau}`, pull the argument in by
//! `lambda = e^{-tau}`, and damp by `e^{-tau}`.  Only the dilation step
//! needs interpolation; two methods are provided, a trigonometric
//! resampling that is exact for the grid's own interpolant and a periodic
//! cubic spline fallback (O(h^4)).
//!
//! `estimate_c0` measures the smoothing constant of the heat kernel over a
//! documented family of test fields; the resulting supremum feeds the
//! contraction bookkeeping in `scalar_lemmas`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::SsnsError;
use crate::field::VectorField;
use crate::fft;
use crate::grid::Grid;
use crate::ops;
use crate::par;
use crate::synth;
use crate::Result;

/// Interpolation backend for the dilation step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DilationMethod {
    /// Evaluate the field's trigonometric interpolant at the dilated points.
    /// Spectrally accurate; O(n^4) per axis.
    #[default]
    FourierResample,
    /// Periodic cubic spline along each axis; fourth order, O(n^3) per axis.
    CubicSpline,
}

/// One application of the linear flow: the time, the grid it acts on, and
/// the interpolation used for the dilation step.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemigroupParams {
    pub tau: f64,
    pub grid: Grid,
    #[serde(default)]
    pub interpolation: DilationMethod,
}

impl SemigroupParams {
    pub fn new(tau: f64, grid: Grid) -> Result<Self> {
        if !tau.is_finite() || tau < 0.0 {
            return Err(SsnsError::domain(
                "SemigroupParams::new",
                format!("tau must be finite and >= 0, got {tau}"),
            ));
        }
        Ok(Self { tau, grid, interpolation: DilationMethod::default() })
    }

    pub fn apply(&self, v0: &VectorField) -> Result<VectorField> {
        self.grid.check_same(&v0.grid, "SemigroupParams::apply")?;
        semigroup_apply_with(v0, self.tau, self.interpolation)
    }
}

/// Remapped heat time `t0(tau) = 1 - e^{-2 tau}`: strictly increasing,
/// concave, bounded by `min(2 tau, 1)`.
pub fn t0(tau: f64) -> Result<f64> {
    if !tau.is_finite() || tau < 0.0 {
        return Err(SsnsError::domain("t0", format!("tau must be finite and >= 0, got {tau}")));
    }
    // -(-2 tau).exp_m1() is 1 - e^{-2 tau} without cancellation near 0.
    Ok(-(-2.0 * tau).exp_m1())
}

/// Heat smoothing: Fourier multiplier `e^{-4 pi^2 |xi|^2 t}` per component.
/// The Nyquist mode is damped like every other (true) frequency rather than
/// being zeroed, so `t = 0` is the exact identity.
pub fn heat_apply(f: &VectorField, t: f64) -> Result<VectorField> {
    if !t.is_finite() || t < 0.0 {
        return Err(SsnsError::domain("heat_apply", format!("t must be finite and >= 0, got {t}")));
    }
    f.check_finite("heat_apply")?;
    if t == 0.0 {
        return Ok(f.clone());
    }
    let mut fh = crate::field::to_spectral(f);
    let freqs = ops::full_freqs(&f.grid);
    let c = -4.0 * std::f64::consts::PI * std::f64::consts::PI * t;
    for comp in &mut fh.components {
        ops::apply_multiplier_freqs(&f.grid, comp, &freqs, |x0, x1, x2| {
            Complex64::new((c * (x0 * x0 + x1 * x1 + x2 * x2)).exp(), 0.0)
        });
    }
    Ok(crate::field::from_spectral(&fh))
}

/// Pull the argument in: `result(y) = f(lambda y)` with `lambda in (0, 1]`,
/// which is all the linear flow ever needs.  For resampling with arbitrary
/// positive `lambda` (periodic wrap) see [`resample`].
pub fn dilate(f: &VectorField, lambda: f64) -> Result<VectorField> {
    dilate_with(f, lambda, DilationMethod::default())
}

pub fn dilate_with(f: &VectorField, lambda: f64, method: DilationMethod) -> Result<VectorField> {
    if !lambda.is_finite() || lambda <= 0.0 || lambda > 1.0 {
        return Err(SsnsError::domain(
            "dilate",
            format!("lambda must lie in (0, 1], got {lambda}"),
        ));
    }
    resample_with(f, lambda, method)
}

/// `result(y) = f(lambda y)` for any `lambda > 0`, reading `f` as its
/// periodic extension (arguments outside the box wrap around).
pub fn resample(f: &VectorField, lambda: f64) -> Result<VectorField> {
    resample_with(f, lambda, DilationMethod::default())
}

pub fn resample_with(f: &VectorField, lambda: f64, method: DilationMethod) -> Result<VectorField> {
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(SsnsError::domain(
            "resample",
            format!("lambda must be finite and positive, got {lambda}"),
        ));
    }
    f.check_finite("resample")?;
    if lambda == 1.0 {
        return Ok(f.clone());
    }
    match method {
        DilationMethod::FourierResample => Ok(resample_fourier(f, lambda)),
        DilationMethod::CubicSpline => Ok(resample_spline(f, lambda)),
    }
}

/// Per-axis evaluation matrix `W[j, k]` sending raw per-line DFT
/// coefficients to samples of the trigonometric interpolant at the dilated
/// points `lambda x_j` (taken mod L).  The Nyquist coefficient is read as a
/// pure cosine, the symmetric interpolant for real data.  At `lambda = 1`
/// this is exactly the inverse DFT.
fn fourier_axis_matrix(grid: &Grid, lambda: f64) -> Vec<Complex64> {
    let n = grid.n;
    let l = grid.box_side;
    let inv_n = 1.0 / n as f64;
    let mut w = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        // Offset of the target point from the box corner -L/2, where the
        // raw DFT indexing starts.
        let target = lambda * grid.coord(j) + 0.5 * l;
        let row = &mut w[j * n..(j + 1) * n];
        for (kidx, wjk) in row.iter_mut().enumerate() {
            *wjk = if grid.is_nyquist(kidx) {
                Complex64::new(
                    (std::f64::consts::PI * n as f64 * target / l).cos() * inv_n,
                    0.0,
                )
            } else {
                let ang = 2.0 * std::f64::consts::PI * grid.signed_k(kidx) as f64 * target / l;
                Complex64::new(ang.cos() * inv_n, ang.sin() * inv_n)
            };
        }
    }
    w
}

fn resample_fourier(f: &VectorField, lambda: f64) -> VectorField {
    let grid = f.grid;
    let n = grid.n;
    let w = fourier_axis_matrix(&grid, lambda);
    let fwd = fft::plan(n, true);
    let scratch_len = fwd.get_inplace_scratch_len();
    let comps = par::map_range_collect(3, |ci| {
        let mut buf: Vec<Complex64> =
            f.components[ci].iter().map(|&x| Complex64::new(x, 0.0)).collect();
        fft::for_each_axis_line(
            n,
            &mut buf,
            || (vec![Complex64::new(0.0, 0.0); scratch_len], vec![Complex64::new(0.0, 0.0); n]),
            |(scr, coeffs), line| {
                fwd.process_with_scratch(line, scr);
                coeffs.copy_from_slice(line);
                for (j, out) in line.iter_mut().enumerate() {
                    let row = &w[j * n..(j + 1) * n];
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (wjk, c) in row.iter().zip(coeffs.iter()) {
                        acc += wjk * c;
                    }
                    *out = acc;
                }
            },
        );
        // Real data in, real data out; the imaginary residue is FFT noise.
        buf.iter().map(|c| c.re).collect::<Vec<f64>>()
    });
    let mut it = comps.into_iter();
    VectorField { grid, components: [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()] }
}

/// Tridiagonal solve for the constant stencil (1, diag, 1) with modified
/// first/last diagonal entries, classic Thomas elimination.
fn thomas_141(diag: f64, diag0: f64, diag_last: f64, r: &[f64], x: &mut [f64], gam: &mut [f64]) {
    let n = r.len();
    let mut bet = diag0;
    x[0] = r[0] / bet;
    for j in 1..n {
        gam[j] = 1.0 / bet;
        let d = if j == n - 1 { diag_last } else { diag };
        bet = d - gam[j];
        x[j] = (r[j] - x[j - 1]) / bet;
    }
    for j in (0..n - 1).rev() {
        x[j] -= gam[j + 1] * x[j + 1];
    }
}

/// Cyclic (periodic) version of the (1, 4, 1) system via the rank-one
/// Sherman-Morrison correction of the two corner entries.
fn cyclic_141(r: &[f64], x: &mut [f64], z: &mut [f64], u: &mut [f64], gam: &mut [f64]) {
    let n = r.len();
    debug_assert!(n >= 3);
    let b = 4.0;
    let gamma = -b;
    // Corners: row 0 couples to x[n-1], row n-1 couples to x[0], both with
    // weight 1.  Modified diagonals per the standard splitting.
    thomas_141(b, b - gamma, b - 1.0 / gamma, r, x, gam);
    u.fill(0.0);
    u[0] = gamma;
    u[n - 1] = 1.0;
    thomas_141(b, b - gamma, b - 1.0 / gamma, u, z, gam);
    let fact = (x[0] + x[n - 1] / gamma) / (1.0 + z[0] + z[n - 1] / gamma);
    for (xi, zi) in x.iter_mut().zip(z.iter()) {
        *xi -= fact * zi;
    }
}

struct SplineScratch {
    rhs: Vec<f64>,
    m: Vec<f64>,
    z: Vec<f64>,
    u: Vec<f64>,
    gam: Vec<f64>,
    vals: Vec<f64>,
}

impl SplineScratch {
    fn new(n: usize) -> Self {
        Self {
            rhs: vec![0.0; n],
            m: vec![0.0; n],
            z: vec![0.0; n],
            u: vec![0.0; n],
            gam: vec![0.0; n],
            vals: vec![0.0; n],
        }
    }
}

/// Precompute, per output sample j, the source interval index and the local
/// coordinate of the dilated point `lambda x_j` wrapped into the box.
fn spline_targets(grid: &Grid, lambda: f64) -> Vec<(usize, f64)> {
    let n = grid.n;
    (0..n)
        .map(|j| {
            let u = ((lambda * grid.coord(j) + 0.5 * grid.box_side) / grid.h())
                .rem_euclid(n as f64);
            let fl = u.floor();
            let i = (fl as isize).rem_euclid(n as isize) as usize;
            (i, u - fl)
        })
        .collect()
}

fn resample_line_spline(line: &mut [f64], targets: &[(usize, f64)], s: &mut SplineScratch) {
    let n = line.len();
    s.vals.copy_from_slice(line);
    for j in 0..n {
        let jm = if j == 0 { n - 1 } else { j - 1 };
        let jp = if j + 1 == n { 0 } else { j + 1 };
        s.rhs[j] = s.vals[jp] - 2.0 * s.vals[j] + s.vals[jm];
    }
    // m[j] = h^2 M_j / 6 in the textbook normalization; the grid spacing
    // cancels between the moment system and the evaluation formula.
    let (m, z, u, gam) = (&mut s.m, &mut s.z, &mut s.u, &mut s.gam);
    cyclic_141(&s.rhs, m, z, u, gam);
    for (out, &(i, t)) in line.iter_mut().zip(targets) {
        let ip = if i + 1 == n { 0 } else { i + 1 };
        let omt = 1.0 - t;
        *out = s.vals[i] * omt
            + s.vals[ip] * t
            + (omt * omt * omt - omt) * m[i]
            + (t * t * t - t) * m[ip];
    }
}

fn resample_spline(f: &VectorField, lambda: f64) -> VectorField {
    let grid = f.grid;
    let n = grid.n;
    let targets = spline_targets(&grid, lambda);
    let comps = par::map_range_collect(3, |ci| {
        let mut buf = f.components[ci].clone();
        fft::for_each_axis_line(n, &mut buf, || SplineScratch::new(n), |s, line| {
            resample_line_spline(line, &targets, s);
        });
        buf
    });
    let mut it = comps.into_iter();
    VectorField { grid, components: [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()] }
}

/// The full linear flow at time `tau`:
/// `(e^{-tau} . heat(t0(tau)) f)(e^{-tau} y)`.
pub fn semigroup_apply(v0: &VectorField, tau: f64) -> Result<VectorField> {
    semigroup_apply_with(v0, tau, DilationMethod::default())
}

pub fn semigroup_apply_with(
    v0: &VectorField,
    tau: f64,
    method: DilationMethod,
) -> Result<VectorField> {
    let t = t0(tau)?;
    v0.check_finite("semigroup_apply")?;
    if tau == 0.0 {
        return Ok(v0.clone());
    }
    let heated = heat_apply(v0, t)?;
    let lambda = (-tau).exp();
    let dilated = dilate_with(&heated, lambda, method)?;
    Ok(dilated.scaled(lambda))
}

/// Test family for the smoothing-constant estimate: Gaussians over a range
/// of widths, off-center bumps, band-limited noise, single harmonics, and a
/// localized vortex, probed on a logarithmic time grid.  Spatial scales are
/// in box units and suit `box_side` roughly in [8, 32].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct C0Family {
    pub gaussian_widths: Vec<f64>,
    /// Bump centers as fractions of the box side.
    pub shift_fractions: Vec<[f64; 3]>,
    pub shift_width: f64,
    /// Band limits as fractions of the Nyquist index.
    pub noise_bands: Vec<f64>,
    pub noise_seeds: Vec<u64>,
    pub harmonics: Vec<i64>,
    pub include_vortex: bool,
    pub t_points: Vec<f64>,
}

impl Default for C0Family {
    fn default() -> Self {
        Self {
            gaussian_widths: vec![0.5, 1.0, 2.0, 4.0, 8.0],
            shift_fractions: vec![
                [0.125, 0.0, 0.0],
                [-0.15, 0.12, 0.0],
                [0.1, -0.11, 0.13],
            ],
            shift_width: 1.5,
            noise_bands: vec![0.2, 0.45],
            noise_seeds: vec![11, 12],
            harmonics: vec![1, 2],
            include_vortex: true,
            t_points: vec![0.0, 1e-3, 3e-3, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0],
        }
    }
}

impl C0Family {
    /// A strictly larger family: refined widths and times, extra noise
    /// draws, one more harmonic.  Used to check that the estimate is stable
    /// under enrichment.
    pub fn doubled(&self) -> Self {
        let mut widths = self.gaussian_widths.clone();
        for pair in self.gaussian_widths.windows(2) {
            widths.push((pair[0] * pair[1]).sqrt());
        }
        widths.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut t_points = self.t_points.clone();
        for pair in self.t_points.windows(2) {
            if pair[0] > 0.0 {
                t_points.push((pair[0] * pair[1]).sqrt());
            }
        }
        t_points.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut seeds = self.noise_seeds.clone();
        seeds.extend(self.noise_seeds.iter().map(|s| s + 1000));
        let mut harmonics = self.harmonics.clone();
        if let Some(&m) = self.harmonics.iter().max() {
            harmonics.push(m + 1);
        }
        Self {
            gaussian_widths: widths,
            shift_fractions: self.shift_fractions.clone(),
            shift_width: self.shift_width,
            noise_bands: self.noise_bands.clone(),
            noise_seeds: seeds,
            harmonics,
            include_vortex: self.include_vortex,
            t_points,
        }
    }

    /// Materialize the family members on a grid, with stable id strings.
    pub fn members(&self, grid: Grid) -> Result<Vec<(String, VectorField)>> {
        let mut out = Vec::new();
        for &a in &self.gaussian_widths {
            out.push((format!("gauss_a{a}"), synth::gaussian_vector(grid, a, 1.0, 0)));
        }
        let l = grid.box_side;
        for (i, fr) in self.shift_fractions.iter().enumerate() {
            let c = [fr[0] * l, fr[1] * l, fr[2] * l];
            let bump = synth::gaussian_scalar(grid, self.shift_width, 1.0, c);
            let mut f = VectorField::zeros(grid);
            f.components[1] = bump.values;
            out.push((format!("shift_{i}"), f));
        }
        for &band in &self.noise_bands {
            for &seed in &self.noise_seeds {
                out.push((
                    format!("noise_b{band}_s{seed}"),
                    synth::random_bandlimited(grid, seed, band, false, 1.0)?,
                ));
            }
        }
        for &k in &self.harmonics {
            out.push((format!("harm_k{k}"), synth::single_harmonic(grid, [k, 0, 0], 1, 1.0, 0.3)));
        }
        if self.include_vortex {
            out.push(("vortex".into(), synth::gaussian_vortex(grid, 2.0, 1.0)));
        }
        Ok(out)
    }
}

/// One measured ratio in the smoothing-constant scan.
#[derive(Clone, Debug, Serialize)]
pub struct C0Row {
    pub p_tilde: f64,
    pub q_tilde: f64,
    pub gradient: bool,
    pub t: f64,
    pub member: String,
    pub ratio: f64,
}

/// The empirical constant together with the full scan behind it.
#[derive(Clone, Debug)]
pub struct C0Estimate {
    pub value: f64,
    pub rows: Vec<C0Row>,
}

impl C0Estimate {
    /// CSV with one row per measurement and a trailing supremum row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("p_tilde,q_tilde,gradient,t,family_member_id,ratio\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{:.16e},{:.16e},{},{:.16e},{},{:.16e}\n",
                r.p_tilde, r.q_tilde, r.gradient, r.t, r.member, r.ratio
            ));
        }
        if let Some(r0) = self.rows.first() {
            s.push_str(&format!(
                "{:.16e},{:.16e},{},,supremum,{:.16e}\n",
                r0.p_tilde, r0.q_tilde, r0.gradient, self.value
            ));
        }
        s
    }
}

/// Empirical supremum of
/// `|| grad^g e^{t lap} w ||_q * t^{(3/p - 3/q)/2 + g/2} / || w ||_p`
/// over the family and time grid (`g` is 0 or 1).  A lower estimate of the
/// true constant: it scans a finite family, it does not prove a bound.
pub fn estimate_c0(grid: Grid, p_tilde: f64, q_tilde: f64, with_gradient: bool) -> Result<f64> {
    Ok(estimate_c0_with(grid, p_tilde, q_tilde, with_gradient, &C0Family::default())?.value)
}

pub fn estimate_c0_with(
    grid: Grid,
    p_tilde: f64,
    q_tilde: f64,
    with_gradient: bool,
    family: &C0Family,
) -> Result<C0Estimate> {
    if !(p_tilde > 1.0) || !(q_tilde >= p_tilde) || !q_tilde.is_finite() {
        return Err(SsnsError::domain(
            "estimate_c0",
            format!("need 1 < p_tilde <= q_tilde < inf, got p={p_tilde}, q={q_tilde}"),
        ));
    }
    let beta = 0.5 * (3.0 / p_tilde - 3.0 / q_tilde) + if with_gradient { 0.5 } else { 0.0 };
    let mut rows = Vec::new();
    let mut sup = 0.0f64;
    for (member, w) in family.members(grid)? {
        let base = ops::lp_norm(&w, p_tilde)?;
        if base == 0.0 {
            continue;
        }
        for &t in &family.t_points {
            if t == 0.0 && beta > 0.0 {
                // The ratio vanishes at t = 0 whenever the time weight is
                // nontrivial; nothing to measure.
                continue;
            }
            let smoothed = heat_apply(&w, t)?;
            let num = if with_gradient {
                ops::lp_norm_gradient(&smoothed, q_tilde)?
            } else {
                ops::lp_norm(&smoothed, q_tilde)?
            };
            let weight = if beta == 0.0 { 1.0 } else { t.powf(beta) };
            let ratio = num * weight / base;
            sup = sup.max(ratio);
            rows.push(C0Row {
                p_tilde,
                q_tilde,
                gradient: with_gradient,
                t,
                member: member.clone(),
                ratio,
            });
        }
    }
    Ok(C0Estimate { value: sup, rows })
}
