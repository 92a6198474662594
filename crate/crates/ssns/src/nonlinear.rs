//! Quadratic structure of the rescaled flow: the projected advection form,
//! its pressure realization, the time-integrated response along
//! trajectories (with a matching scalar envelope), and strong/weak steady
//! profile residuals.
//!
//! Coordinate-weighted terms (the drift `(y . grad)`) are only meaningful
//! away from the periodic faces, so residuals are restricted to the
//! centered cube of half-side `L/4` and every report carries that radius.

use num_complex::Complex64;

use crate::error::SsnsError;
use crate::field::{ScalarFieldP, VectorField};
use crate::fft;
use crate::grid::Grid;
use crate::ops;
use crate::par;
use crate::quad::{self, QuadratureRule};
use crate::scalar_lemmas::kernel_regularizer;
use crate::semigroup::{self, DilationMethod};
use crate::Result;

/// A sampled trajectory `s -> V(s)`: strictly increasing times starting at
/// 0, one field per time, linear interpolation in between.
#[derive(Clone, Debug)]
pub struct TimeSlices {
    taus: Vec<f64>,
    fields: Vec<VectorField>,
}

impl TimeSlices {
    pub fn new(taus: Vec<f64>, fields: Vec<VectorField>) -> Result<Self> {
        if taus.is_empty() || taus.len() != fields.len() {
            return Err(SsnsError::precondition(
                "TimeSlices::new",
                format!("{} times vs {} fields", taus.len(), fields.len()),
            ));
        }
        if taus[0] != 0.0 {
            return Err(SsnsError::precondition(
                "TimeSlices::new",
                format!("trajectory must start at 0, got {}", taus[0]),
            ));
        }
        for w in taus.windows(2) {
            if !(w[1] > w[0]) {
                return Err(SsnsError::precondition(
                    "TimeSlices::new",
                    format!("times must be strictly increasing, got {} then {}", w[0], w[1]),
                ));
            }
        }
        let grid = fields[0].grid;
        for f in &fields {
            grid.check_same(&f.grid, "TimeSlices::new")?;
            f.check_finite("TimeSlices::new")?;
        }
        Ok(Self { taus, fields })
    }

    pub fn grid(&self) -> Grid {
        self.fields[0].grid
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn fields(&self) -> &[VectorField] {
        &self.fields
    }

    pub fn tau_max(&self) -> f64 {
        *self.taus.last().unwrap()
    }

    /// Linear interpolation between the bracketing slices.
    pub fn value_at(&self, s: f64) -> Result<VectorField> {
        if !s.is_finite() || s < 0.0 || s > self.tau_max() * (1.0 + 1e-12) + 1e-300 {
            return Err(SsnsError::domain(
                "TimeSlices::value_at",
                format!("s = {s} outside [0, {}]", self.tau_max()),
            ));
        }
        let i = self.taus.partition_point(|&t| t < s);
        if i < self.taus.len() && self.taus[i] == s {
            return Ok(self.fields[i].clone());
        }
        if i == 0 {
            return Ok(self.fields[0].clone());
        }
        if i == self.taus.len() {
            return Ok(self.fields.last().unwrap().clone());
        }
        let (t0, t1) = (self.taus[i - 1], self.taus[i]);
        let w = (s - t0) / (t1 - t0);
        VectorField::lin_comb(1.0 - w, &self.fields[i - 1], w, &self.fields[i])
    }

    /// Per-slice norms, e.g. for scalar envelopes of the trajectory.
    pub fn lp_norms(&self, p: f64) -> Result<Vec<f64>> {
        self.fields.iter().map(|f| ops::lp_norm(f, p)).collect()
    }

    /// Every slice multiplied by a constant; times unchanged.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            taus: self.taus.clone(),
            fields: self.fields.iter().map(|f| f.scaled(c)).collect(),
        }
    }
}

/// Projected advection form `2 P div(U (x) V)`: bilinear and
/// divergence-free by construction (products dealiased).
pub fn bilinear_f(u: &VectorField, v: &VectorField) -> Result<VectorField> {
    let td = ops::tensor_divergence(u, v)?;
    Ok(ops::leray_project(&td)?.scaled(2.0))
}

/// Pressure induced by the velocity: the second-order Riesz image of the
/// momentum flux, `P_hat = -(xi_j xi_k / |xi|^2) (U_j U_k)_hat`, mean zero.
/// Equivalently the solution of `-lap P = div div (U (x) U)`.
pub fn pressure_from_velocity(u: &VectorField) -> Result<ScalarFieldP> {
    u.check_finite("pressure_from_velocity")?;
    let grid = u.grid;
    let ut = ops::dealias_field(u);
    let pairs: [(usize, usize, f64); 6] = [
        (0, 0, 1.0),
        (1, 1, 1.0),
        (2, 2, 1.0),
        (0, 1, 2.0),
        (0, 2, 2.0),
        (1, 2, 2.0),
    ];
    let prods: Vec<Vec<Complex64>> = pairs
        .iter()
        .map(|&(j, k, _)| {
            let prod: Vec<f64> = ut.components[j]
                .iter()
                .zip(&ut.components[k])
                .map(|(a, b)| a * b)
                .collect();
            let mut ph = fft::forward(&grid, &prod);
            ops::dealias_spectral(&grid, &mut ph);
            ph
        })
        .collect();
    let n = grid.n;
    let df = ops::deriv_freqs(&grid);
    let slabs = par::map_range_collect(n, |i0| {
        let xi0 = df[i0];
        let base = i0 * n * n;
        let mut out = Vec::with_capacity(n * n);
        for i1 in 0..n {
            let xi1 = df[i1];
            for i2 in 0..n {
                let xi2 = df[i2];
                let q = xi0 * xi0 + xi1 * xi1 + xi2 * xi2;
                if q == 0.0 {
                    out.push(Complex64::new(0.0, 0.0));
                    continue;
                }
                let idx = base + i1 * n + i2;
                let xis = [xi0, xi1, xi2];
                let mut s = Complex64::new(0.0, 0.0);
                for (m, &(j, k, fac)) in pairs.iter().enumerate() {
                    s += prods[m][idx] * (fac * xis[j] * xis[k]);
                }
                out.push(-s / q);
            }
        }
        out
    });
    let mut phat = Vec::with_capacity(grid.len());
    for s in slabs {
        phat.extend(s);
    }
    Ok(ScalarFieldP { grid, values: fft::inverse(&grid, &phat) })
}

/// Time-integrated response
/// `G(tau) = int_0^tau S(tau - s) F(U(s), V(s)) ds`
/// by composite Gauss quadrature on panels graded toward `s = tau`, where
/// the linear flow's gradient envelope degenerates. The output is
/// solenoidal by construction, matching the exact flow.
pub fn duhamel_g(
    traj_u: &TimeSlices,
    traj_v: &TimeSlices,
    tau: f64,
    rule: &QuadratureRule,
) -> Result<VectorField> {
    duhamel_g_with(traj_u, traj_v, tau, rule, DilationMethod::default())
}

pub fn duhamel_g_with(
    traj_u: &TimeSlices,
    traj_v: &TimeSlices,
    tau: f64,
    rule: &QuadratureRule,
    method: DilationMethod,
) -> Result<VectorField> {
    traj_u.grid().check_same(&traj_v.grid(), "duhamel_g")?;
    let horizon = traj_u.tau_max().min(traj_v.tau_max());
    if !tau.is_finite() || tau < 0.0 || tau > horizon * (1.0 + 1e-12) {
        return Err(SsnsError::domain(
            "duhamel_g",
            format!("tau = {tau} outside the trajectory range [0, {horizon}]"),
        ));
    }
    let mut acc = VectorField::zeros(traj_u.grid());
    if tau == 0.0 {
        return Ok(acc);
    }
    let (nodes, weights) = quad::graded_nodes_weights(0.0, tau, rule);
    // Sequential accumulation in node order keeps the result deterministic;
    // the per-node field work is parallel internally.
    for (s, w) in nodes.iter().zip(&weights) {
        let us = traj_u.value_at(*s)?;
        let vs = traj_v.value_at(*s)?;
        let f = bilinear_f(&us, &vs)?;
        let g = semigroup::semigroup_apply_with(&f, tau - s, method)?;
        acc.add_scaled(*w, &g)?;
    }
    // The exact flow preserves solenoidality, but resampling at an
    // off-lattice scale factor aliases the projected integrand's algebraic
    // tails into a small lattice divergence no box size can suppress.
    // Restore the invariant exactly; by linearity this equals projecting
    // every node.
    ops::leray_project(&acc)
}

/// Scalar envelope for `duhamel_g` in the `L^p` norm:
/// `2 c0 int_0^tau e^{-decay_rate (tau-s)} t0(tau-s)^{-(1+gamma)/2} N_u N_v ds`
/// with `N` the piecewise-linear interpolants of the supplied norm samples.
/// The endpoint singularity is removed exactly by substituting
/// `tau - s = v^q` with `q = 4 / (1 - gamma)`, after which uniform panels
/// converge fast; grading is unnecessary.
pub fn duhamel_envelope_rhs(
    taus: &[f64],
    norms_u: &[f64],
    norms_v: &[f64],
    tau: f64,
    gamma: f64,
    c0: f64,
    decay_rate: f64,
) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(SsnsError::domain("duhamel_envelope_rhs", format!("gamma = {gamma} not in (0, 1)")));
    }
    if taus.len() != norms_u.len() || taus.len() != norms_v.len() || taus.is_empty() {
        return Err(SsnsError::precondition(
            "duhamel_envelope_rhs",
            "norm samples must match the time grid",
        ));
    }
    let horizon = *taus.last().unwrap();
    if !tau.is_finite() || tau < 0.0 || tau > horizon * (1.0 + 1e-12) {
        return Err(SsnsError::domain(
            "duhamel_envelope_rhs",
            format!("tau = {tau} outside the sampled range [0, {horizon}]"),
        ));
    }
    if tau == 0.0 {
        return Ok(0.0);
    }
    let q = 4.0 / (1.0 - gamma);
    let beta = 0.5 * (1.0 + gamma);
    let b = tau.powf(1.0 / q);
    let integrand = |v: f64| {
        let sigma = v.powf(q); // = tau - s
        let s = (tau - sigma).max(0.0);
        let nu = lerp_samples(taus, norms_u, s);
        let nv = lerp_samples(taus, norms_v, s);
        q * v * (-decay_rate * sigma).exp() * kernel_regularizer(sigma).powf(beta) * nu * nv
    };
    let panels = (4 * taus.len()).max(32);
    let mut total = 0.0;
    for j in 0..panels {
        let a = b * j as f64 / panels as f64;
        let c = b * (j + 1) as f64 / panels as f64;
        total += quad::integrate(a, c, 4, integrand);
    }
    Ok(2.0 * c0 * total)
}

fn lerp_samples(taus: &[f64], vals: &[f64], s: f64) -> f64 {
    let i = taus.partition_point(|&t| t < s);
    if i == 0 {
        return vals[0];
    }
    if i == taus.len() {
        return *vals.last().unwrap();
    }
    if taus[i] == s {
        return vals[i];
    }
    let w = (s - taus[i - 1]) / (taus[i] - taus[i - 1]);
    vals[i - 1] * (1.0 - w) + vals[i] * w
}

/// Half-side of the trusted cube for coordinate-weighted residuals.
pub fn trusted_half_side(grid: &Grid) -> f64 {
    grid.box_side / 4.0
}

/// Point mask of the trusted cube `max_i |y_i| < L/4`.
pub fn trusted_mask(grid: &Grid) -> Vec<bool> {
    let n = grid.n;
    let quarter = trusted_half_side(grid);
    let coords = grid.coords();
    let inside: Vec<bool> = coords.iter().map(|y| y.abs() < quarter).collect();
    let mut mask = vec![false; grid.len()];
    for i0 in 0..n {
        for i1 in 0..n {
            for i2 in 0..n {
                mask[grid.idx(i0, i1, i2)] = inside[i0] && inside[i1] && inside[i2];
            }
        }
    }
    mask
}

/// Residual of the steady profile equation,
/// `U + (y . grad) U + 2 (U . grad) U + 2 grad P - 2 lap U`,
/// zeroed outside the trusted cube, together with its L^2 size relative to
/// `U` over the same cube.
pub fn steady_residual(u_bar: &VectorField) -> Result<(VectorField, f64)> {
    u_bar.check_finite("steady_residual")?;
    let dr = ops::div_rel(u_bar)?;
    if dr > 1e-6 {
        return Err(SsnsError::precondition(
            "steady_residual",
            format!("input is not solenoidal: relative divergence {dr:.3e}"),
        ));
    }
    let grid = u_bar.grid;
    let grad = ops::gradient(u_bar)?;
    let conv = ops::convective_derivative(u_bar, u_bar)?;
    let p = pressure_from_velocity(u_bar)?;
    let gp = ops::gradient_scalar(&p)?;
    let lap = ops::laplacian(u_bar)?;
    let mask = trusted_mask(&grid);
    let coords = grid.coords();
    let n = grid.n;

    let comps = par::map_range_collect(3, |c| {
        let mut out = vec![0.0; grid.len()];
        for i0 in 0..n {
            for i1 in 0..n {
                for i2 in 0..n {
                    let idx = grid.idx(i0, i1, i2);
                    if !mask[idx] {
                        continue;
                    }
                    let drift = coords[i0] * grad[0].components[c][idx]
                        + coords[i1] * grad[1].components[c][idx]
                        + coords[i2] * grad[2].components[c][idx];
                    out[idx] = u_bar.components[c][idx] + drift
                        + 2.0 * conv.components[c][idx]
                        + 2.0 * gp.components[c][idx]
                        - 2.0 * lap.components[c][idx];
                }
            }
        }
        out
    });
    let mut it = comps.into_iter();
    let residual = VectorField {
        grid,
        components: [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()],
    };

    let masked_sq = |f: &VectorField| {
        ops::deterministic_sum(grid.len(), |i| {
            if mask[i] {
                f.components[0][i] * f.components[0][i]
                    + f.components[1][i] * f.components[1][i]
                    + f.components[2][i] * f.components[2][i]
            } else {
                0.0
            }
        })
    };
    let num = masked_sq(&residual).sqrt();
    let den = masked_sq(u_bar).sqrt();
    let rel = if den == 0.0 { 0.0 } else { num / den };
    Ok((residual, rel))
}

/// The steady equation tested against a divergence-free, compactly
/// supported `phi`: all derivatives moved onto `phi` by parts (the
/// pressure pairing drops), i.e. the integral of
/// `-2 phi.U - (y . grad phi).U - 2 grad phi : (U (x) U) - 2 lap phi . U`.
pub fn weak_steady_residual(u_bar: &VectorField, phi: &VectorField) -> Result<f64> {
    u_bar.grid.check_same(&phi.grid, "weak_steady_residual")?;
    u_bar.check_finite("weak_steady_residual")?;
    phi.check_finite("weak_steady_residual")?;
    let grid = u_bar.grid;
    let mask = trusted_mask(&grid);
    let peak = phi.max_abs();
    let mut outside = 0.0f64;
    for c in 0..3 {
        for (i, v) in phi.components[c].iter().enumerate() {
            if !mask[i] {
                outside = outside.max(v.abs());
            }
        }
    }
    if outside > 1e-12 * peak {
        return Err(SsnsError::precondition(
            "weak_steady_residual",
            format!(
                "test function must vanish outside the trusted cube; found {outside:.3e} vs peak {peak:.3e}"
            ),
        ));
    }
    let gphi = ops::gradient(phi)?;
    let lphi = ops::laplacian(phi)?;
    let coords = grid.coords();
    let n = grid.n;
    let total = ops::deterministic_sum(grid.len(), |idx| {
        let i0 = idx / (n * n);
        let i1 = (idx / n) % n;
        let i2 = idx % n;
        let (y0, y1, y2) = (coords[i0], coords[i1], coords[i2]);
        let ys = [y0, y1, y2];
        let mut acc = 0.0;
        for c in 0..3 {
            let u = u_bar.components[c][idx];
            let drift_phi = ys[0] * gphi[0].components[c][idx]
                + ys[1] * gphi[1].components[c][idx]
                + ys[2] * gphi[2].components[c][idx];
            acc += (-2.0 * phi.components[c][idx] - drift_phi - 2.0 * lphi.components[c][idx]) * u;
            for j in 0..3 {
                acc -= 2.0 * gphi[j].components[c][idx] * u * u_bar.components[j][idx];
            }
        }
        acc
    });
    Ok(total * grid.h().powi(3))
}

/// The pairing `|int grad phi : (R (x) R)|` against its product-norm bound
/// `||grad phi||_q ||R||_p^2` with `q = p / (p - 2)`.
pub fn holder_gap(r: &VectorField, phi: &VectorField, p: f64) -> Result<(f64, f64)> {
    if !p.is_finite() || p <= 2.0 {
        return Err(SsnsError::domain("holder_gap", format!("p must be finite and > 2, got {p}")));
    }
    r.grid.check_same(&phi.grid, "holder_gap")?;
    let q = p / (p - 2.0);
    let gphi = ops::gradient(phi)?;
    let grid = r.grid;
    let pairing = ops::deterministic_sum(grid.len(), |idx| {
        let mut acc = 0.0;
        for c in 0..3 {
            for j in 0..3 {
                acc += gphi[j].components[c][idx] * r.components[c][idx] * r.components[j][idx];
            }
        }
        acc
    }) * grid.h().powi(3);
    let lhs = pairing.abs();
    let rhs = ops::lp_norm_gradient(phi, q)? * ops::lp_norm(r, p)?.powi(2);
    Ok((lhs, rhs))
}
