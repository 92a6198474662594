//! Singularity-centered change of variables between physical fields
//! `u(x, t)` and rescaled profiles `U(y, tau)`:
//!
//! ```text
//! u(x, t) = (T - t)^{-1/2} U(y, tau),   y = x / sqrt(T - t),
//! tau = (1/2) log(T / (T - t)),         t = T (1 - e^{-2 tau}),
//! ```
//!
//! plus the run-level monitors built on it: profile convergence, the
//! pointwise 1/|y| decay audit, the uniform physical-norm bound implied by
//! a certified ledger, and the classical integrability criterion check.

use crate::error::SsnsError;
use crate::field::VectorField;
use crate::nonlinear::TimeSlices;
use crate::ops;
use crate::scalar_lemmas::ConstantsLedger;
use crate::semigroup;
use crate::Result;

/// A consistent (T, t, tau) triple for one singularity time.
#[derive(Clone, Copy, Debug)]
pub struct TimeMap {
    /// Putative singularity time, physical units.
    pub t_sing: f64,
    /// Physical time in [0, T).
    pub t: f64,
    /// Rescaled time, >= 0.
    pub tau: f64,
}

impl TimeMap {
    pub fn from_physical(t_sing: f64, t: f64) -> Result<Self> {
        Ok(Self { t_sing, t, tau: tau_of_t(t_sing, t)? })
    }

    pub fn from_rescaled(t_sing: f64, tau: f64) -> Result<Self> {
        Ok(Self { t_sing, t: t_of_tau(t_sing, tau)?, tau })
    }

    /// `sqrt(T - t)`, the length contraction between the frames.
    pub fn dilation(&self) -> f64 {
        (self.t_sing - self.t).sqrt()
    }
}

fn check_t_sing(op: &'static str, t_sing: f64) -> Result<()> {
    if !(t_sing > 0.0) || !t_sing.is_finite() {
        return Err(SsnsError::domain(op, format!("singularity time must be positive, got {t_sing}")));
    }
    Ok(())
}

/// `tau = (1/2) log(T / (T - t))`.
pub fn tau_of_t(t_sing: f64, t: f64) -> Result<f64> {
    check_t_sing("tau_of_t", t_sing)?;
    if !(0.0..t_sing).contains(&t) {
        return Err(SsnsError::domain(
            "tau_of_t",
            format!("need 0 <= t < T, got t = {t}, T = {t_sing}"),
        ));
    }
    // ln(T/(T-t)) = -ln(1 - t/T), kept accurate for t << T.
    Ok(-0.5 * (-t / t_sing).ln_1p())
}

/// `t = T (1 - e^{-2 tau})`.
pub fn t_of_tau(t_sing: f64, tau: f64) -> Result<f64> {
    check_t_sing("t_of_tau", t_sing)?;
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(SsnsError::domain("t_of_tau", format!("need tau >= 0, got {tau}")));
    }
    Ok(-t_sing * (-2.0 * tau).exp_m1())
}

/// Resample at scale `lambda`, reading the field as a decaying function:
/// arguments landing outside the box give zero rather than wrapping around
/// to a periodic image (compression at lambda > 1 would otherwise tile the
/// box with copies and inflate every norm).
fn resample_decaying(f: &VectorField, lambda: f64) -> Result<VectorField> {
    let mut out = semigroup::resample(f, lambda)?;
    if lambda > 1.0 {
        let grid = f.grid;
        let n = grid.n;
        let half = grid.box_side / 2.0;
        let coords = grid.coords();
        for c in 0..3 {
            for i0 in 0..n {
                for i1 in 0..n {
                    for i2 in 0..n {
                        let outside = (lambda * coords[i0]).abs() > half
                            || (lambda * coords[i1]).abs() > half
                            || (lambda * coords[i2]).abs() > half;
                        if outside {
                            out.components[c][grid.idx(i0, i1, i2)] = 0.0;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Physical field at time t -> rescaled profile: `U(y) = sqrt(T-t) u(sqrt(T-t) y)`.
/// The profile reuses the grid of `u`.
pub fn to_selfsimilar(u: &VectorField, t_sing: f64, t: f64) -> Result<VectorField> {
    tau_of_t(t_sing, t)?;
    let s = (t_sing - t).sqrt();
    Ok(resample_decaying(u, s)?.scaled(s))
}

/// Rescaled profile at tau -> physical field: `u(x) = (T-t)^{-1/2} U(x / sqrt(T-t))`.
pub fn from_selfsimilar(big_u: &VectorField, t_sing: f64, tau: f64) -> Result<VectorField> {
    let t = t_of_tau(t_sing, tau)?;
    let s = (t_sing - t).sqrt();
    Ok(resample_decaying(big_u, 1.0 / s)?.scaled(1.0 / s))
}

/// Distance trace `tau -> ||U(tau) - U_bar||_p` with a converged flag: the
/// last three distances all below `tol` and non-increasing.
pub fn profile_convergence(
    traj: &TimeSlices,
    u_bar: &VectorField,
    p: f64,
    tol: f64,
) -> Result<(Vec<(f64, f64)>, bool)> {
    traj.grid().check_same(&u_bar.grid, "profile_convergence")?;
    if !(tol > 0.0) {
        return Err(SsnsError::domain("profile_convergence", format!("need tol > 0, got {tol}")));
    }
    let mut rows = Vec::with_capacity(traj.taus().len());
    for (tau, f) in traj.taus().iter().zip(traj.fields()) {
        let diff = VectorField::lin_comb(1.0, f, -1.0, u_bar)?;
        rows.push((*tau, ops::lp_norm(&diff, p)?));
    }
    let converged = rows.len() >= 3 && {
        let tail = &rows[rows.len() - 3..];
        tail.iter().all(|(_, d)| *d < tol)
            && tail[0].1 >= tail[1].1
            && tail[1].1 >= tail[2].1
    };
    Ok((rows, converged))
}

/// Audit of the pointwise decay `|U(y)| <= C / |y|` over the trusted
/// annulus `L/8 <= |y| <= L/4` (Euclidean radius; close enough to the
/// center to be grid-resolved, far enough that 1/|y| is meaningful).
#[derive(Clone, Debug)]
pub struct DecayCheckReport {
    /// max over the annulus of `|U(y)| |y|`.
    pub max_weighted: f64,
    pub argmax: [f64; 3],
    /// The claimed constant C.
    pub bound: f64,
    pub passed: bool,
    /// Number of lattice points in the annulus.
    pub samples: usize,
}

pub fn pointwise_decay_check(u: &VectorField, c: f64) -> Result<DecayCheckReport> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(SsnsError::domain("pointwise_decay_check", format!("need C > 0, got {c}")));
    }
    u.check_finite("pointwise_decay_check")?;
    let grid = u.grid;
    let n = grid.n;
    let coords = grid.coords();
    let (r_lo, r_hi) = (grid.box_side / 8.0, grid.box_side / 4.0);
    let mut max_weighted = 0.0f64;
    let mut argmax = [0.0; 3];
    let mut samples = 0usize;
    for i0 in 0..n {
        for i1 in 0..n {
            for i2 in 0..n {
                let (y0, y1, y2) = (coords[i0], coords[i1], coords[i2]);
                let r = (y0 * y0 + y1 * y1 + y2 * y2).sqrt();
                if r < r_lo || r > r_hi {
                    continue;
                }
                samples += 1;
                let idx = grid.idx(i0, i1, i2);
                let m = (u.components[0][idx].powi(2)
                    + u.components[1][idx].powi(2)
                    + u.components[2][idx].powi(2))
                .sqrt();
                if m * r > max_weighted {
                    max_weighted = m * r;
                    argmax = [y0, y1, y2];
                }
            }
        }
    }
    Ok(DecayCheckReport { max_weighted, argmax, bound: c, passed: max_weighted <= c, samples })
}

/// The uniform physical-norm bound a certified ledger implies:
/// `K_max e^{(1-gamma) tau_m} / T^{(1-gamma)/2}`. Every measured
/// `||u||_p(t)` with `t >= t(tau_m)` must sit below it (with slack); the
/// exponential decay of the profile exactly cancels the `(T-t)` blow-up
/// factor, leaving a T-dependent constant.
pub fn non_blowup_bound(ledger: &ConstantsLedger, t_sing: f64) -> Result<f64> {
    check_t_sing("non_blowup_bound", t_sing)?;
    if !ledger.certified {
        return Err(SsnsError::precondition(
            "non_blowup_bound",
            format!("ledger is not certified: K0 M = {:.6e} > 1/6", ledger.k0 * ledger.m),
        ));
    }
    let tau_m = ledger.tau_m.unwrap_or(0.0);
    let e = 1.0 - ledger.gamma;
    Ok(ledger.k_max * (e * tau_m).exp() / t_sing.powf(e / 2.0))
}

/// Classical integrability criterion bookkeeping: true iff
/// `3/p + 2/q <= 1` with `p >= 3`, `q >= 1` (infinity allowed in both).
pub fn lps_check(p: f64, q: f64) -> Result<bool> {
    if p.is_nan() || q.is_nan() || p < 3.0 || q < 1.0 {
        return Err(SsnsError::domain(
            "lps_check",
            format!("need p >= 3 and q >= 1, got p = {p}, q = {q}"),
        ));
    }
    let s = if p.is_infinite() { 0.0 } else { 3.0 / p } + if q.is_infinite() { 0.0 } else { 2.0 / q };
    Ok(s <= 1.0)
}

/// One row of the physical/rescaled norm trace.
#[derive(Clone, Debug)]
pub struct BlowupRow {
    pub tau: f64,
    pub t: f64,
    /// `||U(tau)||_p` on the profile grid.
    pub norm_rescaled: f64,
    /// `||u(t)||_p` measured after transforming back to physical variables.
    pub norm_physical: f64,
    /// Ledger envelope `K_max e^{-(1-gamma) tau}` for the profile norm.
    pub envelope: f64,
    /// The uniform physical bound.
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct BlowupTrace {
    pub rows: Vec<BlowupRow>,
    pub bound: f64,
    pub all_pass: bool,
}

impl BlowupTrace {
    pub fn to_csv(&self, ledger: &ConstantsLedger) -> String {
        let mut s = String::new();
        s.push_str(&format!("# {}\n", ledger.summary()));
        s.push_str("tau,t,norm_U,norm_u,envelope,bound,pass\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
                r.tau, r.t, r.norm_rescaled, r.norm_physical, r.envelope, r.bound, r.pass
            ));
        }
        s
    }
}

/// Assemble the trace for a rescaled trajectory under a certified ledger:
/// per time, the profile norm, the measured physical norm, the decay
/// envelope, and the uniform bound with a 5% acceptance slack.
pub fn blowup_trace(
    traj: &TimeSlices,
    ledger: &ConstantsLedger,
    t_sing: f64,
) -> Result<BlowupTrace> {
    let bound = non_blowup_bound(ledger, t_sing)?;
    let mut rows = Vec::with_capacity(traj.taus().len());
    let mut all_pass = true;
    for (tau, f) in traj.taus().iter().zip(traj.fields()) {
        let t = t_of_tau(t_sing, *tau)?;
        let norm_rescaled = ops::lp_norm(f, ledger.p)?;
        let u_phys = from_selfsimilar(f, t_sing, *tau)?;
        let norm_physical = ops::lp_norm(&u_phys, ledger.p)?;
        let envelope = ledger.k_max * (-(1.0 - ledger.gamma) * tau).exp();
        let pass = norm_physical <= bound * 1.05;
        all_pass &= pass;
        rows.push(BlowupRow { tau: *tau, t, norm_rescaled, norm_physical, envelope, bound, pass });
    }
    Ok(BlowupTrace { rows, bound, all_pass })
}
