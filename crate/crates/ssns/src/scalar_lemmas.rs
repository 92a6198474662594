//! Scalar bookkeeping behind the contraction argument: the decay exponent
//! `gamma = 3/p`, the memory-kernel constant `c1`, the quadratic recurrence
//! majorant with its smallness certificate, and the time after which the
//! rescaled norm is small enough to start the iteration.

use serde::{Deserialize, Serialize};

use crate::error::SsnsError;
use crate::quad;
use crate::Result;

/// `gamma = 3/p`, the decay rate carried by every weighted norm here.
/// Requires `p` strictly between 3 and infinity so `gamma` lands in (0,1).
pub fn gamma_of_p(p: f64) -> Result<f64> {
    if !(p > 3.0) || !p.is_finite() {
        return Err(SsnsError::domain(
            "gamma_of_p",
            format!("p must lie in (3, inf), got {p}"),
        ));
    }
    Ok(3.0 / p)
}

fn check_gamma(gamma: f64, op: &'static str) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(SsnsError::domain(
            op,
            format!("gamma must lie in (0,1), got {gamma}"),
        ));
    }
    Ok(())
}

/// Closed-form bound for the memory integral
/// `sup_tau exp(-tau) int_0^tau exp(gamma s) (1 - exp(-2(tau-s)))^{-(1+gamma)/2} ds`:
/// `(2/(1-gamma) + max(1/gamma, 1/2)) (1-e^{-2})^{-(1+gamma)/2}`.
///
/// Two slightly different closed forms circulate for the second summand
/// (`1/2` vs `1/gamma`); only the larger one dominates the integral for all
/// gamma, so that is what we certify against.  [`c1_formula_variants`]
/// reports both for side-by-side inspection.
pub fn c1_formula(gamma: f64) -> Result<f64> {
    check_gamma(gamma, "c1_formula")?;
    let tail = (1.0 - (-2.0f64).exp()).powf(-(1.0 + gamma) / 2.0);
    Ok((2.0 / (1.0 - gamma) + (1.0 / gamma).max(0.5)) * tail)
}

/// The two circulating closed forms: `(2/(1-gamma) + 1/2) * tail` and
/// `(2/(1-gamma) + 1/gamma) * tail`.
pub fn c1_formula_variants(gamma: f64) -> Result<(f64, f64)> {
    check_gamma(gamma, "c1_formula_variants")?;
    let tail = (1.0 - (-2.0f64).exp()).powf(-(1.0 + gamma) / 2.0);
    Ok((
        (2.0 / (1.0 - gamma) + 0.5) * tail,
        (2.0 / (1.0 - gamma) + 1.0 / gamma) * tail,
    ))
}

/// `t0(u) / u` extended smoothly through `u = 0`, i.e.
/// `(1 - e^{-2u}) / u -> 2`.  Returned as the reciprocal `u / (1 - e^{-2u})`.
pub(crate) fn kernel_regularizer(u: f64) -> f64 {
    if u < 1e-8 {
        // 1 - e^{-2u} = 2u (1 - u + 2u^2/3 - ...): reciprocal to O(u^2).
        0.5 * (1.0 + u)
    } else {
        u / (1.0 - (-2.0 * u).exp())
    }
}

/// The memory integral at a single horizon `tau`:
/// `exp(-tau) int_0^tau exp(gamma s) (1 - exp(-2(tau-s)))^{-(1+gamma)/2} ds`.
///
/// The integrand has an integrable power singularity at `s = tau`.  Rather
/// than grading panels toward it (whose breakpoints fall below f64 spacing
/// long before the quadrature converges at the exponents needed here), the
/// grading is performed by the exact substitution `tau - s = v^q` with
/// `q = 4/(1-gamma)`, after which the integrand is `q v` times a smooth
/// function of `v^q` and plain composite Gauss panels converge fast.
pub fn c1_integral_value(gamma: f64, tau: f64, panels: usize, nodes: usize) -> Result<f64> {
    check_gamma(gamma, "c1_integral_value")?;
    if tau < 0.0 {
        return Err(SsnsError::domain(
            "c1_integral_value",
            format!("tau must be nonnegative, got {tau}"),
        ));
    }
    if tau == 0.0 {
        return Ok(0.0);
    }
    let q = 4.0 / (1.0 - gamma);
    let b = tau.powf(1.0 / q);
    let beta = (1.0 + gamma) / 2.0;
    // exp(-tau) exp(gamma s) = exp(-(1-gamma) tau) exp(-gamma u), u = tau - s.
    let f = |v: f64| {
        let u = v.powf(q);
        q * v * (-gamma * u).exp() * kernel_regularizer(u).powf(beta)
    };
    let mut s = 0.0;
    for j in 0..panels {
        let a = b * j as f64 / panels as f64;
        let c = b * (j + 1) as f64 / panels as f64;
        s += quad::integrate(a, c, nodes, f);
    }
    Ok((-(1.0 - gamma) * tau).exp() * s)
}

/// Numerical supremum of the memory integral over a uniform tau grid on
/// `(0, tau_max]`.  Self-checks by doubling the panel count; disagreement
/// beyond 1e-6 relative is reported as a numeric error.
pub fn c1_integral_sup(gamma: f64, tau_max: f64, n_tau: usize) -> Result<f64> {
    check_gamma(gamma, "c1_integral_sup")?;
    if !(tau_max >= 4.0) {
        return Err(SsnsError::domain(
            "c1_integral_sup",
            format!("tau_max must be >= 4 to capture the plateau, got {tau_max}"),
        ));
    }
    if n_tau < 2 {
        return Err(SsnsError::domain("c1_integral_sup", "need at least 2 tau nodes"));
    }
    let mut sup = 0.0f64;
    for i in 1..=n_tau {
        let tau = tau_max * i as f64 / n_tau as f64;
        let coarse = c1_integral_value(gamma, tau, 24, 8)?;
        let fine = c1_integral_value(gamma, tau, 48, 8)?;
        if (fine - coarse).abs() > 1e-6 * fine.abs().max(1e-12) {
            return Err(SsnsError::numerical(
                "c1_integral_sup",
                format!("quadrature not converged at tau={tau}: {coarse} vs {fine}"),
            ));
        }
        sup = sup.max(fine);
    }
    Ok(sup)
}

/// Report of the pointwise inequality `1 - e^{-2x} >= (1 - e^{-2}) x` on
/// `[0, 1]` (equality at both endpoints).
#[derive(Debug, Clone, Copy)]
pub struct BasicInequalityReport {
    pub samples: usize,
    pub min_slack: f64,
    pub argmin: f64,
}

pub fn basic_inequality_check(samples: usize) -> Result<BasicInequalityReport> {
    if samples < 2 {
        return Err(SsnsError::domain(
            "basic_inequality_check",
            "need at least 2 samples",
        ));
    }
    let slope = 1.0 - (-2.0f64).exp();
    let mut min_slack = f64::INFINITY;
    let mut argmin = 0.0;
    for i in 0..samples {
        let x = i as f64 / (samples - 1) as f64;
        let slack = (1.0 - (-2.0 * x).exp()) - slope * x;
        if slack < min_slack {
            min_slack = slack;
            argmin = x;
        }
    }
    Ok(BasicInequalityReport {
        samples,
        min_slack,
        argmin,
    })
}

/// Outcome of iterating `Knext = K0 + M K^2` with its closed-form fixed
/// point and the smallness certificate `K0 M <= 1/6  =>  K_n <= (4/3) K0`.
#[derive(Debug, Clone)]
pub struct RecurrenceReport {
    pub sequence: Vec<f64>,
    pub k_max: f64,
    pub certified: bool,
    /// `(1 - sqrt(1 - 4 K0 M)) / (2M)` when the discriminant is nonnegative.
    pub fixed_point: Option<f64>,
}

pub fn recurrence_majorant(k0: f64, m: f64, n_max: usize) -> Result<RecurrenceReport> {
    if !(k0 >= 0.0) || !(m >= 0.0) || !k0.is_finite() || !m.is_finite() {
        return Err(SsnsError::domain(
            "recurrence_majorant",
            format!("need K0 >= 0 and M >= 0, got K0={k0}, M={m}"),
        ));
    }
    if n_max < 1 {
        return Err(SsnsError::domain("recurrence_majorant", "n_max must be >= 1"));
    }
    let mut sequence = Vec::with_capacity(n_max + 1);
    sequence.push(k0);
    let mut k = k0;
    for _ in 0..n_max {
        k = k0 + m * k * k;
        sequence.push(k);
        if !k.is_finite() {
            break;
        }
    }
    let disc = 1.0 - 4.0 * k0 * m;
    let fixed_point = if m == 0.0 {
        Some(k0)
    } else if disc >= 0.0 {
        Some((1.0 - disc.sqrt()) / (2.0 * m))
    } else {
        None
    };
    let bound = 4.0 / 3.0 * k0;
    let small = k0 * m <= 1.0 / 6.0 + 1e-15;
    let dominated = sequence.iter().all(|&v| v <= bound * (1.0 + 1e-12) + 1e-300);
    let margin_ok = 2.0 * m * bound <= 4.0 / 9.0 + 1e-12;
    let certified = small && dominated && margin_ok;
    let k_max = if certified {
        bound
    } else {
        sequence.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    };
    Ok(RecurrenceReport {
        sequence,
        k_max,
        certified,
        fixed_point,
    })
}

/// First node of an ascending `(tau, ||U||_p)` trace at which
/// `2 c0^2 c1 * norm <= 1/6`; `None` while the trace never gets small.
pub fn tau_m_rule(norm_trace: &[(f64, f64)], c0: f64, c1: f64) -> Result<Option<f64>> {
    if norm_trace.is_empty() {
        return Err(SsnsError::domain("tau_m_rule", "empty norm trace"));
    }
    if !norm_trace.windows(2).all(|w| w[1].0 > w[0].0) {
        return Err(SsnsError::precondition(
            "tau_m_rule",
            "tau values must be strictly ascending",
        ));
    }
    let threshold = 1.0 / 6.0;
    for &(tau, norm) in norm_trace {
        if 2.0 * c0 * c0 * c1 * norm <= threshold {
            return Ok(Some(tau));
        }
    }
    Ok(None)
}

/// The constants that feed every envelope and recurrence assertion, stamped
/// into reports so a run is reproducible from its output alone.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConstantsLedger {
    pub p: f64,
    pub gamma: f64,
    pub c0: f64,
    pub c1: f64,
    /// `2 c0 c1`, the quadratic coefficient of the recurrence.
    pub m: f64,
    pub k0: f64,
    pub k_max: f64,
    pub tau_m: Option<f64>,
    /// True when `K0 M <= 1/6` so `K_max = (4/3) K0` is justified.
    pub certified: bool,
}

impl ConstantsLedger {
    pub fn assemble(p: f64, c0: f64, c1: f64, k0: f64) -> Result<Self> {
        let gamma = gamma_of_p(p)?;
        if !(c0 > 0.0) || !(c1 > 0.0) {
            return Err(SsnsError::domain(
                "ConstantsLedger::assemble",
                format!("constants must be positive, got c0={c0}, c1={c1}"),
            ));
        }
        let m = 2.0 * c0 * c1;
        let rec = recurrence_majorant(k0, m, 48)?;
        Ok(ConstantsLedger {
            p,
            gamma,
            c0,
            c1,
            m,
            k0,
            k_max: rec.k_max,
            tau_m: None,
            certified: rec.certified,
        })
    }

    pub fn with_tau_m(mut self, tau_m: Option<f64>) -> Self {
        self.tau_m = tau_m;
        self
    }

    /// One-line `key=value` form for embedding in CSV headers.
    pub fn summary(&self) -> String {
        format!(
            "p={:.6} gamma={:.6} c0={:.6e} c1={:.6e} M={:.6e} K0={:.6e} K_max={:.6e} tau_m={} certified={}",
            self.p,
            self.gamma,
            self.c0,
            self.c1,
            self.m,
            self.k0,
            self.k_max,
            match self.tau_m {
                Some(t) => format!("{t:.6}"),
                None => "none".to_string(),
            },
            self.certified
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gamma_examples_and_domain() {
        assert_relative_eq!(gamma_of_p(4.0).unwrap(), 0.75);
        assert_relative_eq!(gamma_of_p(6.0).unwrap(), 0.5);
        assert!(gamma_of_p(3.0).is_err());
        assert!(gamma_of_p(f64::INFINITY).is_err());
        assert!(gamma_of_p(-2.0).is_err());
    }

    #[test]
    fn c1_formula_at_half() {
        // (2/(1/2) + 1/(1/2)) = 6 times the tail factor.
        let v = c1_formula(0.5).unwrap();
        let expect = 6.0 * (1.0 - (-2.0f64).exp()).powf(-0.75);
        assert_relative_eq!(v, expect, max_relative = 1e-15);
        assert!((v - 6.6913).abs() < 1e-4, "got {v}");
    }

    #[test]
    fn c1_variants_bracket_the_implementation() {
        for gamma in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let v = c1_formula(gamma).unwrap();
            let (half, recip) = c1_formula_variants(gamma).unwrap();
            assert!(v >= half - 1e-12);
            assert!(v >= recip - 1e-12);
            assert!(v <= half.max(recip) + 1e-12);
        }
    }

    #[test]
    fn recurrence_boundary_case() {
        let r = recurrence_majorant(1.0, 1.0 / 6.0, 60).unwrap();
        assert!(r.certified);
        let limit = 3.0 * (1.0 - 1.0 / 3.0f64.sqrt());
        assert_relative_eq!(r.fixed_point.unwrap(), limit, max_relative = 1e-12);
        assert!((limit - 1.26795).abs() < 1e-5);
        assert!(*r.sequence.last().unwrap() <= 4.0 / 3.0 + 1e-9);
        assert_relative_eq!(r.k_max, 4.0 / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn recurrence_small_m_case() {
        let r = recurrence_majorant(1.0, 0.1, 60).unwrap();
        assert!(r.certified);
        let fp = (1.0 - 0.6f64.sqrt()) / 0.2;
        assert_relative_eq!(r.fixed_point.unwrap(), fp, max_relative = 1e-12);
        assert!((fp - 1.12702).abs() < 1e-5);
        // The iteration actually converges to the fixed point.
        assert_relative_eq!(*r.sequence.last().unwrap(), fp, max_relative = 1e-12);
    }

    #[test]
    fn recurrence_zero_and_divergent() {
        let z = recurrence_majorant(0.0, 0.5, 10).unwrap();
        assert!(z.sequence.iter().all(|&v| v == 0.0));
        assert!(z.certified);
        let d = recurrence_majorant(1.0, 1.0, 40).unwrap();
        assert!(!d.certified);
        assert!(d.fixed_point.is_none());
        assert!(d.k_max > 1e6);
    }

    #[test]
    fn basic_inequality_frozen_points() {
        let r = basic_inequality_check(100_001).unwrap();
        assert!(r.min_slack >= 0.0, "min slack {} at {}", r.min_slack, r.argmin);
        // Midpoint value: (1 - e^{-1}) - (1 - e^{-2})/2.
        let mid = (1.0 - (-1.0f64).exp()) - 0.5 * (1.0 - (-2.0f64).exp());
        assert!((mid - 0.1997882).abs() < 1e-6);
        // Equality at both endpoints.
        let slope = 1.0 - (-2.0f64).exp();
        assert_eq!(1.0 - (-2.0f64 * 0.0).exp(), 0.0);
        assert_eq!((1.0 - (-2.0f64).exp()) - slope, 0.0);
        assert!(basic_inequality_check(1).is_err());
    }

    #[test]
    fn memory_integral_matches_beta_function_tail() {
        // For large tau the integral equals
        //   e^{-(1-g)tau} [ B(g/2, (1-g)/2)/2 - tail(tau) ]
        // with tail(tau) in [e^{-g tau}/g, (1+6e-6) e^{-g tau}/g] once
        // tau >= 6, since the kernel sits in [1, (1-e^{-12})^{-(1+g)/2}].
        let cases = [
            (0.25, 5.037854093619307),
            (0.5, 3.7081493546027446),
            (0.75, 5.037854093619307),
        ];
        let tau = 8.0;
        for (g, i_inf) in cases {
            let v = c1_integral_value(g, tau, 48, 8).unwrap();
            let tail = (-g * tau).exp() / g;
            let lo = (-(1.0 - g) * tau).exp() * (i_inf - tail * (1.0 + 6e-6));
            let hi = (-(1.0 - g) * tau).exp() * (i_inf - tail);
            assert!(
                v >= lo - 1e-9 && v <= hi + 1e-9,
                "gamma {g}: value {v} outside [{lo}, {hi}]"
            );
        }
    }

    #[test]
    fn memory_integral_small_tau_scaling() {
        // value(tau) ~ C tau^{(1-g)/2} as tau -> 0: ratios at tau, tau/4
        // approach 4^{-(1-g)/2}, and the value sits under the closed form.
        let g = 0.5;
        let c1 = c1_formula(g).unwrap();
        let v1 = c1_integral_value(g, 0.01, 32, 8).unwrap();
        let v2 = c1_integral_value(g, 0.0025, 32, 8).unwrap();
        assert!(v1 < c1 * 0.01f64.powf(0.25));
        assert!(v1 < 1.0 && v2 < v1);
        let ratio = v2 / v1;
        assert!((ratio - 0.25f64.powf(0.25)).abs() < 0.02, "ratio {ratio}");
        assert_eq!(c1_integral_value(g, 0.0, 32, 8).unwrap(), 0.0);
    }

    #[test]
    fn tau_m_first_qualifying_node() {
        let c1 = c1_formula(0.5).unwrap();
        // Threshold norm is 1/(12 c1) ~ 0.0124538 at c0 = 1.
        assert!((1.0 / (12.0 * c1) - 0.0124538).abs() < 1e-6);
        let trace = vec![(0.0, 0.02), (0.5, 0.013), (1.0, 0.0124), (1.5, 0.011)];
        assert_eq!(tau_m_rule(&trace, 1.0, c1).unwrap(), Some(1.0));
        let all_big = vec![(0.0, 1.0), (1.0, 0.9)];
        assert_eq!(tau_m_rule(&all_big, 1.0, c1).unwrap(), None);
        let zeros = vec![(0.0, 0.0), (1.0, 0.0)];
        assert_eq!(tau_m_rule(&zeros, 1.0, c1).unwrap(), Some(0.0));
        assert!(tau_m_rule(&[], 1.0, c1).is_err());
        let unsorted = vec![(1.0, 0.0), (0.0, 0.0)];
        assert!(tau_m_rule(&unsorted, 1.0, c1).is_err());
    }

    #[test]
    fn ledger_assembly() {
        let c1 = c1_formula(0.75).unwrap();
        let led = ConstantsLedger::assemble(4.0, 1.0, c1, 1e-3).unwrap();
        assert_relative_eq!(led.gamma, 0.75);
        assert_relative_eq!(led.m, 2.0 * c1);
        assert!(led.certified);
        assert_relative_eq!(led.k_max, 4.0 / 3.0 * 1e-3, max_relative = 1e-15);
        assert!(led.summary().contains("certified=true"));
    }
}
