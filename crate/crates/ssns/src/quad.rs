//! Composite Gauss-Legendre quadrature with panels graded toward an
//! integrable endpoint singularity.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

/// Panel layout for the memory integrals: `panels` subintervals whose
/// widths shrink toward the singular endpoint like `(j/panels)^grading`,
/// each integrated with an `nodes_per_panel`-point Gauss rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureRule {
    pub panels: usize,
    pub nodes_per_panel: usize,
    pub grading_exponent: f64,
}

impl Default for QuadratureRule {
    fn default() -> Self {
        QuadratureRule {
            panels: 8,
            nodes_per_panel: 4,
            grading_exponent: 2.0,
        }
    }
}

impl QuadratureRule {
    pub fn refined(&self) -> Self {
        QuadratureRule {
            panels: self.panels * 2,
            nodes_per_panel: self.nodes_per_panel,
            grading_exponent: self.grading_exponent,
        }
    }
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// found by Newton iteration on the Legendre recurrence and cached.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    #[allow(clippy::type_complexity)]
    static CACHE: OnceLock<Mutex<HashMap<usize, (Vec<f64>, Vec<f64>)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap();
    map.entry(n)
        .or_insert_with(|| {
            let mut xs = vec![0.0; n];
            let mut ws = vec![0.0; n];
            for i in 0..n {
                // Chebyshev-like initial guess for the i-th root.
                let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
                for _ in 0..100 {
                    // Evaluate P_n and P_n' via the three-term recurrence.
                    let (mut p0, mut p1) = (1.0f64, x);
                    for k in 2..=n {
                        let kf = k as f64;
                        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                        p0 = p1;
                        p1 = p2;
                    }
                    let pn = if n == 1 { x } else { p1 };
                    let dpn = if n == 1 {
                        1.0
                    } else {
                        n as f64 * (x * p1 - p0) / (x * x - 1.0)
                    };
                    let dx = pn / dpn;
                    x -= dx;
                    if dx.abs() < 1e-15 {
                        break;
                    }
                }
                // Recompute derivative at the converged root for the weight.
                let (mut p0, mut p1) = (1.0f64, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                let dpn = if n == 1 {
                    1.0
                } else {
                    n as f64 * (x * p1 - p0) / (x * x - 1.0)
                };
                xs[n - 1 - i] = x;
                ws[n - 1 - i] = 2.0 / ((1.0 - x * x) * dpn * dpn);
            }
            (xs, ws)
        })
        .clone()
}

/// Single-panel Gauss integration of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(a: f64, b: f64, nodes: usize, f: F) -> f64 {
    let (xs, ws) = gauss_legendre(nodes);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut s = 0.0;
    for (x, w) in xs.iter().zip(&ws) {
        s += w * f(mid + half * x);
    }
    s * half
}

/// Breakpoints of the graded mesh on `[a, b]`, clustered toward `b`.
pub fn graded_breakpoints(a: f64, b: f64, rule: &QuadratureRule) -> Vec<f64> {
    let p = rule.panels;
    (0..=p)
        .map(|j| {
            let frac = 1.0 - (((p - j) as f64) / p as f64).powf(rule.grading_exponent);
            a + (b - a) * frac
        })
        .collect()
}

/// Composite integration of `f` over `[a, b]` with panels graded toward
/// `b` (where the integrands here are singular but integrable).
pub fn integrate_graded<F: Fn(f64) -> f64>(a: f64, b: f64, rule: &QuadratureRule, f: F) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (nodes, weights) = graded_nodes_weights(a, b, rule);
    nodes.iter().zip(&weights).map(|(x, w)| w * f(*x)).sum()
}

/// The flattened node/weight list of the graded composite rule, for
/// integrands too expensive to wrap in a closure (e.g. field-valued ones
/// accumulated in place).
pub fn graded_nodes_weights(a: f64, b: f64, rule: &QuadratureRule) -> (Vec<f64>, Vec<f64>) {
    if b <= a {
        return (Vec::new(), Vec::new());
    }
    let (xs, ws) = gauss_legendre(rule.nodes_per_panel);
    let bp = graded_breakpoints(a, b, rule);
    let mut nodes = Vec::with_capacity(rule.panels * rule.nodes_per_panel);
    let mut weights = Vec::with_capacity(nodes.capacity());
    for panel in bp.windows(2) {
        let mid = 0.5 * (panel[0] + panel[1]);
        let half = 0.5 * (panel[1] - panel[0]);
        for (x, w) in xs.iter().zip(&ws) {
            nodes.push(mid + half * x);
            weights.push(w * half);
        }
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_rule_is_exact_for_polynomials() {
        // n-point Gauss integrates degree 2n-1 exactly: x^7 on [0,1] with n=4.
        let v = integrate(0.0, 1.0, 4, |x| x.powi(7));
        assert_relative_eq!(v, 0.125, max_relative = 1e-14);
        let v2 = integrate(0.0, 1.0, 2, |x| x * x);
        assert_relative_eq!(v2, 1.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn sin_integral() {
        let v = integrate(0.0, std::f64::consts::PI, 12, f64::sin);
        assert_relative_eq!(v, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn graded_mesh_beats_uniform_on_endpoint_singularity() {
        // integral_0^1 (1-x)^{-1/2} dx = 2.  Graded panels tame the
        // singular endpoint far better than uniform ones, but plain
        // panel quadrature cannot be spectrally accurate against a
        // genuine power singularity: the singular scalar kernels in this
        // crate therefore go through a smoothing substitution instead,
        // and graded panels are reserved for smooth memory integrands.
        let f = |x: f64| (1.0 - x).max(1e-300).powf(-0.5);
        let graded = QuadratureRule {
            panels: 24,
            nodes_per_panel: 8,
            grading_exponent: 4.0,
        };
        let uniform = QuadratureRule {
            panels: 24,
            nodes_per_panel: 8,
            grading_exponent: 1.0,
        };
        let eg = (integrate_graded(0.0, 1.0, &graded, f) - 2.0).abs();
        let eu = (integrate_graded(0.0, 1.0, &uniform, f) - 2.0).abs();
        assert!(eg < 2e-3, "graded error {eg}");
        assert!(eg < eu / 20.0, "graded {eg} vs uniform {eu}");
    }

    #[test]
    fn breakpoints_cover_interval_and_cluster() {
        let rule = QuadratureRule {
            panels: 8,
            nodes_per_panel: 4,
            grading_exponent: 2.0,
        };
        let bp = graded_breakpoints(0.0, 1.0, &rule);
        assert_eq!(bp.len(), 9);
        assert_eq!(bp[0], 0.0);
        assert_relative_eq!(bp[8], 1.0, max_relative = 1e-15);
        // Panels shrink toward the right end.
        let first = bp[1] - bp[0];
        let last = bp[8] - bp[7];
        assert!(last < first);
        assert!(bp.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn weights_sum_to_interval_length() {
        for n in [1usize, 2, 3, 5, 8, 16, 32] {
            let (_, ws) = gauss_legendre(n);
            let s: f64 = ws.iter().sum();
            assert_relative_eq!(s, 2.0, max_relative = 1e-13);
        }
    }
}
