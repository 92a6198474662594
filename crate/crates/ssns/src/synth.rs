//! Analytic test fields: Gaussians, curl-of-Gaussian vortices, band-limited
//! noise, and compactly supported bump vortices with exact derivatives.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::field::{from_spectral, to_spectral, ScalarFieldP, VectorField};
use crate::grid::Grid;
use crate::ops;
use crate::Result;

/// `amplitude * exp(-pi |x - center|^2 / a)`.
pub fn gaussian_scalar(grid: Grid, a: f64, amplitude: f64, center: [f64; 3]) -> ScalarFieldP {
    ScalarFieldP::from_fn(grid, |x0, x1, x2| {
        let r2 = (x0 - center[0]).powi(2) + (x1 - center[1]).powi(2) + (x2 - center[2]).powi(2);
        amplitude * (-std::f64::consts::PI * r2 / a).exp()
    })
}

/// The scalar Gaussian embedded in component `axis` of a vector field.
pub fn gaussian_vector(grid: Grid, a: f64, amplitude: f64, axis: usize) -> VectorField {
    let g = gaussian_scalar(grid, a, amplitude, [0.0; 3]);
    let mut f = VectorField::zeros(grid);
    f.components[axis] = g.values;
    f
}

/// Divergence-free vortex `curl (0, 0, amplitude * exp(-pi |y|^2 / a))`.
///
/// The curl is taken spectrally so the discrete divergence vanishes to
/// roundoff (sampling the analytic curl leaves an O(h^2)-ish defect that
/// violates solenoidality preconditions downstream).  Closed forms used in
/// tests: `||V||_2^2 = A^2 pi sqrt(a) / sqrt(2)` and
/// `||V||_4 = A (pi^2/4)^(1/4) a^(-1/8)`.
pub fn gaussian_vortex(grid: Grid, a: f64, amplitude: f64) -> VectorField {
    let psi = gaussian_scalar(grid, a, amplitude, [0.0; 3]);
    let gp = ops::gradient_scalar(&psi).expect("gaussian potential is finite");
    // curl (0,0,psi) = (d_1 psi, -d_0 psi, 0)
    VectorField {
        grid,
        components: [
            gp.components[1].clone(),
            gp.components[0].iter().map(|v| -v).collect(),
            vec![0.0; grid.len()],
        ],
    }
}

/// `amplitude * cos(2 pi k.x / L + phase)` in component `axis`.
pub fn single_harmonic(
    grid: Grid,
    k: [i64; 3],
    axis: usize,
    amplitude: f64,
    phase: f64,
) -> VectorField {
    let l = grid.box_side;
    let mut f = VectorField::zeros(grid);
    let s = ScalarFieldP::from_fn(grid, |x0, x1, x2| {
        let arg = 2.0 * std::f64::consts::PI * (k[0] as f64 * x0 + k[1] as f64 * x1 + k[2] as f64 * x2)
            / l
            + phase;
        amplitude * arg.cos()
    });
    f.components[axis] = s.values;
    f
}

/// Classical cellular vortex, exactly periodic and divergence-free:
/// `(sin X cos Y cos Z, -cos X sin Y cos Z, 0)` with `X = 2 pi x0 / L` etc.
pub fn taylor_green(grid: Grid, amplitude: f64) -> VectorField {
    let l = grid.box_side;
    let w = 2.0 * std::f64::consts::PI / l;
    VectorField::from_fn(grid, |x0, x1, x2| {
        let (sx, cx) = (w * x0).sin_cos();
        let (sy, cy) = (w * x1).sin_cos();
        let cz = (w * x2).cos();
        [amplitude * sx * cy * cz, -amplitude * cx * sy * cz, 0.0]
    })
}

/// Random field band-limited to `|k_j| <= band * n/2`, optionally projected
/// divergence-free, then rescaled to the requested L^2 norm.  Deterministic
/// in `seed`.
pub fn random_bandlimited(
    grid: Grid,
    seed: u64,
    band: f64,
    div_free: bool,
    l2_amplitude: f64,
) -> Result<VectorField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = VectorField::zeros(grid);
    for c in &mut f.components {
        for v in c.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
    }
    let mut fh = to_spectral(&f);
    let kmax = (band * (grid.n / 2) as f64).floor() as i64;
    let n = grid.n;
    for comp in &mut fh.components {
        for i0 in 0..n {
            for i1 in 0..n {
                for i2 in 0..n {
                    let keep = grid.signed_k(i0).abs() <= kmax
                        && grid.signed_k(i1).abs() <= kmax
                        && grid.signed_k(i2).abs() <= kmax
                        && !grid.is_nyquist(i0)
                        && !grid.is_nyquist(i1)
                        && !grid.is_nyquist(i2);
                    if !keep {
                        comp[grid.idx(i0, i1, i2)] = num_complex::Complex64::new(0.0, 0.0);
                    }
                }
            }
        }
    }
    if div_free {
        ops::leray_spectral(&mut fh);
    }
    let mut out = from_spectral(&fh);
    let nrm = ops::l2_norm(&out);
    if nrm > 0.0 {
        out = out.scaled(l2_amplitude / nrm);
    }
    Ok(out)
}

/// Compactly supported, divergence-free vortex built from a tensor-product
/// bump: `phi = grad B x c` with `B(x) = prod_i eta((x_i - center_i)/radius)`
/// and `eta(u) = exp(-sharpness / (1 - u^2))` on `|u| < 1`, zero outside.
///
/// All derivatives up to the vector Laplacian are available in closed form,
/// which keeps integration-by-parts identities independent of any spectral
/// differentiation of `phi`.
#[derive(Debug, Clone, Copy)]
pub struct BumpVortex {
    pub center: [f64; 3],
    pub radius: f64,
    pub sharpness: f64,
    pub direction: [f64; 3],
}

/// Value of eta and its first three derivatives at `u`, all zero for
/// `|u| >= 1` (and already below double-precision underflow well inside).
fn eta_chain(u: f64, a: f64) -> [f64; 4] {
    let s = 1.0 - u * u;
    if s <= 1e-3 {
        return [0.0; 4];
    }
    let eta = (-a / s).exp();
    let si = 1.0 / s;
    let w = -2.0 * a * u * si * si;
    let wp = -2.0 * a * (1.0 + 3.0 * u * u) * si * si * si;
    let wpp = -24.0 * a * u * (1.0 + u * u) * si * si * si * si;
    [
        eta,
        w * eta,
        (wp + w * w) * eta,
        (wpp + 3.0 * w * wp + w * w * w) * eta,
    ]
}

impl BumpVortex {
    /// Three fixed parameter sets used as golden test functions.
    pub fn goldens(box_side: f64) -> Vec<BumpVortex> {
        let r = box_side / 8.0;
        vec![
            BumpVortex {
                center: [0.0, 0.0, 0.0],
                radius: r,
                sharpness: 4.0,
                direction: [0.0, 0.0, 1.0],
            },
            BumpVortex {
                center: [r * 0.5, -r * 0.25, 0.0],
                radius: r,
                sharpness: 4.0,
                direction: [1.0, 1.0, 0.0],
            },
            BumpVortex {
                center: [-r * 0.5, 0.0, r * 0.5],
                radius: r * 0.75,
                sharpness: 4.0,
                direction: [0.0, 1.0, -1.0],
            },
        ]
    }

    /// Per-axis eta chains at the rescaled coordinates; None if outside.
    fn chains(&self, x: [f64; 3]) -> [[f64; 4]; 3] {
        let mut out = [[0.0; 4]; 3];
        for i in 0..3 {
            out[i] = eta_chain((x[i] - self.center[i]) / self.radius, self.sharpness);
        }
        out
    }

    /// `phi(x) = grad B x c`.
    pub fn eval(&self, x: [f64; 3]) -> [f64; 3] {
        let ch = self.chains(x);
        let ri = 1.0 / self.radius;
        // grad B: dB_i = eta'(u_i)/R * prod_{j != i} eta(u_j)
        let mut db = [0.0; 3];
        for i in 0..3 {
            let mut v = ch[i][1] * ri;
            for j in 0..3 {
                if j != i {
                    v *= ch[j][0];
                }
            }
            db[i] = v;
        }
        cross(db, self.direction)
    }

    /// Jacobian `J[i][m] = d_i phi_m`.
    pub fn eval_grad(&self, x: [f64; 3]) -> [[f64; 3]; 3] {
        let ch = self.chains(x);
        let ri = 1.0 / self.radius;
        // Hessian of B.
        let mut hess = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let mut v;
                if i == j {
                    v = ch[i][2] * ri * ri;
                    for m in 0..3 {
                        if m != i {
                            v *= ch[m][0];
                        }
                    }
                } else {
                    v = ch[i][1] * ch[j][1] * ri * ri;
                    for m in 0..3 {
                        if m != i && m != j {
                            v *= ch[m][0];
                        }
                    }
                }
                hess[i][j] = v;
            }
        }
        // d_i phi_m = (d_i grad B x c)_m: cross each Hessian row with c.
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            out[i] = cross(hess[i], self.direction);
        }
        out
    }

    /// Vector Laplacian `(lap phi)_m = (grad(lap B) x c)_m`.
    pub fn eval_lap(&self, x: [f64; 3]) -> [f64; 3] {
        let ch = self.chains(x);
        let r3 = self.radius.powi(3);
        // d_j lap B = [eta'''(u_j) prod_{m!=j} eta
        //              + eta'(u_j) sum_{i!=j} eta''(u_i) prod_{m!=i,j} eta] / R^3
        let mut glap = [0.0; 3];
        for j in 0..3 {
            let mut t1 = ch[j][3];
            for m in 0..3 {
                if m != j {
                    t1 *= ch[m][0];
                }
            }
            let mut t2 = 0.0;
            for i in 0..3 {
                if i == j {
                    continue;
                }
                let mut t = ch[i][2];
                for m in 0..3 {
                    if m != i && m != j {
                        t *= ch[m][0];
                    }
                }
                t2 += t;
            }
            glap[j] = (t1 + ch[j][1] * t2) / r3;
        }
        cross(glap, self.direction)
    }

    /// Sample the bump field on a grid.
    pub fn sample(&self, grid: Grid) -> VectorField {
        VectorField::from_fn(grid, |x0, x1, x2| self.eval([x0, x1, x2]))
    }

    /// True if the support cube fits strictly inside the periodic box.
    pub fn fits(&self, grid: &Grid) -> bool {
        let half = grid.box_side / 2.0;
        (0..3).all(|i| self.center[i].abs() + self.radius < half)
    }
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn vortex_is_solenoidal_to_roundoff() {
        let g = Grid::new(32, 12.0).unwrap();
        let v = gaussian_vortex(g, 2.0, 1.0);
        assert!(ops::div_rel(&v).unwrap() < 1e-12);
    }

    #[test]
    fn taylor_green_is_solenoidal() {
        let g = Grid::new(16, 2.0).unwrap();
        let v = taylor_green(g, 1.0);
        assert!(ops::div_rel(&v).unwrap() < 1e-12);
    }

    #[test]
    fn bump_gradient_matches_finite_differences() {
        let b = BumpVortex::goldens(16.0).remove(1);
        let x = [0.3, -0.2, 0.5];
        let eps = 1e-5;
        let j = b.eval_grad(x);
        for i in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += eps;
            xm[i] -= eps;
            let fp = b.eval(xp);
            let fm = b.eval(xm);
            for m in 0..3 {
                let fd = (fp[m] - fm[m]) / (2.0 * eps);
                assert_relative_eq!(j[i][m], fd, epsilon = 1e-6, max_relative = 1e-5);
            }
        }
    }

    #[test]
    fn bump_laplacian_matches_finite_differences() {
        let b = BumpVortex::goldens(16.0).remove(0);
        let x = [0.4, 0.1, -0.3];
        let eps = 1e-4;
        let lap = b.eval_lap(x);
        for m in 0..3 {
            let mut fd = 0.0;
            for i in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[i] += eps;
                xm[i] -= eps;
                fd += (b.eval(xp)[m] - 2.0 * b.eval(x)[m] + b.eval(xm)[m]) / (eps * eps);
            }
            assert_relative_eq!(lap[m], fd, epsilon = 1e-5, max_relative = 1e-5);
        }
    }

    #[test]
    fn bump_divergence_is_zero_analytically() {
        // div(grad B x c) = 0 pointwise: check trace of the Jacobian.
        for b in BumpVortex::goldens(16.0) {
            for x in [[0.1, 0.2, 0.3], [-0.5, 0.4, 0.0], [0.9, -0.8, 0.7]] {
                let j = b.eval_grad(x);
                let div = j[0][0] + j[1][1] + j[2][2];
                assert!(div.abs() < 1e-12, "div {div}");
            }
        }
    }

    #[test]
    fn bump_vanishes_outside_support() {
        let b = BumpVortex {
            center: [0.0; 3],
            radius: 1.0,
            sharpness: 4.0,
            direction: [0.0, 0.0, 1.0],
        };
        for x in [[1.0, 0.0, 0.0], [0.0, -1.2, 0.0], [2.0, 2.0, 2.0]] {
            assert_eq!(b.eval(x), [0.0; 3]);
            assert_eq!(b.eval_lap(x), [0.0; 3]);
        }
    }
}
