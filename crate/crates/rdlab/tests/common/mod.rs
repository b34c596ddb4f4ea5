//! Shared fixtures and independent oracles for the acceptance suite.
//!
//! The shooting oracle counts Chafee-Infante equilibria by integrating the
//! stationary ODE `z'' = z^3 - lambda z` from `z(0) = 0, z'(0) = s` and
//! counting roots of `s -> z(pi; s)`. It never touches the spectral Newton
//! solver it is used to audit.

use std::f64::consts::PI;

/// `z(pi; s)` for the stationary Chafee-Infante ODE, RK4 with a fixed fine
/// step. Early blow-up returns the (huge) current value, whose sign is all
/// the root counting needs.
pub fn shoot_endpoint(lambda: f64, slope: f64) -> f64 {
    let steps = 4000usize;
    let h = PI / steps as f64;
    let f = |z: f64, w: f64| (w, z * z * z - lambda * z);
    let mut z = 0.0f64;
    let mut w = slope;
    for _ in 0..steps {
        let (k1z, k1w) = f(z, w);
        let (k2z, k2w) = f(z + 0.5 * h * k1z, w + 0.5 * h * k1w);
        let (k3z, k3w) = f(z + 0.5 * h * k2z, w + 0.5 * h * k2w);
        let (k4z, k4w) = f(z + h * k3z, w + h * k3w);
        z += h / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z);
        w += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
        if z.abs() > 1e8 {
            return z;
        }
    }
    z
}

/// Positive shooting slopes where `z(pi; s)` changes sign (each is a
/// distinct nontrivial equilibrium branch; the sign-symmetric partners and
/// the origin complete the count).
pub fn positive_roots(lambda: f64) -> Vec<f64> {
    let s_max = (lambda * lambda / 2.0).sqrt().max(1.0) * 1.5;
    let n = 6000usize;
    let mut roots = Vec::new();
    let mut prev_s = s_max * 1e-4 / n as f64;
    let mut prev = shoot_endpoint(lambda, prev_s);
    for i in 1..=n {
        let s = s_max * i as f64 / n as f64;
        let val = shoot_endpoint(lambda, s);
        if prev != 0.0 && val != 0.0 && prev.signum() != val.signum() {
            // Bisect the bracket.
            let (mut lo, mut hi) = (prev_s, s);
            let mut flo = prev;
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let fm = shoot_endpoint(lambda, mid);
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        prev_s = s;
        prev = val;
    }
    roots
}

/// Total equilibria count for the Dirichlet problem on `(0, pi)`:
/// the origin plus a sign-symmetric pair per positive root.
pub fn oracle_equilibria_count(lambda: f64) -> usize {
    1 + 2 * positive_roots(lambda).len()
}

/// Sup-norm amplitude of the mode-1 (positive) equilibrium: integrate the
/// largest-slope branch and take the max of `z`.
pub fn oracle_amplitude(lambda: f64) -> f64 {
    let roots = positive_roots(lambda);
    let s = *roots
        .last()
        .expect("amplitude requested below the first bifurcation");
    let steps = 4000usize;
    let h = PI / steps as f64;
    let f = |z: f64, w: f64| (w, z * z * z - lambda * z);
    let mut z = 0.0f64;
    let mut w = s;
    let mut amp = 0.0f64;
    for _ in 0..steps {
        let (k1z, k1w) = f(z, w);
        let (k2z, k2w) = f(z + 0.5 * h * k1z, w + 0.5 * h * k1w);
        let (k3z, k3w) = f(z + 0.5 * h * k2z, w + 0.5 * h * k2w);
        let (k4z, k4w) = f(z + h * k3z, w + h * k3w);
        z += h / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z);
        w += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
        amp = amp.max(z.abs());
    }
    amp
}
