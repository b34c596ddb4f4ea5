//! Truncated power potentials: the primitive `phi_{k,m}` of `T_k(r)^{2m-1}`
//! and its spatial integral `Phi_{k,m}`.
//!
//! These drive the ladder inequalities: testing the weak form with
//! `(T_k u^+)^{2m-1}` turns the time-derivative pairing into the derivative
//! of `Phi_{k,m}(u^+)`, and the sandwich
//! `(1/2m) ||T_k u^+||_{2m}^{2m} <= Phi_{k,m}(u^+) <= (1/2m) ||u^+||_{2m}^{2m}`
//! converts potential bounds back into norm bounds.
//!
//! ```
//! use rdlab::potential::phi_km;
//!
//! // Below the truncation level the primitive is s^{2m}/(2m); above it,
//! // the affine continuation.
//! assert_eq!(phi_km(0.5, 1.0, 1.0)?, 0.125);
//! assert_eq!(phi_km(2.0, 1.0, 1.0)?, 1.5);
//! # Ok::<(), rdlab::Error>(())
//! ```

use crate::error::{Error, Result};
use crate::field::Field;

/// `phi_{k,m}(s) = int_0^s T_k(r)^{2m-1} dr` for `s >= 0`:
/// `s^{2m}/(2m)` below the truncation level, affine continuation above it.
pub fn phi_km(s: f64, k: f64, m: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::invalid(format!("phi_km needs s >= 0, got {s}")));
    }
    if !(k > 0.0) {
        return Err(Error::invalid(format!("phi_km needs k > 0, got {k}")));
    }
    if !(m >= 1.0) {
        return Err(Error::invalid(format!("phi_km needs m >= 1, got {m}")));
    }
    let two_m = 2.0 * m;
    if s <= k {
        Ok(s.powf(two_m) / two_m)
    } else {
        Ok(k.powf(two_m) / two_m + (s - k) * k.powf(two_m - 1.0))
    }
}

/// `Phi_{k,m}(u) = int_Omega phi_{k,m}(u(x)) dx` by collocation quadrature.
///
/// `phi_{k,m}` is only defined for nonnegative arguments, so `u` must be
/// nonnegative on nodes — pass `u.positive_part()` for signed fields.
pub fn big_phi(u: &Field, k: f64, m: f64) -> Result<f64> {
    if u.nodal().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("big_phi".to_string()));
    }
    if u.nodal().iter().any(|&v| v < 0.0) {
        return Err(Error::invalid(
            "big_phi needs a nonnegative field; take the positive part first",
        ));
    }
    let w = u.domain().node_weight();
    let mut acc = 0.0;
    for &v in u.nodal() {
        acc += phi_km(v, k, m)?;
    }
    Ok(w * acc)
}
