//! Dirichlet-zero scalar fields stored as sine coefficients with a lazily
//! materialized nodal view.
//!
//! The sine basis makes the zero boundary trace automatic and keeps the
//! Laplacian diagonal. Nonlinear quantities (`|u|^m`, truncations, reaction
//! terms) are evaluated on the collocation grid; with equal node weights the
//! nodal quadrature coincides with the exact integral for every bandlimited
//! bilinear quantity (discrete Parseval).
//!
//! ```
//! use rdlab::{BoxDomain, Field};
//!
//! let domain = BoxDomain::interval_pi(31)?;
//! let u = Field::mode(&domain, &[1], 1.0)?; // sin(x)
//!
//! // The collocation quadrature is exact on bandlimited squares:
//! assert!((u.lp_norm(2.0)? - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-12);
//! assert!((u.lp_norm(f64::INFINITY)? - 1.0).abs() < 1e-12);
//!
//! // Truncation clamps on nodes and is exactly idempotent there:
//! let t = u.truncate(0.5)?;
//! assert_eq!(t.nodal(), t.truncate(0.5)?.nodal());
//! assert!(t.linf_nodal() <= 0.5);
//! # Ok::<(), rdlab::Error>(())
//! ```

use once_cell::sync::OnceCell;

use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::sine;

#[derive(Debug, Clone)]
pub struct Field {
    domain: BoxDomain,
    coeffs: Vec<f64>,
    nodal: OnceCell<Vec<f64>>,
}

impl Field {
    pub fn zeros(domain: &BoxDomain) -> Field {
        Field {
            domain: domain.clone(),
            coeffs: vec![0.0; domain.node_count()],
            nodal: OnceCell::new(),
        }
    }

    pub fn from_coeffs(domain: &BoxDomain, coeffs: Vec<f64>) -> Result<Field> {
        if coeffs.len() != domain.node_count() {
            return Err(Error::invalid(format!(
                "coefficient count {} does not match domain ({} modes)",
                coeffs.len(),
                domain.node_count()
            )));
        }
        Ok(Field {
            domain: domain.clone(),
            coeffs,
            nodal: OnceCell::new(),
        })
    }

    /// Build a field from nodal values; the given values become the nodal
    /// cache verbatim, so pointwise constructions (truncation, positive
    /// part) are exact on nodes.
    pub fn from_nodal(domain: &BoxDomain, nodal: Vec<f64>) -> Result<Field> {
        if nodal.len() != domain.node_count() {
            return Err(Error::invalid(format!(
                "nodal count {} does not match domain ({} nodes)",
                nodal.len(),
                domain.node_count()
            )));
        }
        let coeffs = sine::nodal_to_coeffs(&nodal, domain.resolution());
        let field = Field {
            domain: domain.clone(),
            coeffs,
            nodal: OnceCell::new(),
        };
        let _ = field.nodal.set(nodal);
        Ok(field)
    }

    /// Sample a closure on the interior grid.
    pub fn from_fn(domain: &BoxDomain, f: impl Fn(&[f64]) -> f64) -> Field {
        let mut nodal = Vec::with_capacity(domain.node_count());
        match domain.dim() {
            1 => {
                for i in 0..domain.resolution()[0] {
                    nodal.push(f(&domain.node(&[i])));
                }
            }
            2 => {
                for i in 0..domain.resolution()[0] {
                    for j in 0..domain.resolution()[1] {
                        nodal.push(f(&domain.node(&[i, j])));
                    }
                }
            }
            _ => unreachable!(),
        }
        Field::from_nodal(domain, nodal).expect("shape agrees by construction")
    }

    /// The pure sine mode with one-based multi-index `mode`.
    pub fn mode(domain: &BoxDomain, mode: &[usize], amplitude: f64) -> Result<Field> {
        if mode.len() != domain.dim() {
            return Err(Error::invalid("mode arity does not match domain"));
        }
        if mode.iter().zip(domain.resolution()).any(|(&j, &n)| j < 1 || j > n) {
            return Err(Error::invalid("mode index outside retained band"));
        }
        let mut f = Field::zeros(domain);
        let flat = match *mode {
            [j] => j - 1,
            [j1, j2] => (j1 - 1) * domain.resolution()[1] + (j2 - 1),
            _ => unreachable!(),
        };
        f.coeffs[flat] = amplitude;
        Ok(f)
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Nodal values on the interior grid (computed once, then cached).
    pub fn nodal(&self) -> &[f64] {
        self.nodal
            .get_or_init(|| sine::coeffs_to_nodal(&self.coeffs, self.domain.resolution()))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|v| v.is_finite())
    }

    fn check_nodal_finite(&self, what: &str) -> Result<&[f64]> {
        let nodal = self.nodal();
        if nodal.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(what.to_string()));
        }
        Ok(nodal)
    }

    fn same_domain(&self, other: &Field) -> Result<()> {
        if self.domain != other.domain {
            return Err(Error::DomainMismatch);
        }
        Ok(())
    }

    // ---- linear algebra ----------------------------------------------------

    pub fn scaled(&self, a: f64) -> Field {
        let coeffs = self.coeffs.iter().map(|c| a * c).collect();
        Field {
            domain: self.domain.clone(),
            coeffs,
            nodal: OnceCell::new(),
        }
    }

    /// `a * self + b * other`.
    pub fn lin(&self, a: f64, other: &Field, b: f64) -> Result<Field> {
        self.same_domain(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Field {
            domain: self.domain.clone(),
            coeffs,
            nodal: OnceCell::new(),
        })
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.lin(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.lin(1.0, other, -1.0)
    }

    // ---- inner products and norms ------------------------------------------

    /// `(u, v)_{L^2}` via coefficients (exact for bandlimited fields).
    pub fn l2_inner(&self, other: &Field) -> Result<f64> {
        self.same_domain(other)?;
        let dot: f64 = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(x, y)| x * y)
            .sum();
        Ok(self.domain.mode_mass() * dot)
    }

    /// `(u, v)_{H_0^1} = (grad u, grad v)` via the diagonal Laplacian.
    pub fn h1_inner(&self, other: &Field) -> Result<f64> {
        self.same_domain(other)?;
        let evs = self.domain.mode_eigenvalues();
        let dot: f64 = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .zip(&evs)
            .map(|((x, y), l)| l * x * y)
            .sum();
        Ok(self.domain.mode_mass() * dot)
    }

    /// Nodal quadrature of `u v` — used where one factor is not bandlimited.
    pub fn quad_inner(&self, other: &Field) -> Result<f64> {
        self.same_domain(other)?;
        let w = self.domain.node_weight();
        let dot: f64 = self
            .nodal()
            .iter()
            .zip(other.nodal())
            .map(|(x, y)| x * y)
            .sum();
        Ok(w * dot)
    }

    pub fn l2_norm(&self) -> f64 {
        let dot: f64 = self.coeffs.iter().map(|c| c * c).sum();
        (self.domain.mode_mass() * dot).sqrt()
    }

    pub fn h1_seminorm(&self) -> f64 {
        let evs = self.domain.mode_eigenvalues();
        let dot: f64 = self
            .coeffs
            .iter()
            .zip(&evs)
            .map(|(c, l)| l * c * c)
            .sum();
        (self.domain.mode_mass() * dot).sqrt()
    }

    pub fn l2_distance(&self, other: &Field) -> Result<f64> {
        Ok(self.sub(other)?.l2_norm())
    }

    /// Nodal max-abs; a lower bound on the true sup-norm (the field may peak
    /// between nodes).
    pub fn linf_nodal(&self) -> f64 {
        self.nodal().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `L^m` norm by collocation quadrature; `m = f64::INFINITY` gives the
    /// nodal max-abs.
    pub fn lp_norm(&self, m: f64) -> Result<f64> {
        if m.is_nan() || m < 1.0 {
            return Err(Error::invalid(format!("L^m norm needs m >= 1, got {m}")));
        }
        let nodal = self.check_nodal_finite("lp_norm")?;
        if m.is_infinite() {
            return Ok(nodal.iter().fold(0.0, |acc: f64, v| acc.max(v.abs())));
        }
        let w = self.domain.node_weight();
        // Factor out the peak so |u|^m cannot overflow for large m.
        let peak = nodal.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()));
        if peak == 0.0 {
            return Ok(0.0);
        }
        let sum: f64 = nodal.iter().map(|v| (v.abs() / peak).powf(m)).sum();
        Ok(peak * (w * sum).powf(1.0 / m))
    }

    // ---- pointwise operations ----------------------------------------------

    /// Apply a scalar map on the nodal view.
    pub fn map_nodal(&self, f: impl Fn(f64) -> f64) -> Field {
        let nodal = self.nodal().iter().map(|&v| f(v)).collect();
        Field::from_nodal(&self.domain, nodal).expect("shape preserved")
    }

    /// Truncation at level `k`: nodal clamp to `[-k, k]`.
    pub fn truncate(&self, k: f64) -> Result<Field> {
        if !(k > 0.0) {
            return Err(Error::invalid(format!("truncation level must be > 0, got {k}")));
        }
        Ok(self.map_nodal(|v| v.clamp(-k, k)))
    }

    /// `u^+ = max(u, 0)` on nodes.
    pub fn positive_part(&self) -> Field {
        self.map_nodal(|v| v.max(0.0))
    }

    /// `u^- = -min(u, 0)` on nodes, so `u = u^+ - u^-` pointwise.
    pub fn negative_part(&self) -> Field {
        self.map_nodal(|v| -v.min(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn interval(n: usize) -> BoxDomain {
        BoxDomain::interval_pi(n).unwrap()
    }

    #[test]
    fn zero_field_has_zero_norms() {
        let u = Field::zeros(&interval(16));
        assert_eq!(u.lp_norm(4.0).unwrap(), 0.0);
        assert_eq!(u.lp_norm(f64::INFINITY).unwrap(), 0.0);
        assert_eq!(u.l2_norm(), 0.0);
    }

    #[test]
    fn sine_l2_norm_matches_closed_form() {
        // int_0^pi sin^2 = pi/2, and the collocation quadrature is exact here.
        let u = Field::mode(&interval(15), &[1], 1.0).unwrap();
        let expect = (PI / 2.0).sqrt();
        assert!((u.lp_norm(2.0).unwrap() - expect).abs() < 1e-12);
        assert!((u.l2_norm() - expect).abs() < 1e-12);
    }

    #[test]
    fn sine_sup_norm_is_one_on_odd_grids() {
        // n odd puts a node at x = pi/2.
        let u = Field::mode(&interval(15), &[1], 1.0).unwrap();
        assert!((u.lp_norm(f64::INFINITY).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn positive_part_of_second_mode() {
        // u = sin(2x) is positive on (0, pi/2): ||u^+||_2^2 = pi/4.
        let u = Field::mode(&interval(15), &[2], 1.0).unwrap();
        let plus = u.positive_part();
        let sq = plus.lp_norm(2.0).unwrap().powi(2);
        assert!((sq - PI / 4.0).abs() < 1e-12, "got {sq}");
    }

    #[test]
    fn parts_reassemble_pointwise() {
        let u = Field::from_fn(&interval(24), |x| (3.0 * x[0]).sin() - 0.4);
        let back = u.positive_part().sub(&u.negative_part()).unwrap();
        for (a, b) in u.nodal().iter().zip(back.nodal()) {
            assert!((a - b).abs() < 1e-12);
        }
        let neg = Field::from_fn(&interval(24), |_| -1.0);
        assert!(neg.positive_part().linf_nodal() < 1e-15);
        assert!((neg.negative_part().linf_nodal() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn truncate_clamps_and_is_idempotent() {
        let dom = interval(16);
        let c3 = Field::from_fn(&dom, |_| 3.0);
        let t = c3.truncate(2.0).unwrap();
        assert!(t.nodal().iter().all(|&v| (v - 2.0).abs() < 1e-15));
        let u = Field::from_fn(&dom, |x| 2.5 * (x[0]).sin() - 1.2);
        let t1 = u.truncate(0.8).unwrap();
        let t2 = t1.truncate(0.8).unwrap();
        assert_eq!(t1.nodal(), t2.nodal());
        // Below-level truncation is the identity on nodes.
        let small = Field::from_fn(&dom, |_| -0.5);
        let ts = small.truncate(1.0).unwrap();
        for (a, b) in small.nodal().iter().zip(ts.nodal()) {
            assert!((a - b).abs() < 1e-15);
        }
        // k at or above the sup returns the field unchanged.
        let k = u.linf_nodal();
        let tu = u.truncate(k).unwrap();
        for (a, b) in u.nodal().iter().zip(tu.nodal()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(u.truncate(0.0).is_err());
    }

    #[test]
    fn rejects_non_finite_nodal_values() {
        let dom = interval(8);
        let mut coeffs = vec![0.0; 8];
        coeffs[0] = f64::NAN;
        let u = Field::from_coeffs(&dom, coeffs).unwrap();
        assert!(matches!(u.lp_norm(2.0), Err(Error::NonFinite(_))));
    }

    #[test]
    fn domain_mismatch_is_an_error() {
        let a = Field::zeros(&interval(8));
        let b = Field::zeros(&interval(16));
        assert!(matches!(a.add(&b), Err(Error::DomainMismatch)));
    }

    #[test]
    fn holder_inequality_between_norms() {
        let dom = interval(32);
        let u = Field::from_fn(&dom, |x| (2.0 * x[0]).sin() + 0.3 * (5.0 * x[0]).sin());
        for &(m, q) in &[(1.0, 2.0), (2.0, 4.0), (2.0, 8.0), (4.0, f64::INFINITY)] {
            let lm = u.lp_norm(m).unwrap();
            let lq = u.lp_norm(q).unwrap();
            let vol = dom.measure();
            let cap = if q.is_infinite() {
                vol.powf(1.0 / m) * lq
            } else {
                vol.powf(1.0 / m - 1.0 / q) * lq
            };
            assert!(lm <= cap * (1.0 + 1e-10), "m={m} q={q}: {lm} vs {cap}");
        }
    }
}
