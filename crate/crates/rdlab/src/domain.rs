//! Box domains with homogeneous Dirichlet boundary.
//!
//! Working on boxes keeps the Dirichlet Laplacian fully explicit: the
//! eigenfunctions are tensor products of sines and the eigenvalues are
//! `sum_i (j_i pi / l_i)^2`. Everything downstream (exact modal diffusion,
//! spectral gaps for the dimension bound) leans on that.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible per-axis interior node count.
pub const MIN_RESOLUTION: usize = 8;

/// An axis-aligned box `(0, l_1) x ... x (0, l_d)` with a uniform interior
/// collocation grid of `n_i` nodes per axis.
///
/// Only `d = 1` and `d = 2` grids are supported; higher-dimensional constants
/// are still exercised analytically by the ladder and dimension modules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    lengths: Vec<f64>,
    resolution: Vec<usize>,
}

impl BoxDomain {
    pub fn new(lengths: &[f64], resolution: &[usize]) -> Result<Self> {
        if lengths.is_empty() || lengths.len() > 2 {
            return Err(Error::invalid(format!(
                "domain dimension must be 1 or 2, got {}",
                lengths.len()
            )));
        }
        if lengths.len() != resolution.len() {
            return Err(Error::invalid(
                "lengths and resolution must have the same arity",
            ));
        }
        if lengths.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::invalid("all box lengths must be positive"));
        }
        if resolution.iter().any(|&n| n < MIN_RESOLUTION) {
            return Err(Error::invalid(format!(
                "resolution must be at least {MIN_RESOLUTION} nodes per axis"
            )));
        }
        Ok(BoxDomain {
            lengths: lengths.to_vec(),
            resolution: resolution.to_vec(),
        })
    }

    /// The unit interval `(0, pi)` — the Chafee-Infante model domain, where
    /// the Laplacian eigenvalues are exactly `1, 4, 9, ...`.
    pub fn interval_pi(n: usize) -> Result<Self> {
        BoxDomain::new(&[std::f64::consts::PI], &[n])
    }

    pub fn dim(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    /// Total number of interior nodes (= number of retained sine modes).
    pub fn node_count(&self) -> usize {
        self.resolution.iter().product()
    }

    /// Grid spacing along `axis`: `l / (n + 1)`.
    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / (self.resolution[axis] + 1) as f64
    }

    /// Quadrature weight of one interior node, `prod_i h_i`.
    pub fn node_weight(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    /// Lebesgue measure of the box.
    pub fn measure(&self) -> f64 {
        self.lengths.iter().product()
    }

    /// `L^2` normalization of the raw sine coefficients:
    /// `(u, v)_{L^2} = mode_mass * sum_j c_j d_j`.
    pub fn mode_mass(&self) -> f64 {
        self.lengths.iter().map(|l| l / 2.0).product()
    }

    /// Coordinates of the interior node with per-axis indices `idx`
    /// (zero-based).
    pub fn node(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .enumerate()
            .map(|(a, &i)| (i + 1) as f64 * self.spacing(a))
            .collect()
    }

    /// Dirichlet Laplacian eigenvalue of the sine mode with one-based
    /// multi-index `mode`.
    pub fn eigenvalue(&self, mode: &[usize]) -> f64 {
        mode.iter()
            .zip(&self.lengths)
            .map(|(&j, &l)| {
                let k = j as f64 * std::f64::consts::PI / l;
                k * k
            })
            .sum()
    }

    /// Eigenvalues of every retained mode, in row-major coefficient order.
    pub fn mode_eigenvalues(&self) -> Vec<f64> {
        match self.dim() {
            1 => (1..=self.resolution[0])
                .map(|j| self.eigenvalue(&[j]))
                .collect(),
            2 => {
                let (n1, n2) = (self.resolution[0], self.resolution[1]);
                let mut out = Vec::with_capacity(n1 * n2);
                for j1 in 1..=n1 {
                    for j2 in 1..=n2 {
                        out.push(self.eigenvalue(&[j1, j2]));
                    }
                }
                out
            }
            _ => unreachable!("dimension checked at construction"),
        }
    }

    /// Smallest Dirichlet eigenvalue `lambda_1`.
    pub fn lambda_1(&self) -> f64 {
        self.eigenvalue(&vec![1; self.dim()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_arity_and_sizes() {
        assert!(BoxDomain::new(&[1.0, 1.0, 1.0], &[8, 8, 8]).is_err());
        assert!(BoxDomain::new(&[1.0], &[8, 8]).is_err());
        assert!(BoxDomain::new(&[0.0], &[8]).is_err());
        assert!(BoxDomain::new(&[1.0], &[7]).is_err());
    }

    #[test]
    fn interval_eigenvalues_are_squares() {
        let dom = BoxDomain::interval_pi(15).unwrap();
        assert!((dom.eigenvalue(&[1]) - 1.0).abs() < 1e-14);
        assert!((dom.eigenvalue(&[3]) - 9.0).abs() < 1e-14);
        assert!((dom.lambda_1() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn square_domain_bookkeeping() {
        let dom = BoxDomain::new(&[std::f64::consts::PI; 2], &[8, 16]).unwrap();
        assert_eq!(dom.node_count(), 128);
        assert!((dom.eigenvalue(&[1, 1]) - 2.0).abs() < 1e-14);
        assert!((dom.measure() - std::f64::consts::PI.powi(2)).abs() < 1e-12);
        let evs = dom.mode_eigenvalues();
        assert_eq!(evs.len(), 128);
        assert!((evs[0] - 2.0).abs() < 1e-14);
    }
}
