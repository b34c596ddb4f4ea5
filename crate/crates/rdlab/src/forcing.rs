//! Forcing terms for the right-hand side `g`.

use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::field::Field;

/// Time-independent forcing with its integrability bookkeeping.
#[derive(Debug, Clone)]
pub struct ForcingSpec {
    field: Field,
    /// Integrability exponent tag `s` (the hypothesis asks `g in L^s`).
    s_exponent: f64,
    norm_s: f64,
    norm_2: f64,
}

impl ForcingSpec {
    pub fn new(field: Field, s_exponent: f64) -> Result<ForcingSpec> {
        if !(s_exponent >= 1.0) {
            return Err(Error::invalid("forcing exponent s must be >= 1"));
        }
        let norm_s = field.lp_norm(s_exponent)?;
        let norm_2 = field.l2_norm();
        Ok(ForcingSpec {
            field,
            s_exponent,
            norm_s,
            norm_2,
        })
    }

    pub fn zero(domain: &BoxDomain) -> ForcingSpec {
        ForcingSpec::new(Field::zeros(domain), 2.0).expect("zero field is valid")
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn s_exponent(&self) -> f64 {
        self.s_exponent
    }

    pub fn norm_s(&self) -> f64 {
        self.norm_s
    }

    pub fn norm_2(&self) -> f64 {
        self.norm_2
    }

    pub fn is_zero(&self) -> bool {
        self.field.coeffs().iter().all(|&c| c == 0.0)
    }

    /// Check the integrability tag against the weaker hypothesis
    /// (`s > d/2` for `d >= 2`, `s >= 1` for `d = 1`).
    pub fn satisfies_weak_regime(&self) -> bool {
        let d = self.field.domain().dim() as f64;
        if d >= 2.0 {
            self.s_exponent > d / 2.0
        } else {
            self.s_exponent >= 1.0
        }
    }

    /// Check the stronger hypothesis used for the structure theorem
    /// (`s = 2` suffices for `d <= 3`; `s > d/2` for `d >= 4`).
    pub fn satisfies_strong_regime(&self) -> bool {
        let d = self.field.domain().dim() as f64;
        if d <= 3.0 {
            self.s_exponent >= 2.0
        } else {
            self.s_exponent > d / 2.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_forcing_has_zero_norms() {
        let dom = BoxDomain::interval_pi(8).unwrap();
        let g = ForcingSpec::zero(&dom);
        assert!(g.is_zero());
        assert_eq!(g.norm_2(), 0.0);
        assert!(g.satisfies_weak_regime());
        assert!(g.satisfies_strong_regime());
    }

    #[test]
    fn regimes_depend_on_dimension_and_exponent() {
        let dom2 = BoxDomain::new(&[1.0, 1.0], &[8, 8]).unwrap();
        let g = ForcingSpec::new(Field::zeros(&dom2), 1.0).unwrap();
        assert!(!g.satisfies_weak_regime()); // needs s > 1 for d = 2
        assert!(!g.satisfies_strong_regime());
        let g = ForcingSpec::new(Field::zeros(&dom2), 2.0).unwrap();
        assert!(g.satisfies_weak_regime());
        assert!(g.satisfies_strong_regime());
        assert!(ForcingSpec::new(Field::zeros(&dom2), 0.5).is_err());
    }
}
