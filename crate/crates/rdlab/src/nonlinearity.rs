//! Reaction terms and empirical certification of their structural
//! hypotheses: continuity, growth `|f(u)| <= C1 (1 + |u|^{p-1})`,
//! dissipativity `f(u) u >= alpha |u|^p - C2`, and the one- and two-sided
//! local Lipschitz conditions.
//!
//! Certification is dense sampling plus closed-form cross-checks for the
//! registered families — the lab's job is to witness the hypotheses on
//! concrete model problems, not to prove them symbolically.
//!
//! ```
//! use rdlab::nonlinearity::{builtin_family, certify_dissipativity, certify_growth};
//!
//! // f(u) = u^3 - 2u: growth exponent 4, dissipative with alpha = 1/2
//! // and offset C2 = 2 (the slack vanishes at u^2 = 2).
//! let cubic = builtin_family("cubic_chafee_infante", &[2.0])?;
//! assert_eq!((cubic.p, cubic.alpha, cubic.c2), (4.0, 0.5, 2.0));
//! assert!(certify_growth(&cubic, (1e-6, 1e3), 10_000)?.pass);
//! assert!(certify_dissipativity(&cubic, (1e-6, 1e3), 10_000)?.pass);
//!
//! // |f'| on [-1,1] peaks at 2; on [-2,2] at 10.
//! assert_eq!(cubic.two_sided_closed_form(1.0), Some(2.0));
//! assert_eq!(cubic.two_sided_closed_form(2.0), Some(10.0));
//! # Ok::<(), rdlab::Error>(())
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Registered reaction families. All are odd and continuous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Family {
    /// `f(u) = 0`; a structural null case (fails dissipativity for large u).
    Zero,
    /// `f(u) = u^3 - lambda u`, the Chafee-Infante cubic (p = 4).
    CubicChafeeInfante { lambda: f64 },
    /// `f(u) = |u|^{p-2} u - lambda u`.
    OddPower { p: f64, lambda: f64 },
    /// `f(u) = |u|^{p-2} u - beta sign(u) |u|^theta`, `theta in (0,1)`:
    /// continuous, growth- and dissipativity-compliant, but not one-sided
    /// Lipschitz near 0.
    NonlipschitzRoot { p: f64, theta: f64, beta: f64 },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Zero => "zero",
            Family::CubicChafeeInfante { .. } => "cubic_chafee_infante",
            Family::OddPower { .. } => "odd_power",
            Family::NonlipschitzRoot { .. } => "nonlipschitz_root",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            Family::Zero => vec![],
            Family::CubicChafeeInfante { lambda } => vec![lambda],
            Family::OddPower { p, lambda } => vec![p, lambda],
            Family::NonlipschitzRoot { p, theta, beta } => vec![p, theta, beta],
        }
    }
}

/// A reaction term together with its structural constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearitySpec {
    pub family: Family,
    /// Growth exponent (>= 2).
    pub p: f64,
    /// Growth constant.
    pub c1: f64,
    /// Dissipativity offset (minimal admissible value; 0 when the family is
    /// coercive without an offset, as for the linear case).
    pub c2: f64,
    /// Dissipativity rate.
    pub alpha: f64,
}

impl NonlinearitySpec {
    pub fn eval(&self, u: f64) -> f64 {
        match self.family {
            Family::Zero => 0.0,
            Family::CubicChafeeInfante { lambda } => u * u * u - lambda * u,
            Family::OddPower { p, lambda } => u.abs().powf(p - 2.0) * u - lambda * u,
            Family::NonlipschitzRoot { p, theta, beta } => {
                u.abs().powf(p - 2.0) * u - beta * u.signum() * u.abs().powf(theta)
            }
        }
    }

    /// `f'(u)` for the differentiable families; `None` for families whose
    /// derivative blows up (the root family near 0).
    pub fn derivative(&self, u: f64) -> Option<f64> {
        match self.family {
            Family::Zero => Some(0.0),
            Family::CubicChafeeInfante { lambda } => Some(3.0 * u * u - lambda),
            Family::OddPower { p, lambda } => Some((p - 1.0) * u.abs().powf(p - 2.0) - lambda),
            Family::NonlipschitzRoot { .. } => None,
        }
    }

    pub fn is_differentiable(&self) -> bool {
        !matches!(self.family, Family::NonlipschitzRoot { .. })
    }

    /// Explicit-integration stiffness scale on `[-R, R]`: a bound on the
    /// slope of the polynomial part plus the linear terms. The root family's
    /// singular slope at 0 is excluded — its increments are sublinear there
    /// and do not destabilize an explicit step.
    pub fn stiffness_bound(&self, r: f64) -> f64 {
        let r = r.max(0.0);
        match self.family {
            Family::Zero => 0.0,
            Family::CubicChafeeInfante { lambda } => 3.0 * r * r + lambda.abs(),
            Family::OddPower { p, lambda } => (p - 1.0) * r.powf(p - 2.0) + lambda.abs(),
            Family::NonlipschitzRoot { p, theta: _, beta } => {
                (p - 1.0) * r.powf(p - 2.0) + beta
            }
        }
    }

    /// Closed-form one-sided Lipschitz constant `max(0, -min f')` on
    /// `[-R, R]`, when a closed form exists.
    ///
    /// The registered differentiable families all have even `f'` that is
    /// monotone in `|u|`, so the extrema sit at `u = 0` and `u = R`.
    pub fn one_sided_closed_form(&self, r: f64) -> Option<f64> {
        self.derivative_range(r)
            .map(|(lo, _)| (-lo).max(0.0))
    }

    /// Closed-form two-sided Lipschitz constant `max |f'|` on `[-R, R]`.
    pub fn two_sided_closed_form(&self, r: f64) -> Option<f64> {
        self.derivative_range(r).map(|(lo, hi)| lo.abs().max(hi.abs()))
    }

    fn derivative_range(&self, r: f64) -> Option<(f64, f64)> {
        let at0 = self.derivative(0.0)?;
        let atr = self.derivative(r)?;
        Some((at0.min(atr), at0.max(atr)))
    }
}

/// Build a spec from a registered family name with analytically derived
/// structural constants.
pub fn builtin_family(name: &str, params: &[f64]) -> Result<NonlinearitySpec> {
    match name {
        "zero" => {
            check_params(name, params, 0)?;
            Ok(NonlinearitySpec {
                family: Family::Zero,
                p: 2.0,
                c1: 1.0,
                c2: 1.0,
                alpha: 1.0,
            })
        }
        "cubic_chafee_infante" => {
            check_params(name, params, 1)?;
            let lambda = params[0];
            Ok(NonlinearitySpec {
                family: Family::CubicChafeeInfante { lambda },
                p: 4.0,
                c1: 1.0 + lambda.abs(),
                // Minimize u^4 - lambda u^2 - (1/2) u^4: the slack vanishes
                // at u^2 = lambda, giving C2 = lambda^2 / 2.
                c2: lambda.max(0.0).powi(2) / 2.0,
                alpha: 0.5,
            })
        }
        "odd_power" => {
            check_params(name, params, 2)?;
            let (p, lambda) = (params[0], params[1]);
            if p < 2.0 {
                return Err(Error::invalid(format!("odd_power needs p >= 2, got {p}")));
            }
            if p == 2.0 {
                // f(u) u = (1 - lambda) u^2; dissipativity forces lambda < 1.
                if lambda >= 1.0 {
                    return Err(Error::invalid(
                        "odd_power with p = 2 needs lambda < 1 for dissipativity",
                    ));
                }
                Ok(NonlinearitySpec {
                    family: Family::OddPower { p, lambda },
                    p,
                    c1: 1.0 + lambda.abs(),
                    c2: 0.0,
                    alpha: 1.0 - lambda,
                })
            } else {
                let c2 = if lambda > 0.0 {
                    // sup_r (lambda r^2 - r^p / 2) at r^{p-2} = 4 lambda / p.
                    let r = (4.0 * lambda / p).powf(1.0 / (p - 2.0));
                    lambda * r * r - 0.5 * r.powf(p)
                } else {
                    0.0
                };
                Ok(NonlinearitySpec {
                    family: Family::OddPower { p, lambda },
                    p,
                    c1: 1.0 + lambda.abs(),
                    c2,
                    alpha: 0.5,
                })
            }
        }
        "nonlipschitz_root" => {
            check_params(name, params, 3)?;
            let (p, theta, beta) = (params[0], params[1], params[2]);
            if p < 2.0 {
                return Err(Error::invalid(format!(
                    "nonlipschitz_root needs p >= 2, got {p}"
                )));
            }
            if !(theta > 0.0 && theta < 1.0) {
                return Err(Error::invalid("nonlipschitz_root needs theta in (0,1)"));
            }
            if !(beta > 0.0) {
                return Err(Error::invalid("nonlipschitz_root needs beta > 0"));
            }
            // sup_r (beta r^{theta+1} - r^p / 2) at
            // r^{p-1-theta} = 2 beta (theta+1) / p.
            let r = (2.0 * beta * (theta + 1.0) / p).powf(1.0 / (p - 1.0 - theta));
            let c2 = beta * r.powf(theta + 1.0) - 0.5 * r.powf(p);
            Ok(NonlinearitySpec {
                family: Family::NonlipschitzRoot { p, theta, beta },
                p,
                c1: 1.0 + beta,
                c2,
                alpha: 0.5,
            })
        }
        other => Err(Error::invalid(format!("unknown nonlinearity family `{other}`"))),
    }
}

fn check_params(name: &str, params: &[f64], want: usize) -> Result<()> {
    if params.len() != want {
        return Err(Error::invalid(format!(
            "family `{name}` takes {want} parameter(s), got {}",
            params.len()
        )));
    }
    if params.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("family `{name}`: non-finite parameter")));
    }
    Ok(())
}

pub const MIN_CERTIFY_SAMPLES: usize = 10_000;

/// Outcome of a growth or dissipativity sweep. Failing the inequality is a
/// result, not an error.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub pass: bool,
    /// Worst ratio `|f(u)| / (1 + |u|^{p-1})` (growth) or worst slack
    /// `min f(u) u - alpha |u|^p + C2` (dissipativity).
    pub worst: f64,
    /// Argument achieving the worst value.
    pub worst_at: f64,
}

/// Log-spaced magnitudes over `[lo, hi]`, both signs, plus 0.
fn log_spaced_samples(range: (f64, f64), count: usize) -> Vec<f64> {
    let lo = range.0.max(1e-9);
    let hi = range.1.max(lo * (1.0 + 1e-12));
    let half = count / 2;
    let mut out = Vec::with_capacity(2 * half + 1);
    out.push(0.0);
    let (llo, lhi) = (lo.ln(), hi.ln());
    for i in 0..half {
        let t = i as f64 / (half - 1).max(1) as f64;
        let mag = (llo + t * (lhi - llo)).exp();
        out.push(mag);
        out.push(-mag);
    }
    out
}

/// Verify the growth bound on log-spaced samples; returns the worst ratio.
pub fn certify_growth(
    spec: &NonlinearitySpec,
    sample_range: (f64, f64),
    count: usize,
) -> Result<SweepOutcome> {
    if count < MIN_CERTIFY_SAMPLES {
        return Err(Error::invalid(format!(
            "certification sweeps need at least {MIN_CERTIFY_SAMPLES} samples"
        )));
    }
    let mut worst = 0.0f64;
    let mut worst_at = 0.0f64;
    for u in log_spaced_samples(sample_range, count) {
        let ratio = spec.eval(u).abs() / (1.0 + u.abs().powf(spec.p - 1.0));
        if ratio > worst {
            worst = ratio;
            worst_at = u;
        }
    }
    Ok(SweepOutcome {
        pass: worst <= spec.c1 * (1.0 + 1e-12),
        worst,
        worst_at,
    })
}

/// Verify dissipativity on log-spaced samples; returns the worst slack.
pub fn certify_dissipativity(
    spec: &NonlinearitySpec,
    sample_range: (f64, f64),
    count: usize,
) -> Result<SweepOutcome> {
    if count < MIN_CERTIFY_SAMPLES {
        return Err(Error::invalid(format!(
            "certification sweeps need at least {MIN_CERTIFY_SAMPLES} samples"
        )));
    }
    let mut worst = f64::INFINITY;
    let mut worst_at = 0.0f64;
    for u in log_spaced_samples(sample_range, count) {
        let slack = spec.eval(u) * u - spec.alpha * u.abs().powf(spec.p) + spec.c2;
        // Large |u| makes both sides huge; compare with a relative guard.
        let guard = 1e-12 * (1.0 + spec.alpha * u.abs().powf(spec.p));
        let normalized = slack + guard;
        if normalized < worst {
            worst = normalized;
            worst_at = u;
        }
    }
    Ok(SweepOutcome {
        pass: worst >= 0.0,
        worst,
        worst_at,
    })
}

/// A sampled Lipschitz-constant estimate over pair gaps spanning several
/// decades. `Divergent` records the per-gap trace that failed to stabilize.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum LipschitzEstimate {
    Finite(f64),
    Divergent { per_gap: Vec<(f64, f64)> },
}

impl LipschitzEstimate {
    pub fn finite(&self) -> Option<f64> {
        match self {
            LipschitzEstimate::Finite(l) => Some(*l),
            LipschitzEstimate::Divergent { .. } => None,
        }
    }
}

fn lipschitz_sweep(
    r: f64,
    count: usize,
    score: impl Fn(f64, f64) -> f64,
) -> Result<LipschitzEstimate> {
    if !(r > 0.0) {
        return Err(Error::invalid("Lipschitz radius must be positive"));
    }
    if count == 0 {
        return Err(Error::invalid("need at least one sample per gap"));
    }
    // Geometric gap ladder from R/10^2 down to R/10^12.
    let gaps: Vec<f64> = (2..=12).map(|g| r * 10f64.powi(-g)).collect();
    let per_base = (count / gaps.len()).max(8);
    let mut per_gap = Vec::with_capacity(gaps.len());
    for &gap in &gaps {
        let mut worst = 0.0f64;
        for i in 0..per_base {
            let u = -r + 2.0 * r * (i as f64 + 0.5) / per_base as f64;
            let v = (u + gap).min(r);
            if (u - v).abs() > 0.0 {
                worst = worst.max(score(u, v));
            }
        }
        // Straddle the origin, where the registered families lose
        // regularity first.
        worst = worst.max(score(-gap / 2.0, gap / 2.0));
        per_gap.push((gap, worst));
    }
    // Stable across the two finest decades => converged; steady growth as
    // the gap shrinks => the difference quotient diverges.
    let tail = per_gap[per_gap.len() - 1].1;
    let mid = per_gap[per_gap.len() / 2].1;
    let diverging = tail > 10.0 * mid.max(1e-12) && tail > per_gap[0].1 * 100.0;
    if diverging {
        return Ok(LipschitzEstimate::Divergent { per_gap });
    }
    let max = per_gap.iter().fold(0.0f64, |m, &(_, v)| m.max(v));
    Ok(LipschitzEstimate::Finite(max))
}

/// One-sided constant: worst `-(f(u)-f(v))(u-v) / |u-v|^2` over sampled
/// pairs in `[-R, R]`.
pub fn certify_one_sided_lipschitz(
    spec: &NonlinearitySpec,
    r: f64,
    count: usize,
) -> Result<LipschitzEstimate> {
    lipschitz_sweep(r, count, |u, v| {
        let d = u - v;
        (-(spec.eval(u) - spec.eval(v)) * d / (d * d)).max(0.0)
    })
}

/// Two-sided constant: worst `|f(u)-f(v)| / |u-v|` over sampled pairs.
pub fn certify_two_sided_lipschitz(
    spec: &NonlinearitySpec,
    r: f64,
    count: usize,
) -> Result<LipschitzEstimate> {
    lipschitz_sweep(r, count, |u, v| {
        (spec.eval(u) - spec.eval(v)).abs() / (u - v).abs()
    })
}

/// All four hypothesis sweeps in one record, for reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub family: String,
    pub params: Vec<f64>,
    pub growth: SweepOutcome,
    pub dissipativity: SweepOutcome,
    pub one_sided: LipschitzEstimate,
    pub two_sided: LipschitzEstimate,
    pub radius: f64,
}

pub fn certify_all(spec: &NonlinearitySpec, radius: f64, count: usize) -> Result<HypothesisReport> {
    Ok(HypothesisReport {
        family: spec.family.name().to_string(),
        params: spec.family.params(),
        growth: certify_growth(spec, (1e-6, 1e3), count)?,
        dissipativity: certify_dissipativity(spec, (1e-6, 1e3), count)?,
        one_sided: certify_one_sided_lipschitz(spec, radius, count)?,
        two_sided: certify_two_sided_lipschitz(spec, radius, count)?,
        radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const N: usize = MIN_CERTIFY_SAMPLES;

    #[test]
    fn cubic_constants_and_certificates() {
        let spec = builtin_family("cubic_chafee_infante", &[2.0]).unwrap();
        assert_eq!(spec.p, 4.0);
        assert_eq!(spec.alpha, 0.5);
        assert_eq!(spec.c2, 2.0);
        let g = certify_growth(&spec, (1e-6, 1e3), N).unwrap();
        assert!(g.pass, "worst ratio {}", g.worst);
        assert!(g.worst <= spec.c1);
        let d = certify_dissipativity(&spec, (1e-6, 1e3), N).unwrap();
        assert!(d.pass, "worst slack {} at {}", d.worst, d.worst_at);
    }

    #[test]
    fn cubic_fails_dissipativity_without_offset() {
        let mut spec = builtin_family("cubic_chafee_infante", &[2.0]).unwrap();
        spec.c2 = 0.0;
        let d = certify_dissipativity(&spec, (1e-6, 1e3), N).unwrap();
        assert!(!d.pass);
        // The slack bottoms out near u^2 = lambda.
        assert!(d.worst_at.abs() > 0.5 && d.worst_at.abs() < 3.0);
    }

    #[test]
    fn quadratic_growth_fails_with_p_two() {
        // f(u) = u^2 declared with p = 2 violates |f| <= C1 (1 + |u|).
        let spec = NonlinearitySpec {
            family: Family::OddPower { p: 3.0, lambda: 0.0 }, // |u| u = u^2 on u > 0
            p: 2.0,
            c1: 10.0,
            c2: 1.0,
            alpha: 0.5,
        };
        let g = certify_growth(&spec, (1e-6, 1e3), N).unwrap();
        assert!(!g.pass);
    }

    #[test]
    fn zero_family_passes_growth_with_any_c1() {
        let spec = builtin_family("zero", &[]).unwrap();
        let g = certify_growth(&spec, (1e-6, 1e3), N).unwrap();
        assert!(g.pass);
        assert_eq!(g.worst, 0.0);
    }

    #[test]
    fn linear_family_is_the_marginal_dissipative_case() {
        let spec = builtin_family("odd_power", &[2.0, 0.0]).unwrap();
        assert_eq!(spec.alpha, 1.0);
        assert_eq!(spec.c2, 0.0);
        let d = certify_dissipativity(&spec, (1e-6, 1e3), N).unwrap();
        assert!(d.pass);
        assert!((spec.eval(3.5) - 3.5).abs() < 1e-15);
    }

    #[test]
    fn unknown_family_and_bad_params_error() {
        assert!(builtin_family("heaviside", &[]).is_err());
        assert!(builtin_family("odd_power", &[1.5, 0.0]).is_err());
        assert!(builtin_family("odd_power", &[2.0, 1.0]).is_err());
        assert!(builtin_family("nonlipschitz_root", &[2.0, 1.5, 1.0]).is_err());
    }

    #[test]
    fn cubic_lipschitz_constants_match_calculus() {
        let spec = builtin_family("cubic_chafee_infante", &[2.0]).unwrap();
        // f' = 3u^2 - 2 has min -2 on [-1,1]; max |f'| is 2 on [-1,1], 10 on [-2,2].
        let one = certify_one_sided_lipschitz(&spec, 1.0, N).unwrap().finite().unwrap();
        assert!((one - 2.0).abs() < 1e-3, "one-sided {one}");
        assert!((spec.one_sided_closed_form(1.0).unwrap() - 2.0).abs() < 1e-15);
        let two = certify_two_sided_lipschitz(&spec, 1.0, N).unwrap().finite().unwrap();
        assert!((two - 2.0).abs() < 1e-3, "two-sided {two}");
        assert!((spec.two_sided_closed_form(2.0).unwrap() - 10.0).abs() < 1e-15);
        let two_r2 = certify_two_sided_lipschitz(&spec, 2.0, N).unwrap().finite().unwrap();
        assert!((two_r2 - 10.0).abs() / 10.0 < 1e-2, "two-sided R=2 {two_r2}");
    }

    #[test]
    fn monotone_family_has_zero_one_sided_constant() {
        let spec = builtin_family("odd_power", &[4.0, 0.0]).unwrap();
        let one = certify_one_sided_lipschitz(&spec, 2.0, N).unwrap().finite().unwrap();
        assert_eq!(one, 0.0);
    }

    #[test]
    fn root_family_one_sided_estimate_diverges() {
        let spec = builtin_family("nonlipschitz_root", &[2.0, 0.5, 1.0]).unwrap();
        let est = certify_one_sided_lipschitz(&spec, 1.0, N).unwrap();
        match est {
            LipschitzEstimate::Divergent { per_gap } => {
                // The quotient grows like gap^{-1/2} across the ladder.
                assert!(per_gap.last().unwrap().1 > 1e4);
            }
            LipschitzEstimate::Finite(l) => panic!("expected divergence, got {l}"),
        }
        // Growth and dissipativity still hold for the same family.
        assert!(certify_growth(&spec, (1e-6, 1e3), N).unwrap().pass);
        assert!(certify_dissipativity(&spec, (1e-6, 1e3), N).unwrap().pass);
    }

    #[test]
    fn two_sided_dominates_one_sided_for_every_family() {
        for spec in [
            builtin_family("cubic_chafee_infante", &[2.0]).unwrap(),
            builtin_family("odd_power", &[3.0, 1.5]).unwrap(),
            builtin_family("odd_power", &[2.0, 0.5]).unwrap(),
            builtin_family("zero", &[]).unwrap(),
        ] {
            for &r in &[0.5, 1.0, 4.0] {
                let one = certify_one_sided_lipschitz(&spec, r, N).unwrap().finite().unwrap();
                let two = certify_two_sided_lipschitz(&spec, r, N).unwrap().finite().unwrap();
                assert!(
                    one <= two * (1.0 + 1e-12),
                    "{} R={r}: one={one} two={two}",
                    spec.family.name()
                );
            }
        }
    }

    #[test]
    fn estimates_are_nondecreasing_in_radius() {
        let spec = builtin_family("cubic_chafee_infante", &[2.0]).unwrap();
        let mut prev = 0.0;
        for &r in &[0.5, 1.0, 2.0, 4.0] {
            let two = certify_two_sided_lipschitz(&spec, r, N).unwrap().finite().unwrap();
            assert!(two + 1e-12 >= prev);
            prev = two;
        }
    }

    #[test]
    fn estimates_converge_with_sample_count() {
        let spec = builtin_family("cubic_chafee_infante", &[2.0]).unwrap();
        let a = certify_two_sided_lipschitz(&spec, 1.5, N).unwrap().finite().unwrap();
        let b = certify_two_sided_lipschitz(&spec, 1.5, 2 * N).unwrap().finite().unwrap();
        assert!((a - b).abs() / b < 0.01, "a={a} b={b}");
    }
}
