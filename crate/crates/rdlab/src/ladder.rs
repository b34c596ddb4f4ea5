//! The Moser-Alikakos ladder: per-rung inequality records, the telescoped
//! schedule with its geometric wait budget, and the empirical uniform
//! `L^infinity` bound.
//!
//! One rung promotes control of `||u^+||_m` over a window `[t1, t1+tau]` to
//! control of `||u^+(t1+tau)||_{Am}`, at the cost of a wait
//! `tau >= delta / m^D`. The rung ratio is `A = 2` for `d <= 3` and
//! `A = d/(d-2)` for `d >= 4`. Waiting times form a geometric series, so the
//! whole climb to `L^infinity` costs an arbitrarily small total time.
//!
//! The proof's constants `D`, `D(delta)` are existential; here they are
//! fitted as envelope constants over a training ensemble and re-asserted on
//! held-out runs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::potential::big_phi;
use crate::solver::Trajectory;

/// Rung ratio `A`: 2 in low dimension, `d/(d-2)` for `d >= 4`.
pub fn rung_ratio(d: u32) -> Result<f64> {
    if d < 1 {
        return Err(Error::invalid("dimension must be >= 1"));
    }
    if d <= 3 {
        Ok(2.0)
    } else {
        Ok(d as f64 / (d as f64 - 2.0))
    }
}

/// Geometric exponent schedule `m_j = m0 A^j` with per-rung waits
/// `delta / m_j^{D}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LadderSchedule {
    /// Rung ratio (> 1).
    pub a: f64,
    /// Base exponent (>= 2).
    pub m0: f64,
    /// Largest exponent produced by the ladder.
    pub m_max: f64,
    /// Total time budget parameter (> 0).
    pub delta: f64,
    /// Exponent `D` in the wait rule `tau_j = delta / m_j^D`.
    pub d_exp: f64,
}

impl LadderSchedule {
    pub fn for_dimension(d: u32) -> Result<LadderSchedule> {
        Ok(LadderSchedule {
            a: rung_ratio(d)?,
            m0: 2.0,
            m_max: 64.0,
            delta: 0.5,
            d_exp: 1.0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 1.0) {
            return Err(Error::invalid("rung ratio A must exceed 1"));
        }
        if !(self.m0 >= 2.0) || !(self.m_max >= self.m0 * self.a) {
            return Err(Error::invalid("need m0 >= 2 and m_max >= A m0"));
        }
        if !(self.delta > 0.0) || !(self.d_exp > 0.0) {
            return Err(Error::invalid("delta and D must be positive"));
        }
        Ok(())
    }

    /// Input exponents of the rungs: `m0, m0 A, ...` while the output
    /// `A m_j` stays within `m_max`.
    pub fn rungs(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut m = self.m0;
        while m * self.a <= self.m_max * (1.0 + 1e-12) {
            out.push(m);
            m *= self.a;
        }
        out
    }

    pub fn wait(&self, m: f64) -> f64 {
        self.delta / m.powf(self.d_exp)
    }

    pub fn total_wait(&self) -> f64 {
        self.rungs().iter().map(|&m| self.wait(m)).sum()
    }

    /// Closed geometric-sum cap on the total wait (the infinite-ladder
    /// limit): `delta A^D / (m0^D (A^D - 1))`.
    pub fn wait_bound(&self) -> f64 {
        let ad = self.a.powf(self.d_exp);
        self.delta * ad / (self.m0.powf(self.d_exp) * (ad - 1.0))
    }
}

/// Truncated intermediate quantities recorded at one truncation level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruncationRow {
    pub k: f64,
    /// `||T_k u^+(t1+tau)||_{2m}^{2m}`.
    pub truncated_pow: f64,
    /// `2m Phi_{k,m}(u^+(t1))`.
    pub phi_term: f64,
    /// k-free majorant of `phi_term`: `||u^+(t1)||_{2m}^{2m}`.
    pub untruncated_cap: f64,
    /// k-free window term `sup_t ||u^+(t)||_m^{2m}`.
    pub sup_term: f64,
}

/// One rung of the iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RungRecord {
    pub m: f64,
    pub a: f64,
    pub t1: f64,
    pub tau: f64,
    /// `||u^+(t1+tau)||_{Am}`.
    pub lhs_am: f64,
    /// `sup_{t in [t1, t1+tau]} ||u^+(t)||_m`.
    pub sup_m: f64,
    pub truncations: Vec<TruncationRow>,
}

impl RungRecord {
    /// Guarded rung quotient
    /// `max{lhs, D} / (m^{D/m} max{sup, D})`; the rung inequality asks this
    /// to be `<= D(delta)^{1/m}`.
    pub fn quotient(&self, d_guard: f64, d_exp: f64) -> f64 {
        let num = self.lhs_am.max(d_guard);
        let den = self.m.powf(d_exp / self.m) * self.sup_m.max(d_guard);
        num / den
    }
}

/// Evaluate one rung on a stored trajectory.
pub fn rung_check(
    traj: &Trajectory,
    t1: f64,
    tau: f64,
    m: f64,
    a: f64,
    k_grid: &[f64],
) -> Result<RungRecord> {
    if !(m >= 2.0) {
        return Err(Error::invalid("rung exponent must satisfy m >= 2"));
    }
    if !(a > 1.0) || !(tau > 0.0) {
        return Err(Error::invalid("need A > 1 and tau > 0"));
    }
    let t_eval = t1 + tau;
    let end_state = traj.state_at(t_eval)?;
    let end_plus = end_state.positive_part();
    let lhs_am = end_plus.lp_norm(a * m)?;
    let sup_m = traj.sup_positive_lm(t1, t_eval, m)?;
    let start_plus = traj.state_at(t1)?.positive_part();
    let two_m = 2.0 * m;
    let untruncated_cap = start_plus.lp_norm(two_m)?.powf(two_m);
    let sup_term = sup_m.powf(two_m);
    let mut truncations = Vec::with_capacity(k_grid.len());
    for &k in k_grid {
        let truncated_pow = end_plus.truncate(k)?.lp_norm(two_m)?.powf(two_m);
        let phi_term = two_m * big_phi(&start_plus, k, m)?;
        truncations.push(TruncationRow {
            k,
            truncated_pow,
            phi_term,
            untruncated_cap,
            sup_term,
        });
    }
    Ok(RungRecord {
        m,
        a,
        t1,
        tau,
        lhs_am,
        sup_m,
        truncations,
    })
}

/// Envelope constants for the rung inequality: the guard `D`, the wait
/// exponent, and the fitted `D(delta)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LadderConstants {
    pub d_guard: f64,
    pub d_exp: f64,
    pub d_delta: f64,
}

/// Fit `D(delta)` as the smallest constant (clamped to >= 1) making every
/// training rung satisfy
/// `max{lhs, D} <= D(delta)^{1/m} m^{D/m} max{sup, D}`.
pub fn fit_constants(records: &[RungRecord], d_guard: f64, d_exp: f64) -> LadderConstants {
    let mut d_delta = 1.0f64;
    for rec in records {
        let q = rec.quotient(d_guard, d_exp);
        d_delta = d_delta.max(q.powf(rec.m));
    }
    LadderConstants {
        d_guard,
        d_exp,
        d_delta,
    }
}

/// Per-rung factor `alpha(m) = D(delta)^{1/m} m^{D/m}`.
pub fn rung_factor(constants: &LadderConstants, m: f64) -> f64 {
    constants.d_delta.powf(1.0 / m) * m.powf(constants.d_exp / m)
}

/// Closed-form cap on the infinite product of rung factors starting at
/// `m0`:
/// `D(delta)^{(1/m0) A/(A-1)} m0^{(D/m0) A/(A-1)} A^{(D/m0) A/(A-1)^2}`.
pub fn product_bound(constants: &LadderConstants, m0: f64, a: f64) -> f64 {
    let geo = a / (a - 1.0);
    let ln = constants.d_delta.ln() * geo / m0
        + constants.d_exp * m0.ln() * geo / m0
        + constants.d_exp * a.ln() * geo / ((a - 1.0) * m0);
    ln.exp()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LadderRungRow {
    pub m: f64,
    pub tau: f64,
    pub t_cumulative: f64,
    pub sup_m: f64,
    pub lhs_am: f64,
    pub quotient: f64,
    pub factor: f64,
    pub truncations: Vec<TruncationRow>,
}

/// Full ladder run on one trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LadderReport {
    pub schema_version: u32,
    pub schedule: LadderSchedule,
    pub t1: f64,
    pub constants: LadderConstants,
    pub rungs: Vec<LadderRungRow>,
    /// Product of the realized rung factors.
    pub product_factor: f64,
    /// Closed-form cap on the infinite product.
    pub product_bound: f64,
    /// `||u(t_end)||_{m_max}` over the full field.
    pub terminal_lm: f64,
    /// Nodal max at the same instant.
    pub terminal_linf: f64,
    /// `terminal_lm / terminal_linf` (the distance left to `L^infinity`).
    pub saturation: f64,
    pub violations: Vec<String>,
}

/// Apply the rung checks sequentially at cumulative times, then compare the
/// realized product of rung factors against the closed-form telescoped cap.
///
/// When `constants` is `None` the envelope is fitted from this trajectory's
/// own rungs (training mode); pass fitted constants to re-assert them on
/// held-out runs.
pub fn run_ladder(
    traj: &Trajectory,
    t1: f64,
    schedule: &LadderSchedule,
    constants: Option<LadderConstants>,
) -> Result<LadderReport> {
    schedule.validate()?;
    let mut records = Vec::new();
    let mut t = t1;
    for m in schedule.rungs() {
        let tau = schedule.wait(m);
        let k_grid = default_k_grid(traj.state_at(t)?);
        records.push(rung_check(traj, t, tau, m, schedule.a, &k_grid)?);
        t += tau;
    }
    let constants = constants.unwrap_or_else(|| fit_constants(&records, 1.0, schedule.d_exp));
    let mut rows = Vec::with_capacity(records.len());
    let mut product_factor = 1.0;
    let mut violations = Vec::new();
    let mut t_cum = t1;
    for rec in &records {
        t_cum += rec.tau;
        let factor = rung_factor(&constants, rec.m);
        product_factor *= factor;
        let quotient = rec.quotient(constants.d_guard, constants.d_exp);
        if quotient > constants.d_delta.powf(1.0 / rec.m) * (1.0 + 1e-9) {
            violations.push(format!(
                "rung m={} exceeds envelope: quotient {quotient:.6e}",
                rec.m
            ));
        }
        check_truncation_rows(rec, &mut violations);
        rows.push(LadderRungRow {
            m: rec.m,
            tau: rec.tau,
            t_cumulative: t_cum,
            sup_m: rec.sup_m,
            lhs_am: rec.lhs_am,
            quotient,
            factor,
            truncations: rec.truncations.clone(),
        });
    }
    let bound = product_bound(&constants, schedule.m0, schedule.a);
    if product_factor > bound * (1.0 + 1e-12) {
        violations.push(format!(
            "rung-factor product {product_factor:.6e} exceeds closed-form cap {bound:.6e}"
        ));
    }
    let t_end = t1 + schedule.total_wait();
    let terminal = traj.state_at(t_end)?;
    let terminal_lm = terminal.lp_norm(schedule.m_max)?;
    let terminal_linf = terminal.linf_nodal();
    Ok(LadderReport {
        schema_version: 1,
        schedule: schedule.clone(),
        t1,
        constants,
        rungs: rows,
        product_factor,
        product_bound: bound,
        terminal_lm,
        terminal_linf,
        saturation: if terminal_linf > 0.0 {
            terminal_lm / terminal_linf
        } else {
            1.0
        },
        violations,
    })
}

/// Truncation levels bracketing the knee: `{1/2, 1, 2, 4} x` current nodal
/// max (falling back to 1 for a vanishing state).
pub fn default_k_grid(state: &Field) -> Vec<f64> {
    let base = state.linf_nodal().max(1e-9);
    [0.5, 1.0, 2.0, 4.0].iter().map(|f| f * base).collect()
}

fn check_truncation_rows(rec: &RungRecord, violations: &mut Vec<String>) {
    for pair in rec.truncations.windows(2) {
        let (lo, hi) = (&pair[0], &pair[1]);
        if lo.truncated_pow > hi.truncated_pow * (1.0 + 1e-12) {
            violations.push(format!(
                "m={}: truncated norm not monotone in k ({} -> {})",
                rec.m, lo.k, hi.k
            ));
        }
        if lo.phi_term > hi.phi_term * (1.0 + 1e-12) {
            violations.push(format!(
                "m={}: potential term not monotone in k ({} -> {})",
                rec.m, lo.k, hi.k
            ));
        }
        if lo.untruncated_cap != hi.untruncated_cap || lo.sup_term != hi.sup_term {
            violations.push(format!("m={}: k-free right sides changed with k", rec.m));
        }
    }
    for row in &rec.truncations {
        // Lemma-level sandwich: the truncated end-state norm is controlled by
        // the k-free majorants.
        if row.phi_term > row.untruncated_cap * (1.0 + 1e-10) + 1e-300 {
            violations.push(format!(
                "m={} k={}: potential exceeds its untruncated cap",
                rec.m, row.k
            ));
        }
    }
}

/// Fitted constant of the uniform `L^infinity` estimate over an ensemble:
/// `D_hat = max ||u(t)||_inf / (sup_{s>=t1} ||u(s)||_2 + 1)` over all
/// trajectories and `t >= t1 + tau`, with sub-ensemble refits split by the
/// initial norm to witness that the constant does not depend on `u0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinfFit {
    pub t1: f64,
    pub tau: f64,
    pub d_hat: f64,
    pub per_trajectory: Vec<f64>,
    pub small_half_refit: f64,
    pub large_half_refit: f64,
    /// `max(small, large) / min(small, large)`.
    pub split_ratio: f64,
}

pub fn linf_bound_check(ensemble: &[Trajectory], t1: f64, tau: f64) -> Result<LinfFit> {
    if ensemble.is_empty() {
        return Err(Error::invalid("empty ensemble"));
    }
    let mut scored: Vec<(f64, f64)> = Vec::with_capacity(ensemble.len());
    for traj in ensemble {
        let sup_l2 = traj.sup_l2_from(t1);
        if !sup_l2.is_finite() {
            return Err(Error::NonFinite("linf_bound_check sup norm".into()));
        }
        let mut quot = 0.0f64;
        let mut seen = false;
        for s in traj.norm_log() {
            if s.t >= t1 + tau - 1e-12 {
                quot = quot.max(s.linf / (sup_l2 + 1.0));
                seen = true;
            }
        }
        if !seen {
            return Err(Error::WindowNotCovered {
                t0: t1 + tau,
                t1: t1 + tau,
            });
        }
        scored.push((traj.norm_log()[0].l2, quot));
    }
    let per_trajectory: Vec<f64> = scored.iter().map(|s| s.1).collect();
    let d_hat = per_trajectory.iter().fold(0.0f64, |m, &q| m.max(q));
    // Split by initial L2 magnitude.
    let mut by_u0 = scored.clone();
    by_u0.sort_by(|a, b| a.0.total_cmp(&b.0));
    let half = by_u0.len() / 2;
    let refit = |chunk: &[(f64, f64)]| chunk.iter().fold(0.0f64, |m, s| m.max(s.1));
    let small = refit(&by_u0[..half.max(1)]);
    let large = refit(&by_u0[half.min(by_u0.len() - 1)..]);
    let split_ratio = if small.min(large) > 0.0 {
        small.max(large) / small.min(large)
    } else {
        f64::INFINITY
    };
    Ok(LinfFit {
        t1,
        tau,
        d_hat,
        per_trajectory,
        small_half_refit: small,
        large_half_refit: large,
        split_ratio,
    })
}

/// Max nodal sup-norm over an attractor sample; the radius `R` fed into the
/// Lipschitz constant `L(R)` of the dimension pipeline.
pub fn attractor_linf_radius(sample: &[Field]) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::invalid("empty attractor sample"));
    }
    Ok(sample.iter().fold(0.0, |m, f| m.max(f.linf_nodal())))
}
