//! Time integration and weak-form verification.
//!
//! The stiff linear part is integrated exactly per sine mode (factor
//! `e^{-lambda_j dt}`); the reaction `g - f(u)` is handled explicitly by an
//! exponential integrator (ETD1 or ETD2RK), with `f(u)` evaluated nodally on
//! a 3/2-rule zero-padded grid to suppress aliasing from the power
//! nonlinearity.
//!
//! Alongside the stepper this module carries the verifiers that make
//! trajectories falsifiable objects: the space-time weak-form residual, the
//! truncated integration-by-parts identity, and the `L^2` decay inequality.

use serde::{Deserialize, Serialize};

use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::forcing::ForcingSpec;
use crate::nonlinearity::{Family, NonlinearitySpec};
use crate::potential::big_phi;
use crate::sine;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    Etd1,
    Etd2Rk,
}

impl Scheme {
    pub fn parse(name: &str) -> Result<Scheme> {
        match name {
            "etd1" => Ok(Scheme::Etd1),
            "etd2rk" => Ok(Scheme::Etd2Rk),
            other => Err(Error::invalid(format!("unknown scheme `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Etd1 => "etd1",
            Scheme::Etd2Rk => "etd2rk",
        }
    }

    /// Formal temporal order.
    pub fn order(&self) -> f64 {
        match self {
            Scheme::Etd1 => 1.0,
            Scheme::Etd2Rk => 2.0,
        }
    }
}

/// `phi_1(z) = (e^z - 1)/z`.
fn etd_phi1(z: f64) -> f64 {
    if z == 0.0 {
        1.0
    } else {
        z.exp_m1() / z
    }
}

/// `phi_2(z) = (e^z - 1 - z)/z^2`, with a series branch near 0 where the
/// direct formula cancels catastrophically.
fn etd_phi2(z: f64) -> f64 {
    if z.abs() < 0.5 {
        let mut term = 0.5f64; // z^0 / 2!
        let mut sum = term;
        let mut k = 1.0;
        while term.abs() > 1e-20 {
            term *= z / (k + 2.0);
            sum += term;
            k += 1.0;
        }
        sum
    } else {
        (z.exp_m1() - z) / (z * z)
    }
}

/// Time-dependent forcing hook. The production forcing is autonomous;
/// manufactured-solution studies need `g(t)`.
pub trait ForcingTerm {
    /// Sine coefficients of `g(t)`.
    fn coeffs_at(&self, t: f64) -> Vec<f64>;
}

impl ForcingTerm for ForcingSpec {
    fn coeffs_at(&self, _t: f64) -> Vec<f64> {
        self.field().coeffs().to_vec()
    }
}

/// Closure-backed forcing for manufactured solutions.
pub struct TimeForcing<F: Fn(f64) -> Field> {
    pub f: F,
}

impl<F: Fn(f64) -> Field> ForcingTerm for TimeForcing<F> {
    fn coeffs_at(&self, t: f64) -> Vec<f64> {
        (self.f)(t).coeffs().to_vec()
    }
}

/// Sine coefficients of the dealiased nodal evaluation of `f(u)`: zero-pad
/// to the 3/2 grid, apply `f` pointwise, transform back, truncate.
pub fn dealiased_reaction(spec: &NonlinearitySpec, u: &Field) -> Vec<f64> {
    let res = u.domain().resolution();
    if matches!(spec.family, Family::Zero) {
        return vec![0.0; u.coeffs().len()];
    }
    let padded: Vec<usize> = res.iter().map(|&n| sine::dealias_len(n)).collect();
    let pc = sine::pad_coeffs(u.coeffs(), res, &padded);
    let mut nodal = sine::coeffs_to_nodal(&pc, &padded);
    for v in &mut nodal {
        *v = spec.eval(*v);
    }
    let fc = sine::nodal_to_coeffs(&nodal, &padded);
    sine::truncate_coeffs(&fc, &padded, res)
}

/// Modal integrator factors for one step size.
#[derive(Debug, Clone)]
struct ModalFactors {
    dt: f64,
    decay: Vec<f64>,
    phi1: Vec<f64>,
    phi2: Vec<f64>,
}

impl ModalFactors {
    fn build(evs: &[f64], dt: f64) -> ModalFactors {
        ModalFactors {
            dt,
            decay: evs.iter().map(|l| (-l * dt).exp()).collect(),
            phi1: evs.iter().map(|l| dt * etd_phi1(-l * dt)).collect(),
            phi2: evs.iter().map(|l| dt * etd_phi2(-l * dt)).collect(),
        }
    }
}

/// One-step integrator with precomputed modal factors for a fixed `dt`.
///
/// Dyadic refinements of the base step (`dt / 2^k`) are cached on demand;
/// they drive the stability-capped substepping that carries stiff entry
/// transients (far outside the absorbing ball) without adaptive stepping
/// on the outer grid.
pub struct Stepper {
    domain: BoxDomain,
    spec: NonlinearitySpec,
    scheme: Scheme,
    dt: f64,
    eigenvalues: Vec<f64>,
    base: ModalFactors,
    refined: std::sync::Mutex<std::collections::HashMap<u32, std::sync::Arc<ModalFactors>>>,
}

impl Stepper {
    pub fn new(
        domain: &BoxDomain,
        spec: &NonlinearitySpec,
        scheme: Scheme,
        dt: f64,
    ) -> Result<Stepper> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::invalid(format!("step size must be positive, got {dt}")));
        }
        let eigenvalues = domain.mode_eigenvalues();
        let base = ModalFactors::build(&eigenvalues, dt);
        Ok(Stepper {
            domain: domain.clone(),
            spec: spec.clone(),
            scheme,
            dt,
            eigenvalues,
            base,
            refined: std::sync::Mutex::new(std::collections::HashMap::new()),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn spec(&self) -> &NonlinearitySpec {
        &self.spec
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// `N(u, t) = g(t) - P f(u)` in coefficients.
    fn nonlinear_part(&self, u: &Field, g: &[f64]) -> Vec<f64> {
        let mut f = dealiased_reaction(&self.spec, u);
        for (fj, gj) in f.iter_mut().zip(g) {
            *fj = gj - *fj;
        }
        f
    }

    fn advance(
        &self,
        u: &Field,
        t: f64,
        forcing: &impl ForcingTerm,
        factors: &ModalFactors,
    ) -> Result<Field> {
        let g_now = forcing.coeffs_at(t);
        let n_now = self.nonlinear_part(u, &g_now);
        let mut a: Vec<f64> = u
            .coeffs()
            .iter()
            .zip(&factors.decay)
            .zip(&factors.phi1)
            .zip(&n_now)
            .map(|(((c, e), p1), n)| e * c + p1 * n)
            .collect();
        if self.scheme == Scheme::Etd2Rk {
            let a_field = Field::from_coeffs(&self.domain, a.clone())?;
            let g_next = forcing.coeffs_at(t + factors.dt);
            let n_next = self.nonlinear_part(&a_field, &g_next);
            for (j, aj) in a.iter_mut().enumerate() {
                *aj += factors.phi2[j] * (n_next[j] - n_now[j]);
            }
        }
        let next = Field::from_coeffs(&self.domain, a)?;
        if !next.is_finite() || next.l2_norm() > 1e100 {
            return Err(Error::BlowUp {
                t: t + factors.dt,
                last_l2: u.l2_norm(),
            });
        }
        Ok(next)
    }

    fn factors_at_level(&self, level: u32) -> std::sync::Arc<ModalFactors> {
        let mut cache = self.refined.lock().expect("factor cache poisoned");
        cache
            .entry(level)
            .or_insert_with(|| {
                std::sync::Arc::new(ModalFactors::build(
                    &self.eigenvalues,
                    self.dt / 2f64.powi(level as i32),
                ))
            })
            .clone()
    }

    /// Advance one step from time `t` with a (possibly time-dependent)
    /// forcing term.
    pub fn step_forced(&self, u: &Field, t: f64, forcing: &impl ForcingTerm) -> Result<Field> {
        if u.domain() != &self.domain {
            return Err(Error::DomainMismatch);
        }
        self.advance(u, t, forcing, &self.base)
    }

    /// Advance one outer step, subdividing dyadically while the explicit
    /// reaction is stiffer than the cap: each substep obeys
    /// `dt_sub * stiffness(u) <= cap`. Deterministic (the level is a pure
    /// function of the current state) and exact on the outer grid (integer
    /// dyadic bookkeeping, no float drift).
    pub fn step_capped(
        &self,
        u: &Field,
        t: f64,
        forcing: &impl ForcingTerm,
        cap: f64,
    ) -> Result<Field> {
        if u.domain() != &self.domain {
            return Err(Error::DomainMismatch);
        }
        if !(cap > 0.0) {
            return Err(Error::invalid("stiffness cap must be positive"));
        }
        let mut state = u.clone();
        // Progress through the outer step as num / 2^den_log.
        let mut num: u64 = 0;
        let mut den_log: u32 = 0;
        while num < (1u64 << den_log) {
            let stiffness = self.spec.stiffness_bound(state.linf_nodal() * 1.05);
            let mut level: u32 = if stiffness * self.dt <= cap {
                0
            } else {
                ((stiffness * self.dt / cap).log2().ceil() as u32).min(58)
            };
            // The substep must fit in the remaining dyadic budget.
            if level > den_log {
                num <<= level - den_log;
                den_log = level;
            }
            while (1u64 << den_log) - num < (1u64 << (den_log - level)) {
                level += 1;
                if level > den_log {
                    num <<= level - den_log;
                    den_log = level;
                }
            }
            let done = self.dt * num as f64 / (1u64 << den_log) as f64;
            if level == 0 {
                state = self.advance(&state, t + done, forcing, &self.base)?;
            } else {
                let factors = self.factors_at_level(level);
                state = self.advance(&state, t + done, forcing, &factors)?;
            }
            num += 1u64 << (den_log - level);
        }
        Ok(state)
    }

    /// Autonomous step.
    pub fn step(&self, u: &Field, forcing: &ForcingSpec) -> Result<Field> {
        self.step_forced(u, 0.0, forcing)
    }
}

/// Per-step norm record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormSample {
    pub t: f64,
    pub l2: f64,
    pub linf: f64,
    pub h1: f64,
    /// `L^m` norms for the configured exponent list.
    pub lm: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub scheme: String,
    pub dt: f64,
    pub family: String,
    pub family_params: Vec<f64>,
    pub seed_label: String,
    pub lm_exponents: Vec<f64>,
}

/// A time-stamped sequence of states with a dense norm log.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<Field>,
    norm_log: Vec<NormSample>,
    meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Field] {
        &self.states
    }

    pub fn norm_log(&self) -> &[NormSample] {
        &self.norm_log
    }

    pub fn meta(&self) -> &TrajectoryMeta {
        &self.meta
    }

    pub fn initial(&self) -> &Field {
        &self.states[0]
    }

    pub fn terminal(&self) -> &Field {
        self.states.last().expect("trajectory has at least one state")
    }

    pub fn snapshot_spacing(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }

    /// Index of the snapshot nearest to `t`, if within half a spacing.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        let h = self.snapshot_spacing();
        let tol = if h > 0.0 { 0.51 * h } else { 1e-9 };
        let i = self
            .times
            .partition_point(|&s| s < t)
            .min(self.times.len() - 1);
        let candidates = [i.saturating_sub(1), i];
        candidates
            .into_iter()
            .min_by(|&a, &b| {
                (self.times[a] - t)
                    .abs()
                    .total_cmp(&(self.times[b] - t).abs())
            })
            .filter(|&j| (self.times[j] - t).abs() <= tol)
    }

    pub fn state_at(&self, t: f64) -> Result<&Field> {
        self.index_at(t)
            .map(|i| &self.states[i])
            .ok_or(Error::WindowNotCovered { t0: t, t1: t })
    }

    /// Snapshot indices covering `[t0, t1]` (inclusive).
    pub fn window(&self, t0: f64, t1: f64) -> Result<std::ops::RangeInclusive<usize>> {
        let i0 = self.index_at(t0).ok_or(Error::WindowNotCovered { t0, t1 })?;
        let i1 = self.index_at(t1).ok_or(Error::WindowNotCovered { t0, t1 })?;
        if i1 < i0 {
            return Err(Error::WindowNotCovered { t0, t1 });
        }
        Ok(i0..=i1)
    }

    /// Sup of `||u^+(t)||_m` over snapshots in `[t0, t1]`.
    pub fn sup_positive_lm(&self, t0: f64, t1: f64, m: f64) -> Result<f64> {
        let mut sup = 0.0f64;
        for i in self.window(t0, t1)? {
            sup = sup.max(self.states[i].positive_part().lp_norm(m)?);
        }
        Ok(sup)
    }

    /// Sup of the logged `L^2` norm from `t1` onward.
    pub fn sup_l2_from(&self, t1: f64) -> f64 {
        self.norm_log
            .iter()
            .filter(|s| s.t >= t1 - 1e-12)
            .fold(0.0, |m, s| m.max(s.l2))
    }

    /// Same trajectory with all timestamps shifted by `shift` (the equation
    /// is autonomous, so rung statistics must not change).
    pub fn time_shifted(&self, shift: f64) -> Trajectory {
        let mut out = self.clone();
        for t in &mut out.times {
            *t += shift;
        }
        for s in &mut out.norm_log {
            s.t += shift;
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SimulateOptions {
    pub horizon: f64,
    /// Keep a full state snapshot every this many steps.
    pub snapshot_stride: usize,
    /// Record norms every this many steps.
    pub log_stride: usize,
    /// Extra `L^m` norms to log.
    pub lm_exponents: Vec<f64>,
    pub seed_label: String,
    /// Stability cap `dt_sub * stiffness <= cap` for dyadic substepping on
    /// stiff entry transients; `None` steps raw (and may blow up outside
    /// the documented stability region).
    pub stiffness_cap: Option<f64>,
}

impl SimulateOptions {
    pub fn new(horizon: f64) -> SimulateOptions {
        SimulateOptions {
            horizon,
            snapshot_stride: 10,
            log_stride: 1,
            lm_exponents: Vec::new(),
            seed_label: String::new(),
            stiffness_cap: Some(0.1),
        }
    }
}

/// Repeated stepping with snapshots and norm logs. Blow-up propagates as an
/// error carrying the blow-up time; use [`simulate_partial`] to keep the
/// finite prefix.
pub fn simulate(
    stepper: &Stepper,
    u0: &Field,
    forcing: &ForcingSpec,
    opts: &SimulateOptions,
) -> Result<Trajectory> {
    let (traj, blew_up) = simulate_partial(stepper, u0, forcing, opts)?;
    if let Some(t) = blew_up {
        return Err(Error::BlowUp {
            t,
            last_l2: traj.terminal().l2_norm(),
        });
    }
    Ok(traj)
}

/// Like [`simulate`], but on blow-up returns the finite prefix together
/// with the blow-up time.
pub fn simulate_partial(
    stepper: &Stepper,
    u0: &Field,
    forcing: &ForcingSpec,
    opts: &SimulateOptions,
) -> Result<(Trajectory, Option<f64>)> {
    simulate_forced(stepper, u0, forcing, opts)
}

/// Generic driver over any forcing term (used by manufactured-solution
/// studies); snapshots at stride multiples, norms at log-stride multiples.
pub fn simulate_forced(
    stepper: &Stepper,
    u0: &Field,
    forcing: &impl ForcingTerm,
    opts: &SimulateOptions,
) -> Result<(Trajectory, Option<f64>)> {
    if !(opts.horizon > 0.0) {
        return Err(Error::invalid("horizon must be positive"));
    }
    if opts.snapshot_stride == 0 || opts.log_stride == 0 {
        return Err(Error::invalid("strides must be nonzero"));
    }
    let steps = (opts.horizon / stepper.dt()).round().max(1.0) as usize;
    let mut times = Vec::with_capacity(steps / opts.snapshot_stride + 2);
    let mut states = Vec::with_capacity(steps / opts.snapshot_stride + 2);
    let mut norm_log = Vec::with_capacity(steps / opts.log_stride + 2);
    let log = |u: &Field, t: f64, out: &mut Vec<NormSample>| -> Result<()> {
        let lm = opts
            .lm_exponents
            .iter()
            .map(|&m| u.lp_norm(m))
            .collect::<Result<Vec<f64>>>()?;
        out.push(NormSample {
            t,
            l2: u.l2_norm(),
            linf: u.linf_nodal(),
            h1: u.h1_seminorm(),
            lm,
        });
        Ok(())
    };

    let mut u = u0.clone();
    let mut t = 0.0;
    times.push(0.0);
    states.push(u.clone());
    log(&u, 0.0, &mut norm_log)?;
    let mut blew_up = None;
    for step_idx in 1..=steps {
        let stepped = match opts.stiffness_cap {
            Some(cap) => stepper.step_capped(&u, t, forcing, cap),
            None => stepper.step_forced(&u, t, forcing),
        };
        match stepped {
            Ok(next) => {
                u = next;
                t = step_idx as f64 * stepper.dt();
            }
            Err(Error::BlowUp { t: tb, .. }) => {
                blew_up = Some(tb);
                break;
            }
            Err(e) => return Err(e),
        }
        if step_idx % opts.log_stride == 0 {
            log(&u, t, &mut norm_log)?;
        }
        if step_idx % opts.snapshot_stride == 0 {
            times.push(t);
            states.push(u.clone());
        }
    }
    // Always retain the final (or last finite) state.
    if *times.last().unwrap() < t {
        times.push(t);
        states.push(u.clone());
    }
    let meta = TrajectoryMeta {
        scheme: stepper.scheme().name().to_string(),
        dt: stepper.dt(),
        family: stepper.spec().family.name().to_string(),
        family_params: stepper.spec().family.params(),
        seed_label: opts.seed_label.clone(),
        lm_exponents: opts.lm_exponents.clone(),
    };
    Ok((
        Trajectory {
            times,
            states,
            norm_log,
            meta,
        },
        blew_up,
    ))
}

/// Build a trajectory directly from closed-form states (for identity and
/// residual studies that need an exact reference path).
pub fn trajectory_from_states(
    times: Vec<f64>,
    states: Vec<Field>,
    label: &str,
) -> Result<Trajectory> {
    if times.len() != states.len() || times.len() < 2 {
        return Err(Error::invalid("need matching times/states, at least two"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("times must be strictly increasing"));
    }
    let norm_log = times
        .iter()
        .zip(&states)
        .map(|(&t, u)| NormSample {
            t,
            l2: u.l2_norm(),
            linf: u.linf_nodal(),
            h1: u.h1_seminorm(),
            lm: vec![],
        })
        .collect();
    let meta = TrajectoryMeta {
        scheme: "analytic".to_string(),
        dt: times[1] - times[0],
        family: String::new(),
        family_params: vec![],
        seed_label: label.to_string(),
        lm_exponents: vec![],
    };
    Ok(Trajectory {
        times,
        states,
        norm_log,
        meta,
    })
}

/// Smooth compactly supported test profile on `(t0, t1)`:
/// `eta(t) = ((t - t0)(t1 - t))^3`, normalized to peak 1.
#[derive(Debug, Clone, Copy)]
pub struct BumpProfile {
    pub t0: f64,
    pub t1: f64,
}

impl BumpProfile {
    pub fn new(t0: f64, t1: f64) -> Result<BumpProfile> {
        if !(t1 > t0) {
            return Err(Error::invalid("bump profile needs t1 > t0"));
        }
        Ok(BumpProfile { t0, t1 })
    }

    fn peak(&self) -> f64 {
        ((self.t1 - self.t0) * (self.t1 - self.t0) / 4.0).powi(3)
    }

    pub fn value(&self, t: f64) -> f64 {
        if t <= self.t0 || t >= self.t1 {
            return 0.0;
        }
        ((t - self.t0) * (self.t1 - t)).powi(3) / self.peak()
    }

    pub fn derivative(&self, t: f64) -> f64 {
        if t <= self.t0 || t >= self.t1 {
            return 0.0;
        }
        let a = t - self.t0;
        let b = self.t1 - t;
        3.0 * (a * b).powi(2) * (b - a) / self.peak()
    }
}

/// Composite quadrature weights on a uniform grid: Simpson for an even
/// interval count, Simpson + 3/8 tail otherwise. Fourth-order either way.
fn quadrature_weights(n_points: usize, h: f64) -> Vec<f64> {
    assert!(n_points >= 5, "time quadrature needs at least 5 samples");
    let mut w = vec![0.0; n_points];
    let intervals = n_points - 1;
    let simpson_end = if intervals % 2 == 0 { n_points - 1 } else { n_points - 4 };
    let mut i = 0;
    while i + 2 <= simpson_end {
        w[i] += h / 3.0;
        w[i + 1] += 4.0 * h / 3.0;
        w[i + 2] += h / 3.0;
        i += 2;
    }
    if simpson_end < n_points - 1 {
        let j = n_points - 4;
        w[j] += 3.0 * h / 8.0;
        w[j + 1] += 9.0 * h / 8.0;
        w[j + 2] += 9.0 * h / 8.0;
        w[j + 3] += 3.0 * h / 8.0;
    }
    w
}

/// Left-hand side of the space-time weak form evaluated by quadrature on the
/// snapshot grid:
/// `-int (u, v) eta' dt + int [(u, v)_{H^1_0} + (f(u), v) - (g, v)] eta dt`.
///
/// Vanishes (to discretization order) exactly when the trajectory is a weak
/// solution for `(spec, forcing)`.
pub fn weak_residual(
    traj: &Trajectory,
    v: &Field,
    eta: &BumpProfile,
    spec: &NonlinearitySpec,
    forcing: &ForcingSpec,
) -> Result<f64> {
    if traj.states[0].domain() != v.domain() {
        return Err(Error::DomainMismatch);
    }
    let times = traj.times();
    if eta.t0 < times[0] - 1e-12 || eta.t1 > times[times.len() - 1] + 1e-12 {
        return Err(Error::WindowNotCovered {
            t0: eta.t0,
            t1: eta.t1,
        });
    }
    let h = traj.snapshot_spacing();
    let w = quadrature_weights(times.len(), h);
    let gv = forcing.field().l2_inner(v)?;
    let mass = v.domain().mode_mass();
    let mut residual = 0.0;
    for (i, u) in traj.states().iter().enumerate() {
        let t = times[i];
        let uv = u.l2_inner(v)?;
        let grad = u.h1_inner(v)?;
        let fu = dealiased_reaction(spec, u);
        let fv: f64 = mass
            * fu.iter()
                .zip(v.coeffs())
                .map(|(a, b)| a * b)
                .sum::<f64>();
        residual += w[i] * (-uv * eta.derivative(t) + (grad + fv - gv) * eta.value(t));
    }
    Ok(residual)
}

/// Both sides of the truncated integration-by-parts identity
/// `int <u_t, (T_k u^+)^{2m-1}> eta dt = -int Phi_{k,m}(u^+) eta' dt`,
/// with `u_t` reconstructed by second-order differencing on the snapshot
/// grid.
pub fn ibp_identity_check(
    traj: &Trajectory,
    k: f64,
    m: f64,
    eta: &BumpProfile,
) -> Result<(f64, f64)> {
    if !(k > 0.0) || !(m >= 1.0) {
        return Err(Error::invalid("ibp identity needs k > 0 and m >= 1"));
    }
    let times = traj.times();
    if times.len() < 5 {
        return Err(Error::invalid(
            "trajectory too sparse for the identity check (need >= 5 snapshots)",
        ));
    }
    if eta.t0 < times[0] - 1e-12 || eta.t1 > times[times.len() - 1] + 1e-12 {
        return Err(Error::WindowNotCovered {
            t0: eta.t0,
            t1: eta.t1,
        });
    }
    let h = traj.snapshot_spacing();
    let wq = quadrature_weights(times.len(), h);
    let weight = traj.states[0].domain().node_weight();
    let n = times.len();
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for i in 0..n {
        let eta_v = eta.value(times[i]);
        let eta_d = eta.derivative(times[i]);
        if eta_v != 0.0 {
            // Second-order u_t: central inside, one-sided at the ends.
            let ut: Vec<f64> = {
                let s = traj.states();
                let nodal = |j: usize| s[j].nodal();
                if i == 0 {
                    nodal(0)
                        .iter()
                        .zip(nodal(1))
                        .zip(nodal(2))
                        .map(|((a, b), c)| (-3.0 * a + 4.0 * b - c) / (2.0 * h))
                        .collect()
                } else if i == n - 1 {
                    nodal(n - 1)
                        .iter()
                        .zip(nodal(n - 2))
                        .zip(nodal(n - 3))
                        .map(|((a, b), c)| (3.0 * a - 4.0 * b + c) / (2.0 * h))
                        .collect()
                } else {
                    nodal(i + 1)
                        .iter()
                        .zip(nodal(i - 1))
                        .map(|(a, b)| (a - b) / (2.0 * h))
                        .collect()
                }
            };
            let pairing: f64 = traj.states[i]
                .nodal()
                .iter()
                .zip(&ut)
                .map(|(&u, &du)| {
                    let tk = u.max(0.0).min(k);
                    du * tk.powf(2.0 * m - 1.0)
                })
                .sum::<f64>()
                * weight;
            lhs += wq[i] * pairing * eta_v;
        }
        if eta_d != 0.0 {
            let phi = big_phi(&traj.states[i].positive_part(), k, m)?;
            rhs -= wq[i] * phi * eta_d;
        }
    }
    Ok((lhs, rhs))
}

/// Result of the `L^2` decay inequality check
/// `||u(t)||_2 <= ||u(0)||_2 e^{-alpha t} + K`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayCheck {
    /// Analytically derived rate.
    pub alpha: f64,
    /// Analytically derived offset.
    pub k: f64,
    pub violations: usize,
    pub max_overshoot_rel: f64,
    /// Tightest empirical pair consistent with the logged norms.
    pub fitted_alpha: f64,
    pub fitted_k: f64,
}

/// Derived decay pair from the structural constants: Poincare for the
/// gradient term, the dissipativity offset, and Young's inequality for the
/// forcing term. For `p = 2` the reaction contributes its rate directly.
pub fn derived_decay_pair(
    domain: &BoxDomain,
    spec: &NonlinearitySpec,
    forcing: &ForcingSpec,
) -> (f64, f64) {
    let lambda1 = domain.lambda_1();
    let r = 2.0 * lambda1 + if spec.p == 2.0 { 2.0 * spec.alpha } else { 0.0 };
    let c2_term = 2.0 * spec.c2 * domain.measure();
    let g2 = forcing.norm_2();
    if g2 == 0.0 {
        // No Young split needed: d/dt ||u||^2 <= -r ||u||^2 + c2_term.
        (r / 2.0, (c2_term / r).sqrt())
    } else {
        let const_term = c2_term + 2.0 * g2 * g2 / r;
        (r / 4.0, (const_term / (r / 2.0)).sqrt())
    }
}

/// Check the decay inequality pointwise on the norm log, with a small
/// relative slack absorbing discretization error.
pub fn l2_decay_check(
    traj: &Trajectory,
    spec: &NonlinearitySpec,
    forcing: &ForcingSpec,
    rel_slack: f64,
) -> DecayCheck {
    let domain = traj.states[0].domain();
    let (alpha, k) = derived_decay_pair(domain, spec, forcing);
    let u0 = traj.norm_log[0].l2;
    let mut violations = 0;
    let mut max_overshoot = 0.0f64;
    for s in traj.norm_log() {
        let bound = u0 * (-alpha * s.t).exp() + k;
        let overshoot = (s.l2 - bound) / bound.max(1e-300);
        max_overshoot = max_overshoot.max(overshoot);
        if overshoot > rel_slack {
            violations += 1;
        }
    }
    // Tightest pair: plateau level from the tail, then the largest rate the
    // transient allows against that plateau.
    let tail_start = traj.norm_log.len().saturating_sub(traj.norm_log.len() / 10 + 1);
    let fitted_k = traj.norm_log[tail_start..]
        .iter()
        .fold(0.0f64, |m, s| m.max(s.l2));
    let mut fitted_alpha = f64::INFINITY;
    for s in traj.norm_log() {
        if s.t > 0.0 && s.l2 > fitted_k && u0 > 0.0 {
            let a = -((s.l2 - fitted_k) / u0).ln() / s.t;
            fitted_alpha = fitted_alpha.min(a);
        }
    }
    if !fitted_alpha.is_finite() {
        fitted_alpha = alpha;
    }
    DecayCheck {
        alpha,
        k,
        violations,
        max_overshoot_rel: max_overshoot,
        fitted_alpha: fitted_alpha.max(0.0),
        fitted_k,
    }
}
