//! Equilibria, linearized spectra, unstable-manifold shooting, and the
//! structural identity "attractor = unstable set = forward-limit set"
//! verified on model problems.
//!
//! Equilibria solve the discrete elliptic system with the same dealiased
//! reaction evaluation the stepper uses, so a converged equilibrium is a
//! fixed point of the time integrator to machine precision. Backward limits
//! (`t -> -infinity`) are realized by shooting from `z + a e` along unstable
//! eigendirections with `a` small — backward heat flow itself is ill-posed.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::forcing::ForcingSpec;
use crate::nonlinearity::NonlinearitySpec;
use crate::rng;
use crate::solver::{dealiased_reaction, simulate, SimulateOptions, Stepper, Trajectory};

/// Morse-index eigenvalue cutoff: eigenvalues below `-NEGATIVE_TOL` count
/// as unstable directions.
const NEGATIVE_TOL: f64 = 1e-8;

/// A numerically converged equilibrium of `-Laplace(z) + f(z) = g`.
#[derive(Debug, Clone)]
pub struct Equilibrium {
    pub state: Field,
    /// `L^2` norm of the discrete elliptic residual.
    pub residual: f64,
    /// Leading eigenvalues of the linearization, ascending.
    pub spectrum: Vec<f64>,
    /// Number of negative eigenvalues.
    pub morse_index: usize,
}

#[derive(Debug, Clone)]
pub struct EquilibriaOptions {
    pub seed_count: usize,
    /// Largest seed amplitude (span of the absorbing ball).
    pub amplitude_max: f64,
    pub newton_tol: f64,
    pub max_iterations: usize,
    /// `L^2` distance below which two solutions are the same equilibrium.
    pub dedup_tol: f64,
    /// How many leading eigenvalues to attach.
    pub spectrum_count: usize,
}

impl Default for EquilibriaOptions {
    fn default() -> Self {
        EquilibriaOptions {
            seed_count: 16,
            amplitude_max: 3.0,
            newton_tol: 1e-11,
            max_iterations: 60,
            dedup_tol: 1e-6,
            spectrum_count: 8,
        }
    }
}

/// Spectral residual of the elliptic problem, in coefficients:
/// `lambda_j c_j + [P f(u)]_j - g_j`.
fn elliptic_residual(
    domain: &BoxDomain,
    spec: &NonlinearitySpec,
    coeffs: &[f64],
    g: &[f64],
) -> Result<Vec<f64>> {
    let u = Field::from_coeffs(domain, coeffs.to_vec())?;
    let f = dealiased_reaction(spec, &u);
    let evs = domain.mode_eigenvalues();
    Ok(coeffs
        .iter()
        .zip(&evs)
        .zip(&f)
        .zip(g)
        .map(|(((c, l), fj), gj)| l * c + fj - gj)
        .collect())
}

fn residual_l2(domain: &BoxDomain, r: &[f64]) -> f64 {
    (domain.mode_mass() * r.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

/// Dense matrix of `v -> -Laplace(v) + f'(z) v` in the sine basis
/// (collocation product; symmetric by construction).
fn linearization_matrix(
    domain: &BoxDomain,
    spec: &NonlinearitySpec,
    z: &Field,
) -> Result<DMatrix<f64>> {
    let n = domain.node_count();
    if n > 4096 {
        return Err(Error::Eigensolver(format!(
            "dense linearization capped at 4096 modes, domain has {n}"
        )));
    }
    let fprime: Vec<f64> = z
        .nodal()
        .iter()
        .map(|&v| {
            spec.derivative(v).ok_or_else(|| {
                Error::invalid("linearization needs a differentiable reaction family")
            })
        })
        .collect::<Result<_>>()?;
    let evs = domain.mode_eigenvalues();
    let res = domain.resolution();
    let mut mat = DMatrix::zeros(n, n);
    let mut unit = vec![0.0; n];
    for j in 0..n {
        unit[j] = 1.0;
        let nodal = crate::sine::coeffs_to_nodal(&unit, res);
        unit[j] = 0.0;
        let prod: Vec<f64> = nodal.iter().zip(&fprime).map(|(a, b)| a * b).collect();
        let col = crate::sine::nodal_to_coeffs(&prod, res);
        for i in 0..n {
            mat[(i, j)] = col[i] + if i == j { evs[i] } else { 0.0 };
        }
    }
    // Symmetrize away transform roundoff.
    let mt = mat.transpose();
    Ok((mat + mt) * 0.5)
}

/// Eigen-decomposition of the linearization at `z`.
#[derive(Debug, Clone)]
pub struct Linearization {
    /// Ascending eigenvalues (all of them).
    pub eigenvalues: Vec<f64>,
    /// Eigenfields matching `eigenvalues`, `L^2`-normalized.
    pub eigenfields: Vec<Field>,
}

impl Linearization {
    pub fn morse_index(&self) -> usize {
        self.eigenvalues.iter().filter(|&&l| l < -NEGATIVE_TOL).count()
    }

    pub fn unstable_directions(&self) -> Vec<(f64, &Field)> {
        self.eigenvalues
            .iter()
            .zip(&self.eigenfields)
            .filter(|(&l, _)| l < -NEGATIVE_TOL)
            .map(|(&l, f)| (l, f))
            .collect()
    }
}

/// Smallest eigenvalues (and eigenfields) of `v -> -Laplace(v) + f'(z) v`.
pub fn linearized_spectrum(
    domain: &BoxDomain,
    spec: &NonlinearitySpec,
    z: &Field,
) -> Result<Linearization> {
    let mat = linearization_matrix(domain, spec, z)?;
    let eig = mat.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut eigenvalues = Vec::with_capacity(order.len());
    let mut eigenfields = Vec::with_capacity(order.len());
    for &i in &order {
        eigenvalues.push(eig.eigenvalues[i]);
        let mut coeffs: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        // Fix the sign deterministically: first significant entry positive.
        if let Some(first) = coeffs.iter().find(|v| v.abs() > 1e-10) {
            if *first < 0.0 {
                for c in &mut coeffs {
                    *c = -*c;
                }
            }
        }
        let f = Field::from_coeffs(domain, coeffs)?;
        let norm = f.l2_norm();
        eigenfields.push(if norm > 0.0 { f.scaled(1.0 / norm) } else { f });
    }
    Ok(Linearization {
        eigenvalues,
        eigenfields,
    })
}

/// Damped Newton for the discrete elliptic system from one seed.
fn newton_solve(
    domain: &BoxDomain,
    spec: &NonlinearitySpec,
    g: &[f64],
    seed: &Field,
    opts: &EquilibriaOptions,
) -> Result<(Field, f64)> {
    let mut coeffs = seed.coeffs().to_vec();
    let mut r = elliptic_residual(domain, spec, &coeffs, g)?;
    let mut rnorm = residual_l2(domain, &r);
    for iteration in 0..opts.max_iterations {
        if rnorm <= opts.newton_tol {
            let state = Field::from_coeffs(domain, coeffs)?;
            return Ok((state, rnorm));
        }
        let z = Field::from_coeffs(domain, coeffs.clone())?;
        let jac = linearization_matrix(domain, spec, &z)?;
        let rhs = DVector::from_iterator(r.len(), r.iter().map(|v| -v));
        let delta = jac
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::NewtonDiverged {
                residual: rnorm,
                iterations: iteration,
            })?;
        let mut accepted = false;
        let mut damping = 1.0;
        for _ in 0..12 {
            let trial: Vec<f64> = coeffs
                .iter()
                .zip(delta.iter())
                .map(|(c, d)| c + damping * d)
                .collect();
            let r_trial = elliptic_residual(domain, spec, &trial, g)?;
            let n_trial = residual_l2(domain, &r_trial);
            if n_trial < rnorm * (1.0 - 0.25 * damping) || n_trial <= opts.newton_tol {
                coeffs = trial;
                r = r_trial;
                rnorm = n_trial;
                accepted = true;
                break;
            }
            damping *= 0.5;
        }
        if !accepted {
            return Err(Error::NewtonDiverged {
                residual: rnorm,
                iterations: iteration,
            });
        }
    }
    if rnorm <= opts.newton_tol {
        let state = Field::from_coeffs(domain, coeffs)?;
        return Ok((state, rnorm));
    }
    Err(Error::NewtonDiverged {
        residual: rnorm,
        iterations: opts.max_iterations,
    })
}

/// Deterministic Newton seeds: zero plus low-mode sinusoids with amplitudes
/// spanning the absorbing ball (both signs).
fn newton_seeds(domain: &BoxDomain, opts: &EquilibriaOptions) -> Vec<Field> {
    let mut seeds = vec![Field::zeros(domain)];
    let per_mode_amps = ((opts.seed_count.saturating_sub(1)) / 6).max(2);
    let modes: Vec<Vec<usize>> = match domain.dim() {
        1 => (1..=3).map(|j| vec![j]).collect(),
        _ => vec![vec![1, 1], vec![2, 1], vec![1, 2]],
    };
    for mode in &modes {
        for i in 0..per_mode_amps {
            let t = i as f64 / (per_mode_amps - 1).max(1) as f64;
            let amp = 0.3 * (opts.amplitude_max / 0.3).powf(t);
            for sign in [1.0, -1.0] {
                if let Ok(f) = Field::mode(domain, mode, sign * amp) {
                    seeds.push(f);
                }
            }
        }
    }
    seeds
}

/// Outcome of an equilibria search, with Newton failures logged rather than
/// fatal.
#[derive(Debug)]
pub struct EquilibriaResult {
    pub equilibria: Vec<Equilibrium>,
    pub failed_seeds: usize,
}

/// Damped Newton from seeded guesses with deduplication by `L^2` distance.
pub fn find_equilibria(
    domain: &BoxDomain,
    spec: &NonlinearitySpec,
    forcing: &ForcingSpec,
    opts: &EquilibriaOptions,
) -> Result<EquilibriaResult> {
    if opts.seed_count < 1 {
        return Err(Error::invalid("seed_count must be at least 1"));
    }
    let g = forcing.field().coeffs();
    let mut found: Vec<(Field, f64)> = Vec::new();
    let mut failed = 0usize;
    for seed in newton_seeds(domain, opts) {
        match newton_solve(domain, spec, g, &seed, opts) {
            Ok((state, residual)) => {
                match found
                    .iter_mut()
                    .find(|(s, _)| s.l2_distance(&state).unwrap_or(f64::INFINITY) <= opts.dedup_tol)
                {
                    Some(existing) => {
                        if residual < existing.1 {
                            *existing = (state, residual);
                        }
                    }
                    None => found.push((state, residual)),
                }
            }
            Err(Error::NewtonDiverged { .. }) => failed += 1,
            Err(e) => return Err(e),
        }
    }
    // Deterministic order: by L2 norm, then by leading coefficient.
    found.sort_by(|a, b| {
        a.0.l2_norm()
            .total_cmp(&b.0.l2_norm())
            .then(a.0.coeffs()[0].total_cmp(&b.0.coeffs()[0]))
    });
    let mut equilibria = Vec::with_capacity(found.len());
    for (state, residual) in found {
        let lin = linearized_spectrum(domain, spec, &state)?;
        let spectrum: Vec<f64> = lin
            .eigenvalues
            .iter()
            .take(opts.spectrum_count)
            .copied()
            .collect();
        equilibria.push(Equilibrium {
            morse_index: lin.morse_index(),
            state,
            residual,
            spectrum,
        });
    }
    Ok(EquilibriaResult {
        equilibria,
        failed_seeds: failed,
    })
}

/// One branch of an unstable manifold, integrated forward from
/// `z + amplitude * e` and resampled by arclength on the fly: consecutive
/// points are at least `spacing` apart in `L^2`. Tagged with the
/// equilibrium it leaves as `t -> -infinity`.
#[derive(Debug, Clone)]
pub struct ManifoldSegment {
    /// Arclength-decimated points along the branch, flow-ordered.
    pub points: Vec<Field>,
    pub terminal: Field,
    /// `||u_t||_2` at the end of the run.
    pub terminal_speed: f64,
    pub backward_limit: Field,
    pub direction_index: usize,
    pub amplitude: f64,
    /// Native decimation spacing of `points`.
    pub spacing: f64,
}

/// Shoot the unstable manifold of an equilibrium: for each unstable
/// eigendirection `e` and each signed amplitude, integrate forward from
/// `z + a e`, keeping an arclength sample with the given spacing.
#[allow(clippy::too_many_arguments)]
pub fn unstable_manifold_shoot(
    stepper: &Stepper,
    forcing: &ForcingSpec,
    equilibrium: &Equilibrium,
    linearization: &Linearization,
    amplitudes: &[f64],
    horizon: f64,
    spacing: f64,
) -> Result<Vec<ManifoldSegment>> {
    if !(spacing > 0.0) {
        return Err(Error::invalid("arc spacing must be positive"));
    }
    let steps = (horizon / stepper.dt()).round().max(1.0) as usize;
    let mut segments = Vec::new();
    for (dir_idx, (_, e)) in linearization.unstable_directions().iter().enumerate() {
        for &a in amplitudes {
            for sign in [1.0, -1.0] {
                let amp = sign * a;
                let mut u = equilibrium.state.lin(1.0, e, amp)?;
                let mut points = vec![u.clone()];
                let mut prev = u.clone();
                for _ in 0..steps {
                    prev = u.clone();
                    u = stepper.step_capped(&u, 0.0, forcing, 0.1)?;
                    if points.last().unwrap().l2_distance(&u)? >= spacing {
                        points.push(u.clone());
                    }
                }
                let terminal_speed = u.l2_distance(&prev)? / stepper.dt();
                segments.push(ManifoldSegment {
                    points,
                    terminal: u.clone(),
                    terminal_speed,
                    backward_limit: equilibrium.state.clone(),
                    direction_index: dir_idx,
                    amplitude: amp,
                    spacing,
                });
            }
        }
    }
    Ok(segments)
}

/// Thin a flow-ordered point list to a coarser spacing (no-op if `spacing`
/// is at or below the native one).
pub fn decimate_points(points: &[Field], spacing: f64) -> Result<Vec<Field>> {
    let mut out: Vec<Field> = Vec::new();
    for p in points {
        match out.last() {
            None => out.push(p.clone()),
            Some(last) => {
                if last.l2_distance(p)? >= spacing {
                    out.push(p.clone());
                }
            }
        }
    }
    Ok(out)
}

/// Forward-limit classification against a set of equilibria.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitClassification {
    pub nearest: Option<usize>,
    pub distance: f64,
    pub terminal_speed: f64,
    pub converged: bool,
}

fn classify_terminal(
    terminal: &Field,
    terminal_speed: f64,
    equilibria: &[Equilibrium],
    tol: f64,
) -> Result<LimitClassification> {
    let mut nearest = None;
    let mut distance = f64::INFINITY;
    for (i, eq) in equilibria.iter().enumerate() {
        let d = terminal.l2_distance(&eq.state)?;
        if d < distance {
            distance = d;
            nearest = Some(i);
        }
    }
    Ok(LimitClassification {
        nearest,
        distance,
        terminal_speed,
        converged: distance <= tol && terminal_speed <= tol,
    })
}

/// Classify where a trajectory has settled: nearest equilibrium, final
/// distance, and whether the terminal speed certifies convergence.
pub fn forward_limit_check(
    traj: &Trajectory,
    equilibria: &[Equilibrium],
    tol: f64,
) -> Result<LimitClassification> {
    let states = traj.states();
    if states.len() < 2 {
        return Err(Error::invalid("trajectory too short for limit check"));
    }
    let last = &states[states.len() - 1];
    let prev = &states[states.len() - 2];
    let h = traj.times()[states.len() - 1] - traj.times()[states.len() - 2];
    let terminal_speed = last.l2_distance(prev)? / h;
    classify_terminal(last, terminal_speed, equilibria, tol)
}

/// Same classification for a manifold segment.
pub fn segment_limit_check(
    segment: &ManifoldSegment,
    equilibria: &[Equilibrium],
    tol: f64,
) -> Result<LimitClassification> {
    classify_terminal(&segment.terminal, segment.terminal_speed, equilibria, tol)
}

/// How a sample point was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    ForwardLimit,
    ManifoldShoot,
}

/// Finite sample of the attractor: long-time forward snapshots plus
/// arclength-sampled unstable-manifold points and the equilibria.
#[derive(Debug, Clone)]
pub struct AttractorSample {
    pub points: Vec<Field>,
    pub provenance: Vec<Provenance>,
}

impl AttractorSample {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn min_distance_to(&self, f: &Field) -> Result<f64> {
        let mut best = f64::INFINITY;
        for p in &self.points {
            best = best.min(p.l2_distance(f)?);
        }
        Ok(best)
    }
}

#[derive(Debug, Clone)]
pub struct SampleOptions {
    /// Forward snapshots from this time onward count as attractor points.
    pub attractor_time: f64,
    /// Manifold arclength spacing (segments are re-thinned to this if it is
    /// coarser than their native spacing).
    pub spacing: f64,
}

/// Assemble an attractor sample from forward runs, manifold segments, and
/// the equilibria themselves.
pub fn build_attractor_sample(
    forward: &[Trajectory],
    segments: &[ManifoldSegment],
    equilibria: &[Equilibrium],
    opts: &SampleOptions,
) -> Result<AttractorSample> {
    let mut points = Vec::new();
    let mut provenance = Vec::new();
    for eq in equilibria {
        points.push(eq.state.clone());
        provenance.push(Provenance::ManifoldShoot);
    }
    for seg in segments {
        let thinned = if opts.spacing > seg.spacing {
            decimate_points(&seg.points, opts.spacing)?
        } else {
            seg.points.clone()
        };
        for f in thinned {
            points.push(f);
            provenance.push(Provenance::ManifoldShoot);
        }
    }
    for traj in forward {
        for (i, &t) in traj.times().iter().enumerate() {
            if t >= opts.attractor_time {
                points.push(traj.states()[i].clone());
                provenance.push(Provenance::ForwardLimit);
            }
        }
    }
    Ok(AttractorSample { points, provenance })
}

/// Sampled two-sided containment report for
/// "attractor = unstable set = forward-limit set".
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructureReport {
    /// Max over late forward snapshots of the distance to the manifold
    /// sample (the `A subset M+` direction at sample resolution).
    pub forward_to_manifold: f64,
    /// Forward-limit classifications of the manifold terminals
    /// (the `M+ subset M-` direction): count converged to an equilibrium.
    pub manifold_terminals_converged: usize,
    pub manifold_terminals_total: usize,
    pub undecided: usize,
    pub forward_points: usize,
    pub manifold_points: usize,
    pub conclusive: bool,
}

#[derive(Debug, Clone)]
pub struct StructureOptions {
    pub sample: SampleOptions,
    /// Convergence tolerance for forward limits.
    pub limit_tol: f64,
    /// Report is inconclusive if more than this many terminals are
    /// undecided.
    pub undecided_quota: usize,
}

/// Two sampled set comparisons: every late forward snapshot must sit near
/// the manifold sample, and every manifold branch must converge forward to
/// an equilibrium.
pub fn structure_check(
    forward: &[Trajectory],
    segments: &[ManifoldSegment],
    equilibria: &[Equilibrium],
    opts: &StructureOptions,
) -> Result<StructureReport> {
    let manifold_sample = build_attractor_sample(&[], segments, equilibria, &opts.sample)?;
    let mut forward_to_manifold = 0.0f64;
    let mut forward_points = 0usize;
    for traj in forward {
        for (i, &t) in traj.times().iter().enumerate() {
            if t >= opts.sample.attractor_time {
                forward_points += 1;
                let d = manifold_sample.min_distance_to(&traj.states()[i])?;
                forward_to_manifold = forward_to_manifold.max(d);
            }
        }
    }
    let mut converged = 0usize;
    let mut undecided = 0usize;
    for seg in segments {
        let class = segment_limit_check(seg, equilibria, opts.limit_tol)?;
        if class.converged {
            converged += 1;
        } else {
            undecided += 1;
        }
    }
    Ok(StructureReport {
        forward_to_manifold,
        manifold_terminals_converged: converged,
        manifold_terminals_total: segments.len(),
        undecided,
        forward_points,
        manifold_points: manifold_sample.len(),
        conclusive: undecided <= opts.undecided_quota,
    })
}

/// Exponential-envelope check for pairs of trajectories started on the
/// attractor sample: `||u(t) - v(t)|| <= ||u0 - v0|| e^{Lt} (1 + slack)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub pairs: usize,
    pub violations: usize,
    /// Max over pairs and grid times of `||u-v|| / (||u0-v0|| e^{Lt})`.
    pub max_ratio: f64,
}

pub fn attractor_lipschitz_check(
    stepper: &Stepper,
    forcing: &ForcingSpec,
    pairs: &[(Field, Field)],
    t_grid: &[f64],
    lipschitz: f64,
    slack: f64,
) -> Result<EnvelopeReport> {
    if t_grid.is_empty() {
        return Err(Error::invalid("empty time grid"));
    }
    let horizon = t_grid.iter().fold(0.0f64, |m, &t| m.max(t));
    let stride = 1.max((t_grid[0].max(1e-9) / stepper.dt() / 4.0) as usize);
    let mut violations = 0usize;
    let mut max_ratio = 0.0f64;
    for (u0, v0) in pairs {
        let d0 = u0.l2_distance(v0)?;
        if d0 == 0.0 {
            // Deterministic scheme: identical states stay identical.
            continue;
        }
        let mut opts = SimulateOptions::new(horizon);
        opts.snapshot_stride = stride;
        opts.log_stride = stride * 16;
        let tu = simulate(stepper, u0, forcing, &opts)?;
        let tv = simulate(stepper, v0, forcing, &opts)?;
        for &t in t_grid {
            let du = tu.state_at(t)?;
            let dv = tv.state_at(t)?;
            let d = du.l2_distance(dv)?;
            let envelope = d0 * (lipschitz * t).exp();
            let ratio = d / envelope;
            max_ratio = max_ratio.max(ratio);
            if ratio > 1.0 + slack {
                violations += 1;
            }
        }
    }
    Ok(EnvelopeReport {
        pairs: pairs.len(),
        violations,
        max_ratio,
    })
}

/// Divergence statistics for a perturbed-restart ensemble.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchingProbe {
    pub scale: f64,
    pub initial_spread: f64,
    /// `(t, max pairwise L^2 distance)` along the probe horizon.
    pub divergence: Vec<(f64, f64)>,
    /// Largest nodal sup-norm seen (the radius at which a Lipschitz
    /// constant must be certified for the envelope to be meaningful).
    pub max_linf: f64,
}

impl BranchingProbe {
    /// Max over times of `d(t) / (d(0) e^{Lt})`; above 1 the Gronwall
    /// envelope with constant `L` is violated.
    pub fn envelope_violation_factor(&self, lipschitz: f64) -> f64 {
        if self.initial_spread == 0.0 {
            return 0.0;
        }
        self.divergence
            .iter()
            .map(|&(t, d)| d / (self.initial_spread * (lipschitz * t).exp()))
            .fold(0.0, f64::max)
    }
}

/// Restart an ensemble from `u(tau)` with perturbations of the given scale
/// and track the max pairwise divergence.
#[allow(clippy::too_many_arguments)]
pub fn branching_probe(
    stepper: &Stepper,
    forcing: &ForcingSpec,
    u0: &Field,
    tau: f64,
    scale: f64,
    ensemble: usize,
    horizon: f64,
    seed: u64,
) -> Result<BranchingProbe> {
    if ensemble < 2 {
        return Err(Error::invalid("branching probe needs at least 2 members"));
    }
    let domain = stepper.domain().clone();
    let base = if tau > 0.0 {
        let opts = SimulateOptions::new(tau);
        simulate(stepper, u0, forcing, &opts)?.terminal().clone()
    } else {
        u0.clone()
    };
    let mut members = Vec::with_capacity(ensemble);
    for i in 0..ensemble {
        let mut rng = rng::stream(seed, &format!("branching/{i}"));
        let xi = rng::random_field(&domain, &mut rng, 1.0);
        members.push(base.lin(1.0, &xi, scale)?);
    }
    let steps = (horizon / stepper.dt()).round() as usize;
    let compare_stride = (steps / 64).max(1);
    let mut divergence = Vec::new();
    let mut max_linf = 0.0f64;
    let spread = |fields: &[Field]| -> Result<f64> {
        let mut worst = 0.0f64;
        for i in 0..fields.len() {
            for j in (i + 1)..fields.len() {
                worst = worst.max(fields[i].l2_distance(&fields[j])?);
            }
        }
        Ok(worst)
    };
    let initial_spread = spread(&members)?;
    divergence.push((0.0, initial_spread));
    for step in 1..=steps {
        for m in &mut members {
            *m = stepper.step_capped(m, 0.0, forcing, 0.1)?;
        }
        if step % compare_stride == 0 || step == steps {
            let t = step as f64 * stepper.dt();
            divergence.push((t, spread(&members)?));
            for m in &members {
                max_linf = max_linf.max(m.linf_nodal());
            }
        }
    }
    Ok(BranchingProbe {
        scale,
        initial_spread,
        divergence,
        max_linf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::builtin_family;
    use crate::solver::Scheme;

    fn interval(n: usize) -> BoxDomain {
        BoxDomain::interval_pi(n).unwrap()
    }

    fn cubic(lambda: f64) -> NonlinearitySpec {
        builtin_family("cubic_chafee_infante", &[lambda]).unwrap()
    }

    #[test]
    fn spectrum_at_zero_is_the_shifted_laplacian() {
        let dom = interval(31);
        let spec = cubic(2.0);
        let z = Field::zeros(&dom);
        let lin = linearized_spectrum(&dom, &spec, &z).unwrap();
        // Eigenvalues n^2 - 2: leading -1, 2, 7.
        assert!((lin.eigenvalues[0] + 1.0).abs() < 1e-10);
        assert!((lin.eigenvalues[1] - 2.0).abs() < 1e-10);
        assert!((lin.eigenvalues[2] - 7.0).abs() < 1e-10);
        assert_eq!(lin.morse_index(), 1);
        // Monotone shift: f(u) = u gives n^2 + 1 > 0.
        let linear = builtin_family("odd_power", &[2.0, 0.0]).unwrap();
        let lin2 = linearized_spectrum(&dom, &linear, &z).unwrap();
        assert!((lin2.eigenvalues[0] - 2.0).abs() < 1e-10);
        assert_eq!(lin2.morse_index(), 0);
    }

    #[test]
    fn subcritical_lambda_has_only_the_origin() {
        let dom = interval(31);
        let spec = cubic(0.5);
        let g = ForcingSpec::zero(&dom);
        let res = find_equilibria(&dom, &spec, &g, &EquilibriaOptions::default()).unwrap();
        assert_eq!(res.equilibria.len(), 1, "found {:#?}", res.equilibria.len());
        assert!(res.equilibria[0].state.l2_norm() < 1e-9);
        assert_eq!(res.equilibria[0].morse_index, 0);
    }

    #[test]
    fn supercritical_lambda_two_has_three_equilibria() {
        let dom = interval(63);
        let spec = cubic(2.0);
        let g = ForcingSpec::zero(&dom);
        let res = find_equilibria(&dom, &spec, &g, &EquilibriaOptions::default()).unwrap();
        assert_eq!(res.equilibria.len(), 3);
        for eq in &res.equilibria {
            assert!(eq.residual <= 1e-10, "residual {}", eq.residual);
        }
        // Sorted by norm: origin first, then the symmetric pair.
        assert!(res.equilibria[0].state.l2_norm() < 1e-9);
        assert_eq!(res.equilibria[0].morse_index, 1);
        assert_eq!(res.equilibria[1].morse_index, 0);
        assert_eq!(res.equilibria[2].morse_index, 0);
        let phi_plus = &res.equilibria[2].state;
        let phi_minus = &res.equilibria[1].state;
        assert!(phi_plus.l2_distance(&phi_minus.scaled(-1.0)).unwrap() < 1e-8);
    }

    #[test]
    fn equilibrium_is_a_fixed_point_of_the_stepper() {
        let dom = interval(63);
        let spec = cubic(2.0);
        let g = ForcingSpec::zero(&dom);
        let res = find_equilibria(&dom, &spec, &g, &EquilibriaOptions::default()).unwrap();
        let phi = &res.equilibria[2].state;
        let stepper = Stepper::new(&dom, &spec, Scheme::Etd2Rk, 1e-2).unwrap();
        let traj = simulate(&stepper, phi, &g, &SimulateOptions::new(1.0)).unwrap();
        assert!(traj.terminal().l2_distance(phi).unwrap() < 1e-9);
    }

    #[test]
    fn manifold_shoot_connects_origin_to_both_wells() {
        let dom = interval(63);
        let spec = cubic(2.0);
        let g = ForcingSpec::zero(&dom);
        let res = find_equilibria(&dom, &spec, &g, &EquilibriaOptions::default()).unwrap();
        let origin = &res.equilibria[0];
        let lin = linearized_spectrum(&dom, &spec, &origin.state).unwrap();
        assert_eq!(lin.morse_index(), 1);
        let stepper = Stepper::new(&dom, &spec, Scheme::Etd2Rk, 2e-3).unwrap();
        let segments =
            unstable_manifold_shoot(&stepper, &g, origin, &lin, &[1e-4], 25.0, 0.01).unwrap();
        assert_eq!(segments.len(), 2);
        let mut limits = Vec::new();
        for seg in &segments {
            let class = segment_limit_check(seg, &res.equilibria, 1e-6).unwrap();
            assert!(class.converged, "distance {}", class.distance);
            limits.push(class.nearest.unwrap());
            // Points walk monotonically away from the backward limit at
            // first: the first point is within the seed amplitude of 0.
            assert!(seg.points[0].l2_distance(&origin.state).unwrap() < 2e-4);
            assert!(seg.points.len() > 100);
        }
        limits.sort_unstable();
        assert_eq!(limits, vec![1, 2]); // one branch to each well
        // Index-0 equilibria have no unstable directions to shoot.
        let lin_stable = linearized_spectrum(&dom, &spec, &res.equilibria[1].state).unwrap();
        let none = unstable_manifold_shoot(
            &stepper,
            &g,
            &res.equilibria[1],
            &lin_stable,
            &[1e-4],
            1.0,
            0.01,
        )
        .unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn decimation_respects_spacing_and_is_idempotent() {
        let dom = interval(16);
        let points: Vec<Field> = (0..100)
            .map(|i| Field::mode(&dom, &[1], i as f64 * 0.01).unwrap())
            .collect();
        let thin = decimate_points(&points, 0.05).unwrap();
        for pair in thin.windows(2) {
            assert!(pair[0].l2_distance(&pair[1]).unwrap() >= 0.05 - 1e-12);
        }
        let again = decimate_points(&thin, 0.05).unwrap();
        assert_eq!(again.len(), thin.len());
    }

    #[test]
    fn escape_time_grows_logarithmically_as_amplitude_shrinks() {
        let dom = interval(31);
        let spec = cubic(2.0);
        let g = ForcingSpec::zero(&dom);
        let stepper = Stepper::new(&dom, &spec, Scheme::Etd2Rk, 1e-3).unwrap();
        let e = Field::mode(&dom, &[1], 1.0).unwrap();
        let e = e.scaled(1.0 / e.l2_norm());
        let ball = 0.1;
        let mut escapes = Vec::new();
        for &a in &[1e-3, 1e-4, 1e-5] {
            let mut u = e.scaled(a);
            let mut t = 0.0;
            while u.l2_norm() < ball && t < 40.0 {
                u = stepper.step(&u, &g).unwrap();
                t += stepper.dt();
            }
            escapes.push(t);
        }
        // Linearization rate at 0 is mu = lambda - 1 = 1: escape time grows
        // by ln(10)/mu ~ 2.30 per decade.
        let d1 = escapes[1] - escapes[0];
        let d2 = escapes[2] - escapes[1];
        assert!((d1 - 2.30).abs() < 0.15, "d1 = {d1}");
        assert!((d2 - 2.30).abs() < 0.15, "d2 = {d2}");
    }

    #[test]
    fn forward_limit_from_an_equilibrium_is_immediate() {
        let dom = interval(31);
        let spec = cubic(0.5);
        let g = ForcingSpec::zero(&dom);
        let res = find_equilibria(&dom, &spec, &g, &EquilibriaOptions::default()).unwrap();
        let stepper = Stepper::new(&dom, &spec, Scheme::Etd2Rk, 1e-2).unwrap();
        let traj = simulate(
            &stepper,
            &res.equilibria[0].state,
            &g,
            &SimulateOptions::new(1.0),
        )
        .unwrap();
        let class = forward_limit_check(&traj, &res.equilibria, 1e-8).unwrap();
        assert!(class.converged);
        assert!(class.distance < 1e-10);
    }

    #[test]
    fn zero_scale_probe_has_zero_divergence() {
        let dom = interval(31);
        let spec = cubic(2.0);
        let g = ForcingSpec::zero(&dom);
        let stepper = Stepper::new(&dom, &spec, Scheme::Etd2Rk, 1e-2).unwrap();
        let u0 = Field::mode(&dom, &[1], 0.5).unwrap();
        let probe = branching_probe(&stepper, &g, &u0, 0.5, 0.0, 3, 1.0, 9).unwrap();
        assert_eq!(probe.initial_spread, 0.0);
        assert!(probe.divergence.iter().all(|&(_, d)| d == 0.0));
        assert_eq!(probe.envelope_violation_factor(1.0), 0.0);
    }

    #[test]
    fn identical_pairs_never_violate_the_envelope() {
        let dom = interval(31);
        let spec = cubic(2.0);
        let g = ForcingSpec::zero(&dom);
        let stepper = Stepper::new(&dom, &spec, Scheme::Etd2Rk, 1e-2).unwrap();
        let u = Field::mode(&dom, &[1], 0.3).unwrap();
        let report = attractor_lipschitz_check(
            &stepper,
            &g,
            &[(u.clone(), u.clone())],
            &[0.5, 1.0],
            2.0,
            1e-3,
        )
        .unwrap();
        assert_eq!(report.violations, 0);
        assert_eq!(report.max_ratio, 0.0);
    }
}
