//! Experiment orchestration behind the `rdlab` binary: one function per
//! subcommand, each reading an [`ExperimentConfig`], running the relevant
//! pipeline, and writing deterministic artifacts (JSON reports, CSV norm
//! logs, binary field sets) into the output directory.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::attractor::{
    attractor_lipschitz_check, branching_probe, build_attractor_sample, find_equilibria,
    linearized_spectrum, structure_check, unstable_manifold_shoot, AttractorSample,
    EquilibriaOptions, Equilibrium, ManifoldSegment, SampleOptions, StructureOptions,
    StructureReport,
};
use crate::config::ExperimentConfig;
use crate::dimension::{
    abstract_bound, box_counting, contraction_delta, laplacian_spectrum, paper_constants,
    project_onto_modes, search_bound, sigma, DimensionReport,
};
use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::forcing::ForcingSpec;
use crate::ladder::{
    attractor_linf_radius, fit_constants, linf_bound_check, rung_check, run_ladder,
    LadderConstants, LadderSchedule,
};
use crate::nonlinearity::{
    certify_dissipativity, certify_growth, certify_one_sided_lipschitz,
    certify_two_sided_lipschitz, LipschitzEstimate, NonlinearitySpec,
};
use crate::potential::{big_phi, phi_km};
use crate::report;
use crate::rng;
use crate::solver::{
    derived_decay_pair, l2_decay_check, simulate, DecayCheck, Scheme, SimulateOptions, Stepper,
    Trajectory,
};

#[derive(Debug, Parser)]
#[command(name = "rdlab", about = "Reaction-diffusion attractor laboratory", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment config file (flat `key = value` text).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for reports and artifacts.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Master seed override.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Config overrides, repeatable: --override solver.dt=1e-3
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the configured ensemble and emit norm logs.
    Simulate(RunArgs),
    /// Run the iteration ladder and fit its envelope constants.
    Ladder {
        #[command(flatten)]
        args: RunArgs,
        /// Wait used for the uniform-bound fit (overrides ladder.tau).
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Newton search for equilibria with linearized spectra.
    Equilibria(RunArgs),
    /// Assemble the attractor sample (forward limits + unstable manifolds).
    Attractor(RunArgs),
    /// Sampled containment checks for attractor = unstable set.
    Structure(RunArgs),
    /// Fractal-dimension bounds and the box-counting estimate.
    Dimension(RunArgs),
    /// Run the property smoke suite.
    Check(RunArgs),
}

impl RunArgs {
    pub fn load_config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        for o in &self.overrides {
            cfg.apply_override(o)?;
        }
        Ok(cfg)
    }

    fn prepare_out(&self) -> Result<&Path> {
        std::fs::create_dir_all(&self.out)?;
        Ok(&self.out)
    }
}

/// Dispatch a parsed command; returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Simulate(args) => {
            let cfg = args.load_config()?;
            cmd_simulate(&cfg, args.prepare_out()?)?;
            Ok(0)
        }
        Command::Ladder { args, tau } => {
            let mut cfg = args.load_config()?;
            if let Some(tau) = tau {
                cfg.ladder_tau = tau;
            }
            cmd_ladder(&cfg, args.prepare_out()?)?;
            Ok(0)
        }
        Command::Equilibria(args) => {
            let cfg = args.load_config()?;
            cmd_equilibria(&cfg, args.prepare_out()?)?;
            Ok(0)
        }
        Command::Attractor(args) => {
            let cfg = args.load_config()?;
            cmd_attractor(&cfg, args.prepare_out()?)?;
            Ok(0)
        }
        Command::Structure(args) => {
            let cfg = args.load_config()?;
            cmd_structure(&cfg, args.prepare_out()?)?;
            Ok(0)
        }
        Command::Dimension(args) => {
            let cfg = args.load_config()?;
            cmd_dimension(&cfg, args.prepare_out()?)?;
            Ok(0)
        }
        Command::Check(args) => {
            let cfg = args.load_config()?;
            let report = run_check(&cfg)?;
            report::write_json(&args.prepare_out()?.join("check_report.json"), &report)?;
            for line in &report.checks {
                println!(
                    "check {}: {}",
                    line.name,
                    if line.pass { "PASS" } else { "FAIL" }
                );
            }
            Ok(if report.failures == 0 { 0 } else { 1 })
        }
    }
}

// ---- simulate ---------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct SimulateReport {
    pub schema_version: u32,
    pub members: usize,
    pub scheme: String,
    pub dt: f64,
    pub horizon: f64,
    pub decay: Vec<DecayCheck>,
    pub blowups: usize,
}

pub fn cmd_simulate(cfg: &ExperimentConfig, out: &Path) -> Result<SimulateReport> {
    let domain = cfg.domain()?;
    let spec = cfg.nonlinearity()?;
    let forcing = cfg.forcing(&domain)?;
    let trajectories = cfg.run_ensemble()?;
    let mut decay = Vec::with_capacity(trajectories.len());
    for (i, traj) in trajectories.iter().enumerate() {
        report::write_norm_csv(&out.join(format!("norms_{i}.csv")), traj)?;
        crate::storage::save_field(&out.join(format!("terminal_{i}.field")), traj.terminal())?;
        decay.push(l2_decay_check(traj, &spec, &forcing, 1e-6));
    }
    let report = SimulateReport {
        schema_version: 1,
        members: trajectories.len(),
        scheme: cfg.scheme.clone(),
        dt: cfg.dt,
        horizon: cfg.horizon,
        decay,
        blowups: 0,
    };
    report::write_json(&out.join("simulate_report.json"), &report)?;
    Ok(report)
}

// ---- ladder -----------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct LadderEnsembleReport {
    pub schema_version: u32,
    pub schedule: LadderSchedule,
    pub t1: f64,
    pub constants: LadderConstants,
    pub training_members: usize,
    pub holdout_members: usize,
    pub holdout_violations: Vec<String>,
    pub per_member: Vec<crate::ladder::LadderReport>,
    pub linf_fit: crate::ladder::LinfFit,
}

pub fn cmd_ladder(cfg: &ExperimentConfig, out: &Path) -> Result<LadderEnsembleReport> {
    let trajectories = cfg.run_ensemble()?;
    let schedule = LadderSchedule {
        a: crate::ladder::rung_ratio(cfg.domain()?.dim() as u32)?,
        m0: 2.0,
        m_max: cfg.ladder_m_max,
        delta: cfg.ladder_delta,
        d_exp: cfg.ladder_d_exp,
    };
    let report = ladder_ensemble(
        &trajectories,
        cfg.ladder_t1,
        &schedule,
        cfg.ladder_holdout,
        cfg.ladder_tau,
    )?;
    report::write_json(&out.join("ladder_report.json"), &report)?;
    Ok(report)
}

/// Fit envelope constants on a training split, re-assert on the holdout,
/// and fit the uniform-bound constant over the whole ensemble.
pub fn ladder_ensemble(
    trajectories: &[Trajectory],
    t1: f64,
    schedule: &LadderSchedule,
    holdout: usize,
    tau: f64,
) -> Result<LadderEnsembleReport> {
    if trajectories.is_empty() {
        return Err(Error::invalid("empty ensemble"));
    }
    let holdout = holdout.min(trajectories.len().saturating_sub(1));
    let split = trajectories.len() - holdout;
    let mut training_records = Vec::new();
    for traj in &trajectories[..split] {
        let mut t = t1;
        for m in schedule.rungs() {
            let wait = schedule.wait(m);
            let k_grid = crate::ladder::default_k_grid(traj.state_at(t)?);
            training_records.push(rung_check(traj, t, wait, m, schedule.a, &k_grid)?);
            t += wait;
        }
    }
    let constants = fit_constants(&training_records, 1.0, schedule.d_exp);
    let mut per_member = Vec::with_capacity(trajectories.len());
    let mut holdout_violations = Vec::new();
    for (i, traj) in trajectories.iter().enumerate() {
        let rep = run_ladder(traj, t1, schedule, Some(constants))?;
        if i >= split {
            holdout_violations.extend(rep.violations.iter().cloned());
        }
        per_member.push(rep);
    }
    let linf_fit = linf_bound_check(trajectories, t1, tau)?;
    Ok(LadderEnsembleReport {
        schema_version: 1,
        schedule: schedule.clone(),
        t1,
        constants,
        training_members: split,
        holdout_members: holdout,
        holdout_violations,
        per_member,
        linf_fit,
    })
}

// ---- equilibria -------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct EquilibriumRow {
    pub l2: f64,
    pub linf: f64,
    pub residual: f64,
    pub morse_index: usize,
    pub spectrum: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EquilibriaReport {
    pub schema_version: u32,
    pub count: usize,
    pub failed_seeds: usize,
    pub equilibria: Vec<EquilibriumRow>,
}

pub fn cmd_equilibria(cfg: &ExperimentConfig, out: &Path) -> Result<EquilibriaReport> {
    let domain = cfg.domain()?;
    let spec = cfg.nonlinearity()?;
    let forcing = cfg.forcing(&domain)?;
    let result = find_equilibria(&domain, &spec, &forcing, &equilibria_options(cfg))?;
    let rows: Vec<EquilibriumRow> = result
        .equilibria
        .iter()
        .map(|eq| EquilibriumRow {
            l2: eq.state.l2_norm(),
            linf: eq.state.linf_nodal(),
            residual: eq.residual,
            morse_index: eq.morse_index,
            spectrum: eq.spectrum.clone(),
        })
        .collect();
    let states: Vec<Field> = result.equilibria.iter().map(|e| e.state.clone()).collect();
    report::write_field_set(&out.join("equilibria.bin"), &states)?;
    let report = EquilibriaReport {
        schema_version: 1,
        count: rows.len(),
        failed_seeds: result.failed_seeds,
        equilibria: rows,
    };
    report::write_json(&out.join("equilibria.json"), &report)?;
    Ok(report)
}

fn equilibria_options(cfg: &ExperimentConfig) -> EquilibriaOptions {
    EquilibriaOptions {
        seed_count: cfg.equilibria_seed_count,
        amplitude_max: cfg.equilibria_amplitude_max,
        newton_tol: cfg.equilibria_newton_tol,
        ..EquilibriaOptions::default()
    }
}

// ---- attractor pipeline -------------------------------------------------------

/// Everything the attractor-level commands share.
pub struct AttractorPipeline {
    pub domain: BoxDomain,
    pub spec: NonlinearitySpec,
    pub forcing: ForcingSpec,
    pub stepper: Stepper,
    pub equilibria: Vec<Equilibrium>,
    pub segments: Vec<ManifoldSegment>,
    pub forward: Vec<Trajectory>,
    pub sample: AttractorSample,
    pub radius: f64,
}

pub fn attractor_pipeline(cfg: &ExperimentConfig) -> Result<AttractorPipeline> {
    let domain = cfg.domain()?;
    let spec = cfg.nonlinearity()?;
    let forcing = cfg.forcing(&domain)?;
    let stepper = cfg.stepper(&domain, &spec)?;
    let result = find_equilibria(&domain, &spec, &forcing, &equilibria_options(cfg))?;
    let equilibria = result.equilibria;
    let mut segments = Vec::new();
    for eq in &equilibria {
        if eq.morse_index == 0 {
            continue;
        }
        let lin = linearized_spectrum(&domain, &spec, &eq.state)?;
        // Shoot at half the configured spacing so refinement studies can
        // re-thin without re-integrating.
        segments.extend(unstable_manifold_shoot(
            &stepper,
            &forcing,
            eq,
            &lin,
            &cfg.attractor_amplitudes,
            cfg.attractor_horizon,
            cfg.attractor_spacing / 2.0,
        )?);
    }
    let forward = {
        let mut forward = Vec::with_capacity(cfg.ensemble_count);
        for (i, u0) in cfg.initial_ensemble(&domain)?.into_iter().enumerate() {
            let mut opts = SimulateOptions::new(cfg.attractor_horizon);
            opts.snapshot_stride = cfg.snapshot_stride;
            opts.log_stride = cfg.log_stride;
            opts.seed_label = format!("ensemble/u0/{i}");
            forward.push(simulate(&stepper, &u0, &forcing, &opts)?);
        }
        forward
    };
    let sample_opts = SampleOptions {
        attractor_time: cfg.attractor_time,
        spacing: cfg.attractor_spacing,
    };
    let sample = build_attractor_sample(&forward, &segments, &equilibria, &sample_opts)?;
    let radius = attractor_linf_radius(&sample.points)?;
    Ok(AttractorPipeline {
        domain,
        spec,
        forcing,
        stepper,
        equilibria,
        segments,
        forward,
        sample,
        radius,
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AttractorReport {
    pub schema_version: u32,
    pub equilibria: usize,
    pub manifold_segments: usize,
    pub sample_points: usize,
    pub forward_points: usize,
    pub manifold_points: usize,
    pub radius: f64,
    /// Max distance back to the sample after flowing sample points for
    /// t = 1 (forward invariance at sample resolution).
    pub forward_invariance: f64,
}

pub fn cmd_attractor(cfg: &ExperimentConfig, out: &Path) -> Result<AttractorReport> {
    let pipe = attractor_pipeline(cfg)?;
    let forward_points = pipe
        .sample
        .provenance
        .iter()
        .filter(|&&p| p == crate::attractor::Provenance::ForwardLimit)
        .count();
    // Forward invariance at sample resolution, on a subsample.
    let mut invariance = 0.0f64;
    let stride = (pipe.sample.len() / 48).max(1);
    for (i, point) in pipe.sample.points.iter().enumerate() {
        if i % stride != 0 {
            continue;
        }
        let opts = SimulateOptions::new(1.0);
        let flowed = simulate(&pipe.stepper, point, &pipe.forcing, &opts)?;
        invariance = invariance.max(pipe.sample.min_distance_to(flowed.terminal())?);
    }
    report::write_field_set(&out.join("attractor_sample.bin"), &pipe.sample.points)?;
    let report = AttractorReport {
        schema_version: 1,
        equilibria: pipe.equilibria.len(),
        manifold_segments: pipe.segments.len(),
        sample_points: pipe.sample.len(),
        forward_points,
        manifold_points: pipe.sample.len() - forward_points,
        radius: pipe.radius,
        forward_invariance: invariance,
    };
    report::write_json(&out.join("attractor_report.json"), &report)?;
    Ok(report)
}

// ---- structure ----------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct StructurePairReport {
    pub schema_version: u32,
    pub base: StructureReport,
    /// Same comparison with the manifold sample spacing halved.
    pub refined: StructureReport,
}

pub fn cmd_structure(cfg: &ExperimentConfig, out: &Path) -> Result<StructurePairReport> {
    let pipe = attractor_pipeline(cfg)?;
    let base_opts = StructureOptions {
        sample: SampleOptions {
            attractor_time: cfg.attractor_time,
            spacing: cfg.attractor_spacing,
        },
        limit_tol: cfg.attractor_limit_tol,
        undecided_quota: cfg.structure_undecided_quota,
    };
    let base = structure_check(&pipe.forward, &pipe.segments, &pipe.equilibria, &base_opts)?;
    let refined_opts = StructureOptions {
        sample: SampleOptions {
            attractor_time: cfg.attractor_time,
            spacing: cfg.attractor_spacing / 2.0,
        },
        ..base_opts
    };
    let refined = structure_check(&pipe.forward, &pipe.segments, &pipe.equilibria, &refined_opts)?;
    let report = StructurePairReport {
        schema_version: 1,
        base,
        refined,
    };
    report::write_json(&out.join("structure_report.json"), &report)?;
    Ok(report)
}

// ---- dimension ------------------------------------------------------------------

/// Certified Lipschitz constant at radius `R`: closed form when the family
/// has one, otherwise the sampled estimate; errors if the sampled quotient
/// diverges (the dimension theorem genuinely needs two-sided Lipschitz).
pub fn certified_lipschitz(spec: &NonlinearitySpec, radius: f64) -> Result<f64> {
    if let Some(l) = spec.two_sided_closed_form(radius) {
        return Ok(l);
    }
    match certify_two_sided_lipschitz(spec, radius, 20_000)? {
        LipschitzEstimate::Finite(l) => Ok(l),
        LipschitzEstimate::Divergent { .. } => Err(Error::Infeasible(
            "two-sided Lipschitz estimate diverges; no dimension bound".into(),
        )),
    }
}

pub fn dimension_report(cfg: &ExperimentConfig) -> Result<DimensionReport> {
    let pipe = attractor_pipeline(cfg)?;
    // Lipschitz radius with a safety factor over the sampled sup-norm.
    let radius = (pipe.radius * 1.05).max(1e-6);
    let lipschitz = certified_lipschitz(&pipe.spec, radius)?;
    let spectrum = laplacian_spectrum(&pipe.domain, cfg.dimension_spectrum_count)?;
    let search = search_bound(
        lipschitz,
        &spectrum,
        &cfg.dimension_t_grid(),
        cfg.dimension_n_max,
    )?;
    let paper = paper_constants(
        lipschitz,
        pipe.domain.dim() as u32,
        &spectrum,
        cfg.dimension_alpha_slack,
    )?;
    let refs: Vec<&Field> = pipe.sample.points.iter().collect();
    let projected = project_onto_modes(&refs, cfg.dimension_modes)?;
    let (box_count, note) = match box_counting(&projected, &cfg.dimension_eps_grid()) {
        Ok(b) => (Some(b), String::new()),
        Err(Error::Infeasible(reason)) => (None, reason),
        Err(e) => return Err(e),
    };
    Ok(DimensionReport {
        schema_version: 1,
        lipschitz,
        radius,
        lambda_1: pipe.domain.lambda_1(),
        d_asym: spectrum.d_asym,
        search,
        paper,
        box_count,
        box_count_note: note,
    })
}

pub fn cmd_dimension(cfg: &ExperimentConfig, out: &Path) -> Result<DimensionReport> {
    let report = dimension_report(cfg)?;
    report::write_json(&out.join("dimension_report.json"), &report)?;
    Ok(report)
}

// ---- envelope / branching helpers (used by tests and the check suite) ----------

/// Deterministic pairs of nearby sample points for the attractor
/// Lipschitz-envelope check.
pub fn sample_pairs(sample: &AttractorSample, count: usize, seed: u64) -> Vec<(Field, Field)> {
    use rand::Rng;
    let mut rng = rng::stream(seed, "envelope/pairs");
    let n = sample.len();
    (0..count)
        .map(|_| {
            let i = rng.gen_range(0..n);
            let j = rng.gen_range(0..n);
            (sample.points[i].clone(), sample.points[j].clone())
        })
        .collect()
}

pub fn envelope_check(
    cfg: &ExperimentConfig,
    pipe: &AttractorPipeline,
) -> Result<crate::attractor::EnvelopeReport> {
    let radius = (pipe.radius * 1.05).max(1e-6);
    let lipschitz = certified_lipschitz(&pipe.spec, radius)?;
    let pairs = sample_pairs(&pipe.sample, cfg.envelope_pairs, cfg.master_seed);
    attractor_lipschitz_check(
        &pipe.stepper,
        &pipe.forcing,
        &pairs,
        &cfg.envelope_t_grid,
        lipschitz,
        cfg.envelope_slack,
    )
}

// ---- check ----------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct CheckLine {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CheckReport {
    pub schema_version: u32,
    pub checks: Vec<CheckLine>,
    pub failures: usize,
}

fn check(checks: &mut Vec<CheckLine>, name: &str, pass: bool, detail: String) {
    checks.push(CheckLine {
        name: name.to_string(),
        pass,
        detail,
    });
}

/// The property smoke suite behind `rdlab check`: fast structural
/// invariants over the configured problem.
pub fn run_check(cfg: &ExperimentConfig) -> Result<CheckReport> {
    let mut checks = Vec::new();
    let domain = cfg.domain()?;
    let spec = cfg.nonlinearity()?;
    let forcing = cfg.forcing(&domain)?;
    let samples = cfg.check_samples.max(8);

    // Spectral <-> nodal round trip on random fields.
    {
        let mut worst = 0.0f64;
        for i in 0..8 {
            let mut rng = rng::stream(cfg.master_seed, &format!("check/roundtrip/{i}"));
            let f = rng::random_field(&domain, &mut rng, 1.0);
            let back = Field::from_nodal(&domain, f.nodal().to_vec())?;
            let err = f
                .coeffs()
                .iter()
                .zip(back.coeffs())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            worst = worst.max(err);
        }
        check(
            &mut checks,
            "spectral_nodal_round_trip",
            worst <= 1e-12,
            format!("max coefficient error {worst:.3e}"),
        );
    }

    // Truncation idempotence and the potential sandwich.
    {
        let mut rng = rng::stream(cfg.master_seed, "check/sandwich");
        let mut pass = true;
        let mut detail = String::new();
        for i in 0..samples.min(64) {
            let f = rng::random_field(&domain, &mut rng, 1.0 + (i % 7) as f64);
            let plus = f.positive_part();
            for &m in &[1.0, 2.0, 4.0, 8.0] {
                for &k in &[0.1, 1.0, 10.0] {
                    let t1 = f.truncate(k)?;
                    let t2 = t1.truncate(k)?;
                    if t1.nodal() != t2.nodal() {
                        pass = false;
                        detail = format!("truncation not idempotent at k={k}");
                    }
                    let phi = big_phi(&plus, k, m)?;
                    let two_m = 2.0 * m;
                    let lower = plus.truncate(k)?.lp_norm(two_m)?.powf(two_m) / two_m;
                    let upper = plus.lp_norm(two_m)?.powf(two_m) / two_m;
                    let slack = 1e-10 * upper.max(1e-300);
                    if !(lower <= phi + slack && phi <= upper + slack) {
                        pass = false;
                        detail = format!("sandwich violated at m={m} k={k}");
                    }
                }
            }
        }
        check(&mut checks, "truncation_and_sandwich", pass, detail);
    }

    // Hoelder chain between norms.
    {
        let mut rng = rng::stream(cfg.master_seed, "check/hoelder");
        let f = rng::random_field(&domain, &mut rng, 2.0);
        let vol = domain.measure();
        let mut pass = true;
        for &(m, q) in &[(1.0, 2.0), (2.0, 4.0), (4.0, 8.0), (8.0, 64.0)] {
            let lhs = f.lp_norm(m)?;
            let rhs = vol.powf(1.0 / m - 1.0 / q) * f.lp_norm(q)?;
            if lhs > rhs * (1.0 + 1e-10) {
                pass = false;
            }
        }
        check(&mut checks, "hoelder_norm_chain", pass, String::new());
    }

    // phi_{k,m} convexity by second differences.
    {
        let mut pass = true;
        for &(k, m) in &[(0.5, 1.0), (1.0, 2.0), (2.0, 4.0)] {
            let h = 1e-3;
            for i in 1..2000 {
                let s = i as f64 * h;
                let dd = phi_km(s + h, k, m)? - 2.0 * phi_km(s, k, m)? + phi_km(s - h, k, m)?;
                if dd < -1e-12 * phi_km(s + h, k, m)?.max(1.0) {
                    pass = false;
                }
            }
        }
        check(&mut checks, "phi_convexity", pass, String::new());
    }

    // Structural hypotheses of the configured family.
    {
        let growth = certify_growth(&spec, (1e-6, 1e3), 10_000.max(samples))?;
        check(
            &mut checks,
            "growth_bound",
            growth.pass,
            format!("worst ratio {:.6e}", growth.worst),
        );
        let diss = certify_dissipativity(&spec, (1e-6, 1e3), 10_000.max(samples))?;
        check(
            &mut checks,
            "dissipativity_bound",
            diss.pass,
            format!("worst slack {:.6e}", diss.worst),
        );
        let one = certify_one_sided_lipschitz(&spec, 2.0, 10_000)?;
        let two = certify_two_sided_lipschitz(&spec, 2.0, 10_000)?;
        let pass = match (&one, &two) {
            (LipschitzEstimate::Finite(a), LipschitzEstimate::Finite(b)) => a <= &(b * (1.0 + 1e-12)),
            // A divergent two-sided with finite one-sided is impossible;
            // divergent one-sided is a property of the family, not a failure.
            (LipschitzEstimate::Divergent { .. }, _) => true,
            (LipschitzEstimate::Finite(_), LipschitzEstimate::Divergent { .. }) => false,
        };
        check(&mut checks, "two_sided_dominates_one_sided", pass, String::new());
    }

    // Exact single-mode heat decay and semiflow concatenation.
    {
        let zero_spec = crate::nonlinearity::builtin_family("zero", &[])?;
        let stepper = Stepper::new(&domain, &zero_spec, Scheme::parse(&cfg.scheme)?, 0.05)?;
        let g0 = ForcingSpec::zero(&domain);
        let u = Field::mode(&domain, &vec![1; domain.dim()], 1.0)?;
        let next = stepper.step(&u, &g0)?;
        let expect = (-domain.lambda_1() * 0.05).exp();
        let err = (next.coeffs()[0] - expect).abs();
        check(
            &mut checks,
            "modal_heat_decay_exact",
            err < 1e-14,
            format!("error {err:.3e}"),
        );

        let stepper = cfg.stepper(&domain, &spec)?;
        let mut rng = rng::stream(cfg.master_seed, "check/concat");
        let u0 = rng::random_field(&domain, &mut rng, 1.0);
        let whole = simulate(&stepper, &u0, &forcing, &SimulateOptions::new(0.5))?;
        let part1 = simulate(&stepper, &u0, &forcing, &SimulateOptions::new(0.3))?;
        let part2 = simulate(&stepper, part1.terminal(), &forcing, &SimulateOptions::new(0.2))?;
        let gap = whole.terminal().l2_distance(part2.terminal())?;
        check(
            &mut checks,
            "semiflow_concatenation",
            gap <= 1e-9,
            format!("terminal gap {gap:.3e}"),
        );
    }

    // Ladder wait-sum identity and product cap.
    {
        let schedule = LadderSchedule::for_dimension(domain.dim() as u32)?;
        let pass = schedule.total_wait() <= schedule.wait_bound() * (1.0 + 1e-14);
        check(
            &mut checks,
            "ladder_wait_geometric_cap",
            pass,
            format!(
                "total {} vs cap {}",
                schedule.total_wait(),
                schedule.wait_bound()
            ),
        );
    }

    // Contraction-delta shape and abstract-bound consistency.
    {
        let mut pass = true;
        let mut prev = f64::INFINITY;
        for &lam in &[1.0, 4.0, 9.0, 16.0] {
            let d = contraction_delta(2.0, lam, 0.4);
            if d >= prev {
                pass = false;
            }
            prev = d;
        }
        check(&mut checks, "contraction_monotone_in_lambda", pass, String::new());

        let ab = abstract_bound(2.0, 0.2, 3)?;
        let mut lo = 0.0f64;
        let mut hi = 1e6f64;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if sigma(2.0, 0.2, 3, mid) < 1.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let err = (ab.eta - hi).abs();
        check(
            &mut checks,
            "abstract_bound_matches_sigma_search",
            err <= 1e-12 * (1.0 + ab.eta),
            format!("closed {} vs search {hi}", ab.eta),
        );
    }

    // Decay inequality on one short run.
    {
        let stepper = cfg.stepper(&domain, &spec)?;
        let mut rng = rng::stream(cfg.master_seed, "check/decay");
        let u0 = rng::random_field(&domain, &mut rng, 5.0);
        let mut opts = SimulateOptions::new(cfg.horizon.min(5.0));
        opts.log_stride = 2;
        let traj = simulate(&stepper, &u0, &forcing, &opts)?;
        let decay = l2_decay_check(&traj, &spec, &forcing, 1e-6);
        check(
            &mut checks,
            "l2_decay_inequality",
            decay.violations == 0,
            format!(
                "alpha {:.4} K {:.4} overshoot {:.3e}",
                decay.alpha, decay.k, decay.max_overshoot_rel
            ),
        );
        let (alpha, k) = derived_decay_pair(&domain, &spec, &forcing);
        check(
            &mut checks,
            "decay_pair_is_positive",
            alpha > 0.0 && k >= 0.0,
            format!("alpha {alpha} K {k}"),
        );
    }

    // Branching probe sanity at zero scale.
    {
        let stepper = cfg.stepper(&domain, &spec)?;
        let mut rng = rng::stream(cfg.master_seed, "check/branch");
        let u0 = rng::random_field(&domain, &mut rng, 1.0);
        let probe = branching_probe(&stepper, &forcing, &u0, 0.1, 0.0, 2, 0.3, cfg.master_seed)?;
        check(
            &mut checks,
            "deterministic_restart_no_divergence",
            probe.divergence.iter().all(|&(_, d)| d == 0.0),
            String::new(),
        );
    }

    let failures = checks.iter().filter(|c| !c.pass).count();
    Ok(CheckReport {
        schema_version: 1,
        checks,
        failures,
    })
}
