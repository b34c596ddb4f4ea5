//! Flat-text experiment configuration: `section.key = value` lines, `#`
//! comments, every key validated against the registry below. All randomness
//! derives from `seeds.master`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::forcing::ForcingSpec;
use crate::nonlinearity::{builtin_family, NonlinearitySpec};
use crate::rng;
use crate::solver::{simulate, Scheme, SimulateOptions, Stepper, Trajectory};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    // domain
    pub domain_dim: usize,
    pub domain_lengths: Vec<f64>,
    pub domain_resolution: Vec<usize>,
    // nonlinearity
    pub family: String,
    pub family_params: Vec<f64>,
    // forcing
    pub forcing_profile: String,
    pub forcing_mode_index: usize,
    pub forcing_amplitude: f64,
    pub forcing_s_exponent: f64,
    // solver
    pub dt: f64,
    pub horizon: f64,
    pub scheme: String,
    pub snapshot_stride: usize,
    pub log_stride: usize,
    pub lm_norms: Vec<f64>,
    // ensemble
    pub ensemble_count: usize,
    pub ensemble_l2_min: f64,
    pub ensemble_l2_max: f64,
    pub ensemble_profile: String,
    // seeds
    pub master_seed: u64,
    // ladder
    pub ladder_delta: f64,
    pub ladder_d_exp: f64,
    pub ladder_m_max: f64,
    pub ladder_t1: f64,
    pub ladder_tau: f64,
    pub ladder_holdout: usize,
    // equilibria
    pub equilibria_seed_count: usize,
    pub equilibria_amplitude_max: f64,
    pub equilibria_newton_tol: f64,
    // attractor
    pub attractor_horizon: f64,
    pub attractor_time: f64,
    pub attractor_spacing: f64,
    pub attractor_amplitudes: Vec<f64>,
    pub attractor_limit_tol: f64,
    // structure
    pub structure_undecided_quota: usize,
    // lipschitz envelope
    pub envelope_pairs: usize,
    pub envelope_slack: f64,
    pub envelope_t_grid: Vec<f64>,
    // branching probe
    pub branching_scales: Vec<f64>,
    pub branching_ensemble: usize,
    pub branching_tau: f64,
    pub branching_horizon: f64,
    // dimension
    pub dimension_spectrum_count: usize,
    pub dimension_n_max: usize,
    pub dimension_t_min: f64,
    pub dimension_t_max: f64,
    pub dimension_t_count: usize,
    pub dimension_modes: usize,
    pub dimension_eps_max: f64,
    pub dimension_eps_count: usize,
    pub dimension_alpha_slack: f64,
    // check
    pub check_samples: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            domain_dim: 1,
            domain_lengths: vec![std::f64::consts::PI],
            domain_resolution: vec![127],
            family: "cubic_chafee_infante".into(),
            family_params: vec![2.0],
            forcing_profile: "zero".into(),
            forcing_mode_index: 1,
            forcing_amplitude: 0.0,
            forcing_s_exponent: 2.0,
            dt: 2e-3,
            horizon: 10.0,
            scheme: "etd2rk".into(),
            snapshot_stride: 5,
            log_stride: 1,
            lm_norms: vec![64.0],
            ensemble_count: 8,
            ensemble_l2_min: 1.0,
            ensemble_l2_max: 1000.0,
            ensemble_profile: "random".into(),
            master_seed: 20240001,
            ladder_delta: 0.5,
            ladder_d_exp: 1.0,
            ladder_m_max: 64.0,
            ladder_t1: 1.0,
            ladder_tau: 1.0,
            ladder_holdout: 2,
            equilibria_seed_count: 16,
            equilibria_amplitude_max: 3.0,
            equilibria_newton_tol: 1e-11,
            attractor_horizon: 25.0,
            attractor_time: 8.0,
            attractor_spacing: 2e-3,
            attractor_amplitudes: vec![1e-4, 2e-4],
            attractor_limit_tol: 1e-6,
            structure_undecided_quota: 0,
            envelope_pairs: 100,
            envelope_slack: 1e-3,
            envelope_t_grid: vec![0.25, 0.5, 1.0, 2.0],
            branching_scales: vec![1e-3, 1e-4, 1e-5],
            branching_ensemble: 4,
            branching_tau: 0.5,
            branching_horizon: 3.0,
            dimension_spectrum_count: 4000,
            dimension_n_max: 64,
            dimension_t_min: 1e-3,
            dimension_t_max: 20.0,
            dimension_t_count: 400,
            dimension_modes: 8,
            dimension_eps_max: 0.5,
            dimension_eps_count: 9,
            dimension_alpha_slack: 1.0,
            check_samples: 200,
        }
    }
}

fn parse_f64(key: &str, v: &str, line: usize) -> Result<f64> {
    v.trim().parse().map_err(|_| Error::Config {
        line,
        message: format!("key `{key}` expects a real number, got `{v}`"),
    })
}

fn parse_usize(key: &str, v: &str, line: usize) -> Result<usize> {
    v.trim().parse().map_err(|_| Error::Config {
        line,
        message: format!("key `{key}` expects a nonnegative integer, got `{v}`"),
    })
}

fn parse_u64(key: &str, v: &str, line: usize) -> Result<u64> {
    v.trim().parse().map_err(|_| Error::Config {
        line,
        message: format!("key `{key}` expects a 64-bit seed, got `{v}`"),
    })
}

fn parse_f64_list(key: &str, v: &str, line: usize) -> Result<Vec<f64>> {
    v.split(',')
        .map(|s| parse_f64(key, s, line))
        .collect::<Result<Vec<f64>>>()
        .and_then(|list| {
            if list.is_empty() {
                Err(Error::Config {
                    line,
                    message: format!("key `{key}` expects at least one value"),
                })
            } else {
                Ok(list)
            }
        })
}

fn parse_usize_list(key: &str, v: &str, line: usize) -> Result<Vec<usize>> {
    v.split(',').map(|s| parse_usize(key, s, line)).collect()
}

impl ExperimentConfig {
    /// Parse config text over the defaults.
    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(Error::Config {
                line: line_no,
                message: format!("expected `key = value`, got `{raw}`"),
            })?;
            cfg.set(key.trim(), value.trim(), line_no)?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)?;
        ExperimentConfig::parse(&text)
    }

    /// Apply a `key=value` override (CLI `--override`).
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (key, value) = spec.split_once('=').ok_or_else(|| {
            Error::invalid(format!("override `{spec}` is not of the form key=value"))
        })?;
        self.set(key.trim(), value.trim(), 0)
    }

    fn set(&mut self, key: &str, v: &str, line: usize) -> Result<()> {
        match key {
            "domain.dim" => self.domain_dim = parse_usize(key, v, line)?,
            "domain.lengths" => self.domain_lengths = parse_f64_list(key, v, line)?,
            "domain.resolution" => self.domain_resolution = parse_usize_list(key, v, line)?,
            "nonlinearity.family" => self.family = v.to_string(),
            "nonlinearity.params" => self.family_params = parse_f64_list(key, v, line)?,
            "forcing.profile" => self.forcing_profile = v.to_string(),
            "forcing.mode_index" => self.forcing_mode_index = parse_usize(key, v, line)?,
            "forcing.amplitude" => self.forcing_amplitude = parse_f64(key, v, line)?,
            "forcing.s_exponent" => self.forcing_s_exponent = parse_f64(key, v, line)?,
            "solver.dt" => self.dt = parse_f64(key, v, line)?,
            "solver.horizon" => self.horizon = parse_f64(key, v, line)?,
            "solver.scheme" => self.scheme = v.to_string(),
            "solver.snapshot_stride" => self.snapshot_stride = parse_usize(key, v, line)?,
            "solver.log_stride" => self.log_stride = parse_usize(key, v, line)?,
            "solver.lm_norms" => self.lm_norms = parse_f64_list(key, v, line)?,
            "ensemble.count" => self.ensemble_count = parse_usize(key, v, line)?,
            "ensemble.l2_min" => self.ensemble_l2_min = parse_f64(key, v, line)?,
            "ensemble.l2_max" => self.ensemble_l2_max = parse_f64(key, v, line)?,
            "ensemble.profile" => self.ensemble_profile = v.to_string(),
            "seeds.master" => self.master_seed = parse_u64(key, v, line)?,
            "ladder.delta" => self.ladder_delta = parse_f64(key, v, line)?,
            "ladder.d_exp" => self.ladder_d_exp = parse_f64(key, v, line)?,
            "ladder.m_max" => self.ladder_m_max = parse_f64(key, v, line)?,
            "ladder.t1" => self.ladder_t1 = parse_f64(key, v, line)?,
            "ladder.tau" => self.ladder_tau = parse_f64(key, v, line)?,
            "ladder.holdout" => self.ladder_holdout = parse_usize(key, v, line)?,
            "equilibria.seed_count" => self.equilibria_seed_count = parse_usize(key, v, line)?,
            "equilibria.amplitude_max" => {
                self.equilibria_amplitude_max = parse_f64(key, v, line)?
            }
            "equilibria.newton_tol" => self.equilibria_newton_tol = parse_f64(key, v, line)?,
            "attractor.horizon" => self.attractor_horizon = parse_f64(key, v, line)?,
            "attractor.attractor_time" => self.attractor_time = parse_f64(key, v, line)?,
            "attractor.spacing" => self.attractor_spacing = parse_f64(key, v, line)?,
            "attractor.amplitudes" => self.attractor_amplitudes = parse_f64_list(key, v, line)?,
            "attractor.limit_tol" => self.attractor_limit_tol = parse_f64(key, v, line)?,
            "structure.undecided_quota" => {
                self.structure_undecided_quota = parse_usize(key, v, line)?
            }
            "envelope.pairs" => self.envelope_pairs = parse_usize(key, v, line)?,
            "envelope.slack" => self.envelope_slack = parse_f64(key, v, line)?,
            "envelope.t_grid" => self.envelope_t_grid = parse_f64_list(key, v, line)?,
            "branching.scales" => self.branching_scales = parse_f64_list(key, v, line)?,
            "branching.ensemble" => self.branching_ensemble = parse_usize(key, v, line)?,
            "branching.tau" => self.branching_tau = parse_f64(key, v, line)?,
            "branching.horizon" => self.branching_horizon = parse_f64(key, v, line)?,
            "dimension.spectrum_count" => {
                self.dimension_spectrum_count = parse_usize(key, v, line)?
            }
            "dimension.n_max" => self.dimension_n_max = parse_usize(key, v, line)?,
            "dimension.t_min" => self.dimension_t_min = parse_f64(key, v, line)?,
            "dimension.t_max" => self.dimension_t_max = parse_f64(key, v, line)?,
            "dimension.t_count" => self.dimension_t_count = parse_usize(key, v, line)?,
            "dimension.modes" => self.dimension_modes = parse_usize(key, v, line)?,
            "dimension.eps_max" => self.dimension_eps_max = parse_f64(key, v, line)?,
            "dimension.eps_count" => self.dimension_eps_count = parse_usize(key, v, line)?,
            "dimension.alpha_slack" => self.dimension_alpha_slack = parse_f64(key, v, line)?,
            "check.samples" => self.check_samples = parse_usize(key, v, line)?,
            other => return Err(Error::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    // ---- constructors for the domain objects --------------------------------

    pub fn domain(&self) -> Result<BoxDomain> {
        if self.domain_dim != self.domain_lengths.len()
            || self.domain_dim != self.domain_resolution.len()
        {
            return Err(Error::invalid(
                "domain.dim must match the arity of domain.lengths and domain.resolution",
            ));
        }
        BoxDomain::new(&self.domain_lengths, &self.domain_resolution)
    }

    pub fn nonlinearity(&self) -> Result<NonlinearitySpec> {
        builtin_family(&self.family, &self.family_params)
    }

    pub fn forcing(&self, domain: &BoxDomain) -> Result<ForcingSpec> {
        let field = match self.forcing_profile.as_str() {
            "zero" => Field::zeros(domain),
            "mode" => Field::mode(
                domain,
                &vec![self.forcing_mode_index; domain.dim()],
                self.forcing_amplitude,
            )?,
            other => {
                return Err(Error::invalid(format!(
                    "unknown forcing profile `{other}` (registered: zero, mode)"
                )))
            }
        };
        ForcingSpec::new(field, self.forcing_s_exponent)
    }

    pub fn stepper(&self, domain: &BoxDomain, spec: &NonlinearitySpec) -> Result<Stepper> {
        Stepper::new(domain, spec, Scheme::parse(&self.scheme)?, self.dt)
    }

    /// Deterministic ensemble of initial data: `L^2` levels log-spaced over
    /// `[l2_min, l2_max]`, shapes drawn from per-index seed streams.
    pub fn initial_ensemble(&self, domain: &BoxDomain) -> Result<Vec<Field>> {
        let n = self.ensemble_count;
        if n == 0 {
            return Err(Error::invalid("ensemble.count must be >= 1"));
        }
        let (lo, hi) = (self.ensemble_l2_min, self.ensemble_l2_max);
        if !(lo > 0.0) || !(hi >= lo) {
            return Err(Error::invalid("need 0 < ensemble.l2_min <= ensemble.l2_max"));
        }
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let t = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
            let level = lo * (hi / lo).powf(t);
            let u0 = match self.ensemble_profile.as_str() {
                "random" => {
                    let mut rng = rng::stream(self.master_seed, &format!("ensemble/u0/{i}"));
                    rng::random_field(domain, &mut rng, level)
                }
                "mode1" => {
                    let m = Field::mode(domain, &vec![1; domain.dim()], 1.0)?;
                    let norm = m.l2_norm();
                    m.scaled(level / norm)
                }
                other => {
                    return Err(Error::invalid(format!(
                        "unknown ensemble profile `{other}` (registered: random, mode1)"
                    )))
                }
            };
            out.push(u0);
        }
        Ok(out)
    }

    /// Simulate the configured ensemble.
    pub fn run_ensemble(&self) -> Result<Vec<Trajectory>> {
        let domain = self.domain()?;
        let spec = self.nonlinearity()?;
        let forcing = self.forcing(&domain)?;
        let stepper = self.stepper(&domain, &spec)?;
        let mut out = Vec::with_capacity(self.ensemble_count);
        for (i, u0) in self.initial_ensemble(&domain)?.into_iter().enumerate() {
            let mut opts = SimulateOptions::new(self.horizon);
            opts.snapshot_stride = self.snapshot_stride;
            opts.log_stride = self.log_stride;
            opts.lm_exponents = self.lm_norms.clone();
            opts.seed_label = format!("ensemble/u0/{i}");
            out.push(simulate(&stepper, &u0, &forcing, &opts)?);
        }
        Ok(out)
    }

    pub fn dimension_t_grid(&self) -> Vec<f64> {
        let n = self.dimension_t_count.max(2);
        let (lo, hi) = (self.dimension_t_min, self.dimension_t_max);
        (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                lo * (hi / lo).powf(t)
            })
            .collect()
    }

    /// Dyadic box-counting scales from `eps_max` downward.
    pub fn dimension_eps_grid(&self) -> Vec<f64> {
        (0..self.dimension_eps_count.max(3))
            .map(|i| self.dimension_eps_max * 0.5f64.powi(i as i32))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_parse() {
        let cfg = ExperimentConfig::parse("").unwrap();
        assert_eq!(cfg.family, "cubic_chafee_infante");
        assert_eq!(cfg.domain_resolution, vec![127]);
    }

    #[test]
    fn parses_keys_comments_and_lists() {
        let text = "\
# a comment
nonlinearity.family = odd_power
nonlinearity.params = 2.0, 0.0   # trailing comment
solver.dt = 1e-4
ensemble.count = 3
seeds.master = 99
";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.family, "odd_power");
        assert_eq!(cfg.family_params, vec![2.0, 0.0]);
        assert_eq!(cfg.dt, 1e-4);
        assert_eq!(cfg.ensemble_count, 3);
        assert_eq!(cfg.master_seed, 99);
    }

    #[test]
    fn unknown_keys_are_named_in_the_error() {
        let err = ExperimentConfig::parse("solver.dtt = 0.1").unwrap_err();
        match err {
            Error::UnknownKey(k) => assert_eq!(k, "solver.dtt"),
            other => panic!("expected UnknownKey, got {other}"),
        }
    }

    #[test]
    fn malformed_lines_carry_line_numbers() {
        let err = ExperimentConfig::parse("solver.dt = 0.1\nnot a key value\n").unwrap_err();
        match err {
            Error::Config { line, .. } => assert_eq!(line, 2),
            other => panic!("expected Config error, got {other}"),
        }
        let err = ExperimentConfig::parse("solver.dt = fast").unwrap_err();
        match err {
            Error::Config { line, .. } => assert_eq!(line, 1),
            other => panic!("expected Config error, got {other}"),
        }
    }

    #[test]
    fn overrides_apply_after_the_file() {
        let mut cfg = ExperimentConfig::parse("solver.dt = 0.1").unwrap();
        cfg.apply_override("solver.dt=0.05").unwrap();
        assert_eq!(cfg.dt, 0.05);
        assert!(cfg.apply_override("bogus.key=1").is_err());
        assert!(cfg.apply_override("no-equals").is_err());
    }

    #[test]
    fn ensemble_is_deterministic_and_spans_levels() {
        let cfg = ExperimentConfig::parse("ensemble.count = 5").unwrap();
        let dom = cfg.domain().unwrap();
        let a = cfg.initial_ensemble(&dom).unwrap();
        let b = cfg.initial_ensemble(&dom).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.coeffs(), y.coeffs());
        }
        assert!((a[0].l2_norm() - 1.0).abs() < 1e-12);
        assert!((a[4].l2_norm() - 1000.0).abs() < 1e-9);
    }
}
