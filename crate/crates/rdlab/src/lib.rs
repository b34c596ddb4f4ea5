//! # rdlab
//!
//! A numerical laboratory for the scalar reaction-diffusion problem
//!
//! ```text
//! u_t - Laplace(u) + f(u) = g,   u = 0 on the boundary,   u(0) = u0,
//! ```
//!
//! on box domains. The lab simulates trajectories with an exponential
//! integrator on the Dirichlet sine basis, empirically validates the
//! truncated Moser-Alikakos machinery that upgrades `L^2` control to a
//! uniform `L^infinity` bound, explores the global attractor as the
//! unstable set of the equilibria, and evaluates explicit fractal-dimension
//! bounds against an independent box-counting estimator.
//!
//! The mdbook under `book/` walks through each subsystem; its code snippets
//! are kept in sync with the doc-tests in these modules.
//!
//! ```
//! use rdlab::{BoxDomain, Field};
//!
//! // sin(x) on (0, pi): ||u||_2 = sqrt(pi/2), nodal max 1.
//! let domain = BoxDomain::interval_pi(31)?;
//! let u = Field::mode(&domain, &[1], 1.0)?;
//! assert!((u.l2_norm() - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-12);
//! assert!((u.lp_norm(f64::INFINITY)? - 1.0).abs() < 1e-12);
//! # Ok::<(), rdlab::Error>(())
//! ```

pub mod attractor;
pub mod cli;
pub mod config;
pub mod dimension;
pub mod domain;
pub mod error;
pub mod field;
pub mod forcing;
pub mod ladder;
pub mod nonlinearity;
pub mod potential;
pub mod report;
pub mod rng;
pub mod sine;
pub mod solver;
pub mod storage;

pub use domain::BoxDomain;
pub use error::{Error, Result};
pub use field::Field;
pub use forcing::ForcingSpec;
pub use nonlinearity::{builtin_family, Family, NonlinearitySpec};
pub use solver::{Scheme, Stepper, Trajectory};
