//! Dynamics of a driven cavity coupling a mechanical oscillator to a bosonized
//! atomic ensemble.
//!
//! The crate integrates the nonlinear mean-field equations, propagates the
//! covariance of the linearized quantum fluctuations, validates that
//! propagation against an Euler–Maruyama ensemble, and evaluates phase-locking
//! metrics and the Gaussian discord between the mechanical and atomic modes.
//!
//! Everything is expressed in units of the mechanical frequency: rates are
//! ratios to `omega_m` and time is the dimensionless `omega_m * t`.
//!
//! ```no_run
//! use antisync::meanfield::{integrate, Sampling, SolverConfig};
//! use antisync::model::{MeanFieldState, SystemParams};
//!
//! let params = SystemParams::baseline();
//! let series = integrate(
//!     &params,
//!     &MeanFieldState::zero(),
//!     1.0e3,
//!     &SolverConfig::default(),
//!     &Sampling::uniform(0.5),
//! )
//! .unwrap();
//! println!("{} samples", series.len());
//! ```

pub mod config;
pub mod covariance;
pub mod discord;
mod error;
pub mod io;
pub mod meanfield;
pub mod metrics;
pub mod model;
pub mod ode;
pub mod stochastic;

pub use covariance::{CovMatrix6, CovarianceSeries, DriftConvention, PhysicalityReport};
pub use discord::{CovMatrix4, DiscordOptions, VacuumConvention};
pub use error::{Error, Result, Violation};
pub use meanfield::{LimitCycleReport, Sampling, SolverConfig, TrajectorySeries};
pub use metrics::{LockingVerdict, PhaseRecord, SyncReport};
pub use model::{MeanFieldState, OccupancyConvention, SystemParams};
pub use stochastic::EnsembleEstimate;
