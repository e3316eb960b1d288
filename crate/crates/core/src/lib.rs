//! Simulation and analysis engines for driven-dissipative Rydberg gases.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] holds the physical parameters, unit helpers and the single-atom
//!   rate kernel shared by everything else.
//! * [`geometry`] samples atom positions and thermal velocities.
//! * [`kmc`] is the continuous-time kinetic Monte Carlo engine for the
//!   classical (strong-dephasing) rate dynamics with radiative decay.
//! * [`meanfield`] solves the homogeneous classical and quantum mean-field
//!   equations.
//! * [`qjmc`] contains the small-system quantum oracles: quantum-jump
//!   trajectories for the constrained chain and dense Lindblad integration.
//! * [`stats`] is the counting-statistics and critical-fit pipeline.
//!
//! All frequencies are angular (rad/µs), rates are in 1/µs and lengths in µm.

pub mod error;
pub mod geometry;
pub mod kmc;
pub mod meanfield;
pub mod model;
pub mod ode;
pub mod qjmc;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use geometry::{Boundary, CloudShape, GasGeometry};
pub use kmc::{
    Drive, EnsembleResult, KmcConfig, ProtocolSegment, RateKernel, SeedInjection,
    TrajectorySeries,
};
pub use model::{DerivedScales, PhysicalParams, SpinConfiguration, TwoPhotonParams};
pub use stats::{BimodalParams, CountRecord, PowerLawFit};
