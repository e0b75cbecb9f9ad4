//! Quasi-Monte Carlo time-splitting Fourier pseudospectral methods for the
//! cubic nonlinear Schrödinger equation with a random potential.
//!
//! The pieces compose bottom-up: [`spectral`] transforms, [`potential`]
//! realizations, the Strang-split [`solver`], shifted lattice rules from
//! [`lattice`], the estimators in [`samplers`] and the functionals in
//! [`observables`]. [`harness`] wires them into the experiments driven by the
//! `qmc-tsfp` binary.

pub mod config;
pub mod error;
pub mod harness;
pub mod lattice;
pub mod observables;
pub mod potential;
pub mod samplers;
pub mod solver;
pub mod spectral;
pub mod table;

#[cfg(test)]
mod testutil;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::{Error, Result};
pub use lattice::{
    cbc_construct, generate_points, KernelSign, LatticeRule, ShiftedPointSet, WeightVector,
};
pub use potential::{evaluate_potential, ParameterDomain, ParameterPoint, PotentialSpec};
pub use samplers::{collocation_estimate, mc_estimate, qmc_estimate, EstimatorResult};
pub use solver::{reverse_check, solve, strang_step, Solver, SolverConfig, TrajectoryRecord};
pub use spectral::{analyze, synthesize, Grid, SpectralCoefficients, WaveField};
pub use table::{emit_csv, read_csv, ResultTable};
