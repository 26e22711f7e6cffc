//! Particle simulation and self-similar analysis of the homogeneous
//! Boltzmann equation with probabilistic ballistic annihilation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod collision;
pub mod config;
pub mod diagnostics;
pub mod dsmc;
pub mod ensemble;
pub mod error;
pub mod histogram;
pub mod profile;
pub mod quadrature;
pub mod rescale;
pub mod trajectory;

pub use config::{DtPolicy, InitialCondition, SimConfig};
pub use dsmc::{run, RunOutput, SimState, Simulation, Termination};
pub use ensemble::{compute_moments, jensen_check, MomentRecord, ParticleEnsemble};
pub use error::{Error, Result};
pub use histogram::{BinSpec, RadialHistogram};
pub use trajectory::{Snapshot, Trajectory, TrajectorySample};
