//! Simulation of spin-selective radical-ion-pair reactions.
//!
//! The crate covers the spin Hilbert space of two electrons plus an arbitrary
//! set of magnetic nuclei, the magnetic Hamiltonian, the singlet–triplet
//! coherence measure `p_coh`, three density-matrix master equations
//! (non-reacting, the nonlinear coherence-weighted equation and the
//! traditional Haberkorn form), a single-molecule quantum-trajectory sampler
//! and proper-mixture ensembles.
//!
//! Units: ħ = 1, every coupling and rate is an angular frequency in one common
//! inverse-time unit.

// `!(x > y)` is used on purpose so NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coherence;
pub mod ensembles;
mod error;
pub mod evolvers;
pub mod linalg;
pub mod magnetics;
pub mod spin;
pub mod trajectories;

pub use coherence::{CoherenceConfig, CoherenceMode, RhoBlocks};
pub use ensembles::{MixtureRecord, ProperMixture};
pub use error::{Error, Result};
pub use evolvers::{
    Derivative, IntegratorConfig, OneStepReport, ReactionModel, ReactionParams, RecordRow,
    SimulationRecord, Theory,
};
pub use linalg::{Operator, StateVector};
pub use magnetics::{HamiltonianBlocks, HamiltonianSpec, Hyperfine, HyperfineCoupling};
pub use spin::{DensityState, Electron, NamedState, NuclearSpec, Projectors, SpinNumber, SpinSystem};
pub use trajectories::{
    EnsembleReport, MasterComparison, PureEnsemble, Status, TrajectoryConfig, TrajectoryState,
};
