//! Single-excitation dynamics of a quantum photonic node: a two-level emitter
//! coupled through a chain of microring resonators to a waveguide.
//!
//! Rates may be absolute or normalized to the emitter–ring coupling `g`; time
//! is measured in the reciprocal unit. Most front-end operations normalize to
//! `g = 1` first.
// `!(x > 0.0)` rejects NaN; indexed loops mirror the matrix algebra.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod checks;
pub mod design;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod ode;
pub mod optimize;
pub mod spectral;
pub mod transfer;

pub use dynamics::{
    evolve_driven, evolve_emission, evolve_full, Direction, FullDrive, Pulse, TimeGrid, Trajectory,
};
pub use error::{Error, ErrorKind, Result};
pub use metrics::{pulse_overlap, success_rate, symmetry_factor, SymmetryResult, TlsPeak};
pub use model::{build_full_hamiltonian, build_reduced_hamiltonian, EffectiveHamiltonian, ModelKind, NodeConfig};
pub use ode::Tolerances;
pub use spectral::{analytic_emission, eigendecompose, modal_amplitudes, EigenDecomposition};
pub use design::{coupling_g, plan_node, solve_gap, EmitterModeSpec, GapRateTable, Interpolation, NodePlan, TableKind};
pub use optimize::{grid_sweep, refine, refine_with, OptimumReport, ParamRange, RefineOptions, SweepPoint, SweepSpec};
pub use transfer::{run_transfer, run_transfer_with, LossBudget, TransferOptions, TransferReport};
