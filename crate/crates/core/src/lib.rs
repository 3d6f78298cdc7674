//! Local rewiring of a cycle-plus-pointers overlay by alternating interchange
//! phases, with the exact tools used to study its expansion: isoperimetric
//! profiles, heat kernels and collapsed-graph spectral gaps, random-walk
//! canonical paths, and Monte Carlo harnesses for the stochastic claims.

// `!(x > 0.0)` is used on purpose so NaN is rejected with the bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod graph;
pub mod harness;
pub mod interchange;
pub mod isoperimetry;
pub mod paths;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
pub use graph::{Color, Cut, Edge, EdgeKind, GraphFile, PhaseGraph, PointerConfig};
pub use interchange::{
    poisson_rewiring_tail, run_protocol, run_protocol_from, simulate_phase, InterchangeState,
    ModCounting, PhaseLength, ProtocolRun, RewiringStats, SimParams,
};
pub use isoperimetry::{
    arc_set_count, check_hypothesis, enumerate_arc_sets, profile_exact, union_bound_pk,
    ExpansionHypothesis, IsoProfile, DEFAULT_PROFILE_BUDGET,
};
pub use paths::{build_path_system, mixing_budget, path_length_bound, PathParams, PathSystem};
pub use rng::{stream, SimRng};
pub use spectral::{
    aux_nu_process, chernoff_tail, collapse, heat_kernel, lambda_star, spectral_gap, LaplacianView,
    MassVector,
};
