//! Classical emulation of quantum wave simulation: symmetry-preserving
//! staggered discretizations, their unitary encoding, source injection
//! and subspace-norm observables.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops read closer to the formulas in the numeric kernels.
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod constraints;
pub mod discretization;
pub mod encoding;
pub mod error;
pub mod evolution;
pub mod initcircuit;
pub mod measurement;
pub mod reference;
pub mod sources;
pub mod sparse;

pub use discretization::{
    assemble_operator_pair, gradient_divergence, BlockLayout, Family, FieldBlock, MaterialModel, OperatorPair,
    Side, StaggeredGrid, WaveOperators,
};
pub use constraints::{dirichlet_constraints, reduce_system, ConstraintSet, ReducedSystem, VectorSeries};
pub use error::{Error, Result};
pub use sparse::SparseOperator;
pub use encoding::{
    build_hamiltonian, classical_energy, decode, decode_block, encode, energy, transform, Hamiltonian,
    QuantumRegisterState, RegisterLayout,
};
pub use evolution::{build_mult_hamiltonian, build_sync_hamiltonian, evolve, EvolutionConfig, EvolutionMethod, Propagator};
pub use reference::{cfl_limit, default_dt, leapfrog_evolve, Forcing, LeapfrogOptions, ModalSolver, Trajectory};
pub use measurement::{
    augment_state, estimate, estimate_with, l2_distance, metric_partitions, multi_state_observable,
    two_state_observable, weighted_l2, Estimate, EstimatorConfig, EstimatorMode, ObservableDecomposition, Pauli,
    PauliString, SubspaceProjector,
};
pub use sources::{
    assemble_multisource_state, default_steepness, double_sigmoid, greens_decompose, make_windows,
    presimulate_pulse, sigmoid, GreensDecomposition, GreensMethod, GreensOptions, PointSource, PreSimResult,
    PresimOptions, SourceTimeFunction, WindowSpec,
};
pub use initcircuit::{
    build_circuit, covariance_defect, direct_state, fidelity, sample_reference_ray, simulate_circuit, Gate,
    GateCircuit, PolarGridSpec, ReferenceRay,
};
