//! Numerical testbed for quantum Turing machines with a designated halt
//! qubit, and for fixed programmable gate arrays.
//!
//! The crate has two halves. The machine half ([`state`], [`machine`],
//! [`machines`], [`window`], [`cycling`], [`halt`]) represents
//! configurations (processor register, binary tape, head position)
//! sparsely, steps them under local transition rules, certifies
//! unitarity on cyclic tape windows, and analyzes what a halt qubit can
//! and cannot signal: stability of the raised flag, entanglement between
//! the flag and the computational register when branches halt at
//! different times, monitored versus unmonitored evolution, branch
//! synchronization, and brute-force search over classical program
//! strings. The gate half ([`gates`]) models fixed programmable gate
//! arrays acting on data ⊗ program registers: deterministic-program
//! checks, the orthogonality constraint on programs implementing
//! distinct operations, data-dependent swap programs, and direct
//! optimization of program vectors.
//!
//! All randomized procedures take explicit seeds and are reproducible
//! across runs and thread counts.

pub mod cycling;
pub mod error;
pub mod gates;
pub mod halt;
pub mod linalg;
pub mod machine;
pub mod machines;
pub mod state;
pub mod window;

pub use cycling::{
    cycle_run, equivalence_check, CycleConfig, CycleReport, HaltMode, DEFAULT_HALT_THRESHOLD,
};
pub use error::{Error, Result};
pub use gates::{
    build_controlled_u_array, build_swap_array, check_deterministic_program, gate_hadamard,
    gate_identity, gate_phase, gate_ry, gate_x, optimize_program, phase_distance,
    phase_equivalent, program_overlap, program_parameter_count, standard_repertoire, swap_demo,
    DeterministicProgramReport, GateArrayModel, OptimizeConfig, OptimizeResult, ProgramVector,
    SwapDemoReport, PHASE_EQUIV_TOL,
};
pub use halt::{
    branch_sync_check, build_myers_machine, build_myers_machine_with_horizon,
    computational_register, concat_search, monitored_vs_unmonitored, myers_demo, state_metrics,
    BranchSyncReport, ConcatOutcome, ConcatSpec, MonitoredComparison, MyersDemoReport,
    MyersMachine, MyersSpec, ProgramString, StateMetrics,
};
pub use linalg::{
    check_global_unitarity, fidelity_to_pure, hermitian_eigenvalues, purity, random_state,
    random_unitary, trace_distance, unitarity_error, von_neumann_entropy, DenseUnitary,
    DensityMatrix, DEFAULT_UNITARY_TOL,
};
pub use machine::{
    check_halt_stability, halt_probability, measure_halt, measure_halt_with, project_halt,
    run, run_monitored, step, step_with_threshold, validate_local, HaltStabilityReport,
    MachineDef, MeasureOutcome, MonitorOutcome, Successor, TransitionRule, WellFormedReport,
};
pub use machines::{
    hadamard_split_machine, identity_machine, program_driven_machine, shift_counter_machine,
    zigzag_identity_machine,
};
pub use state::{
    distance_sq, fidelity_pure, inner_product, marginal_fidelity, marginal_purity,
    reduced_density, superpose, Config, Dir, QubitId, RegisterLayout, SparseState,
    DEFAULT_PRUNE_THRESHOLD, MAX_REDUCED_QUBITS,
};
pub use window::{
    build_global_step, embed_qtm_step, sparse_to_window, window_to_sparse,
    window_unitarity_err, StepOperator, WindowLayout, WindowStep, DEFAULT_DENSE_CAP,
    MAX_WINDOW_DIM,
};
