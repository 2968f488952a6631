//! Sample-based quantum diagonalization.
//!
//! Ground-state energies of fragment Hamiltonians from subspaces of sampled
//! electronic configurations:
//!
//! - [`configs`]: occupation strings, combinatorics, excitations
//! - [`integrals`]: FCIDUMP I/O and Slater–Condon matrix elements
//! - [`sbd`]: matrix-free selected-basis diagonalization
//! - [`sampling`]: sample files, a noisy exact sampler, configuration recovery
//! - [`pipeline`]: SQD, ExtSQD and TrimSQD drivers and their reports
//! - [`oracle`]: brute-force full CI used as ground truth

pub mod configs;
pub mod integrals;
pub mod oracle;
pub mod pipeline;
pub mod sampling;
pub mod sbd;
pub mod synthetic;

pub use configs::{fci_dimension, Configuration, Excitation, Spin, SpinString, SystemSpec};
pub use integrals::{parse_fcidump, FragmentHamiltonian};
pub use oracle::{fci_solve, DenseSpectrumResult};
pub use pipeline::{run_pipeline, EnergyReport, Method, PipelineConfig};
pub use sampling::SampleSet;
pub use sbd::{apply_hamiltonian, solve_ground_state, SolverOptions, SubspaceBasis, SubspaceVector};

/// Hartree to kcal/mol.
pub const HARTREE_TO_KCAL_PER_MOL: f64 = 627.509_474_063_1;

/// Chemical accuracy, 1 kcal/mol, in Hartree (rounded).
pub const CHEMICAL_ACCURACY: f64 = 1.6e-3;
