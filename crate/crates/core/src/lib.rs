//! Dissipative quantum chaos diagnostics for Lindblad systems.
//!
//! The pipeline: build a model ([`models`]), assemble and diagonalize its
//! Liouvillian ([`liouvillian`]), unravel it into quantum trajectories
//! ([`trajectories`]), and run level statistics ([`stats`]) on the eigenvalues
//! that carry weight along each trajectory ([`ssqt`]). Mean-field and
//! truncated-Wigner comparisons live in [`classical`].
//!
//! Density matrices are vectorized by stacking columns, so
//! `vec(A rho B) = (B^T (x) A) vec(rho)`.

pub mod cache;
pub mod classical;
pub mod error;
pub mod hamiltonian_stats;
pub mod io;
pub mod liouvillian;
pub mod models;
pub mod observables;
pub mod operator;
pub mod random_matrix;
pub mod ssqt;
pub mod states;
pub mod stats;
pub mod trajectories;

pub use num_complex::Complex64 as C64;

pub use error::{Error, Result};
pub use liouvillian::{assemble, diagonalize, LiouvillianSpectrum};
pub use models::{
    BoseHubbardParams, Jump, KerrParams, ModelSpec, RandomLiouvillianParams, SpinChainParams,
};
pub use operator::{HilbertSpace, Operator, SuperOperator};
pub use states::InitialState;
pub use stats::{SpacingSample, StatsSummary};
pub use trajectories::{EnsembleResult, TrajectoryState};
