//! Alternating-minimization solvers for entanglement of formation and
//! related conditional-mutual-information minima of bipartite states.
//!
//! Three flavors of the same minimization are provided:
//!
//! * [`classical::classical_solve`] — `H(x:y|alpha)` over joint
//!   distributions with a pinned `(x,y)` marginal;
//! * [`quantum::mixed_solve`] — `S(x:y|alpha)` over decompositions of a
//!   density matrix into arbitrary PSD pieces;
//! * [`quantum::pure_solve`] — the same over rank-one decompositions, whose
//!   half-minimum is the entanglement of formation.
//!
//! [`states`] builds the named state families used as benchmarks and random
//! initial ensembles; [`oracles`] carries independent closed-form and
//! brute-force references; [`io`] fixes the text formats the CLI speaks.

pub mod classical;
pub mod config;
pub mod error;
pub mod expm;
pub mod hermitian;
pub mod io;
pub mod oracles;
pub mod quantum;
pub mod states;

pub use config::SolverConfig;
pub use error::{Error, Result};
pub use hermitian::{BipartiteDims, HermitianMatrix, Spectrum};
pub use quantum::{Ensemble, EnsembleKind, EntanglementOperator, SolverReport};
