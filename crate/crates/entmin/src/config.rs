//! Solver configuration shared by the classical and quantum minimizers.

use crate::error::{Error, Result};

/// Knobs for the alternating-minimization solvers.
///
/// `tol` gates both the stationarity residual and the per-iteration change of
/// the entanglement estimate. `eps_kernel` is the relative eigenvalue
/// threshold separating support from kernel. `w_floor` is the trace below
/// which an ensemble branch is considered dead and re-seeded. Runs are
/// deterministic per `seed`; `restarts` independent seeded starts are solved
/// and the minimum reported.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub eps_kernel: f64,
    pub w_floor: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iter: 5000,
            eps_kernel: 1e-12,
            w_floor: 1e-13,
            restarts: 3,
            seed: 0,
        }
    }
}

impl SolverConfig {
    /// Defaults used by the classical solver (its residual is cheaper and
    /// its fixed points sharper, so it runs tighter and longer).
    pub fn classical_default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 10_000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tol must be positive (got {})",
                self.tol
            )));
        }
        if !(self.w_floor > 0.0 && self.w_floor <= 1e-6) {
            return Err(Error::InvalidConfig(format!(
                "w_floor must lie in (0, 1e-6] (got {})",
                self.w_floor
            )));
        }
        if self.restarts < 1 {
            return Err(Error::InvalidConfig("restarts must be >= 1".into()));
        }
        if !(self.eps_kernel > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "eps_kernel must be positive (got {})",
                self.eps_kernel
            )));
        }
        Ok(())
    }
}

/// SplitMix64 step; used to derive independent child seeds from a base seed
/// and an index so that restarts and sweep grid points are reproducible.
pub fn derive_seed(base: u64, salt: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9e3779b97f4a7c15)
        .wrapping_add(salt.wrapping_mul(0xbf58476d1ce4e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
