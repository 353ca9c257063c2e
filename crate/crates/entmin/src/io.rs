//! Plain-text state files and decomposition output.
//!
//! State file format: line 1 holds `nx ny`; the next `(nx*ny)^2` lines hold
//! `re im` pairs, row-major in the `|x y>` lexicographic basis. Parsing
//! validates the Hermitian, PSD and unit-trace invariants and names the one
//! that failed. Text keeps the matrices diffable; at desk scale the cost is
//! negligible.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hermitian::{BipartiteDims, HermitianMatrix, C64, DENSITY_TOL};
use crate::quantum::{Ensemble, EnsembleKind, SolverReport};

/// A density matrix together with its bipartite split, as read from disk.
#[derive(Debug, Clone)]
pub struct StateFile {
    pub dims: BipartiteDims,
    pub rho: HermitianMatrix,
}

/// Parses the text format and validates the density-matrix invariants.
pub fn parse_state_str(text: &str) -> Result<StateFile> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse {
            line: 1,
            msg: "empty file; expected `nx ny` header".into(),
        })?;
    let mut parts = header.split_whitespace();
    let nx: usize = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Parse {
            line: 1,
            msg: "header must be `nx ny`".into(),
        })?;
    let ny: usize = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Parse {
            line: 1,
            msg: "header must be `nx ny`".into(),
        })?;
    if nx == 0 || ny == 0 {
        return Err(Error::Parse {
            line: 1,
            msg: "dimensions must be positive".into(),
        });
    }
    let dim = nx * ny;
    let mut entries = Vec::with_capacity(dim * dim);
    for (lineno, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let re: f64 = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse {
                line: lineno + 1,
                msg: "expected `re im`".into(),
            })?;
        let im: f64 = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse {
                line: lineno + 1,
                msg: "expected `re im`".into(),
            })?;
        entries.push(C64::new(re, im));
        if entries.len() > dim * dim {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: format!("more than {} entries", dim * dim),
            });
        }
    }
    if entries.len() != dim * dim {
        return Err(Error::Parse {
            line: 0,
            msg: format!("expected {} entries, got {}", dim * dim, entries.len()),
        });
    }
    let m = DMatrix::from_row_slice(dim, dim, &entries);
    let rho = HermitianMatrix::new(m)?;
    let tr = rho.trace();
    if (tr - 1.0).abs() > DENSITY_TOL {
        return Err(Error::InvalidTrace { trace: tr });
    }
    let min = rho.eig().eigenvalues[0];
    if min < -DENSITY_TOL {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
        });
    }
    Ok(StateFile {
        dims: BipartiteDims::new(nx, ny),
        rho,
    })
}

pub fn read_state_file(path: &Path) -> Result<StateFile> {
    let text = fs::read_to_string(path)?;
    parse_state_str(&text)
}

/// Writes a state in the same text format (17 significant digits, enough
/// for bit-exact round trips).
pub fn format_state(dims: BipartiteDims, rho: &HermitianMatrix) -> String {
    let mut out = String::new();
    writeln!(out, "{} {}", dims.nx, dims.ny).unwrap();
    let dim = dims.product();
    for i in 0..dim {
        for j in 0..dim {
            let z = rho.matrix()[(i, j)];
            writeln!(out, "{:.17e} {:.17e}", z.re, z.im).unwrap();
        }
    }
    out
}

pub fn write_state_file(path: &Path, dims: BipartiteDims, rho: &HermitianMatrix) -> Result<()> {
    fs::write(path, format_state(dims, rho))?;
    Ok(())
}

/// Human- and script-readable dump of a solver result: one `alpha` block per
/// member with its weight, followed by either state-vector amplitudes (pure)
/// or the full `K` matrix (mixed).
pub fn format_decomposition(report: &SolverReport, mode: &str) -> String {
    let mut out = String::new();
    let dims = report.ensemble.dims;
    writeln!(out, "# mode {mode}").unwrap();
    writeln!(out, "# nx {} ny {} nalpha {}", dims.nx, dims.ny, report.ensemble.nalpha()).unwrap();
    writeln!(out, "# entanglement_bits {:.12}", report.entanglement_bits).unwrap();
    writeln!(
        out,
        "# converged {} iterations {}",
        report.converged, report.iterations
    )
    .unwrap();
    let pure = report.ensemble.kind == EnsembleKind::Pure;
    for (a, k) in report.ensemble.members().iter().enumerate() {
        let w = k.trace();
        writeln!(out, "alpha {a} w {:.17e}", w).unwrap();
        if pure && w > 0.0 {
            // amplitudes of the rank-one direction, weight removed
            let spec = k.eig();
            let top = spec.eigenvectors.column(k.dim() - 1);
            for i in 0..k.dim() {
                writeln!(out, "{:.17e} {:.17e}", top[i].re, top[i].im).unwrap();
            }
        } else {
            for i in 0..k.dim() {
                for j in 0..k.dim() {
                    let z = k.matrix()[(i, j)];
                    writeln!(out, "{:.17e} {:.17e}", z.re, z.im).unwrap();
                }
            }
        }
    }
    // the dual variable rides along for diagnostics
    writeln!(out, "delta").unwrap();
    let d = &report.delta.delta;
    for i in 0..d.dim() {
        for j in 0..d.dim() {
            let z = d.matrix()[(i, j)];
            writeln!(out, "{:.17e} {:.17e}", z.re, z.im).unwrap();
        }
    }
    out
}

/// Writes an ensemble on its own (used by the classical path, which stores
/// its distribution elsewhere).
pub fn write_decomposition(path: &Path, report: &SolverReport, mode: &str) -> Result<()> {
    fs::write(path, format_decomposition(report, mode))?;
    Ok(())
}

impl Ensemble {
    /// Convenience for tests and the verify command.
    pub fn reconstruction_error(&self, rho: &HermitianMatrix) -> f64 {
        self.sum_members().frobenius_distance(rho)
    }
}
