//! Dense complex-Hermitian linear algebra.
//!
//! Everything the solvers consume lives here: eigendecomposition, partial
//! traces, entropies, the quantum Kullback-Leibler distance, support/kernel
//! projectors and the `pi_1 exp(ln R + Delta) pi_1` primitive that drives the
//! quantum iterations. All matrices are dense; target dimensions are desk
//! scale (products of local dimensions up to ~100).
//!
//! Entropies and KL distances are reported in bits (log base 2). Operator
//! exponents and the entanglement operator Delta are kept in nats, with the
//! `1/(2 ln 2)` conversion applied where an entanglement value is exposed.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Absolute tolerance for the Hermitian symmetry invariant.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Default relative threshold separating support from kernel eigenvalues.
pub const DEFAULT_EPS_KERNEL: f64 = 1e-12;

/// Tolerance for density-matrix validation (PSD and unit trace).
pub const DENSITY_TOL: f64 = 1e-8;

const LN_2: f64 = std::f64::consts::LN_2;

/// Local dimensions of a bipartite Hilbert space `H_x (x) H_y`.
///
/// Product indices are lexicographic: the basis vector `|x y>` sits at
/// row/column `x * ny + y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BipartiteDims {
    pub nx: usize,
    pub ny: usize,
}

impl BipartiteDims {
    pub fn new(nx: usize, ny: usize) -> Self {
        Self { nx, ny }
    }

    pub fn product(&self) -> usize {
        self.nx * self.ny
    }

    fn check(&self, dim: usize) -> Result<()> {
        if self.product() != dim {
            return Err(Error::BadBipartiteDims {
                nx: self.nx,
                ny: self.ny,
                dim,
            });
        }
        Ok(())
    }
}

/// Dense complex square matrix with validated Hermitian symmetry.
///
/// The constructor rejects matrices whose asymmetry exceeds [`HERMITIAN_TOL`];
/// operations that assemble results from matrix functions re-symmetrize via
/// `(M + M^dagger)/2` before wrapping, so the invariant survives roundoff.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    m: DMatrix<C64>,
}

/// Eigensystem of a Hermitian matrix: real eigenvalues in ascending order,
/// eigenvectors as the matching orthonormal columns of a unitary matrix.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<C64>,
}

impl HermitianMatrix {
    /// Validates squareness and Hermitian symmetry, then wraps.
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        let mut max_asym: f64 = 0.0;
        for i in 0..m.nrows() {
            for j in i..m.ncols() {
                let d = m[(i, j)] - m[(j, i)].conj();
                max_asym = max_asym.max(d.norm());
            }
        }
        if max_asym > HERMITIAN_TOL {
            return Err(Error::NotHermitian {
                max_asymmetry: max_asym,
                tol: HERMITIAN_TOL,
            });
        }
        Ok(Self { m })
    }

    /// Wraps `(M + M^dagger)/2`. Used by every operation that assembles a
    /// result from eigenvector products, where roundoff drift is expected.
    pub fn hermitize(m: DMatrix<C64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "hermitize requires a square matrix");
        let h = (&m + m.adjoint()).map(|z| z * 0.5);
        Self { m: h }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            m: DMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: DMatrix::identity(dim, dim),
        }
    }

    /// Real diagonal matrix.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        let v = DVector::from_iterator(diag.len(), diag.iter().map(|&x| C64::new(x, 0.0)));
        Self {
            m: DMatrix::from_diagonal(&v),
        }
    }

    /// Rank-one projector-like outer product `v v^dagger` (no normalization).
    pub fn outer(v: &DVector<C64>) -> Self {
        Self {
            m: v * v.adjoint(),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.m
    }

    /// Trace; the imaginary part is below the symmetry tolerance by invariant.
    pub fn trace(&self) -> f64 {
        self.m.trace().re
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.norm()
    }

    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        (&self.m - &other.m).norm()
    }

    /// Largest row sum of absolute values; bounds the spectral radius.
    pub fn inf_norm_bound(&self) -> f64 {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.m[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            m: self.m.map(|z| z * s),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            m: &self.m + &other.m,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            m: &self.m - &other.m,
        }
    }

    /// `a b a` for Hermitian `a`, `b`; Hermitian up to roundoff, so the
    /// result is re-symmetrized.
    pub fn sandwich(&self, inner: &Self) -> Self {
        Self::hermitize(&self.m * &inner.m * &self.m)
    }

    /// `Re tr(self * other)`.
    pub fn trace_product(&self, other: &Self) -> f64 {
        // tr(AB) = sum_ij A_ij B_ji
        let mut s = C64::new(0.0, 0.0);
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                s += self.m[(i, j)] * other.m[(j, i)];
            }
        }
        s.re
    }

    /// Eigendecomposition with eigenvalues sorted ascending and eigenvector
    /// columns permuted to match.
    pub fn eig(&self) -> Spectrum {
        let se = self.m.clone().symmetric_eigen();
        let n = self.dim();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| se.eigenvalues[a].partial_cmp(&se.eigenvalues[b]).unwrap());
        let eigenvalues: Vec<f64> = order.iter().map(|&k| se.eigenvalues[k]).collect();
        let mut eigenvectors = DMatrix::zeros(n, n);
        for (col, &k) in order.iter().enumerate() {
            eigenvectors.set_column(col, &se.eigenvectors.column(k));
        }
        Spectrum {
            eigenvalues,
            eigenvectors,
        }
    }

    /// Spectral projectors `(pi_supp, pi_ker)` at the relative threshold
    /// `eps * lambda_max`. A matrix with `lambda_max <= 0` is all kernel,
    /// so the zero matrix yields `pi_ker = identity`.
    ///
    /// Fails when an eigenvalue sits below `-eps * lambda_max`, i.e. the
    /// input is not PSD at the working tolerance.
    pub fn support_kernel_projectors(&self, eps: f64) -> Result<(Self, Self)> {
        let spec = self.eig();
        let lambda_max = *spec.eigenvalues.last().unwrap();
        let thr = eps * lambda_max.max(0.0);
        let lambda_min = spec.eigenvalues[0];
        if lambda_min < -thr {
            return Err(Error::NotPsd {
                min_eigenvalue: lambda_min,
            });
        }
        let n = self.dim();
        let mut ker = DMatrix::<C64>::zeros(n, n);
        for (j, &l) in spec.eigenvalues.iter().enumerate() {
            if l <= thr {
                let v = spec.eigenvectors.column(j);
                ker += v * v.adjoint();
            }
        }
        let ker = Self::hermitize(ker);
        let supp = Self {
            m: DMatrix::identity(n, n) - &ker.m,
        };
        Ok((supp, ker))
    }

    /// Traces out the `x` factor, leaving an operator on `H_y` (dim `ny`).
    pub fn partial_trace_x(&self, dims: BipartiteDims) -> Result<Self> {
        dims.check(self.dim())?;
        let (nx, ny) = (dims.nx, dims.ny);
        let mut out = DMatrix::<C64>::zeros(ny, ny);
        for y in 0..ny {
            for yp in 0..ny {
                let mut s = C64::new(0.0, 0.0);
                for x in 0..nx {
                    s += self.m[(x * ny + y, x * ny + yp)];
                }
                out[(y, yp)] = s;
            }
        }
        Ok(Self::hermitize(out))
    }

    /// Traces out the `y` factor, leaving an operator on `H_x` (dim `nx`).
    pub fn partial_trace_y(&self, dims: BipartiteDims) -> Result<Self> {
        dims.check(self.dim())?;
        let (nx, ny) = (dims.nx, dims.ny);
        let mut out = DMatrix::<C64>::zeros(nx, nx);
        for x in 0..nx {
            for xp in 0..nx {
                let mut s = C64::new(0.0, 0.0);
                for y in 0..ny {
                    s += self.m[(x * ny + y, xp * ny + y)];
                }
                out[(x, xp)] = s;
            }
        }
        Ok(Self::hermitize(out))
    }

    /// Kronecker product; row index of the result is `i_self * other.dim + i_other`,
    /// matching the `|x y>` lexicographic convention when `self` acts on `H_x`.
    pub fn kron(&self, other: &Self) -> Self {
        Self {
            m: self.m.kronecker(&other.m),
        }
    }

    fn check_density(&self) -> Result<Vec<f64>> {
        let tr = self.trace();
        if (tr - 1.0).abs() > DENSITY_TOL {
            return Err(Error::InvalidTrace { trace: tr });
        }
        let spec = self.eig();
        if spec.eigenvalues[0] < -DENSITY_TOL {
            return Err(Error::NotPsd {
                min_eigenvalue: spec.eigenvalues[0],
            });
        }
        Ok(spec.eigenvalues)
    }

    /// Von Neumann entropy in bits, `-sum lambda log2 lambda` with
    /// `0 log 0 := 0`. The input must be a density matrix (PSD, unit trace)
    /// at the [`DENSITY_TOL`] tolerance.
    pub fn von_neumann_entropy(&self) -> Result<f64> {
        let eigs = self.check_density()?;
        Ok(entropy_bits(&eigs))
    }
}

/// `-sum p log2 p` over a nonnegative vector; entries are clamped to `[0, 1]`
/// to absorb roundoff from eigensolves.
pub(crate) fn entropy_bits(p: &[f64]) -> f64 {
    p.iter()
        .map(|&l| {
            let l = l.clamp(0.0, 1.0);
            if l > 0.0 {
                -l * l.log2()
            } else {
                0.0
            }
        })
        .sum()
}

/// Quantum KL distance `D(rho // rho2) = tr[rho (log2 rho - log2 rho2)]` in
/// bits. Returns `+inf` when the support of `rho` leaks outside the support
/// of `rho2`; that convention stands in for the divergent integral rather
/// than signalling an error.
pub fn quantum_kl(rho: &HermitianMatrix, rho2: &HermitianMatrix) -> Result<f64> {
    if rho.dim() != rho2.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            got: rho2.dim(),
        });
    }
    let eigs1 = rho.check_density()?;
    rho2.check_density()?;

    let (_, ker2) = rho2.support_kernel_projectors(DEFAULT_EPS_KERNEL)?;
    if ker2.trace_product(rho) > 1e-10 {
        return Ok(f64::INFINITY);
    }
    // tr(rho log2 rho) from rho's spectrum; tr(rho log2 rho2) via the
    // support log of rho2 (kernel directions carry no rho weight).
    let t1: f64 = eigs1
        .iter()
        .map(|&l| {
            let l = l.clamp(0.0, 1.0);
            if l > 0.0 {
                l * l.log2()
            } else {
                0.0
            }
        })
        .sum();
    let log2_rho2 = ln_on_support(rho2, DEFAULT_EPS_KERNEL).scaled(1.0 / LN_2);
    let t2 = log2_rho2.trace_product(rho);
    Ok(t1 - t2)
}

/// Support logarithm: `sum_{lambda > eps lambda_max} ln(lambda) |v><v|` in
/// nats. Kernel directions contribute the zero operator, matching the
/// convention that they are excluded from stationarity conditions.
pub fn ln_on_support(m: &HermitianMatrix, eps: f64) -> HermitianMatrix {
    let spec = m.eig();
    let lambda_max = spec.eigenvalues.last().copied().unwrap_or(0.0);
    let thr = eps * lambda_max.max(0.0);
    let n = m.dim();
    let mut out = DMatrix::<C64>::zeros(n, n);
    for (j, &l) in spec.eigenvalues.iter().enumerate() {
        if l > thr {
            let v = spec.eigenvectors.column(j);
            out += (v * v.adjoint()).map(|z| z * l.ln());
        }
    }
    HermitianMatrix::hermitize(out)
}

/// `pi_1 rho^{-1/2} pi_1`: inverse square root on the support of `rho`,
/// with eigenvalues at or below `eps * lambda_max` mapped to zero.
pub fn inv_sqrt_on_support(rho: &HermitianMatrix, eps: f64) -> Result<HermitianMatrix> {
    let spec = rho.eig();
    let lambda_max = *spec.eigenvalues.last().unwrap();
    let thr = eps * lambda_max.max(0.0);
    if spec.eigenvalues[0] < -thr {
        return Err(Error::NotPsd {
            min_eigenvalue: spec.eigenvalues[0],
        });
    }
    let n = rho.dim();
    let mut out = DMatrix::<C64>::zeros(n, n);
    for (j, &l) in spec.eigenvalues.iter().enumerate() {
        if l > thr {
            let v = spec.eigenvectors.column(j);
            out += (v * v.adjoint()).map(|z| z / l.sqrt());
        }
    }
    Ok(HermitianMatrix::hermitize(out))
}

/// Eigenbasis of `ln r + delta` with kernel eigenvalues of `r` replaced by a
/// finite sentinel far below the support logs. `None` when `r` has empty
/// support (the exponential is then the zero matrix).
pub(crate) struct LogSumSpectrum {
    pub vectors: DMatrix<C64>,
    pub exponents: Vec<f64>,
}

pub(crate) fn log_sum_spectrum(
    r: &HermitianMatrix,
    delta: &HermitianMatrix,
    eps: f64,
) -> Option<LogSumSpectrum> {
    let spec = r.eig();
    let lambda_max = *spec.eigenvalues.last().unwrap();
    let thr = eps * lambda_max.max(0.0);
    let support: Vec<f64> = spec
        .eigenvalues
        .iter()
        .copied()
        .filter(|&l| l > thr)
        .collect();
    if support.is_empty() {
        return None;
    }
    let min_ln = support.iter().map(|l| l.ln()).fold(f64::INFINITY, f64::min);
    // Sentinel low enough that kernel directions vanish from the exponential
    // even after delta shifts them back up.
    let sentinel = min_ln - 50.0 - 2.0 * delta.inf_norm_bound();

    let n = r.dim();
    let mut ln_r = DMatrix::<C64>::zeros(n, n);
    for (j, &l) in spec.eigenvalues.iter().enumerate() {
        let v = spec.eigenvectors.column(j);
        let lnl = if l > thr { l.ln() } else { sentinel };
        ln_r += (v * v.adjoint()).map(|z| z * lnl);
    }
    let m = HermitianMatrix::hermitize(ln_r + delta.matrix());
    let mspec = m.eig();
    Some(LogSumSpectrum {
        vectors: mspec.eigenvectors,
        exponents: mspec.eigenvalues,
    })
}

/// Assembles `pi_1 exp(M - shift) pi_1` from a [`LogSumSpectrum`] of `M`.
/// The shift rescales every branch of an ensemble uniformly, so solver
/// normalizations cancel it; it exists to keep `exp` inside f64 range.
pub(crate) fn assemble_exp(
    ls: &LogSumSpectrum,
    shift: f64,
    pi1: &HermitianMatrix,
) -> HermitianMatrix {
    let n = pi1.dim();
    let mut e = DMatrix::<C64>::zeros(n, n);
    for (j, &mu) in ls.exponents.iter().enumerate() {
        let w = (mu - shift).exp();
        if w > 0.0 {
            let v = ls.vectors.column(j);
            e += (v * v.adjoint()).map(|z| z * w);
        }
    }
    HermitianMatrix::hermitize(pi1.matrix() * e * pi1.matrix())
}

/// `pi_1 exp(ln r + delta) pi_1` for PSD (possibly singular) `r` and
/// Hermitian `delta`.
///
/// Kernel directions of `r` contribute zero: their logs are driven to a
/// sentinel so far below the support logs that the exponential annihilates
/// them. When `r` and `delta` commute the result is elementwise
/// `exp(ln lambda_r + lambda_delta)` on the shared eigenbasis restricted to
/// the support of `r`. Singular `r` is the designed-for case, so there is no
/// error channel; an `r` with empty support yields the zero matrix.
pub fn exp_logsum(
    r: &HermitianMatrix,
    delta: &HermitianMatrix,
    pi1: &HermitianMatrix,
    eps: f64,
) -> HermitianMatrix {
    match log_sum_spectrum(r, delta, eps) {
        Some(ls) => assemble_exp(&ls, 0.0, pi1),
        None => HermitianMatrix::zeros(r.dim()),
    }
}

/// `e^{-delta/2} inner e^{-delta/2}`, computed in the eigenbasis of `delta`
/// so that large eigenvalues underflow to zero instead of overflowing.
pub(crate) fn conjugate_by_exp_neg_half(
    delta: &HermitianMatrix,
    inner: &HermitianMatrix,
) -> HermitianMatrix {
    let spec = delta.eig();
    let b = spec.eigenvectors.adjoint() * inner.matrix() * &spec.eigenvectors;
    let n = delta.dim();
    let mut c = DMatrix::<C64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let f = (-(spec.eigenvalues[i] + spec.eigenvalues[j]) * 0.5).exp();
            c[(i, j)] = b[(i, j)] * f;
        }
    }
    HermitianMatrix::hermitize(&spec.eigenvectors * c * spec.eigenvectors.adjoint())
}

/// `-ln(m)` with eigenvalues clamped below at `1e-300`; tiny negative
/// eigenvalues from roundoff are treated as that floor.
pub(crate) fn neg_ln_clamped(m: &HermitianMatrix) -> HermitianMatrix {
    let spec = m.eig();
    let n = m.dim();
    let mut out = DMatrix::<C64>::zeros(n, n);
    for (j, &l) in spec.eigenvalues.iter().enumerate() {
        let l = l.max(1e-300);
        let v = spec.eigenvectors.column(j);
        out += (v * v.adjoint()).map(|z| z * (-l.ln()));
    }
    HermitianMatrix::hermitize(out)
}
