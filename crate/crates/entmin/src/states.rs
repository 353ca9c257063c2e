//! Named state families and seeded random ensemble construction.
//!
//! Basis conventions are fixed here once and used everywhere: product basis
//! `|x y>` is lexicographic (index `x * ny + y`), and the Bell basis is
//! ordered `phi+, phi-, psi+, psi-` with
//! `|phi+-> = (|00> +- |11>)/sqrt(2)` and `|psi+-> = (|01> +- |10>)/sqrt(2)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::derive_seed;
use crate::error::{Error, Result};
use crate::hermitian::{BipartiteDims, HermitianMatrix, C64};
use crate::quantum::{Ensemble, EnsembleKind};

/// Normalized complex state vector.
#[derive(Debug, Clone)]
pub struct StateVector {
    amplitudes: DVector<C64>,
}

impl StateVector {
    pub fn new(amplitudes: DVector<C64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::NotUnitNorm { norm });
        }
        Ok(Self { amplitudes })
    }

    /// Normalizes a nonzero vector.
    pub fn normalized(v: DVector<C64>) -> Self {
        let norm = v.norm();
        assert!(norm > 0.0, "cannot normalize the zero vector");
        Self {
            amplitudes: v.map(|z| z / norm),
        }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    /// Projector `|psi><psi|`.
    pub fn projector(&self) -> HermitianMatrix {
        HermitianMatrix::outer(&self.amplitudes)
    }
}

/// Rectangular matrix with orthonormal columns:
/// `sum_alpha T[alpha][j] conj(T[alpha][j']) = delta_{j j'}`.
#[derive(Debug, Clone)]
pub struct RightUnitary {
    pub nalpha: usize,
    pub d: usize,
    t: DMatrix<C64>,
}

impl RightUnitary {
    pub fn entries(&self) -> &DMatrix<C64> {
        &self.t
    }

    /// Max deviation of the column Gram matrix from the identity.
    pub fn gram_defect(&self) -> f64 {
        let g = self.t.adjoint() * &self.t;
        let id = DMatrix::<C64>::identity(self.d, self.d);
        (g - id).norm()
    }
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// The four Bell states in the documented order `phi+, phi-, psi+, psi-`.
pub fn bell_basis() -> [StateVector; 4] {
    let inv = std::f64::consts::FRAC_1_SQRT_2;
    let mk = |a: [f64; 4]| {
        StateVector::new(DVector::from_iterator(4, a.iter().map(|&x| real(x)))).unwrap()
    };
    [
        mk([inv, 0.0, 0.0, inv]),
        mk([inv, 0.0, 0.0, -inv]),
        mk([0.0, inv, inv, 0.0]),
        mk([0.0, inv, -inv, 0.0]),
    ]
}

/// Convex mixture of the four Bell projectors with weights `m` (in the
/// documented basis order). `m` must lie on the simplex to 1e-10.
pub fn bell_mixture(m: &[f64; 4]) -> Result<HermitianMatrix> {
    let sum: f64 = m.iter().sum();
    if (sum - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized { sum });
    }
    if let Some(&bad) = m.iter().find(|&&w| w < -1e-10) {
        return Err(Error::NegativeEntry { value: bad });
    }
    let basis = bell_basis();
    let mut rho = DMatrix::<C64>::zeros(4, 4);
    for (w, b) in m.iter().zip(basis.iter()) {
        rho += b.projector().matrix().map(|z| z * w.max(0.0));
    }
    Ok(HermitianMatrix::hermitize(rho))
}

/// Werner state `W(F)`: weight `F` on `phi+`, the rest spread evenly over
/// the other three Bell states.
pub fn werner(f: f64) -> Result<HermitianMatrix> {
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::OutOfRange {
            name: "F",
            value: f,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let rest = (1.0 - f) / 3.0;
    bell_mixture(&[f, rest, rest, rest])
}

/// Horodecki 3x3 family
/// `sigma(alpha) = (2/7)|psi+><psi+| + (alpha/7) sigma_+ + ((5-alpha)/7) sigma_-`
/// with `|psi+> = (|00> + |11> + |22>)/sqrt(3)`, `sigma_+` diagonal on
/// `{01, 12, 20}` and `sigma_-` diagonal on `{10, 21, 02}`.
pub fn horodecki(alpha: f64) -> Result<HermitianMatrix> {
    if !(2.0..=5.0).contains(&alpha) {
        return Err(Error::OutOfRange {
            name: "alpha",
            value: alpha,
            lo: 2.0,
            hi: 5.0,
        });
    }
    let inv3 = 1.0 / 3f64.sqrt();
    let mut psi = DVector::<C64>::zeros(9);
    for k in 0..3 {
        psi[k * 3 + k] = real(inv3);
    }
    let mut rho = (&psi * psi.adjoint()).map(|z| z * (2.0 / 7.0));
    let plus_cells = [0 * 3 + 1, 1 * 3 + 2, 2 * 3 + 0];
    let minus_cells = [1 * 3 + 0, 2 * 3 + 1, 0 * 3 + 2];
    for &i in &plus_cells {
        rho[(i, i)] += real(alpha / 21.0);
    }
    for &i in &minus_cells {
        rho[(i, i)] += real((5.0 - alpha) / 21.0);
    }
    Ok(HermitianMatrix::hermitize(rho))
}

/// Orthonormalized columns of a seeded complex Gaussian `nalpha x d` matrix.
/// Deterministic per seed.
pub fn random_right_unitary(nalpha: usize, d: usize, seed: u64) -> Result<RightUnitary> {
    if nalpha < d || d == 0 {
        return Err(Error::BadRightUnitaryShape { nalpha, d });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(nalpha, d, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = g.qr();
    let q = qr.q();
    debug_assert_eq!(q.ncols(), d);
    Ok(RightUnitary { nalpha, d, t: q })
}

/// Seeded random unit vector (complex Gaussian direction).
pub fn random_state_vector(dim: usize, seed: u64) -> StateVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = DVector::from_fn(dim, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    StateVector::normalized(v)
}

/// Seeded random density matrix of the given rank (normalized Wishart,
/// Gaussian-induced).
pub fn random_density_matrix(dim: usize, rank: usize, seed: u64) -> HermitianMatrix {
    assert!(rank >= 1 && rank <= dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(dim, rank, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let w = &g * g.adjoint();
    let tr = w.trace().re;
    HermitianMatrix::hermitize(w.map(|z| z / tr))
}

/// Support eigenpairs of a density matrix at the relative threshold
/// `eps * lambda_max`, eigenvalues descending.
pub(crate) fn support_eigenpairs(
    rho: &HermitianMatrix,
    eps: f64,
) -> Result<Vec<(f64, DVector<C64>)>> {
    let spec = rho.eig();
    let lambda_max = *spec.eigenvalues.last().unwrap();
    let thr = eps * lambda_max.max(0.0);
    if spec.eigenvalues[0] < -thr.max(1e-10) {
        return Err(Error::NotPsd {
            min_eigenvalue: spec.eigenvalues[0],
        });
    }
    let mut pairs: Vec<(f64, DVector<C64>)> = spec
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > thr)
        .map(|(j, &l)| (l, spec.eigenvectors.column(j).into_owned()))
        .collect();
    pairs.reverse();
    Ok(pairs)
}

/// One random member of the ensemble lattice of `rho`: a vector
/// `v = sum_j t_j sqrt(lambda_j) |phi_j>` with `t` a random unit vector, so
/// that `v v^dagger` is a valid (unnormalized) piece of `rho`.
pub(crate) fn random_hjw_vector<R: Rng>(
    pairs: &[(f64, DVector<C64>)],
    rng: &mut R,
) -> DVector<C64> {
    let d = pairs.len();
    let mut t = DVector::from_fn(d, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let n = t.norm();
    t /= real(n);
    let dim = pairs[0].1.len();
    let mut v = DVector::<C64>::zeros(dim);
    for (j, (l, phi)) in pairs.iter().enumerate() {
        v += phi.map(|z| z * t[j] * l.sqrt());
    }
    v
}

fn pure_hjw_members(
    pairs: &[(f64, DVector<C64>)],
    nalpha: usize,
    dim: usize,
    seed: u64,
) -> Result<Vec<HermitianMatrix>> {
    let d = pairs.len();
    let t = random_right_unitary(nalpha, d, seed)?;
    let mut members = Vec::with_capacity(nalpha);
    for a in 0..nalpha {
        let mut v = DVector::<C64>::zeros(dim);
        for (j, (l, phi)) in pairs.iter().enumerate() {
            v += phi.map(|z| z * t.entries()[(a, j)] * l.sqrt());
        }
        members.push(HermitianMatrix::outer(&v));
    }
    Ok(members)
}

/// Random initial ensemble reconstructing `rho` exactly.
///
/// Pure kind: `K^alpha = w_alpha |psi_alpha><psi_alpha|` built from a random
/// right-unitary acting on the support eigen-ensemble. Mixed kind: a seeded
/// convex blend of two independent such pure ensembles, which generically
/// produces members of rank two and keeps early iterations away from log
/// singularities. Requires `nalpha >= rank(rho)`.
pub fn hjw_initial_ensemble(
    rho: &HermitianMatrix,
    nalpha: usize,
    kind: EnsembleKind,
    seed: u64,
    eps: f64,
) -> Result<Ensemble> {
    let tr = rho.trace();
    if (tr - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidTrace { trace: tr });
    }
    let pairs = support_eigenpairs(rho, eps)?;
    let rank = pairs.len();
    if nalpha < rank {
        return Err(Error::EnsembleTooSmall { nalpha, rank });
    }
    let dim = rho.dim();
    let dims = guess_dims(dim);
    let members = match kind {
        EnsembleKind::Pure => pure_hjw_members(&pairs, nalpha, dim, derive_seed(seed, 1))?,
        EnsembleKind::Mixed => {
            let a = pure_hjw_members(&pairs, nalpha, dim, derive_seed(seed, 1))?;
            let b = pure_hjw_members(&pairs, nalpha, dim, derive_seed(seed, 2))?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 3));
            let lambda: f64 = rng.gen();
            a.iter()
                .zip(b.iter())
                .map(|(ka, kb)| ka.scaled(lambda).add(&kb.scaled(1.0 - lambda)))
                .collect()
        }
    };
    Ensemble::new(dims, kind, members)
}

/// Fallback factorization for callers that only hand us a matrix: the
/// ensemble machinery needs some bipartite split, but HJW construction is
/// split-independent, so any factorization of the dimension will do.
fn guess_dims(dim: usize) -> BipartiteDims {
    let mut nx = (dim as f64).sqrt().floor() as usize;
    while nx > 1 && dim % nx != 0 {
        nx -= 1;
    }
    BipartiteDims::new(nx.max(1), dim / nx.max(1))
}

/// As [`hjw_initial_ensemble`] but with the bipartite split made explicit.
pub fn hjw_initial_ensemble_with_dims(
    rho: &HermitianMatrix,
    dims: BipartiteDims,
    nalpha: usize,
    kind: EnsembleKind,
    seed: u64,
    eps: f64,
) -> Result<Ensemble> {
    let e = hjw_initial_ensemble(rho, nalpha, kind, seed, eps)?;
    Ensemble::new(dims, e.kind, e.into_members())
}
