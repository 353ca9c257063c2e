//! Quantum conditional-mutual-information minimization.
//!
//! The objective `S(x:y|alpha) = sum_alpha w_alpha [S(rho^a_x) + S(rho^a_y)
//! - S(rho^a_xy)]` is minimized over decompositions `{K^alpha}` of a target
//! density matrix, either over arbitrary PSD members (`mixed`) or over
//! rank-one members (`pure`). Half the pure minimum is the entanglement of
//! formation. The minimizer is approached by a coupled fixed-point iteration
//! on the ensemble and a Hermitian dual variable Delta:
//!
//! * ensemble update: `K^a <- pi_1 exp(ln R^a + Delta) pi_1`, normalized so
//!   the traces sum to one (for the pure flavor, the top eigenpair of that
//!   operator);
//! * a second ensemble refinement with the updated surrogate `R`;
//! * dual update: `Delta <- -ln(e^{-Delta/2} I e^{-Delta/2})` where
//!   `I = (pi_1 rho^{-1/2} pi_1) (sum_a K~^a) (pi_1 rho^{-1/2} pi_1) + pi_0`.
//!
//! `pi_0`/`pi_1` are the kernel/support projectors of the target, which keep
//! every quantity finite when the target is singular. All exponent shifts
//! used internally cancel against the trace normalizations.

use std::collections::VecDeque;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{derive_seed, SolverConfig};
use crate::error::{Error, Result};
use crate::hermitian::{
    assemble_exp, conjugate_by_exp_neg_half, entropy_bits, exp_logsum, inv_sqrt_on_support,
    ln_on_support, log_sum_spectrum, neg_ln_clamped, BipartiteDims, HermitianMatrix,
    LogSumSpectrum, C64, DEFAULT_EPS_KERNEL,
};
use crate::states::{random_hjw_vector, support_eigenpairs};

const LN_2: f64 = std::f64::consts::LN_2;

/// Whether ensemble members may be arbitrary PSD operators or must stay
/// rank one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnsembleKind {
    Mixed,
    Pure,
}

/// A candidate decomposition of the target: PSD operators `K^alpha` on
/// `H_x (x) H_y` whose traces sum to one. The weight of a member is its
/// trace; only at a solver fixed point does the member sum reproduce the
/// target density matrix.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub dims: BipartiteDims,
    pub kind: EnsembleKind,
    members: Vec<HermitianMatrix>,
}

/// Tolerances for the ensemble invariants.
const PSD_TOL: f64 = 1e-10;
const TRACE_SUM_TOL: f64 = 1e-10;
const RANK1_REL_TOL: f64 = 1e-8;

impl Ensemble {
    /// Validating constructor; see [`Ensemble::validate`].
    pub fn new(dims: BipartiteDims, kind: EnsembleKind, members: Vec<HermitianMatrix>) -> Result<Self> {
        let e = Self {
            dims,
            kind,
            members,
        };
        e.validate()?;
        Ok(e)
    }

    /// Steps assemble members spectrally, so they satisfy the invariants by
    /// construction; this skips the O(n^3) re-validation on the hot path.
    pub(crate) fn from_parts_unchecked(
        dims: BipartiteDims,
        kind: EnsembleKind,
        members: Vec<HermitianMatrix>,
    ) -> Self {
        Self {
            dims,
            kind,
            members,
        }
    }

    /// Checks the full invariant set: member dimensions, PSD to `-1e-10`,
    /// trace sum one to `1e-10`, and rank one (second eigenvalue at most
    /// `1e-8` of the first) for the pure kind.
    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::InvalidEnsemble("ensemble has no members".into()));
        }
        let dim = self.dims.product();
        let mut trace_sum = 0.0;
        for (a, k) in self.members.iter().enumerate() {
            if k.dim() != dim {
                return Err(Error::InvalidEnsemble(format!(
                    "member {a} has dim {} but dims give {dim}",
                    k.dim()
                )));
            }
            let eigs = k.eig().eigenvalues;
            let min = eigs[0];
            if min < -PSD_TOL {
                return Err(Error::InvalidEnsemble(format!(
                    "member {a} is not PSD (min eigenvalue {min:.3e})"
                )));
            }
            if self.kind == EnsembleKind::Pure {
                let top = eigs[eigs.len() - 1];
                let second = if eigs.len() > 1 { eigs[eigs.len() - 2] } else { 0.0 };
                if top > 0.0 && second > RANK1_REL_TOL * top {
                    return Err(Error::InvalidEnsemble(format!(
                        "pure member {a} has rank > 1 (lambda2/lambda1 = {:.3e})",
                        second / top
                    )));
                }
            }
            trace_sum += k.trace();
        }
        if (trace_sum - 1.0).abs() > TRACE_SUM_TOL {
            return Err(Error::InvalidEnsemble(format!(
                "member traces sum to {trace_sum:.12}, expected 1"
            )));
        }
        Ok(())
    }

    pub fn members(&self) -> &[HermitianMatrix] {
        &self.members
    }

    pub fn into_members(self) -> Vec<HermitianMatrix> {
        self.members
    }

    pub fn nalpha(&self) -> usize {
        self.members.len()
    }

    /// Member traces `w_alpha`.
    pub fn weights(&self) -> Vec<f64> {
        self.members.iter().map(|k| k.trace()).collect()
    }

    pub fn sum_members(&self) -> HermitianMatrix {
        let mut sum = HermitianMatrix::zeros(self.dims.product());
        for k in &self.members {
            sum = sum.add(k);
        }
        sum
    }
}

/// Hermitian dual variable on `H_xy`, in nats. Its target expectation,
/// scaled by `1/(2 ln 2)`, is the entanglement at a solver fixed point.
#[derive(Debug, Clone)]
pub struct EntanglementOperator {
    pub delta: HermitianMatrix,
}

impl EntanglementOperator {
    pub fn zero(dim: usize) -> Self {
        Self {
            delta: HermitianMatrix::zeros(dim),
        }
    }
}

/// Outcome of a quantum solve. `entanglement_bits` is half the final CMI;
/// at convergence it agrees with `entanglement_from_delta` to the solver
/// tolerance. Histories carry one entry per iteration.
#[derive(Debug, Clone)]
pub struct SolverReport {
    pub entanglement_bits: f64,
    pub ensemble: Ensemble,
    pub delta: EntanglementOperator,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub cmi_history: Vec<f64>,
    pub converged: bool,
}

/// Conditional mutual information of the ensemble in bits:
/// `sum_a w_a [S(rho^a_x) + S(rho^a_y) - S(rho^a_xy)]`. Weightless members
/// contribute zero.
pub fn quantum_cmi(e: &Ensemble) -> f64 {
    let mut total = 0.0;
    for k in &e.members {
        let w = k.trace();
        if w <= 1e-15 {
            continue;
        }
        let sxy = normalized_entropy(k, w);
        let sx = normalized_entropy(&k.partial_trace_y(e.dims).expect("dims validated"), w);
        let sy = normalized_entropy(&k.partial_trace_x(e.dims).expect("dims validated"), w);
        total += w * (sx + sy - sxy);
    }
    total
}

/// Entropy in bits of `k / w` from the spectrum of `k`.
fn normalized_entropy(k: &HermitianMatrix, w: f64) -> f64 {
    let eigs: Vec<f64> = k.eig().eigenvalues.iter().map(|&l| l / w).collect();
    entropy_bits(&eigs)
}

/// Product-of-marginals surrogate per member:
/// `R^a = (K^a_x (x) K^a_y) / w_a = w_a rho^a_x (x) rho^a_y`.
/// The zero member maps to the zero matrix.
pub fn quantum_r(e: &Ensemble) -> Vec<HermitianMatrix> {
    e.members
        .iter()
        .map(|k| {
            let w = k.trace();
            if w <= 1e-15 {
                return HermitianMatrix::zeros(e.dims.product());
            }
            let kx = k.partial_trace_y(e.dims).expect("dims validated");
            let ky = k.partial_trace_x(e.dims).expect("dims validated");
            kx.kron(&ky).scaled(1.0 / w)
        })
        .collect()
}

/// Lagrangian `L(K, K') = sum_a tr[K^a (ln K^a - ln R'^a)]` in nats, with
/// `R'` built from the second ensemble. `+inf` when a member's support leaks
/// outside the support of its surrogate.
pub fn quantum_lagrangian(e: &Ensemble, e2: &Ensemble) -> Result<f64> {
    if e.dims != e2.dims || e.nalpha() != e2.nalpha() {
        return Err(Error::ShapeMismatch);
    }
    let r2 = quantum_r(e2);
    let mut total = 0.0;
    for (k, r) in e.members.iter().zip(r2.iter()) {
        let w = k.trace();
        if w <= 1e-15 {
            continue;
        }
        // tr K ln K over the support of K
        let k_eigs = k.eig().eigenvalues;
        let k_max = k_eigs[k_eigs.len() - 1];
        let t1: f64 = k_eigs
            .iter()
            .filter(|&&l| l > DEFAULT_EPS_KERNEL * k_max.max(0.0))
            .map(|&l| l * l.ln())
            .sum();
        // support containment check against R
        let r_eigs = r.eig();
        let r_max = r_eigs.eigenvalues.last().copied().unwrap_or(0.0);
        if r_max <= 0.0 {
            return Ok(f64::INFINITY);
        }
        let thr = DEFAULT_EPS_KERNEL * r_max;
        let mut ker_overlap = 0.0;
        let mut ln_r = HermitianMatrix::zeros(k.dim());
        for (j, &l) in r_eigs.eigenvalues.iter().enumerate() {
            let v = r_eigs.eigenvectors.column(j).into_owned();
            let proj = HermitianMatrix::outer(&v);
            if l > thr {
                ln_r = ln_r.add(&proj.scaled(l.ln()));
            } else {
                ker_overlap += proj.trace_product(k);
            }
        }
        if ker_overlap > 1e-10 {
            return Ok(f64::INFINITY);
        }
        total += t1 - ln_r.trace_product(k);
    }
    Ok(total)
}

/// `(1/(2 ln 2)) tr(rho Delta)` in bits.
pub fn entanglement_from_delta(rho: &HermitianMatrix, delta: &EntanglementOperator) -> Result<f64> {
    if rho.dim() != delta.delta.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            got: delta.delta.dim(),
        });
    }
    Ok(rho.trace_product(&delta.delta) / (2.0 * LN_2))
}

/// Support projector without the PSD gate: eigenvalues at or below
/// `eps * max(lambda_max, 0)` (including roundoff negatives) count as kernel.
fn support_projector_lenient(m: &HermitianMatrix, eps: f64) -> HermitianMatrix {
    let spec = m.eig();
    let lambda_max = spec.eigenvalues.last().copied().unwrap_or(0.0);
    let thr = eps * lambda_max.max(0.0);
    let mut out = HermitianMatrix::zeros(m.dim());
    for (j, &l) in spec.eigenvalues.iter().enumerate() {
        if l > thr {
            let v = spec.eigenvectors.column(j).into_owned();
            out = out.add(&HermitianMatrix::outer(&v));
        }
    }
    out
}

/// Violation of the stationarity conditions in operator norm terms:
///
/// * mixed: `max_a || pi_s (ln K^a - ln R^a - Delta) pi_s ||_F` over the
///   member supports, plus the reconstruction error `|| sum K - rho ||_F`;
/// * pure: `max_a || (ln R^a + Delta) |psi_a> - ln(w_a) |psi_a> ||_2` plus
///   the same reconstruction error.
pub fn stationarity_residual(
    e: &Ensemble,
    delta: &EntanglementOperator,
    rho: &HermitianMatrix,
    kind: EnsembleKind,
) -> f64 {
    stationarity_residual_eps(e, delta, rho, kind, DEFAULT_EPS_KERNEL)
}

pub(crate) fn stationarity_residual_eps(
    e: &Ensemble,
    delta: &EntanglementOperator,
    rho: &HermitianMatrix,
    kind: EnsembleKind,
    eps: f64,
) -> f64 {
    let rs = quantum_r(e);
    let mut worst: f64 = 0.0;
    match kind {
        EnsembleKind::Mixed => {
            for (k, r) in e.members.iter().zip(rs.iter()) {
                let w = k.trace();
                if w <= 1e-15 {
                    continue;
                }
                let pi_s = support_projector_lenient(k, eps);
                let ln_k = ln_on_support(k, eps);
                let ln_r = ln_on_support(r, eps);
                let x = pi_s.sandwich(&ln_k.sub(&ln_r).sub(&delta.delta));
                worst = worst.max(x.frobenius_norm());
            }
        }
        EnsembleKind::Pure => {
            for (k, r) in e.members.iter().zip(rs.iter()) {
                let w = k.trace();
                if w <= 1e-15 {
                    continue;
                }
                let psi = top_eigvec(k);
                let ln_r = ln_on_support(r, eps);
                let op = ln_r.add(&delta.delta);
                let v = op.matrix() * &psi - psi.map(|z| z * w.ln());
                worst = worst.max(v.norm());
            }
        }
    }
    worst + e.sum_members().frobenius_distance(rho)
}

fn top_eigvec(k: &HermitianMatrix) -> DVector<C64> {
    let spec = k.eig();
    spec.eigenvectors.column(k.dim() - 1).into_owned()
}

/// Precomputed spectral data of the target shared by every iteration.
struct TargetContext {
    rho: HermitianMatrix,
    pi0: HermitianMatrix,
    pi1: HermitianMatrix,
    inv_sqrt: HermitianMatrix,
    support_pairs: Vec<(f64, DVector<C64>)>,
}

impl TargetContext {
    fn new(rho: &HermitianMatrix, eps: f64) -> Result<Self> {
        let tr = rho.trace();
        if (tr - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidTrace { trace: tr });
        }
        let (pi1, pi0) = rho.support_kernel_projectors(eps)?;
        let inv_sqrt = inv_sqrt_on_support(rho, eps)?;
        let support_pairs = support_eigenpairs(rho, eps)?;
        Ok(Self {
            rho: rho.clone(),
            pi0,
            pi1,
            inv_sqrt,
            support_pairs,
        })
    }
}

/// Spectra of `ln R^a + Delta` for the whole ensemble plus the global
/// exponent shift that keeps `exp` inside f64 range. The shift multiplies
/// every branch by the same factor, so trace normalization cancels it.
fn ensemble_log_spectra(
    rs: &[HermitianMatrix],
    delta: &HermitianMatrix,
    eps: f64,
) -> (Vec<Option<LogSumSpectrum>>, f64) {
    let spectra: Vec<Option<LogSumSpectrum>> = rs
        .iter()
        .map(|r| log_sum_spectrum(r, delta, eps))
        .collect();
    let shift = spectra
        .iter()
        .flatten()
        .flat_map(|ls| ls.exponents.iter().copied())
        .fold(f64::NEG_INFINITY, f64::max);
    let shift = if shift.is_finite() { shift } else { 0.0 };
    (spectra, shift)
}

/// Mixed-flavor ensemble update `K^a <- pi_1 exp(ln R^a + Delta) pi_1`,
/// normalized so the traces sum to one.
fn mixed_members_update(
    rs: &[HermitianMatrix],
    delta: &HermitianMatrix,
    ctx: &TargetContext,
    eps: f64,
) -> Result<Vec<HermitianMatrix>> {
    let (spectra, shift) = ensemble_log_spectra(rs, delta, eps);
    let dim = ctx.rho.dim();
    let mut members: Vec<HermitianMatrix> = spectra
        .iter()
        .map(|s| match s {
            Some(ls) => assemble_exp(ls, shift, &ctx.pi1),
            None => HermitianMatrix::zeros(dim),
        })
        .collect();
    let norm: f64 = members.iter().map(|m| m.trace()).sum();
    if !(norm > 0.0) {
        return Err(Error::InvalidEnsemble(
            "every ensemble branch vanished during the update".into(),
        ));
    }
    for m in &mut members {
        *m = m.scaled(1.0 / norm);
    }
    Ok(members)
}

/// Pure-flavor update: per member, the largest eigenpair of
/// `pi_1 exp(ln R^a + Delta) pi_1`. Under degeneracy (relative gap below
/// 1e-12) the eigenvector with the largest overlap against the previous
/// member is chosen, so reruns are deterministic.
fn pure_members_update(
    rs: &[HermitianMatrix],
    delta: &HermitianMatrix,
    prev_psis: &[DVector<C64>],
    ctx: &TargetContext,
    eps: f64,
) -> Result<Vec<HermitianMatrix>> {
    let (spectra, shift) = ensemble_log_spectra(rs, delta, eps);
    let dim = ctx.rho.dim();
    let mut raw: Vec<(f64, DVector<C64>)> = Vec::with_capacity(rs.len());
    for (a, s) in spectra.iter().enumerate() {
        match s {
            None => raw.push((0.0, DVector::zeros(dim))),
            Some(ls) => {
                let b = assemble_exp(ls, shift, &ctx.pi1);
                let spec = b.eig();
                let top = spec.eigenvalues[dim - 1];
                if !(top > 0.0) {
                    raw.push((0.0, DVector::zeros(dim)));
                    continue;
                }
                // degenerate candidates, searched from the top down
                let mut best_j = dim - 1;
                let mut best_overlap = -1.0;
                for j in (0..dim).rev() {
                    if top - spec.eigenvalues[j] > 1e-12 * top {
                        break;
                    }
                    let v = spec.eigenvectors.column(j);
                    let overlap = prev_psis[a].dotc(&v).norm();
                    if overlap > best_overlap {
                        best_overlap = overlap;
                        best_j = j;
                    }
                }
                raw.push((
                    spec.eigenvalues[best_j],
                    spec.eigenvectors.column(best_j).into_owned(),
                ));
            }
        }
    }
    let norm: f64 = raw.iter().map(|(w, _)| w).sum();
    if !(norm > 0.0) {
        return Err(Error::InvalidEnsemble(
            "every ensemble branch vanished during the update".into(),
        ));
    }
    Ok(raw
        .into_iter()
        .map(|(w, psi)| HermitianMatrix::outer(&psi).scaled(w / norm))
        .collect())
}

/// Re-seeds branches whose weight fell under `w_floor` with a fresh random
/// rank-one piece of the target, then renormalizes the trace sum.
fn apply_weight_floor<R: Rng>(
    members: &mut Vec<HermitianMatrix>,
    ctx: &TargetContext,
    w_floor: f64,
    rng: &mut R,
) {
    let mut touched = false;
    for m in members.iter_mut() {
        if m.trace() < w_floor {
            let v = random_hjw_vector(&ctx.support_pairs, rng);
            *m = HermitianMatrix::outer(&v);
            touched = true;
        }
    }
    if touched {
        let norm: f64 = members.iter().map(|m| m.trace()).sum();
        for m in members.iter_mut() {
            *m = m.scaled(1.0 / norm);
        }
    }
}

/// Dual update `Delta <- -ln(e^{-Delta/2} I e^{-Delta/2})` with
/// `I = s (sum_a K~^a) s + pi_0`, `s = pi_1 rho^{-1/2} pi_1`.
fn delta_update(
    sum_ktilde: &HermitianMatrix,
    delta_old: &HermitianMatrix,
    ctx: &TargetContext,
) -> HermitianMatrix {
    let i_op = ctx.inv_sqrt.sandwich(sum_ktilde).add(&ctx.pi0);
    let inner = conjugate_by_exp_neg_half(delta_old, &i_op);
    neg_ln_clamped(&inner)
}

fn step_mixed<R: Rng>(
    e: &Ensemble,
    delta: &EntanglementOperator,
    ctx: &TargetContext,
    cfg: &SolverConfig,
    rng: &mut R,
) -> Result<(Ensemble, EntanglementOperator)> {
    let rs = quantum_r(e);
    let mut k1 = mixed_members_update(&rs, &delta.delta, ctx, cfg.eps_kernel)?;
    apply_weight_floor(&mut k1, ctx, cfg.w_floor, rng);
    let e1 = Ensemble::from_parts_unchecked(e.dims, EnsembleKind::Mixed, k1);

    let rs1 = quantum_r(&e1);
    let ktilde = mixed_members_update(&rs1, &delta.delta, ctx, cfg.eps_kernel)?;
    let mut sum_kt = HermitianMatrix::zeros(ctx.rho.dim());
    for k in &ktilde {
        sum_kt = sum_kt.add(k);
    }
    let new_delta = delta_update(&sum_kt, &delta.delta, ctx);
    Ok((e1, EntanglementOperator { delta: new_delta }))
}

fn step_pure<R: Rng>(
    e: &Ensemble,
    delta: &EntanglementOperator,
    ctx: &TargetContext,
    cfg: &SolverConfig,
    rng: &mut R,
) -> Result<(Ensemble, EntanglementOperator)> {
    let prev_psis: Vec<DVector<C64>> = e.members.iter().map(top_eigvec).collect();
    let rs = quantum_r(e);
    let mut k1 = pure_members_update(&rs, &delta.delta, &prev_psis, ctx, cfg.eps_kernel)?;
    apply_weight_floor(&mut k1, ctx, cfg.w_floor, rng);
    let e1 = Ensemble::from_parts_unchecked(e.dims, EnsembleKind::Pure, k1);

    let psis1: Vec<DVector<C64>> = e1.members.iter().map(top_eigvec).collect();
    let rs1 = quantum_r(&e1);
    let ktilde = pure_members_update(&rs1, &delta.delta, &psis1, ctx, cfg.eps_kernel)?;
    let mut sum_kt = HermitianMatrix::zeros(ctx.rho.dim());
    for k in &ktilde {
        sum_kt = sum_kt.add(k);
    }
    let new_delta = delta_update(&sum_kt, &delta.delta, ctx);
    Ok((e1, EntanglementOperator { delta: new_delta }))
}

/// One mixed-flavor iteration. Requires a mixed-kind ensemble; the target
/// projectors are recomputed from `rho` at `cfg.eps_kernel`.
pub fn mixed_step(
    e: &Ensemble,
    delta: &EntanglementOperator,
    rho: &HermitianMatrix,
    cfg: &SolverConfig,
) -> Result<(Ensemble, EntanglementOperator)> {
    if e.kind != EnsembleKind::Mixed {
        return Err(Error::InvalidEnsemble("mixed_step requires kind = mixed".into()));
    }
    let ctx = TargetContext::new(rho, cfg.eps_kernel)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0x5eed));
    step_mixed(e, delta, &ctx, cfg, &mut rng)
}

/// One pure-flavor iteration; members stay rank one.
pub fn pure_step(
    e: &Ensemble,
    delta: &EntanglementOperator,
    rho: &HermitianMatrix,
    cfg: &SolverConfig,
) -> Result<(Ensemble, EntanglementOperator)> {
    if e.kind != EnsembleKind::Pure {
        return Err(Error::InvalidEnsemble("pure_step requires kind = pure".into()));
    }
    let ctx = TargetContext::new(rho, cfg.eps_kernel)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0x5eed));
    step_pure(e, delta, &ctx, cfg, &mut rng)
}

fn solve(
    rho: &HermitianMatrix,
    dims: BipartiteDims,
    nalpha: usize,
    cfg: &SolverConfig,
    kind: EnsembleKind,
) -> Result<SolverReport> {
    cfg.validate()?;
    if dims.product() != rho.dim() {
        return Err(Error::BadBipartiteDims {
            nx: dims.nx,
            ny: dims.ny,
            dim: rho.dim(),
        });
    }
    if nalpha == 0 {
        return Err(Error::OutOfRange {
            name: "nalpha",
            value: 0.0,
            lo: 1.0,
            hi: f64::INFINITY,
        });
    }
    let ctx = TargetContext::new(rho, cfg.eps_kernel)?;
    let mut best: Option<SolverReport> = None;
    for restart in 0..cfg.restarts {
        let seed = derive_seed(cfg.seed, restart as u64);
        let report = solve_single(&ctx, dims, nalpha, cfg, kind, seed)?;
        let better = match &best {
            None => true,
            Some(b) => report.entanglement_bits < b.entanglement_bits,
        };
        if better {
            best = Some(report);
        }
    }
    Ok(best.unwrap())
}

fn solve_single(
    ctx: &TargetContext,
    dims: BipartiteDims,
    nalpha: usize,
    cfg: &SolverConfig,
    kind: EnsembleKind,
    seed: u64,
) -> Result<SolverReport> {
    let init = crate::states::hjw_initial_ensemble_with_dims(
        &ctx.rho,
        dims,
        nalpha,
        kind,
        seed,
        cfg.eps_kernel,
    )?;
    let mut e = init;
    let mut delta = EntanglementOperator::zero(ctx.rho.dim());
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xf100f));

    let mut residual_history = Vec::new();
    let mut cmi_history = Vec::new();
    let mut recent_de: VecDeque<f64> = VecDeque::new();
    let mut prev_e = 0.5 * quantum_cmi(&e);
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..cfg.max_iter {
        let (e_next, d_next) = match kind {
            EnsembleKind::Mixed => step_mixed(&e, &delta, ctx, cfg, &mut rng)?,
            EnsembleKind::Pure => step_pure(&e, &delta, ctx, cfg, &mut rng)?,
        };
        e = e_next;
        delta = d_next;
        iterations += 1;

        let cmi = quantum_cmi(&e);
        let ent = 0.5 * cmi;
        let residual = stationarity_residual_eps(&e, &delta, &ctx.rho, kind, cfg.eps_kernel);
        cmi_history.push(cmi);
        residual_history.push(residual);

        recent_de.push_back((ent - prev_e).abs());
        if recent_de.len() > 5 {
            recent_de.pop_front();
        }
        prev_e = ent;

        if residual < cfg.tol && recent_de.len() == 5 && recent_de.iter().all(|&d| d < cfg.tol) {
            converged = true;
            break;
        }
    }

    let entanglement_bits = 0.5 * quantum_cmi(&e);
    Ok(SolverReport {
        entanglement_bits,
        ensemble: e,
        delta,
        iterations,
        residual_history,
        cmi_history,
        converged,
    })
}

/// Minimizes the CMI over mixed decompositions of `rho` from seeded random
/// starts; reports half the final CMI in bits and the final dual variable.
/// Non-convergence inside `max_iter` is flagged, not an error.
pub fn mixed_solve(
    rho: &HermitianMatrix,
    dims: BipartiteDims,
    nalpha: usize,
    cfg: &SolverConfig,
) -> Result<SolverReport> {
    solve(rho, dims, nalpha, cfg, EnsembleKind::Mixed)
}

/// Minimizes over rank-one decompositions: the entanglement-of-formation
/// estimate, together with the optimal decomposition found.
pub fn pure_solve(
    rho: &HermitianMatrix,
    dims: BipartiteDims,
    nalpha: usize,
    cfg: &SolverConfig,
) -> Result<SolverReport> {
    solve(rho, dims, nalpha, cfg, EnsembleKind::Pure)
}

/// Sanity handle used by tests and the verification command: the trace form
/// of the CMI, `sum_a tr[K^a (log2 K^a - log2 R^a)]`.
pub fn quantum_cmi_trace_form(e: &Ensemble) -> f64 {
    let rs = quantum_r(e);
    let mut total = 0.0;
    for (k, r) in e.members.iter().zip(rs.iter()) {
        let w = k.trace();
        if w <= 1e-15 {
            continue;
        }
        let k_eigs = k.eig().eigenvalues;
        let k_max = k_eigs[k_eigs.len() - 1];
        let t1: f64 = k_eigs
            .iter()
            .filter(|&&l| l > DEFAULT_EPS_KERNEL * k_max.max(0.0))
            .map(|&l| l * l.log2())
            .sum();
        let log2_r = ln_on_support(r, DEFAULT_EPS_KERNEL).scaled(1.0 / LN_2);
        total += t1 - log2_r.trace_product(k);
    }
    total
}

/// Exponential primitive re-exported at the module level for callers that
/// drive the iteration by hand.
pub fn exp_logsum_step(
    r: &HermitianMatrix,
    delta: &EntanglementOperator,
    pi1: &HermitianMatrix,
    eps: f64,
) -> HermitianMatrix {
    exp_logsum(r, &delta.delta, pi1, eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{classical_delta, classical_step, ClassicalTarget, JointDistribution};
    use crate::states::{bell_basis, hjw_initial_ensemble_with_dims, random_state_vector, werner};
    use approx::assert_abs_diff_eq;

    fn bell_ensemble() -> Ensemble {
        let rho = bell_basis()[0].projector();
        Ensemble::new(BipartiteDims::new(2, 2), EnsembleKind::Pure, vec![rho]).unwrap()
    }

    fn product_pure_ensemble() -> Ensemble {
        // two product states with weights 0.5 each
        let dims = BipartiteDims::new(2, 2);
        let mut members = Vec::new();
        for seed in 0..2u64 {
            let vx = random_state_vector(2, 10 + seed);
            let vy = random_state_vector(2, 20 + seed);
            let mut v = DVector::<C64>::zeros(4);
            for x in 0..2 {
                for y in 0..2 {
                    v[x * 2 + y] = vx.amplitudes()[x] * vy.amplitudes()[y];
                }
            }
            members.push(HermitianMatrix::outer(&v).scaled(0.5));
        }
        Ensemble::new(dims, EnsembleKind::Pure, members).unwrap()
    }

    fn diagonal_ensemble(p: &JointDistribution) -> Ensemble {
        // K^a = diag over (x,y) of P(x,y,a), in |xy> lexicographic order
        let dims = BipartiteDims::new(p.nx, p.ny);
        let members = (0..p.nalpha)
            .map(|a| {
                let d: Vec<f64> = (0..p.nx * p.ny)
                    .map(|cell| p.get(cell / p.ny, cell % p.ny, a))
                    .collect();
                HermitianMatrix::from_diagonal(&d)
            })
            .collect();
        Ensemble::new(dims, EnsembleKind::Mixed, members).unwrap()
    }

    #[test]
    fn cmi_product_states_zero() {
        assert_abs_diff_eq!(quantum_cmi(&product_pure_ensemble()), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn cmi_bell_two_bits() {
        assert_abs_diff_eq!(quantum_cmi(&bell_ensemble()), 2.0, epsilon = 1e-10);
    }

    #[test]
    fn cmi_matches_trace_form() {
        let rho = werner(0.8).unwrap();
        let e = hjw_initial_ensemble_with_dims(
            &rho,
            BipartiteDims::new(2, 2),
            6,
            EnsembleKind::Mixed,
            11,
            1e-12,
        )
        .unwrap();
        assert_abs_diff_eq!(
            quantum_cmi(&e),
            quantum_cmi_trace_form(&e),
            epsilon = 1e-8
        );
    }

    #[test]
    fn cmi_pure_kind_doubles_marginal_entropy() {
        let rho = werner(0.8).unwrap();
        let e = hjw_initial_ensemble_with_dims(
            &rho,
            BipartiteDims::new(2, 2),
            6,
            EnsembleKind::Pure,
            5,
            1e-12,
        )
        .unwrap();
        let mut expect = 0.0;
        for k in e.members() {
            let w = k.trace();
            let rx = k.partial_trace_y(e.dims).unwrap().scaled(1.0 / w);
            expect += 2.0 * w * rx.von_neumann_entropy().unwrap();
        }
        assert_abs_diff_eq!(quantum_cmi(&e), expect, epsilon = 1e-9);
    }

    #[test]
    fn r_functional_cases() {
        // product pure member: R = K
        let e = product_pure_ensemble();
        for (k, r) in e.members().iter().zip(quantum_r(&e).iter()) {
            assert!(k.frobenius_distance(r) < 1e-10);
        }
        // Bell member: R = I/4
        let e = bell_ensemble();
        let r = &quantum_r(&e)[0];
        assert!(r.frobenius_distance(&HermitianMatrix::identity(4).scaled(0.25)) < 1e-12);
        // trace identity on a random ensemble
        let rho = werner(0.6).unwrap();
        let e = hjw_initial_ensemble_with_dims(
            &rho,
            BipartiteDims::new(2, 2),
            5,
            EnsembleKind::Mixed,
            3,
            1e-12,
        )
        .unwrap();
        for (k, r) in e.members().iter().zip(quantum_r(&e).iter()) {
            assert_abs_diff_eq!(k.trace(), r.trace(), epsilon = 1e-10);
        }
    }

    #[test]
    fn lagrangian_identities() {
        let e = product_pure_ensemble();
        assert_abs_diff_eq!(quantum_lagrangian(&e, &e).unwrap(), 0.0, epsilon = 1e-9);

        let rho = werner(0.75).unwrap();
        let e = hjw_initial_ensemble_with_dims(
            &rho,
            BipartiteDims::new(2, 2),
            6,
            EnsembleKind::Mixed,
            21,
            1e-12,
        )
        .unwrap();
        assert_abs_diff_eq!(
            quantum_lagrangian(&e, &e).unwrap() / LN_2,
            quantum_cmi(&e),
            epsilon = 1e-8
        );
    }

    #[test]
    fn mixed_step_bell_fixed_point() {
        // pure target: the iteration pins K to the target and Delta to zero
        let rho = bell_basis()[0].projector();
        let dims = BipartiteDims::new(2, 2);
        let e = Ensemble::new(dims, EnsembleKind::Mixed, vec![rho.clone()]).unwrap();
        let delta = EntanglementOperator::zero(4);
        let cfg = SolverConfig::default();
        let (e1, d1) = mixed_step(&e, &delta, &rho, &cfg).unwrap();
        assert!(e1.members()[0].frobenius_distance(&rho) < 1e-10);
        assert!(d1.delta.frobenius_norm() < 1e-10);
        // and the ensemble E is correct immediately
        assert_abs_diff_eq!(0.5 * quantum_cmi(&e1), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn diagonal_step_follows_classical_update() {
        // On diagonal data the composed update obeys
        // K_{n+2} = classical_step(K_{n+1}) exactly, and the converged dual
        // matches the classical Delta.
        let target = ClassicalTarget::random(2, 2, 31).unwrap();
        let rho = HermitianMatrix::from_diagonal(target.values());
        let p0 = JointDistribution::random_in_constraint_set(&target, 3, 32).unwrap();
        let e0 = diagonal_ensemble(&p0);
        let cfg = SolverConfig::default();
        let delta0 = EntanglementOperator::zero(4);

        let (e1, d1) = mixed_step(&e0, &delta0, &rho, &cfg).unwrap();
        let (e2, _d2) = mixed_step(&e1, &d1, &rho, &cfg).unwrap();

        // classical image of the diagonal of e1
        let p1 = JointDistribution::new(
            2,
            2,
            3,
            (0..4)
                .flat_map(|cell| {
                    (0..3).map(move |a| (cell, a))
                })
                .map(|(cell, a)| e1.members()[a].matrix()[(cell, cell)].re.max(0.0))
                .collect::<Vec<_>>(),
        );
        // entries are produced cell-major in the same layout
        let p1 = match p1 {
            Ok(p) => p,
            Err(err) => panic!("diagonal of quantum iterate is not a distribution: {err}"),
        };
        let c1 = classical_step(&p1, &target).unwrap();
        for cell in 0..4 {
            for a in 0..3 {
                let q = e2.members()[a].matrix()[(cell, cell)].re;
                assert_abs_diff_eq!(q, c1.get(cell / 2, cell % 2, a), epsilon = 1e-9);
            }
        }

        // run to convergence: Delta approaches the classical Delta
        let mut e = e0;
        let mut d = delta0;
        for _ in 0..400 {
            let (en, dn) = mixed_step(&e, &d, &rho, &cfg).unwrap();
            e = en;
            d = dn;
        }
        let pfinal = JointDistribution::new(
            2,
            2,
            3,
            (0..4)
                .flat_map(|cell| (0..3).map(move |a| (cell, a)))
                .map(|(cell, a)| e.members()[a].matrix()[(cell, cell)].re.max(0.0))
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let cd = classical_delta(&pfinal);
        for cell in 0..4 {
            let q = d.delta.matrix()[(cell, cell)].re;
            assert_abs_diff_eq!(q, cd.values[cell], epsilon = 1e-6);
        }
    }

    #[test]
    fn mixed_solve_separable_diagonal_reaches_zero() {
        // diagonal targets embed the classical problem; with
        // nalpha = nx*ny the minimum is zero
        let target = ClassicalTarget::random(2, 2, 77).unwrap();
        let rho = HermitianMatrix::from_diagonal(target.values());
        let cfg = SolverConfig {
            restarts: 2,
            max_iter: 3000,
            ..SolverConfig::default()
        };
        let report = mixed_solve(&rho, BipartiteDims::new(2, 2), 4, &cfg).unwrap();
        assert!(
            report.entanglement_bits < 1e-5,
            "separable diagonal E = {}",
            report.entanglement_bits
        );
    }

    #[test]
    fn pure_step_keeps_rank_one_and_solver_invariants() {
        let rho = werner(0.8).unwrap();
        let dims = BipartiteDims::new(2, 2);
        let mut e = hjw_initial_ensemble_with_dims(&rho, dims, 6, EnsembleKind::Pure, 17, 1e-12)
            .unwrap();
        let mut d = EntanglementOperator::zero(4);
        let cfg = SolverConfig::default();
        for _ in 0..25 {
            let (en, dn) = pure_step(&e, &d, &rho, &cfg).unwrap();
            e = en;
            d = dn;
            e.validate().unwrap();
            // Delta stays Hermitian by construction of HermitianMatrix;
            // check the trace sum tightly as well
            let w: f64 = e.weights().iter().sum();
            assert_abs_diff_eq!(w, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn pure_solve_bell_is_one_bit() {
        let rho = bell_basis()[0].projector();
        let cfg = SolverConfig {
            restarts: 1,
            max_iter: 200,
            ..SolverConfig::default()
        };
        let report = pure_solve(&rho, BipartiteDims::new(2, 2), 1, &cfg).unwrap();
        assert_abs_diff_eq!(report.entanglement_bits, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn pure_step_deterministic_reruns() {
        let rho = werner(0.25).unwrap(); // maximally mixed: degenerate spectra
        let dims = BipartiteDims::new(2, 2);
        let cfg = SolverConfig {
            restarts: 1,
            max_iter: 50,
            ..SolverConfig::default()
        };
        let a = pure_solve(&rho, dims, 6, &cfg).unwrap();
        let b = pure_solve(&rho, dims, 6, &cfg).unwrap();
        assert_eq!(a.entanglement_bits.to_bits(), b.entanglement_bits.to_bits());
    }

    #[test]
    fn residual_zero_at_exact_fixed_point() {
        // classical-diagonal converged data embeds to a quantum fixed point
        let target = ClassicalTarget::random(2, 2, 51).unwrap();
        let cfg = SolverConfig::classical_default();
        let report = crate::classical::classical_solve(&target, 2, &cfg).unwrap();
        assert!(report.converged);
        let e = diagonal_ensemble(&report.distribution);
        let rho = HermitianMatrix::from_diagonal(target.values());
        let mut dvals = vec![0.0; 4];
        for cell in 0..4 {
            dvals[cell] = report.delta.values[cell];
        }
        let delta = EntanglementOperator {
            delta: HermitianMatrix::from_diagonal(&dvals),
        };
        let r = stationarity_residual(&e, &delta, &rho, EnsembleKind::Mixed);
        let rc = crate::classical::classical_stationarity_residual(&report.distribution);
        assert!(r < 1e-6, "quantum residual {r}");
        assert!((r - rc).abs() < 1e-6);
    }

    #[test]
    fn entanglement_from_delta_cases() {
        let rho = werner(0.9).unwrap();
        let zero = EntanglementOperator::zero(4);
        assert_abs_diff_eq!(entanglement_from_delta(&rho, &zero).unwrap(), 0.0);
        let mismatch = EntanglementOperator::zero(9);
        assert!(entanglement_from_delta(&rho, &mismatch).is_err());
    }

    #[test]
    fn kind_checks_enforced() {
        let rho = werner(0.8).unwrap();
        let dims = BipartiteDims::new(2, 2);
        let e = hjw_initial_ensemble_with_dims(&rho, dims, 6, EnsembleKind::Pure, 1, 1e-12)
            .unwrap();
        let d = EntanglementOperator::zero(4);
        let cfg = SolverConfig::default();
        assert!(mixed_step(&e, &d, &rho, &cfg).is_err());
    }
}
