//! Classical conditional-mutual-information minimization.
//!
//! The objective is `H(x:y|alpha)` over joint distributions `P(x,y,alpha)`
//! whose `(x,y)` marginal is pinned to a target; half its minimum is the
//! classical entanglement `E_cla`. The minimizer is approached by a fixed
//! point iteration that rescales the product-of-marginals surrogate
//! `R(x,y,alpha) = P(x,alpha) P(y,alpha) / P(alpha)` back onto the target
//! marginal, one synchronous update per step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{derive_seed, SolverConfig};
use crate::error::{Error, Result};

const LN_2: f64 = std::f64::consts::LN_2;

/// Joint distribution `P(x,y,alpha)`: nonnegative, sums to one.
/// Entries are stored cell-major: all `alpha` values of a given `(x,y)` cell
/// are contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    pub nx: usize,
    pub ny: usize,
    pub nalpha: usize,
    p: Vec<f64>,
}

/// Fixed `(x,y)` marginal the minimization is constrained to.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalTarget {
    pub nx: usize,
    pub ny: usize,
    ptilde: Vec<f64>,
}

/// The entanglement operator `Delta(x,y) = -ln(R(x,y)/P(x,y))` in nats.
/// Cells with `P(x,y) = 0` carry no weight in any expectation and are
/// stored as zero.
#[derive(Debug, Clone)]
pub struct ClassicalDelta {
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
}

/// Outcome of [`classical_solve`]: the entanglement estimate in bits, the
/// final iterate and its Delta, and the per-iteration diagnostics.
#[derive(Debug, Clone)]
pub struct ClassicalReport {
    pub entanglement_bits: f64,
    pub distribution: JointDistribution,
    pub delta: ClassicalDelta,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub cmi_history: Vec<f64>,
    pub converged: bool,
}

impl JointDistribution {
    pub fn new(nx: usize, ny: usize, nalpha: usize, p: Vec<f64>) -> Result<Self> {
        if nx == 0 || ny == 0 || nalpha == 0 || p.len() != nx * ny * nalpha {
            return Err(Error::DimensionMismatch {
                expected: nx * ny * nalpha,
                got: p.len(),
            });
        }
        if let Some(&bad) = p.iter().find(|&&v| v < 0.0) {
            return Err(Error::NegativeEntry { value: bad });
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self { nx, ny, nalpha, p })
    }

    #[inline]
    fn idx(&self, x: usize, y: usize, a: usize) -> usize {
        (x * self.ny + y) * self.nalpha + a
    }

    pub fn get(&self, x: usize, y: usize, a: usize) -> f64 {
        self.p[self.idx(x, y, a)]
    }

    pub fn values(&self) -> &[f64] {
        &self.p
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.nalpha == other.nalpha
    }

    /// `P(alpha)`.
    pub fn marginal_alpha(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.nalpha];
        for cell in self.p.chunks(self.nalpha) {
            for (a, &v) in cell.iter().enumerate() {
                m[a] += v;
            }
        }
        m
    }

    /// `P(x,alpha)` indexed `x * nalpha + a`.
    pub fn marginal_x_alpha(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.nx * self.nalpha];
        for x in 0..self.nx {
            for y in 0..self.ny {
                for a in 0..self.nalpha {
                    m[x * self.nalpha + a] += self.get(x, y, a);
                }
            }
        }
        m
    }

    /// `P(y,alpha)` indexed `y * nalpha + a`.
    pub fn marginal_y_alpha(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.ny * self.nalpha];
        for x in 0..self.nx {
            for y in 0..self.ny {
                for a in 0..self.nalpha {
                    m[y * self.nalpha + a] += self.get(x, y, a);
                }
            }
        }
        m
    }

    /// `P(x,y)` indexed `x * ny + y`.
    pub fn marginal_xy(&self) -> Vec<f64> {
        self.p
            .chunks(self.nalpha)
            .map(|cell| cell.iter().sum())
            .collect()
    }

    /// Dirichlet(1,..,1) spread of a target over `nalpha` slices:
    /// `P(x,y,alpha) = ptilde(x,y) u_alpha` with `u` uniform on the simplex.
    /// Stays inside the constraint set by construction.
    pub fn random_in_constraint_set(
        target: &ClassicalTarget,
        nalpha: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u: Vec<f64> = (0..nalpha)
            .map(|_| -(1.0 - rng.gen::<f64>()).ln())
            .collect();
        let s: f64 = u.iter().sum();
        u.iter_mut().for_each(|v| *v /= s);
        let mut p = vec![0.0; target.nx * target.ny * nalpha];
        for (cell, &t) in target.ptilde.iter().enumerate() {
            for (a, &ua) in u.iter().enumerate() {
                p[cell * nalpha + a] = t * ua;
            }
        }
        Self::new(target.nx, target.ny, nalpha, p)
    }

    /// Fully random joint distribution (iid exponential weights, normalized).
    pub fn random(nx: usize, ny: usize, nalpha: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p: Vec<f64> = (0..nx * ny * nalpha)
            .map(|_| -(1.0 - rng.gen::<f64>()).ln())
            .collect();
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= s);
        Self::new(nx, ny, nalpha, p)
    }
}

impl ClassicalTarget {
    pub fn new(nx: usize, ny: usize, ptilde: Vec<f64>) -> Result<Self> {
        if nx == 0 || ny == 0 || ptilde.len() != nx * ny {
            return Err(Error::DimensionMismatch {
                expected: nx * ny,
                got: ptilde.len(),
            });
        }
        if let Some(&bad) = ptilde.iter().find(|&&v| v < 0.0) {
            return Err(Error::NegativeEntry { value: bad });
        }
        let sum: f64 = ptilde.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self { nx, ny, ptilde })
    }

    pub fn values(&self) -> &[f64] {
        &self.ptilde
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.ptilde[x * self.ny + y]
    }

    /// Seeded random target with full support.
    pub fn random(nx: usize, ny: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t: Vec<f64> = (0..nx * ny)
            .map(|_| -(1.0 - rng.gen::<f64>()).ln() + 1e-3)
            .collect();
        let s: f64 = t.iter().sum();
        t.iter_mut().for_each(|v| *v /= s);
        Self::new(nx, ny, t)
    }

    /// `(1/2) H(x:y)` of the target itself, in bits: the entanglement when a
    /// single `alpha` slice leaves no conditioning freedom.
    pub fn half_mutual_information_bits(&self) -> f64 {
        let mut px = vec![0.0; self.nx];
        let mut py = vec![0.0; self.ny];
        for x in 0..self.nx {
            for y in 0..self.ny {
                px[x] += self.get(x, y);
                py[y] += self.get(x, y);
            }
        }
        let mut h = 0.0;
        for x in 0..self.nx {
            for y in 0..self.ny {
                let p = self.get(x, y);
                if p > 0.0 {
                    h += p * (p / (px[x] * py[y])).log2();
                }
            }
        }
        0.5 * h
    }
}

impl ClassicalDelta {
    /// `sum_{x,y} P(x,y) Delta(x,y)` in nats.
    pub fn expectation(&self, pxy: &[f64]) -> f64 {
        self.values
            .iter()
            .zip(pxy.iter())
            .map(|(&d, &p)| if p > 0.0 { p * d } else { 0.0 })
            .sum()
    }
}

/// Conditional mutual information `H(x:y|alpha)` in bits. Zero-probability
/// terms contribute zero.
pub fn classical_cmi(p: &JointDistribution) -> f64 {
    let r = classical_r_values(p);
    let mut h = 0.0;
    for (i, &pv) in p.p.iter().enumerate() {
        if pv > 0.0 && r[i] > 0.0 {
            h += pv * (pv / r[i]).log2();
        }
    }
    h
}

fn classical_r_values(p: &JointDistribution) -> Vec<f64> {
    let pa = p.marginal_alpha();
    let pxa = p.marginal_x_alpha();
    let pya = p.marginal_y_alpha();
    let mut r = vec![0.0; p.p.len()];
    for x in 0..p.nx {
        for y in 0..p.ny {
            for a in 0..p.nalpha {
                if pa[a] > 0.0 {
                    r[p.idx(x, y, a)] =
                        pxa[x * p.nalpha + a] * pya[y * p.nalpha + a] / pa[a];
                }
            }
        }
    }
    r
}

/// The surrogate `R[P](x,y,alpha) = P(x,alpha) P(y,alpha) / P(alpha)`,
/// itself a joint distribution (`0/0 := 0` for empty `alpha` slices).
pub fn classical_r(p: &JointDistribution) -> JointDistribution {
    let r = classical_r_values(p);
    JointDistribution {
        nx: p.nx,
        ny: p.ny,
        nalpha: p.nalpha,
        p: r,
    }
}

/// Lagrangian `L(P, P') = sum P ln(P/R')` in nats, with `R' = R[P']`.
/// Returns `+inf` when the support of `P` leaks outside the support of `R'`.
pub fn classical_lagrangian(p: &JointDistribution, p2: &JointDistribution) -> Result<f64> {
    if !p.same_shape(p2) {
        return Err(Error::ShapeMismatch);
    }
    let r2 = classical_r_values(p2);
    let mut l = 0.0;
    for (i, &pv) in p.p.iter().enumerate() {
        if pv > 0.0 {
            if r2[i] <= 0.0 {
                return Ok(f64::INFINITY);
            }
            l += pv * (pv / r2[i]).ln();
        }
    }
    Ok(l)
}

/// One synchronous minimization step: reimposes the target `(x,y)` marginal
/// on the surrogate's conditional over `alpha`,
/// `P'(x,y,alpha) = ptilde(x,y) R(x,y,alpha) / sum_alpha R(x,y,alpha)`.
/// Cells where the surrogate vanishes but the target does not are spread
/// uniformly over `alpha`.
pub fn classical_step(p: &JointDistribution, target: &ClassicalTarget) -> Result<JointDistribution> {
    if p.nx != target.nx || p.ny != target.ny {
        return Err(Error::ShapeMismatch);
    }
    let r = classical_r_values(p);
    let mut out = vec![0.0; p.p.len()];
    for cell in 0..p.nx * p.ny {
        let t = target.ptilde[cell];
        if t == 0.0 {
            continue;
        }
        let slice = &r[cell * p.nalpha..(cell + 1) * p.nalpha];
        let denom: f64 = slice.iter().sum();
        if denom > 0.0 {
            for a in 0..p.nalpha {
                out[cell * p.nalpha + a] = t * slice[a] / denom;
            }
        } else {
            let u = t / p.nalpha as f64;
            for a in 0..p.nalpha {
                out[cell * p.nalpha + a] = u;
            }
        }
    }
    Ok(JointDistribution {
        nx: p.nx,
        ny: p.ny,
        nalpha: p.nalpha,
        p: out,
    })
}

/// `Delta(x,y) = -ln(sum_alpha R(x,y,alpha) / P(x,y))` in nats.
pub fn classical_delta(p: &JointDistribution) -> ClassicalDelta {
    let r = classical_r(p);
    let rxy = r.marginal_xy();
    let pxy = p.marginal_xy();
    let values = rxy
        .iter()
        .zip(pxy.iter())
        .map(|(&r, &p)| if p > 0.0 && r > 0.0 { -(r / p).ln() } else { 0.0 })
        .collect();
    ClassicalDelta {
        nx: p.nx,
        ny: p.ny,
        values,
    }
}

/// Max-norm violation of the fixed-point condition
/// `P(x,y,alpha) = P(x,y) R(x,y,alpha) / sum_alpha R(x,y,alpha)`,
/// taken over cells with `P(x,y) > 0`.
pub fn classical_stationarity_residual(p: &JointDistribution) -> f64 {
    let r = classical_r_values(p);
    let pxy = p.marginal_xy();
    let mut worst: f64 = 0.0;
    for cell in 0..p.nx * p.ny {
        if pxy[cell] <= 0.0 {
            continue;
        }
        let slice = &r[cell * p.nalpha..(cell + 1) * p.nalpha];
        let denom: f64 = slice.iter().sum();
        for a in 0..p.nalpha {
            let fixed = if denom > 0.0 {
                pxy[cell] * slice[a] / denom
            } else {
                pxy[cell] / p.nalpha as f64
            };
            worst = worst.max((p.p[cell * p.nalpha + a] - fixed).abs());
        }
    }
    worst
}

/// Minimizes `(1/2) H(x:y|alpha)` over the constraint set by iterating
/// [`classical_step`] from seeded random starts. Runs `config.restarts`
/// independent starts and reports the one with the smallest entanglement
/// estimate. Non-convergence inside `max_iter` is flagged, not an error.
pub fn classical_solve(
    target: &ClassicalTarget,
    nalpha: usize,
    config: &SolverConfig,
) -> Result<ClassicalReport> {
    config.validate()?;
    if nalpha == 0 {
        return Err(Error::OutOfRange {
            name: "nalpha",
            value: 0.0,
            lo: 1.0,
            hi: f64::INFINITY,
        });
    }
    let mut best: Option<ClassicalReport> = None;
    for restart in 0..config.restarts {
        let seed = derive_seed(config.seed, restart as u64);
        let report = solve_single(target, nalpha, config, seed)?;
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
    target: &ClassicalTarget,
    nalpha: usize,
    config: &SolverConfig,
    seed: u64,
) -> Result<ClassicalReport> {
    let mut p = JointDistribution::random_in_constraint_set(target, nalpha, seed)?;
    let mut residual_history = Vec::new();
    let mut cmi_history = Vec::new();
    let mut converged = false;
    let mut prev_cmi = classical_cmi(&p);
    let mut iterations = 0;
    for _ in 0..config.max_iter {
        p = classical_step(&p, target)?;
        iterations += 1;
        let cmi = classical_cmi(&p);
        let residual = classical_stationarity_residual(&p);
        residual_history.push(residual);
        cmi_history.push(cmi);
        let dcmi = (cmi - prev_cmi).abs();
        prev_cmi = cmi;
        if residual < config.tol && dcmi < config.tol {
            converged = true;
            break;
        }
    }
    let cmi = classical_cmi(&p);
    let delta = classical_delta(&p);
    Ok(ClassicalReport {
        entanglement_bits: 0.5 * cmi,
        distribution: p,
        delta,
        iterations,
        residual_history,
        cmi_history,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Conditionally independent distribution: P(x,y|a) = P(x|a) P(y|a).
    fn cond_independent(seed: u64) -> JointDistribution {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (nx, ny, na) = (2, 3, 2);
        let mut p = vec![0.0; nx * ny * na];
        let mut wa: Vec<f64> = (0..na).map(|_| rng.gen::<f64>() + 0.1).collect();
        let sa: f64 = wa.iter().sum();
        wa.iter_mut().for_each(|v| *v /= sa);
        for a in 0..na {
            let mut px: Vec<f64> = (0..nx).map(|_| rng.gen::<f64>() + 0.1).collect();
            let sx: f64 = px.iter().sum();
            px.iter_mut().for_each(|v| *v /= sx);
            let mut py: Vec<f64> = (0..ny).map(|_| rng.gen::<f64>() + 0.1).collect();
            let sy: f64 = py.iter().sum();
            py.iter_mut().for_each(|v| *v /= sy);
            for x in 0..nx {
                for y in 0..ny {
                    p[(x * ny + y) * na + a] = wa[a] * px[x] * py[y];
                }
            }
        }
        JointDistribution::new(nx, ny, na, p).unwrap()
    }

    /// The bijection alpha <-> (x,y): each alpha slice carries exactly one cell.
    fn bijection_solution(target: &ClassicalTarget) -> JointDistribution {
        let (nx, ny) = (target.nx, target.ny);
        let na = nx * ny;
        let mut p = vec![0.0; nx * ny * na];
        for x in 0..nx {
            for y in 0..ny {
                let cell = x * ny + y;
                p[cell * na + cell] = target.get(x, y);
            }
        }
        JointDistribution::new(nx, ny, na, p).unwrap()
    }

    #[test]
    fn cmi_zero_on_conditional_independence() {
        for seed in 0..5 {
            let p = cond_independent(seed);
            assert_abs_diff_eq!(classical_cmi(&p), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn cmi_zero_on_bijection() {
        let target = ClassicalTarget::random(2, 2, 9).unwrap();
        let p = bijection_solution(&target);
        assert_abs_diff_eq!(classical_cmi(&p), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn cmi_one_bit_on_correlated_bools() {
        // P(x,y,a) = delta_x^y / 4 over Bool^3
        let mut p = vec![0.0; 8];
        for x in 0..2 {
            for a in 0..2 {
                p[(x * 2 + x) * 2 + a] = 0.25;
            }
        }
        let p = JointDistribution::new(2, 2, 2, p).unwrap();
        assert_abs_diff_eq!(classical_cmi(&p), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn r_is_fixed_point_of_factorized() {
        for seed in 0..5 {
            let p = cond_independent(seed);
            let r = classical_r(&p);
            let dmax = p
                .values()
                .iter()
                .zip(r.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(dmax < 1e-12);
        }
    }

    #[test]
    fn r_marginal_identity() {
        let p = JointDistribution::random(3, 2, 4, 17).unwrap();
        let r = classical_r(&p);
        let pa = p.marginal_alpha();
        let ra = r.marginal_alpha();
        for (a, b) in pa.iter().zip(ra.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        // R is itself a distribution
        let s: f64 = r.values().iter().sum();
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn r_matches_brute_marginal_products() {
        let p = JointDistribution::random(2, 3, 3, 23).unwrap();
        let r = classical_r(&p);
        for x in 0..2 {
            for y in 0..3 {
                for a in 0..3 {
                    let mut pxa = 0.0;
                    let mut pya = 0.0;
                    let mut pa = 0.0;
                    for yy in 0..3 {
                        pxa += p.get(x, yy, a);
                    }
                    for xx in 0..2 {
                        pya += p.get(xx, y, a);
                    }
                    for xx in 0..2 {
                        for yy in 0..3 {
                            pa += p.get(xx, yy, a);
                        }
                    }
                    let expect = if pa > 0.0 { pxa * pya / pa } else { 0.0 };
                    assert_abs_diff_eq!(r.get(x, y, a), expect, epsilon = 1e-13);
                }
            }
        }
    }

    #[test]
    fn lagrangian_identities() {
        for seed in 0..5 {
            let p = cond_independent(seed);
            assert_abs_diff_eq!(classical_lagrangian(&p, &p).unwrap(), 0.0, epsilon = 1e-12);
        }
        for seed in 0..10 {
            let p = JointDistribution::random(2, 2, 3, 100 + seed).unwrap();
            let l = classical_lagrangian(&p, &p).unwrap();
            assert_abs_diff_eq!(l / LN_2, classical_cmi(&p), epsilon = 1e-10);
        }
    }

    #[test]
    fn lagrangian_kl_decomposition() {
        // L(p,p') - L(p,p) equals the two conditional-marginal KL terms
        for seed in 0..10 {
            let p = JointDistribution::random(2, 2, 2, 200 + seed).unwrap();
            let p2 = JointDistribution::random(2, 2, 2, 300 + seed).unwrap();
            let lhs = classical_lagrangian(&p, &p2).unwrap() - classical_lagrangian(&p, &p).unwrap();

            let pa = p.marginal_alpha();
            let pxa = p.marginal_x_alpha();
            let pya = p.marginal_y_alpha();
            let qa = p2.marginal_alpha();
            let qxa = p2.marginal_x_alpha();
            let qya = p2.marginal_y_alpha();
            // D(P_a // P'_a) + sum_a P(a) [D(P(x|a)//P'(x|a)) + D(P(y|a)//P'(y|a))] in nats
            let mut rhs = 0.0;
            for a in 0..2 {
                if pa[a] > 0.0 {
                    rhs += pa[a] * (pa[a] / qa[a]).ln();
                }
                for x in 0..2 {
                    let pc = pxa[x * 2 + a] / pa[a];
                    let qc = qxa[x * 2 + a] / qa[a];
                    if pc > 0.0 {
                        rhs += pa[a] * pc * (pc / qc).ln();
                    }
                }
                for y in 0..2 {
                    let pc = pya[y * 2 + a] / pa[a];
                    let qc = qya[y * 2 + a] / qa[a];
                    if pc > 0.0 {
                        rhs += pa[a] * pc * (pc / qc).ln();
                    }
                }
            }
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-10);
        }
    }

    #[test]
    fn step_fixed_points() {
        let target = ClassicalTarget::random(2, 2, 5).unwrap();
        let p = bijection_solution(&target);
        let next = classical_step(&p, &target).unwrap();
        let dmax = p
            .values()
            .iter()
            .zip(next.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(dmax < 1e-12);
        assert!(classical_stationarity_residual(&p) < 1e-12);
    }

    #[test]
    fn step_preserves_invariants_and_marginal() {
        let target = ClassicalTarget::random(3, 2, 6).unwrap();
        let mut p = JointDistribution::random(3, 2, 4, 7).unwrap();
        for _ in 0..50 {
            p = classical_step(&p, &target).unwrap();
            assert!(p.values().iter().all(|&v| v >= 0.0));
            let s: f64 = p.values().iter().sum();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
            for (got, want) in p.marginal_xy().iter().zip(target.values()) {
                assert_abs_diff_eq!(got, want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn cmi_non_increasing_along_iteration() {
        let target = ClassicalTarget::random(2, 2, 8).unwrap();
        let mut p = JointDistribution::random_in_constraint_set(&target, 2, 81).unwrap();
        let mut last = classical_cmi(&p);
        for _ in 0..200 {
            p = classical_step(&p, &target).unwrap();
            let cmi = classical_cmi(&p);
            assert!(cmi <= last + 1e-10, "CMI increased: {last} -> {cmi}");
            last = cmi;
        }
    }

    #[test]
    fn delta_zero_on_conditional_independence() {
        let p = cond_independent(3);
        let d = classical_delta(&p);
        let pxy = p.marginal_xy();
        for (cell, &v) in d.values.iter().enumerate() {
            if pxy[cell] > 0.0 {
                assert_abs_diff_eq!(v, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn delta_matches_direct_evaluation() {
        let p = JointDistribution::random(2, 3, 2, 44).unwrap();
        let d = classical_delta(&p);
        let r = classical_r(&p);
        let rxy = r.marginal_xy();
        let pxy = p.marginal_xy();
        for cell in 0..6 {
            if pxy[cell] > 0.0 {
                assert_abs_diff_eq!(
                    d.values[cell],
                    -(rxy[cell] / pxy[cell]).ln(),
                    epsilon = 1e-13
                );
            }
        }
    }

    #[test]
    fn delta_expectation_is_cmi_at_fixed_point() {
        // At convergence, (1/(2 ln 2)) <Delta> = (1/2) CMI
        let target = ClassicalTarget::random(2, 2, 10).unwrap();
        let cfg = SolverConfig::classical_default();
        let report = classical_solve(&target, 2, &cfg).unwrap();
        assert!(report.converged);
        let pxy = report.distribution.marginal_xy();
        let e_delta = report.delta.expectation(&pxy) / (2.0 * LN_2);
        assert_abs_diff_eq!(e_delta, report.entanglement_bits, epsilon = 1e-7);
    }

    #[test]
    fn solve_bijection_size_reaches_zero() {
        let target = ClassicalTarget::random(2, 2, 12).unwrap();
        let cfg = SolverConfig {
            restarts: 4,
            ..SolverConfig::classical_default()
        };
        let report = classical_solve(&target, 4, &cfg).unwrap();
        assert!(
            report.entanglement_bits.abs() < 1e-6,
            "E_cla = {} for nalpha = nx*ny",
            report.entanglement_bits
        );
    }

    #[test]
    fn solve_single_alpha_is_half_mutual_information() {
        let target = ClassicalTarget::random(3, 2, 13).unwrap();
        let report =
            classical_solve(&target, 1, &SolverConfig::classical_default()).unwrap();
        assert_abs_diff_eq!(
            report.entanglement_bits,
            target.half_mutual_information_bits(),
            epsilon = 1e-10
        );
        assert!(report.converged);
    }

    #[test]
    fn residual_decreases_on_converged_runs() {
        let target = ClassicalTarget::random(2, 2, 14).unwrap();
        let report = classical_solve(&target, 2, &SolverConfig::classical_default()).unwrap();
        assert!(report.converged);
        let last = *report.residual_history.last().unwrap();
        assert!(last < 1e-8, "final residual {last}");
        assert_eq!(report.residual_history.len(), report.iterations);
        assert_eq!(report.cmi_history.len(), report.iterations);
    }
}
