//! Independent ground-truth computations used to verify the solvers.
//!
//! Nothing here calls into the solver modules: the brute-force classical
//! minimizer keeps its own marginal and objective code so that agreement
//! between an oracle and a solver is evidence, not circularity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hermitian::{BipartiteDims, HermitianMatrix};
use crate::states::StateVector;

/// `h(p) = -p log2 p - (1-p) log2 (1-p)` with `0 log 0 := 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange {
            name: "p",
            value: p,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let term = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    Ok(term(p) + term(1.0 - p))
}

/// Closed-form entanglement of formation of a Bell mixture with weights `m`:
/// `t = 0` if `m_max < 1/2`, else `(2 m_max - 1)^2`, and the result is
/// `h((1 + sqrt(1 - t))/2)` bits.
pub fn bell_mixture_eof(m: &[f64; 4]) -> Result<f64> {
    let sum: f64 = m.iter().sum();
    if (sum - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized { sum });
    }
    if let Some(&bad) = m.iter().find(|&&w| w < -1e-10) {
        return Err(Error::NegativeEntry { value: bad });
    }
    let m_max = m.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let t = if m_max < 0.5 {
        0.0
    } else {
        (2.0 * m_max - 1.0).powi(2)
    };
    binary_entropy((1.0 + (1.0 - t).sqrt()) / 2.0)
}

/// Entanglement of a single pure state: the entropy of its reduced state,
/// `S(tr_y |psi><psi|)` in bits.
pub fn pure_state_eof(psi: &StateVector, dims: BipartiteDims) -> Result<f64> {
    let rho = psi.projector();
    let rx = rho.partial_trace_y(dims)?;
    rx.von_neumann_entropy()
}

const ORACLE_SIZE_CAP: usize = 16;
const ORACLE_MIN_BUDGET: usize = 10_000;

/// Brute-force minimizer of `(1/2) H(x:y|alpha)` over distributions with a
/// pinned `(x,y)` marginal, for tiny instances only.
///
/// Strategy: seeded Dirichlet multistarts, each refined by cyclic coordinate
/// descent on the per-cell conditional simplices; every cell update is the
/// exact minimizer of the majorizing functional at the current surrogate, so
/// the objective never increases. `budget` caps the total number of cell
/// updates. Returns the best value seen in bits; deterministic per seed.
pub fn brute_force_classical(
    target_nx: usize,
    target_ny: usize,
    target: &[f64],
    nalpha: usize,
    budget: usize,
    seed: u64,
) -> Result<f64> {
    let (nx, ny) = (target_nx, target_ny);
    let ncells = nx * ny;
    if target.len() != ncells {
        return Err(Error::DimensionMismatch {
            expected: ncells,
            got: target.len(),
        });
    }
    let size = ncells * nalpha;
    if size > ORACLE_SIZE_CAP {
        return Err(Error::OracleSizeCap {
            size,
            cap: ORACLE_SIZE_CAP,
        });
    }
    if budget < ORACLE_MIN_BUDGET {
        return Err(Error::OracleBudgetTooSmall {
            budget,
            min: ORACLE_MIN_BUDGET,
        });
    }
    let tsum: f64 = target.iter().sum();
    if (tsum - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized { sum: tsum });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    let mut spent = 0usize;

    // p is indexed cell-major: p[cell * nalpha + a]
    let cmi = |p: &[f64]| -> f64 {
        let mut pa = vec![0.0; nalpha];
        let mut pxa = vec![0.0; nx * nalpha];
        let mut pya = vec![0.0; ny * nalpha];
        for x in 0..nx {
            for y in 0..ny {
                for a in 0..nalpha {
                    let v = p[(x * ny + y) * nalpha + a];
                    pa[a] += v;
                    pxa[x * nalpha + a] += v;
                    pya[y * nalpha + a] += v;
                }
            }
        }
        let mut h = 0.0;
        for x in 0..nx {
            for y in 0..ny {
                for a in 0..nalpha {
                    let v = p[(x * ny + y) * nalpha + a];
                    if v > 0.0 {
                        let r = pxa[x * nalpha + a] * pya[y * nalpha + a] / pa[a];
                        if r > 0.0 {
                            h += v * (v / r).log2();
                        }
                    }
                }
            }
        }
        h
    };

    while spent < budget {
        // fresh Dirichlet spread of the target over alpha
        let mut u: Vec<f64> = (0..nalpha)
            .map(|_| -(1.0 - rng.gen::<f64>()).ln())
            .collect();
        let s: f64 = u.iter().sum();
        u.iter_mut().for_each(|v| *v /= s);
        let mut p = vec![0.0; size];
        for cell in 0..ncells {
            for a in 0..nalpha {
                p[cell * nalpha + a] = target[cell] * u[a];
            }
        }
        best = best.min(0.5 * cmi(&p));

        // cyclic exact cell updates until stable
        let mut sweeps = 0;
        loop {
            let mut max_change: f64 = 0.0;
            for cell in 0..ncells {
                if target[cell] <= 0.0 {
                    continue;
                }
                // conditional over alpha proportional to the current surrogate
                let mut pa = vec![0.0; nalpha];
                let mut pxa = vec![0.0; nalpha];
                let mut pya = vec![0.0; nalpha];
                let (cx, cy) = (cell / ny, cell % ny);
                for x in 0..nx {
                    for y in 0..ny {
                        for a in 0..nalpha {
                            let v = p[(x * ny + y) * nalpha + a];
                            pa[a] += v;
                            if x == cx {
                                pxa[a] += v;
                            }
                            if y == cy {
                                pya[a] += v;
                            }
                        }
                    }
                }
                let mut r = vec![0.0; nalpha];
                let mut rsum = 0.0;
                for a in 0..nalpha {
                    if pa[a] > 0.0 {
                        r[a] = pxa[a] * pya[a] / pa[a];
                        rsum += r[a];
                    }
                }
                for a in 0..nalpha {
                    let newv = if rsum > 0.0 {
                        target[cell] * r[a] / rsum
                    } else {
                        target[cell] / nalpha as f64
                    };
                    let old = p[cell * nalpha + a];
                    max_change = max_change.max((newv - old).abs());
                    p[cell * nalpha + a] = newv;
                }
                spent += 1;
            }
            best = best.min(0.5 * cmi(&p));
            sweeps += 1;
            if max_change < 1e-13 || sweeps >= 500 || spent >= budget {
                break;
            }
        }
    }
    Ok(best)
}
