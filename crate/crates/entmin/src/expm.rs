//! Matrix exponential by diagonal Padé approximation with scaling and
//! squaring.
//!
//! This is the cross-check path for [`crate::hermitian::exp_logsum`]: the
//! exponent `ln r + delta` is Hermitian with eigenvalues that can be very
//! negative when `r` is nearly singular, which is hard on eigensolvers. A
//! rational approximant evaluated on the negated, shifted (hence PSD)
//! exponent avoids the eigendecomposition entirely. The degree-13 approximant
//! and the scaling thresholds follow the standard double-precision choices.

use nalgebra::{Complex, DMatrix};

use crate::hermitian::{log_sum_spectrum, C64, HermitianMatrix};

// Optimal 1-norm thresholds for the [m/m] diagonal approximants in f64.
const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.539398330063230e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068;
const THETA_13: f64 = 5.371920351148152;

const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];

fn one_norm(a: &DMatrix<C64>) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn scalar(x: f64) -> C64 {
    Complex::new(x, 0.0)
}

/// Evaluates the [m/m] approximant given the even power sums.
/// `u` collects the odd part (premultiplied by `a`), `v` the even part;
/// the approximant is `(v - u)^{-1} (v + u)`.
fn pade_solve(a: &DMatrix<C64>, u_odd: DMatrix<C64>, v: DMatrix<C64>) -> DMatrix<C64> {
    let u = a * u_odd;
    let num = &v + &u;
    let den = v - u;
    den.lu().solve(&num).expect("Pade denominator is singular")
}

fn pade_low(a: &DMatrix<C64>, coeff: &[f64]) -> DMatrix<C64> {
    let n = a.nrows();
    let id = DMatrix::<C64>::identity(n, n);
    let a2 = a * a;
    // horner in a2 for odd/even coefficient slices
    let mut u = DMatrix::<C64>::zeros(n, n);
    let mut v = DMatrix::<C64>::zeros(n, n);
    let mut pow = id.clone();
    for k in 0..coeff.len() {
        if k % 2 == 1 {
            u += pow.map(|z| z * scalar(coeff[k]));
        } else {
            v += pow.map(|z| z * scalar(coeff[k]));
        }
        if k + 1 < coeff.len() && k % 2 == 1 {
            pow = &pow * &a2;
        }
    }
    pade_solve(a, u, v)
}

fn pade_13(a: &DMatrix<C64>) -> DMatrix<C64> {
    let n = a.nrows();
    let id = DMatrix::<C64>::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let u_odd = &a6 * (a6.map(|z| z * scalar(B13[13])) + a4.map(|z| z * scalar(B13[11])) + a2.map(|z| z * scalar(B13[9])))
        + a6.map(|z| z * scalar(B13[7]))
        + a4.map(|z| z * scalar(B13[5]))
        + a2.map(|z| z * scalar(B13[3]))
        + id.map(|z| z * scalar(B13[1]));
    let v = &a6 * (a6.map(|z| z * scalar(B13[12])) + a4.map(|z| z * scalar(B13[10])) + a2.map(|z| z * scalar(B13[8])))
        + a6.map(|z| z * scalar(B13[6]))
        + a4.map(|z| z * scalar(B13[4]))
        + a2.map(|z| z * scalar(B13[2]))
        + id.map(|z| z * scalar(B13[0]));
    pade_solve(a, u_odd, v)
}

/// Matrix exponential of a dense complex matrix.
pub fn expm(a: &DMatrix<C64>) -> DMatrix<C64> {
    assert_eq!(a.nrows(), a.ncols(), "expm requires a square matrix");
    let norm = one_norm(a);
    if norm <= THETA_3 {
        return pade_low(a, &B3);
    }
    if norm <= THETA_5 {
        return pade_low(a, &B5);
    }
    if norm <= THETA_7 {
        return pade_low(a, &B7);
    }
    if norm <= THETA_9 {
        return pade_low(a, &B9);
    }
    let s = ((norm / THETA_13).log2().ceil()).max(0.0) as u32;
    let scaled = a.map(|z| z / 2f64.powi(s as i32));
    let mut r = pade_13(&scaled);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// Rational-approximation route for `pi_1 exp(ln r + delta) pi_1`.
///
/// Builds the same sentinel-filled exponent as the eigendecomposition path,
/// shifts it by a spectral upper bound so the negated exponent is PSD, runs
/// the Padé exponential on it, and undoes the shift. Agreement between the
/// two routes is a validation target, not a performance one.
pub fn exp_logsum_rational(
    r: &HermitianMatrix,
    delta: &HermitianMatrix,
    pi1: &HermitianMatrix,
    eps: f64,
) -> HermitianMatrix {
    let Some(ls) = log_sum_spectrum(r, delta, eps) else {
        return HermitianMatrix::zeros(r.dim());
    };
    // Reassemble the Hermitian exponent from its spectrum, then forget the
    // spectrum: the exponential below must not rely on it.
    let n = r.dim();
    let mut m = DMatrix::<C64>::zeros(n, n);
    for (j, &mu) in ls.exponents.iter().enumerate() {
        let v = ls.vectors.column(j);
        m += (v * v.adjoint()).map(|z| z * mu);
    }
    let m = HermitianMatrix::hermitize(m);

    // Gershgorin upper bound keeps the shifted exponent negative
    // semi-definite, so exp(m - c) is a contraction.
    let c = (0..n)
        .map(|i| {
            m.matrix()[(i, i)].re
                + (0..n)
                    .filter(|&j| j != i)
                    .map(|j| m.matrix()[(i, j)].norm())
                    .sum::<f64>()
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let shifted = m.matrix() - DMatrix::<C64>::identity(n, n).map(|z| z * scalar(c));
    let e = expm(&shifted).map(|z| z * scalar(c.exp()));
    HermitianMatrix::hermitize(pi1.matrix() * e * pi1.matrix())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::exp_logsum;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_hermitian(dim: usize, seed: u64) -> HermitianMatrix {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(dim, dim, |_, _| {
            c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        HermitianMatrix::hermitize(g)
    }

    #[test]
    fn expm_zero_is_identity() {
        let z = DMatrix::<C64>::zeros(3, 3);
        let e = expm(&z);
        assert!((e - DMatrix::<C64>::identity(3, 3)).norm() < 1e-14);
    }

    #[test]
    fn expm_matches_scalar_on_diagonal() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![
            c(-1.0, 0.0),
            c(0.5, 0.0),
            c(-30.0, 0.0),
        ]));
        let e = expm(&d);
        for (i, x) in [-1.0f64, 0.5, -30.0].iter().enumerate() {
            assert!((e[(i, i)].re - x.exp()).abs() < 1e-12 * x.exp().max(1.0));
        }
    }

    #[test]
    fn expm_matches_eigen_path_on_hermitian() {
        for seed in 0..10 {
            let h = random_hermitian(6, seed).scaled(3.0);
            let spec = h.eig();
            let mut direct = DMatrix::<C64>::zeros(6, 6);
            for (j, &l) in spec.eigenvalues.iter().enumerate() {
                let v = spec.eigenvectors.column(j);
                direct += (v * v.adjoint()).map(|z| z * l.exp());
            }
            let pade = expm(h.matrix());
            let rel = (&pade - &direct).norm() / direct.norm();
            assert!(rel < 1e-11, "seed {seed}: rel err {rel}");
        }
    }

    #[test]
    fn rational_route_agrees_with_eigen_route() {
        // full-rank r, non-commuting delta
        for seed in 0..20 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1000 + seed);
            let dim = 2 + (rng.gen::<u64>() % 8) as usize;
            let g = DMatrix::from_fn(dim, dim, |_, _| {
                c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            });
            let w = &g * g.adjoint();
            let tr = w.trace().re;
            let r = HermitianMatrix::hermitize(w.map(|z| z / tr));
            let delta = random_hermitian(dim, 2000 + seed);
            let pi1 = HermitianMatrix::identity(dim);
            let a = exp_logsum(&r, &delta, &pi1, 1e-12);
            let b = exp_logsum_rational(&r, &delta, &pi1, 1e-12);
            let rel = a.frobenius_distance(&b) / a.frobenius_norm();
            assert!(rel < 1e-8, "seed {seed}: routes differ by {rel}");
        }
    }
}
