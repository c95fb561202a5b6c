//! Independent reference implementations shared by the oracle tests and the
//! acceptance suite.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

/// Encoded transmission in exact rational arithmetic, following the level
/// recursion literally: `R_k` for `k = d, d-1, ..., 1` with `R_j = 0` and
/// `b_j = 0` for `j > d`.
pub fn exact_encoded_transmission(eta: &BigRational, b: &[u32]) -> BigRational {
    let one = BigRational::one();
    let mu = &one - eta;
    let d = b.len() - 1;
    let branch = |k: usize| if k <= d { b[k] } else { 0 };
    let mut r: Vec<BigRational> = vec![BigRational::zero(); d + 3];
    for k in (1..=d).rev() {
        let base = &one - &mu + &mu * &r[k + 2];
        let inner = &one - (&one - &mu) * pow(&base, branch(k + 1));
        r[k] = &one - pow(&inner, branch(k));
    }
    let head = pow(&(&one - &mu + &mu * &r[1]), b[0]) - pow(&(&mu * &r[1]), b[0]);
    head * pow(&(&one - &mu + &mu * &r[2]), branch(1))
}

fn pow(x: &BigRational, n: u32) -> BigRational {
    num_traits::pow(x.clone(), n as usize)
}

/// `k / 2^bits` as an exact rational.
pub fn dyadic(k: u64, bits: u32) -> BigRational {
    BigRational::new(BigInt::from(k), BigInt::from(1u64) << bits)
}

pub fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().expect("finite rational")
}

/// Matérn 5/2 correlation written from scratch.
pub fn matern52_dense(p: &[f64], q: &[f64], lengthscales: &[f64], v0: f64) -> f64 {
    let r2: f64 = p
        .iter()
        .zip(q)
        .zip(lengthscales)
        .map(|((a, b), l)| ((a - b) / l).powi(2))
        .sum();
    let r = r2.sqrt();
    v0 * (1.0 + 5f64.sqrt() * r + 5.0 / 3.0 * r2) * (-(5f64.sqrt()) * r).exp()
}

/// GP mean by a dense LU solve of the exact kernel matrix, variance with
/// `jitter v0` added to its diagonal.
pub fn dense_gp_predict(
    x: &[Vec<f64>],
    y: &[f64],
    mu0: f64,
    v0: f64,
    lengthscales: &[f64],
    jitter: f64,
    p: &[f64],
) -> (f64, f64) {
    let w = x.len();
    let kernel = |d: f64| {
        DMatrix::from_fn(w, w, |i, j| {
            matern52_dense(&x[i], &x[j], lengthscales, v0) + if i == j { d * v0 } else { 0.0 }
        })
    };
    let ks = DVector::from_fn(w, |i, _| matern52_dense(p, &x[i], lengthscales, v0));
    let centered = DVector::from_iterator(w, y.iter().map(|v| v - mu0));
    let a = kernel(0.0).lu().solve(&centered).expect("nonsingular");
    let b = kernel(jitter).lu().solve(&ks).expect("nonsingular");
    (mu0 + ks.dot(&a), v0 - ks.dot(&b))
}

/// Standard normal quantile by bisection on the erfc-free series CDF.
pub fn normal_quantile(q: f64) -> f64 {
    let cdf = |z: f64| 0.5 * (1.0 + erf_series(z / 2f64.sqrt()));
    let (mut lo, mut hi) = (-10.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Maclaurin series of erf, accurate for |x| < 3.
fn erf_series(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    for n in 1..200 {
        term *= -x * x / n as f64;
        sum += term / (2 * n + 1) as f64;
    }
    sum * 2.0 / std::f64::consts::PI.sqrt()
}

/// Direct Monte Carlo `(P16, P50, P84)` of `f` under independent normals, each
/// with an order-statistic standard error.
pub fn direct_percentiles<F: Fn(&[f64]) -> f64>(
    f: F,
    mean: &[f64],
    std: &[f64],
    n: usize,
    seed: u64,
) -> [(f64, f64); 3] {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
    let mut p = vec![0.0; mean.len()];
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            for (k, x) in p.iter_mut().enumerate() {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                *x = mean[k] + std[k] * z;
            }
            f(&p)
        })
        .collect();
    v.sort_by(f64::total_cmp);
    let at = |q: f64| v[((n - 1) as f64 * q).round() as usize];
    [0.16, 0.5, 0.84].map(|q| {
        // density from a symmetric difference quotient of the empirical quantile
        let d = 0.01;
        let slope = (at(q + d) - at(q - d)) / (2.0 * d);
        (at(q), slope * (q * (1.0 - q) / n as f64).sqrt())
    })
}
