//! Counter-based random streams and randomized Halton points.
//!
//! A stream is keyed by `(seed, index)`: the same pair always yields the same
//! numbers, independent of how many other streams were consumed or on which
//! thread. Sample `i` of a Monte Carlo run, for example, reads stream `i`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Independent generator for `(seed, index)`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// A derived seed for a sub-task, e.g. one iteration of an outer loop.
pub fn derive(seed: u64, index: u64) -> u64 {
    stream(seed, index).gen()
}

/// `n` standard normal variates from stream `(seed, index)`.
pub fn normals(seed: u64, index: u64, n: usize) -> Vec<f64> {
    let mut rng = stream(seed, index);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// `n` uniform variates in `[0, 1)` from stream `(seed, index)`.
pub fn uniforms(seed: u64, index: u64, n: usize) -> Vec<f64> {
    let mut rng = stream(seed, index);
    (0..n).map(|_| rng.gen::<f64>()).collect()
}

fn first_primes(n: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(n);
    let mut k = 2u64;
    while primes.len() < n {
        if primes.iter().take_while(|&&p| p * p <= k).all(|&p| !k.is_multiple_of(p)) {
            primes.push(k);
        }
        k += 1;
    }
    primes
}

/// Radical inverse of `i` in base `b`.
fn radical_inverse(mut i: u64, b: u64) -> f64 {
    let inv = 1.0 / b as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    r
}

/// First `n` Halton points in `[0, 1)^dim`, skipping the origin, each
/// coordinate shifted by a uniform offset drawn from `seed` (modulo 1).
pub fn shifted_halton(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let bases = first_primes(dim);
    let shift = uniforms(seed, 0, dim);
    (1..=n as u64)
        .map(|i| {
            bases
                .iter()
                .zip(&shift)
                .map(|(&b, &s)| {
                    let x = radical_inverse(i, b) + s;
                    if x >= 1.0 {
                        x - 1.0
                    } else {
                        x
                    }
                })
                .collect()
        })
        .collect()
}
