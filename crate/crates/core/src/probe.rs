//! Deterministic probe sets for audits: a Halton low-discrepancy sequence
//! scaled into a box, optionally augmented with seeded uniform samples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::BoxDomain;

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut out = 0.0;
    let mut scale = inv;
    while i > 0 {
        out += (i % base) as f64 * scale;
        i /= base;
        scale *= inv;
    }
    out
}

/// `count` Halton points in the box (index starts at 1 to skip the origin).
pub fn halton(domain: &BoxDomain, count: usize) -> Vec<Vec<f64>> {
    let n = domain.dim();
    assert!(n <= PRIMES.len(), "halton supports up to {} dims", PRIMES.len());
    (1..=count as u64)
        .map(|i| {
            (0..n)
                .map(|d| domain.lower()[d] + domain.width(d) * radical_inverse(i, PRIMES[d]))
                .collect()
        })
        .collect()
}

/// `count` uniform samples from a ChaCha stream seeded with `seed`.
pub fn uniform(domain: &BoxDomain, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            (0..domain.dim())
                .map(|d| rng.gen_range(domain.lower()[d]..=domain.upper()[d]))
                .collect()
        })
        .collect()
}

/// Half Halton, half seeded uniform; the corners of the box are included.
pub fn probe_set(domain: &BoxDomain, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut pts = domain.lattice(2);
    let rest = count.saturating_sub(pts.len());
    pts.extend(halton(domain, rest / 2));
    pts.extend(uniform(domain, rest - rest / 2, seed));
    pts.truncate(count.max(1));
    pts
}
