//! Random streams.
//!
//! Every path gets its own ChaCha8 stream: the run seed picks the key and the
//! path index picks the stream id, so path `i` sees the same numbers no
//! matter how paths are spread over threads.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::math::ln;

pub use rand_chacha::ChaCha8Rng as PathRng;

/// Independent stream for path `index` of a run seeded with `seed`.
pub fn path_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniform on `(0, 1]`, never exactly zero.
pub fn uniform_open0<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// `Exp(rate)` by inverse transform.
pub fn exponential<R: RngCore + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    -ln(uniform_open0(rng)) / rate
}

/// Index drawn from a discrete law given by cumulative probabilities.
pub fn categorical<R: RngCore + ?Sized>(rng: &mut R, cumulative: &[f64]) -> usize {
    let u = uniform_open0(rng) * cumulative.last().copied().unwrap_or(1.0);
    cumulative
        .iter()
        .position(|&c| u <= c)
        .unwrap_or(cumulative.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: [u64; 4] = core::array::from_fn(|_| path_stream(7, 3).next_u64());
        let mut r = path_stream(7, 3);
        let b = r.next_u64();
        assert_eq!(a[0], b);
        assert_ne!(path_stream(7, 3).next_u64(), path_stream(7, 4).next_u64());
        assert_ne!(path_stream(7, 3).next_u64(), path_stream(8, 3).next_u64());
    }

    #[test]
    fn exponential_mean() {
        let mut r = path_stream(1, 0);
        let n = 200_000;
        let mean: f64 = (0..n).map(|_| exponential(&mut r, 2.0)).sum::<f64>() / n as f64;
        // SE = 0.5 / sqrt(n)
        assert!((mean - 0.5).abs() < 4.0 * 0.5 / (n as f64).sqrt());
    }

    #[test]
    fn uniform_is_in_half_open_unit_interval() {
        let mut r = path_stream(2, 0);
        for _ in 0..10_000 {
            let u = uniform_open0(&mut r);
            assert!(u > 0.0 && u <= 1.0);
        }
    }

    #[test]
    fn categorical_frequencies() {
        let mut r = path_stream(3, 0);
        let cum = [0.2, 0.5, 1.0];
        let mut counts = [0usize; 3];
        let n = 100_000;
        for _ in 0..n {
            counts[categorical(&mut r, &cum)] += 1;
        }
        for (c, p) in counts.iter().zip([0.2, 0.3, 0.5]) {
            let f = *c as f64 / n as f64;
            assert!((f - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt());
        }
    }
}
