//! Sums of slowly convergent positive series.
//!
//! Partial sums are taken at `M = 2^j`. A geometric tail is cut as soon as
//! it is negligible. An algebraic tail `C·M^{-q} + C'·M^{-q-1} + …` is
//! handled by estimating `q` from successive block sums and removing the
//! two leading tail terms by Richardson extrapolation; `q ≤ 0` means the
//! series diverges.

use alloc::vec::Vec;

use crate::math::ln;

const MIN_LOG_CHECKPOINT: u32 = 12;
const MAX_CHECKPOINT: u32 = 22;
const DIVERGENCE_EXPONENT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum PositiveSum {
    Finite { value: f64, error: f64 },
    Infinite,
}

/// `terms` is called for `n = 0, 1, 2, …` in order. Extrapolation waits
/// until `n ≥ settled_from`, past which the terms follow their tail rule.
pub(crate) fn sum_positive<F: FnMut(usize) -> f64>(
    mut terms: F,
    settled_from: usize,
    tol: f64,
) -> PositiveSum {
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut checkpoints: Vec<f64> = Vec::new(); // S(2^j)
    let mut exponents: Vec<f64> = Vec::new();
    let mut last_estimate: Option<f64> = None;
    let mut n = 0usize;
    for j in 0..=MAX_CHECKPOINT {
        let end = 1usize << j;
        while n < end {
            let x = terms(n);
            if !x.is_finite() {
                return PositiveSum::Infinite;
            }
            // Neumaier
            let t = sum + x;
            if sum.abs() >= x.abs() {
                comp += (sum - t) + x;
            } else {
                comp += (x - t) + sum;
            }
            sum = t;
            n += 1;
        }
        let s = sum + comp;
        checkpoints.push(s);
        if !s.is_finite() {
            return PositiveSum::Infinite;
        }
        if j < 3 || end < 2 * settled_from {
            continue;
        }
        let len = checkpoints.len();
        let d1 = checkpoints[len - 2] - checkpoints[len - 3];
        let d2 = checkpoints[len - 1] - checkpoints[len - 2];
        if d2 <= tol * s {
            let rho = if d1 > 0.0 { d2 / d1 } else { 0.0 };
            if rho <= 0.25 {
                return PositiveSum::Finite {
                    value: s,
                    error: d2 * rho / (1.0 - rho),
                };
            }
        }
        if d1 <= 0.0 || d2 <= 0.0 {
            continue;
        }
        exponents.push(ln(d1 / d2) / core::f64::consts::LN_2);
        if j < MIN_LOG_CHECKPOINT || exponents.len() < 2 {
            continue;
        }
        let e = exponents.len();
        let q = 2.0 * exponents[e - 1] - exponents[e - 2];
        if q <= DIVERGENCE_EXPONENT {
            return PositiveSum::Infinite;
        }
        let estimate = richardson(&checkpoints[len - 3..], q);
        if let Some(prev) = last_estimate {
            if (estimate - prev).abs() <= tol * estimate.abs() {
                return PositiveSum::Finite {
                    value: estimate,
                    error: (estimate - prev).abs(),
                };
            }
        }
        last_estimate = Some(estimate);
    }
    match last_estimate {
        Some(v) => PositiveSum::Finite {
            value: v,
            error: (v - checkpoints[checkpoints.len() - 1]).abs(),
        },
        None => PositiveSum::Finite {
            value: sum + comp,
            error: f64::INFINITY,
        },
    }
}

/// Limit of `S(M), S(2M), S(4M)` assuming tail `C M^{-q} + C' M^{-q-1}`.
fn richardson(s: &[f64], q: f64) -> f64 {
    let f1 = libm::exp2(q);
    let e1a = (f1 * s[1] - s[0]) / (f1 - 1.0);
    let e1b = (f1 * s[2] - s[1]) / (f1 - 1.0);
    let f2 = 2.0 * f1;
    (f2 * e1b - e1a) / (f2 - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn finite(s: PositiveSum) -> f64 {
        match s {
            PositiveSum::Finite { value, .. } => value,
            PositiveSum::Infinite => panic!("expected a finite sum"),
        }
    }

    #[test]
    fn telescoping() {
        let v = finite(sum_positive(
            |n| 1.0 / ((n + 1) as f64 * (n + 2) as f64),
            0,
            1e-13,
        ));
        assert!((v - 1.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn basel() {
        let v = finite(sum_positive(|n| 1.0 / ((n + 1) as f64).powi(2), 0, 1e-13));
        assert!(
            (v - core::f64::consts::PI.powi(2) / 6.0).abs() < 1e-10,
            "{v}"
        );
    }

    #[test]
    fn fractional_exponent() {
        // Σ (n+1)^{-1.5} = ζ(1.5)
        let v = finite(sum_positive(|n| 1.0 / ((n + 1) as f64).powf(1.5), 0, 1e-13));
        assert!((v - 2.612_375_348_685_488).abs() < 1e-7, "{v}");
    }

    #[test]
    fn geometric() {
        let v = finite(sum_positive(|n| 0.5f64.powi(n as i32), 0, 1e-14));
        assert!((v - 2.0).abs() < 1e-13);
    }

    #[test]
    fn harmonic_diverges() {
        assert_eq!(
            sum_positive(|n| 1.0 / (n + 2) as f64, 0, 1e-13),
            PositiveSum::Infinite
        );
    }
}
