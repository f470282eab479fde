//! The renewal counting process `N(t; λ)` with independent gaps `Exp(λ_n)`.

use alloc::vec::Vec;

use rand_core::RngCore;

use crate::chain;
use crate::error::{Error, Result};
use crate::kernel;
use crate::math::{exp, ln};
use crate::rng::exponential;
use crate::sequence::IntensitySequence;
use crate::special::ln_gamma;

/// Default per-path event cap.
pub const DEFAULT_EVENT_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct CountingPath {
    pub event_times: Vec<f64>,
    pub horizon: f64,
    pub truncated: bool,
}

impl CountingPath {
    /// `N(t)`: events at or before `t`.
    pub fn count_at(&self, t: f64) -> usize {
        self.event_times.partition_point(|&s| s <= t)
    }
}

/// `π_n(t) = P{N(t) = n}`.
///
/// Constant rates use the Poisson formula; otherwise `Λ_n a_n(t)`.
pub fn pmf_pi(lambda: &IntensitySequence, n: usize, t: f64) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::invalid("pmf_pi needs t >= 0"));
    }
    if let Some(rate) = lambda.as_sequence().constant_value() {
        if t == 0.0 {
            return Ok(if n == 0 { 1.0 } else { 0.0 });
        }
        let x = rate * t;
        return Ok(exp(n as f64 * ln(x) - x - ln_gamma(n as f64 + 1.0)));
    }
    let a = kernel::a_n(lambda, n, t)?;
    if a <= 0.0 {
        return Ok(0.0);
    }
    Ok(exp(ln(a) + kernel::capital_lambda(lambda, n).log_magnitude()).min(1.0))
}

/// `π_0(t), π_1(t), …` up to the point where the remaining mass is below
/// `tol`, plus that remaining mass. Works for coincident rates too.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    pub probs: Vec<f64>,
    pub tail: f64,
}

pub fn pmf_vector(lambda: &IntensitySequence, t: f64, tol: f64) -> Pmf {
    let sol = chain::solve_adaptive(|n| lambda.term(n), |n| lambda.term(n), t, 16, tol, false);
    Pmf {
        probs: sol.p,
        tail: sol.sink,
    }
}

/// Samples arrival times up to `horizon`. Hitting `cap` events is an
/// [`Error::ExplosionCap`]; [`sample_counting_path_capped`] keeps the path instead.
pub fn sample_counting_path<R: RngCore + ?Sized>(
    lambda: &IntensitySequence,
    horizon: f64,
    cap: usize,
    rng: &mut R,
) -> Result<CountingPath> {
    let path = sample_counting_path_capped(lambda, horizon, cap, rng);
    if path.truncated {
        Err(Error::ExplosionCap { cap })
    } else {
        Ok(path)
    }
}

pub fn sample_counting_path_capped<R: RngCore + ?Sized>(
    lambda: &IntensitySequence,
    horizon: f64,
    cap: usize,
    rng: &mut R,
) -> CountingPath {
    let mut event_times = Vec::new();
    let mut t = 0.0;
    loop {
        if event_times.len() >= cap {
            return CountingPath {
                event_times,
                horizon,
                truncated: true,
            };
        }
        t += exponential(rng, lambda.term(event_times.len()));
        if t > horizon {
            return CountingPath {
                event_times,
                horizon,
                truncated: false,
            };
        }
        event_times.push(t);
    }
}

/// `N(horizon)` without storing times; `None` when the cap is reached first.
pub fn count_events<R: RngCore + ?Sized>(
    lambda: &IntensitySequence,
    horizon: f64,
    cap: usize,
    rng: &mut R,
) -> Option<usize> {
    let mut t = 0.0;
    for n in 0..cap {
        t += exponential(rng, lambda.term(n));
        if t > horizon {
            return Some(n);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::path_stream;
    use crate::sequence::TailRule;

    #[test]
    fn poisson_branch() {
        let l = IntensitySequence::constant(2.0).unwrap();
        let p = pmf_pi(&l, 3, 1.5).unwrap();
        assert!((p - exp(-3.0) * 27.0 / 6.0).abs() < 1e-15);
        assert!((pmf_pi(&l, 0, 0.4).unwrap() - exp(-0.8)).abs() < 1e-16);
    }

    #[test]
    fn general_rates_normalize() {
        let l = IntensitySequence::from_tail(TailRule::affine(1.0, 1.0)).unwrap();
        for t in [0.5, 1.0, 2.0] {
            let total: f64 = (0..250).map(|n| pmf_pi(&l, n, t).unwrap()).sum();
            assert!((total - 1.0).abs() < 1e-10, "t={t}: {total}");
            let v = pmf_vector(&l, t, 1e-15);
            for (n, p) in v.probs.iter().enumerate().take(20) {
                assert!((p - pmf_pi(&l, n, t).unwrap()).abs() < 1e-13);
            }
        }
        // λ_n = n + 1: π_n(t) = e^{-t} (1 - e^{-t})^n (Yule process)
        let t = 0.8;
        for n in 0..10 {
            let want = exp(-t) * (1.0 - exp(-t)).powi(n as i32);
            assert!((pmf_pi(&l, n, t).unwrap() - want).abs() < 1e-14);
        }
    }

    #[test]
    fn sampling_is_deterministic_and_capped() {
        let l = IntensitySequence::constant(3.0).unwrap();
        let a = sample_counting_path(&l, 2.0, DEFAULT_EVENT_CAP, &mut path_stream(5, 1)).unwrap();
        let b = sample_counting_path(&l, 2.0, DEFAULT_EVENT_CAP, &mut path_stream(5, 1)).unwrap();
        assert_eq!(a, b);
        assert!(a.event_times.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(a.count_at(2.0), a.event_times.len());
        let q = IntensitySequence::from_tail(TailRule::quadratic(1.0)).unwrap();
        let mut hit = false;
        for i in 0..50 {
            if let Err(Error::ExplosionCap { cap }) =
                sample_counting_path(&q, 5.0, 200, &mut path_stream(9, i))
            {
                assert_eq!(cap, 200);
                hit = true;
            }
        }
        assert!(hit);
    }

    #[test]
    fn count_matches_path() {
        let l = IntensitySequence::from_tail(TailRule::affine(0.5, 0.3)).unwrap();
        let path = sample_counting_path(&l, 3.0, 1000, &mut path_stream(11, 4)).unwrap();
        let n = count_events(&l, 3.0, 1000, &mut path_stream(11, 4)).unwrap();
        assert_eq!(n, path.event_times.len());
    }
}
