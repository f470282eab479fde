//! Pure-birth chains with killing, solved by uniformization.
//!
//! State `j` is left at total rate `exits[j]`, of which `births[j]` moves to
//! `j + 1` and the rest is lost. Starting from state 0 the occupation
//! probabilities are `p_n(t) = Λ_n(births) · a_n(t; exits)`, which makes this
//! the cancellation-free way to get `a_n`, `π_n`, `ψ_n` and the joint
//! survivor when the alternating `κ` sums lose their digits. Every term of
//! the uniformized series is nonnegative.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{ceil, exp};

/// Upper bound on `c·h` per uniformization chunk, keeps `e^{-ch}` far from underflow.
const CHUNK_RATE: f64 = 16.0;
const WEIGHT_FLOOR: f64 = 1e-25;
const MAX_STATES: usize = 1 << 13;
const MAX_WORK: f64 = 4e8;

#[derive(Debug, Clone)]
pub(crate) struct ChainSolution {
    /// `p[j]` for `j ≤ K`.
    pub p: Vec<f64>,
    /// Mass that moved past state `K` (upper bound on what the truncation misses).
    pub sink: f64,
    /// `∫_0^t p_j(s) ds`, empty unless requested.
    pub integral: Vec<f64>,
}

/// Exact occupation probabilities of states `0..births.len()` at time `t`.
pub(crate) fn solve(births: &[f64], exits: &[f64], t: f64, with_integral: bool) -> ChainSolution {
    let k = births.len();
    debug_assert_eq!(k, exits.len());
    // index k is the sink
    let mut p = vec![0.0; k + 1];
    p[0] = 1.0;
    let mut integral = if with_integral {
        vec![0.0; k + 1]
    } else {
        Vec::new()
    };
    let c = exits.iter().copied().fold(0.0, f64::max);
    if t <= 0.0 || c <= 0.0 || k == 0 {
        p.truncate(k);
        integral.truncate(k);
        return ChainSolution {
            p,
            sink: 0.0,
            integral,
        };
    }
    let chunks = ceil(c * t / CHUNK_RATE).max(1.0) as usize;
    let h = t / chunks as f64;
    let ch = c * h;

    let mut weights = vec![exp(-ch)];
    loop {
        let m = weights.len();
        let w = weights[m - 1] * ch / m as f64;
        weights.push(w);
        if m as f64 > 2.0 * ch && w < WEIGHT_FLOOR {
            break;
        }
    }
    // tails[m] = P{Pois(ch) ≥ m + 1}, summed from the small end
    let mut tails = vec![0.0; weights.len()];
    let mut acc = 0.0;
    for m in (0..weights.len()).rev() {
        tails[m] = acc;
        acc += weights[m];
    }

    let mut v = vec![0.0; k + 1];
    let mut next = vec![0.0; k + 1];
    let mut out = vec![0.0; k + 1];
    for _ in 0..chunks {
        v.copy_from_slice(&p);
        out.iter_mut().for_each(|x| *x = 0.0);
        for (m, &w) in weights.iter().enumerate() {
            for j in 0..=k {
                out[j] += w * v[j];
            }
            if with_integral {
                let f = tails[m] / c;
                for j in 0..=k {
                    integral[j] += f * v[j];
                }
            }
            // v <- P v with P = I - D/c + shift(B)/c; the sink keeps its mass
            next[0] = v[0] * (1.0 - exits[0] / c);
            for j in 1..k {
                next[j] = v[j] * (1.0 - exits[j] / c) + v[j - 1] * births[j - 1] / c;
            }
            next[k] = v[k] + v[k - 1] * births[k - 1] / c;
            core::mem::swap(&mut v, &mut next);
        }
        p.copy_from_slice(&out);
    }
    let sink = p[k];
    p.truncate(k);
    integral.truncate(k);
    ChainSolution { p, sink, integral }
}

/// [`solve`] with the number of states doubled until the mass escaping past
/// the last state is below `tol`, the escape stops shrinking (explosive
/// chains), or the work budget is spent.
pub(crate) fn solve_adaptive<B, D>(
    births: B,
    exits: D,
    t: f64,
    min_states: usize,
    tol: f64,
    with_integral: bool,
) -> ChainSolution
where
    B: Fn(usize) -> f64,
    D: Fn(usize) -> f64,
{
    let mut k = min_states.max(16);
    let mut previous_sink = f64::INFINITY;
    loop {
        let b: Vec<f64> = (0..k).map(&births).collect();
        let d: Vec<f64> = (0..k).map(&exits).collect();
        let sol = solve(&b, &d, t, with_integral);
        let c = d.iter().copied().fold(0.0, f64::max);
        let next_work = 2.0 * (k as f64) * (2.0 * c * t + 60.0);
        if sol.sink <= tol
            || sol.sink > 0.5 * previous_sink
            || 2 * k > MAX_STATES
            || next_work > MAX_WORK
        {
            return sol;
        }
        previous_sink = sol.sink;
        k *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_counts() {
        let lam = 2.0;
        let t = 1.5;
        let sol = solve(&[lam; 40], &[lam; 40], t, false);
        let mut f = 1.0;
        for (n, &p) in sol.p.iter().enumerate().take(15) {
            if n > 0 {
                f *= lam * t / n as f64;
            }
            let exact = f * exp(-lam * t);
            assert!((p - exact).abs() < 1e-14, "n={n} {p} {exact}");
        }
        let total: f64 = sol.p.iter().sum::<f64>() + sol.sink;
        assert!((total - 1.0).abs() < 1e-13);
    }

    #[test]
    fn killing_only() {
        let sol = solve(&[0.0, 0.0], &[3.0, 1.0], 2.0, true);
        assert!((sol.p[0] - exp(-6.0)).abs() < 1e-15);
        assert_eq!(sol.p[1], 0.0);
        assert!((sol.integral[0] - (1.0 - exp(-6.0)) / 3.0).abs() < 1e-14);
    }

    #[test]
    fn two_state_matches_closed_form() {
        // p_1 = λ0 (e^{-d0 t} - e^{-d1 t}) / (d1 - d0)
        let (l0, d0, d1, t) = (1.5, 2.5, 3.5, 0.8);
        let sol = solve(&[l0, 0.0], &[d0, d1], t, true);
        let exact = l0 * (exp(-d0 * t) - exp(-d1 * t)) / (d1 - d0);
        assert!((sol.p[1] - exact).abs() < 1e-15);
        let int_exact = l0 / (d1 - d0) * ((1.0 - exp(-d0 * t)) / d0 - (1.0 - exp(-d1 * t)) / d1);
        assert!((sol.integral[1] - int_exact).abs() < 1e-14);
    }

    #[test]
    fn long_horizon_is_chunked() {
        let sol = solve(&[50.0; 200], &[50.0; 200], 2.0, false);
        let total: f64 = sol.p.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn adaptive_grows_until_tail_is_small() {
        let sol = solve_adaptive(|n| (n + 1) as f64, |n| (n + 1) as f64, 2.0, 8, 1e-15, false);
        assert!(sol.sink <= 1e-15);
        let total: f64 = sol.p.iter().sum();
        assert!((total - 1.0).abs() < 1e-13);
    }
}
