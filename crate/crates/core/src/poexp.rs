//! The PoExp(λ, μ) law.
//!
//! `T` has hazard `μ_{N(t)}` where `N` counts arrivals with gaps `Exp(λ_n)`.
//! With `λ̃_n(z) = λ_n + zμ_n`:
//!
//! - `P{T > t, N(t) = n} = Λ_n a_n(t; λ + μ)`, density `μ_n` times that
//! - `F̄(t) = Σ_k b_k e^{-λ̃_k t}` and `f(t) = Σ_k λ̃_k b_k e^{-λ̃_k t}` when
//!   the `b_k` series converge; otherwise `F̄ = Σ_n Λ_n a_n`, `f = Σ_n μ_n Λ_n a_n`
//! - `E T^m = m! Σ_n (Λ_n / Π_n) h_{m-1}(1/λ̃_0, …, 1/λ̃_n)` with `h` the
//!   complete homogeneous symmetric polynomial (for `m = 1` this is `Σ Λ_n/Π_n`)
//!
//! Marginal quantities try the `b_k` series first and fall back to the
//! positive birth-chain sums; [`Evaluated::method`] records which was used.

use alloc::vec;
use alloc::vec::Vec;

use rand_core::RngCore;

use crate::accel::{sum_positive, PositiveSum};
use crate::chain::{self, ChainSolution};
use crate::error::{Error, Result};
use crate::kernel::{self, SeriesControl, SeriesMonitor, SeriesStatus};
use crate::math::{exp, ln, powi};
use crate::rng::exponential;
use crate::sequence::IntensitySequence;

/// Mass allowed to escape the truncated chain in fallback evaluations.
const FALLBACK_TOL: f64 = 1e-16;
/// Tolerance for the positive moment series.
const MOMENT_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct PoExpParams {
    lambda: IntensitySequence,
    mu: IntensitySequence,
}

impl PoExpParams {
    pub fn new(lambda: IntensitySequence, mu: IntensitySequence) -> Self {
        Self { lambda, mu }
    }

    pub fn lambda(&self) -> &IntensitySequence {
        &self.lambda
    }

    pub fn mu(&self) -> &IntensitySequence {
        &self.mu
    }

    /// `λ̃(z) = λ + zμ`.
    pub fn tilde(&self, z: f64) -> IntensitySequence {
        self.lambda.combined(&self.mu, z)
    }

    fn settled_from(&self) -> usize {
        self.lambda
            .as_sequence()
            .prefix_len()
            .max(self.mu.as_sequence().prefix_len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Series,
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluated {
    pub value: f64,
    pub method: Method,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Moment {
    Finite(f64),
    Infinite,
}

impl Moment {
    pub fn finite(self) -> Option<f64> {
        match self {
            Moment::Finite(v) => Some(v),
            Moment::Infinite => None,
        }
    }
}

/// `ψ_n(z, t) = Λ_n a_n(t; λ̃(z))`.
fn psi_n(p: &PoExpParams, z: f64, n: usize, t: f64) -> Result<f64> {
    let tilde = p.tilde(z);
    kernel::check_distinct(&tilde, n).map_err(|e| with_z(e, z))?;
    if t == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    let log_lambda = kernel::capital_lambda(&p.lambda, n).log_magnitude();
    if n <= kernel::N_MAX {
        let d = kernel::a_n_direct(&tilde, n, t)?;
        if d.value > 0.0 && d.error_bound <= 1e-10 * d.value {
            return Ok(exp(ln(d.value) + log_lambda));
        }
    }
    let births: Vec<f64> = (0..=n).map(|j| p.lambda.term(j)).collect();
    let exits: Vec<f64> = (0..=n).map(|j| tilde.term(j)).collect();
    Ok(chain::solve(&births, &exits, t, false).p[n])
}

fn with_z(e: Error, z: f64) -> Error {
    match e {
        Error::DegenerateSpacing { i, j, a, b, .. } => Error::DegenerateSpacing {
            i,
            j,
            a,
            b,
            z: Some(z),
        },
        other => other,
    }
}

/// `P{T > t, N(t) = n}`.
pub fn joint_survivor(p: &PoExpParams, t: f64, n: usize) -> Result<f64> {
    check_time(t)?;
    psi_n(p, 1.0, n, t)
}

/// `P{T ∈ dt, N(t) = n} / dt`.
pub fn joint_density(p: &PoExpParams, t: f64, n: usize) -> Result<f64> {
    Ok(p.mu.term(n) * joint_survivor(p, t, n)?)
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(alloc::format!(
            "time must be finite and >= 0, got {t}"
        )))
    }
}

/// Birth chain behind the fallback: `p_n(t) = P{T > t, N(t) = n}` for all
/// `n` that carry mass, plus optionally `∫_0^t p_n`.
pub(crate) fn joint_chain(p: &PoExpParams, t: f64, with_integral: bool) -> ChainSolution {
    chain::solve_adaptive(
        |n| p.lambda.term(n),
        |n| p.lambda.term(n) + p.mu.term(n),
        t,
        p.settled_from() + 16,
        FALLBACK_TOL,
        with_integral,
    )
}

/// `P{T > t, N(t) = n}` for `n = 0, 1, …` until the rest is negligible.
/// Needs no distinctness.
pub fn joint_survivor_vector(p: &PoExpParams, t: f64) -> Result<Vec<f64>> {
    check_time(t)?;
    Ok(joint_chain(p, t, false).p)
}

/// Joint survivors, survivor and density at one time from a single chain solve.
#[derive(Debug, Clone, PartialEq)]
pub struct FallbackPoint {
    pub joint: Vec<f64>,
    pub survivor: f64,
    pub density: f64,
}

pub fn fallback_point(p: &PoExpParams, t: f64) -> Result<FallbackPoint> {
    check_time(t)?;
    let joint = joint_chain(p, t, false).p;
    let survivor = joint.iter().sum::<f64>().min(1.0);
    let density = joint
        .iter()
        .enumerate()
        .map(|(n, x)| p.mu.term(n) * x)
        .sum();
    Ok(FallbackPoint {
        joint,
        survivor,
        density,
    })
}

pub fn survivor_fallback(p: &PoExpParams, t: f64) -> Result<f64> {
    Ok(fallback_point(p, t)?.survivor)
}

pub fn density_fallback(p: &PoExpParams, t: f64) -> Result<f64> {
    Ok(fallback_point(p, t)?.density)
}

/// The coefficients `b_k(λ, zμ)` together with the rates `λ̃_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct BSeries {
    coefficients: Vec<f64>,
    rates: Vec<f64>,
}

impl BSeries {
    /// Computes `b_0, b_1, …` until both `Σ b_k` and `Σ λ̃_k b_k` have
    /// converged. Any diverging `b_k` (or outer sum) is a
    /// [`Error::SeriesDiverged`] carrying the offending `k`.
    pub fn new(p: &PoExpParams, z: f64, control: &SeriesControl) -> Result<Self> {
        let tilde = p.tilde(z);
        let settled = p.settled_from();
        let mut coefficients = Vec::new();
        let mut rates = Vec::new();
        let mut mass = SeriesMonitor::new(*control);
        let mut slope = SeriesMonitor::new(*control);
        let mut mass_done = false;
        let mut slope_done = false;
        for k in 0.. {
            let b = kernel::b_k(&p.lambda, &p.mu, z, k, control)?;
            if b.status != SeriesStatus::Converged {
                return Err(Error::SeriesDiverged { index: k });
            }
            let rate = tilde.term(k);
            coefficients.push(b.value);
            rates.push(rate);
            for (monitor, done, x) in [
                (&mut mass, &mut mass_done, b.value),
                (&mut slope, &mut slope_done, b.value * rate),
            ] {
                if *done {
                    continue;
                }
                match monitor.push(k, x, k >= settled) {
                    Some(SeriesStatus::Converged) => *done = true,
                    Some(_) => return Err(Error::SeriesDiverged { index: k }),
                    None => {}
                }
            }
            if mass_done && slope_done {
                break;
            }
        }
        Ok(Self {
            coefficients,
            rates,
        })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// `Σ_k b_k λ̃_k^power e^{-λ̃_k t}` and a rounding-error bound.
    pub fn eval(&self, t: f64, power: i32) -> (f64, f64) {
        let mut sum = crate::CompensatedSum::new();
        let mut abs = 0.0;
        for (&b, &r) in self.coefficients.iter().zip(&self.rates) {
            let x = b * powi(r, power) * exp(-r * t);
            sum.add(x);
            abs += x.abs();
        }
        let err = 8.0 * self.coefficients.len() as f64 * f64::EPSILON * abs;
        (sum.value(), err)
    }
}

/// Survivor and density of one PoExp law with the `b_k` coefficients
/// computed once. Falls back per point when the series is unusable.
#[derive(Debug, Clone)]
pub struct Evaluator {
    params: PoExpParams,
    series: Option<BSeries>,
}

impl Evaluator {
    pub fn new(params: PoExpParams, control: &SeriesControl) -> Self {
        let series = BSeries::new(&params, 1.0, control).ok();
        Self { params, series }
    }

    pub fn params(&self) -> &PoExpParams {
        &self.params
    }

    pub fn series(&self) -> Option<&BSeries> {
        self.series.as_ref()
    }

    /// `Σ_k b_k λ̃_k^power e^{-λ̃_k t}` when the series exists and keeps its digits.
    pub fn from_series(&self, t: f64, power: i32) -> Option<f64> {
        let (v, err) = self.series.as_ref()?.eval(t, power);
        (v >= 0.0 && err <= 1e-14f64.max(1e-8 * v)).then_some(v)
    }

    pub fn survivor(&self, t: f64) -> Result<Evaluated> {
        check_time(t)?;
        if t == 0.0 {
            return Ok(Evaluated {
                value: 1.0,
                method: if self.series.is_some() {
                    Method::Series
                } else {
                    Method::Fallback
                },
            });
        }
        match self.from_series(t, 0) {
            Some(v) => Ok(Evaluated {
                value: v.min(1.0),
                method: Method::Series,
            }),
            None => Ok(Evaluated {
                value: survivor_fallback(&self.params, t)?,
                method: Method::Fallback,
            }),
        }
    }

    pub fn density(&self, t: f64) -> Result<Evaluated> {
        check_time(t)?;
        if t == 0.0 {
            return Ok(Evaluated {
                value: self.params.mu.term(0),
                method: Method::Fallback,
            });
        }
        match self.from_series(t, 1) {
            Some(v) => Ok(Evaluated {
                value: v,
                method: Method::Series,
            }),
            None => Ok(Evaluated {
                value: density_fallback(&self.params, t)?,
                method: Method::Fallback,
            }),
        }
    }
}

/// `F̄(t) = Σ_k b_k e^{-λ̃_k t}`; errors when the `b_k` series diverge.
pub fn survivor_series(p: &PoExpParams, t: f64, control: &SeriesControl) -> Result<f64> {
    check_time(t)?;
    Ok(BSeries::new(p, 1.0, control)?.eval(t, 0).0)
}

/// `f(t) = Σ_k λ̃_k b_k e^{-λ̃_k t}`; errors when the `b_k` series diverge.
pub fn density_series(p: &PoExpParams, t: f64, control: &SeriesControl) -> Result<f64> {
    check_time(t)?;
    Ok(BSeries::new(p, 1.0, control)?.eval(t, 1).0)
}

pub fn survivor(p: &PoExpParams, t: f64, control: &SeriesControl) -> Result<Evaluated> {
    Evaluator::new(p.clone(), control).survivor(t)
}

pub fn density(p: &PoExpParams, t: f64, control: &SeriesControl) -> Result<Evaluated> {
    Evaluator::new(p.clone(), control).density(t)
}

/// `E T^m`, `+∞` when the series diverges.
pub fn moment(p: &PoExpParams, m: u32) -> Result<Moment> {
    if m == 0 {
        return Ok(Moment::Finite(1.0));
    }
    let tilde = p.tilde(1.0);
    let mut ratio = 1.0; // Λ_n / Π_{n-1}
    let mut h = vec![0.0; m as usize]; // h_j(1/λ̃_0, …, 1/λ̃_n), j < m
    h[0] = 1.0;
    let terms = |n: usize| {
        let x = 1.0 / tilde.term(n);
        if n > 0 {
            ratio *= p.lambda.term(n - 1) / tilde.term(n - 1);
        }
        for j in 1..h.len() {
            h[j] += x * h[j - 1];
        }
        ratio * x * h[h.len() - 1]
    };
    let factorial: f64 = (1..=m).map(f64::from).product();
    Ok(match sum_positive(terms, p.settled_from(), MOMENT_TOL) {
        PositiveSum::Finite { value, .. } => Moment::Finite(factorial * value),
        PositiveSum::Infinite => Moment::Infinite,
    })
}

/// `m! Σ_k b_k λ̃_k^{-m}`. Requires convergent `b_k` and
/// `t^m F̄(t) → 0`, checked numerically by [`tail_condition`].
pub fn moment_series(p: &PoExpParams, m: u32, control: &SeriesControl) -> Result<f64> {
    let series = BSeries::new(p, 1.0, control)?;
    if !tail_condition(p, m, control)? {
        return Err(Error::invalid(alloc::format!(
            "t^{m} F(t) does not vanish: moment {m} is not available from the series"
        )));
    }
    let factorial: f64 = (1..=m).map(f64::from).product();
    Ok(factorial * series.eval(0.0, -(m as i32)).0)
}

/// Numerical check of `t^m F̄(t) → 0` on a geometric grid reaching
/// `50 / (λ_0 + μ_0)`: the product must be decreasing over the last grid
/// points and small against its maximum.
pub fn tail_condition(p: &PoExpParams, m: u32, control: &SeriesControl) -> Result<bool> {
    let eval = Evaluator::new(p.clone(), control);
    let t_max = 50.0 / (p.lambda.term(0) + p.mu.term(0));
    let grid: Vec<f64> = (0..24)
        .rev()
        .map(|i| t_max * libm::exp2(-(i as f64) / 2.0))
        .collect();
    let values = grid
        .iter()
        .map(|&t| Ok(libm::pow(t, f64::from(m)) * eval.survivor(t)?.value))
        .collect::<Result<Vec<f64>>>()?;
    let peak = values.iter().copied().fold(0.0, f64::max);
    let last = values[values.len() - 1];
    let decreasing = values[values.len() - 4..].windows(2).all(|w| w[1] <= w[0]);
    Ok(decreasing && last <= 1e-3 * peak)
}

/// `ψ(z, t) = E e^{-zξ(t)} = Σ_n Λ_n a_n(t; λ + zμ)`.
pub fn mgf_xi(p: &PoExpParams, z: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    if !(z >= 0.0) {
        return Err(Error::invalid("mgf_xi needs z >= 0"));
    }
    if z == 0.0 || t == 0.0 {
        return Ok(1.0);
    }
    let tilde = p.tilde(z);
    let sol = chain::solve_adaptive(
        |n| p.lambda.term(n),
        |n| tilde.term(n),
        t,
        p.settled_from() + 16,
        FALLBACK_TOL,
        false,
    );
    // Spacing is only checked where mass sits, beyond that the terms are below the tolerance.
    let used = sol.p.iter().rposition(|&x| x > FALLBACK_TOL).unwrap_or(0);
    kernel::check_distinct(&tilde, used).map_err(|e| with_z(e, z))?;
    Ok(sol.p.iter().sum::<f64>())
}

/// `ψ_n(z, t)`.
pub fn mgf_xi_n(p: &PoExpParams, z: f64, n: usize, t: f64) -> Result<f64> {
    check_time(t)?;
    psi_n(p, z, n, t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoExpSample {
    pub t: f64,
    pub shocks_before_t: usize,
    pub shock_times: Vec<f64>,
}

/// Competing clocks: in state `n` the next shock comes after `Exp(λ_n)`
/// and `T` ends after `Exp(μ_n)`, whichever is first.
pub fn sample<R: RngCore + ?Sized>(
    p: &PoExpParams,
    cap: usize,
    rng: &mut R,
) -> Result<PoExpSample> {
    let mut shock_times = Vec::new();
    let mut now = 0.0;
    loop {
        let n = shock_times.len();
        if n >= cap {
            return Err(Error::ExplosionCap { cap });
        }
        let shock = exponential(rng, p.lambda.term(n));
        let end = exponential(rng, p.mu.term(n));
        if end <= shock {
            return Ok(PoExpSample {
                t: now + end,
                shocks_before_t: n,
                shock_times,
            });
        }
        now += shock;
        shock_times.push(now);
    }
}

/// Distinctness of `λ + μ` over the first `n + 1` indices.
pub fn check_distinct_totals(p: &PoExpParams, n: usize) -> Result<()> {
    kernel::check_distinct(&p.tilde(1.0), n)
}
