//! Mean of `X` given the initial pattern, and the martingale criterion.

use alloc::vec;
use alloc::vec::Vec;

use super::{PatternParams, State};
use crate::error::{Error, Result};
use crate::kernel::{capital_lambda, SeriesControl, SeriesMonitor, SeriesStatus, EPS_DIST};
use crate::math::expm1;
use crate::poexp::{joint_chain, Evaluated, Evaluator, Method};
use crate::sequence::{IntensitySequence, Sequence};
use crate::{CompensatedSum, SignedLogValue};

/// `ρ(n) = Σ_{k<n} r̄(k)`.
pub fn rho(p: &PatternParams, n: usize) -> f64 {
    (0..n)
        .map(|k| p.shock_jumps.law(k).mean())
        .collect::<CompensatedSum>()
        .value()
}

/// `Δ(n) = c(n) + λ_n r̄(n) + μ_n R̄(n)`.
pub fn delta(p: &PatternParams, n: usize) -> f64 {
    p.c.term(n)
        + p.lambda.term(n) * p.shock_jumps.law(n).mean()
        + p.mu.term(n) * p.switch_jumps.law(n).mean()
}

/// `Δ` as a sequence, so its tail can be inspected symbolically.
pub fn delta_sequence(p: &PatternParams) -> Result<Sequence> {
    let shocks = p.lambda.as_sequence().mul(&p.shock_jumps.means())?;
    let switches = p.mu.as_sequence().mul(&p.switch_jumps.means())?;
    p.c.add(&shocks)?.add(&switches)
}

/// `Some(L)` when `Δ(n) = 0` for every `n > L` by the tail rules
/// (`L = None` inside means `Δ ≡ 0`); `None` when the tail does not vanish.
fn finite_support(delta: &Sequence) -> Option<Option<usize>> {
    if !delta
        .tail()
        .pieces()
        .iter()
        .all(|r| r.numerator().is_zero())
    {
        return None;
    }
    Some(delta.prefix().iter().rposition(|&d| d != 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MartingaleVerdict {
    pub martingale: bool,
    /// First `(state, n, Δ(n))` with `|Δ(n)| ≥ tol`.
    pub violation: Option<(State, usize, f64)>,
}

/// `X` is a martingale iff `Δ ≡ 0` in both patterns. Checks `n ≤ n_check`
/// directly and requires each tail piece of `Δ` to vanish, either
/// identically or at enough points to pin its numerator to zero.
pub fn is_martingale(
    patterns: &[PatternParams; 2],
    n_check: usize,
    tol: f64,
) -> Result<MartingaleVerdict> {
    for (i, p) in patterns.iter().enumerate() {
        let state = State::from_index(i);
        let d = delta_sequence(p)?;
        if let Some(n) = (0..=n_check).find(|&n| !(d.term(n).abs() < tol)) {
            return Ok(MartingaleVerdict {
                martingale: false,
                violation: Some((state, n, d.term(n))),
            });
        }
        if finite_support(&d).is_some() {
            continue;
        }
        if let Some(n) = d
            .tail_probe_indices()
            .into_iter()
            .find(|&n| !(d.term(n).abs() < tol))
        {
            return Ok(MartingaleVerdict {
                martingale: false,
                violation: Some((state, n, d.term(n))),
            });
        }
    }
    Ok(MartingaleVerdict {
        martingale: true,
        violation: None,
    })
}

/// `𝔪(t|σ) = Σ_k d_k (1 - e^{-λ̃_k t}) / λ̃_k` with
/// `d_k = Σ_{n≥k} Δ(n) Λ_n κ_{n,k}(λ + μ)` precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanSourceSeries {
    /// `d_k / λ̃_k`.
    coefficients: Vec<f64>,
    /// Sum of absolute inner terms over `λ̃_k`, for the rounding bound.
    magnitudes: Vec<f64>,
    rates: Vec<f64>,
    terms: usize,
}

impl MeanSourceSeries {
    pub fn new(p: &PatternParams, control: &SeriesControl) -> Result<Self> {
        let delta = delta_sequence(p)?;
        let tilde = p.lambda.combined(&p.mu, 1.0);
        let support = finite_support(&delta);
        let settled = p
            .lambda
            .as_sequence()
            .prefix_len()
            .max(p.mu.as_sequence().prefix_len())
            .max(delta.prefix_len());
        let mut out = Self {
            coefficients: Vec::new(),
            magnitudes: Vec::new(),
            rates: Vec::new(),
            terms: 0,
        };
        match support {
            Some(None) => return Ok(out),
            Some(Some(last)) => {
                for k in 0..=last {
                    let (d, abs, n) =
                        inner(&delta, &tilde, &p.lambda, k, Some(last), settled, control)?;
                    out.push(k, d, abs, tilde.term(k), n);
                }
            }
            None => {
                let mut monitor = SeriesMonitor::new(*control);
                for k in 0.. {
                    let (d, abs, n) = inner(&delta, &tilde, &p.lambda, k, None, settled, control)?;
                    let rate = tilde.term(k);
                    out.push(k, d, abs, rate, n);
                    match monitor.push(k, d / rate, k >= settled) {
                        Some(SeriesStatus::Converged) => break,
                        Some(_) => return Err(Error::SeriesDiverged { index: k }),
                        None => {}
                    }
                }
            }
        }
        Ok(out)
    }

    fn push(&mut self, _k: usize, d: f64, abs: f64, rate: f64, n: usize) {
        self.coefficients.push(d / rate);
        self.magnitudes.push(abs / rate);
        self.rates.push(rate);
        self.terms = self.terms.max(n);
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// `𝔪(t)` and a bound on its rounding error.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let mut sum = CompensatedSum::new();
        let mut abs = 0.0;
        for ((&a, &m), &r) in self
            .coefficients
            .iter()
            .zip(&self.magnitudes)
            .zip(&self.rates)
        {
            let w = -expm1(-r * t);
            sum.add(a * w);
            abs += m * w;
        }
        let err = 8.0 * (self.terms + self.coefficients.len() + 1) as f64 * f64::EPSILON * abs;
        (sum.value(), err)
    }
}

/// `d_k`, `Σ |terms|`, and the number of terms used.
fn inner(
    delta: &Sequence,
    tilde: &IntensitySequence,
    lambda: &IntensitySequence,
    k: usize,
    last: Option<usize>,
    settled: usize,
    control: &SeriesControl,
) -> Result<(f64, f64, usize)> {
    let lk = tilde.term(k);
    let spacing = |j: usize| -> Result<f64> {
        let d = tilde.term(j) - lk;
        if d.abs() < EPS_DIST * lk.abs().max(tilde.term(j).abs()) {
            return Err(Error::DegenerateSpacing {
                i: k.min(j),
                j: k.max(j),
                a: lk,
                b: tilde.term(j),
                z: None,
            });
        }
        Ok(d)
    };
    let mut kap = SignedLogValue::ONE;
    for j in 0..k {
        kap = kap / SignedLogValue::from_f64(spacing(j)?);
    }
    let mut big_lambda = capital_lambda(lambda, k);
    let mut monitor = SeriesMonitor::new(*control);
    let mut abs = 0.0;
    let mut n = k;
    loop {
        let term = (big_lambda * kap).to_f64() * delta.term(n);
        abs += term.abs();
        match last {
            Some(l) => {
                monitor.push(n, term, false);
                if n >= l {
                    return Ok((monitor.finish(SeriesStatus::Converged).value, abs, n));
                }
            }
            None => match monitor.push(n, term, n >= settled) {
                Some(SeriesStatus::Converged) => {
                    return Ok((monitor.finish(SeriesStatus::Converged).value, abs, n))
                }
                Some(_) => return Err(Error::SeriesDiverged { index: k }),
                None => {}
            },
        }
        big_lambda = big_lambda.scale(lambda.term(n));
        n += 1;
        kap = kap / SignedLogValue::from_f64(spacing(n)?);
    }
}

/// `𝔪(t|σ)` from the `d_k` series; [`Error::SeriesDiverged`] or
/// [`Error::DegenerateSpacing`] when it cannot be formed.
pub fn mean_source(p: &PatternParams, t: f64, control: &SeriesControl) -> Result<f64> {
    check_time(t)?;
    Ok(MeanSourceSeries::new(p, control)?.eval(t).0)
}

/// `𝔪(t|σ) = Σ_n ρ(n) p_n(t) + Σ_n ((R̄(n) + ρ(n)) μ_n + c(n)) ∫_0^t p_n`
/// with `p_n(t) = P{T > t, N(t) = n}` from the positive birth chain.
pub fn mean_source_fallback(p: &PatternParams, t: f64) -> Result<f64> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let sol = joint_chain(&p.holding_time(), t, true);
    let mut sum = CompensatedSum::new();
    let mut rho_n = 0.0;
    for (n, (&pn, &integral)) in sol.p.iter().zip(&sol.integral).enumerate() {
        let rate = (p.switch_jumps.law(n).mean() + rho_n) * p.mu.term(n) + p.c.term(n);
        sum.add(rho_n * pn + rate * integral);
        rho_n += p.shock_jumps.law(n).mean();
    }
    Ok(sum.value())
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

/// `𝔪(·|σ)` with the series built once and the chain form as fallback.
#[derive(Debug, Clone)]
pub struct MeanSource {
    pattern: PatternParams,
    series: Option<MeanSourceSeries>,
}

impl MeanSource {
    pub fn new(pattern: PatternParams, control: &SeriesControl) -> Self {
        let series = MeanSourceSeries::new(&pattern, control).ok();
        Self { pattern, series }
    }

    pub fn series(&self) -> Option<&MeanSourceSeries> {
        self.series.as_ref()
    }

    pub fn eval(&self, t: f64) -> Result<Evaluated> {
        check_time(t)?;
        if let Some(s) = &self.series {
            let (v, err) = s.eval(t);
            if err <= 1e-14f64.max(1e-10 * v.abs()) {
                return Ok(Evaluated {
                    value: v,
                    method: Method::Series,
                });
            }
        }
        Ok(Evaluated {
            value: mean_source_fallback(&self.pattern, t)?,
            method: Method::Fallback,
        })
    }
}

/// `𝔐_0, 𝔐_1` on `t_j = j h`, `j = 0, …, steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanGrid {
    pub step: f64,
    pub times: Vec<f64>,
    pub m0: Vec<f64>,
    pub m1: Vec<f64>,
}

impl MeanGrid {
    /// Linear interpolation on the grid.
    pub fn at(&self, state: State, t: f64) -> f64 {
        let v = match state {
            State::Zero => &self.m0,
            State::One => &self.m1,
        };
        let x = (t / self.step).clamp(0.0, (v.len() - 1) as f64);
        let j = (x as usize).min(v.len() - 2);
        let w = x - j as f64;
        v[j] * (1.0 - w) + v[j + 1] * w
    }
}

/// Trapezoidal time stepping for
/// `𝔐_0(t) = 𝔪(t|σ0) + ∫_0^t f_0(u) 𝔐_1(t - u) du` and its mirror.
/// The step is shrunk so that it divides `horizon`.
pub fn solve_mean_equations(
    patterns: &[PatternParams; 2],
    horizon: f64,
    step: f64,
    control: &SeriesControl,
) -> Result<MeanGrid> {
    if !(horizon > 0.0 && horizon.is_finite() && step > 0.0) {
        return Err(Error::invalid(
            "mean equations need horizon > 0 and step > 0",
        ));
    }
    let steps = libm::ceil(horizon / step - 1e-9).max(1.0) as usize;
    let h = horizon / steps as f64;
    let times: Vec<f64> = (0..=steps)
        .map(|j| if j == steps { horizon } else { j as f64 * h })
        .collect();

    let mut source = [vec![0.0; steps + 1], vec![0.0; steps + 1]];
    let mut dens = [vec![0.0; steps + 1], vec![0.0; steps + 1]];
    for i in 0..2 {
        let m = MeanSource::new(patterns[i].clone(), control);
        let f = Evaluator::new(patterns[i].holding_time(), control);
        for (j, &t) in times.iter().enumerate() {
            source[i][j] = m.eval(t)?.value;
            dens[i][j] = f.density(t)?.value;
        }
    }

    let mut m = [vec![0.0; steps + 1], vec![0.0; steps + 1]];
    let a0 = 0.5 * h * dens[0][0];
    let a1 = 0.5 * h * dens[1][0];
    let det = 1.0 - a0 * a1;
    for j in 1..=steps {
        let mut rhs = [0.0; 2];
        for (i, r) in rhs.iter_mut().enumerate() {
            let other = &m[1 - i];
            let f = &dens[i];
            let mut s = CompensatedSum::new();
            for l in 1..j {
                s.add(f[l] * other[j - l]);
            }
            s.add(0.5 * f[j] * other[0]);
            *r = source[i][j] + h * s.value();
        }
        m[0][j] = (rhs[0] + a0 * rhs[1]) / det;
        m[1][j] = (rhs[1] + a1 * rhs[0]) / det;
    }
    let [m0, m1] = m;
    Ok(MeanGrid {
        step: h,
        times,
        m0,
        m1,
    })
}
