//! The combinatorial kernel shared by every distribution formula.
//!
//! For a positive sequence `λ`:
//!
//! - `Λ_n = λ_0 ⋯ λ_{n-1}` (`Λ_0 = 1`)
//! - `κ_{n,k} = Π_{j ≤ n, j ≠ k} (λ_j - λ_k)^{-1}` (`κ_{0,0} = 1`)
//! - `a_n(t) = Σ_{k ≤ n} κ_{n,k} e^{-λ_k t}`, so that `Λ_n a_n(t)` is the
//!   probability of exactly `n` arrivals by `t`
//! - `b_k = Σ_{n ≥ k} Λ_n(λ) κ_{n,k}(λ + zμ)`
//!
//! Products are kept as [`SignedLogValue`]. The alternating sum behind `a_n`
//! cancels badly for large `n` or small `t`; [`a_n`] then switches to the
//! uniformized birth chain, which has only positive terms.

use alloc::vec::Vec;

use crate::chain;
use crate::error::{Error, Result};
use crate::math::{exp, ln, CompensatedSum, DoubleDouble};
use crate::sequence::IntensitySequence;
use crate::SignedLogValue;

/// Relative spacing below which two rates count as coincident.
pub const EPS_DIST: f64 = 1e-9;

/// Largest `n` for which the direct `κ` sum is attempted.
pub const N_MAX: usize = 60;

/// Relative error the direct `a_n` sum must certify before it is trusted.
const DIRECT_REL_TOL: f64 = 1e-10;

pub fn capital_lambda(seq: &IntensitySequence, n: usize) -> SignedLogValue {
    let log: f64 = (0..n).map(|k| ln(seq.term(k))).sum();
    SignedLogValue::new(1, log)
}

/// `Π_n = Π_{k ≤ n} (λ_k + μ_k)`.
pub fn capital_pi(lambda: &IntensitySequence, mu: &IntensitySequence, n: usize) -> SignedLogValue {
    let log: f64 = (0..=n).map(|k| ln(lambda.term(k) + mu.term(k))).sum();
    SignedLogValue::new(1, log)
}

/// Rejects index ranges `0..=n` containing two rates closer than [`EPS_DIST`].
pub fn check_distinct(seq: &IntensitySequence, n: usize) -> Result<()> {
    let mut terms: Vec<(f64, usize)> = (0..=n).map(|k| (seq.term(k), k)).collect();
    terms.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in terms.windows(2) {
        let (a, i) = w[0];
        let (b, j) = w[1];
        if b - a < EPS_DIST * a.abs().max(b.abs()) {
            return Err(Error::DegenerateSpacing {
                i: i.min(j),
                j: i.max(j),
                a,
                b,
                z: None,
            });
        }
    }
    Ok(())
}

pub fn kappa(seq: &IntensitySequence, n: usize, k: usize) -> Result<SignedLogValue> {
    if k > n {
        return Err(Error::invalid("kappa needs k <= n"));
    }
    check_distinct(seq, n)?;
    Ok(kappa_unchecked(seq, n, k))
}

fn kappa_unchecked(seq: &IntensitySequence, n: usize, k: usize) -> SignedLogValue {
    let lk = seq.term(k);
    (0..=n)
        .filter(|&j| j != k)
        .fold(SignedLogValue::ONE, |acc, j| {
            acc / SignedLogValue::from_f64(seq.term(j) - lk)
        })
}

/// `κ_{n,0}, …, κ_{n,n}`.
pub fn kappa_row(seq: &IntensitySequence, n: usize) -> Result<Vec<SignedLogValue>> {
    check_distinct(seq, n)?;
    Ok((0..=n).map(|k| kappa_unchecked(seq, n, k)).collect())
}

/// `κ_{n,k}` as plain floats from direct products, when none overflows.
fn kappa_row_f64(terms: &[f64]) -> Option<Vec<f64>> {
    let row: Vec<f64> = terms
        .iter()
        .enumerate()
        .map(|(k, &lk)| {
            let prod = terms
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .fold(1.0, |acc, (_, &lj)| acc * (lj - lk));
            1.0 / prod
        })
        .collect();
    row.iter()
        .all(|x| x.is_finite() && *x != 0.0)
        .then_some(row)
}

/// Direct evaluation of `a_n(t)` with a running bound on rounding error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectSum {
    pub value: f64,
    pub error_bound: f64,
}

pub fn a_n_direct(seq: &IntensitySequence, n: usize, t: f64) -> Result<DirectSum> {
    if n > N_MAX {
        return Err(Error::TermCap { n, cap: N_MAX });
    }
    check_distinct(seq, n)?;
    if n == 0 {
        return Ok(DirectSum {
            value: exp(-seq.term(0) * t),
            error_bound: 0.0,
        });
    }
    let terms: Vec<f64> = (0..=n).map(|k| seq.term(k)).collect();
    let mut sum = CompensatedSum::new();
    let mut abs_sum = 0.0;
    let mut log_slack = 0.0;
    match kappa_row_f64(&terms) {
        Some(row) => {
            for (k, &kap) in row.iter().enumerate() {
                let x = kap * exp(-terms[k] * t);
                sum.add(x);
                abs_sum += x.abs();
            }
        }
        None => {
            for k in 0..=n {
                let kap = kappa_unchecked(seq, n, k);
                let log = kap.log_magnitude() - terms[k] * t;
                let x = f64::from(kap.sign()) * exp(log);
                sum.add(x);
                abs_sum += x.abs();
                log_slack += log.abs() * x.abs();
            }
        }
    }
    let error_bound = 4.0 * (n + 1) as f64 * f64::EPSILON * (abs_sum + log_slack);
    Ok(DirectSum {
        value: sum.value(),
        error_bound,
    })
}

/// `a_n(t)` from the birth chain with births and exits both `seq`.
pub fn a_n_chain(seq: &IntensitySequence, n: usize, t: f64) -> Result<f64> {
    check_distinct(seq, n)?;
    let rates: Vec<f64> = (0..=n).map(|k| seq.term(k)).collect();
    let sol = chain::solve(&rates, &rates, t, false);
    let p = sol.p[n];
    if p <= 0.0 {
        return Ok(0.0);
    }
    Ok(exp(ln(p) - capital_lambda(seq, n).log_magnitude()))
}

/// `a_n(t)`: the direct sum when its error bound is small, the chain otherwise.
pub fn a_n(seq: &IntensitySequence, n: usize, t: f64) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::invalid("a_n needs t >= 0"));
    }
    if n > 0 && t == 0.0 {
        check_distinct(seq, n)?;
        return Ok(0.0);
    }
    if n <= N_MAX {
        let d = a_n_direct(seq, n, t)?;
        if d.value > 0.0 && d.error_bound <= DIRECT_REL_TOL * d.value {
            return Ok(d.value);
        }
    }
    a_n_chain(seq, n, t)
}

/// Truncation rules for the one-sided series `b_k` and `Σ_k b_k e^{-λ̃_k t}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesControl {
    pub tol: f64,
    /// Consecutive negligible terms required before stopping.
    pub quiet_run: usize,
    /// Non-decreasing run length that signals divergence.
    pub divergence_run: usize,
    /// Divergence is only declared past this index.
    pub divergence_start: usize,
    pub max_terms: usize,
}

impl Default for SeriesControl {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            quiet_run: 5,
            divergence_run: 20,
            divergence_start: 50,
            max_terms: 400,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesStatus {
    Converged,
    Diverged,
    /// Ran out of terms without meeting either test.
    Exhausted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub terms: usize,
    pub status: SeriesStatus,
    /// Bound on what the discarded tail can add.
    pub tail_bound: f64,
}

impl SeriesValue {
    pub fn converged(&self) -> bool {
        self.status == SeriesStatus::Converged
    }
}

/// Running convergence/divergence bookkeeping for a series fed term by term.
#[derive(Debug, Clone)]
pub(crate) struct SeriesMonitor {
    control: SeriesControl,
    sum: CompensatedSum,
    quiet: usize,
    rising: usize,
    last: f64,
    recent: [f64; 4],
    count: usize,
}

impl SeriesMonitor {
    pub fn new(control: SeriesControl) -> Self {
        Self {
            control,
            sum: CompensatedSum::new(),
            quiet: 0,
            rising: 0,
            last: f64::NAN,
            recent: [0.0; 4],
            count: 0,
        }
    }

    /// Feeds term at absolute index `n`. `settled` says the index is past
    /// every prefix, so the tail rules alone describe what follows.
    pub fn push(&mut self, n: usize, term: f64, settled: bool) -> Option<SeriesStatus> {
        self.sum.add(term);
        let mag = term.abs();
        if !mag.is_finite() {
            return Some(SeriesStatus::Diverged);
        }
        if n > self.control.divergence_start && mag >= self.last && mag > 0.0 {
            self.rising += 1;
        } else {
            self.rising = 0;
        }
        self.last = mag;
        self.recent.rotate_left(1);
        self.recent[3] = mag;
        self.count += 1;
        if self.rising >= self.control.divergence_run {
            return Some(SeriesStatus::Diverged);
        }
        let scale = self.sum.value().abs();
        if mag <= self.control.tol * scale || mag == 0.0 {
            self.quiet += 1;
        } else {
            self.quiet = 0;
        }
        if settled
            && self.quiet >= self.control.quiet_run
            && self.tail_bound() <= self.control.tol * scale.max(f64::MIN_POSITIVE)
        {
            return Some(SeriesStatus::Converged);
        }
        if self.count >= self.control.max_terms {
            return Some(SeriesStatus::Exhausted);
        }
        None
    }

    /// Geometric fit to the last few magnitudes.
    pub fn tail_bound(&self) -> f64 {
        if self.count < 4 {
            return f64::INFINITY;
        }
        let mut q: f64 = 0.0;
        for w in self.recent.windows(2) {
            if w[0] == 0.0 {
                if w[1] != 0.0 {
                    return f64::INFINITY;
                }
            } else {
                q = q.max(w[1] / w[0]);
            }
        }
        if q >= 1.0 {
            f64::INFINITY
        } else {
            self.recent[3] * q / (1.0 - q)
        }
    }

    pub fn finish(&self, status: SeriesStatus) -> SeriesValue {
        SeriesValue {
            value: self.sum.value(),
            terms: self.count,
            status,
            tail_bound: if status == SeriesStatus::Converged {
                self.tail_bound()
            } else {
                f64::INFINITY
            },
        }
    }
}

/// `b_k(λ, zμ) = Σ_{n ≥ k} Λ_n(λ) κ_{n,k}(λ + zμ)`.
pub fn b_k(
    lambda: &IntensitySequence,
    mu: &IntensitySequence,
    z: f64,
    k: usize,
    control: &SeriesControl,
) -> Result<SeriesValue> {
    let tilde = |j: usize| lambda.term(j) + z * mu.term(j);
    let lk = tilde(k);
    let settled_from = lambda
        .as_sequence()
        .prefix_len()
        .max(mu.as_sequence().prefix_len());
    let check_spacing = |j: usize| -> Result<f64> {
        let d = tilde(j) - lk;
        if d.abs() < EPS_DIST * lk.abs().max(tilde(j).abs()) {
            return Err(Error::DegenerateSpacing {
                i: k.min(j),
                j: k.max(j),
                a: lk,
                b: tilde(j),
                z: Some(z),
            });
        }
        Ok(d)
    };
    // κ_{k,k} and Λ_k
    let mut kap = SignedLogValue::ONE;
    for j in 0..k {
        kap = kap / SignedLogValue::from_f64(check_spacing(j)?);
    }
    let mut big_lambda = capital_lambda(lambda, k);
    let mut monitor = SeriesMonitor::new(*control);
    let mut n = k;
    loop {
        let term = (big_lambda * kap).to_f64();
        if let Some(status) = monitor.push(n, term, n >= settled_from) {
            return Ok(monitor.finish(status));
        }
        big_lambda = big_lambda.scale(lambda.term(n));
        n += 1;
        kap = kap / SignedLogValue::from_f64(check_spacing(n)?);
    }
}

/// Largest deviation from `Σ_k κ_{n,k} λ_k^m = 0` (`m < n`) and `(-1)^n` (`m = n`).
pub fn check_vandermonde(seq: &IntensitySequence, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("the Vandermonde identities need n >= 1"));
    }
    check_distinct(seq, n)?;
    let terms: Vec<f64> = (0..=n).map(|k| seq.term(k)).collect();
    // κ and the power sums in double-double, so the residual reflects the
    // identity rather than float rounding of the large intermediate terms
    let row: Vec<DoubleDouble> = terms
        .iter()
        .enumerate()
        .map(|(k, &lk)| {
            terms
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .fold(DoubleDouble::ONE, |acc, (_, &lj)| {
                    acc.mul(DoubleDouble::diff(lj, lk))
                })
                .recip()
        })
        .collect();
    let mut powers: Vec<DoubleDouble> = alloc::vec![DoubleDouble::ONE; n + 1];
    let mut worst: f64 = 0.0;
    for m in 0..=n {
        let s = row
            .iter()
            .zip(&powers)
            .fold(DoubleDouble::ZERO, |acc, (kap, p)| acc.add(kap.mul(*p)))
            .to_f64();
        let target = if m < n {
            0.0
        } else if n.is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        worst = worst.max((s - target).abs());
        for (p, &l) in powers.iter_mut().zip(&terms) {
            *p = p.mul(DoubleDouble::from_f64(l));
        }
    }
    Ok(worst)
}

pub fn is_non_explosive(seq: &IntensitySequence) -> bool {
    seq.is_non_explosive()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::{Sequence, TailRule};
    use alloc::vec;
    use proptest::prelude::*;

    fn seq(values: &[f64]) -> IntensitySequence {
        IntensitySequence::with_prefix(values.to_vec(), TailRule::affine(1000.0, 1.0)).unwrap()
    }

    fn affine(a: f64, b: f64) -> IntensitySequence {
        IntensitySequence::from_tail(TailRule::affine(a, b)).unwrap()
    }

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    #[test]
    fn products() {
        let s = affine(1.0, 1.0);
        assert_eq!(capital_lambda(&s, 0).to_f64(), 1.0);
        assert!((capital_lambda(&s, 6).to_f64() - 720.0).abs() < 1e-10);
        let c = IntensitySequence::constant(1.7).unwrap();
        assert!((capital_lambda(&c, 5).to_f64() - 1.7f64.powi(5)).abs() < 1e-12);
        let one = IntensitySequence::constant(1.0).unwrap();
        assert!((capital_pi(&s, &one, 4).to_f64() - factorial(6)).abs() < 1e-9);
        let half_sq = IntensitySequence::from_tail(TailRule::quadratic(0.5)).unwrap();
        let pi = capital_pi(&half_sq, &half_sq, 3).to_f64();
        assert!((pi - factorial(4).powi(2)).abs() < 1e-8 * pi);
        assert_eq!(capital_pi(&one, &one, 0).to_f64(), 2.0);
    }

    #[test]
    fn kappa_examples() {
        let s = seq(&[1.0, 3.0]);
        assert_eq!(kappa(&s, 0, 0).unwrap().to_f64(), 1.0);
        assert!((kappa(&s, 1, 0).unwrap().to_f64() - 0.5).abs() < 1e-15);
        assert!((kappa(&s, 1, 1).unwrap().to_f64() + 0.5).abs() < 1e-15);
        let s = seq(&[1.0, 2.0, 4.0]);
        let row: Vec<f64> = kappa_row(&s, 2)
            .unwrap()
            .iter()
            .map(|x| x.to_f64())
            .collect();
        for (got, want) in row.iter().zip([1.0 / 3.0, -0.5, 1.0 / 6.0]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn kappa_affine_closed_form() {
        let (mu, nu) = (0.7, 1.3);
        let s = affine(mu, nu);
        for n in 0..12 {
            for k in 0..=n {
                let want = if k % 2 == 0 { 1.0 } else { -1.0 }
                    / (nu.powi(n as i32) * factorial(k) * factorial(n - k));
                let got = kappa(&s, n, k).unwrap().to_f64();
                assert!((got - want).abs() <= 1e-12 * want.abs(), "n={n} k={k}");
            }
        }
    }

    #[test]
    fn coincident_rates_rejected() {
        let s = seq(&[1.0, 2.0, 1.0 + 1e-12]);
        assert!(matches!(
            kappa(&s, 2, 0),
            Err(Error::DegenerateSpacing { i: 0, j: 2, .. })
        ));
        assert!(a_n(&s, 2, 1.0).is_err());
        let c = IntensitySequence::constant(1.0).unwrap();
        assert!(kappa(&c, 1, 0).is_err());
    }

    #[test]
    fn a_n_boundary_values() {
        let s = seq(&[2.0, 3.0, 5.0]);
        assert!((a_n(&s, 0, 1.0).unwrap() - exp(-2.0)).abs() < 1e-16);
        assert_eq!(a_n(&s, 2, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn a_3_matches_convolution() {
        // Λ_3 a_3(t) = P{N(t)=3} for rates 1,2,3,4 = ∫ f_{E1+E2+E3}(s) e^{-4(t-s)} ds
        let s = seq(&[1.0, 2.0, 3.0, 4.0]);
        let t: f64 = 0.7;
        // hypoexponential density of Exp(1)+Exp(2)+Exp(3), Simpson's rule
        let f = |u: f64| 3.0 * (exp(-u) - 2.0 * exp(-2.0 * u) + exp(-3.0 * u));
        let m = 2_000;
        let h = t / m as f64;
        let mut acc = 0.0;
        for i in 0..=m {
            let u = i as f64 * h;
            let w = if i == 0 || i == m {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * f(u) * exp(-4.0 * (t - u));
        }
        acc /= 3.0;
        let p3 = acc * h;
        let a3 = a_n(&s, 3, t).unwrap();
        assert!((6.0 * a3 - p3).abs() < 1e-9, "{} vs {}", 6.0 * a3, p3);
        // onset t^n / n!
        let tiny = 1e-3;
        assert!((a_n(&s, 3, tiny).unwrap() / (tiny.powi(3) / 6.0) - 1.0).abs() < 1e-2);
    }

    #[test]
    fn chain_and_direct_agree() {
        let s = affine(1.0, 1.0);
        for n in [1, 3, 7, 12] {
            for t in [0.3, 1.0, 2.5] {
                let d = a_n_direct(&s, n, t).unwrap();
                let c = a_n_chain(&s, n, t).unwrap();
                assert!(
                    (d.value - c).abs() <= 1e-9 * c + d.error_bound,
                    "n={n} t={t}"
                );
            }
        }
    }

    #[test]
    fn a_n_survives_heavy_cancellation() {
        // direct sum is hopeless here; the fallback keeps a_n positive and normalized
        let s = affine(1.0, 1.0);
        let t = 2.0;
        let mut total = 0.0;
        for n in 0..250 {
            let a = a_n(&s, n, t).unwrap();
            assert!(a >= 0.0);
            if a > 0.0 {
                total += exp(capital_lambda(&s, n).log_magnitude() + ln(a));
            }
        }
        assert!((total - 1.0).abs() < 1e-10);
        assert!(a_n_direct(&s, 61, t).is_err());
    }

    #[test]
    fn b_k_linear_closed_form() {
        // λ constant, μ_n = μ + nν, z = 1: b_k = (-1)^k (λ/ν)^k e^{λ/ν} / k!
        let (lam, mu, nu) = (1.5, 1.0, 1.0);
        let l = IntensitySequence::constant(lam).unwrap();
        let m = affine(mu, nu);
        let beta: f64 = lam / nu;
        for k in 0..8 {
            let b = b_k(&l, &m, 1.0, k, &SeriesControl::default()).unwrap();
            assert!(b.converged());
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let want = sign * beta.powi(k as i32) * exp(beta) / factorial(k);
            assert!(
                (b.value - want).abs() < 1e-12 * want.abs().max(1.0),
                "k={k}"
            );
        }
        // λ = ν = 1, k = 0: Σ 1/n! = e
        let b0 = b_k(
            &IntensitySequence::constant(1.0).unwrap(),
            &m,
            1.0,
            0,
            &SeriesControl::default(),
        )
        .unwrap();
        assert!((b0.value - core::f64::consts::E).abs() < 1e-12);
    }

    #[test]
    fn b_k_diverges_for_growing_lambda() {
        let l = affine(1.0, 1.0);
        let m = IntensitySequence::constant(1.0).unwrap();
        let b = b_k(&l, &m, 1.0, 0, &SeriesControl::default()).unwrap();
        assert_eq!(b.status, SeriesStatus::Diverged);
    }

    #[test]
    fn vandermonde_examples() {
        let s = seq(&[1.0, 2.0, 4.0]);
        assert!(check_vandermonde(&s, 2).unwrap() < 1e-15);
        let s = seq(&[0.3, 7.1]);
        assert_eq!(check_vandermonde(&s, 1).unwrap(), 0.0);
    }

    #[test]
    fn non_explosion() {
        assert!(is_non_explosive(&IntensitySequence::constant(1.5).unwrap()));
        assert!(!is_non_explosive(
            &IntensitySequence::from_tail(TailRule::quadratic(1.0)).unwrap()
        ));
        assert!(is_non_explosive(&affine(1.0, 1.0)));
    }

    #[test]
    fn kappa_signs_alternate_for_increasing_rates() {
        let s = IntensitySequence::new(Sequence::from_tail(
            TailRule::rational(vec![1.0, 0.5, 0.1], vec![1.0]).unwrap(),
        ))
        .unwrap();
        let row = kappa_row(&s, 9).unwrap();
        for (k, v) in row.iter().enumerate() {
            assert_eq!(v.sign(), if k % 2 == 0 { 1 } else { -1 });
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn vandermonde_random(values in proptest::collection::vec(0.5f64..10.0, 2..13)) {
            let mut v = values.clone();
            v.sort_by(f64::total_cmp);
            prop_assume!(v.windows(2).all(|w| w[1] - w[0] > 1e-3));
            let n = values.len() - 1;
            let s = seq(&values);
            prop_assert!(check_vandermonde(&s, n).unwrap() < 1e-8);
        }

        #[test]
        fn a_n_positive_and_flat_at_zero(values in proptest::collection::vec(0.5f64..5.0, 3..7), t in 0.01f64..3.0) {
            let mut v = values.clone();
            v.sort_by(f64::total_cmp);
            prop_assume!(v.windows(2).all(|w| w[1] - w[0] > 1e-2));
            let s = seq(&values);
            let n = values.len() - 1;
            prop_assert!(a_n(&s, n, t).unwrap() > 0.0);
            // leading behaviour t^n / n!: lower derivatives vanish at 0
            let h = 1e-2;
            let ratio = a_n(&s, n, h).unwrap() / (h.powi(n as i32) / factorial(n));
            prop_assert!((ratio - 1.0).abs() < 0.1);
        }
    }
}
