//! Bond and stock driven by the two-pattern process, and the Esscher change
//! of measure that only rescales the intensities.
//!
//! `B(t) = exp ∫ y^{ε(u)} du` and `S(t) = S0 · e^{𝕃(t)} · Π(1 + jump)` over
//! every shock and switch up to `t`, so `log S - log S0` is `X` with
//! additive jumps `log(1 + r)`, `log(1 + R)`.

use alloc::vec::Vec;

use rand_core::RngCore;

use crate::error::{Error, Result};
use crate::math::exp;
use crate::sequence::{IntensitySequence, Sequence, TailRule};
use crate::telegraph::{simulate_path, EventKind, JumpLaw, PatternParams, ProcessPath, State};

/// Residual allowed when a zero `R̄(n)` meets a zero numerator.
const ZERO_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct MarketScenario {
    patterns: [PatternParams; 2],
    rates: [f64; 2],
    s0: f64,
}

impl MarketScenario {
    pub fn new(patterns: [PatternParams; 2], rates: [f64; 2], s0: f64) -> Result<Self> {
        if !(s0 > 0.0 && s0.is_finite()) {
            return Err(Error::invalid(alloc::format!(
                "initial price must be positive, got {s0}"
            )));
        }
        if rates.iter().any(|y| !(*y >= 0.0 && y.is_finite())) {
            return Err(Error::invalid(
                "interest rates must be finite and nonnegative",
            ));
        }
        for (i, p) in patterns.iter().enumerate() {
            let laws = p
                .shock_jumps
                .distinct_laws()
                .chain(p.switch_jumps.distinct_laws());
            for law in laws {
                if let Some(v) = law.support().into_iter().find(|&v| !(v > -1.0)) {
                    return Err(Error::invalid(alloc::format!(
                        "pattern {i}: jump value {v} must be greater than -1"
                    )));
                }
            }
        }
        Ok(Self {
            patterns,
            rates,
            s0,
        })
    }

    pub fn patterns(&self) -> &[PatternParams; 2] {
        &self.patterns
    }

    pub fn rates(&self) -> [f64; 2] {
        self.rates
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    /// Same scenario with trends `c - y` and zero rates.
    pub fn discounted(&self) -> Self {
        let mut patterns = self.patterns.clone();
        for (p, y) in patterns.iter_mut().zip(self.rates) {
            p.c = p.c.offset(-y);
        }
        Self {
            patterns,
            rates: [0.0; 2],
            s0: self.s0,
        }
    }
}

/// One simulated market path; all curves derive from the same events.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketPath {
    pub path: ProcessPath,
    rates: [f64; 2],
    s0: f64,
}

impl MarketPath {
    pub fn log_stock_at(&self, t: f64) -> f64 {
        libm::log(self.s0)
            + self
                .path
                .value_with(t, |s| s.slope, |e| libm::log1p(e.size))
    }

    pub fn stock_at(&self, t: f64) -> f64 {
        exp(self.log_stock_at(t))
    }

    pub fn bond_at(&self, t: f64) -> f64 {
        exp(self
            .path
            .value_with(t, |s| self.rates[s.state.index()], |_| 0.0))
    }

    /// `S(t) / B(t)`.
    pub fn discounted_at(&self, t: f64) -> f64 {
        self.stock_at(t) / self.bond_at(t)
    }

    /// Stock recomputed with trends `c - y`.
    pub fn shifted_stock_at(&self, t: f64) -> f64 {
        let log = self.path.value_with(
            t,
            |s| s.slope - self.rates[s.state.index()],
            |e| libm::log1p(e.size),
        );
        self.s0 * exp(log)
    }
}

pub fn simulate_market_path<R: RngCore + ?Sized>(
    scenario: &MarketScenario,
    initial: State,
    horizon: f64,
    cap: usize,
    rng: &mut R,
) -> Result<MarketPath> {
    let path = simulate_path(&scenario.patterns, initial, horizon, cap, rng)?;
    Ok(MarketPath {
        path,
        rates: scenario.rates,
        s0: scenario.s0,
    })
}

/// Esscher parameters `r*`, `R*` with the derived `c* = -λ r* - μ R*`,
/// `λ* = λ(1 + r*)`, `μ* = μ(1 + R*)`, per pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct EsscherParams {
    pub r_star: [Sequence; 2],
    pub big_r_star: [Sequence; 2],
    pub c_star: [Sequence; 2],
    pub lambda_star: [IntensitySequence; 2],
    pub mu_star: [IntensitySequence; 2],
}

pub fn esscher_derive(
    scenario: &MarketScenario,
    r_star: [Sequence; 2],
    big_r_star: [Sequence; 2],
) -> Result<EsscherParams> {
    let mut c_star = Vec::with_capacity(2);
    let mut lambda_star = Vec::with_capacity(2);
    let mut mu_star = Vec::with_capacity(2);
    for i in 0..2 {
        let p = &scenario.patterns[i];
        for s in [&r_star[i], &big_r_star[i]] {
            if let Some(n) = s.first_at_or_below(-1.0)? {
                return Err(Error::InvalidGirsanov { state: i, n });
            }
        }
        let lam = p.lambda.as_sequence();
        let mu = p.mu.as_sequence();
        let c = lam
            .mul(&r_star[i])?
            .add(&mu.mul(&big_r_star[i])?)?
            .scale(-1.0);
        let ls = lam.mul(&r_star[i].offset(1.0))?;
        let ms = mu.mul(&big_r_star[i].offset(1.0))?;
        let positive = |s: Sequence| -> Result<IntensitySequence> {
            match s.first_nonpositive()? {
                None => IntensitySequence::new(s),
                Some(n) => Err(Error::InvalidGirsanov { state: i, n }),
            }
        };
        c_star.push(c);
        lambda_star.push(positive(ls)?);
        mu_star.push(positive(ms)?);
    }
    Ok(EsscherParams {
        r_star,
        big_r_star,
        c_star: two(c_star),
        lambda_star: two(lambda_star),
        mu_star: two(mu_star),
    })
}

impl EsscherParams {
    /// `r* ≡ 0`, `R* ≡ 0`.
    pub fn identity(scenario: &MarketScenario) -> Self {
        let zero = || [Sequence::zero(), Sequence::zero()];
        esscher_derive(scenario, zero(), zero()).expect("identity transform is valid")
    }

    /// Patterns with `λ*`, `μ*` in place of `λ`, `μ`; trends and jump laws are kept.
    pub fn transformed(&self, scenario: &MarketScenario) -> [PatternParams; 2] {
        let mut out = scenario.patterns.clone();
        for (i, p) in out.iter_mut().enumerate() {
            p.lambda = self.lambda_star[i].clone();
            p.mu = self.mu_star[i].clone();
        }
        out
    }

    /// `log Z(t)`.
    pub fn log_density_at(&self, path: &ProcessPath, t: f64) -> f64 {
        path.value_with(
            t,
            |s| self.c_star[s.state.index()].term(s.shock_count),
            |e| {
                let i = e.state.index();
                let k = match e.kind {
                    EventKind::Shock => self.r_star[i].term(e.index),
                    EventKind::Switch => self.big_r_star[i].term(e.index),
                };
                libm::log1p(k)
            },
        )
    }
}

fn two<T>(v: Vec<T>) -> [T; 2] {
    v.try_into().ok().expect("two patterns")
}

/// `Z(t) = dℙ*/dℙ` on the path at each of `times`.
pub fn radon_nikodym(path: &ProcessPath, esscher: &EsscherParams, times: &[f64]) -> Vec<f64> {
    times
        .iter()
        .map(|&t| exp(esscher.log_density_at(path, t)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupportCase {
    /// Trend below zero and both jump supports in `(-∞, 0)`.
    Falling,
    /// Trend above zero and both jump supports in `(0, ∞)`.
    Rising,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SupportViolation {
    pub state: State,
    pub n: usize,
    pub case: SupportCase,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArbitrageReport {
    pub arbitrage_free: bool,
    pub violations: Vec<SupportViolation>,
}

fn one_sided(law: &JumpLaw) -> i8 {
    let s = law.support();
    if s.iter().all(|&v| v > 0.0) {
        1
    } else if s.iter().all(|&v| v < 0.0) {
        -1
    } else {
        0
    }
}

fn support_case(trend_sign: i8, r: &JumpLaw, big_r: &JumpLaw) -> Option<SupportCase> {
    if trend_sign == 0 || one_sided(r) != trend_sign || one_sided(big_r) != trend_sign {
        return None;
    }
    Some(if trend_sign > 0 {
        SupportCase::Rising
    } else {
        SupportCase::Falling
    })
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Flags every `(state, n ≤ n_check)` where the discounted trend and both
/// jump supports share one strict sign, then repeats the test on the
/// eventual signs of the tails.
pub fn detect_arbitrage(scenario: &MarketScenario, n_check: usize) -> ArbitrageReport {
    let mut violations = Vec::new();
    let discounted = scenario.discounted();
    for (i, p) in discounted.patterns.iter().enumerate() {
        let state = State::from_index(i);
        for n in 0..=n_check {
            if let Some(case) = support_case(
                sign(p.c.term(n)),
                p.shock_jumps.law(n),
                p.switch_jumps.law(n),
            ) {
                violations.push(SupportViolation { state, n, case });
            }
        }
        // beyond n_check: one index per residue class of the joint period,
        // taken where the trend sign has settled
        let signs = p.c.eventual_signs();
        let period = lcm(
            lcm(signs.len(), p.shock_jumps.tail().len()),
            p.switch_jumps.tail().len(),
        );
        let start = p
            .shock_jumps
            .prefix()
            .len()
            .max(p.switch_jumps.prefix().len())
            .max(n_check + 1);
        for j in 0..period {
            let (from, s) = signs[j % signs.len()];
            let base = from.max(start);
            let n = base + (j + period - base % period) % period;
            if let Some(case) = support_case(s, p.shock_jumps.law(n), p.switch_jumps.law(n)) {
                violations.push(SupportViolation { state, n, case });
            }
        }
    }
    ArbitrageReport {
        arbitrage_free: violations.is_empty(),
        violations,
    }
}

fn lcm(a: usize, b: usize) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

/// Esscher parameters making the discounted stock a martingale: with the
/// chosen `r*`, `R*(n) = -1 - (c̃(n) + λ_n(1 + r*(n)) r̄(n)) / (μ_n R̄(n))`
/// where `c̃ = c - y`. Where `R̄(n) = 0` and the numerator vanishes too,
/// `R*(n) = 0`.
pub fn construct_martingale_measure(
    scenario: &MarketScenario,
    r_star: [Sequence; 2],
) -> Result<EsscherParams> {
    let discounted = scenario.discounted();
    let mut big_r_star = Vec::with_capacity(2);
    for (i, p) in discounted.patterns.iter().enumerate() {
        if let Some(n) = r_star[i].first_at_or_below(-1.0)? {
            return Err(Error::InvalidGirsanov { state: i, n });
        }
        let r_bar = p.shock_jumps.means();
        let big_r_bar = p.switch_jumps.means();
        let num = p.c.add(
            &p.lambda
                .as_sequence()
                .mul(&r_star[i].offset(1.0))?
                .mul(&r_bar)?,
        )?;
        let den = p.mu.as_sequence().mul(&big_r_bar)?;
        // put both on a common prefix length and period
        let num = num.add(&den.scale(0.0))?;
        let den = den.add(&num.scale(0.0))?;

        let mut prefix_num = Vec::with_capacity(num.prefix_len());
        let mut prefix_den = Vec::with_capacity(num.prefix_len());
        for n in 0..num.prefix_len() {
            let (a, b) = (num.term(n), den.term(n));
            if b == 0.0 {
                if a.abs() > ZERO_TOL {
                    return Err(Error::DivisionByZero { state: i, n });
                }
                prefix_num.push(-1.0);
                prefix_den.push(1.0);
            } else {
                prefix_num.push(a);
                prefix_den.push(b);
            }
        }
        let period = num.tail().period();
        let mut num_pieces = Vec::with_capacity(period);
        let mut den_pieces = Vec::with_capacity(period);
        for j in 0..period {
            let (a, b) = (num.tail().piece(j), den.tail().piece(j));
            if b.numerator().is_zero() {
                if !a.numerator().is_zero() {
                    let start = num.prefix_len();
                    let n = start + (j + period - start % period) % period;
                    return Err(Error::DivisionByZero { state: i, n });
                }
                num_pieces.push(TailRule::constant(-1.0).pieces()[0].clone());
                den_pieces.push(TailRule::constant(1.0).pieces()[0].clone());
            } else {
                num_pieces.push(a.clone());
                den_pieces.push(b.clone());
            }
        }
        let num = Sequence::new(prefix_num, TailRule::from_pieces(num_pieces)?);
        let den = Sequence::new(prefix_den, TailRule::from_pieces(den_pieces)?);
        let ratio = num.div(&den)?;
        let rs = ratio.scale(-1.0).offset(-1.0);
        if let Some(n) = rs.first_at_or_below(-1.0)? {
            if den.term(n) == 0.0 || !den.term(n).is_finite() {
                return Err(Error::DivisionByZero { state: i, n });
            }
            return Err(Error::NoValidMeasure { state: i, n });
        }
        big_r_star.push(rs);
    }
    let big_r_star = two(big_r_star);
    esscher_derive(scenario, r_star, big_r_star)
}

/// `c̃(n) + λ*_n r̄(n) + μ*_n R̄(n)` for the discounted trend.
pub fn martingale_residual(
    scenario: &MarketScenario,
    esscher: &EsscherParams,
    state: State,
    n: usize,
) -> f64 {
    let i = state.index();
    let p = &scenario.patterns[i];
    p.c.term(n) - scenario.rates[i]
        + esscher.lambda_star[i].term(n) * p.shock_jumps.law(n).mean()
        + esscher.mu_star[i].term(n) * p.switch_jumps.law(n).mean()
}
