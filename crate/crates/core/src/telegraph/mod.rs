//! The two-pattern piecewise-linear process `X = L + J`.
//!
//! The process alternates between patterns 0 and 1. While in pattern `i`
//! after `n` shocks it moves with slope `c^{(i)}(n)`; shocks arrive at rate
//! `λ^{(i)}_n` and the pattern ends at rate `μ^{(i)}_n`, so each holding
//! time is PoExp(λ^{(i)}, μ^{(i)}). The `n`-th shock of a pattern (counting
//! from 1) adds a draw of `r^{(i)}(n-1)`; leaving the pattern after `N`
//! shocks adds a draw of `R^{(i)}(N)`. The shock count starts from zero in
//! every new pattern.

mod mean;
mod path;

use alloc::vec::Vec;

use rand_core::RngCore;

use crate::error::{Error, Result};
use crate::poexp::PoExpParams;
use crate::rng::categorical;
use crate::sequence::{IntensitySequence, Sequence, TailRule};

pub use mean::{
    delta, delta_sequence, is_martingale, mean_source, mean_source_fallback, rho,
    solve_mean_equations, MartingaleVerdict, MeanGrid, MeanSource, MeanSourceSeries,
};
pub use path::{simulate_path, Event, EventKind, ProcessPath, Segment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum State {
    Zero,
    One,
}

impl State {
    pub fn index(self) -> usize {
        match self {
            State::Zero => 0,
            State::One => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            State::Zero
        } else {
            State::One
        }
    }

    pub fn flip(self) -> Self {
        match self {
            State::Zero => State::One,
            State::One => State::Zero,
        }
    }
}

/// Law of one jump amplitude.
#[derive(Debug, Clone, PartialEq)]
pub enum JumpLaw {
    Deterministic(f64),
    Discrete {
        values: Vec<f64>,
        cumulative: Vec<f64>,
    },
}

impl JumpLaw {
    pub fn deterministic(v: f64) -> Self {
        JumpLaw::Deterministic(v)
    }

    pub fn discrete(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != probs.len() {
            return Err(Error::invalid(
                "discrete jump law needs matching, non-empty values and probs",
            ));
        }
        if probs.iter().any(|&p| !(p >= 0.0)) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "discrete jump law needs finite values and nonnegative probs",
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(alloc::format!(
                "jump probabilities sum to {total}, not 1"
            )));
        }
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(JumpLaw::Discrete { values, cumulative })
    }

    pub fn mean(&self) -> f64 {
        match self {
            JumpLaw::Deterministic(v) => *v,
            JumpLaw::Discrete { values, cumulative } => {
                let mut prev = 0.0;
                values
                    .iter()
                    .zip(cumulative)
                    .map(|(v, &c)| {
                        let p = c - prev;
                        prev = c;
                        v * p
                    })
                    .sum()
            }
        }
    }

    /// Values carrying positive probability.
    pub fn support(&self) -> Vec<f64> {
        match self {
            JumpLaw::Deterministic(v) => alloc::vec![*v],
            JumpLaw::Discrete { values, cumulative } => {
                let mut prev = 0.0;
                values
                    .iter()
                    .zip(cumulative)
                    .filter_map(|(&v, &c)| {
                        let p = c - prev;
                        prev = c;
                        (p > 0.0).then_some(v)
                    })
                    .collect()
            }
        }
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            JumpLaw::Deterministic(v) => *v,
            JumpLaw::Discrete { values, cumulative } => values[categorical(rng, cumulative)],
        }
    }
}

/// Jump laws indexed by `n`: explicit prefix, then a periodic tail.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpSchedule {
    prefix: Vec<JumpLaw>,
    tail: Vec<JumpLaw>,
}

impl JumpSchedule {
    pub fn new(prefix: Vec<JumpLaw>, tail: Vec<JumpLaw>) -> Result<Self> {
        if tail.is_empty() {
            return Err(Error::invalid("jump schedule needs at least one tail law"));
        }
        Ok(Self { prefix, tail })
    }

    pub fn constant(law: JumpLaw) -> Self {
        Self {
            prefix: Vec::new(),
            tail: alloc::vec![law],
        }
    }

    pub fn zero() -> Self {
        Self::constant(JumpLaw::Deterministic(0.0))
    }

    pub fn law(&self, n: usize) -> &JumpLaw {
        match self.prefix.get(n) {
            Some(l) => l,
            None => &self.tail[n % self.tail.len()],
        }
    }

    pub fn prefix(&self) -> &[JumpLaw] {
        &self.prefix
    }

    pub fn tail(&self) -> &[JumpLaw] {
        &self.tail
    }

    /// Every law the schedule can use (each tail law once).
    pub fn distinct_laws(&self) -> impl Iterator<Item = &JumpLaw> {
        self.prefix.iter().chain(self.tail.iter())
    }

    /// `n ↦ E r(n)` as a [`Sequence`].
    pub fn means(&self) -> Sequence {
        let tail: Vec<f64> = self.tail.iter().map(JumpLaw::mean).collect();
        Sequence::new(
            self.prefix.iter().map(JumpLaw::mean).collect(),
            TailRule::periodic(&tail).expect("tail is non-empty"),
        )
    }

    /// Applies `f` to every law.
    pub fn map_laws<F: FnMut(&JumpLaw) -> JumpLaw>(&self, mut f: F) -> Self {
        Self {
            prefix: self.prefix.iter().map(&mut f).collect(),
            tail: self.tail.iter().map(&mut f).collect(),
        }
    }
}

/// One pattern's parameters `⟨c, r, R, μ, λ⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternParams {
    /// Slope after `n` shocks.
    pub c: Sequence,
    /// `r(n)`: law of the jump at shock `n + 1`.
    pub shock_jumps: JumpSchedule,
    /// `R(n)`: law of the jump when the pattern ends after `n` shocks.
    pub switch_jumps: JumpSchedule,
    pub mu: IntensitySequence,
    pub lambda: IntensitySequence,
}

impl PatternParams {
    /// Holding-time law of the pattern.
    pub fn holding_time(&self) -> PoExpParams {
        PoExpParams::new(self.lambda.clone(), self.mu.clone())
    }

    /// Drift only: no jumps.
    pub fn drift(c: Sequence, lambda: IntensitySequence, mu: IntensitySequence) -> Self {
        Self {
            c,
            shock_jumps: JumpSchedule::zero(),
            switch_jumps: JumpSchedule::zero(),
            mu,
            lambda,
        }
    }
}
