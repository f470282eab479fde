//! Path simulation.

use alloc::vec::Vec;

use rand_core::RngCore;

use super::{PatternParams, State};
use crate::error::{Error, Result};
use crate::rng::exponential;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub t_start: f64,
    pub t_end: f64,
    pub slope: f64,
    pub state: State,
    pub shock_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Shock,
    Switch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub size: f64,
    pub kind: EventKind,
    /// State in force just before the event.
    pub state: State,
    /// Jump index the size was drawn with: `n - 1` for the `n`-th shock,
    /// the shock count `N` for a switch.
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessPath {
    pub initial_state: State,
    pub horizon: f64,
    pub segments: Vec<Segment>,
    pub events: Vec<Event>,
}

impl ProcessPath {
    /// `X(t)`, right-continuous.
    pub fn value_at(&self, t: f64) -> f64 {
        self.value_with(t, |s| s.slope, |e| e.size)
    }

    /// Value at `t` with slopes and jump sizes remapped.
    pub fn value_with<S, J>(&self, t: f64, slope: S, jump: J) -> f64
    where
        S: Fn(&Segment) -> f64,
        J: Fn(&Event) -> f64,
    {
        let mut x = 0.0;
        for s in &self.segments {
            if s.t_start >= t {
                break;
            }
            x += slope(s) * (s.t_end.min(t) - s.t_start);
        }
        for e in &self.events {
            if e.time > t {
                break;
            }
            x += jump(e);
        }
        x
    }

    /// `X` at each of the increasing times `ts` in one pass.
    pub fn values_at(&self, ts: &[f64]) -> Vec<f64> {
        ts.iter().map(|&t| self.value_at(t)).collect()
    }

    /// Drift part `𝕃(t)` only.
    pub fn drift_at(&self, t: f64) -> f64 {
        self.value_with(t, |s| s.slope, |_| 0.0)
    }

    /// Time of the first pattern switch, if it happened before the horizon.
    pub fn first_switch(&self) -> Option<f64> {
        self.events
            .iter()
            .find(|e| e.kind == EventKind::Switch)
            .map(|e| e.time)
    }

    pub fn state_at(&self, t: f64) -> State {
        self.segments
            .iter()
            .take_while(|s| s.t_start <= t)
            .last()
            .map_or(self.initial_state, |s| s.state)
    }
}

/// Simulates `X` on `[0, horizon]` starting in `initial`. At most `cap`
/// events are drawn; one more is an [`Error::ExplosionCap`].
pub fn simulate_path<R: RngCore + ?Sized>(
    patterns: &[PatternParams; 2],
    initial: State,
    horizon: f64,
    cap: usize,
    rng: &mut R,
) -> Result<ProcessPath> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid(alloc::format!(
            "horizon must be finite and > 0, got {horizon}"
        )));
    }
    let mut segments = Vec::new();
    let mut events = Vec::new();
    let mut state = initial;
    let mut n = 0usize;
    let mut now = 0.0;
    loop {
        let p = &patterns[state.index()];
        let slope = p.c.term(n);
        let shock = exponential(rng, p.lambda.term(n));
        let switch = exponential(rng, p.mu.term(n));
        let dt = shock.min(switch);
        let end = now + dt;
        if end >= horizon {
            segments.push(Segment {
                t_start: now,
                t_end: horizon,
                slope,
                state,
                shock_count: n,
            });
            break;
        }
        segments.push(Segment {
            t_start: now,
            t_end: end,
            slope,
            state,
            shock_count: n,
        });
        if events.len() >= cap {
            return Err(Error::ExplosionCap { cap });
        }
        if switch <= shock {
            let size = p.switch_jumps.law(n).sample(rng);
            events.push(Event {
                time: end,
                size,
                kind: EventKind::Switch,
                state,
                index: n,
            });
            state = state.flip();
            n = 0;
        } else {
            let size = p.shock_jumps.law(n).sample(rng);
            events.push(Event {
                time: end,
                size,
                kind: EventKind::Shock,
                state,
                index: n,
            });
            n += 1;
        }
        now = end;
    }
    Ok(ProcessPath {
        initial_state: initial,
        horizon,
        segments,
        events,
    })
}
