//! Poisson-modulated exponential (PoExp) distributions and the two-pattern
//! piecewise-linear jump process built on them.
//!
//! A PoExp(λ, μ) holding time `T` has hazard `μ_{N(t)}`, where `N` is a
//! renewal counting process with exponential gaps `Exp(λ_n)`. Two such laws
//! alternate as the holding times of a piecewise-linear process
//! `X = L + J` whose trend and jump sizes depend on the current pattern and
//! on the number of shocks seen within the pattern. On top of `X` sits a
//! bond/stock market model and an Esscher change of measure that rescales
//! only the intensities.
//!
//! The crate is `no_std` (with `alloc`). All randomness comes in through an
//! explicit [`rand_core::RngCore`] stream, and [`rng::path_stream`] derives
//! the per-path substreams used by the Monte Carlo harness in the `poexp`
//! crate.
//!
//! Module map:
//!
//! - [`sequence`]: intensity and trend sequences (explicit prefix + analytic tail)
//! - [`kernel`]: `Λ_n`, `Π_n`, `κ_{n,k}`, `a_n(t)`, `b_k` and the Vandermonde identities
//! - [`counting`]: the renewal counting process `N(t; λ)`
//! - [`poexp`] and [`linear`]: the PoExp law, general and linear-intensity cases
//! - [`telegraph`]: the two-pattern process, its mean equations and martingale test
//! - [`market`]: bond/stock model, Esscher transform, martingale measures

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod accel;
mod chain;
pub mod counting;
mod error;
pub mod kernel;
pub mod linear;
pub mod market;
mod math;
pub mod poexp;
pub mod quadrature;
pub mod rng;
pub mod sequence;
mod signed_log;
pub mod special;
pub mod telegraph;

pub use error::{Error, Result};
pub use math::CompensatedSum;
pub use signed_log::SignedLogValue;
