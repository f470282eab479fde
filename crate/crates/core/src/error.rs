use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Two nodes of a κ product are closer than the distinctness tolerance.
    /// `z` carries the modulation parameter when the nodes are `λ + zμ`.
    #[error("nodes {i} and {j} are not distinct ({a} vs {b}){}", z.map(|z| alloc::format!(" at z = {z}")).unwrap_or_default())]
    DegenerateSpacing {
        i: usize,
        j: usize,
        a: f64,
        b: f64,
        z: Option<f64>,
    },

    #[error("series over n failed the decay test at index {index}")]
    SeriesDiverged { index: usize },

    #[error("event cap of {cap} reached before the horizon")]
    ExplosionCap { cap: usize },

    #[error("direct a_n evaluation is capped at n = {cap}, got {n}")]
    TermCap { n: usize, cap: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Esscher parameter in state {state} at n = {n} is not greater than -1")]
    InvalidGirsanov { state: usize, n: usize },

    #[error("no valid martingale measure: R*({n}) <= -1 in state {state}")]
    NoValidMeasure { state: usize, n: usize },

    #[error(
        "mean switch jump is zero in state {state} at n = {n} while the remaining drift is not"
    )]
    DivisionByZero { state: usize, n: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
