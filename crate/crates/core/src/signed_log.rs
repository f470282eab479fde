use core::ops::{Div, Mul, Neg};

use crate::math::{exp, ln};

/// A real number stored as `sign · exp(log_magnitude)`.
///
/// `sign == 0` represents exactly zero; `log_magnitude` is then `-inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLogValue {
    sign: i8,
    log_magnitude: f64,
}

impl SignedLogValue {
    pub const ZERO: Self = Self {
        sign: 0,
        log_magnitude: f64::NEG_INFINITY,
    };
    pub const ONE: Self = Self {
        sign: 1,
        log_magnitude: 0.0,
    };

    pub fn new(sign: i8, log_magnitude: f64) -> Self {
        if sign == 0 || log_magnitude == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            Self {
                sign: sign.signum(),
                log_magnitude,
            }
        }
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            Self {
                sign: if x > 0.0 { 1 } else { -1 },
                log_magnitude: ln(x.abs()),
            }
        }
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn log_magnitude(&self) -> f64 {
        self.log_magnitude
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    pub fn to_f64(&self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => f64::from(s) * exp(self.log_magnitude),
        }
    }

    /// Multiplies by a plain float without leaving log space.
    pub fn scale(self, x: f64) -> Self {
        self * Self::from_f64(x)
    }

    pub fn recip(self) -> Self {
        assert!(self.sign != 0, "reciprocal of zero");
        Self {
            sign: self.sign,
            log_magnitude: -self.log_magnitude,
        }
    }
}

impl Mul for SignedLogValue {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        if self.sign == 0 || rhs.sign == 0 {
            Self::ZERO
        } else {
            Self {
                sign: self.sign * rhs.sign,
                log_magnitude: self.log_magnitude + rhs.log_magnitude,
            }
        }
    }
}

impl Div for SignedLogValue {
    type Output = Self;

    fn div(self, rhs: Self) -> Self {
        self * rhs.recip()
    }
}

impl Neg for SignedLogValue {
    type Output = Self;

    fn neg(self) -> Self {
        Self {
            sign: -self.sign,
            log_magnitude: self.log_magnitude,
        }
    }
}
