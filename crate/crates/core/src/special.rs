//! Gamma-function helpers.

use crate::math::{exp, ln};

pub use libm::{lgamma as ln_gamma, tgamma as gamma};

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 10_000;

/// Lower incomplete gamma `γ(s, x) = ∫_0^x t^{s-1} e^{-t} dt` for `s > 0`, `x ≥ 0`.
///
/// Power series below `x = s + 1`, Lentz continued fraction for the upper
/// function above it.
pub fn lower_incomplete_gamma(s: f64, x: f64) -> f64 {
    assert!(
        s > 0.0 && x >= 0.0,
        "lower_incomplete_gamma needs s > 0, x >= 0"
    );
    if x == 0.0 {
        return 0.0;
    }
    if x == f64::INFINITY {
        return gamma(s);
    }
    if x < s + 1.0 {
        exp(ln_lower_series(s, x))
    } else {
        gamma(s) - exp(ln_upper_fraction(s, x))
    }
}

/// `P(s, x) = γ(s, x) / Γ(s)`.
pub fn regularized_lower_gamma(s: f64, x: f64) -> f64 {
    assert!(
        s > 0.0 && x >= 0.0,
        "regularized_lower_gamma needs s > 0, x >= 0"
    );
    if x == 0.0 {
        return 0.0;
    }
    if x == f64::INFINITY {
        return 1.0;
    }
    if x < s + 1.0 {
        exp(ln_lower_series(s, x) - ln_gamma(s))
    } else {
        1.0 - exp(ln_upper_fraction(s, x) - ln_gamma(s))
    }
}

fn ln_lower_series(s: f64, x: f64) -> f64 {
    let mut term = 1.0 / s;
    let mut sum = term;
    let mut a = s;
    for _ in 0..MAX_ITER {
        a += 1.0;
        term *= x / a;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    s * ln(x) - x + ln(sum)
}

/// `ln Γ(s, x)` by the modified Lentz method.
fn ln_upper_fraction(s: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    s * ln(x) - x + ln(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature;

    #[test]
    fn exponential_case() {
        for x in [0.1, 1.0, 2.5, 10.0, 40.0] {
            assert!((lower_incomplete_gamma(1.0, x) - (1.0 - exp(-x))).abs() < 1e-14);
        }
        assert_eq!(lower_incomplete_gamma(3.0, 0.0), 0.0);
        assert!((lower_incomplete_gamma(2.5, f64::INFINITY) - gamma(2.5)).abs() < 1e-14);
    }

    #[test]
    fn half_integer_matches_quadrature() {
        // ∫_0^1 t^{-1/2} e^{-t} dt, substitute t = u² to remove the singularity
        let q = quadrature::integrate(|u| 2.0 * exp(-u * u), 0.0, 1.0, 1e-13).unwrap();
        let g = lower_incomplete_gamma(0.5, 1.0);
        assert!((g - q.value).abs() < 1e-12);
        assert!((g - 1.493648265624854).abs() < 1e-12);
    }

    #[test]
    fn both_branches_agree_with_quadrature() {
        for &(s, x) in &[(2.5, 1.0), (2.5, 4.0), (0.7, 3.0), (6.0, 6.5), (6.0, 8.0)] {
            let q =
                quadrature::integrate(|t: f64| t.powf(s - 1.0) * exp(-t), 0.0, x, 1e-13).unwrap();
            let g = lower_incomplete_gamma(s, x);
            assert!(
                (g - q.value).abs() < 1e-10 * q.value.max(1.0),
                "s={s} x={x}"
            );
            assert!((regularized_lower_gamma(s, x) - g / gamma(s)).abs() < 1e-12);
        }
    }
}
