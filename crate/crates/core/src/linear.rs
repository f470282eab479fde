//! Closed forms for constant `λ` and linearly increasing `μ_n = μ + nν`.
//!
//! With `α(t) = 1 - e^{-νt}`, `β = λ/ν`:
//!
//! - `F̄(t) = exp(λα(t)/ν - (λ+μ)t)`
//! - `f(t) = (μ + λα(t)) exp(-(λ+μ)t + λα(t)/ν)`
//! - `Ψ(z) = E e^{-zT} = 1 - z e^β Σ_n (-β)^n / (n! (λ+μ+z+nν))
//!         = 1 - (z/ν) e^β β^{-b} γ(b, β)`, `b = (λ+μ+z)/ν`
//! - `E T^m = m! e^β Σ_n (-β)^n / (n! (λ+μ+nν)^m)`

use crate::error::{Error, Result};
use crate::math::{exp, expm1, ln, sqrt, CompensatedSum};
use crate::poexp::PoExpParams;
use crate::sequence::{IntensitySequence, TailRule};
use crate::special::lower_incomplete_gamma;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearCaseParams {
    pub lambda: f64,
    pub mu: f64,
    pub nu: f64,
}

impl LinearCaseParams {
    pub fn new(lambda: f64, mu: f64, nu: f64) -> Result<Self> {
        for (name, v) in [("lambda", lambda), ("mu", mu), ("nu", nu)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(alloc::format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(Self { lambda, mu, nu })
    }

    /// The same law as a general [`PoExpParams`].
    pub fn to_poexp(&self) -> PoExpParams {
        PoExpParams::new(
            IntensitySequence::constant(self.lambda).expect("validated"),
            IntensitySequence::from_tail(TailRule::affine(self.mu, self.nu)).expect("validated"),
        )
    }

    fn beta(&self) -> f64 {
        self.lambda / self.nu
    }

    fn alpha(&self, t: f64) -> f64 {
        -expm1(-self.nu * t)
    }
}

pub fn survivor_linear(p: &LinearCaseParams, t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    exp(p.lambda * p.alpha(t) / p.nu - (p.lambda + p.mu) * t)
}

pub fn density_linear(p: &LinearCaseParams, t: f64) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    let a = p.alpha(t);
    (p.mu + p.lambda * a) * exp(-(p.mu + p.lambda) * t + p.lambda * a / p.nu)
}

/// Sums `e^β Σ_n (-β)^n / (n! g(n))` until the terms stop mattering.
fn alternating<G: Fn(f64) -> f64>(beta: f64, g: G) -> f64 {
    let mut sum = CompensatedSum::new();
    let mut coef = 1.0; // (-β)^n / n!
    let mut n = 0.0;
    loop {
        let term = coef / g(n);
        sum.add(term);
        n += 1.0;
        coef *= -beta / n;
        if n > beta && coef.abs() < 1e-18 * sum.value().abs() {
            break;
        }
    }
    exp(beta) * sum.value()
}

/// `Ψ(z)` by the alternating series.
pub fn mgf_linear(p: &LinearCaseParams, z: f64) -> f64 {
    if z == 0.0 {
        return 1.0;
    }
    let base = p.lambda + p.mu + z;
    1.0 - z * alternating(p.beta(), |n| base + n * p.nu)
}

/// `Ψ(z)` through the lower incomplete gamma function.
pub fn mgf_linear_gamma(p: &LinearCaseParams, z: f64) -> f64 {
    if z == 0.0 {
        return 1.0;
    }
    let beta = p.beta();
    let b = (p.lambda + p.mu + z) / p.nu;
    1.0 - z / p.nu * exp(beta - b * ln(beta)) * lower_incomplete_gamma(b, beta)
}

/// `E T^m` by the alternating series.
pub fn moment_linear(p: &LinearCaseParams, m: u32) -> f64 {
    let fact: f64 = (1..=m).map(f64::from).product();
    let base = p.lambda + p.mu;
    fact * alternating(p.beta(), |n| libm::pow(base + n * p.nu, f64::from(m)))
}

/// `E T = (e^β/ν) β^{-b} γ(b, β)` with `b = (λ+μ)/ν`.
pub fn mean_linear_gamma(p: &LinearCaseParams) -> f64 {
    let beta = p.beta();
    let b = (p.lambda + p.mu) / p.nu;
    exp(beta - b * ln(beta)) / p.nu * lower_incomplete_gamma(b, beta)
}

/// Location of the density maximum; `0` when `λν ≤ μ²`.
pub fn density_mode(p: &LinearCaseParams) -> f64 {
    let (l, m, nu) = (p.lambda, p.mu, p.nu);
    if l * nu <= m * m {
        return 0.0;
    }
    let s = l + m;
    let inner = 1.0 + nu / (2.0 * s) + sqrt(nu / s * (1.0 + nu / (4.0 * s)));
    ln(l / s * inner) / nu
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature;

    fn linear_case() -> LinearCaseParams {
        LinearCaseParams::new(1.5, 1.0, 1.0).unwrap()
    }

    #[test]
    fn survivor_values() {
        let p = linear_case();
        assert_eq!(survivor_linear(&p, 0.0), 1.0);
        assert!((survivor_linear(&p, 1.0) - exp(1.5 * (1.0 - exp(-1.0)) - 2.5)).abs() < 1e-16);
        assert!((survivor_linear(&p, 1.0) - 0.21187).abs() < 1e-5);
        // vanishing λ leaves Exp(μ)
        let q = LinearCaseParams::new(1e-12, 2.0, 1.0).unwrap();
        assert!((survivor_linear(&q, 0.8) - exp(-1.6)).abs() < 1e-11);
    }

    #[test]
    fn mgf_forms_agree() {
        let p = linear_case();
        assert_eq!(mgf_linear(&p, 0.0), 1.0);
        for z in [0.1, 1.0, 2.5, 7.0] {
            assert!(
                (mgf_linear(&p, z) - mgf_linear_gamma(&p, z)).abs() < 1e-10,
                "z={z}"
            );
        }
        // Ψ(1) = ∫ e^{-t} f(t) dt
        let q = quadrature::integrate_to_infinity(|t| exp(-t) * density_linear(&p, t), 0.0, 1e-12)
            .unwrap();
        assert!((mgf_linear(&p, 1.0) - q.value).abs() < 1e-6);
    }

    #[test]
    fn moments() {
        let p = linear_case();
        let h = 1e-5;
        let d = -(mgf_linear(&p, h) - mgf_linear(&p, -h)) / (2.0 * h);
        assert!((d - moment_linear(&p, 1)).abs() < 1e-6);
        assert!((moment_linear(&p, 1) - mean_linear_gamma(&p)).abs() < 1e-12);
        let q = quadrature::integrate_to_infinity(|t| survivor_linear(&p, t), 0.0, 1e-12).unwrap();
        assert!((moment_linear(&p, 1) - q.value).abs() < 1e-8);
        let tiny = LinearCaseParams::new(1e-12, 2.0, 1.0).unwrap();
        assert!((moment_linear(&tiny, 3) - 6.0 / 8.0).abs() < 1e-9);
    }

    #[test]
    fn mode() {
        assert_eq!(
            density_mode(&LinearCaseParams::new(1.0, 2.0, 1.0).unwrap()),
            0.0
        );
        assert_eq!(
            density_mode(&LinearCaseParams::new(4.0, 2.0, 1.0).unwrap()),
            0.0
        );
        let p = linear_case();
        let m = density_mode(&p);
        assert!((m - 0.111_537).abs() < 1e-6);
        // grid argmax
        let (best, _) = (0..50_000)
            .map(|i| i as f64 * 1e-4)
            .map(|t| (t, density_linear(&p, t)))
            .fold((0.0, f64::MIN), |acc, x| if x.1 > acc.1 { x } else { acc });
        assert!((best - m).abs() <= 1e-4);
    }

    #[test]
    fn density_integrates_to_one() {
        let p = linear_case();
        let q = quadrature::integrate_to_infinity(|t| density_linear(&p, t), 0.0, 1e-12).unwrap();
        assert!((q.value - 1.0).abs() < 1e-10);
        assert_eq!(density_linear(&p, 0.0), 1.0);
    }
}
