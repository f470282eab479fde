//! Infinite real sequences given as an explicit prefix plus an analytic tail.
//!
//! The tail is periodic-rational: index `n` uses piece `n mod L`, and each
//! piece is a ratio of polynomials in `n`. That covers constant, affine,
//! quadratic, harmonic and periodic tails, and the class is closed under the
//! arithmetic the market module needs (`λ(1 + r*)`, `-(c + λ r̄) / R̄`, ...).
//! Because tails are rational, tail questions such as non-explosion
//! (`Σ 1/λ_n = ∞`), eventual sign and identical vanishing are decided from
//! degrees and root bounds instead of by sampling.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::ceil;

/// Scans past this many indices are refused when certifying signs.
const MAX_SIGN_SCAN: usize = 2_000_000;

/// Polynomial in `n`, coefficients from low to high degree.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly(Vec<f64>);

impl Poly {
    pub fn new(coefficients: Vec<f64>) -> Self {
        let mut p = Self(coefficients);
        p.trim();
        p
    }

    pub fn constant(v: f64) -> Self {
        Self::new(vec![v])
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.0
    }

    fn trim(&mut self) {
        while self.0.last() == Some(&0.0) {
            self.0.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &a| acc * x + a)
    }

    fn leading(&self) -> f64 {
        self.0.last().copied().unwrap_or(0.0)
    }

    /// Every real root has modulus below this bound.
    fn cauchy_bound(&self) -> f64 {
        match self.degree() {
            None | Some(0) => 0.0,
            Some(d) => {
                let lead = self.0[d].abs();
                1.0 + self.0[..d]
                    .iter()
                    .map(|a| a.abs() / lead)
                    .fold(0.0, f64::max)
            }
        }
    }

    fn add(&self, other: &Self) -> Self {
        let len = self.0.len().max(other.0.len());
        let mut out = Vec::with_capacity(len);
        for i in 0..len {
            let a = self.0.get(i).copied().unwrap_or(0.0);
            let b = other.0.get(i).copied().unwrap_or(0.0);
            let s = a + b;
            // cancellation residue
            if s.abs() <= 1e-14 * (a.abs() + b.abs()) {
                out.push(0.0);
            } else {
                out.push(s);
            }
        }
        Self::new(out)
    }

    fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::new(Vec::new());
        }
        let mut out = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    fn scale(&self, k: f64) -> Self {
        Self::new(self.0.iter().map(|a| a * k).collect())
    }
}

/// Ratio of two polynomials in `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ratio {
    num: Poly,
    den: Poly,
}

impl Ratio {
    pub fn new(num: Poly, den: Poly) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::invalid("rational tail with zero denominator"));
        }
        Ok(Self::normalized(num, den))
    }

    fn normalized(num: Poly, den: Poly) -> Self {
        if den.degree() == Some(0) {
            let k = den.leading();
            Self {
                num: num.scale(1.0 / k),
                den: Poly::constant(1.0),
            }
        } else {
            Self { num, den }
        }
    }

    pub fn polynomial(p: Poly) -> Self {
        Self {
            num: p,
            den: Poly::constant(1.0),
        }
    }

    pub fn numerator(&self) -> &Poly {
        &self.num
    }

    pub fn denominator(&self) -> &Poly {
        &self.den
    }

    pub fn eval(&self, n: f64) -> f64 {
        self.num.eval(n) / self.den.eval(n)
    }

    fn as_constant(&self) -> Option<f64> {
        match (self.num.degree(), self.den.degree()) {
            (None, _) => Some(0.0),
            (Some(0), Some(0)) => Some(self.num.leading() / self.den.leading()),
            _ => None,
        }
    }

    /// `deg num - deg den`, `None` when the ratio is identically zero.
    pub fn degree_excess(&self) -> Option<i64> {
        let dn = self.num.degree()? as i64;
        Some(dn - self.den.degree().unwrap_or(0) as i64)
    }

    /// Sign for all `n` beyond [`Ratio::sign_bound`].
    pub fn eventual_sign(&self) -> i8 {
        let s = self.num.leading() * self.den.leading();
        if s > 0.0 {
            1
        } else if s < 0.0 {
            -1
        } else {
            0
        }
    }

    /// Past this point neither numerator nor denominator changes sign.
    pub fn sign_bound(&self) -> f64 {
        self.num.cauchy_bound().max(self.den.cauchy_bound())
    }

    fn add(&self, other: &Self) -> Self {
        if self.den == other.den {
            Self::normalized(self.num.add(&other.num), self.den.clone())
        } else {
            Self::normalized(
                self.num.mul(&other.den).add(&other.num.mul(&self.den)),
                self.den.mul(&other.den),
            )
        }
    }

    fn mul(&self, other: &Self) -> Self {
        Self::normalized(self.num.mul(&other.num), self.den.mul(&other.den))
    }

    fn div(&self, other: &Self) -> Result<Self> {
        if other.num.is_zero() {
            return Err(Error::invalid("division by an identically zero tail"));
        }
        Ok(Self::normalized(
            self.num.mul(&other.den),
            self.den.mul(&other.num),
        ))
    }
}

/// Periodic-rational rule for the indices beyond a sequence's prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct TailRule {
    pieces: Vec<Ratio>,
}

impl TailRule {
    pub fn constant(v: f64) -> Self {
        Self::single(Poly::constant(v))
    }

    /// `a + b·n`.
    pub fn affine(a: f64, b: f64) -> Self {
        Self::single(Poly::new(vec![a, b]))
    }

    /// `a·(n + 1)²`.
    pub fn quadratic(a: f64) -> Self {
        Self::single(Poly::new(vec![a, 2.0 * a, a]))
    }

    /// `a / (n + 1)`.
    pub fn harmonic(a: f64) -> Self {
        Self {
            pieces: vec![Ratio::normalized(
                Poly::constant(a),
                Poly::new(vec![1.0, 1.0]),
            )],
        }
    }

    /// `values[n mod values.len()]`.
    pub fn periodic(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("periodic tail needs at least one value"));
        }
        Ok(Self {
            pieces: values
                .iter()
                .map(|&v| Ratio::polynomial(Poly::constant(v)))
                .collect(),
        })
    }

    pub fn rational(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        Ok(Self {
            pieces: vec![Ratio::new(Poly::new(num), Poly::new(den))?],
        })
    }

    /// One ratio per residue class, `pieces[j]` applies when `n mod L == j`.
    pub fn from_pieces(pieces: Vec<Ratio>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::invalid("tail rule needs at least one piece"));
        }
        Ok(Self { pieces })
    }

    fn single(p: Poly) -> Self {
        Self {
            pieces: vec![Ratio::polynomial(p)],
        }
    }

    pub fn period(&self) -> usize {
        self.pieces.len()
    }

    pub fn pieces(&self) -> &[Ratio] {
        &self.pieces
    }

    pub fn piece(&self, n: usize) -> &Ratio {
        &self.pieces[n % self.pieces.len()]
    }

    pub fn eval(&self, n: usize) -> f64 {
        self.piece(n).eval(n as f64)
    }

    fn combine<F>(&self, other: &Self, mut op: F) -> Result<Self>
    where
        F: FnMut(&Ratio, &Ratio) -> Result<Ratio>,
    {
        let period = lcm(self.period(), other.period());
        let pieces = (0..period)
            .map(|j| op(self.piece(j), other.piece(j)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { pieces }.compact())
    }

    /// Collapses repeated pieces back to the shortest period.
    fn compact(mut self) -> Self {
        let len = self.pieces.len();
        for p in 1..len {
            if len.is_multiple_of(p) && (0..len).all(|j| self.pieces[j] == self.pieces[j % p]) {
                self.pieces.truncate(p);
                break;
            }
        }
        self
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// A real sequence `s_n`, `n ≥ 0`: explicit prefix values, then the tail rule
/// evaluated at the absolute index `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    prefix: Vec<f64>,
    tail: TailRule,
}

impl Sequence {
    pub fn new(prefix: Vec<f64>, tail: TailRule) -> Self {
        Self { prefix, tail }
    }

    pub fn from_tail(tail: TailRule) -> Self {
        Self::new(Vec::new(), tail)
    }

    pub fn constant(v: f64) -> Self {
        Self::from_tail(TailRule::constant(v))
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn prefix(&self) -> &[f64] {
        &self.prefix
    }

    pub fn tail(&self) -> &TailRule {
        &self.tail
    }

    pub fn prefix_len(&self) -> usize {
        self.prefix.len()
    }

    pub fn term(&self, n: usize) -> f64 {
        match self.prefix.get(n) {
            Some(&v) => v,
            None => self.tail.eval(n),
        }
    }

    /// `Some(v)` when every term equals `v`.
    pub fn constant_value(&self) -> Option<f64> {
        let v = self.tail.pieces[0].as_constant()?;
        let tail_constant = self.tail.pieces.iter().all(|p| p.as_constant() == Some(v));
        (tail_constant && self.prefix.iter().all(|&x| x == v)).then_some(v)
    }

    fn zip_with<F, G>(&self, other: &Self, mut value: F, tail: G) -> Result<Self>
    where
        F: FnMut(f64, f64) -> f64,
        G: FnMut(&Ratio, &Ratio) -> Result<Ratio>,
    {
        let len = self.prefix.len().max(other.prefix.len());
        let prefix = (0..len)
            .map(|n| value(self.term(n), other.term(n)))
            .collect();
        Ok(Self::new(prefix, self.tail.combine(&other.tail, tail)?))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b, |a, b| Ok(a.add(b)))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b, |a, b| Ok(a.mul(b)))
    }

    /// Termwise quotient. Prefix entries divided by zero become non-finite
    /// and are caught by whatever validation the caller applies.
    pub fn div(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a / b, |a, b| a.div(b))
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(
            self.prefix.iter().map(|x| x * k).collect(),
            TailRule {
                pieces: self
                    .tail
                    .pieces
                    .iter()
                    .map(|p| Ratio::normalized(p.num.scale(k), p.den.clone()))
                    .collect(),
            },
        )
    }

    pub fn offset(&self, c: f64) -> Self {
        self.add(&Self::constant(c))
            .expect("constant tails always combine")
    }

    /// Indices beyond the prefix at which the tail, piece by piece, is
    /// pinned down: `deg(num) + 1` indices per residue class. A rational
    /// tail vanishing at all of them vanishes identically.
    pub fn tail_probe_indices(&self) -> Vec<usize> {
        let period = self.tail.period();
        let start = self.prefix.len();
        let mut out = Vec::new();
        for j in 0..period {
            let first = start + (j + period - start % period) % period;
            let count = self.tail.pieces[j].num.degree().unwrap_or(0) + 1;
            out.extend((0..count).map(|i| first + i * period));
        }
        out.sort_unstable();
        out
    }

    /// First index whose term is not strictly positive (or not finite),
    /// certified over the whole infinite sequence via the tail root bounds.
    pub fn first_nonpositive(&self) -> Result<Option<usize>> {
        self.first_failing(|x| x > 0.0 && x.is_finite(), 1)
    }

    /// First index whose term is not greater than `floor`.
    pub fn first_at_or_below(&self, floor: f64) -> Result<Option<usize>> {
        self.offset(-floor).first_nonpositive()
    }

    fn first_failing<P: Fn(f64) -> bool>(&self, ok: P, wanted_sign: i8) -> Result<Option<usize>> {
        if let Some(n) = self.prefix.iter().position(|&x| !ok(x)) {
            return Ok(Some(n));
        }
        let start = self.prefix.len();
        let period = self.tail.period();
        let bound = self
            .tail
            .pieces
            .iter()
            .map(Ratio::sign_bound)
            .fold(0.0, f64::max);
        let scan_end = (ceil(bound) as usize + 1).max(start) + period;
        if scan_end - start > MAX_SIGN_SCAN {
            return Err(Error::invalid(
                "tail root bound too large to certify the sign of the sequence",
            ));
        }
        if let Some(n) = (start..scan_end).find(|&n| !ok(self.term(n))) {
            return Ok(Some(n));
        }
        // Past `scan_end` every piece keeps its eventual sign.
        let mut first = None::<usize>;
        for (j, p) in self.tail.pieces.iter().enumerate() {
            if p.eventual_sign() != wanted_sign {
                let n = scan_end + (j + period - scan_end % period) % period;
                first = Some(first.map_or(n, |f| f.min(n)));
            }
        }
        Ok(first)
    }

    /// Signs the tail settles into, one per residue class, together with an
    /// index from which that sign holds on the class.
    pub fn eventual_signs(&self) -> Vec<(usize, i8)> {
        let start = self.prefix.len();
        let period = self.tail.period();
        self.tail
            .pieces
            .iter()
            .enumerate()
            .map(|(j, p)| {
                let from = (ceil(p.sign_bound()) as usize + 1).max(start);
                let n = from + (j + period - from % period) % period;
                (n, p.eventual_sign())
            })
            .collect()
    }
}

/// A sequence of strictly positive rates (units 1/time).
#[derive(Debug, Clone, PartialEq)]
pub struct IntensitySequence(Sequence);

impl IntensitySequence {
    pub fn new(seq: Sequence) -> Result<Self> {
        match seq.first_nonpositive()? {
            None => Ok(Self(seq)),
            Some(n) => Err(Error::invalid(alloc::format!(
                "intensity term {n} is {} (must be positive and finite)",
                seq.term(n)
            ))),
        }
    }

    pub fn constant(v: f64) -> Result<Self> {
        Self::new(Sequence::constant(v))
    }

    pub fn from_tail(tail: TailRule) -> Result<Self> {
        Self::new(Sequence::from_tail(tail))
    }

    pub fn with_prefix(prefix: Vec<f64>, tail: TailRule) -> Result<Self> {
        Self::new(Sequence::new(prefix, tail))
    }

    pub fn term(&self, n: usize) -> f64 {
        self.0.term(n)
    }

    pub fn as_sequence(&self) -> &Sequence {
        &self.0
    }

    pub fn into_sequence(self) -> Sequence {
        self.0
    }

    /// `Σ 1/λ_n = ∞`, decided from the tail alone: some residue class has a
    /// tail growing at most linearly.
    pub fn is_non_explosive(&self) -> bool {
        self.0
            .tail
            .pieces
            .iter()
            .any(|p| p.degree_excess().is_some_and(|d| d <= 1))
    }

    /// `λ_n + z·μ_n`.
    pub fn combined(&self, other: &Self, z: f64) -> Self {
        let seq = self
            .0
            .add(&other.0.scale(z))
            .expect("sums of valid tails combine");
        Self(seq)
    }
}
