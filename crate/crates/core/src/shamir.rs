//! Shamir threshold sharing over GF(p).
//!
//! Player `i` (0-based) always holds the evaluation at abscissa `i + 1`, so a
//! field must satisfy `p > n` to host an `n`-player sharing.

use rand::Rng;
use thiserror::Error;

use crate::field::{sample_uniform, FieldElement, PrimeModulus};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ShamirError {
    #[error("threshold {threshold} is invalid for {players} players")]
    InvalidThreshold { threshold: usize, players: usize },
    #[error("field of size {p} cannot host {players} distinct evaluation points")]
    FieldTooSmall { p: u32, players: usize },
    #[error("need {needed} shares, got {got}")]
    InsufficientShares { needed: usize, got: usize },
    #[error("shares do not lie on a single polynomial of degree < {threshold}")]
    InconsistentShares { threshold: usize },
    #[error("duplicate or zero evaluation point x = {0}")]
    InvalidAbscissa(u32),
    #[error("shares mix different fields")]
    MixedFields,
}

/// One player's point `(x, F(x))` of a sharing polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SharePoint {
    pub x: u32,
    pub y: FieldElement,
}

impl SharePoint {
    pub fn new(x: u32, y: FieldElement) -> Self {
        Self { x, y }
    }
}

/// Minimum number of points needed to reconstruct; the polynomial has degree `t - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Threshold(pub usize);

impl Threshold {
    #[inline]
    pub fn get(self) -> usize {
        self.0
    }
}

/// Coefficients in ascending degree; `coefficients[0]` is the shared value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polynomial {
    coefficients: Vec<FieldElement>,
}

impl Polynomial {
    pub fn new(coefficients: Vec<FieldElement>) -> Self {
        assert!(!coefficients.is_empty(), "polynomial needs a constant term");
        Self { coefficients }
    }

    /// Random polynomial of degree `threshold - 1` with the given constant term.
    ///
    /// Draw order: coefficients of degree 1, 2, ... in turn.
    pub fn random<R: Rng + ?Sized>(constant: FieldElement, threshold: Threshold, rng: &mut R) -> Self {
        let p = constant.modulus();
        let mut coefficients = Vec::with_capacity(threshold.get().max(1));
        coefficients.push(constant);
        coefficients.extend((1..threshold.get()).map(|_| sample_uniform(rng, p)));
        Self { coefficients }
    }

    pub fn coefficients(&self) -> &[FieldElement] {
        &self.coefficients
    }

    pub fn evaluate(&self, x: FieldElement) -> FieldElement {
        self.coefficients.iter().rev().fold(x.modulus().zero(), |acc, &c| acc * x + c)
    }

    /// Points at x = 1..=n.
    pub fn points(&self, n: usize) -> Vec<SharePoint> {
        let p = self.coefficients[0].modulus();
        (1..=n as u32).map(|x| SharePoint::new(x, self.evaluate(p.element(u64::from(x))))).collect()
    }
}

/// Splits `secret` into `n` points, any `threshold` of which reconstruct it.
pub fn share<R: Rng + ?Sized>(
    secret: FieldElement,
    threshold: Threshold,
    n: usize,
    rng: &mut R,
) -> Result<Vec<SharePoint>, ShamirError> {
    check_dimensions(secret.modulus(), threshold, n)?;
    Ok(Polynomial::random(secret, threshold, rng).points(n))
}

pub(crate) fn check_dimensions(p: PrimeModulus, threshold: Threshold, n: usize) -> Result<(), ShamirError> {
    if threshold.get() == 0 || threshold.get() > n {
        return Err(ShamirError::InvalidThreshold { threshold: threshold.get(), players: n });
    }
    if n as u64 >= u64::from(p.get()) {
        return Err(ShamirError::FieldTooSmall { p: p.get(), players: n });
    }
    Ok(())
}

/// Lagrange evaluation at `at` of the unique polynomial through `points`.
///
/// Assumes distinct nonzero abscissas in one field; callers validate.
pub fn interpolate_at(points: &[SharePoint], at: FieldElement) -> FieldElement {
    let p = at.modulus();
    let mut acc = p.zero();
    for (i, pi) in points.iter().enumerate() {
        let xi = p.element(u64::from(pi.x));
        let mut num = p.one();
        let mut den = p.one();
        for (j, pj) in points.iter().enumerate() {
            if i != j {
                let xj = p.element(u64::from(pj.x));
                num = num * (at - xj);
                den = den * (xi - xj);
            }
        }
        acc = acc + pi.y * num * den.inv().expect("distinct abscissas");
    }
    acc
}

/// Lagrange coefficient of abscissa `x` at zero, over the basis `xs`.
pub fn lagrange_coefficient_at_zero(p: PrimeModulus, xs: &[u32], x: u32) -> FieldElement {
    let xi = p.element(u64::from(x));
    xs.iter().filter(|&&xj| xj != x).fold(p.one(), |acc, &xj| {
        let xj = p.element(u64::from(xj));
        acc * xj * (xj - xi).inv().expect("distinct abscissas")
    })
}

/// Reconstructs the shared value from at least `threshold` points.
///
/// Interpolates through the `threshold` points with the smallest abscissas.
/// Any further points must lie on the same polynomial.
pub fn reconstruct(points: &[SharePoint], threshold: Threshold) -> Result<FieldElement, ShamirError> {
    if threshold.get() == 0 {
        return Err(ShamirError::InvalidThreshold { threshold: 0, players: points.len() });
    }
    if points.len() < threshold.get() {
        return Err(ShamirError::InsufficientShares { needed: threshold.get(), got: points.len() });
    }
    let p = points[0].y.modulus();
    if points.iter().any(|pt| pt.y.modulus() != p) {
        return Err(ShamirError::MixedFields);
    }
    let mut sorted = points.to_vec();
    sorted.sort_by_key(|pt| pt.x);
    for pair in sorted.windows(2) {
        if pair[0].x == pair[1].x {
            return Err(ShamirError::InvalidAbscissa(pair[0].x));
        }
    }
    if let Some(bad) = sorted.iter().find(|pt| u64::from(pt.x) % u64::from(p.get()) == 0) {
        return Err(ShamirError::InvalidAbscissa(bad.x));
    }
    let (basis, extra) = sorted.split_at(threshold.get());
    for pt in extra {
        if interpolate_at(basis, p.element(u64::from(pt.x))) != pt.y {
            return Err(ShamirError::InconsistentShares { threshold: threshold.get() });
        }
    }
    Ok(interpolate_at(basis, p.zero()))
}
