//! Prime-field arithmetic over GF(p) for p < 2^32.
//!
//! Every share, mask, indicator and MAC tag in the protocol lives in a single
//! field. Elements carry their modulus so that mixing two fields is caught
//! instead of silently producing garbage.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest prime below 2^32.
pub const MAX_PRIME: u32 = 4_294_967_291;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("zero has no multiplicative inverse")]
    InvalidOperand,
    #[error("operands belong to different fields (p = {left} vs p = {right})")]
    ModulusMismatch { left: u32, right: u32 },
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("no prime at least {0} fits in 32 bits")]
    OutOfRange(u64),
    #[error("value {value} is not reduced modulo {modulus}")]
    Unreduced { value: u64, modulus: u32 },
}

/// A prime modulus, checked at construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct PrimeModulus(u32);

impl PrimeModulus {
    pub fn new(p: u32) -> Result<Self, FieldError> {
        if is_prime(u64::from(p)) {
            Ok(Self(p))
        } else {
            Err(FieldError::NotPrime(u64::from(p)))
        }
    }

    #[inline]
    pub fn get(self) -> u32 {
        self.0
    }

    /// Element with the given representative, reduced modulo p.
    #[inline]
    pub fn element(self, value: u64) -> FieldElement {
        FieldElement { value: (value % u64::from(self.0)) as u32, modulus: self }
    }

    /// Element from an already-reduced value.
    pub fn try_element(self, value: u64) -> Result<FieldElement, FieldError> {
        if value < u64::from(self.0) {
            Ok(FieldElement { value: value as u32, modulus: self })
        } else {
            Err(FieldError::Unreduced { value, modulus: self.0 })
        }
    }

    #[inline]
    pub fn zero(self) -> FieldElement {
        FieldElement { value: 0, modulus: self }
    }

    #[inline]
    pub fn one(self) -> FieldElement {
        FieldElement { value: 1, modulus: self }
    }

    /// Number of bits needed for any reduced value, i.e. ⌈log₂ p⌉.
    pub fn bit_width(self) -> u32 {
        u32::BITS - (self.0 - 1).leading_zeros()
    }

    /// Width in bytes of one serialized element.
    pub fn byte_width(self) -> usize {
        self.bit_width().div_ceil(8) as usize
    }

    pub fn elements(self) -> impl Iterator<Item = FieldElement> {
        (0..self.0).map(move |value| FieldElement { value, modulus: self })
    }
}

impl TryFrom<u32> for PrimeModulus {
    type Error = FieldError;

    fn try_from(p: u32) -> Result<Self, FieldError> {
        Self::new(p)
    }
}

impl From<PrimeModulus> for u32 {
    fn from(p: PrimeModulus) -> u32 {
        p.0
    }
}

impl fmt::Display for PrimeModulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An element of GF(p). Invariant: `value < modulus`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldElement {
    value: u32,
    modulus: PrimeModulus,
}

/// Arithmetic selector for [`field_arith`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldOp {
    Add,
    Sub,
    Mul,
    /// Inverse of the left operand; the right operand is ignored beyond the modulus check.
    Inv,
    /// Left operand raised to the right operand's representative.
    Pow,
}

impl FieldElement {
    #[inline]
    pub fn value(self) -> u32 {
        self.value
    }

    #[inline]
    pub fn modulus(self) -> PrimeModulus {
        self.modulus
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.value == 0
    }

    fn same_field(self, other: Self) -> Result<(), FieldError> {
        if self.modulus == other.modulus {
            Ok(())
        } else {
            Err(FieldError::ModulusMismatch { left: self.modulus.0, right: other.modulus.0 })
        }
    }

    pub fn try_add(self, rhs: Self) -> Result<Self, FieldError> {
        self.same_field(rhs)?;
        let p = u64::from(self.modulus.0);
        let sum = (u64::from(self.value) + u64::from(rhs.value)) % p;
        Ok(Self { value: sum as u32, modulus: self.modulus })
    }

    pub fn try_sub(self, rhs: Self) -> Result<Self, FieldError> {
        self.same_field(rhs)?;
        let p = u64::from(self.modulus.0);
        let diff = (u64::from(self.value) + p - u64::from(rhs.value)) % p;
        Ok(Self { value: diff as u32, modulus: self.modulus })
    }

    pub fn try_mul(self, rhs: Self) -> Result<Self, FieldError> {
        self.same_field(rhs)?;
        let p = u64::from(self.modulus.0);
        let prod = (u64::from(self.value) * u64::from(rhs.value)) % p;
        Ok(Self { value: prod as u32, modulus: self.modulus })
    }

    pub fn pow(self, exp: u64) -> Self {
        Self { value: pow_mod(u64::from(self.value), exp, u64::from(self.modulus.0)) as u32, modulus: self.modulus }
    }

    /// Multiplicative inverse via Fermat's little theorem.
    pub fn inv(self) -> Result<Self, FieldError> {
        if self.value == 0 {
            return Err(FieldError::InvalidOperand);
        }
        Ok(self.pow(u64::from(self.modulus.0) - 2))
    }

    pub fn try_div(self, rhs: Self) -> Result<Self, FieldError> {
        self.same_field(rhs)?;
        self.try_mul(rhs.inv()?)
    }

    /// Fixed-width big-endian encoding, `modulus.byte_width()` bytes.
    pub fn write_be(self, out: &mut Vec<u8>) {
        let width = self.modulus.byte_width();
        out.extend_from_slice(&self.value.to_be_bytes()[4 - width..]);
    }

    /// Decodes a fixed-width big-endian element, rejecting unreduced values.
    pub fn read_be(modulus: PrimeModulus, bytes: &[u8]) -> Result<Self, FieldError> {
        let value = bytes.iter().fold(0u64, |acc, &b| (acc << 8) | u64::from(b));
        modulus.try_element(value)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

/// Exact modular arithmetic on two elements of the same field.
pub fn field_arith(a: FieldElement, b: FieldElement, op: FieldOp) -> Result<FieldElement, FieldError> {
    match op {
        FieldOp::Add => a.try_add(b),
        FieldOp::Sub => a.try_sub(b),
        FieldOp::Mul => a.try_mul(b),
        FieldOp::Inv => {
            a.same_field(b)?;
            a.inv()
        }
        FieldOp::Pow => {
            a.same_field(b)?;
            Ok(a.pow(u64::from(b.value)))
        }
    }
}

// Operator sugar for internal use where both operands provably share a field.
// Panics on mismatch; the fallible `try_*` methods are the checked surface.

impl Add for FieldElement {
    type Output = FieldElement;
    fn add(self, rhs: Self) -> Self {
        self.try_add(rhs).expect("field modulus mismatch")
    }
}

impl Sub for FieldElement {
    type Output = FieldElement;
    fn sub(self, rhs: Self) -> Self {
        self.try_sub(rhs).expect("field modulus mismatch")
    }
}

impl Mul for FieldElement {
    type Output = FieldElement;
    fn mul(self, rhs: Self) -> Self {
        self.try_mul(rhs).expect("field modulus mismatch")
    }
}

impl Neg for FieldElement {
    type Output = FieldElement;
    fn neg(self) -> Self {
        self.modulus.zero() - self
    }
}

fn pow_mod(mut base: u64, mut exp: u64, p: u64) -> u64 {
    let mut acc = 1 % p;
    base %= p;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % p;
        }
        base = base * base % p;
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin; bases {2, 7, 61} are exact below 2^32.
pub fn is_prime(n: u64) -> bool {
    assert!(n <= u64::from(u32::MAX), "primality test limited to 32-bit inputs");
    if n < 2 {
        return false;
    }
    for small in [2u64, 3, 5, 7, 11, 13, 61] {
        if n.is_multiple_of(small) {
            return n == small;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 7, 61] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = x * x % n;
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Smallest prime `>= lower`.
pub fn smallest_prime_at_least(lower: u64) -> Result<PrimeModulus, FieldError> {
    if lower > u64::from(MAX_PRIME) {
        return Err(FieldError::OutOfRange(lower));
    }
    let mut candidate = lower.max(2);
    while !is_prime(candidate) {
        candidate += 1;
    }
    Ok(PrimeModulus(candidate as u32))
}

/// Uniform element of GF(p).
pub fn sample_uniform<R: Rng + ?Sized>(rng: &mut R, p: PrimeModulus) -> FieldElement {
    FieldElement { value: rng.random_range(0..p.0), modulus: p }
}
