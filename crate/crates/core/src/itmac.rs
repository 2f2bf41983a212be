//! One-time information-theoretic MAC over the protocol field.
//!
//! A key `(a, b)` authenticates a single payload `m₁..m_L` with the tag
//! `b + Σ mᵢ·aⁱ`. Without the key, substituting any other payload/tag pair is
//! accepted with probability at most `L/p`.

use rand::Rng;
use thiserror::Error;

use crate::field::{sample_uniform, FieldElement, PrimeModulus};

/// Longest payload any protocol message carries.
pub const MAX_PAYLOAD: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MacError {
    #[error("payload length {0} outside 1..={MAX_PAYLOAD}")]
    InvalidPayload(usize),
}

/// Receiver-held verification key for one (sender, receiver, game, stage) slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MacKey {
    pub a: FieldElement,
    pub b: FieldElement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Tag(pub FieldElement);

pub fn keygen<R: Rng + ?Sized>(rng: &mut R, p: PrimeModulus) -> MacKey {
    let a = sample_uniform(rng, p);
    let b = sample_uniform(rng, p);
    MacKey { a, b }
}

pub fn mac(key: &MacKey, payload: &[FieldElement]) -> Result<Tag, MacError> {
    if payload.is_empty() || payload.len() > MAX_PAYLOAD {
        return Err(MacError::InvalidPayload(payload.len()));
    }
    let mut power = key.a;
    let mut acc = key.b;
    for &m in payload {
        acc = acc + m * power;
        power = power * key.a;
    }
    Ok(Tag(acc))
}

/// `true` iff `tag` is the MAC of `payload`. Malformed payloads never verify.
pub fn verify(key: &MacKey, payload: &[FieldElement], tag: Tag) -> bool {
    mac(key, payload).is_ok_and(|expected| expected == tag && tag.0.modulus() == key.a.modulus())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn p7() -> PrimeModulus {
        PrimeModulus::new(7).unwrap()
    }

    #[test]
    fn hand_evaluations() {
        let p = p7();
        let id = MacKey { a: p.one(), b: p.zero() };
        assert_eq!(mac(&id, &[p.element(4)]).unwrap(), Tag(p.element(4)));

        let constant = MacKey { a: p.zero(), b: p.element(6) };
        assert_eq!(mac(&constant, &[p.element(3), p.element(2)]).unwrap(), Tag(p.element(6)));

        let key = MacKey { a: p.element(2), b: p.one() };
        assert_eq!(mac(&key, &[p.element(3), p.element(5)]).unwrap(), Tag(p.element(6)));
    }

    #[test]
    fn payload_length_is_checked() {
        let key = keygen(&mut seeded(0), p7());
        assert_eq!(mac(&key, &[]), Err(MacError::InvalidPayload(0)));
        assert_eq!(mac(&key, &[p7().one(); 4]), Err(MacError::InvalidPayload(4)));
        assert!(!verify(&key, &[], Tag(p7().zero())));
    }

    #[test]
    fn keygen_is_reproducible() {
        assert_eq!(keygen(&mut seeded(5), p7()), keygen(&mut seeded(5), p7()));
    }

    #[test]
    fn round_trip_and_perturbation() {
        let p = PrimeModulus::new(101).unwrap();
        let mut rng = seeded(17);
        for _ in 0..200 {
            let key = keygen(&mut rng, p);
            let payload = [sample_uniform(&mut rng, p), sample_uniform(&mut rng, p)];
            let tag = mac(&key, &payload).unwrap();
            assert!(verify(&key, &payload, tag));
            assert!(!verify(&key, &payload, Tag(tag.0 + p.one())));
        }
    }

    #[test]
    fn key_component_is_uniform() {
        let p = PrimeModulus::new(101).unwrap();
        let draws = 10_000;
        let mut counts = vec![0u32; 101];
        let mut rng = seeded(99);
        for _ in 0..draws {
            counts[keygen(&mut rng, p).a.value() as usize] += 1;
        }
        let expected = f64::from(draws) / 101.0;
        let chi2: f64 = counts.iter().map(|&c| (f64::from(c) - expected).powi(2) / expected).sum();
        // 100 degrees of freedom.
        assert!(chi2 < 100.0 + 4.0 * 200f64.sqrt(), "chi2 = {chi2}");
    }
}
