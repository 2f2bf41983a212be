use std::sync::Arc;

use proptest::prelude::*;
use proptest::sample::subsequence;
use rsslab::channel::{run_simulation, SchedulerPolicy};
use rsslab::dealer::{deal, DealerParams, PlayerShare};
use rsslab::field::{is_prime, smallest_prime_at_least};
use rsslab::itmac::{keygen, mac, verify, Tag};
use rsslab::player::player_init;
use rsslab::rng::seeded;
use rsslab::shamir::{reconstruct, share, Threshold};
use rsslab::{FieldElement, PrimeModulus};

fn modulus() -> impl Strategy<Value = PrimeModulus> {
    prop_oneof![Just(2u64), Just(7), Just(101), Just(65_537), 2u64..4_000_000_000]
        .prop_map(|lo| smallest_prime_at_least(lo).unwrap())
}

fn elements(count: usize) -> impl Strategy<Value = (PrimeModulus, Vec<FieldElement>)> {
    modulus().prop_flat_map(move |p| {
        prop::collection::vec(0..u64::from(p.get()), count)
            .prop_map(move |vs| (p, vs.into_iter().map(|v| p.element(v)).collect()))
    })
}

proptest! {
    #[test]
    fn field_laws((p, v) in elements(3)) {
        let (a, b, c) = (v[0], v[1], v[2]);
        prop_assert_eq!(a + b, b + a);
        prop_assert_eq!(a * b, b * a);
        prop_assert_eq!((a + b) + c, a + (b + c));
        prop_assert_eq!((a * b) * c, a * (b * c));
        prop_assert_eq!(a * (b + c), a * b + a * c);
        prop_assert_eq!(a + p.zero(), a);
        prop_assert_eq!(a * p.one(), a);
        prop_assert_eq!(a - a, p.zero());
        prop_assert_eq!(a + (-a), p.zero());
        if !a.is_zero() {
            prop_assert_eq!(a * a.inv().unwrap(), p.one());
        } else {
            prop_assert!(a.inv().is_err());
        }
    }

    #[test]
    fn field_matches_wide_integers((p, v) in elements(2)) {
        let q = u128::from(p.get());
        let (a, b) = (u128::from(v[0].value()), u128::from(v[1].value()));
        prop_assert_eq!(u128::from((v[0] * v[1]).value()), a * b % q);
        prop_assert_eq!(u128::from((v[0] - v[1]).value()), (a + q - b) % q);
    }

    #[test]
    fn serialization_roundtrip((p, v) in elements(1)) {
        let mut out = Vec::new();
        v[0].write_be(&mut out);
        prop_assert_eq!(out.len(), p.byte_width());
        prop_assert_eq!(FieldElement::read_be(p, &out).unwrap(), v[0]);
    }

    #[test]
    fn prime_search_returns_primes(lo in 2u64..1_000_000) {
        let p = smallest_prime_at_least(lo).unwrap();
        prop_assert!(is_prime(u64::from(p.get())));
        prop_assert!((lo..u64::from(p.get())).all(|x| !is_prime(x)));
    }

    #[test]
    fn shamir_any_threshold_subset_reconstructs(
        n in 1usize..9,
        t_frac in 0.0f64..1.0,
        secret in any::<u64>(),
        seed in any::<u64>(),
        pick in any::<u64>(),
    ) {
        let p = PrimeModulus::new(101).unwrap();
        let t = 1 + ((n as f64 * t_frac) as usize).min(n - 1);
        let pts = share(p.element(secret), Threshold(t), n, &mut seeded(seed)).unwrap();
        // A subset of size >= t chosen by the bits of `pick`.
        let mut chosen: Vec<_> = pts.iter().enumerate().filter(|(i, _)| pick >> i & 1 == 1).map(|(_, q)| *q).collect();
        for q in &pts {
            if chosen.len() >= t {
                break;
            }
            if !chosen.contains(q) {
                chosen.push(*q);
            }
        }
        prop_assert_eq!(reconstruct(&chosen, Threshold(t)).unwrap(), p.element(secret));
    }

    #[test]
    fn shamir_subsets_by_sampling(
        idx in subsequence((0..6usize).collect::<Vec<_>>(), 3..=6),
        seed in any::<u64>(),
    ) {
        let p = PrimeModulus::new(65_537).unwrap();
        let secret = p.element(seed % 65_537);
        let pts = share(secret, Threshold(3), 6, &mut seeded(seed)).unwrap();
        let chosen: Vec<_> = idx.iter().map(|&i| pts[i]).collect();
        prop_assert_eq!(reconstruct(&chosen, Threshold(3)).unwrap(), secret);
    }

    #[test]
    fn mac_roundtrip((p, v) in elements(4), seed in any::<u64>(), len in 1usize..=3) {
        let key = keygen(&mut seeded(seed), p);
        let tag = mac(&key, &v[..len]).unwrap();
        prop_assert!(verify(&key, &v[..len], tag));
        let bumped = Tag(tag.0 + p.one());
        prop_assert!(p.get() == 2 && bumped == tag || !verify(&key, &v[..len], bumped));
        prop_assert!(mac(&key, &v).is_err());
    }

    #[test]
    fn share_format_roundtrip(seed in any::<u64>(), n in 4usize..7, beta in 0.1f64..0.6) {
        let params = DealerParams { secret: 1, beta, m: n - 1, k: 2, n, secret_set_size: 3, seed };
        let dealt = deal(&params).unwrap();
        for s in &dealt.shares {
            let bytes = s.to_bytes();
            prop_assert_eq!(bytes.len(), s.serialized_len());
            prop_assert_eq!(&PlayerShare::from_bytes(&bytes).unwrap(), s);
            prop_assert!(PlayerShare::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        }
    }

    #[test]
    fn honest_outcome_is_schedule_independent(seed in any::<u64>(), sched in any::<u64>(), secret in 0u32..4) {
        let params = DealerParams { secret, beta: 0.3, m: 3, k: 2, n: 4, secret_set_size: 4, seed };
        let dealt = deal(&params).unwrap();
        let mut agents: Vec<_> = dealt.shares.iter().map(|s| player_init(s.owner, Arc::new(s.clone())).0).collect();
        let t = run_simulation(&mut agents, &SchedulerPolicy::random(sched, 4), 1_000_000).unwrap();
        let y = dealt.truth.secret_element();
        prop_assert!(t.outputs.iter().all(|o| *o == Some(y)));
    }
}
