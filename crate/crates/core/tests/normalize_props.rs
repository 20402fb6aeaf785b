//! Normalisation checked against the rewriting oracle on random types.

use algst::ast::{name, Kind, Type};
use algst::conversion::{oracle_conv, Verdict};
use algst::gen::{pair, TypeGen};
use algst::kindcheck::KindContext;
use algst::normalize::{equiv, is_normal, nf_neg, nf_pos};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FUEL: usize = 64;

fn delta() -> KindContext {
    KindContext::default().with(name("a"), Kind::S).with(name("b"), Kind::S).with(name("x"), Kind::T)
}

fn ty(seed: u64, kind: Kind, max: usize) -> Type {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = delta();
    let n = 1 + (seed as usize >> 8) % max;
    TypeGen::new(&d).ty(&mut rng, kind, n)
}

fn any_kind() -> impl Strategy<Value = Kind> {
    prop_oneof![Just(Kind::S), Just(Kind::T), Just(Kind::P)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn nf_is_idempotent(seed: u64, k in any_kind()) {
        let t = ty(seed, k, 16);
        let n = nf_pos(&t);
        prop_assert_eq!(nf_pos(&n), n);
    }

    #[test]
    fn nf_lands_in_the_grammar(seed: u64, k in any_kind()) {
        let t = ty(seed, k, 16);
        prop_assert!(is_normal(&nf_pos(&t)));
        let s = ty(seed, Kind::S, 16);
        prop_assert!(is_normal(&nf_neg(&s)));
    }

    #[test]
    fn nf_is_convertible_to_its_input(seed: u64, k in any_kind()) {
        let t = ty(seed, k, 10);
        prop_assert!(oracle_conv(&delta(), &nf_pos(&t), &t, FUEL).holds(), "{}", t);
        let s = ty(seed, Kind::S, 9);
        prop_assert!(oracle_conv(&delta(), &nf_neg(&s), &Type::dual(s.clone()), FUEL).holds(), "{}", s);
    }

    #[test]
    fn equiv_agrees_with_the_oracle(seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (t, u) = pair(&mut rng, &delta(), 12);
        match oracle_conv(&delta(), &t, &u, FUEL) {
            Verdict::Equivalent(_) => prop_assert!(equiv(&t, &u), "{} vs {}", t, u),
            Verdict::Distinct => prop_assert!(!equiv(&t, &u), "{} vs {}", t, u),
            Verdict::FuelExhausted => {}
        }
    }

    #[test]
    fn dual_is_involutive(seed: u64) {
        let s = ty(seed, Kind::S, 30);
        prop_assert!(equiv(&Type::dual(Type::dual(s.clone())), &s));
    }

    #[test]
    fn negation_is_involutive(seed: u64) {
        let t = ty(seed, Kind::P, 30);
        prop_assert!(equiv(&Type::neg(Type::neg(t.clone())), &t));
    }
}
