mod common;

use algst::gen::syntax;
use algst::parser::{parse_expr, parse_program, parse_type, pretty_expr, pretty_type};
use common::{noise, round_trips, soup, survives};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn corpus_round_trips() {
    let mut n = 0;
    for entry in std::fs::read_dir(common::corpus_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "algst") {
            let (p, diags) = parse_program(&std::fs::read_to_string(&path).unwrap());
            assert!(diags.is_empty(), "{}: {diags:?}", path.display());
            round_trips(&p).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 15);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]

    #[test]
    fn types_round_trip(seed: u64, size in 1usize..24) {
        let t = syntax::ty(&mut ChaCha8Rng::seed_from_u64(seed), size);
        prop_assert_eq!(parse_type(&pretty_type(&t)).ok(), Some(t));
    }

    #[test]
    fn expressions_round_trip(seed: u64, size in 1usize..40) {
        let e = syntax::expr(&mut ChaCha8Rng::seed_from_u64(seed), size);
        prop_assert_eq!(parse_expr(&pretty_expr(&e)).ok(), Some(e));
    }

    #[test]
    fn programs_round_trip(seed: u64, decls in 1usize..6, size in 1usize..30) {
        let p = syntax::program(&mut ChaCha8Rng::seed_from_u64(seed), decls, size);
        prop_assert_eq!(round_trips(&p), Ok(()));
    }

    #[test]
    fn garbage_never_panics(seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        prop_assert_eq!(survives(&noise(&mut rng)), Ok(()));
        prop_assert_eq!(survives(&soup(&mut rng)), Ok(()));
    }
}
