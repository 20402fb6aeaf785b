mod common;

use algst::runtime::{check_preservation, run, Outcome, Policy, RunConfig, SelRule};
use common::{ask, depth, preorder, program, random_tree, round_trip, runnable, Query};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn preservation_holds_on_the_corpus() {
    let names = runnable();
    assert!(names.len() >= 6, "{names:?}");
    for name in names {
        let p = program(&name);
        for seed in 0..3 {
            let cfg = RunConfig { policy: Policy::Random(seed), fuel: 2000, ..RunConfig::default() };
            let r = check_preservation(&p, &cfg);
            assert!(r.preserved(), "{name} seed {seed}: {:?}", r.violations);
            assert!(!matches!(r.outcome, Outcome::StuckExpr { .. }), "{name}: {:?}", r.outcome);
        }
    }
}

#[test]
fn flipped_selection_rule_is_caught() {
    let cfg = RunConfig { sel: SelRule::Flipped, ..RunConfig::default() };
    let r = check_preservation(&program("arithClient"), &cfg);
    assert!(!r.preserved());
}

#[test]
fn cross_wait_deadlocks_with_witness() {
    let r = run(&program("deadlock"), &RunConfig::default());
    let Outcome::Deadlock(w) = r.outcome else { panic!("{:?}", r.outcome) };
    assert_eq!(w.len(), 2);
    assert!(w.iter().all(|b| !b.offers.is_empty()), "{w:?}");
}

#[test]
fn round_robin_is_deterministic() {
    let p = program("toolboxClient");
    let cfg = RunConfig { trace: true, ..RunConfig::default() };
    let a = run(&p, &cfg);
    let b = run(&p, &cfg);
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.outcome, Outcome::Completed);
    assert_eq!(a.output, ["55"]);
}

#[test]
fn trees_survive_the_channel() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10 {
        let t = random_tree(&mut rng, 5);
        assert!(depth(&t) <= 5);
        let mut want = Vec::new();
        preorder(&t, &mut want);
        assert_eq!(round_trip(&t), Ok(want));
    }
}

#[test]
fn arithmetic_server_answers() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let q = Query::random(&mut rng);
        assert_eq!(ask(q), Ok(q.answer()), "{q:?}");
    }
}
