//! Every acceptance criterion at full scale, one PASS/FAIL line each.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

mod common;

use std::fs;
use std::time::{Duration, Instant};

use algst::ast::{name, Kind, Type};
use algst::bench::{bench_equiv, with_stack, PairKind};
use algst::conversion::{oracle_conv, Verdict};
use algst::driver::normal_forms;
use algst::gen::{pair, syntax, TypeGen};
use algst::kindcheck::{synth_kind, KindContext};
use algst::normalize::{equiv, is_normal, nf_neg, nf_pos};
use algst::parser::parse_program;
use algst::runtime::{check_preservation, run, Outcome, Policy, RunConfig, SelRule};
use algst::typecheck::check_source;
use common::{ask, depth, noise, preorder, program, random_tree, round_trip, round_trips, runnable, soup, survives, Query};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N: u64 = 10_000;

/// Large enough that the size-capped search always finishes on its own.
const ORACLE_FUEL: usize = 1 << 20;

type Report = Result<String, String>;

fn delta() -> KindContext {
    KindContext::default().with(name("a"), Kind::S).with(name("b"), Kind::S).with(name("x"), Kind::T)
}

fn ty(seed: u64, kind: Kind, max: usize) -> Type {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max);
    TypeGen::new(&delta()).ty(&mut rng, kind, n)
}

fn verdict(ok: bool, detail: String) -> Report {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn worked_example() -> Report {
    let d = KindContext::default();
    let nf = normal_forms("Dual(?(-Int).a)", &d, &[]).map_err(|e| format!("{e:?}"))?;
    let mut times: Vec<Duration> = (0..101)
        .map(|_| {
            let t = Instant::now();
            let _ = std::hint::black_box(normal_forms("Dual(?(-Int).a)", &d, &[]));
            t.elapsed()
        })
        .collect();
    times.sort();
    let median = times[50];
    verdict(
        nf.pos == "?Int.Dual a" && median < Duration::from_millis(1),
        format!("printed `{}`, median {median:?} over 101 runs", nf.pos),
    )
}

fn corpus_files(dir: &str) -> Vec<std::path::PathBuf> {
    let mut v: Vec<_> = fs::read_dir(common::corpus_dir().join(dir))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "algst"))
        .collect();
    v.sort();
    v
}

fn golden_corpus() -> Report {
    let mut clean = 0;
    let mut dirty = Vec::new();
    for f in corpus_files("") {
        let (_, ds) = check_source(&fs::read_to_string(&f).unwrap());
        if ds.is_empty() {
            clean += 1;
        } else {
            dirty.push(f.file_name().unwrap().to_string_lossy().into_owned());
        }
    }
    let mut located = 0;
    let mut unlocated = Vec::new();
    for f in corpus_files("mutations") {
        let (_, ds) = check_source(&fs::read_to_string(&f).unwrap());
        if ds.iter().any(|d| d.is_error() && d.span.line > 0) {
            located += 1;
        } else {
            unlocated.push(f.file_name().unwrap().to_string_lossy().into_owned());
        }
    }
    verdict(
        clean >= 15 && dirty.is_empty() && located >= 10 && unlocated.is_empty(),
        format!("{clean} programs clean {dirty:?}, {located} mutations rejected with a location {unlocated:?}"),
    )
}

fn oracle_agreement() -> Report {
    let start = Instant::now();
    let d = delta();
    let (mut eq, mut distinct, mut disagree, mut exhausted) = (0, 0, Vec::new(), 0);
    for seed in 0..N {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (t, u) = pair(&mut rng, &d, 12);
        assert!(t.size() <= 12 && u.size() <= 12);
        match oracle_conv(&d, &t, &u, ORACLE_FUEL) {
            Verdict::Equivalent(_) if equiv(&t, &u) => eq += 1,
            Verdict::Distinct if !equiv(&t, &u) => distinct += 1,
            Verdict::FuelExhausted => exhausted += 1,
            _ => disagree.push(format!("{t} vs {u}")),
        }
    }
    let took = start.elapsed();
    verdict(
        disagree.is_empty() && exhausted == 0 && took < Duration::from_secs(300),
        format!(
            "{eq} equivalent, {distinct} distinct, {exhausted} undecided, {} disagreements {:?}, {took:.1?}",
            disagree.len(),
            disagree.iter().take(3).collect::<Vec<_>>()
        ),
    )
}

fn linear_time() -> Report {
    let sizes: Vec<usize> = (10..=20).map(|k| 1usize << k).collect();
    let table = with_stack(4096, move || bench_equiv(&sizes, 9, 1));
    let mut ok = true;
    let mut parts = Vec::new();
    for (kind, fit) in [(PairKind::Eq, table.eq), (PairKind::Neq, table.neq)] {
        let ratios = table.ratios(kind, 1 << 13);
        let worst = ratios.iter().map(|(_, r)| *r).fold(0.0, f64::max);
        let shown: Vec<String> = ratios.iter().map(|(n, r)| format!("{}:{r:.2}", n.trailing_zeros())).collect();
        ok &= (fit.slope - 1.0).abs() <= 0.15 && worst <= 2.5;
        parts.push(format!("{kind:?} slope {:.3} (r2 {:.4}) doublings [{}]", fit.slope, fit.r2, shown.join(" ")));
    }
    verdict(ok, parts.join(", "))
}

fn normalization() -> Report {
    let d = delta();
    let kinds = [Kind::S, Kind::T, Kind::P];
    let mut fails = Vec::new();
    let mut sessions = 0;
    for seed in 0..N {
        let k = kinds[(seed % 3) as usize];
        let t = ty(seed, k, 12);
        if synth_kind(&d, &t).is_err() {
            fails.push(format!("ill kinded {t}"));
            continue;
        }
        let n = nf_pos(&t);
        if nf_pos(&n) != n {
            fails.push(format!("not idempotent on {t}"));
        }
        if !is_normal(&n) {
            fails.push(format!("{n} outside the grammar"));
        }
        if !oracle_conv(&d, &n, &t, ORACLE_FUEL).holds() {
            fails.push(format!("nf_pos {t} not convertible"));
        }
        if k == Kind::S {
            sessions += 1;
            let m = nf_neg(&t);
            if !is_normal(&m) || !oracle_conv(&d, &m, &Type::dual(t.clone()), ORACLE_FUEL).holds() {
                fails.push(format!("nf_neg {t} wrong"));
            }
        }
    }
    verdict(
        fails.is_empty(),
        format!("{N} types ({sessions} sessions), {} failures {:?}", fails.len(), fails.iter().take(3).collect::<Vec<_>>()),
    )
}

fn involutions() -> Report {
    let mut fails = Vec::new();
    for seed in 0..N {
        let s = ty(seed, Kind::S, 30);
        if !equiv(&Type::dual(Type::dual(s.clone())), &s) {
            fails.push(format!("Dual Dual {s}"));
        }
        let p = ty(seed, Kind::P, 30);
        if !equiv(&Type::neg(Type::neg(p.clone())), &p) {
            fails.push(format!("--{p}"));
        }
    }
    verdict(fails.is_empty(), format!("{N} session and {N} protocol types, {} failures {:?}", fails.len(), fails.first()))
}

struct Runs {
    runs: usize,
    violations: Vec<String>,
    stuck: Vec<String>,
    mutation_caught: bool,
    deadlock: Outcome,
}

fn preservation_runs() -> Runs {
    let mut r = Runs { runs: 0, violations: Vec::new(), stuck: Vec::new(), mutation_caught: false, deadlock: Outcome::Completed };
    for prog in runnable() {
        let p = program(&prog);
        for seed in 0..10 {
            let cfg = RunConfig { policy: Policy::Random(seed), fuel: 10_000, ..RunConfig::default() };
            let rep = check_preservation(&p, &cfg);
            r.runs += 1;
            if let Some(v) = rep.violations.first() {
                r.violations.push(format!("{prog} seed {seed} step {}: {}", v.step, v.reason));
            }
            if let Outcome::StuckExpr { reason, .. } = &rep.outcome {
                r.stuck.push(format!("{prog} seed {seed}: {reason}"));
            }
        }
    }
    let flipped = RunConfig { sel: SelRule::Flipped, ..RunConfig::default() };
    r.mutation_caught = !check_preservation(&program("arithClient"), &flipped).preserved();
    r.deadlock = run(&program("deadlock"), &RunConfig::default()).outcome;
    r
}

fn preservation(r: &Runs) -> Report {
    verdict(
        r.violations.is_empty() && r.mutation_caught,
        format!(
            "{} runs, {} violations {:?}, flipped selection {}",
            r.runs,
            r.violations.len(),
            r.violations.first(),
            if r.mutation_caught { "caught" } else { "missed" }
        ),
    )
}

fn progress(r: &Runs) -> Report {
    let dead = matches!(r.deadlock, Outcome::Deadlock(_));
    verdict(
        r.stuck.is_empty() && dead,
        format!("{} stuck {:?}, deadlock example ends {}", r.stuck.len(), r.stuck.first(), r.deadlock.name()),
    )
}

fn round_trip_semantics() -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut bad = Vec::new();
    let mut deepest = 0;
    for _ in 0..100 {
        let t = random_tree(&mut rng, 8);
        deepest = deepest.max(depth(&t));
        let mut want = Vec::new();
        preorder(&t, &mut want);
        if round_trip(&t) != Ok(want) {
            bad.push(format!("{t:?}"));
        }
    }
    let mut wrong = Vec::new();
    for _ in 0..100 {
        let q = Query::random(&mut rng);
        let got = ask(q);
        if got != Ok(q.answer()) {
            wrong.push(format!("{q:?} gave {got:?}"));
        }
    }
    verdict(
        bad.is_empty() && wrong.is_empty() && deepest <= 8,
        format!("100 trees (deepest {deepest}), {} lost; 100 queries, {} wrong {:?}", bad.len(), wrong.len(), wrong.first()),
    )
}

fn parser_round_trip() -> Report {
    let mut fails = Vec::new();
    let files = corpus_files("");
    for f in &files {
        let (p, ds) = parse_program(&fs::read_to_string(f).unwrap());
        if !ds.is_empty() {
            fails.push(format!("{}: {ds:?}", f.display()));
        } else if let Err(e) = round_trips(&p) {
            fails.push(e);
        }
    }
    for seed in 0..N {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let decls = rng.gen_range(1..6);
        let size = rng.gen_range(1..30);
        if let Err(e) = round_trips(&syntax::program(&mut rng, decls, size)) {
            fails.push(e);
        }
    }
    // The default hook would print every caught panic.
    let hook = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    let mut crashes = Vec::new();
    for seed in 0..N {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for bytes in [noise(&mut rng), soup(&mut rng)] {
            if let Err(e) = survives(&bytes) {
                crashes.push(e);
            }
        }
    }
    std::panic::set_hook(hook);
    verdict(
        fails.is_empty() && crashes.is_empty(),
        format!(
            "{} corpus files and {N} generated programs, {} mismatches {:?}; {} byte strings, {} crashes {:?}",
            files.len(),
            fails.len(),
            fails.first(),
            2 * N,
            crashes.len(),
            crashes.first()
        ),
    )
}

#[test]
fn acceptance() {
    let mut results: Vec<(&str, Report, Duration)> = Vec::new();
    let mut time = |label: &'static str, f: &mut dyn FnMut() -> Report| {
        let t = Instant::now();
        let r = f();
        let took = t.elapsed();
        let line = match &r {
            Ok(d) => format!("PASS {label}: {d}"),
            Err(d) => format!("FAIL {label}: {d}"),
        };
        println!("{line} [{took:.1?}]");
        results.push((label, r, took));
    };
    // Timing first, while nothing else has warmed or fragmented the heap.
    time("4 linear time", &mut linear_time);
    time("1 worked example", &mut worked_example);
    time("2 golden corpus", &mut golden_corpus);
    time("3 oracle agreement", &mut oracle_agreement);
    time("5 normalization", &mut normalization);
    time("6 involutions", &mut involutions);
    let runs = preservation_runs();
    time("7 preservation", &mut || preservation(&runs));
    time("8 progress", &mut || progress(&runs));
    time("9 round-trip semantics", &mut round_trip_semantics);
    time("10 parser round trip", &mut parser_round_trip);
    let failed: Vec<&str> = results.iter().filter(|r| r.1.is_err()).map(|r| r.0).collect();
    assert!(failed.is_empty(), "failed: {failed:?}");
}
