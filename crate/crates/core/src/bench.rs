//! Random equivalence instances and the timing harness for `equiv`.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`). A seed is split into
//! independent streams with `set_stream`, one per purpose, so that the
//! equivalent and non-equivalent variants of an instance do not depend on
//! each other.
//!
//! Instance types grow deep: a session of 2^20 nodes has a spine of a few
//! hundred thousand messages. Generation and rewriting walk the spine with
//! loops, but kind checking and dropping such a type recurse, so callers at
//! that scale should run on a thread with a large stack (see [`with_stack`]).

use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ast::{name, CtorDecl, Kind, Name, ProtocolDecl, Type, BASE_TYPES};
use crate::kindcheck::{check_kind, Decls, KindContext};
use crate::normalize::equiv;

const INSTANCE: u64 = 0;
const EQUIVALENT: u64 = 1;
const DISTINCT: u64 = 2;

/// Largest payload of one message in a generated session.
const MAX_PAYLOAD: usize = 8;

fn stream(seed: u64, s: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(s);
    rng
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub decls: Arc<Decls>,
    /// A session type built from messages and a terminator.
    pub subject: Type,
    pub size: usize,
}

impl Instance {
    pub fn context(&self) -> KindContext {
        KindContext::new(self.decls.clone())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GenConfig {
    /// Forbid polymorphic and nested recursion in declarations and keep
    /// negation at the top of constructor arguments. Off only for self
    /// tests.
    pub restricted: bool,
}

impl Default for GenConfig {
    fn default() -> GenConfig {
        GenConfig { restricted: true }
    }
}

pub fn gen_instance(seed: u64, target_size: usize) -> Instance {
    gen_instance_with(seed, target_size, GenConfig::default())
}

/// An instance whose subject has exactly `target_size` nodes (at least 3).
pub fn gen_instance_with(seed: u64, target_size: usize, cfg: GenConfig) -> Instance {
    assert!(target_size >= 3, "instances need at least three nodes");
    let mut rng = stream(seed, INSTANCE);
    for _ in 0..8 {
        let decls = Arc::new(gen_decls(&mut rng, cfg));
        let subject = gen_session(&mut rng, &decls, target_size);
        if check_kind(&KindContext::new(decls.clone()), &subject, Kind::S).is_ok() {
            return Instance { decls, size: subject.size(), subject };
        }
    }
    unreachable!("generated instances are well kinded")
}

/// Protocol `P0` always takes one parameter so payloads of any size exist.
fn gen_decls(rng: &mut ChaCha8Rng, cfg: GenConfig) -> Decls {
    let count = rng.gen_range(1..=4);
    let arity: Vec<usize> = (0..count).map(|i| if i == 0 { 1 } else { rng.gen_range(0..=1) }).collect();
    let mut decls = Decls::default();
    for i in 0..count {
        let params: Vec<Name> = (0..arity[i]).map(|_| name("a")).collect();
        let ctors = (0..rng.gen_range(1..=4))
            .map(|c| CtorDecl {
                tag: name(&format!("C{i}x{c}")),
                payload: (0..rng.gen_range(0..=3))
                    .map(|_| {
                        let arg = ctor_arg(rng, &arity, !params.is_empty(), cfg);
                        if rng.gen_bool(0.2) {
                            Type::neg(arg)
                        } else {
                            arg
                        }
                    })
                    .collect(),
            })
            .collect();
        decls.insert(ProtocolDecl { name: proto_name(i), params, ctors, is_data: false });
    }
    decls
}

fn proto_name(i: usize) -> Name {
    name(&format!("P{i}"))
}

/// Restricted arguments to a protocol reference are the parameter itself or
/// a base type, which rules out both polymorphic and nested recursion.
fn ctor_arg(rng: &mut ChaCha8Rng, arity: &[usize], has_param: bool, cfg: GenConfig) -> Type {
    let simple = |rng: &mut ChaCha8Rng| {
        if has_param && rng.gen_bool(0.5) {
            Type::var("a")
        } else {
            Type::base(BASE_TYPES.choose(rng).unwrap())
        }
    };
    match rng.gen_range(0..3) {
        0 => simple(rng),
        _ => {
            let j = rng.gen_range(0..arity.len());
            let args = (0..arity[j])
                .map(|_| {
                    if !cfg.restricted && rng.gen_bool(0.5) {
                        let inner = ctor_arg(rng, arity, has_param, cfg);
                        if rng.gen_bool(0.3) {
                            Type::neg(inner)
                        } else {
                            inner
                        }
                    } else {
                        simple(rng)
                    }
                })
                .collect();
            Type::Proto(proto_name(j), args)
        }
    }
}

fn gen_session(rng: &mut ChaCha8Rng, decls: &Decls, target: usize) -> Type {
    let mut sizes = Vec::new();
    // One node for the terminator, one per message, the rest in payloads.
    let mut rem = target - 1;
    while rem > 0 {
        let hi = MAX_PAYLOAD.min(rem - 1);
        let mut p = rng.gen_range(1..=hi);
        if rem - 1 - p == 1 {
            p = if p < hi { p + 1 } else { p - 1 };
        }
        sizes.push(p);
        rem -= 1 + p;
    }
    let mut s = if rng.gen_bool(0.5) { Type::EndWait } else { Type::EndTerm };
    let msgs: Vec<(bool, Type)> = sizes.iter().map(|&p| (rng.gen_bool(0.5), payload(rng, decls, p))).collect();
    for (input, t) in msgs.into_iter().rev() {
        s = if input { Type::input(t, s) } else { Type::output(t, s) };
    }
    s
}

fn leaf(rng: &mut ChaCha8Rng, decls: &Decls) -> Type {
    let mut nullary: Vec<&Name> =
        decls.protocols.values().filter(|p| p.params.is_empty()).map(|p| &p.name).collect();
    nullary.sort();
    match rng.gen_range(0..6) {
        0 => Type::Unit,
        1 if !nullary.is_empty() => Type::Proto((*nullary.choose(rng).unwrap()).clone(), vec![]),
        2 => {
            if rng.gen_bool(0.5) {
                Type::EndWait
            } else {
                Type::EndTerm
            }
        }
        _ => Type::base(BASE_TYPES.choose(rng).unwrap()),
    }
}

/// A payload (kind P) of exactly `n` nodes.
fn payload(rng: &mut ChaCha8Rng, decls: &Decls, n: usize) -> Type {
    match n {
        1 => leaf(rng, decls),
        2 => match rng.gen_range(0..3) {
            0 => Type::neg(leaf(rng, decls)),
            _ => Type::proto("P0", vec![leaf(rng, decls)]),
        },
        _ => match rng.gen_range(0..4) {
            0 => Type::neg(payload(rng, decls, n - 1)),
            1 => {
                let l = rng.gen_range(1..n - 1);
                Type::pair(data(rng, decls, l), data(rng, decls, n - 1 - l))
            }
            _ => Type::proto("P0", vec![payload(rng, decls, n - 1)]),
        },
    }
}

/// A type of kind at most T, of exactly `n` nodes.
fn data(rng: &mut ChaCha8Rng, decls: &Decls, n: usize) -> Type {
    if n < 3 {
        return leaf_chain(rng, decls, n);
    }
    let l = rng.gen_range(1..n - 1);
    Type::pair(data(rng, decls, l), data(rng, decls, n - 1 - l))
}

fn leaf_chain(rng: &mut ChaCha8Rng, decls: &Decls, n: usize) -> Type {
    match n {
        1 => {
            let t = leaf(rng, decls);
            if matches!(t, Type::Proto(..)) {
                Type::int()
            } else {
                t
            }
        }
        _ => Type::dual(if rng.gen_bool(0.5) { Type::EndWait } else { Type::EndTerm }),
    }
}

/// A session's spine: the messages in order and the terminator.
fn spine(t: &Type) -> (Vec<(bool, &Type)>, &Type) {
    let mut msgs = Vec::new();
    let mut t = t;
    loop {
        match t {
            Type::In(p, s) => {
                msgs.push((true, &**p));
                t = s;
            }
            Type::Out(p, s) => {
                msgs.push((false, &**p));
                t = s;
            }
            _ => return (msgs, t),
        }
    }
}

fn rebuild(msgs: Vec<(bool, Type)>, end: Type) -> Type {
    let mut s = end;
    for (input, p) in msgs.into_iter().rev() {
        s = if input { Type::input(p, s) } else { Type::output(p, s) };
    }
    s
}

pub fn gen_equivalent(i: &Instance, seed: u64) -> Type {
    let mut rng = stream(seed, EQUIVALENT);
    let budget = rng.gen_range(0..=2 * i.size);
    rewrite(&mut rng, &i.subject, budget)
}

/// Applies at most `budget` conversion rules backwards to the spine and
/// payloads of `t`. The result is convertible to `t`.
pub fn gen_equivalent_with(i: &Instance, seed: u64, budget: usize) -> Type {
    rewrite(&mut stream(seed, EQUIVALENT), &i.subject, budget)
}

fn rewrite(rng: &mut ChaCha8Rng, t: &Type, budget: usize) -> Type {
    let (msgs, end) = spine(t);
    let mut left = budget;
    let mut spend = |rng: &mut ChaCha8Rng, p: f64| {
        if left > 0 && rng.gen_bool(p) {
            left -= 1;
            true
        } else {
            false
        }
    };
    // First pass, top down: decide where a `Dual` starts. `flip` is whether
    // the suffix from here must come out as the dual of the original.
    let mut flip = false;
    let mut plan = Vec::with_capacity(msgs.len());
    for (input, p) in &msgs {
        let mut duals = 0;
        while spend(rng, 0.15) {
            duals += 1;
            flip = !flip;
        }
        // Under a dual the direction is swapped but the payload is not.
        let mut dir_in = *input != flip;
        let mut pay = payload_variant(rng, p, &mut spend);
        if spend(rng, 0.2) {
            dir_in = !dir_in;
            pay = Type::neg(pay);
        }
        plan.push((duals, dir_in, pay));
    }
    let mut end_duals = 0;
    while spend(rng, 0.3) {
        end_duals += 1;
        flip = !flip;
    }
    let end = match (end, flip) {
        (Type::EndWait, true) => Type::EndTerm,
        (Type::EndTerm, true) => Type::EndWait,
        (e, _) => e.clone(),
    };
    // Second pass, bottom up.
    let mut s = end;
    for _ in 0..end_duals {
        s = Type::dual(s);
    }
    for (duals, dir_in, pay) in plan.into_iter().rev() {
        s = if dir_in { Type::input(pay, s) } else { Type::output(pay, s) };
        for _ in 0..duals {
            s = Type::dual(s);
        }
    }
    s
}

/// Rewrites a payload at P positions (`--t`) and sessions inside it
/// (`Dual Dual s`). Payloads are small, so plain recursion is fine.
fn payload_variant(rng: &mut ChaCha8Rng, t: &Type, spend: &mut impl FnMut(&mut ChaCha8Rng, f64) -> bool) -> Type {
    fn go(
        rng: &mut ChaCha8Rng,
        t: &Type,
        at_p: bool,
        spend: &mut impl FnMut(&mut ChaCha8Rng, f64) -> bool,
    ) -> Type {
        let inner = match t {
            Type::Proto(n, args) => Type::Proto(n.clone(), args.iter().map(|a| go(rng, a, true, spend)).collect()),
            Type::Pair(a, b) => Type::pair(go(rng, a, false, spend), go(rng, b, false, spend)),
            Type::Neg(a) => Type::neg(go(rng, a, true, spend)),
            Type::EndWait | Type::EndTerm if spend(rng, 0.2) => Type::dual(Type::dual(t.clone())),
            _ => t.clone(),
        };
        if at_p && spend(rng, 0.1) {
            Type::neg(Type::neg(inner))
        } else {
            inner
        }
    }
    go(rng, t, true, spend)
}

/// One local change that breaks equivalence, checked before returning.
pub fn gen_nonequivalent(i: &Instance, seed: u64) -> Type {
    let mut rng = stream(seed, DISTINCT);
    loop {
        let t = mutate(&mut rng, &i.subject);
        if !equiv(&i.subject, &t) {
            return t;
        }
    }
}

fn mutate(rng: &mut ChaCha8Rng, t: &Type) -> Type {
    let (msgs, end) = spine(t);
    let mut msgs: Vec<(bool, Type)> = msgs.into_iter().map(|(d, p)| (d, p.clone())).collect();
    let mut end = end.clone();
    match rng.gen_range(0..3) {
        0 if !msgs.is_empty() => {
            let k = rng.gen_range(0..msgs.len());
            let p = std::mem::replace(&mut msgs[k].1, Type::Unit);
            msgs[k].1 = Type::forall("q", Kind::S, p);
        }
        1 if !msgs.is_empty() => {
            let k = rng.gen_range(0..msgs.len());
            msgs[k].1 = replace_leaf(rng, &msgs[k].1);
        }
        _ => {
            end = match end {
                Type::EndWait => Type::EndTerm,
                _ => Type::EndWait,
            }
        }
    }
    rebuild(msgs, end)
}

/// Swaps one base type, `Unit` or terminator for a different one.
fn replace_leaf(rng: &mut ChaCha8Rng, t: &Type) -> Type {
    let leaves = count_leaves(t);
    let target = rng.gen_range(0..leaves);
    let mut seen = 0;
    swap_nth(rng, t, target, &mut seen)
}

fn count_leaves(t: &Type) -> usize {
    match t {
        Type::Unit | Type::Base(_) | Type::EndWait | Type::EndTerm => 1,
        Type::Proto(_, args) if args.is_empty() => 1,
        Type::Pair(a, b) => count_leaves(a) + count_leaves(b),
        Type::Neg(a) | Type::Dual(a) | Type::Forall(_, _, a) => count_leaves(a),
        Type::Proto(_, args) => args.iter().map(count_leaves).sum(),
        _ => 0,
    }
}

fn swap_nth(rng: &mut ChaCha8Rng, t: &Type, n: usize, seen: &mut usize) -> Type {
    match t {
        Type::Proto(_, args) if args.is_empty() => {
            *seen += 1;
            if *seen - 1 == n {
                Type::int()
            } else {
                t.clone()
            }
        }
        Type::Unit | Type::Base(_) | Type::EndWait | Type::EndTerm => {
            let here = *seen == n;
            *seen += 1;
            if !here {
                return t.clone();
            }
            let options = [Type::Unit, Type::int(), Type::base("Char"), Type::base("String")];
            match t {
                Type::EndWait => Type::EndTerm,
                Type::EndTerm => Type::EndWait,
                _ => {
                    let others: Vec<&Type> = options.iter().filter(|o| *o != t).collect();
                    (*others.choose(rng).unwrap()).clone()
                }
            }
        }
        Type::Pair(a, b) => {
            let a = swap_nth(rng, a, n, seen);
            Type::pair(a, swap_nth(rng, b, n, seen))
        }
        Type::Neg(a) => Type::neg(swap_nth(rng, a, n, seen)),
        Type::Dual(a) => Type::dual(swap_nth(rng, a, n, seen)),
        Type::Forall(v, k, a) => Type::Forall(v.clone(), *k, Box::new(swap_nth(rng, a, n, seen))),
        Type::Proto(p, args) => Type::Proto(p.clone(), args.iter().map(|a| swap_nth(rng, a, n, seen)).collect()),
        _ => t.clone(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PairKind {
    Eq,
    Neq,
}

#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub size: usize,
    pub kind: PairKind,
    pub median_ns: f64,
    pub p10_ns: f64,
    pub p90_ns: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Fit {
    pub slope: f64,
    pub r2: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchTable {
    pub rows: Vec<Row>,
    pub eq: Fit,
    pub neq: Fit,
}

impl BenchTable {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["size", "kind", "median_ns", "p10_ns", "p90_ns"]).unwrap();
        for r in &self.rows {
            let kind = match r.kind {
                PairKind::Eq => "eq",
                PairKind::Neq => "neq",
            };
            w.write_record([
                r.size.to_string(),
                kind.to_string(),
                format!("{:.0}", r.median_ns),
                format!("{:.0}", r.p10_ns),
                format!("{:.0}", r.p90_ns),
            ])
            .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    pub fn rows_of(&self, kind: PairKind) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(move |r| r.kind == kind)
    }

    /// Median time ratio between consecutive sizes, from `from` on.
    pub fn ratios(&self, kind: PairKind, from: usize) -> Vec<(usize, f64)> {
        let rows: Vec<&Row> = self.rows_of(kind).collect();
        rows.windows(2)
            .filter(|w| w[0].size >= from)
            .map(|w| (w[1].size, w[1].median_ns / w[0].median_ns))
            .collect()
    }
}

/// Least squares line through `(ln x, ln y)`.
pub fn loglog_fit(points: &[(f64, f64)]) -> Fit {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Fit { slope, r2 }
}

/// Every measurement covers at least this many nodes of work, so that
/// small sizes are not lost in timer resolution.
const BATCH_NODES: usize = 1 << 17;

/// Median, 10th and 90th percentile wall-clock time of `equiv` per size, on
/// one equivalent and one non-equivalent pair each.
pub fn bench_equiv(sizes: &[usize], reps: usize, seed: u64) -> BenchTable {
    assert!(sizes.windows(2).all(|w| w[0] < w[1]), "sizes must ascend");
    let reps = reps.max(1);
    let mut rows = Vec::new();
    for &size in sizes {
        let inst = gen_instance(seed ^ size as u64, size);
        let eq = gen_equivalent(&inst, seed);
        let neq = gen_nonequivalent(&inst, seed);
        for (kind, other, want) in [(PairKind::Eq, &eq, true), (PairKind::Neq, &neq, false)] {
            let batch = (BATCH_NODES / size).max(1);
            let mut times: Vec<f64> = (0..reps)
                .map(|_| {
                    let start = Instant::now();
                    for _ in 0..batch {
                        assert_eq!(equiv(std::hint::black_box(&inst.subject), other), want);
                    }
                    start.elapsed().as_nanos() as f64 / batch as f64
                })
                .collect();
            times.sort_by(f64::total_cmp);
            let pct = |q: f64| times[((times.len() - 1) as f64 * q).round() as usize];
            rows.push(Row { size, kind, median_ns: pct(0.5), p10_ns: pct(0.1), p90_ns: pct(0.9) });
        }
        // Deep types drop recursively; the caller's stack is sized for it.
        drop((inst, eq, neq));
    }
    let fit = |k: PairKind| {
        let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.kind == k).map(|r| (r.size as f64, r.median_ns)).collect();
        loglog_fit(&pts)
    };
    let (eq, neq) = (fit(PairKind::Eq), fit(PairKind::Neq));
    BenchTable { rows, eq, neq }
}

/// Runs `f` on a fresh thread with a stack of `mb` megabytes.
pub fn with_stack<T: Send + 'static>(mb: usize, f: impl FnOnce() -> T + Send + 'static) -> T {
    std::thread::Builder::new().stack_size(mb << 20).spawn(f).expect("spawn").join().unwrap_or_else(|e| {
        std::panic::resume_unwind(e)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normalize::equiv;

    #[test]
    fn sizes_are_exact() {
        for n in [3, 4, 5, 20, 100, 1000] {
            for seed in 0..20 {
                assert_eq!(gen_instance(seed, n).size, n, "seed {seed} size {n}");
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = gen_instance(9, 200);
        let b = gen_instance(9, 200);
        assert_eq!(a.subject, b.subject);
        assert_eq!(gen_equivalent(&a, 3), gen_equivalent(&b, 3));
        assert_eq!(gen_nonequivalent(&a, 3), gen_nonequivalent(&b, 3));
    }

    #[test]
    fn variants_have_the_promised_relation() {
        for seed in 0..300 {
            let i = gen_instance(seed, 10 + (seed as usize * 7) % 300);
            let ctx = i.context();
            let e = gen_equivalent(&i, seed);
            assert!(check_kind(&ctx, &e, Kind::S).is_ok(), "{e}");
            assert!(equiv(&i.subject, &e), "{}\n{e}", i.subject);
            let n = gen_nonequivalent(&i, seed);
            assert!(!equiv(&i.subject, &n));
        }
    }

    #[test]
    fn zero_budget_changes_nothing() {
        let i = gen_instance(4, 50);
        assert_eq!(gen_equivalent_with(&i, 1, 0), i.subject);
    }

    #[test]
    fn unrestricted_declarations_still_kind() {
        for seed in 0..200 {
            let i = gen_instance_with(seed, 40, GenConfig { restricted: false });
            assert!(check_kind(&i.context(), &i.subject, Kind::S).is_ok());
        }
    }

    #[test]
    fn fit_recovers_a_power_law() {
        let pts: Vec<(f64, f64)> = (1..10).map(|i| (2f64.powi(i), 3.0 * 2f64.powi(i).powf(1.5))).collect();
        let f = loglog_fit(&pts);
        assert!((f.slope - 1.5).abs() < 1e-9 && (f.r2 - 1.0).abs() < 1e-9);
    }
}
