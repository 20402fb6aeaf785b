//! Declarative type conversion as a bounded rewriting search.
//!
//! This is the reference the normaliser is tested against. It knows nothing
//! about normal forms: it applies the duality and reversal rules in both
//! directions, anywhere inside a type where the result stays well kinded,
//! and looks for the target breadth first.
//!
//! Every rule read left to right (`Dual End? ~> End!`, `Dual ?T.S ~> !T.Dual S`,
//! `Dual Dual S ~> S`, `?-T.S ~> !T.S`, `--T ~> T`, ...) keeps or shrinks the
//! size of a type, and normalisation is a sequence of such steps. So if two
//! types are convertible there is a path that never exceeds the larger of the
//! two, and capping states at that size keeps the search finite without
//! losing answers.

use std::collections::{HashMap, HashSet, VecDeque};

use crate::ast::{name, Kind, Name, Type};
use crate::kindcheck::{synth_kind, KindContext};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// Reached the target in this many rewrite steps.
    Equivalent(usize),
    /// Every type reachable within the size cap was visited.
    Distinct,
    /// The search hit its step bound with states left to explore.
    FuelExhausted,
}

impl Verdict {
    pub fn holds(self) -> bool {
        matches!(self, Verdict::Equivalent(_))
    }
}

/// Searches for a rewrite path from `t` to `u` of at most `fuel` steps.
/// Both types must be well kinded under `delta`; the goal kind is the join
/// of their kinds, which is how subsumption enters.
pub fn oracle_conv(delta: &KindContext, t: &Type, u: &Type, fuel: usize) -> Verdict {
    let goal = match (synth_kind(delta, t), synth_kind(delta, u)) {
        (Ok(a), Ok(b)) => a.join(b),
        _ => return Verdict::Distinct,
    };
    let cap = t.size().max(u.size());
    let start = canonical(t);
    let target = canonical(u);
    if start == target {
        return Verdict::Equivalent(0);
    }
    let mut seen: HashSet<Type> = HashSet::from([start.clone()]);
    let mut queue = VecDeque::from([(start, 0usize)]);
    let mut cut = false;
    let mut search = Search { delta: delta.clone(), cap };
    while let Some((t, depth)) = queue.pop_front() {
        if depth == fuel {
            cut = true;
            continue;
        }
        for next in search.step(&t, goal) {
            if next == target {
                return Verdict::Equivalent(depth + 1);
            }
            if seen.insert(next.clone()) {
                queue.push_back((next, depth + 1));
            }
        }
    }
    if cut {
        Verdict::FuelExhausted
    } else {
        Verdict::Distinct
    }
}

/// One-step rewrites of `t` at goal kind `goal` whose size stays within `cap`.
pub fn neighbours(delta: &KindContext, t: &Type, goal: Kind, cap: usize) -> Vec<Type> {
    Search { delta: delta.clone(), cap }.step(t, goal)
}

/// Renames bound variables by nesting depth so alpha-equivalent types are
/// equal. Rewrites never add or remove binders, so canonical types stay
/// canonical.
pub fn canonical(t: &Type) -> Type {
    fn go(t: &Type, env: &mut HashMap<Name, Vec<Name>>, depth: usize) -> Type {
        match t {
            Type::Var(v) => match env.get(v).and_then(|s| s.last()) {
                Some(n) => Type::Var(n.clone()),
                None => t.clone(),
            },
            Type::Unit | Type::Base(_) | Type::EndWait | Type::EndTerm => t.clone(),
            Type::Fun(a, b) => Type::fun(go(a, env, depth), go(b, env, depth)),
            Type::Pair(a, b) => Type::pair(go(a, env, depth), go(b, env, depth)),
            Type::In(a, b) => Type::input(go(a, env, depth), go(b, env, depth)),
            Type::Out(a, b) => Type::output(go(a, env, depth), go(b, env, depth)),
            Type::Dual(a) => Type::dual(go(a, env, depth)),
            Type::Neg(a) => Type::neg(go(a, env, depth)),
            Type::Proto(n, args) => Type::Proto(n.clone(), args.iter().map(|a| go(a, env, depth)).collect()),
            Type::Forall(v, k, b) => {
                let fresh = name(&format!("%{depth}"));
                env.entry(v.clone()).or_default().push(fresh.clone());
                let body = go(b, env, depth + 1);
                env.get_mut(v).unwrap().pop();
                Type::Forall(fresh, *k, Box::new(body))
            }
        }
    }
    go(t, &mut HashMap::new(), 0)
}

struct Search {
    delta: KindContext,
    cap: usize,
}

impl Search {
    fn step(&mut self, t: &Type, goal: Kind) -> Vec<Type> {
        let size = t.size();
        let mut out = Vec::new();
        self.at(t, goal, size, &mut |r| out.push(r));
        out
    }

    /// All one-step rewrites of `t`, which sits at a position expecting kind
    /// `expect` inside a type of total size `total`. Each result is passed to
    /// `emit` after being rebuilt into its context by the caller.
    fn at(&mut self, t: &Type, expect: Kind, total: usize, emit: &mut dyn FnMut(Type)) {
        let room = self.cap.saturating_sub(total);
        for r in self.root(t, expect, room) {
            emit(r);
        }
        match t {
            Type::Unit | Type::Base(_) | Type::Var(_) | Type::EndWait | Type::EndTerm => {}
            Type::Fun(a, b) => self.two(a, b, Kind::T, Kind::T, total, Type::fun, emit),
            Type::Pair(a, b) => self.two(a, b, Kind::T, Kind::T, total, Type::pair, emit),
            Type::In(a, b) => self.two(a, b, Kind::P, Kind::S, total, Type::input, emit),
            Type::Out(a, b) => self.two(a, b, Kind::P, Kind::S, total, Type::output, emit),
            Type::Dual(a) => self.at(a, Kind::S, total, &mut |r| emit(Type::dual(r))),
            Type::Neg(a) => self.at(a, Kind::P, total, &mut |r| emit(Type::neg(r))),
            Type::Forall(v, k, b) => {
                self.delta.push(v.clone(), *k);
                let (v, k) = (v.clone(), *k);
                self.at(b, Kind::T, total, &mut |r| emit(Type::Forall(v.clone(), k, Box::new(r))));
                self.delta.pop();
            }
            Type::Proto(n, args) => {
                let param = self.delta.decls.get(n).map_or(Kind::P, |p| p.arrow_kind().param);
                for i in 0..args.len() {
                    self.at(&args[i], param, total, &mut |r| {
                        let mut args = args.clone();
                        args[i] = r;
                        emit(Type::Proto(n.clone(), args))
                    });
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn two(
        &mut self,
        a: &Type,
        b: &Type,
        ka: Kind,
        kb: Kind,
        total: usize,
        build: fn(Type, Type) -> Type,
        emit: &mut dyn FnMut(Type),
    ) {
        self.at(a, ka, total, &mut |r| emit(build(r, b.clone())));
        self.at(b, kb, total, &mut |r| emit(build(a.clone(), r)));
    }

    /// Rewrites at the root of `t`. Growing rewrites need `room` spare nodes.
    fn root(&self, t: &Type, expect: Kind, room: usize) -> Vec<Type> {
        let mut out = Vec::new();
        // left to right
        match t {
            Type::Dual(s) => match &**s {
                Type::EndWait => out.push(Type::EndTerm),
                Type::EndTerm => out.push(Type::EndWait),
                Type::In(a, s) => out.push(Type::output((**a).clone(), Type::dual((**s).clone()))),
                Type::Out(a, s) => out.push(Type::input((**a).clone(), Type::dual((**s).clone()))),
                Type::Dual(s) => out.push((**s).clone()),
                _ => {}
            },
            Type::In(a, s) => {
                if let Type::Neg(a) = &**a {
                    out.push(Type::output((**a).clone(), (**s).clone()));
                }
            }
            Type::Out(a, s) => {
                if let Type::Neg(a) = &**a {
                    out.push(Type::input((**a).clone(), (**s).clone()));
                }
            }
            Type::Neg(a) => {
                if let Type::Neg(a) = &**a {
                    out.push((**a).clone());
                }
            }
            _ => {}
        }
        // right to left
        match t {
            Type::EndTerm if room >= 1 => out.push(Type::dual(Type::EndWait)),
            Type::EndWait if room >= 1 => out.push(Type::dual(Type::EndTerm)),
            Type::In(a, s) | Type::Out(a, s) => {
                let is_in = matches!(t, Type::In(..));
                if let Type::Dual(s) = &**s {
                    let flipped = if is_in { Type::output } else { Type::input };
                    out.push(Type::dual(flipped((**a).clone(), (**s).clone())));
                }
                if room >= 1 {
                    let flipped = if is_in { Type::output } else { Type::input };
                    out.push(flipped(Type::neg((**a).clone()), (**s).clone()));
                }
            }
            _ => {}
        }
        if room >= 2 {
            if expect == Kind::P {
                out.push(Type::neg(Type::neg(t.clone())));
            }
            if synth_kind(&self.delta, t) == Ok(Kind::S) {
                out.push(Type::dual(Type::dual(t.clone())));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn int() -> Type {
        Type::int()
    }

    fn delta() -> KindContext {
        KindContext::default().with(name("s"), Kind::S).with(name("a"), Kind::S)
    }

    #[test]
    fn duality_is_involutory() {
        let t = Type::dual(Type::dual(Type::EndTerm));
        assert!(oracle_conv(&delta(), &t, &Type::EndTerm, 8).holds());
    }

    #[test]
    fn negated_input_is_output() {
        let s = Type::var("s");
        let t = Type::input(Type::neg(int()), s.clone());
        assert!(oracle_conv(&delta(), &t, &Type::output(int(), s), 8).holds());
    }

    #[test]
    fn distinct_ends_are_proved_distinct() {
        assert_eq!(oracle_conv(&delta(), &Type::EndWait, &Type::EndTerm, 8), Verdict::Distinct);
    }

    #[test]
    fn worked_example_needs_two_steps() {
        let t = Type::dual(Type::input(Type::neg(int()), Type::var("a")));
        let u = Type::input(int(), Type::dual(Type::var("a")));
        assert_eq!(oracle_conv(&delta(), &t, &u, 8), Verdict::Equivalent(2));
        assert_eq!(oracle_conv(&delta(), &t, &u, 1), Verdict::FuelExhausted);
    }

    #[test]
    fn works_under_binders_and_modulo_alpha() {
        let t = Type::forall("x", Kind::S, Type::fun(Type::dual(Type::dual(Type::var("x"))), Type::Unit));
        let u = Type::forall("y", Kind::S, Type::fun(Type::var("y"), Type::Unit));
        assert!(oracle_conv(&delta(), &t, &u, 4).holds());
        let v = Type::forall("y", Kind::S, Type::fun(Type::dual(Type::var("y")), Type::Unit));
        assert_eq!(oracle_conv(&delta(), &t, &v, 20), Verdict::Distinct);
    }

    #[test]
    fn double_negation_at_kind_p() {
        let t = Type::neg(Type::neg(int()));
        assert!(oracle_conv(&delta(), &t, &int(), 4).holds());
        assert!(oracle_conv(&delta(), &int(), &t, 4).holds());
    }

    #[test]
    fn canonical_names_by_depth() {
        let t = Type::forall("x", Kind::T, Type::forall("y", Kind::T, Type::fun(Type::var("x"), Type::var("z"))));
        let c = canonical(&t);
        assert_eq!(c.to_string(), canonical(&canonical(&t)).to_string());
        assert!(c.free_vars().contains(&name("z")));
    }
}
