//! Normal forms and type equivalence.
//!
//! `nf_pos`/`nf_neg` push `Dual` down to variables and fold negations on
//! message payloads into the direction of the message. Both run on an explicit
//! work stack, so session spines of a million nodes are fine. Equivalence is
//! alpha-equality of positive normal forms.

use std::collections::HashMap;

use crate::ast::{Kind, Name, Type};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Polarity {
    Plus,
    Minus,
}

impl Polarity {
    pub fn flip(self) -> Polarity {
        match self {
            Polarity::Plus => Polarity::Minus,
            Polarity::Minus => Polarity::Plus,
        }
    }
}

/// The directional operator: `Plus` keeps the sign of `t`, `Minus` flips it.
/// Leading negations cancel in pairs, so the result carries at most one.
pub fn directional(p: Polarity, t: Type) -> Type {
    let mut negs = usize::from(p == Polarity::Minus);
    let mut t = t;
    while let Type::Neg(inner) = t {
        negs += 1;
        t = *inner;
    }
    if negs % 2 == 1 {
        Type::neg(t)
    } else {
        t
    }
}

/// `-U` becomes an input of `U`, anything else an output.
pub fn materialize(t: Type, s: Type) -> Type {
    match t {
        Type::Neg(u) => Type::In(u, Box::new(s)),
        t => Type::output(t, s),
    }
}

pub fn materialize_seq(ts: Vec<Type>, s: Type) -> Type {
    ts.into_iter().rev().fold(s, |acc, t| materialize(t, acc))
}

enum Build {
    Fun,
    Pair,
    Forall(Name, Kind),
    Proto(Name, usize),
    Dir(Polarity),
    Msg(Polarity),
    Dual,
}

enum Frame<'a> {
    Eval(&'a Type, Polarity),
    Build(Build),
}

fn nf(t: &Type, p: Polarity) -> Type {
    let mut work = vec![Frame::Eval(t, p)];
    let mut out: Vec<Type> = Vec::new();
    while let Some(frame) = work.pop() {
        match frame {
            Frame::Eval(t, Polarity::Plus) => match t {
                Type::Unit | Type::Base(_) | Type::Var(_) | Type::EndWait | Type::EndTerm => {
                    out.push(t.clone())
                }
                Type::Fun(a, b) => push2(&mut work, Build::Fun, a, b, Polarity::Plus),
                Type::Pair(a, b) => push2(&mut work, Build::Pair, a, b, Polarity::Plus),
                Type::Forall(v, k, b) => {
                    work.push(Frame::Build(Build::Forall(v.clone(), *k)));
                    work.push(Frame::Eval(b, Polarity::Plus));
                }
                Type::Proto(n, args) => {
                    work.push(Frame::Build(Build::Proto(n.clone(), args.len())));
                    for a in args.iter().rev() {
                        work.push(Frame::Eval(a, Polarity::Plus));
                    }
                }
                Type::In(a, s) => msg(&mut work, Polarity::Minus, a, s, Polarity::Plus),
                Type::Out(a, s) => msg(&mut work, Polarity::Plus, a, s, Polarity::Plus),
                Type::Dual(s) => work.push(Frame::Eval(s, Polarity::Minus)),
                Type::Neg(b) => {
                    work.push(Frame::Build(Build::Dir(Polarity::Minus)));
                    work.push(Frame::Eval(b, Polarity::Plus));
                }
            },
            Frame::Eval(t, Polarity::Minus) => match t {
                Type::Var(_) => out.push(Type::dual(t.clone())),
                Type::EndWait => out.push(Type::EndTerm),
                Type::EndTerm => out.push(Type::EndWait),
                Type::Dual(s) => work.push(Frame::Eval(s, Polarity::Plus)),
                Type::In(a, s) => msg(&mut work, Polarity::Plus, a, s, Polarity::Minus),
                Type::Out(a, s) => msg(&mut work, Polarity::Minus, a, s, Polarity::Minus),
                // Only session types have a dual; keep anything else
                // syntactically dualised rather than guess.
                _ => {
                    work.push(Frame::Build(Build::Dual));
                    work.push(Frame::Eval(t, Polarity::Plus));
                }
            },
            Frame::Build(b) => {
                let r = match b {
                    Build::Fun => {
                        let (a, b) = pop2(&mut out);
                        Type::fun(a, b)
                    }
                    Build::Pair => {
                        let (a, b) = pop2(&mut out);
                        Type::pair(a, b)
                    }
                    Build::Forall(v, k) => Type::Forall(v, k, Box::new(out.pop().unwrap())),
                    Build::Proto(n, len) => {
                        let args = out
                            .drain(out.len() - len..)
                            .map(|a| directional(Polarity::Plus, a))
                            .collect();
                        Type::Proto(n, args)
                    }
                    Build::Dir(p) => directional(p, out.pop().unwrap()),
                    Build::Msg(p) => {
                        let (a, s) = pop2(&mut out);
                        materialize(directional(p, a), s)
                    }
                    Build::Dual => Type::dual(out.pop().unwrap()),
                };
                out.push(r);
            }
        }
    }
    debug_assert_eq!(out.len(), 1);
    out.pop().unwrap()
}

fn push2<'a>(work: &mut Vec<Frame<'a>>, b: Build, x: &'a Type, y: &'a Type, p: Polarity) {
    work.push(Frame::Build(b));
    work.push(Frame::Eval(y, p));
    work.push(Frame::Eval(x, p));
}

fn msg<'a>(work: &mut Vec<Frame<'a>>, dir: Polarity, payload: &'a Type, cont: &'a Type, p: Polarity) {
    work.push(Frame::Build(Build::Msg(dir)));
    work.push(Frame::Eval(cont, p));
    work.push(Frame::Eval(payload, Polarity::Plus));
}

fn pop2(out: &mut Vec<Type>) -> (Type, Type) {
    let b = out.pop().unwrap();
    let a = out.pop().unwrap();
    (a, b)
}

pub fn nf_pos(t: &Type) -> Type {
    nf(t, Polarity::Plus)
}

/// Normal form of `Dual t`; `t` should be a session type.
pub fn nf_neg(t: &Type) -> Type {
    nf(t, Polarity::Minus)
}

pub fn nf_with(p: Polarity, t: &Type) -> Type {
    nf(t, p)
}

enum Cmp<'a> {
    Pair(&'a Type, &'a Type),
    Unbind(&'a Name, &'a Name),
}

/// Equality up to renaming of bound variables.
pub fn alpha_equal(a: &Type, b: &Type) -> bool {
    let mut left: HashMap<&Name, Vec<usize>> = HashMap::new();
    let mut right: HashMap<&Name, Vec<usize>> = HashMap::new();
    let mut level = 0usize;
    let mut work = vec![Cmp::Pair(a, b)];
    while let Some(item) = work.pop() {
        let (x, y) = match item {
            Cmp::Unbind(l, r) => {
                left.get_mut(l).map(Vec::pop);
                right.get_mut(r).map(Vec::pop);
                continue;
            }
            Cmp::Pair(x, y) => (x, y),
        };
        match (x, y) {
            (Type::Unit, Type::Unit)
            | (Type::EndWait, Type::EndWait)
            | (Type::EndTerm, Type::EndTerm) => {}
            (Type::Base(m), Type::Base(n)) if m == n => {}
            (Type::Var(m), Type::Var(n)) => {
                let lm = left.get(m).and_then(|v| v.last());
                let ln = right.get(n).and_then(|v| v.last());
                let same = match (lm, ln) {
                    (Some(i), Some(j)) => i == j,
                    (None, None) => m == n,
                    _ => false,
                };
                if !same {
                    return false;
                }
            }
            (Type::Fun(a1, b1), Type::Fun(a2, b2))
            | (Type::Pair(a1, b1), Type::Pair(a2, b2))
            | (Type::In(a1, b1), Type::In(a2, b2))
            | (Type::Out(a1, b1), Type::Out(a2, b2)) => {
                work.push(Cmp::Pair(b1, b2));
                work.push(Cmp::Pair(a1, a2));
            }
            (Type::Dual(a1), Type::Dual(a2)) | (Type::Neg(a1), Type::Neg(a2)) => {
                work.push(Cmp::Pair(a1, a2))
            }
            (Type::Proto(m, xs), Type::Proto(n, ys)) if m == n && xs.len() == ys.len() => {
                for (p, q) in xs.iter().zip(ys).rev() {
                    work.push(Cmp::Pair(p, q));
                }
            }
            (Type::Forall(v1, k1, b1), Type::Forall(v2, k2, b2)) if k1 == k2 => {
                level += 1;
                left.entry(v1).or_default().push(level);
                right.entry(v2).or_default().push(level);
                work.push(Cmp::Unbind(v1, v2));
                work.push(Cmp::Pair(b1, b2));
            }
            _ => return false,
        }
    }
    true
}

/// Algorithmic type equivalence.
pub fn equiv(t: &Type, u: &Type) -> bool {
    alpha_equal(&nf_pos(t), &nf_pos(u))
}

/// Membership in the grammar of normal forms: at most one leading `-`, and
/// below it no `-` or `Dual` except `Dual` on a variable and `-` on a
/// protocol argument.
pub fn is_normal(t: &Type) -> bool {
    let mut work: Vec<(&Type, bool)> = vec![(t, true)];
    while let Some((t, may_neg)) = work.pop() {
        match t {
            Type::Neg(inner) if may_neg => work.push((inner, false)),
            Type::Neg(_) => return false,
            Type::Unit | Type::Base(_) | Type::Var(_) | Type::EndWait | Type::EndTerm => {}
            Type::Dual(inner) => {
                if !matches!(**inner, Type::Var(_)) {
                    return false;
                }
            }
            Type::Fun(a, b) | Type::Pair(a, b) | Type::In(a, b) | Type::Out(a, b) => {
                work.push((a, false));
                work.push((b, false));
            }
            Type::Forall(_, _, b) => work.push((b, false)),
            Type::Proto(_, args) => work.extend(args.iter().map(|a| (a, true))),
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn int() -> Type {
        Type::int()
    }

    #[test]
    fn worked_example() {
        let t = Type::dual(Type::input(Type::neg(int()), Type::var("a")));
        assert_eq!(nf_pos(&t), Type::input(int(), Type::dual(Type::var("a"))));
        assert_eq!(nf_neg(&t), Type::output(int(), Type::var("a")));
    }

    #[test]
    fn negated_payloads_flip_direction() {
        let s = Type::var("s");
        assert_eq!(nf_pos(&Type::input(Type::neg(int()), s.clone())), Type::output(int(), s.clone()));
        assert_eq!(nf_pos(&Type::output(Type::neg(int()), s.clone())), Type::input(int(), s.clone()));
        let nn = Type::output(Type::neg(Type::neg(int())), s.clone());
        assert_eq!(nf_pos(&nn), Type::output(int(), s));
    }

    #[test]
    fn directional_laws() {
        let u = Type::proto("Arith", vec![]);
        let nu = Type::neg(u.clone());
        assert_eq!(directional(Polarity::Plus, nu.clone()), nu);
        assert_eq!(directional(Polarity::Minus, nu.clone()), u);
        assert_eq!(directional(Polarity::Minus, u.clone()), nu);
        for t in [u.clone(), nu.clone()] {
            let a = directional(Polarity::Minus, directional(Polarity::Plus, t.clone()));
            assert_eq!(a, directional(Polarity::Minus, t.clone()));
            let b = directional(Polarity::Minus, directional(Polarity::Minus, t.clone()));
            assert_eq!(b, directional(Polarity::Plus, t));
        }
    }

    #[test]
    fn protocol_args_keep_one_sign() {
        let t = Type::proto("Stream", vec![Type::neg(Type::neg(Type::neg(int())))]);
        assert_eq!(nf_pos(&t), Type::proto("Stream", vec![Type::neg(int())]));
    }

    #[test]
    fn duality_of_ends() {
        assert_eq!(nf_pos(&Type::dual(Type::EndWait)), Type::EndTerm);
        assert_eq!(nf_pos(&Type::dual(Type::dual(Type::EndWait))), Type::EndWait);
    }

    #[test]
    fn materialize_seq_folds_right() {
        let s = Type::var("s");
        let r = materialize_seq(vec![int(), Type::neg(int())], s.clone());
        assert_eq!(r, Type::output(int(), Type::input(int(), s)));
    }

    #[test]
    fn alpha_equal_respects_binders() {
        let a = Type::forall("x", Kind::S, Type::input(int(), Type::var("x")));
        let b = Type::forall("y", Kind::S, Type::input(int(), Type::var("y")));
        let c = Type::forall("y", Kind::S, Type::input(int(), Type::var("x")));
        assert!(alpha_equal(&a, &b));
        assert!(!alpha_equal(&a, &c));
        let d = Type::forall("y", Kind::T, Type::input(int(), Type::var("y")));
        assert!(!alpha_equal(&a, &d));
    }

    #[test]
    fn long_spines_do_not_overflow() {
        let n = 200_000;
        let mut t = Type::EndTerm;
        for _ in 0..n {
            t = Type::input(Type::neg(int()), t);
        }
        let t = Type::dual(t);
        let r = nf_pos(&t);
        assert!(is_normal(&r));
        assert!(alpha_equal(&r, &r));
        assert_eq!(r.size(), 2 * n + 1);
        // deep drops recurse; leak rather than blow the test thread's stack
        std::mem::forget(r);
        std::mem::forget(t);
    }

    #[test]
    fn normal_form_grammar() {
        assert!(is_normal(&Type::neg(int())));
        assert!(!is_normal(&Type::neg(Type::neg(int()))));
        assert!(!is_normal(&Type::input(Type::neg(int()), Type::EndTerm)));
        assert!(is_normal(&Type::proto("P", vec![Type::neg(int())])));
        assert!(!is_normal(&Type::dual(Type::EndTerm)));
        assert!(is_normal(&Type::dual(Type::var("a"))));
    }
}
