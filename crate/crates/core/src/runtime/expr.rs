//! One step of a thread: call-by-value, left to right.

use std::collections::{HashMap, HashSet};

use crate::ast::{name, Arm, BinOp, Const, Expr, Lit, Name};

use super::{Label, Sigma};

/// Stands for the value a pending receive will get.
pub const HOLE: &str = "%hole";

/// Top-level definitions under their runtime names.
pub type Globals = HashMap<Name, Expr>;

#[derive(Clone, Debug, PartialEq)]
pub enum ExprStep {
    Value,
    /// No rule applies to a non-value.
    Stuck(String),
    /// An internal, fork or new step, with whatever it printed.
    Step { label: Label, next: Expr, output: Option<String> },
    /// Session operations the thread is ready for. The process layer picks
    /// at most one, and only together with a matching partner.
    Offers(Vec<(Sigma, Expr)>),
}

impl ExprStep {
    fn beta(next: Expr) -> ExprStep {
        ExprStep::Step { label: Label::Beta, next, output: None }
    }

    fn map(self, f: impl Fn(Expr) -> Expr) -> ExprStep {
        match self {
            ExprStep::Step { label, next, output } => ExprStep::Step { label, next: f(next), output },
            ExprStep::Offers(os) => ExprStep::Offers(os.into_iter().map(|(s, e)| (s, f(e))).collect()),
            other => other,
        }
    }
}

/// Runtime name of channel endpoints created by the `n`th `new`.
pub fn channel_names(n: u32) -> (Name, Name) {
    (name(&format!("#{n}a")), name(&format!("#{n}b")))
}

pub fn is_channel(n: &str) -> bool {
    n.starts_with('#')
}

/// Values at runtime. Partial applications of the session constants are
/// values; globals are not, they unfold.
pub fn is_value(globals: &Globals, e: &Expr) -> bool {
    match e {
        Expr::Const(_) | Expr::Lit(_) | Expr::Abs(..) | Expr::Rec(..) | Expr::TAbs(..) => true,
        Expr::Var(x) => !globals.contains_key(x),
        Expr::Pair(a, b) => is_value(globals, a) && is_value(globals, b),
        Expr::Con { args, .. } => args.iter().all(|a| is_value(globals, a)),
        Expr::TApp(f, _) => matches!(
            type_applied_head(f),
            Some(Const::Receive | Const::Send | Const::Select(_))
        ),
        Expr::App(f, a) => matches!(type_applied_head(f), Some(Const::Send)) && is_value(globals, a),
        _ => false,
    }
}

/// The constant under a chain of type applications.
fn type_applied_head(e: &Expr) -> Option<&Const> {
    let mut e = e;
    while let Expr::TApp(f, _) = e {
        e = f;
    }
    match e {
        Expr::Const(c) => Some(c),
        _ => None,
    }
}

/// Performs one step of `e`. `fresh` numbers the channel a `new` would make.
pub fn step_expr(globals: &Globals, e: &Expr, fresh: u32) -> ExprStep {
    let val = |x: &Expr| is_value(globals, x);
    match e {
        _ if val(e) => ExprStep::Value,
        Expr::Var(x) => match globals.get(x) {
            Some(body) => ExprStep::beta(body.clone()),
            None => ExprStep::Stuck(format!("unbound `{x}`")),
        },
        Expr::App(f, a) if !val(f) => step_expr(globals, f, fresh).map(|f| Expr::app(f, (**a).clone())),
        Expr::App(f, a) if !val(a) => step_expr(globals, a, fresh).map(|a| Expr::app((**f).clone(), a)),
        Expr::App(f, a) => apply(f, a),
        Expr::TApp(f, t) if !val(f) => step_expr(globals, f, fresh).map(|f| Expr::tapp(f, t.clone())),
        Expr::TApp(f, t) => match &**f {
            Expr::TAbs(a, _, v) => ExprStep::beta(v.subst_type(a, t)),
            Expr::Con { tag, targs, args } => {
                let mut targs = targs.clone();
                targs.push(t.clone());
                ExprStep::beta(Expr::Con { tag: tag.clone(), targs, args: args.clone() })
            }
            Expr::Const(Const::New) => {
                let (x, y) = channel_names(fresh);
                ExprStep::Step {
                    label: Label::New(x.clone(), y.clone(), t.clone()),
                    next: Expr::pair(Expr::Var(x), Expr::Var(y)),
                    output: None,
                }
            }
            _ => ExprStep::Stuck(format!("cannot instantiate `{f}`")),
        },
        Expr::Pair(a, b) if !val(a) => step_expr(globals, a, fresh).map(|a| Expr::pair(a, (**b).clone())),
        Expr::Pair(a, b) => step_expr(globals, b, fresh).map(|b| Expr::pair((**a).clone(), b)),
        Expr::Con { tag, targs, args } => {
            let i = args.iter().position(|a| !val(a)).expect("non-value constructor has a non-value argument");
            step_expr(globals, &args[i], fresh).map(|a| {
                let mut args = args.clone();
                args[i] = a;
                Expr::Con { tag: tag.clone(), targs: targs.clone(), args }
            })
        }
        Expr::Let(x, e1, e2) if !val(e1) => {
            step_expr(globals, e1, fresh).map(|e1| Expr::Let(x.clone(), Box::new(e1), e2.clone()))
        }
        Expr::Let(x, e1, e2) => ExprStep::beta(e2.subst(x, e1)),
        Expr::LetPair(x, y, e1, e2) if !val(e1) => step_expr(globals, e1, fresh)
            .map(|e1| Expr::LetPair(x.clone(), y.clone(), Box::new(e1), e2.clone())),
        Expr::LetPair(x, y, e1, e2) => match &**e1 {
            Expr::Pair(u, v) => ExprStep::beta(e2.subst(x, u).subst(y, v)),
            other => ExprStep::Stuck(format!("`{other}` is not a pair")),
        },
        Expr::LetUnit(e1, e2) if !val(e1) => {
            step_expr(globals, e1, fresh).map(|e1| Expr::let_unit(e1, (**e2).clone()))
        }
        Expr::LetUnit(e1, e2) if e1.is_unit() => ExprStep::beta((**e2).clone()),
        Expr::LetUnit(e1, _) => ExprStep::Stuck(format!("`{e1}` is not unit")),
        Expr::Match(s, arms) if !val(s) => {
            step_expr(globals, s, fresh).map(|s| Expr::Match(Box::new(s), arms.clone()))
        }
        Expr::Match(s, arms) => select_arm(s, arms),
        Expr::BinOp(op, a, b) if !val(a) => {
            step_expr(globals, a, fresh).map(|a| Expr::BinOp(*op, Box::new(a), b.clone()))
        }
        Expr::BinOp(op, a, b) if !val(b) => {
            step_expr(globals, b, fresh).map(|b| Expr::BinOp(*op, a.clone(), Box::new(b)))
        }
        Expr::BinOp(op, a, b) => match (&**a, &**b) {
            (Expr::Lit(Lit::Int(m)), Expr::Lit(Lit::Int(n))) => match arith(*op, *m, *n) {
                Some(r) => ExprStep::beta(r),
                None => ExprStep::Stuck("division by zero".into()),
            },
            _ => ExprStep::Stuck(format!("`{op:?}` on non-integers")),
        },
        Expr::At(_, inner) => step_expr(globals, inner, fresh),
        _ => ExprStep::Stuck(format!("no rule for `{e}`")),
    }
}

fn apply(f: &Expr, a: &Expr) -> ExprStep {
    let chan = match a {
        Expr::Var(x) => Some(x.clone()),
        _ => None,
    };
    match f {
        Expr::Abs(x, _, body) => ExprStep::beta(body.subst(x, a)),
        Expr::Rec(x, _, v) => ExprStep::beta(Expr::app(v.subst(x, f), a.clone())),
        Expr::Con { tag, targs, args } => {
            let mut args = args.clone();
            args.push(a.clone());
            ExprStep::beta(Expr::Con { tag: tag.clone(), targs: targs.clone(), args })
        }
        Expr::Const(Const::Fork) => {
            ExprStep::Step { label: Label::Fork(a.clone()), next: Expr::unit(), output: None }
        }
        Expr::Const(Const::PrintInt) => match a {
            Expr::Lit(Lit::Int(n)) => {
                ExprStep::Step { label: Label::Beta, next: Expr::unit(), output: Some(n.to_string()) }
            }
            _ => ExprStep::Stuck(format!("printInt of `{a}`")),
        },
        Expr::Const(Const::PrintString) => match a {
            Expr::Lit(Lit::Str(s)) => {
                ExprStep::Step { label: Label::Beta, next: Expr::unit(), output: Some(s.clone()) }
            }
            _ => ExprStep::Stuck(format!("printString of `{a}`")),
        },
        Expr::Const(Const::Wait) if chan.is_some() => {
            ExprStep::Offers(vec![(Sigma::Close(chan.unwrap()), Expr::unit())])
        }
        Expr::Const(Const::Terminate) if chan.is_some() => {
            ExprStep::Offers(vec![(Sigma::Open(chan.unwrap()), Expr::unit())])
        }
        Expr::TApp(..) if chan.is_some() => {
            let x = chan.unwrap();
            match type_applied_head(f) {
                Some(Const::Receive) => ExprStep::Offers(vec![(
                    Sigma::RecvVal(x.clone(), Expr::var(HOLE)),
                    Expr::pair(Expr::var(HOLE), Expr::Var(x)),
                )]),
                Some(Const::Select(tag)) => {
                    ExprStep::Offers(vec![(Sigma::SendTag(x.clone(), tag.clone()), Expr::Var(x))])
                }
                _ => ExprStep::Stuck(format!("cannot apply `{f}`")),
            }
        }
        Expr::App(g, v) if chan.is_some() && matches!(type_applied_head(g), Some(Const::Send)) => {
            let x = chan.unwrap();
            ExprStep::Offers(vec![(Sigma::SendVal(x.clone(), (**v).clone()), Expr::Var(x))])
        }
        _ => ExprStep::Stuck(format!("cannot apply `{f}` to `{a}`")),
    }
}

fn select_arm(s: &Expr, arms: &[Arm]) -> ExprStep {
    match s {
        Expr::Con { tag, args, .. } => {
            let Some(arm) = arms.iter().find(|a| &a.tag == tag) else {
                return ExprStep::Stuck(format!("no branch for `{tag}`"));
            };
            if arm.binders.len() != args.len() {
                return ExprStep::Stuck(format!("`{tag}` is not fully applied"));
            }
            let body = arm.binders.iter().zip(args).fold(arm.body.clone(), |b, (x, v)| b.subst(x, v));
            ExprStep::beta(body)
        }
        Expr::Var(x) => ExprStep::Offers(
            arms.iter()
                .map(|arm| {
                    let body = match arm.binders.first() {
                        Some(y) => arm.body.subst(y, s),
                        None => arm.body.clone(),
                    };
                    (Sigma::RecvTag(x.clone(), arm.tag.clone()), body)
                })
                .collect(),
        ),
        _ => ExprStep::Stuck(format!("cannot match on `{s}`")),
    }
}

fn arith(op: BinOp, m: i64, n: i64) -> Option<Expr> {
    let bool = |b: bool| Expr::Con { tag: name(if b { "True" } else { "False" }), targs: vec![], args: vec![] };
    Some(match op {
        BinOp::Add => Expr::int(m.wrapping_add(n)),
        BinOp::Sub => Expr::int(m.wrapping_sub(n)),
        BinOp::Mul => Expr::int(m.wrapping_mul(n)),
        BinOp::Div => Expr::int(m.checked_div(n)?),
        BinOp::Eq => bool(m == n),
        BinOp::Ne => bool(m != n),
        BinOp::Lt => bool(m < n),
        BinOp::Le => bool(m <= n),
        BinOp::Gt => bool(m > n),
        BinOp::Ge => bool(m >= n),
    })
}

/// Renames free occurrences of the names in `map`, respecting binders.
pub fn rename_free(e: &Expr, map: &HashMap<Name, Name>) -> Expr {
    fn go(e: &Expr, map: &HashMap<Name, Name>, bound: &mut Vec<Name>) -> Expr {
        let under = |e: &Expr, names: &[Name], bound: &mut Vec<Name>| {
            let n = bound.len();
            bound.extend(names.iter().cloned());
            let r = go(e, map, bound);
            bound.truncate(n);
            r
        };
        match e {
            Expr::Var(x) if !bound.contains(x) => map.get(x).map_or_else(|| e.clone(), |y| Expr::Var(y.clone())),
            Expr::Var(_) | Expr::Const(_) | Expr::Lit(_) => e.clone(),
            Expr::Con { tag, targs, args } => Expr::Con {
                tag: tag.clone(),
                targs: targs.clone(),
                args: args.iter().map(|a| go(a, map, bound)).collect(),
            },
            Expr::Abs(x, t, b) => Expr::Abs(x.clone(), t.clone(), Box::new(under(b, std::slice::from_ref(x), bound))),
            Expr::Rec(x, t, b) => Expr::Rec(x.clone(), t.clone(), Box::new(under(b, std::slice::from_ref(x), bound))),
            Expr::TAbs(a, k, b) => Expr::TAbs(a.clone(), *k, Box::new(go(b, map, bound))),
            Expr::App(a, b) => Expr::app(go(a, map, bound), go(b, map, bound)),
            Expr::TApp(a, t) => Expr::tapp(go(a, map, bound), t.clone()),
            Expr::Pair(a, b) => Expr::pair(go(a, map, bound), go(b, map, bound)),
            Expr::BinOp(op, a, b) => Expr::BinOp(*op, Box::new(go(a, map, bound)), Box::new(go(b, map, bound))),
            Expr::LetUnit(a, b) => Expr::let_unit(go(a, map, bound), go(b, map, bound)),
            Expr::Let(x, a, b) => {
                let a = go(a, map, bound);
                Expr::Let(x.clone(), Box::new(a), Box::new(under(b, std::slice::from_ref(x), bound)))
            }
            Expr::LetPair(x, y, a, b) => {
                let a = go(a, map, bound);
                let b = under(b, &[x.clone(), y.clone()], bound);
                Expr::LetPair(x.clone(), y.clone(), Box::new(a), Box::new(b))
            }
            Expr::Match(s, arms) => Expr::Match(
                Box::new(go(s, map, bound)),
                arms.iter()
                    .map(|arm| Arm {
                        tag: arm.tag.clone(),
                        binders: arm.binders.clone(),
                        body: under(&arm.body, &arm.binders, bound),
                    })
                    .collect(),
            ),
            Expr::At(_, inner) => go(inner, map, bound),
        }
    }
    go(e, map, &mut Vec::new())
}

/// Channel endpoints occurring in `e`.
pub fn channels(e: &Expr) -> HashSet<Name> {
    e.free_vars().into_iter().filter(|n| is_channel(n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{Arm, Type};

    fn step(e: &Expr) -> ExprStep {
        step_expr(&Globals::new(), e, 0)
    }

    #[test]
    fn identity_applied_to_unit() {
        let e = Expr::app(Expr::abs("x", Some(Type::Unit), Expr::var("x")), Expr::unit());
        assert_eq!(step(&e), ExprStep::Step { label: Label::Beta, next: Expr::unit(), output: None });
    }

    #[test]
    fn send_offers_its_value_and_returns_the_channel() {
        let send = Expr::tapp(Expr::tapp(Expr::Const(Const::Send), Type::int()), Type::var("s"));
        let partial = Expr::app(send, Expr::int(5));
        assert_eq!(step(&partial), ExprStep::Value);
        let e = Expr::app(partial, Expr::var("#0a"));
        let want = ExprStep::Offers(vec![(Sigma::SendVal(name("#0a"), Expr::int(5)), Expr::var("#0a"))]);
        assert_eq!(step(&e), want);
    }

    #[test]
    fn match_on_a_channel_offers_every_branch() {
        let arm = |tag: &str, body: Expr| Arm { tag: name(tag), binders: vec![name("y")], body };
        let e = Expr::Match(
            Box::new(Expr::var("#0b")),
            vec![arm("Neg", Expr::var("y")), arm("Add", Expr::pair(Expr::var("y"), Expr::int(1)))],
        );
        let want = ExprStep::Offers(vec![
            (Sigma::RecvTag(name("#0b"), name("Neg")), Expr::var("#0b")),
            (Sigma::RecvTag(name("#0b"), name("Add")), Expr::pair(Expr::var("#0b"), Expr::int(1))),
        ]);
        assert_eq!(step(&e), want);
    }

    #[test]
    fn new_picks_the_numbered_names() {
        let e = Expr::tapp(Expr::Const(Const::New), Type::EndWait);
        let ExprStep::Step { label, next, .. } = step_expr(&Globals::new(), &e, 7) else { panic!() };
        assert_eq!(label, Label::New(name("#7a"), name("#7b"), Type::EndWait));
        assert_eq!(next, Expr::pair(Expr::var("#7a"), Expr::var("#7b")));
    }

    #[test]
    fn division_by_zero_is_stuck() {
        let e = Expr::BinOp(BinOp::Div, Box::new(Expr::int(1)), Box::new(Expr::int(0)));
        assert!(matches!(step(&e), ExprStep::Stuck(_)));
    }
}
