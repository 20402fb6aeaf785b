//! How a label changes the typing of the channels it touches.

use thiserror::Error;

use crate::ast::{Expr, Type};
use crate::kindcheck::Decls;
use crate::normalize::{directional, materialize_seq, nf_neg, nf_pos, Polarity};
use crate::typecheck::{Mult, TypeContext};

use super::{channels, Label, Sigma};

/// Which direction the selecting side's continuation is built in. `Flipped`
/// is a deliberately wrong rule, used to check that the preservation harness
/// notices.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SelRule {
    #[default]
    Sound,
    Flipped,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("label does not apply: {0}")]
pub struct CtxError(pub String);

pub fn step_ctx(decls: &Decls, gamma: &TypeContext, label: &Label, sel: SelRule) -> Result<TypeContext, CtxError> {
    let mut g = gamma.clone();
    apply(decls, &mut g, label, sel)?;
    Ok(g)
}

fn apply(decls: &Decls, g: &mut TypeContext, label: &Label, sel: SelRule) -> Result<(), CtxError> {
    match label {
        Label::Beta | Label::Tau => Ok(()),
        Label::New(x, y, t) => {
            g.bind(x.clone(), nf_pos(t), Mult::Lin);
            g.bind(y.clone(), nf_neg(t), Mult::Lin);
            Ok(())
        }
        Label::Fork(v) => {
            consume(g, v);
            Ok(())
        }
        Label::Sigma(s) => sigma(decls, g, s, sel),
        Label::Scope { binders, chan, value } => {
            let Type::Out(_, s) = entry(g, chan)?.clone() else {
                return Err(shape(chan, "an output", g));
            };
            consume(g, value);
            set(g, chan, *s);
            let sent = channels(value);
            for (a, b, t) in binders {
                match (sent.contains(a), sent.contains(b)) {
                    (true, false) => {
                        g.bind(b.clone(), nf_neg(t), Mult::Lin);
                    }
                    (false, true) => {
                        g.bind(a.clone(), t.clone(), Mult::Lin);
                    }
                    _ => {}
                }
            }
            Ok(())
        }
        Label::Par(a, b) => {
            apply(decls, g, a, sel)?;
            apply(decls, g, b, sel)
        }
    }
}

fn sigma(decls: &Decls, g: &mut TypeContext, s: &Sigma, sel: SelRule) -> Result<(), CtxError> {
    let x = s.subject();
    let t = entry(g, x)?.clone();
    match (s, t) {
        (Sigma::RecvVal(_, v), Type::In(p, k)) => {
            set(g, x, *k);
            if let Expr::Var(a) = v {
                if super::is_channel(a) {
                    g.bind(a.clone(), *p, Mult::Lin);
                }
            }
            Ok(())
        }
        (Sigma::SendVal(_, v), Type::Out(_, k)) => {
            consume(g, v);
            set(g, x, *k);
            Ok(())
        }
        (Sigma::RecvTag(_, c), Type::In(p, k)) => branch(decls, g, x, c, &p, *k, Polarity::Minus),
        (Sigma::SendTag(_, c), Type::Out(p, k)) => {
            let pol = match sel {
                SelRule::Sound => Polarity::Plus,
                SelRule::Flipped => Polarity::Minus,
            };
            branch(decls, g, x, c, &p, *k, pol)
        }
        (Sigma::Close(_), Type::EndWait) | (Sigma::Open(_), Type::EndTerm) => {
            g.remove(x);
            Ok(())
        }
        (s, _) => Err(shape(x, &format!("a type for `{s}`"), g)),
    }
}

fn branch(
    decls: &Decls,
    g: &mut TypeContext,
    x: &str,
    tag: &str,
    p: &Type,
    k: Type,
    pol: Polarity,
) -> Result<(), CtxError> {
    let Type::Proto(n, us) = p else {
        return Err(shape(x, "a protocol message", g));
    };
    let payload = decls
        .get(n)
        .and_then(|d| d.instantiate(tag, us))
        .ok_or_else(|| CtxError(format!("`{tag}` is not a constructor of `{n}`")))?;
    let t = materialize_seq(payload.iter().map(|t| directional(pol, nf_pos(t))).collect(), k);
    set(g, x, nf_pos(&t));
    Ok(())
}

fn entry<'a>(g: &'a TypeContext, x: &str) -> Result<&'a Type, CtxError> {
    g.get(x).ok_or_else(|| CtxError(format!("`{x}` is not in the context")))
}

fn set(g: &mut TypeContext, x: &str, t: Type) {
    let i = g.lookup(x).expect("checked by caller").0;
    g.entries[i].ty = t;
}

fn consume(g: &mut TypeContext, v: &Expr) {
    for c in channels(v) {
        g.remove(&c);
    }
}

fn shape(x: &str, want: &str, g: &TypeContext) -> CtxError {
    CtxError(format!("`{x}` needs {want} in {g}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::name;

    fn ctx(entries: &[(&str, Type)]) -> TypeContext {
        let mut g = TypeContext::new();
        for (x, t) in entries {
            g.bind(name(x), t.clone(), Mult::Lin);
        }
        g
    }

    #[test]
    fn receive_advances_the_channel() {
        let g = ctx(&[("x", Type::input(Type::Unit, Type::EndTerm))]);
        let l = Label::Sigma(Sigma::RecvVal(name("x"), Expr::unit()));
        let g2 = step_ctx(&Decls::default(), &g, &l, SelRule::Sound).unwrap();
        assert_eq!(g2.get("x"), Some(&Type::EndTerm));
        assert_eq!(g2.entries.len(), 1);
    }

    #[test]
    fn new_adds_both_ends() {
        let l = Label::New(name("x"), name("y"), Type::EndWait);
        let g = step_ctx(&Decls::default(), &TypeContext::new(), &l, SelRule::Sound).unwrap();
        assert_eq!(g.get("x"), Some(&Type::EndWait));
        assert_eq!(g.get("y"), Some(&Type::EndTerm));
    }

    #[test]
    fn wait_removes_the_endpoint() {
        let g = ctx(&[("x", Type::EndWait)]);
        let l = Label::Sigma(Sigma::Close(name("x")));
        assert!(step_ctx(&Decls::default(), &g, &l, SelRule::Sound).unwrap().entries.is_empty());
        let wrong = Label::Sigma(Sigma::Open(name("x")));
        assert!(step_ctx(&Decls::default(), &g, &wrong, SelRule::Sound).is_err());
    }
}
