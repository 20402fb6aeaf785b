//! Bidirectional type checking with linear leftover contexts.
//!
//! `synth` and `check` return the context left after the expression has
//! consumed what it uses, together with an elaborated copy of the expression
//! in which every lambda carries its (normalised) parameter type. The runtime
//! executes elaborated definitions, so intermediate states can be re-typed.

pub mod context;
pub mod prelude;
pub mod process;

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use crate::ast::*;
use crate::diagnostics::{Diagnostic, Span};
use crate::kindcheck::{check_kind, check_type_decls, Aliases, Decls, KindContext, KindError};
use crate::normalize::{alpha_equal, directional, materialize_seq, nf_pos, Polarity};
use crate::parser::{self, lexer};

pub use context::{Entry, Mult, TypeContext};
pub use process::{type_process, type_process_with, SplitStrategy};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum TypeError {
    #[error("variable `{0}` is unbound or already consumed")]
    Unbound(Name),
    #[error("linear variable `{0}` is never consumed")]
    Unconsumed(Name),
    #[error("`{expr}` has type `{found}` but `{expected}` was expected")]
    Mismatch { expr: String, expected: Type, found: Type },
    #[error("`{expr}` has type `{ty}`, which is not a function")]
    NotFunction { expr: String, ty: Type },
    #[error("`{expr}` has type `{ty}`, which is not polymorphic")]
    NotForall { expr: String, ty: Type },
    #[error("cannot match on `{expr}` of type `{ty}`")]
    NotMatchable { expr: String, ty: Type },
    #[error("{0}")]
    Coverage(String),
    #[error("branches disagree: {0}")]
    BranchMismatch(String),
    #[error("`{0}` has no type signature")]
    MissingSignature(Name),
    #[error("the body of `rec {0}` uses linear variables of its context")]
    RecLinear(Name),
    #[error("`{0}` must be a value here")]
    NotValue(String),
    #[error("`{0}` would shadow a linear variable that is still in scope")]
    Shadow(Name),
    #[error("`{0}` is a protocol constructor and cannot build values; use `select {0}`")]
    ProtocolCtor(Name),
    #[error("cannot infer the type of `{0}`; add an annotation")]
    CannotInfer(String),
    #[error("the type of `rec {name}` must be a function type, not `{ty}`")]
    RecNotArrow { name: Name, ty: Type },
    #[error("`{expr}` has type `{ty}`, which is not a pair")]
    NotPair { expr: String, ty: Type },
    #[error("constructor `{tag}` binds {expected} variable(s) here, not {found}")]
    BinderCount { tag: Name, expected: usize, found: usize },
    #[error("cannot infer the type of a match with no branches")]
    EmptyMatch,
    #[error("`{0}` is defined more than once")]
    Duplicate(Name),
    #[error("`{0}` has a signature but no definition")]
    NoDefinition(Name),
    #[error("`{0}` has more parameters than its type allows")]
    TooManyParams(Name),
    #[error("`main` must have type `Unit`, not `{0}`")]
    MainType(Type),
    #[error("unknown constructor `{0}`")]
    UnknownCtor(Name),
    #[error("type abstraction `{0}` uses linear variables of its context")]
    Capture(String),
    #[error("{0}")]
    Kind(#[from] KindError),
    #[error("{1}")]
    At(Span, Box<TypeError>),
}

impl TypeError {
    pub fn code(&self) -> &'static str {
        use TypeError::*;
        match self {
            Unbound(_) => "T001",
            Unconsumed(_) => "T002",
            Mismatch { .. } => "T003",
            NotFunction { .. } => "T004",
            NotForall { .. } => "T005",
            NotMatchable { .. } => "T006",
            Coverage(_) => "T007",
            BranchMismatch(_) => "T008",
            MissingSignature(_) => "T009",
            RecLinear(_) => "T010",
            NotValue(_) => "T011",
            Shadow(_) => "T012",
            ProtocolCtor(_) => "T013",
            CannotInfer(_) => "T014",
            RecNotArrow { .. } => "T015",
            NotPair { .. } => "T016",
            BinderCount { .. } => "T017",
            EmptyMatch => "T018",
            Duplicate(_) => "T019",
            NoDefinition(_) => "T021",
            TooManyParams(_) => "T022",
            MainType(_) => "T023",
            UnknownCtor(_) => "T024",
            Capture(_) => "T025",
            Kind(k) => k.code(),
            At(_, e) => e.code(),
        }
    }

    /// Attaches a source position unless a more precise one is known.
    pub fn at(self, sp: Span) -> TypeError {
        match self {
            TypeError::At(..) => self,
            e => TypeError::At(sp, Box::new(e)),
        }
    }

    pub fn span(&self) -> Option<Span> {
        match self {
            TypeError::At(sp, _) => Some(*sp),
            _ => None,
        }
    }

    fn focus(&self) -> Option<&Name> {
        use TypeError::*;
        match self {
            Unbound(n) | Unconsumed(n) | Shadow(n) | ProtocolCtor(n) | UnknownCtor(n) | RecLinear(n) => Some(n),
            BinderCount { tag, .. } => Some(tag),
            RecNotArrow { name, .. } => Some(name),
            Kind(k) => k.focus(),
            At(_, e) => e.focus(),
            _ => None,
        }
    }
}

type TResult<T> = Result<T, TypeError>;

/// Result of synthesis: type, leftover context, elaborated expression.
#[derive(Clone, Debug)]
pub struct Typed {
    pub ty: Type,
    pub ctx: TypeContext,
    pub expr: Expr,
}

fn show(e: &Expr) -> String {
    let s = parser::pretty_expr(e);
    if s.chars().count() > 70 {
        let cut: String = s.chars().take(67).collect();
        format!("{cut}...")
    } else {
        s
    }
}

fn bool_type() -> Type {
    Type::proto("Bool", vec![])
}

fn fresh_apart(base: &str, avoid: &[&Name]) -> Name {
    if avoid.iter().any(|n| &***n == base) {
        fresh_name(base)
    } else {
        name(base)
    }
}

/// `forall params. payload_1 -> ... -> D params` for a data constructor.
pub fn ctor_type(decl: &ProtocolDecl, tag: &str) -> Option<Type> {
    let ctor = decl.ctor(tag)?;
    let result = Type::Proto(decl.name.clone(), decl.params.iter().map(|p| Type::Var(p.clone())).collect());
    let body = ctor.payload.iter().rev().fold(result, |acc, t| Type::fun(t.clone(), acc));
    let t = decl.params.iter().rev().fold(body, |acc, p| Type::Forall(p.clone(), Kind::T, Box::new(acc)));
    Some(nf_pos(&t))
}

/// Type of `select tag`.
pub fn typeof_select(decls: &Decls, tag: &str) -> TResult<Type> {
    let decl = decls.owner_of(tag).ok_or_else(|| TypeError::UnknownCtor(name(tag)))?;
    let payload = &decl.ctor(tag).expect("tag index is consistent").payload;
    let beta = fresh_apart("s", &decl.params.iter().collect::<Vec<_>>());
    let proto = Type::Proto(decl.name.clone(), decl.params.iter().map(|p| Type::Var(p.clone())).collect());
    let cont = materialize_seq(
        payload.iter().map(|t| directional(Polarity::Plus, nf_pos(t))).collect(),
        Type::Var(beta.clone()),
    );
    let body = Type::fun(Type::output(proto, Type::Var(beta.clone())), cont);
    let t = Type::Forall(beta, Kind::S, Box::new(body));
    let k = decl.param_kind();
    let t = decl.params.iter().rev().fold(t, |acc, p| Type::Forall(p.clone(), k, Box::new(acc)));
    Ok(nf_pos(&t))
}

pub fn typeof_const(decls: &Decls, c: &Const) -> TResult<Type> {
    let a = || Type::var("a");
    let b = || Type::var("b");
    Ok(match c {
        Const::Unit => Type::Unit,
        Const::Fork => Type::fun(Type::fun(Type::Unit, Type::Unit), Type::Unit),
        Const::New => Type::forall("a", Kind::S, Type::pair(a(), Type::dual(a()))),
        Const::Receive => Type::forall(
            "a",
            Kind::T,
            Type::forall("b", Kind::S, Type::fun(Type::input(a(), b()), Type::pair(a(), b()))),
        ),
        Const::Send => Type::forall(
            "a",
            Kind::T,
            Type::forall("b", Kind::S, Type::fun(a(), Type::fun(Type::output(a(), b()), b()))),
        ),
        Const::Wait => Type::fun(Type::EndWait, Type::Unit),
        Const::Terminate => Type::fun(Type::EndTerm, Type::Unit),
        Const::PrintInt => Type::fun(Type::int(), Type::Unit),
        Const::PrintString => Type::fun(Type::base("String"), Type::Unit),
        Const::Select(tag) => return typeof_select(decls, tag),
    })
}

/// Types whose values hold no channel and no closure over one: base types,
/// `Unit`, pairs and data built from them, and polymorphic values (a type
/// abstraction may only capture such variables).
pub fn is_unrestricted(decls: &Decls, t: &Type) -> bool {
    fn go(decls: &Decls, t: &Type, seen: &mut Vec<Type>) -> bool {
        match t {
            Type::Unit | Type::Base(_) | Type::Forall(..) => true,
            Type::Pair(a, b) => go(decls, a, seen) && go(decls, b, seen),
            Type::Proto(n, args) => {
                let Some(d) = decls.get(n) else { return false };
                if !d.is_data || seen.len() > 32 {
                    return false;
                }
                if seen.contains(t) {
                    return true;
                }
                seen.push(t.clone());
                let ok = d.ctors.iter().all(|c| {
                    let payload = d.instantiate(&c.tag, args).expect("own tag");
                    payload.iter().all(|p| go(decls, &nf_pos(p), seen))
                });
                seen.pop();
                ok
            }
            _ => false,
        }
    }
    go(decls, t, &mut Vec::new())
}

/// Binds a term variable; unrestricted types get an unrestricted entry.
fn bind_var(delta: &KindContext, ctx: &mut TypeContext, x: &Name, t: Type) -> TResult<u32> {
    if ctx.has_linear(x) {
        return Err(TypeError::Shadow(x.clone()));
    }
    let mult = if is_unrestricted(&delta.decls, &t) { Mult::Un } else { Mult::Lin };
    Ok(ctx.bind(x.clone(), t, mult))
}

/// Leaves the scope of the given bindings: linear ones must be gone.
fn release(ctx: &mut TypeContext, bound: &[u32]) -> TResult<()> {
    for uid in bound {
        if let Some(e) = ctx.release(*uid) {
            if e.mult == Mult::Lin {
                return Err(TypeError::Unconsumed(e.name));
            }
        }
    }
    Ok(())
}

fn no_capture(before: &TypeContext, after: &TypeContext, e: &Expr) -> TResult<()> {
    if after.linear().count() != before.linear().count() {
        return Err(TypeError::Capture(show(e)));
    }
    Ok(())
}

/// Renames a type binder that is already in scope so types mentioning the
/// outer one are not captured.
fn freshen_tabs(delta: &KindContext, a: &Name, v: &Expr) -> (Name, Expr) {
    if delta.contains(a) {
        let a2 = fresh_name(a);
        let v2 = v.subst_type(a, &Type::Var(a2.clone()));
        (a2, v2)
    } else {
        (a.clone(), v.clone())
    }
}

pub fn synth(delta: &KindContext, g: &TypeContext, e: &Expr) -> TResult<Typed> {
    let decls = &delta.decls;
    match e {
        Expr::At(sp, inner) => synth(delta, g, inner).map_err(|err| err.at(*sp)),
        Expr::Var(x) => {
            let (i, entry) = g.lookup(x).ok_or_else(|| TypeError::Unbound(x.clone()))?;
            let ty = entry.ty.clone();
            let mut ctx = g.clone();
            if entry.mult == Mult::Lin {
                check_kind(delta, &ty, Kind::T)?;
                ctx.remove_at(i);
            }
            Ok(Typed { ty, ctx, expr: e.clone() })
        }
        Expr::Const(c) => Ok(Typed { ty: typeof_const(decls, c)?, ctx: g.clone(), expr: e.clone() }),
        Expr::Lit(l) => {
            let ty = match l {
                Lit::Int(_) => Type::int(),
                Lit::Char(_) => Type::base("Char"),
                Lit::Str(_) => Type::base("String"),
            };
            Ok(Typed { ty, ctx: g.clone(), expr: e.clone() })
        }
        Expr::Con { tag, targs, args } => {
            let decl = decls.owner_of(tag).ok_or_else(|| TypeError::UnknownCtor(tag.clone()))?;
            if !decl.is_data {
                return Err(TypeError::ProtocolCtor(tag.clone()));
            }
            let mut ty = ctor_type(decl, tag).expect("tag index is consistent");
            for t in targs {
                ty = instantiate(delta, e, ty, t)?;
            }
            let mut ctx = g.clone();
            let mut out = Vec::new();
            for a in args {
                let Type::Fun(dom, cod) = ty else {
                    return Err(TypeError::NotFunction { expr: show(e), ty });
                };
                let (c, a2) = check(delta, &ctx, a, &dom)?;
                ctx = c;
                out.push(a2);
                ty = *cod;
            }
            Ok(Typed { ty, ctx, expr: Expr::Con { tag: tag.clone(), targs: targs.clone(), args: out } })
        }
        Expr::Abs(x, Some(t), body) => {
            check_kind(delta, t, Kind::T)?;
            let t = nf_pos(t);
            let mut ctx = g.clone();
            let u = bind_var(delta, &mut ctx, x, t.clone())?;
            let mut r = synth(delta, &ctx, body)?;
            release(&mut r.ctx, &[u])?;
            Ok(Typed {
                ty: Type::fun(t.clone(), r.ty),
                ctx: r.ctx,
                expr: Expr::Abs(x.clone(), Some(t), Box::new(r.expr)),
            })
        }
        Expr::Abs(_, None, _) => Err(TypeError::CannotInfer(show(e))),
        Expr::Rec(f, t, v) => {
            if !v.is_syntactic_value() {
                return Err(TypeError::NotValue(show(v)));
            }
            check_kind(delta, t, Kind::T)?;
            let vt = nf_pos(t);
            if !matches!(vt, Type::Fun(..)) {
                return Err(TypeError::RecNotArrow { name: f.clone(), ty: vt });
            }
            let mut g1 = g.clone();
            g1.bind(f.clone(), vt.clone(), Mult::Un);
            let (mut c, v2) = check(delta, &g1, v, &vt)?;
            c.remove(f);
            if !c.alpha_eq(g) {
                return Err(TypeError::RecLinear(f.clone()));
            }
            Ok(Typed { ty: vt.clone(), ctx: c, expr: Expr::Rec(f.clone(), vt, Box::new(v2)) })
        }
        Expr::TAbs(a, k, v) => {
            if !v.is_syntactic_value() {
                return Err(TypeError::NotValue(show(v)));
            }
            let (a2, v2) = freshen_tabs(delta, a, v);
            let r = synth(&delta.with(a2.clone(), *k), g, &v2)?;
            no_capture(g, &r.ctx, e)?;
            Ok(Typed {
                ty: Type::Forall(a2.clone(), *k, Box::new(r.ty)),
                ctx: r.ctx,
                expr: Expr::TAbs(a2, *k, Box::new(r.expr)),
            })
        }
        Expr::App(f, a) => {
            if let Expr::Abs(x, None, body) = f.peel() {
                let ta = synth(delta, g, a)?;
                let mut ctx = ta.ctx;
                let u = bind_var(delta, &mut ctx, x, ta.ty.clone())?;
                let mut r = synth(delta, &ctx, body)?;
                release(&mut r.ctx, &[u])?;
                let lam = Expr::Abs(x.clone(), Some(ta.ty), Box::new(r.expr));
                return Ok(Typed { ty: r.ty, ctx: r.ctx, expr: Expr::app(lam, ta.expr) });
            }
            let tf = synth(delta, g, f)?;
            let Type::Fun(dom, cod) = tf.ty else {
                return Err(TypeError::NotFunction { expr: show(f), ty: tf.ty });
            };
            let (ctx, a2) = check(delta, &tf.ctx, a, &dom)?;
            Ok(Typed { ty: *cod, ctx, expr: Expr::app(tf.expr, a2) })
        }
        Expr::TApp(f, t) => {
            let tf = synth(delta, g, f)?;
            let ty = instantiate(delta, f, tf.ty, t)?;
            Ok(Typed { ty, ctx: tf.ctx, expr: Expr::tapp(tf.expr, t.clone()) })
        }
        Expr::Pair(a, b) => {
            let ta = synth(delta, g, a)?;
            let tb = synth(delta, &ta.ctx, b)?;
            Ok(Typed { ty: Type::pair(ta.ty, tb.ty), ctx: tb.ctx, expr: Expr::pair(ta.expr, tb.expr) })
        }
        Expr::Let(x, e1, e2) => {
            let t1 = synth(delta, g, e1)?;
            let mut ctx = t1.ctx;
            let u = bind_var(delta, &mut ctx, x, t1.ty)?;
            let mut r = synth(delta, &ctx, e2)?;
            release(&mut r.ctx, &[u])?;
            Ok(Typed { ty: r.ty, ctx: r.ctx, expr: Expr::Let(x.clone(), Box::new(t1.expr), Box::new(r.expr)) })
        }
        Expr::LetPair(x, y, e1, e2) => {
            let (ctx, uids, e1b) = bind_pair(delta, g, x, y, e1)?;
            let mut r = synth(delta, &ctx, e2)?;
            release(&mut r.ctx, &uids)?;
            Ok(Typed {
                ty: r.ty,
                ctx: r.ctx,
                expr: Expr::LetPair(x.clone(), y.clone(), Box::new(e1b), Box::new(r.expr)),
            })
        }
        Expr::LetUnit(e1, e2) => {
            let (ctx, e1b) = check(delta, g, e1, &Type::Unit)?;
            let r = synth(delta, &ctx, e2)?;
            Ok(Typed { ty: r.ty, ctx: r.ctx, expr: Expr::let_unit(e1b, r.expr) })
        }
        Expr::Match(s, arms) => {
            let ts = synth(delta, g, s)?;
            let (ty, ctx, arms2) = match_arms(delta, ts.ctx, &ts.ty, s, arms, None)?;
            Ok(Typed { ty, ctx, expr: Expr::Match(Box::new(ts.expr), arms2) })
        }
        Expr::BinOp(op, a, b) => {
            let (c1, a2) = check(delta, g, a, &Type::int())?;
            let (c2, b2) = check(delta, &c1, b, &Type::int())?;
            let ty = if op.is_comparison() {
                if decls.get("Bool").is_none() {
                    return Err(KindError::UnknownType(name("Bool")).into());
                }
                bool_type()
            } else {
                Type::int()
            };
            Ok(Typed { ty, ctx: c2, expr: Expr::BinOp(*op, Box::new(a2), Box::new(b2)) })
        }
    }
}

fn instantiate(delta: &KindContext, e: &Expr, ty: Type, arg: &Type) -> TResult<Type> {
    let Type::Forall(a, k, u) = ty else {
        return Err(TypeError::NotForall { expr: show(e), ty });
    };
    check_kind(delta, arg, k)?;
    Ok(nf_pos(&u.subst(&a, arg)))
}

fn bind_pair(
    delta: &KindContext,
    g: &TypeContext,
    x: &Name,
    y: &Name,
    e1: &Expr,
) -> TResult<(TypeContext, [u32; 2], Expr)> {
    let t1 = synth(delta, g, e1)?;
    let Type::Pair(tx, ty) = t1.ty else {
        return Err(TypeError::NotPair { expr: show(e1), ty: t1.ty });
    };
    if x == y {
        return Err(TypeError::Shadow(x.clone()));
    }
    let mut ctx = t1.ctx;
    let ux = bind_var(delta, &mut ctx, x, *tx)?;
    let uy = bind_var(delta, &mut ctx, y, *ty)?;
    Ok((ctx, [ux, uy], t1.expr))
}

/// Branch types for a match on a value of type `scrut_ty`: channel matches
/// on `?(P us).S`, data matches on `D us`.
fn match_arms(
    delta: &KindContext,
    g: TypeContext,
    scrut_ty: &Type,
    scrut: &Expr,
    arms: &[Arm],
    expected: Option<&Type>,
) -> TResult<(Type, TypeContext, Vec<Arm>)> {
    let decls = &delta.decls;
    let not_matchable = || TypeError::NotMatchable { expr: show(scrut), ty: scrut_ty.clone() };
    let (decl, args, cont) = match scrut_ty {
        Type::In(p, s) => match &**p {
            Type::Proto(n, us) => (decls.get(n).ok_or_else(not_matchable)?, us, Some(&**s)),
            _ => return Err(not_matchable()),
        },
        Type::Proto(n, us) => {
            let d = decls.get(n).ok_or_else(not_matchable)?;
            if !d.is_data {
                return Err(not_matchable());
            }
            (d, us, None)
        }
        _ => return Err(not_matchable()),
    };
    let mut seen: Vec<&Name> = Vec::new();
    for arm in arms {
        if decl.ctor(&arm.tag).is_none() {
            return Err(TypeError::Coverage(format!("`{}` is not a constructor of `{}`", arm.tag, decl.name)));
        }
        if seen.contains(&&arm.tag) {
            return Err(TypeError::Coverage(format!("constructor `{}` is matched twice", arm.tag)));
        }
        seen.push(&arm.tag);
    }
    if let Some(missing) = decl.ctors.iter().find(|c| !seen.contains(&&c.tag)) {
        return Err(TypeError::Coverage(format!("constructor `{}` of `{}` is not matched", missing.tag, decl.name)));
    }
    let mut first: Option<(Name, Type, TypeContext)> = None;
    let mut out = Vec::new();
    for arm in arms {
        let payload = decl.instantiate(&arm.tag, args).expect("checked above");
        let binder_types: Vec<Type> = match cont {
            Some(s) => vec![nf_pos(&materialize_seq(
                payload.iter().map(|t| directional(Polarity::Minus, nf_pos(t))).collect(),
                s.clone(),
            ))],
            None => payload.iter().map(nf_pos).collect(),
        };
        if arm.binders.len() != binder_types.len() {
            return Err(TypeError::BinderCount {
                tag: arm.tag.clone(),
                expected: binder_types.len(),
                found: arm.binders.len(),
            });
        }
        let mut ctx = g.clone();
        let mut uids = Vec::new();
        for (i, (b, t)) in arm.binders.iter().zip(binder_types).enumerate() {
            if arm.binders[..i].contains(b) {
                return Err(TypeError::Shadow(b.clone()));
            }
            uids.push(bind_var(delta, &mut ctx, b, t)?);
        }
        let (ty, mut c, body) = match expected {
            Some(exp) => {
                let (c, body) = check(delta, &ctx, &arm.body, exp)?;
                (exp.clone(), c, body)
            }
            None => {
                let r = synth(delta, &ctx, &arm.body)?;
                (r.ty, r.ctx, r.expr)
            }
        };
        release(&mut c, &uids)?;
        match &first {
            None => first = Some((arm.tag.clone(), ty, c)),
            Some((tag0, t0, c0)) => {
                if !alpha_equal(t0, &ty) {
                    return Err(TypeError::BranchMismatch(format!(
                        "branch `{}` has type `{ty}` but branch `{tag0}` has type `{t0}`",
                        arm.tag
                    )));
                }
                if !c0.alpha_eq(&c) {
                    return Err(TypeError::BranchMismatch(format!(
                        "branch `{}` leaves {c} but branch `{tag0}` leaves {c0}",
                        arm.tag
                    )));
                }
            }
        }
        out.push(Arm { tag: arm.tag.clone(), binders: arm.binders.clone(), body });
    }
    match first {
        Some((_, t, c)) => Ok((t, c, out)),
        None => match expected {
            Some(t) => Ok((t.clone(), g, out)),
            None => Err(TypeError::EmptyMatch),
        },
    }
}

/// Checks `e` against `expected`, which must be in normal form.
pub fn check(delta: &KindContext, g: &TypeContext, e: &Expr, expected: &Type) -> TResult<(TypeContext, Expr)> {
    match (e, expected) {
        (Expr::At(sp, inner), _) => check(delta, g, inner, expected).map_err(|err| err.at(*sp)),
        (Expr::Abs(x, None, body), Type::Fun(dom, cod)) => {
            let mut ctx = g.clone();
            let u = bind_var(delta, &mut ctx, x, (**dom).clone())?;
            let (mut c, b) = check(delta, &ctx, body, cod)?;
            release(&mut c, &[u])?;
            Ok((c, Expr::Abs(x.clone(), Some((**dom).clone()), Box::new(b))))
        }
        (Expr::TAbs(a, k, v), Type::Forall(b, k2, u)) => {
            if k != k2 {
                let found = synth(delta, g, e).map(|t| t.ty).unwrap_or_else(|_| Type::Forall(a.clone(), *k, u.clone()));
                return Err(TypeError::Mismatch { expr: show(e), expected: expected.clone(), found });
            }
            if !v.is_syntactic_value() {
                return Err(TypeError::NotValue(show(v)));
            }
            let (a2, v2) = freshen_tabs(delta, a, v);
            let u2 = if *b == a2 { (**u).clone() } else { u.subst(b, &Type::Var(a2.clone())) };
            let (c, v3) = check(&delta.with(a2.clone(), *k), g, &v2, &u2)?;
            no_capture(g, &c, e)?;
            Ok((c, Expr::TAbs(a2, *k, Box::new(v3))))
        }
        (Expr::Let(x, e1, e2), _) => {
            let t1 = synth(delta, g, e1)?;
            let mut ctx = t1.ctx;
            let u = bind_var(delta, &mut ctx, x, t1.ty)?;
            let (mut c, b) = check(delta, &ctx, e2, expected)?;
            release(&mut c, &[u])?;
            Ok((c, Expr::Let(x.clone(), Box::new(t1.expr), Box::new(b))))
        }
        (Expr::LetPair(x, y, e1, e2), _) => {
            let (ctx, uids, e1b) = bind_pair(delta, g, x, y, e1)?;
            let (mut c, b) = check(delta, &ctx, e2, expected)?;
            release(&mut c, &uids)?;
            Ok((c, Expr::LetPair(x.clone(), y.clone(), Box::new(e1b), Box::new(b))))
        }
        (Expr::LetUnit(e1, e2), _) => {
            let (ctx, e1b) = check(delta, g, e1, &Type::Unit)?;
            let (c, b) = check(delta, &ctx, e2, expected)?;
            Ok((c, Expr::let_unit(e1b, b)))
        }
        (Expr::Match(s, arms), _) => {
            let ts = synth(delta, g, s)?;
            let (_, c, arms2) = match_arms(delta, ts.ctx, &ts.ty, s, arms, Some(expected))?;
            Ok((c, Expr::Match(Box::new(ts.expr), arms2)))
        }
        (Expr::Pair(a, b), Type::Pair(ta, tb)) => {
            let (c1, a2) = check(delta, g, a, ta)?;
            let (c2, b2) = check(delta, &c1, b, tb)?;
            Ok((c2, Expr::pair(a2, b2)))
        }
        (Expr::App(f, a), _) if matches!(f.peel(), Expr::Abs(_, None, _)) => {
            let ta = synth(delta, g, a)?;
            let (c, f2) = check(delta, &ta.ctx, f, &Type::fun(ta.ty, expected.clone()))?;
            Ok((c, Expr::app(f2, ta.expr)))
        }
        _ => {
            let t = synth(delta, g, e)?;
            if alpha_equal(&t.ty, expected) {
                Ok((t.ctx, t.expr))
            } else {
                Err(TypeError::Mismatch { expr: show(e), expected: expected.clone(), found: t.ty })
            }
        }
    }
}

/// A checked top-level definition.
#[derive(Clone, Debug)]
pub struct Global {
    pub ty: Type,
    pub body: Expr,
}

/// A well-typed program ready to run.
#[derive(Clone, Debug)]
pub struct CheckedProgram {
    pub delta: KindContext,
    pub globals: HashMap<Name, Global>,
    pub order: Vec<Name>,
}

impl CheckedProgram {
    pub fn decls(&self) -> &Arc<Decls> {
        &self.delta.decls
    }

    /// All top-level names, unrestricted.
    pub fn context(&self) -> TypeContext {
        let mut g = TypeContext::new();
        for n in &self.order {
            g.bind(n.clone(), self.globals[n].ty.clone(), Mult::Un);
        }
        g
    }

    pub fn main(&self) -> Option<&Expr> {
        self.globals.get("main").map(|g| &g.body)
    }
}

fn expand_expr(aliases: &Aliases, e: &Expr) -> Result<Expr, KindError> {
    let go = |x: &Expr| expand_expr(aliases, x).map(Box::new);
    Ok(match e {
        Expr::Var(_) | Expr::Const(_) | Expr::Lit(_) => e.clone(),
        Expr::Con { tag, targs, args } => Expr::Con {
            tag: tag.clone(),
            targs: targs.iter().map(|t| aliases.expand(t)).collect::<Result<_, _>>()?,
            args: args.iter().map(|a| expand_expr(aliases, a)).collect::<Result<_, _>>()?,
        },
        Expr::Abs(x, t, b) => Expr::Abs(x.clone(), t.as_ref().map(|t| aliases.expand(t)).transpose()?, go(b)?),
        Expr::Rec(x, t, b) => Expr::Rec(x.clone(), aliases.expand(t)?, go(b)?),
        Expr::TAbs(a, k, b) => Expr::TAbs(a.clone(), *k, go(b)?),
        Expr::App(a, b) => Expr::App(go(a)?, go(b)?),
        Expr::TApp(a, t) => Expr::TApp(go(a)?, aliases.expand(t)?),
        Expr::Pair(a, b) => Expr::Pair(go(a)?, go(b)?),
        Expr::Let(x, a, b) => Expr::Let(x.clone(), go(a)?, go(b)?),
        Expr::LetPair(x, y, a, b) => Expr::LetPair(x.clone(), y.clone(), go(a)?, go(b)?),
        Expr::LetUnit(a, b) => Expr::LetUnit(go(a)?, go(b)?),
        Expr::BinOp(op, a, b) => Expr::BinOp(*op, go(a)?, go(b)?),
        Expr::At(sp, a) => Expr::At(*sp, go(a)?),
        Expr::Match(s, arms) => Expr::Match(
            go(s)?,
            arms.iter()
                .map(|arm| {
                    Ok(Arm { tag: arm.tag.clone(), binders: arm.binders.clone(), body: expand_expr(aliases, &arm.body)? })
                })
                .collect::<Result<_, KindError>>()?,
        ),
    })
}

/// Turns definition parameters into lambdas; type parameters take their
/// kinds from the signature.
fn desugar_params(def: &Definition, sig: &Type) -> TResult<Expr> {
    let mut binders = Vec::new();
    let mut t = sig;
    for p in &def.params {
        match (p, t) {
            (Param::Var(x), Type::Fun(_, cod)) => {
                binders.push((x.clone(), None));
                t = cod;
            }
            (Param::Type(a), Type::Forall(_, k, body)) => {
                binders.push((a.clone(), Some(*k)));
                t = body;
            }
            _ => return Err(TypeError::TooManyParams(def.name.clone())),
        }
    }
    Ok(binders.into_iter().rev().fold(def.body.clone(), |b, (x, k)| match k {
        None => Expr::Abs(x, None, Box::new(b)),
        Some(k) => Expr::TAbs(x, k, Box::new(b)),
    }))
}

fn prelude_program() -> SourceProgram {
    let (p, d) = parser::parse_program(prelude::PRELUDE);
    debug_assert!(d.is_empty(), "prelude parses: {d:?}");
    SourceProgram { spans: vec![Span::default(); p.decls.len()], decls: p.decls }
}

/// Checks a parsed program (together with the prelude). Diagnostics are
/// located at the offending declaration; `check_source` refines them.
pub fn elaborate(program: &SourceProgram) -> (CheckedProgram, Vec<FocusedDiagnostic>) {
    let mut full = prelude_program();
    let offset = full.decls.len();
    full.decls.extend(program.decls.iter().cloned());
    full.spans.extend((0..program.decls.len()).map(|i| program.span_of(i)));

    let mut kdiags = Vec::new();
    let tdecls = check_type_decls(&full, &mut kdiags);
    let mut diags: Vec<FocusedDiagnostic> = kdiags.into_iter().map(Into::into).collect();
    let delta = KindContext::new(tdecls.decls.clone());
    let mut errors: Vec<(usize, TypeError)> = Vec::new();

    let mut sigs: HashMap<Name, (usize, Type)> = HashMap::new();
    let mut order = Vec::new();
    for (i, d) in full.decls.iter().enumerate() {
        let Decl::Signature(s) = d else { continue };
        if sigs.contains_key(&s.name) {
            errors.push((i, TypeError::Duplicate(s.name.clone())));
            continue;
        }
        let t = match tdecls.aliases.expand(&s.ty) {
            Ok(t) => t,
            Err(e) => {
                errors.push((i, e.into()));
                continue;
            }
        };
        if let Err(e) = check_kind(&delta, &t, Kind::T) {
            errors.push((i, e.into()));
            continue;
        }
        sigs.insert(s.name.clone(), (i, t));
        order.push(s.name.clone());
    }

    let mut g = TypeContext::new();
    for n in &order {
        g.bind(n.clone(), nf_pos(&sigs[n].1), Mult::Un);
    }

    let mut globals = HashMap::new();
    let mut defined: Vec<Name> = Vec::new();
    for (i, d) in full.decls.iter().enumerate() {
        let Decl::Definition(def) = d else { continue };
        if defined.contains(&def.name) {
            errors.push((i, TypeError::Duplicate(def.name.clone())));
            continue;
        }
        defined.push(def.name.clone());
        let Some((_, sig)) = sigs.get(&def.name) else {
            errors.push((i, TypeError::MissingSignature(def.name.clone())));
            continue;
        };
        let result = desugar_params(def, sig)
            .and_then(|e| expand_expr(&tdecls.aliases, &e).map_err(TypeError::from))
            .and_then(|e| {
                let ty = nf_pos(sig);
                let (_, body) = check(&delta, &g, &e, &ty)?;
                Ok(Global { ty, body })
            });
        match result {
            Ok(gl) => {
                if &*def.name == "main" && gl.ty != Type::Unit {
                    errors.push((i, TypeError::MainType(gl.ty.clone())));
                }
                globals.insert(def.name.clone(), gl);
            }
            Err(e) => errors.push((i, e)),
        }
    }
    for n in &order {
        if !defined.contains(n) {
            errors.push((sigs[n].0, TypeError::NoDefinition(n.clone())));
        }
    }
    errors.sort_by_key(|(i, _)| *i);
    for (i, e) in errors {
        let i_src = i.checked_sub(offset);
        let d = match e.span() {
            Some(sp) => Diagnostic::error(e.code(), sp, e.to_string()).with_focus(None, None),
            None => Diagnostic::error(e.code(), full.span_of(i), e.to_string()).with_focus(e.focus().cloned(), i_src),
        };
        diags.push(d);
    }
    let order = order.into_iter().filter(|n| globals.contains_key(n)).collect();
    (CheckedProgram { delta, globals, order }, diags)
}

/// Diagnostics for a parsed program.
pub fn check_program(program: &SourceProgram) -> Vec<Diagnostic> {
    elaborate(program).1.into_iter().map(|d| d.diag).collect()
}

/// Parses and checks source text. Diagnostics point at the offending
/// identifier when one can be found inside the declaration.
pub fn check_source(src: &str) -> (Option<CheckedProgram>, Vec<Diagnostic>) {
    let (program, mut diags) = parser::parse_program(src);
    let (checked, tdiags) = elaborate(&program);
    let (toks, _) = lexer::lex(src);
    for fd in tdiags {
        diags.push(refine(&program, &toks, fd));
    }
    diags.sort_by_key(|d| (d.span.line, d.span.col));
    if crate::diagnostics::has_errors(&diags) {
        (None, diags)
    } else {
        (Some(checked), diags)
    }
}

/// Parses and checks, failing on any error.
pub fn load(src: &str) -> Result<CheckedProgram, Vec<Diagnostic>> {
    match check_source(src) {
        (Some(p), _) => Ok(p),
        (None, d) => Err(d),
    }
}

fn refine(program: &SourceProgram, toks: &[lexer::Token], fd: FocusedDiagnostic) -> Diagnostic {
    let FocusedDiagnostic { mut diag, focus, decl } = fd;
    let (Some(focus), Some(i)) = (focus, decl) else { return diag };
    let start = program.span_of(i);
    let end = program.spans.get(i + 1).map(|s| (s.line, s.col)).unwrap_or((u32::MAX, 0));
    let hit = toks.iter().find(|t| {
        let pos = (t.span.line, t.span.col);
        pos >= (start.line, start.col)
            && pos < end
            && matches!(&t.tok, lexer::Tok::LIdent(s) | lexer::Tok::UIdent(s) if **s == *focus)
    });
    if let Some(t) = hit {
        diag.span = t.span;
    }
    diag
}

/// A diagnostic plus what it is about, before source positions are refined.
#[derive(Clone, Debug)]
pub struct FocusedDiagnostic {
    pub diag: Diagnostic,
    focus: Option<Name>,
    decl: Option<usize>,
}

impl From<Diagnostic> for FocusedDiagnostic {
    fn from(diag: Diagnostic) -> Self {
        FocusedDiagnostic { diag, focus: None, decl: None }
    }
}

trait WithFocus {
    fn with_focus(self, focus: Option<Name>, decl: Option<usize>) -> FocusedDiagnostic;
}

impl WithFocus for Diagnostic {
    fn with_focus(self, focus: Option<Name>, decl: Option<usize>) -> FocusedDiagnostic {
        FocusedDiagnostic { diag: self, focus, decl }
    }
}

#[cfg(test)]
mod tests;
