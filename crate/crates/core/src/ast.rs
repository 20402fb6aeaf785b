//! Abstract syntax for kinds, types, expressions, processes and programs.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::diagnostics::Span;

/// Interned-ish identifier. Cheap to clone and safe to share across threads.
pub type Name = Arc<str>;

pub fn name(s: &str) -> Name {
    Arc::from(s)
}

static FRESH: AtomicU64 = AtomicU64::new(0);

/// A name that has not been handed out before. The `'` suffix keeps it a
/// valid identifier so renamed terms still pretty-print and re-parse.
pub fn fresh_name(base: &str) -> Name {
    let stem = base.split('\'').next().unwrap_or(base);
    let stem = if stem.is_empty() { "v" } else { stem };
    let n = FRESH.fetch_add(1, Ordering::Relaxed);
    Arc::from(format!("{stem}'{n}"))
}

/// Kinds, ordered `S < T < P`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    S,
    T,
    P,
}

impl Kind {
    pub fn is_sub(self, other: Kind) -> bool {
        self <= other
    }

    pub fn join(self, other: Kind) -> Kind {
        self.max(other)
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::S => "S",
            Kind::T => "T",
            Kind::P => "P",
        })
    }
}

/// Kind of a protocol or data constructor: `n` parameters of `param` kind
/// returning `result`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ArrowKind {
    pub arity: usize,
    pub param: Kind,
    pub result: Kind,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Type {
    Unit,
    /// Opaque base types: `Int`, `Char`, `String`.
    Base(Name),
    Var(Name),
    Fun(Box<Type>, Box<Type>),
    Pair(Box<Type>, Box<Type>),
    Forall(Name, Kind, Box<Type>),
    /// `?T.S`
    In(Box<Type>, Box<Type>),
    /// `!T.S`
    Out(Box<Type>, Box<Type>),
    /// `End?`
    EndWait,
    /// `End!`
    EndTerm,
    Dual(Box<Type>),
    Proto(Name, Vec<Type>),
    /// `-T`
    Neg(Box<Type>),
}

pub const BASE_TYPES: [&str; 3] = ["Int", "Char", "String"];

impl Type {
    pub fn var(n: &str) -> Type {
        Type::Var(name(n))
    }
    pub fn base(n: &str) -> Type {
        Type::Base(name(n))
    }
    pub fn int() -> Type {
        Type::base("Int")
    }
    pub fn fun(a: Type, b: Type) -> Type {
        Type::Fun(Box::new(a), Box::new(b))
    }
    pub fn pair(a: Type, b: Type) -> Type {
        Type::Pair(Box::new(a), Box::new(b))
    }
    pub fn forall(v: &str, k: Kind, body: Type) -> Type {
        Type::Forall(name(v), k, Box::new(body))
    }
    pub fn input(a: Type, b: Type) -> Type {
        Type::In(Box::new(a), Box::new(b))
    }
    pub fn output(a: Type, b: Type) -> Type {
        Type::Out(Box::new(a), Box::new(b))
    }
    pub fn dual(a: Type) -> Type {
        Type::Dual(Box::new(a))
    }
    #[allow(clippy::should_implement_trait)]
    pub fn neg(a: Type) -> Type {
        Type::Neg(Box::new(a))
    }
    pub fn proto(n: &str, args: Vec<Type>) -> Type {
        Type::Proto(name(n), args)
    }

    /// Number of nodes, counting `Dual` and `-` nodes. Iterative so that
    /// very long session spines are fine.
    pub fn size(&self) -> usize {
        let mut n = 0;
        let mut stack = vec![self];
        while let Some(t) = stack.pop() {
            n += 1;
            match t {
                Type::Unit | Type::Base(_) | Type::Var(_) | Type::EndWait | Type::EndTerm => {}
                Type::Fun(a, b) | Type::Pair(a, b) | Type::In(a, b) | Type::Out(a, b) => {
                    stack.push(b);
                    stack.push(a);
                }
                Type::Forall(_, _, b) | Type::Dual(b) | Type::Neg(b) => stack.push(b),
                Type::Proto(_, args) => stack.extend(args.iter()),
            }
        }
        n
    }

    pub fn free_vars(&self) -> HashSet<Name> {
        let mut out = HashSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<Name>, out: &mut HashSet<Name>) {
        match self {
            Type::Var(v) => {
                if !bound.contains(v) {
                    out.insert(v.clone());
                }
            }
            Type::Unit | Type::Base(_) | Type::EndWait | Type::EndTerm => {}
            Type::Fun(a, b) | Type::Pair(a, b) | Type::In(a, b) | Type::Out(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Type::Forall(v, _, b) => {
                bound.push(v.clone());
                b.collect_free(bound, out);
                bound.pop();
            }
            Type::Dual(b) | Type::Neg(b) => b.collect_free(bound, out),
            Type::Proto(_, args) => args.iter().for_each(|a| a.collect_free(bound, out)),
        }
    }

    /// Capture-avoiding `self[t/v]`.
    pub fn subst(&self, v: &Name, t: &Type) -> Type {
        let mut map = HashMap::new();
        map.insert(v.clone(), t.clone());
        self.subst_many(&map)
    }

    /// Simultaneous capture-avoiding substitution.
    pub fn subst_many(&self, map: &HashMap<Name, Type>) -> Type {
        if map.is_empty() {
            return self.clone();
        }
        let mut avoid = HashSet::new();
        for t in map.values() {
            avoid.extend(t.free_vars());
        }
        self.subst_go(map, &avoid)
    }

    fn subst_go(&self, map: &HashMap<Name, Type>, avoid: &HashSet<Name>) -> Type {
        match self {
            Type::Var(v) => map.get(v).cloned().unwrap_or_else(|| self.clone()),
            Type::Unit | Type::Base(_) | Type::EndWait | Type::EndTerm => self.clone(),
            Type::Fun(a, b) => Type::fun(a.subst_go(map, avoid), b.subst_go(map, avoid)),
            Type::Pair(a, b) => Type::pair(a.subst_go(map, avoid), b.subst_go(map, avoid)),
            Type::In(a, b) => Type::input(a.subst_go(map, avoid), b.subst_go(map, avoid)),
            Type::Out(a, b) => Type::output(a.subst_go(map, avoid), b.subst_go(map, avoid)),
            Type::Dual(b) => Type::dual(b.subst_go(map, avoid)),
            Type::Neg(b) => Type::neg(b.subst_go(map, avoid)),
            Type::Proto(n, args) => {
                Type::Proto(n.clone(), args.iter().map(|a| a.subst_go(map, avoid)).collect())
            }
            Type::Forall(v, k, body) => {
                let mut inner = map.clone();
                inner.remove(v);
                if inner.is_empty() {
                    return self.clone();
                }
                if avoid.contains(v) {
                    let v2 = fresh_name(v);
                    inner.insert(v.clone(), Type::Var(v2.clone()));
                    Type::Forall(v2, *k, Box::new(body.subst_go(&inner, avoid)))
                } else {
                    Type::Forall(v.clone(), *k, Box::new(body.subst_go(&inner, avoid)))
                }
            }
        }
    }

    pub fn is_session_head(&self) -> bool {
        matches!(
            self,
            Type::In(..) | Type::Out(..) | Type::EndWait | Type::EndTerm | Type::Dual(_)
        )
    }
}

/// Primitive constants.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Const {
    Unit,
    Fork,
    New,
    Receive,
    Send,
    Select(Name),
    Wait,
    Terminate,
    PrintInt,
    PrintString,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Lit {
    Int(i64),
    Char(char),
    Str(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Eq => "==",
            BinOp::Ne => "/=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
        }
    }

    pub fn is_comparison(self) -> bool {
        !matches!(self, BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div)
    }
}

/// One alternative of a `match`/`case`. Channel matches bind exactly one
/// name; data matches bind one name per constructor field.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Arm {
    pub tag: Name,
    pub binders: Vec<Name>,
    pub body: Expr,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Const(Const),
    Lit(Lit),
    Var(Name),
    /// Data constructor, possibly partially applied.
    Con {
        tag: Name,
        targs: Vec<Type>,
        args: Vec<Expr>,
    },
    /// `None` annotation: filled in from the expected type when checked.
    Abs(Name, Option<Type>, Box<Expr>),
    Rec(Name, Type, Box<Expr>),
    TAbs(Name, Kind, Box<Expr>),
    App(Box<Expr>, Box<Expr>),
    TApp(Box<Expr>, Type),
    Pair(Box<Expr>, Box<Expr>),
    Let(Name, Box<Expr>, Box<Expr>),
    LetPair(Name, Name, Box<Expr>, Box<Expr>),
    LetUnit(Box<Expr>, Box<Expr>),
    Match(Box<Expr>, Vec<Arm>),
    BinOp(BinOp, Box<Expr>, Box<Expr>),
    /// Source position of the enclosed expression. Only the parser makes
    /// these; elaboration drops them.
    At(Span, Box<Expr>),
}

impl Expr {
    pub fn var(n: &str) -> Expr {
        Expr::Var(name(n))
    }
    pub fn unit() -> Expr {
        Expr::Const(Const::Unit)
    }
    pub fn int(i: i64) -> Expr {
        Expr::Lit(Lit::Int(i))
    }
    pub fn con(tag: &str) -> Expr {
        Expr::Con { tag: name(tag), targs: vec![], args: vec![] }
    }
    pub fn app(f: Expr, a: Expr) -> Expr {
        Expr::App(Box::new(f), Box::new(a))
    }
    pub fn tapp(f: Expr, t: Type) -> Expr {
        Expr::TApp(Box::new(f), t)
    }
    pub fn pair(a: Expr, b: Expr) -> Expr {
        Expr::Pair(Box::new(a), Box::new(b))
    }
    pub fn abs(x: &str, t: Option<Type>, body: Expr) -> Expr {
        Expr::Abs(name(x), t, Box::new(body))
    }
    pub fn tabs(a: &str, k: Kind, body: Expr) -> Expr {
        Expr::TAbs(name(a), k, Box::new(body))
    }
    pub fn let_pair(x: &str, y: &str, e1: Expr, e2: Expr) -> Expr {
        Expr::LetPair(name(x), name(y), Box::new(e1), Box::new(e2))
    }
    pub fn let_unit(e1: Expr, e2: Expr) -> Expr {
        Expr::LetUnit(Box::new(e1), Box::new(e2))
    }

    pub fn is_unit(&self) -> bool {
        matches!(self.peel(), Expr::Const(Const::Unit))
    }

    /// `self` without its outermost position markers.
    pub fn peel(&self) -> &Expr {
        let mut e = self;
        while let Expr::At(_, inner) = e {
            e = inner;
        }
        e
    }

    /// A copy with every position marker removed.
    pub fn strip_spans(&self) -> Expr {
        let go = |e: &Expr| Box::new(e.strip_spans());
        match self {
            Expr::At(_, e) => e.strip_spans(),
            Expr::Var(_) | Expr::Const(_) | Expr::Lit(_) => self.clone(),
            Expr::Con { tag, targs, args } => {
                Expr::Con { tag: tag.clone(), targs: targs.clone(), args: args.iter().map(Expr::strip_spans).collect() }
            }
            Expr::Abs(x, t, b) => Expr::Abs(x.clone(), t.clone(), go(b)),
            Expr::Rec(x, t, b) => Expr::Rec(x.clone(), t.clone(), go(b)),
            Expr::TAbs(a, k, b) => Expr::TAbs(a.clone(), *k, go(b)),
            Expr::App(a, b) => Expr::App(go(a), go(b)),
            Expr::TApp(a, t) => Expr::TApp(go(a), t.clone()),
            Expr::Pair(a, b) => Expr::Pair(go(a), go(b)),
            Expr::Let(x, a, b) => Expr::Let(x.clone(), go(a), go(b)),
            Expr::LetPair(x, y, a, b) => Expr::LetPair(x.clone(), y.clone(), go(a), go(b)),
            Expr::LetUnit(a, b) => Expr::LetUnit(go(a), go(b)),
            Expr::BinOp(op, a, b) => Expr::BinOp(*op, go(a), go(b)),
            Expr::Match(e, arms) => Expr::Match(
                go(e),
                arms.iter()
                    .map(|arm| Arm { tag: arm.tag.clone(), binders: arm.binders.clone(), body: arm.body.strip_spans() })
                    .collect(),
            ),
        }
    }

    /// Values as far as the grammar is concerned: the bodies of `rec` and
    /// type abstractions must be of this shape.
    pub fn is_syntactic_value(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::Lit(_) | Expr::Var(_) | Expr::Abs(..) | Expr::Rec(..) => true,
            Expr::TAbs(_, _, b) | Expr::At(_, b) => b.is_syntactic_value(),
            Expr::Pair(a, b) => a.is_syntactic_value() && b.is_syntactic_value(),
            Expr::Con { args, .. } => args.iter().all(Expr::is_syntactic_value),
            _ => false,
        }
    }

    pub fn free_vars(&self) -> HashSet<Name> {
        let mut out = HashSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<Name>, out: &mut HashSet<Name>) {
        match self {
            Expr::Var(x) => {
                if !bound.contains(x) {
                    out.insert(x.clone());
                }
            }
            Expr::Const(_) | Expr::Lit(_) => {}
            Expr::Con { args, .. } => args.iter().for_each(|a| a.collect_free(bound, out)),
            Expr::Abs(x, _, b) | Expr::Rec(x, _, b) => {
                bound.push(x.clone());
                b.collect_free(bound, out);
                bound.pop();
            }
            Expr::TAbs(_, _, b) | Expr::TApp(b, _) | Expr::At(_, b) => b.collect_free(bound, out),
            Expr::App(a, b) | Expr::Pair(a, b) | Expr::LetUnit(a, b) | Expr::BinOp(_, a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Expr::Let(x, a, b) => {
                a.collect_free(bound, out);
                bound.push(x.clone());
                b.collect_free(bound, out);
                bound.pop();
            }
            Expr::LetPair(x, y, a, b) => {
                a.collect_free(bound, out);
                bound.push(x.clone());
                bound.push(y.clone());
                b.collect_free(bound, out);
                bound.truncate(bound.len() - 2);
            }
            Expr::Match(s, arms) => {
                s.collect_free(bound, out);
                for arm in arms {
                    let n = bound.len();
                    bound.extend(arm.binders.iter().cloned());
                    arm.body.collect_free(bound, out);
                    bound.truncate(n);
                }
            }
        }
    }

    /// `self[v/x]`. Substituted values are closed apart from runtime channel
    /// names, so nothing is captured; but a binder inside `v` may coincide
    /// with a linear variable live at the occurrence, which the checker
    /// rejects as shadowing. Such binders are renamed.
    pub fn subst(&self, x: &Name, v: &Expr) -> Expr {
        let mut inner = HashSet::new();
        v.collect_binders(&mut inner);
        self.subst_go(x, v, &inner, &mut Vec::new())
    }

    fn subst_go(&self, x: &Name, v: &Expr, inner: &HashSet<Name>, scope: &mut Vec<Name>) -> Expr {
        macro_rules! go {
            ($e:expr) => {
                Box::new($e.subst_go(x, v, inner, scope))
            };
        }
        macro_rules! under {
            ($names:expr, $e:expr) => {{
                let n = scope.len();
                scope.extend($names.iter().cloned());
                let r = $e.subst_go(x, v, inner, scope);
                scope.truncate(n);
                Box::new(r)
            }};
        }
        match self {
            Expr::Var(y) if y == x => {
                if scope.iter().any(|n| inner.contains(n)) {
                    v.freshen(scope)
                } else {
                    v.clone()
                }
            }
            Expr::Var(_) | Expr::Const(_) | Expr::Lit(_) => self.clone(),
            Expr::Con { tag, targs, args } => Expr::Con {
                tag: tag.clone(),
                targs: targs.clone(),
                args: args.iter().map(|a| a.subst_go(x, v, inner, scope)).collect(),
            },
            Expr::Abs(y, _, _) | Expr::Rec(y, _, _) if y == x => self.clone(),
            Expr::Abs(y, t, b) => Expr::Abs(y.clone(), t.clone(), under!([y.clone()], b)),
            Expr::Rec(y, t, b) => Expr::Rec(y.clone(), t.clone(), under!([y.clone()], b)),
            Expr::TAbs(a, k, b) => Expr::TAbs(a.clone(), *k, go!(b)),
            Expr::At(sp, b) => Expr::At(*sp, go!(b)),
            Expr::App(a, b) => Expr::App(go!(a), go!(b)),
            Expr::TApp(a, t) => Expr::TApp(go!(a), t.clone()),
            Expr::Pair(a, b) => Expr::Pair(go!(a), go!(b)),
            Expr::LetUnit(a, b) => Expr::LetUnit(go!(a), go!(b)),
            Expr::BinOp(op, a, b) => Expr::BinOp(*op, go!(a), go!(b)),
            Expr::Let(y, a, b) => {
                let b2 = if y == x { b.clone() } else { under!([y.clone()], b) };
                Expr::Let(y.clone(), go!(a), b2)
            }
            Expr::LetPair(y, z, a, b) => {
                let b2 = if y == x || z == x { b.clone() } else { under!([y.clone(), z.clone()], b) };
                Expr::LetPair(y.clone(), z.clone(), go!(a), b2)
            }
            Expr::Match(s, arms) => Expr::Match(
                go!(s),
                arms.iter()
                    .map(|arm| Arm {
                        tag: arm.tag.clone(),
                        binders: arm.binders.clone(),
                        body: if arm.binders.contains(x) {
                            arm.body.clone()
                        } else {
                            *under!(arm.binders, arm.body)
                        },
                    })
                    .collect(),
            ),
        }
    }

    /// Term binders anywhere in `self`.
    fn collect_binders(&self, out: &mut HashSet<Name>) {
        let mut stack = vec![self];
        while let Some(e) = stack.pop() {
            match e {
                Expr::Var(_) | Expr::Const(_) | Expr::Lit(_) => {}
                Expr::Con { args, .. } => stack.extend(args),
                Expr::Abs(y, _, b) | Expr::Rec(y, _, b) => {
                    out.insert(y.clone());
                    stack.push(b);
                }
                Expr::TAbs(_, _, b) | Expr::At(_, b) | Expr::TApp(b, _) => stack.push(b),
                Expr::App(a, b) | Expr::Pair(a, b) | Expr::LetUnit(a, b) | Expr::BinOp(_, a, b) => {
                    stack.push(a);
                    stack.push(b);
                }
                Expr::Let(y, a, b) => {
                    out.insert(y.clone());
                    stack.push(a);
                    stack.push(b);
                }
                Expr::LetPair(y, z, a, b) => {
                    out.insert(y.clone());
                    out.insert(z.clone());
                    stack.push(a);
                    stack.push(b);
                }
                Expr::Match(s, arms) => {
                    stack.push(s);
                    for arm in arms {
                        out.extend(arm.binders.iter().cloned());
                        stack.push(&arm.body);
                    }
                }
            }
        }
    }

    /// Renames the binders of `self` that appear in `avoid`. The new names
    /// are the first `x'k` unused anywhere nearby, so runs stay reproducible.
    fn freshen(&self, avoid: &[Name]) -> Expr {
        let mut taken: HashSet<Name> = avoid.iter().cloned().collect();
        self.collect_binders(&mut taken);
        taken.extend(self.free_vars());
        let mut map = HashMap::new();
        for y in avoid {
            if map.contains_key(y) {
                continue;
            }
            let stem = y.split('\'').next().unwrap_or(y);
            let fresh = (1..)
                .map(|k| Name::from(format!("{stem}'{k}")))
                .find(|n| !taken.contains(n))
                .expect("unbounded");
            taken.insert(fresh.clone());
            map.insert(y.clone(), fresh);
        }
        self.rename_bound(&map)
    }

    /// Renames every binder in `map` and every occurrence. Only sound on
    /// values whose occurrences of those names are all bound.
    fn rename_bound(&self, map: &HashMap<Name, Name>) -> Expr {
        let rn = |y: &Name| map.get(y).cloned().unwrap_or_else(|| y.clone());
        macro_rules! go {
            ($e:expr) => {
                Box::new($e.rename_bound(map))
            };
        }
        match self {
            Expr::Var(y) => Expr::Var(rn(y)),
            Expr::Const(_) | Expr::Lit(_) => self.clone(),
            Expr::Con { tag, targs, args } => Expr::Con {
                tag: tag.clone(),
                targs: targs.clone(),
                args: args.iter().map(|a| a.rename_bound(map)).collect(),
            },
            Expr::Abs(y, t, b) => Expr::Abs(rn(y), t.clone(), go!(b)),
            Expr::Rec(y, t, b) => Expr::Rec(rn(y), t.clone(), go!(b)),
            Expr::TAbs(a, k, b) => Expr::TAbs(a.clone(), *k, go!(b)),
            Expr::At(sp, b) => Expr::At(*sp, go!(b)),
            Expr::App(a, b) => Expr::App(go!(a), go!(b)),
            Expr::TApp(a, t) => Expr::TApp(go!(a), t.clone()),
            Expr::Pair(a, b) => Expr::Pair(go!(a), go!(b)),
            Expr::LetUnit(a, b) => Expr::LetUnit(go!(a), go!(b)),
            Expr::BinOp(op, a, b) => Expr::BinOp(*op, go!(a), go!(b)),
            Expr::Let(y, a, b) => Expr::Let(rn(y), go!(a), go!(b)),
            Expr::LetPair(y, z, a, b) => Expr::LetPair(rn(y), rn(z), go!(a), go!(b)),
            Expr::Match(s, arms) => Expr::Match(
                go!(s),
                arms.iter()
                    .map(|arm| Arm {
                        tag: arm.tag.clone(),
                        binders: arm.binders.iter().map(rn).collect(),
                        body: arm.body.rename_bound(map),
                    })
                    .collect(),
            ),
        }
    }

    /// Capture-avoiding type substitution `self[t/a]` through annotations.
    pub fn subst_type(&self, a: &Name, t: &Type) -> Expr {
        let avoid = t.free_vars();
        self.subst_type_go(a, t, &avoid)
    }

    fn subst_type_go(&self, a: &Name, t: &Type, avoid: &HashSet<Name>) -> Expr {
        let go = |e: &Expr| Box::new(e.subst_type_go(a, t, avoid));
        let ty = |u: &Type| u.subst(a, t);
        match self {
            Expr::Var(_) | Expr::Const(_) | Expr::Lit(_) => self.clone(),
            Expr::Con { tag, targs, args } => Expr::Con {
                tag: tag.clone(),
                targs: targs.iter().map(ty).collect(),
                args: args.iter().map(|e| e.subst_type_go(a, t, avoid)).collect(),
            },
            Expr::Abs(x, ann, b) => Expr::Abs(x.clone(), ann.as_ref().map(ty), go(b)),
            Expr::Rec(x, ann, b) => Expr::Rec(x.clone(), ty(ann), go(b)),
            Expr::TAbs(b, k, body) => {
                if b == a {
                    self.clone()
                } else if avoid.contains(b) {
                    let b2 = fresh_name(b);
                    let renamed = body.subst_type(b, &Type::Var(b2.clone()));
                    Expr::TAbs(b2, *k, Box::new(renamed.subst_type_go(a, t, avoid)))
                } else {
                    Expr::TAbs(b.clone(), *k, go(body))
                }
            }
            Expr::At(sp, x) => Expr::At(*sp, go(x)),
            Expr::App(x, y) => Expr::App(go(x), go(y)),
            Expr::TApp(x, u) => Expr::TApp(go(x), ty(u)),
            Expr::Pair(x, y) => Expr::Pair(go(x), go(y)),
            Expr::LetUnit(x, y) => Expr::LetUnit(go(x), go(y)),
            Expr::BinOp(op, x, y) => Expr::BinOp(*op, go(x), go(y)),
            Expr::Let(x, e1, e2) => Expr::Let(x.clone(), go(e1), go(e2)),
            Expr::LetPair(x, y, e1, e2) => Expr::LetPair(x.clone(), y.clone(), go(e1), go(e2)),
            Expr::Match(s, arms) => Expr::Match(
                go(s),
                arms.iter()
                    .map(|arm| Arm {
                        tag: arm.tag.clone(),
                        binders: arm.binders.clone(),
                        body: arm.body.subst_type_go(a, t, avoid),
                    })
                    .collect(),
            ),
        }
    }
}

/// Runtime processes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Proc {
    Thread(Expr),
    Par(Box<Proc>, Box<Proc>),
    /// `(nu x y) p`; `ty` is the current session type of `x` (normal form).
    New {
        x: Name,
        y: Name,
        ty: Type,
        body: Box<Proc>,
    },
}

impl Proc {
    pub fn par(a: Proc, b: Proc) -> Proc {
        Proc::Par(Box::new(a), Box::new(b))
    }

    /// Threads in left-to-right order.
    pub fn threads(&self) -> Vec<&Expr> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(p) = stack.pop() {
            match p {
                Proc::Thread(e) => out.push(e),
                Proc::Par(a, b) => {
                    stack.push(b);
                    stack.push(a);
                }
                Proc::New { body, .. } => stack.push(body),
            }
        }
        out
    }

    pub fn is_completed(&self) -> bool {
        self.threads().iter().all(|e| e.is_unit())
    }

    pub fn size(&self) -> usize {
        match self {
            Proc::Thread(_) => 1,
            Proc::Par(a, b) => 1 + a.size() + b.size(),
            Proc::New { body, .. } => 1 + body.size(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CtorDecl {
    pub tag: Name,
    pub payload: Vec<Type>,
}

/// `protocol` or `data` declaration. Data declarations classify values as
/// well as protocols.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProtocolDecl {
    pub name: Name,
    pub params: Vec<Name>,
    pub ctors: Vec<CtorDecl>,
    pub is_data: bool,
}

impl ProtocolDecl {
    pub fn param_kind(&self) -> Kind {
        if self.is_data {
            Kind::T
        } else {
            Kind::P
        }
    }

    pub fn arrow_kind(&self) -> ArrowKind {
        ArrowKind { arity: self.params.len(), param: self.param_kind(), result: self.param_kind() }
    }

    pub fn ctor(&self, tag: &str) -> Option<&CtorDecl> {
        self.ctors.iter().find(|c| &*c.tag == tag)
    }

    /// Payload of `tag` instantiated at `args`.
    pub fn instantiate(&self, tag: &str, args: &[Type]) -> Option<Vec<Type>> {
        let ctor = self.ctor(tag)?;
        let map: HashMap<Name, Type> =
            self.params.iter().cloned().zip(args.iter().cloned()).collect();
        Some(ctor.payload.iter().map(|t| t.subst_many(&map)).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeAlias {
    pub name: Name,
    pub params: Vec<(Name, Option<Kind>)>,
    pub body: Type,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Signature {
    pub name: Name,
    pub ty: Type,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Param {
    Var(Name),
    Type(Name),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Definition {
    pub name: Name,
    pub params: Vec<Param>,
    pub body: Expr,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Decl {
    Protocol(ProtocolDecl),
    Alias(TypeAlias),
    Signature(Signature),
    Definition(Definition),
}

/// A parsed program. `spans[i]` locates `decls[i]`.
#[derive(Clone, Debug, Default)]
pub struct SourceProgram {
    pub decls: Vec<Decl>,
    pub spans: Vec<Span>,
}

impl SourceProgram {
    pub fn span_of(&self, i: usize) -> Span {
        self.spans.get(i).copied().unwrap_or_default()
    }

    pub fn protocols(&self) -> impl Iterator<Item = &ProtocolDecl> {
        self.decls.iter().filter_map(|d| match d {
            Decl::Protocol(p) => Some(p),
            _ => None,
        })
    }

    /// The `main` definition, if any.
    pub fn entry(&self) -> Option<&Definition> {
        self.decls.iter().find_map(|d| match d {
            Decl::Definition(def) if &*def.name == "main" => Some(def),
            _ => None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_counts_dual_and_neg() {
        let t = Type::dual(Type::input(Type::neg(Type::int()), Type::var("a")));
        assert_eq!(t.size(), 5);
    }

    #[test]
    fn subst_avoids_capture() {
        // (forall b:S. (a, b))[b/a] must not capture.
        let t = Type::forall("b", Kind::S, Type::pair(Type::var("a"), Type::var("b")));
        let r = t.subst(&name("a"), &Type::var("b"));
        match r {
            Type::Forall(v, _, body) => {
                assert_ne!(&*v, "b");
                assert_eq!(*body, Type::pair(Type::var("b"), Type::Var(v)));
            }
            _ => panic!("expected forall"),
        }
    }

    #[test]
    fn kinds_are_ordered() {
        assert!(Kind::S.is_sub(Kind::T) && Kind::T.is_sub(Kind::P));
        assert!(!Kind::P.is_sub(Kind::S));
    }

    #[test]
    fn expr_subst_respects_shadowing() {
        let e = Expr::app(Expr::var("x"), Expr::abs("x", None, Expr::var("x")));
        let r = e.subst(&name("x"), &Expr::int(1));
        assert_eq!(r, Expr::app(Expr::int(1), Expr::abs("x", None, Expr::var("x"))));
    }

    #[test]
    fn substituted_binders_avoid_enclosing_names() {
        // (\c -> f c)[(\c -> c)/f]: the inner lambda lands under `c`.
        let e = Expr::abs("c", None, Expr::app(Expr::var("f"), Expr::var("c")));
        let id = Expr::abs("c", None, Expr::var("c"));
        let r = e.subst(&name("f"), &id);
        let renamed = Expr::abs("c'1", None, Expr::var("c'1"));
        assert_eq!(r, Expr::abs("c", None, Expr::app(renamed, Expr::var("c"))));
        // No clash, no renaming.
        let top = Expr::app(Expr::var("f"), Expr::int(0)).subst(&name("f"), &id);
        assert_eq!(top, Expr::app(id, Expr::int(0)));
    }
}
