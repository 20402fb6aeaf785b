//! Type formation: kind synthesis and checking, protocol declaration groups,
//! and type-alias expansion.

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use crate::ast::{Decl, Kind, Name, ProtocolDecl, SourceProgram, Type, TypeAlias, BASE_TYPES};
use crate::diagnostics::{Diagnostic, Span};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum KindError {
    #[error("unbound type variable `{0}`")]
    UnboundVar(Name),
    #[error("unknown type or protocol `{0}`")]
    UnknownType(Name),
    #[error("`{name}` expects {expected} argument(s) but was given {found}")]
    Arity { name: Name, expected: usize, found: usize },
    #[error("`{ty}` has kind {found} but kind {expected} is required")]
    Mismatch { ty: Type, found: Kind, expected: Kind },
    #[error("type alias `{0}` refers to itself")]
    Cycle(Name),
}

impl KindError {
    pub fn code(&self) -> &'static str {
        match self {
            KindError::UnboundVar(_) => "K001",
            KindError::UnknownType(_) => "K002",
            KindError::Arity { .. } => "K003",
            KindError::Mismatch { .. } => "K004",
            KindError::Cycle(_) => "K007",
        }
    }

    /// Identifier worth pointing at in the source, if any.
    pub fn focus(&self) -> Option<&Name> {
        match self {
            KindError::UnboundVar(n) | KindError::UnknownType(n) | KindError::Cycle(n) => Some(n),
            KindError::Arity { name, .. } => Some(name),
            KindError::Mismatch { .. } => None,
        }
    }
}

/// Protocol and data declarations in scope.
#[derive(Clone, Debug, Default)]
pub struct Decls {
    pub protocols: HashMap<Name, ProtocolDecl>,
    /// Constructor tag to the declaration that owns it.
    pub tags: HashMap<Name, Name>,
}

impl Decls {
    pub fn insert(&mut self, p: ProtocolDecl) {
        for c in &p.ctors {
            self.tags.insert(c.tag.clone(), p.name.clone());
        }
        self.protocols.insert(p.name.clone(), p);
    }

    pub fn get(&self, name: &str) -> Option<&ProtocolDecl> {
        self.protocols.get(name)
    }

    pub fn owner_of(&self, tag: &str) -> Option<&ProtocolDecl> {
        self.tags.get(tag).and_then(|n| self.protocols.get(n))
    }
}

/// Kinds of type variables in scope plus the visible declarations.
#[derive(Clone, Debug, Default)]
pub struct KindContext {
    pub vars: Vec<(Name, Kind)>,
    pub decls: Arc<Decls>,
}

impl KindContext {
    pub fn new(decls: Arc<Decls>) -> KindContext {
        KindContext { vars: Vec::new(), decls }
    }

    pub fn with(&self, v: Name, k: Kind) -> KindContext {
        let mut c = self.clone();
        c.vars.push((v, k));
        c
    }

    pub fn push(&mut self, v: Name, k: Kind) {
        self.vars.push((v, k));
    }

    pub fn pop(&mut self) {
        self.vars.pop();
    }

    pub fn lookup(&self, v: &str) -> Option<Kind> {
        self.vars.iter().rev().find(|(n, _)| &**n == v).map(|(_, k)| *k)
    }

    pub fn contains(&self, v: &str) -> bool {
        self.lookup(v).is_some()
    }
}

pub fn synth_kind(ctx: &KindContext, t: &Type) -> Result<Kind, KindError> {
    let mut ctx = ctx.clone();
    synth(&mut ctx, t)
}

pub fn check_kind(ctx: &KindContext, t: &Type, k: Kind) -> Result<(), KindError> {
    let mut ctx = ctx.clone();
    check(&mut ctx, t, k)
}

fn check(ctx: &mut KindContext, t: &Type, k: Kind) -> Result<(), KindError> {
    let found = synth(ctx, t)?;
    if found.is_sub(k) {
        Ok(())
    } else {
        Err(KindError::Mismatch { ty: t.clone(), found, expected: k })
    }
}

fn synth(ctx: &mut KindContext, t: &Type) -> Result<Kind, KindError> {
    match t {
        Type::Unit => Ok(Kind::T),
        Type::Base(n) => {
            if BASE_TYPES.contains(&&**n) {
                Ok(Kind::T)
            } else {
                Err(KindError::UnknownType(n.clone()))
            }
        }
        Type::Var(v) => ctx.lookup(v).ok_or_else(|| KindError::UnboundVar(v.clone())),
        Type::Fun(a, b) | Type::Pair(a, b) => {
            check(ctx, a, Kind::T)?;
            check(ctx, b, Kind::T)?;
            Ok(Kind::T)
        }
        Type::Forall(v, k, b) => {
            ctx.push(v.clone(), *k);
            let r = check(ctx, b, Kind::T);
            ctx.pop();
            r.map(|_| Kind::T)
        }
        Type::In(a, s) | Type::Out(a, s) => {
            check(ctx, a, Kind::P)?;
            check(ctx, s, Kind::S)?;
            Ok(Kind::S)
        }
        Type::EndWait | Type::EndTerm => Ok(Kind::S),
        Type::Dual(s) => {
            check(ctx, s, Kind::S)?;
            Ok(Kind::S)
        }
        Type::Neg(b) => {
            check(ctx, b, Kind::P)?;
            Ok(Kind::P)
        }
        Type::Proto(n, args) => {
            let ak = ctx
                .decls
                .get(n)
                .map(|p| p.arrow_kind())
                .ok_or_else(|| KindError::UnknownType(n.clone()))?;
            if ak.arity != args.len() {
                return Err(KindError::Arity { name: n.clone(), expected: ak.arity, found: args.len() });
            }
            for a in args {
                check(ctx, a, ak.param)?;
            }
            Ok(ak.result)
        }
    }
}

/// Type aliases, each body already expanded.
#[derive(Clone, Debug, Default)]
pub struct Aliases {
    map: HashMap<Name, TypeAlias>,
}

impl Aliases {
    pub fn contains(&self, n: &str) -> bool {
        self.map.contains_key(n)
    }

    pub fn define(&mut self, alias: &TypeAlias) -> Result<(), KindError> {
        let body = self.expand(&alias.body)?;
        self.map.insert(alias.name.clone(), TypeAlias { body, ..alias.clone() });
        Ok(())
    }

    pub fn expand(&self, t: &Type) -> Result<Type, KindError> {
        Ok(match t {
            Type::Proto(n, args) => {
                let args = args.iter().map(|a| self.expand(a)).collect::<Result<Vec<_>, _>>()?;
                match self.map.get(n) {
                    None => Type::Proto(n.clone(), args),
                    Some(alias) => {
                        if alias.params.len() != args.len() {
                            return Err(KindError::Arity {
                                name: n.clone(),
                                expected: alias.params.len(),
                                found: args.len(),
                            });
                        }
                        let map: HashMap<Name, Type> =
                            alias.params.iter().map(|(p, _)| p.clone()).zip(args).collect();
                        alias.body.subst_many(&map)
                    }
                }
            }
            Type::Unit | Type::Base(_) | Type::Var(_) | Type::EndWait | Type::EndTerm => t.clone(),
            Type::Fun(a, b) => Type::fun(self.expand(a)?, self.expand(b)?),
            Type::Pair(a, b) => Type::pair(self.expand(a)?, self.expand(b)?),
            Type::In(a, b) => Type::input(self.expand(a)?, self.expand(b)?),
            Type::Out(a, b) => Type::output(self.expand(a)?, self.expand(b)?),
            Type::Forall(v, k, b) => Type::Forall(v.clone(), *k, Box::new(self.expand(b)?)),
            Type::Dual(b) => Type::dual(self.expand(b)?),
            Type::Neg(b) => Type::neg(self.expand(b)?),
        })
    }
}

/// Result of checking the type-level declarations of a program.
#[derive(Clone, Debug, Default)]
pub struct TypeDecls {
    pub decls: Arc<Decls>,
    pub aliases: Aliases,
}

fn locate(program: &SourceProgram, i: usize) -> Span {
    program.span_of(i)
}

fn alias_refs(t: &Type, out: &mut Vec<Name>) {
    match t {
        Type::Proto(n, args) => {
            out.push(n.clone());
            args.iter().for_each(|a| alias_refs(a, out));
        }
        Type::Fun(a, b) | Type::Pair(a, b) | Type::In(a, b) | Type::Out(a, b) => {
            alias_refs(a, out);
            alias_refs(b, out);
        }
        Type::Forall(_, _, b) | Type::Dual(b) | Type::Neg(b) => alias_refs(b, out),
        _ => {}
    }
}

/// Checks protocol/data declarations, expands aliases, and reports
/// duplicates. Every declaration sees every other one, whatever the order;
/// all protocols form one mutually recursive group.
pub fn check_type_decls(program: &SourceProgram, diags: &mut Vec<Diagnostic>) -> TypeDecls {
    let mut decls = Decls::default();
    let mut aliases = Aliases::default();
    let mut pending: Vec<(usize, &TypeAlias)> = Vec::new();
    let mut names: Vec<&Name> = program.protocols().map(|p| &p.name).collect();
    for (i, d) in program.decls.iter().enumerate() {
        if let Decl::Alias(a) = d {
            if names.contains(&&a.name) {
                diags.push(Diagnostic::error("K006", locate(program, i), format!("type `{}` is declared twice", a.name)));
            } else {
                names.push(&a.name);
                pending.push((i, a));
            }
        }
    }
    // Define aliases once everything they mention is defined.
    loop {
        let before = pending.len();
        let raw: Vec<Name> = pending.iter().map(|(_, a)| a.name.clone()).collect();
        pending.retain(|(i, a)| {
            let mut refs = Vec::new();
            alias_refs(&a.body, &mut refs);
            if refs.iter().any(|r| raw.contains(r)) {
                return true;
            }
            if let Err(e) = aliases.define(a) {
                diags.push(Diagnostic::error(e.code(), locate(program, *i), e.to_string()));
            }
            false
        });
        if pending.len() == before {
            break;
        }
    }
    for (i, a) in pending {
        let e = KindError::Cycle(a.name.clone());
        diags.push(Diagnostic::error(e.code(), locate(program, i), e.to_string()));
    }
    check_group(program, &mut decls, &aliases, diags);
    TypeDecls { decls: Arc::new(decls), aliases }
}

fn check_group(program: &SourceProgram, decls: &mut Decls, aliases: &Aliases, diags: &mut Vec<Diagnostic>) {
    let mut members = Vec::new();
    for i in 0..program.decls.len() {
        let Decl::Protocol(p) = &program.decls[i] else { continue };
        let span = locate(program, i);
        if decls.protocols.contains_key(&p.name) || aliases.contains(&p.name) {
            diags.push(Diagnostic::error("K006", span, format!("type `{}` is declared twice", p.name)));
            continue;
        }
        let mut expanded = p.clone();
        let mut ok = true;
        for c in &mut expanded.ctors {
            if let Some(owner) = decls.tags.get(&c.tag) {
                diags.push(Diagnostic::error(
                    "K005",
                    span,
                    format!("constructor `{}` is already declared by `{owner}`", c.tag),
                ));
                ok = false;
            }
            for t in &mut c.payload {
                match aliases.expand(t) {
                    Ok(e) => *t = e,
                    Err(e) => {
                        diags.push(Diagnostic::error(e.code(), span, e.to_string()));
                        ok = false;
                    }
                }
            }
        }
        let mut seen: Vec<&Name> = Vec::new();
        for c in &p.ctors {
            if seen.contains(&&c.tag) {
                diags.push(Diagnostic::error("K005", span, format!("constructor `{}` is repeated", c.tag)));
                ok = false;
            }
            seen.push(&c.tag);
        }
        if p.ctors.is_empty() {
            diags.push(Diagnostic::warning(
                "W001",
                span,
                format!("`{}` has no constructors; matching on it is impossible", p.name),
            ));
        }
        if ok {
            decls.insert(expanded.clone());
            members.push((expanded, span));
        }
    }
    let snapshot = Arc::new(decls.clone());
    let mut bad = Vec::new();
    for (p, span) in &members {
        let mut ctx = KindContext::new(snapshot.clone());
        for v in &p.params {
            ctx.push(v.clone(), p.param_kind());
        }
        for c in &p.ctors {
            for t in &c.payload {
                if let Err(e) = check_kind(&ctx, t, p.param_kind()) {
                    diags.push(Diagnostic::error(
                        e.code(),
                        *span,
                        format!("in constructor `{}` of `{}`: {e}", c.tag, p.name),
                    ));
                    bad.push(p.name.clone());
                }
            }
        }
    }
    for n in bad {
        if let Some(p) = decls.protocols.remove(&n) {
            for c in p.ctors {
                decls.tags.remove(&c.tag);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{name, CtorDecl};

    fn decls() -> Arc<Decls> {
        let mut d = Decls::default();
        d.insert(ProtocolDecl {
            name: name("Stream"),
            params: vec![name("a")],
            ctors: vec![CtorDecl {
                tag: name("Next"),
                payload: vec![Type::var("a"), Type::proto("Stream", vec![Type::var("a")])],
            }],
            is_data: false,
        });
        Arc::new(d)
    }

    #[test]
    fn message_formation() {
        let ctx = KindContext::new(decls()).with(name("s"), Kind::S);
        let t = Type::input(Type::neg(Type::int()), Type::var("s"));
        assert_eq!(synth_kind(&ctx, &t), Ok(Kind::S));
        let bad = Type::input(Type::int(), Type::int());
        assert!(matches!(synth_kind(&ctx, &bad), Err(KindError::Mismatch { expected: Kind::S, .. })));
    }

    #[test]
    fn protocols_are_protocol_kinded() {
        let ctx = KindContext::new(decls());
        let t = Type::proto("Stream", vec![Type::neg(Type::int())]);
        assert_eq!(synth_kind(&ctx, &t), Ok(Kind::P));
        assert!(check_kind(&ctx, &t, Kind::T).is_err());
        let wrong = Type::proto("Stream", vec![]);
        assert!(matches!(synth_kind(&ctx, &wrong), Err(KindError::Arity { .. })));
    }

    #[test]
    fn negation_needs_protocol_kind_context() {
        let ctx = KindContext::new(decls());
        assert!(check_kind(&ctx, &Type::fun(Type::neg(Type::int()), Type::Unit), Kind::T).is_err());
        assert!(check_kind(&ctx, &Type::neg(Type::Unit), Kind::P).is_ok());
    }

    #[test]
    fn forall_is_functional() {
        let ctx = KindContext::new(decls());
        let t = Type::forall("s", Kind::S, Type::fun(Type::input(Type::int(), Type::var("s")), Type::var("s")));
        assert_eq!(synth_kind(&ctx, &t), Ok(Kind::T));
        assert!(matches!(synth_kind(&ctx, &Type::var("s")), Err(KindError::UnboundVar(_))));
    }
}
