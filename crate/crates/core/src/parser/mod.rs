//! Surface syntax.
//!
//! A token in the first column starts a new top-level declaration, which
//! gives each declaration its own error-recovery unit. Inside a declaration
//! layout is free. `e |> f` means `f e`, `e [T, U]` means `e [T] [U]`,
//! `if` is a `case` on `Bool`, and a function given by several clauses with
//! constructor patterns becomes one definition with a `case`.

pub mod lexer;
pub mod pretty;

use std::collections::HashMap;

use crate::ast::*;
use crate::diagnostics::{Diagnostic, Span};
use lexer::{lex, Tok, Token};

pub use pretty::{pretty_expr, pretty_program, pretty_type};

/// Bumped whenever the accepted surface syntax changes.
pub const GRAMMAR_VERSION: u32 = 1;

const MAX_DEPTH: usize = 200;

#[derive(Debug)]
struct PErr {
    span: Span,
    msg: String,
}

type PResult<T> = Result<T, PErr>;

#[derive(Clone, Debug)]
enum ClauseParam {
    Var(Name),
    Type(Name),
    Ctor(Name, Vec<Name>),
}

enum Item {
    Decl(Decl),
    Clause { name: Name, params: Vec<ClauseParam>, body: Expr },
}

struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    depth: usize,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::LIdent(s) | Tok::UIdent(s) => format!("`{s}`"),
        Tok::Int(n) => format!("`{n}`"),
        Tok::Str(_) => "string literal".into(),
        Tok::Char(_) => "character literal".into(),
        Tok::Eof => "end of declaration".into(),
        other => format!("{other:?}").to_lowercase(),
    }
}

fn base_name(s: &str) -> bool {
    BASE_TYPES.contains(&s)
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos.min(self.toks.len() - 1)].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos.min(self.toks.len() - 1)].span
    }

    fn advance(&mut self) -> Tok {
        let t = self.peek().clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.advance();
            true
        } else {
            false
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        Err(PErr { span: self.span(), msg: msg.into() })
    }

    fn unexpected<T>(&self, wanted: &str) -> PResult<T> {
        self.err(format!("expected {wanted}, found {}", describe(self.peek())))
    }

    fn expect(&mut self, t: Tok, what: &str) -> PResult<()> {
        if self.eat(&t) {
            Ok(())
        } else {
            self.unexpected(what)
        }
    }

    fn lident(&mut self) -> PResult<Name> {
        match self.peek().clone() {
            Tok::LIdent(s) => {
                self.advance();
                Ok(name(&s))
            }
            _ => self.unexpected("a lower-case identifier"),
        }
    }

    fn uident(&mut self) -> PResult<Name> {
        match self.peek().clone() {
            Tok::UIdent(s) => {
                self.advance();
                Ok(name(&s))
            }
            _ => self.unexpected("an upper-case identifier"),
        }
    }

    fn enter(&mut self) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return self.err("nesting too deep");
        }
        Ok(())
    }

    fn kind(&mut self) -> PResult<Kind> {
        match self.peek() {
            Tok::UIdent(s) if s == "S" => {
                self.advance();
                Ok(Kind::S)
            }
            Tok::UIdent(s) if s == "T" => {
                self.advance();
                Ok(Kind::T)
            }
            Tok::UIdent(s) if s == "P" => {
                self.advance();
                Ok(Kind::P)
            }
            _ => self.unexpected("a kind (S, T or P)"),
        }
    }

    // ---- types ----

    fn ty(&mut self) -> PResult<Type> {
        self.enter()?;
        let r = self.ty_inner();
        self.depth -= 1;
        r
    }

    fn ty_inner(&mut self) -> PResult<Type> {
        if self.eat(&Tok::Forall) {
            let mut binders = Vec::new();
            loop {
                if self.eat(&Tok::LParen) {
                    let v = self.lident()?;
                    self.expect(Tok::Colon, "`:`")?;
                    let k = self.kind()?;
                    self.expect(Tok::RParen, "`)`")?;
                    binders.push((v, k));
                } else if matches!(self.peek(), Tok::LIdent(_)) {
                    let v = self.lident()?;
                    self.expect(Tok::Colon, "`:`")?;
                    let k = self.kind()?;
                    binders.push((v, k));
                } else {
                    break;
                }
            }
            if binders.is_empty() {
                return self.unexpected("a type variable binder");
            }
            self.expect(Tok::Dot, "`.`")?;
            let body = self.ty()?;
            return Ok(binders.into_iter().rev().fold(body, |b, (v, k)| Type::Forall(v, k, Box::new(b))));
        }
        let a = self.seq_ty()?;
        if self.eat(&Tok::Arrow) {
            let b = self.ty()?;
            Ok(Type::fun(a, b))
        } else {
            Ok(a)
        }
    }

    fn seq_ty(&mut self) -> PResult<Type> {
        self.enter()?;
        let r = match self.peek() {
            Tok::Bang | Tok::Question => {
                let input = self.advance() == Tok::Question;
                let payload = self.app_ty()?;
                self.expect(Tok::Dot, "`.` after the message payload")?;
                let cont = self.seq_ty()?;
                Ok(if input { Type::input(payload, cont) } else { Type::output(payload, cont) })
            }
            _ => self.app_ty(),
        };
        self.depth -= 1;
        r
    }

    fn app_ty(&mut self) -> PResult<Type> {
        self.enter()?;
        let r = match self.peek().clone() {
            Tok::Minus => {
                self.advance();
                self.app_ty().map(Type::neg)
            }
            Tok::Plus => {
                self.advance();
                self.app_ty()
            }
            Tok::Dual => {
                self.advance();
                self.atom_ty().map(Type::dual)
            }
            Tok::UIdent(s) if !base_name(&s) => {
                self.advance();
                let mut args = Vec::new();
                while self.starts_arg() {
                    args.push(self.arg_ty()?);
                }
                Ok(Type::Proto(name(&s), args))
            }
            _ => self.atom_ty(),
        };
        self.depth -= 1;
        r
    }

    fn starts_arg(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Minus | Tok::Plus | Tok::LParen | Tok::LIdent(_) | Tok::UIdent(_) | Tok::Unit | Tok::EndWait | Tok::EndTerm
        )
    }

    fn arg_ty(&mut self) -> PResult<Type> {
        self.enter()?;
        let r = match self.peek() {
            Tok::Minus => {
                self.advance();
                self.arg_ty().map(Type::neg)
            }
            Tok::Plus => {
                self.advance();
                self.arg_ty()
            }
            _ => self.atom_ty(),
        };
        self.depth -= 1;
        r
    }

    fn atom_ty(&mut self) -> PResult<Type> {
        self.enter()?;
        let r = match self.peek().clone() {
            Tok::Unit => {
                self.advance();
                Ok(Type::Unit)
            }
            Tok::EndWait => {
                self.advance();
                Ok(Type::EndWait)
            }
            Tok::EndTerm => {
                self.advance();
                Ok(Type::EndTerm)
            }
            Tok::LIdent(s) => {
                self.advance();
                Ok(Type::Var(name(&s)))
            }
            Tok::UIdent(s) => {
                self.advance();
                Ok(if base_name(&s) { Type::Base(name(&s)) } else { Type::Proto(name(&s), vec![]) })
            }
            Tok::LParen => {
                self.advance();
                if self.eat(&Tok::RParen) {
                    Ok(Type::Unit)
                } else {
                    let a = self.ty()?;
                    if self.eat(&Tok::Comma) {
                        let b = self.ty()?;
                        self.expect(Tok::RParen, "`)`")?;
                        Ok(Type::pair(a, b))
                    } else {
                        self.expect(Tok::RParen, "`)`")?;
                        Ok(a)
                    }
                }
            }
            _ => self.unexpected("a type"),
        };
        self.depth -= 1;
        r
    }

    // ---- expressions ----

    fn expr(&mut self) -> PResult<Expr> {
        self.enter()?;
        let r = self.expr_inner();
        self.depth -= 1;
        r
    }

    fn expr_inner(&mut self) -> PResult<Expr> {
        let sp = self.span();
        let open = !matches!(self.peek(), Tok::Backslash | Tok::Rec | Tok::Let | Tok::Match | Tok::Case | Tok::If);
        let e = self.open_form()?;
        Ok(if open { e } else { Expr::At(sp, Box::new(e)) })
    }

    fn open_form(&mut self) -> PResult<Expr> {
        match self.peek() {
            Tok::Backslash => {
                self.advance();
                enum B {
                    Term(Name, Option<Type>),
                    Ty(Name, Kind),
                }
                let mut bs = Vec::new();
                loop {
                    match self.peek() {
                        Tok::LBracket => {
                            self.advance();
                            let a = self.lident()?;
                            self.expect(Tok::Colon, "`:`")?;
                            let k = self.kind()?;
                            self.expect(Tok::RBracket, "`]`")?;
                            bs.push(B::Ty(a, k));
                        }
                        Tok::LParen => {
                            self.advance();
                            let x = self.lident()?;
                            self.expect(Tok::Colon, "`:`")?;
                            let t = self.ty()?;
                            self.expect(Tok::RParen, "`)`")?;
                            bs.push(B::Term(x, Some(t)));
                        }
                        Tok::LIdent(_) => {
                            let x = self.lident()?;
                            bs.push(B::Term(x, None));
                        }
                        _ => break,
                    }
                }
                if bs.is_empty() {
                    return self.unexpected("a lambda binder");
                }
                self.expect(Tok::Arrow, "`->`")?;
                let body = self.expr()?;
                Ok(bs.into_iter().rev().fold(body, |b, x| match x {
                    B::Term(x, t) => Expr::Abs(x, t, Box::new(b)),
                    B::Ty(a, k) => Expr::TAbs(a, k, Box::new(b)),
                }))
            }
            Tok::Rec => {
                self.advance();
                let f = self.lident()?;
                self.expect(Tok::Colon, "`:`")?;
                let t = self.ty()?;
                self.expect(Tok::Equals, "`=`")?;
                let body = self.expr()?;
                Ok(Expr::Rec(f, t, Box::new(body)))
            }
            Tok::Let => {
                self.advance();
                if self.eat(&Tok::LParen) {
                    if self.eat(&Tok::RParen) {
                        self.expect(Tok::Equals, "`=`")?;
                        let e1 = self.expr()?;
                        self.expect(Tok::In, "`in`")?;
                        let e2 = self.expr()?;
                        return Ok(Expr::let_unit(e1, e2));
                    }
                    let x = self.lident()?;
                    self.expect(Tok::Comma, "`,`")?;
                    let y = self.lident()?;
                    self.expect(Tok::RParen, "`)`")?;
                    self.expect(Tok::Equals, "`=`")?;
                    let e1 = self.expr()?;
                    self.expect(Tok::In, "`in`")?;
                    let e2 = self.expr()?;
                    return Ok(Expr::LetPair(x, y, Box::new(e1), Box::new(e2)));
                }
                let x = self.lident()?;
                self.expect(Tok::Equals, "`=`")?;
                let e1 = self.expr()?;
                self.expect(Tok::In, "`in`")?;
                let e2 = self.expr()?;
                Ok(Expr::Let(x, Box::new(e1), Box::new(e2)))
            }
            Tok::Match | Tok::Case => {
                self.advance();
                let scrut = self.expr()?;
                if !(self.eat(&Tok::With) || self.eat(&Tok::Of)) {
                    return self.unexpected("`with` or `of`");
                }
                self.expect(Tok::LBrace, "`{`")?;
                let mut arms = Vec::new();
                while !matches!(self.peek(), Tok::RBrace) {
                    let tag = self.uident()?;
                    let mut binders = Vec::new();
                    while matches!(self.peek(), Tok::LIdent(_)) {
                        binders.push(self.lident()?);
                    }
                    self.expect(Tok::Arrow, "`->`")?;
                    let body = self.expr()?;
                    arms.push(Arm { tag, binders, body });
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
                self.expect(Tok::RBrace, "`}`")?;
                Ok(Expr::Match(Box::new(scrut), arms))
            }
            Tok::If => {
                self.advance();
                let c = self.expr()?;
                self.expect(Tok::Then, "`then`")?;
                let a = self.expr()?;
                self.expect(Tok::Else, "`else`")?;
                let b = self.expr()?;
                Ok(Expr::Match(
                    Box::new(c),
                    vec![
                        Arm { tag: name("True"), binders: vec![], body: a },
                        Arm { tag: name("False"), binders: vec![], body: b },
                    ],
                ))
            }
            _ => self.pipe_expr(),
        }
    }

    fn pipe_expr(&mut self) -> PResult<Expr> {
        let mut l = self.cmp_expr()?;
        while self.eat(&Tok::Pipe) {
            let sp = self.span();
            let f = self.cmp_expr()?;
            l = Expr::At(sp, Box::new(Expr::app(f, l)));
        }
        Ok(l)
    }

    fn cmp_expr(&mut self) -> PResult<Expr> {
        let a = self.add_expr()?;
        let op = match self.peek() {
            Tok::EqEq => BinOp::Eq,
            Tok::NotEq => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            _ => return Ok(a),
        };
        let sp = self.span();
        self.advance();
        let b = self.add_expr()?;
        Ok(Expr::At(sp, Box::new(Expr::BinOp(op, Box::new(a), Box::new(b)))))
    }

    fn add_expr(&mut self) -> PResult<Expr> {
        let mut a = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(a),
            };
            let sp = self.span();
            self.advance();
            let b = self.mul_expr()?;
            a = Expr::At(sp, Box::new(Expr::BinOp(op, Box::new(a), Box::new(b))));
        }
    }

    fn mul_expr(&mut self) -> PResult<Expr> {
        let mut a = self.app_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(a),
            };
            let sp = self.span();
            self.advance();
            let b = self.app_expr()?;
            a = Expr::At(sp, Box::new(Expr::BinOp(op, Box::new(a), Box::new(b))));
        }
    }

    fn starts_atom(&self) -> bool {
        matches!(
            self.peek(),
            Tok::LIdent(_)
                | Tok::UIdent(_)
                | Tok::Int(_)
                | Tok::Str(_)
                | Tok::Char(_)
                | Tok::LParen
                | Tok::Fork
                | Tok::New
                | Tok::Send
                | Tok::Receive
                | Tok::Wait
                | Tok::Terminate
                | Tok::Select
        )
    }

    fn app_expr(&mut self) -> PResult<Expr> {
        self.enter()?;
        let sp = self.span();
        let mut head = self.atom_expr()?;
        let mut applied = false;
        loop {
            if self.eat(&Tok::LBracket) {
                loop {
                    let t = self.ty()?;
                    head = Expr::tapp(head, t);
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
                self.expect(Tok::RBracket, "`]`")?;
            } else if self.starts_atom() {
                let a = self.atom_expr()?;
                head = Expr::app(head, a);
            } else {
                break;
            }
            applied = true;
        }
        self.depth -= 1;
        Ok(if applied { Expr::At(sp, Box::new(head)) } else { head })
    }

    fn atom_expr(&mut self) -> PResult<Expr> {
        self.enter()?;
        let sp = self.span();
        let t = self.peek().clone();
        let parenthesized = matches!(t, Tok::LParen);
        let r = match t {
            Tok::LIdent(s) => {
                self.advance();
                Ok(match s.as_str() {
                    "printInt" => Expr::Const(Const::PrintInt),
                    "printString" => Expr::Const(Const::PrintString),
                    _ => Expr::Var(name(&s)),
                })
            }
            Tok::UIdent(s) => {
                self.advance();
                Ok(Expr::con(&s))
            }
            Tok::Int(n) => {
                self.advance();
                Ok(Expr::int(n))
            }
            Tok::Str(s) => {
                self.advance();
                Ok(Expr::Lit(Lit::Str(s)))
            }
            Tok::Char(c) => {
                self.advance();
                Ok(Expr::Lit(Lit::Char(c)))
            }
            Tok::Fork => self.konst(Const::Fork),
            Tok::New => self.konst(Const::New),
            Tok::Send => self.konst(Const::Send),
            Tok::Receive => self.konst(Const::Receive),
            Tok::Wait => self.konst(Const::Wait),
            Tok::Terminate => self.konst(Const::Terminate),
            Tok::Select => {
                self.advance();
                let tag = self.uident()?;
                Ok(Expr::Const(Const::Select(tag)))
            }
            Tok::LParen => {
                self.advance();
                if self.eat(&Tok::RParen) {
                    Ok(Expr::unit())
                } else {
                    let a = self.expr()?;
                    if self.eat(&Tok::Comma) {
                        let b = self.expr()?;
                        self.expect(Tok::RParen, "`)`")?;
                        Ok(Expr::pair(a, b))
                    } else {
                        self.expect(Tok::RParen, "`)`")?;
                        Ok(a)
                    }
                }
            }
            _ => self.unexpected("an expression"),
        };
        self.depth -= 1;
        match r {
            Ok(e) if !parenthesized || e.is_unit() || matches!(e, Expr::Pair(..)) => Ok(Expr::At(sp, Box::new(e))),
            r => r,
        }
    }

    fn konst(&mut self, c: Const) -> PResult<Expr> {
        self.advance();
        Ok(Expr::Const(c))
    }

    // ---- declarations ----

    fn decl(&mut self) -> PResult<Item> {
        let item = match self.peek().clone() {
            Tok::Protocol | Tok::Data => {
                let is_data = self.advance() == Tok::Data;
                let nm = self.uident()?;
                let want = if is_data { Kind::T } else { Kind::P };
                let mut params = Vec::new();
                loop {
                    if matches!(self.peek(), Tok::LIdent(_)) {
                        params.push(self.lident()?);
                    } else if self.eat(&Tok::LParen) {
                        let v = self.lident()?;
                        self.expect(Tok::Colon, "`:`")?;
                        let sp = self.span();
                        let k = self.kind()?;
                        if k != want {
                            return Err(PErr {
                                span: sp,
                                msg: format!("parameters of `{nm}` have kind {want}"),
                            });
                        }
                        self.expect(Tok::RParen, "`)`")?;
                        params.push(v);
                    } else {
                        break;
                    }
                }
                self.expect(Tok::Equals, "`=`")?;
                let mut ctors = Vec::new();
                self.eat(&Tok::Bar);
                while matches!(self.peek(), Tok::UIdent(_)) {
                    let tag = self.uident()?;
                    let mut payload = Vec::new();
                    while self.starts_arg() {
                        payload.push(self.arg_ty()?);
                    }
                    ctors.push(CtorDecl { tag, payload });
                    if !self.eat(&Tok::Bar) {
                        break;
                    }
                }
                Item::Decl(Decl::Protocol(ProtocolDecl { name: nm, params, ctors, is_data }))
            }
            Tok::Type => {
                self.advance();
                let nm = self.uident()?;
                let mut params = Vec::new();
                loop {
                    if matches!(self.peek(), Tok::LIdent(_)) {
                        params.push((self.lident()?, None));
                    } else if self.eat(&Tok::LParen) {
                        let v = self.lident()?;
                        self.expect(Tok::Colon, "`:`")?;
                        let k = self.kind()?;
                        self.expect(Tok::RParen, "`)`")?;
                        params.push((v, Some(k)));
                    } else {
                        break;
                    }
                }
                self.expect(Tok::Equals, "`=`")?;
                let body = self.ty()?;
                Item::Decl(Decl::Alias(TypeAlias { name: nm, params, body }))
            }
            Tok::LIdent(_) if *self.peek_at(1) == Tok::Colon => {
                let nm = self.lident()?;
                self.advance();
                let ty = self.ty()?;
                Item::Decl(Decl::Signature(Signature { name: nm, ty }))
            }
            Tok::LIdent(_) => {
                let nm = self.lident()?;
                let mut params = Vec::new();
                loop {
                    match self.peek().clone() {
                        Tok::LIdent(s) => {
                            self.advance();
                            params.push(ClauseParam::Var(name(&s)));
                        }
                        Tok::LBracket => {
                            self.advance();
                            let a = self.lident()?;
                            self.expect(Tok::RBracket, "`]`")?;
                            params.push(ClauseParam::Type(a));
                        }
                        Tok::UIdent(s) => {
                            self.advance();
                            params.push(ClauseParam::Ctor(name(&s), vec![]));
                        }
                        Tok::LParen => {
                            self.advance();
                            let tag = self.uident()?;
                            let mut bs = Vec::new();
                            while matches!(self.peek(), Tok::LIdent(_)) {
                                bs.push(self.lident()?);
                            }
                            self.expect(Tok::RParen, "`)`")?;
                            params.push(ClauseParam::Ctor(tag, bs));
                        }
                        _ => break,
                    }
                }
                self.expect(Tok::Equals, "`=` or `:`")?;
                let body = self.expr()?;
                Item::Clause { name: nm, params, body }
            }
            _ => return self.unexpected("a declaration"),
        };
        if *self.peek() != Tok::Eof {
            return self.unexpected("the end of the declaration");
        }
        Ok(item)
    }
}

fn with_eof(toks: &[Token]) -> Vec<Token> {
    let mut v = toks.to_vec();
    let span = toks
        .last()
        .map(|t| Span::new(t.span.line, t.span.col + t.span.len, 1))
        .unwrap_or(Span::new(1, 1, 1));
    v.push(Token { tok: Tok::Eof, span });
    v
}

fn run<T>(src: &str, f: impl FnOnce(&mut Parser) -> PResult<T>) -> Result<T, Vec<Diagnostic>> {
    let (toks, mut diags) = lex(src);
    if !diags.is_empty() {
        return Err(diags);
    }
    let toks = with_eof(&toks);
    let mut p = Parser { toks: &toks, pos: 0, depth: 0 };
    match f(&mut p) {
        Ok(v) if *p.peek() == Tok::Eof => Ok(v),
        Ok(_) => {
            let e: PResult<()> = p.unexpected("end of input");
            let e = e.unwrap_err();
            diags.push(Diagnostic::error("P004", e.span, e.msg));
            Err(diags)
        }
        Err(e) => {
            diags.push(Diagnostic::error("P004", e.span, e.msg));
            Err(diags)
        }
    }
}

pub fn parse_type(src: &str) -> Result<Type, Vec<Diagnostic>> {
    run(src, |p| p.ty())
}

/// Parses an expression; the result carries no source positions.
pub fn parse_expr(src: &str) -> Result<Expr, Vec<Diagnostic>> {
    run(src, |p| p.expr()).map(|e| e.strip_spans())
}

/// Parses arbitrary bytes; invalid UTF-8 is reported, never a panic.
pub fn parse_bytes(bytes: &[u8]) -> (SourceProgram, Vec<Diagnostic>) {
    match std::str::from_utf8(bytes) {
        Ok(s) => parse_program(s),
        Err(e) => {
            let prefix = &bytes[..e.valid_up_to()];
            let line = prefix.iter().filter(|b| **b == b'\n').count() as u32 + 1;
            let col = prefix.iter().rev().take_while(|b| **b != b'\n').count() as u32 + 1;
            let d = Diagnostic::error("P000", Span::new(line, col, 1), "source is not valid UTF-8");
            (SourceProgram::default(), vec![d])
        }
    }
}

pub fn parse_program(src: &str) -> (SourceProgram, Vec<Diagnostic>) {
    let (toks, mut diags) = lex(src);
    let mut chunks: Vec<&[Token]> = Vec::new();
    let mut start = 0;
    for i in 0..toks.len() {
        // A closing bracket in the first column still belongs to the
        // declaration above it.
        let closer = matches!(toks[i].tok, Tok::RBrace | Tok::RParen | Tok::RBracket);
        if i > start && toks[i].span.col == 1 && !closer {
            chunks.push(&toks[start..i]);
            start = i;
        }
    }
    if start < toks.len() {
        chunks.push(&toks[start..]);
    }
    let mut items: Vec<(Item, Span)> = Vec::new();
    for chunk in chunks {
        let first = chunk[0].span;
        if first.col != 1 {
            diags.push(Diagnostic::error("P005", first, "declarations must start in the first column"));
            continue;
        }
        let toks = with_eof(chunk);
        let mut p = Parser { toks: &toks, pos: 0, depth: 0 };
        match p.decl() {
            Ok(item) => items.push((item, first)),
            Err(e) => diags.push(Diagnostic::error("P004", e.span, e.msg)),
        }
    }
    let program = assemble(items, &mut diags);
    (program, diags)
}

/// Groups consecutive clauses of the same function into one definition.
fn assemble(items: Vec<(Item, Span)>, diags: &mut Vec<Diagnostic>) -> SourceProgram {
    let mut program = SourceProgram::default();
    let mut iter = items.into_iter().peekable();
    while let Some((item, span)) = iter.next() {
        match item {
            Item::Decl(d) => {
                program.decls.push(d);
                program.spans.push(span);
            }
            Item::Clause { name: nm, params, body } => {
                let mut clauses = vec![(params, body)];
                while let Some((Item::Clause { name: n2, .. }, _)) = iter.peek() {
                    if *n2 != nm {
                        break;
                    }
                    if let Some((Item::Clause { params, body, .. }, _)) = iter.next() {
                        clauses.push((params, body));
                    }
                }
                match merge_clauses(&nm, clauses) {
                    Ok(def) => {
                        program.decls.push(Decl::Definition(def));
                        program.spans.push(span);
                    }
                    Err(msg) => diags.push(Diagnostic::error("P006", span, msg)),
                }
            }
        }
    }
    program
}

fn merge_clauses(nm: &Name, clauses: Vec<(Vec<ClauseParam>, Expr)>) -> Result<Definition, String> {
    let has_ctor = |ps: &[ClauseParam]| ps.iter().any(|p| matches!(p, ClauseParam::Ctor(..)));
    if clauses.len() == 1 && !has_ctor(&clauses[0].0) {
        let (params, body) = clauses.into_iter().next().unwrap();
        let params = params
            .into_iter()
            .map(|p| match p {
                ClauseParam::Var(x) => Param::Var(x),
                ClauseParam::Type(a) => Param::Type(a),
                ClauseParam::Ctor(..) => unreachable!(),
            })
            .collect();
        return Ok(Definition { name: nm.clone(), params, body });
    }
    let arity = clauses[0].0.len();
    if clauses.iter().any(|(ps, _)| ps.len() != arity) {
        return Err(format!("clauses of `{nm}` have different numbers of parameters"));
    }
    let ctor_positions: Vec<usize> = (0..arity)
        .filter(|&i| clauses.iter().any(|(ps, _)| matches!(ps[i], ClauseParam::Ctor(..))))
        .collect();
    if ctor_positions.len() != 1 {
        return Err(format!(
            "`{nm}` is defined by several clauses; exactly one parameter position must use constructor patterns"
        ));
    }
    let scrut_pos = ctor_positions[0];
    let scrut = fresh_name("arg");
    let mut params = Vec::new();
    let mut canon: HashMap<usize, Name> = HashMap::new();
    for i in 0..arity {
        match &clauses[0].0[i] {
            _ if i == scrut_pos => params.push(Param::Var(scrut.clone())),
            ClauseParam::Var(x) => {
                canon.insert(i, x.clone());
                params.push(Param::Var(x.clone()));
            }
            ClauseParam::Type(a) => {
                canon.insert(i, a.clone());
                params.push(Param::Type(a.clone()));
            }
            ClauseParam::Ctor(..) => unreachable!(),
        }
    }
    let mut arms = Vec::new();
    for (ps, body) in clauses {
        let mut body = body;
        let mut arm = None;
        for (i, p) in ps.into_iter().enumerate() {
            match p {
                ClauseParam::Ctor(tag, bs) if i == scrut_pos => arm = Some((tag, bs)),
                ClauseParam::Var(x) if i != scrut_pos => {
                    let c = &canon[&i];
                    if &x != c {
                        if !matches!(params[i], Param::Var(_)) {
                            return Err(format!("clauses of `{nm}` disagree on parameter {}", i + 1));
                        }
                        body = body.subst(&x, &Expr::Var(c.clone()));
                    }
                }
                ClauseParam::Type(a) if i != scrut_pos => {
                    let c = &canon[&i];
                    if !matches!(params[i], Param::Type(_)) {
                        return Err(format!("clauses of `{nm}` disagree on parameter {}", i + 1));
                    }
                    if &a != c {
                        body = body.subst_type(&a, &Type::Var(c.clone()));
                    }
                }
                _ => {
                    return Err(format!(
                        "clauses of `{nm}` must all use a constructor pattern at parameter {}",
                        scrut_pos + 1
                    ))
                }
            }
        }
        let (tag, binders) = arm.expect("constructor position checked above");
        arms.push(Arm { tag, binders, body });
    }
    Ok(Definition { name: nm.clone(), params, body: Expr::Match(Box::new(Expr::Var(scrut)), arms) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normalize::alpha_equal;

    fn ty(s: &str) -> Type {
        parse_type(s).unwrap_or_else(|d| panic!("{s}: {d:?}"))
    }

    #[test]
    fn precedence_of_type_operators() {
        assert_eq!(
            ty("!-Arith.s -> s"),
            Type::fun(Type::output(Type::neg(Type::proto("Arith", vec![])), Type::var("s")), Type::var("s"))
        );
        assert_eq!(
            ty("?Stream -a.End!"),
            Type::input(Type::proto("Stream", vec![Type::neg(Type::var("a"))]), Type::EndTerm)
        );
        assert!(parse_type("Dual ?Int.s").is_err());
        assert_eq!(ty("Dual (?Int.s)"), Type::dual(Type::input(Type::int(), Type::var("s"))));
    }

    #[test]
    fn foralls_nest() {
        let t = ty("forall (a:P) (s:S). !a.s -> s");
        let u = ty("forall b:P. forall r:S. !b.r -> r");
        assert!(alpha_equal(&t, &u));
    }

    #[test]
    fn pipes_and_type_lists_desugar() {
        let e = parse_expr("select ConP [s] c |> sendInt [s, t] x").unwrap();
        let expected = Expr::app(
            Expr::app(Expr::tapp(Expr::tapp(Expr::var("sendInt"), Type::var("s")), Type::var("t")), Expr::var("x")),
            Expr::app(Expr::tapp(Expr::Const(Const::Select(name("ConP"))), Type::var("s")), Expr::var("c")),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn declarations_split_on_first_column() {
        let src = "protocol P = A Int | B -P\nf : Int ->\n  Int\nf x = x\n";
        let (p, d) = parse_program(src);
        assert!(d.is_empty(), "{d:?}");
        assert_eq!(p.decls.len(), 3);
        assert_eq!(p.spans[2].line, 4);
    }

    #[test]
    fn recovery_continues_after_errors() {
        let src = "f : Int -> \ng = )\nh : Unit\n";
        let (p, d) = parse_program(src);
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].span.line, 1);
        assert_eq!(d[1].span.line, 2);
        assert_eq!(p.decls.len(), 1);
    }

    #[test]
    fn multi_clause_definitions_become_case() {
        let src = "size Leaf = 0\nsize (Node l x r) = x\n";
        let (p, d) = parse_program(src);
        assert!(d.is_empty(), "{d:?}");
        let Decl::Definition(def) = &p.decls[0] else { panic!() };
        let Expr::Match(_, arms) = &def.body else { panic!() };
        assert_eq!(arms.len(), 2);
        assert_eq!(arms[1].binders.len(), 3);
    }

    #[test]
    fn deep_nesting_is_an_error_not_a_crash() {
        let src = format!("f = {}1{}", "(".repeat(5000), ")".repeat(5000));
        let (_, d) = parse_program(&src);
        assert!(!d.is_empty());
    }
}
