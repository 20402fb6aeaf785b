//! Printing in the concrete syntax accepted by the parser.

use std::fmt::{self, Write};

use crate::ast::*;

// Type precedence levels: 0 forall/arrow, 1 message, 2 application,
// 3 protocol argument, 4 atom.
fn ty(out: &mut String, t: &Type, level: u8) {
    let open = |out: &mut String, need: u8| {
        if level > need {
            out.push('(');
            true
        } else {
            false
        }
    };
    match t {
        Type::Unit => out.push_str("Unit"),
        Type::Base(n) | Type::Var(n) => out.push_str(n),
        Type::EndWait => out.push_str("End?"),
        Type::EndTerm => out.push_str("End!"),
        Type::Proto(n, args) if args.is_empty() => out.push_str(n),
        Type::Pair(a, b) => {
            out.push('(');
            ty(out, a, 0);
            out.push_str(", ");
            ty(out, b, 0);
            out.push(')');
        }
        Type::Forall(v, k, b) => {
            let p = open(out, 0);
            let _ = write!(out, "forall ({v}:{k}). ");
            ty(out, b, 0);
            close(out, p);
        }
        Type::Fun(a, b) => {
            let p = open(out, 0);
            ty(out, a, 1);
            out.push_str(" -> ");
            ty(out, b, 0);
            close(out, p);
        }
        Type::In(a, s) | Type::Out(a, s) => {
            let p = open(out, 1);
            out.push(if matches!(t, Type::In(..)) { '?' } else { '!' });
            ty(out, a, 2);
            out.push('.');
            ty(out, s, 1);
            close(out, p);
        }
        Type::Neg(b) => {
            let p = open(out, 3);
            out.push('-');
            if matches!(**b, Type::Neg(_)) {
                // `--` would start a comment
                out.push('(');
                ty(out, b, 0);
                out.push(')');
            } else {
                ty(out, b, level.clamp(2, 3));
            }
            close(out, p);
        }
        Type::Dual(b) => {
            let p = open(out, 2);
            out.push_str("Dual ");
            ty(out, b, 4);
            close(out, p);
        }
        Type::Proto(n, args) => {
            let p = open(out, 2);
            out.push_str(n);
            for a in args {
                out.push(' ');
                ty(out, a, 3);
            }
            close(out, p);
        }
    }
}

fn close(out: &mut String, opened: bool) {
    if opened {
        out.push(')');
    }
}

pub fn pretty_type(t: &Type) -> String {
    let mut s = String::new();
    ty(&mut s, t, 0);
    s
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&pretty_type(self))
    }
}

fn konst(c: &Const) -> String {
    match c {
        Const::Unit => "()".into(),
        Const::Fork => "fork".into(),
        Const::New => "new".into(),
        Const::Receive => "receive".into(),
        Const::Send => "send".into(),
        Const::Select(t) => format!("select {t}"),
        Const::Wait => "wait".into(),
        Const::Terminate => "terminate".into(),
        Const::PrintInt => "printInt".into(),
        Const::PrintString => "printString".into(),
    }
}

fn lit(out: &mut String, l: &Lit) {
    match l {
        Lit::Int(n) => {
            let _ = write!(out, "{n}");
        }
        Lit::Char(c) => {
            out.push('\'');
            escape(out, *c, '\'');
            out.push('\'');
        }
        Lit::Str(s) => {
            out.push('"');
            for c in s.chars() {
                escape(out, c, '"');
            }
            out.push('"');
        }
    }
}

fn escape(out: &mut String, c: char, quote: char) {
    match c {
        '\n' => out.push_str("\\n"),
        '\t' => out.push_str("\\t"),
        '\0' => out.push_str("\\0"),
        '\\' => out.push_str("\\\\"),
        c if c == quote => {
            out.push('\\');
            out.push(c);
        }
        c => out.push(c),
    }
}

// Expression precedence levels: 0 open forms, 1 comparison, 2 additive,
// 3 multiplicative, 4 application, 5 atom.
fn expr(out: &mut String, e: &Expr, level: u8) {
    let open = |out: &mut String, need: u8| {
        if level > need {
            out.push('(');
            true
        } else {
            false
        }
    };
    match e {
        Expr::At(_, e) => expr(out, e, level),
        Expr::Const(c) => out.push_str(&konst(c)),
        Expr::Lit(l) => lit(out, l),
        Expr::Var(x) => out.push_str(x),
        Expr::Con { tag, targs, args } => {
            let p = if targs.is_empty() && args.is_empty() { false } else { open(out, 4) };
            out.push_str(tag);
            for t in targs {
                out.push_str(" [");
                ty(out, t, 0);
                out.push(']');
            }
            for a in args {
                out.push(' ');
                expr(out, a, 5);
            }
            close(out, p);
        }
        Expr::Abs(x, t, b) => {
            let p = open(out, 0);
            match t {
                Some(t) => {
                    let _ = write!(out, "\\({x}:");
                    ty(out, t, 0);
                    out.push_str(") -> ");
                }
                None => {
                    let _ = write!(out, "\\{x} -> ");
                }
            }
            expr(out, b, 0);
            close(out, p);
        }
        Expr::TAbs(a, k, b) => {
            let p = open(out, 0);
            let _ = write!(out, "\\[{a}:{k}] -> ");
            expr(out, b, 0);
            close(out, p);
        }
        Expr::Rec(f, t, b) => {
            let p = open(out, 0);
            let _ = write!(out, "rec {f} : ");
            ty(out, t, 0);
            out.push_str(" = ");
            expr(out, b, 0);
            close(out, p);
        }
        Expr::App(f, a) => {
            let p = open(out, 4);
            expr(out, f, 4);
            out.push(' ');
            expr(out, a, 5);
            close(out, p);
        }
        Expr::TApp(f, t) => {
            let p = open(out, 4);
            expr(out, f, 4);
            out.push_str(" [");
            ty(out, t, 0);
            out.push(']');
            close(out, p);
        }
        Expr::Pair(a, b) => {
            out.push('(');
            expr(out, a, 0);
            out.push_str(", ");
            expr(out, b, 0);
            out.push(')');
        }
        Expr::Let(x, a, b) => {
            let p = open(out, 0);
            let _ = write!(out, "let {x} = ");
            expr(out, a, 0);
            out.push_str(" in ");
            expr(out, b, 0);
            close(out, p);
        }
        Expr::LetPair(x, y, a, b) => {
            let p = open(out, 0);
            let _ = write!(out, "let ({x}, {y}) = ");
            expr(out, a, 0);
            out.push_str(" in ");
            expr(out, b, 0);
            close(out, p);
        }
        Expr::LetUnit(a, b) => {
            let p = open(out, 0);
            out.push_str("let () = ");
            expr(out, a, 0);
            out.push_str(" in ");
            expr(out, b, 0);
            close(out, p);
        }
        Expr::Match(s, arms) => {
            let p = open(out, 0);
            out.push_str("case ");
            expr(out, s, 1);
            out.push_str(" of { ");
            for (i, arm) in arms.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(&arm.tag);
                for b in &arm.binders {
                    out.push(' ');
                    out.push_str(b);
                }
                out.push_str(" -> ");
                expr(out, &arm.body, 0);
            }
            out.push_str(" }");
            close(out, p);
        }
        Expr::BinOp(op, a, b) => {
            let (me, l, r) = match op {
                BinOp::Mul | BinOp::Div => (3, 3, 4),
                BinOp::Add | BinOp::Sub => (2, 2, 3),
                _ => (1, 2, 2),
            };
            let p = open(out, me);
            expr(out, a, l);
            let _ = write!(out, " {} ", op.symbol());
            expr(out, b, r);
            close(out, p);
        }
    }
}

pub fn pretty_expr(e: &Expr) -> String {
    let mut s = String::new();
    expr(&mut s, e, 0);
    s
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&pretty_expr(self))
    }
}

pub fn pretty_decl(d: &Decl) -> String {
    let mut out = String::new();
    match d {
        Decl::Protocol(p) => {
            out.push_str(if p.is_data { "data " } else { "protocol " });
            out.push_str(&p.name);
            for v in &p.params {
                out.push(' ');
                out.push_str(v);
            }
            out.push_str(" =");
            for (i, c) in p.ctors.iter().enumerate() {
                out.push_str(if i == 0 { " " } else { " | " });
                out.push_str(&c.tag);
                for t in &c.payload {
                    out.push(' ');
                    ty(&mut out, t, 3);
                }
            }
        }
        Decl::Alias(a) => {
            let _ = write!(out, "type {}", a.name);
            for (v, k) in &a.params {
                match k {
                    Some(k) => {
                        let _ = write!(out, " ({v}:{k})");
                    }
                    None => {
                        let _ = write!(out, " {v}");
                    }
                }
            }
            out.push_str(" = ");
            ty(&mut out, &a.body, 0);
        }
        Decl::Signature(s) => {
            let _ = write!(out, "{} : ", s.name);
            ty(&mut out, &s.ty, 0);
        }
        Decl::Definition(d) => {
            out.push_str(&d.name);
            for p in &d.params {
                match p {
                    Param::Var(x) => {
                        let _ = write!(out, " {x}");
                    }
                    Param::Type(a) => {
                        let _ = write!(out, " [{a}]");
                    }
                }
            }
            out.push_str(" = ");
            expr(&mut out, &d.body, 0);
        }
    }
    out
}

pub fn pretty_program(p: &SourceProgram) -> String {
    let mut out = String::new();
    for d in &p.decls {
        out.push_str(&pretty_decl(d));
        out.push('\n');
    }
    out
}

impl fmt::Display for Proc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Proc::Thread(e) => write!(f, "<{e}>"),
            Proc::Par(a, b) => write!(f, "{a} | {b}"),
            Proc::New { x, y, body, .. } => write!(f, "(nu {x} {y}) ({body})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_expr, parse_type};

    #[test]
    fn familiar_renderings() {
        assert_eq!(pretty_type(&Type::neg(Type::proto("Arith", vec![]))), "-Arith");
        assert_eq!(pretty_type(&Type::input(Type::Unit, Type::EndTerm)), "?Unit.End!");
        let t = Type::input(Type::int(), Type::dual(Type::var("a")));
        assert_eq!(pretty_type(&t), "?Int.Dual a");
    }

    #[test]
    fn nested_negation_stays_out_of_comments() {
        let t = Type::proto("Stream", vec![Type::neg(Type::neg(Type::int()))]);
        let s = pretty_type(&t);
        assert!(!s.contains("--"));
        assert_eq!(parse_type(&s).unwrap(), t);
    }

    #[test]
    fn negated_application_round_trips() {
        for t in [
            Type::neg(Type::proto("Stream", vec![Type::var("a")])),
            Type::proto("Seq", vec![Type::neg(Type::proto("Stream", vec![Type::var("a")])), Type::int()]),
            Type::output(Type::neg(Type::proto("S", vec![Type::int()])), Type::var("s")),
        ] {
            assert_eq!(parse_type(&pretty_type(&t)).unwrap(), t, "{}", pretty_type(&t));
        }
    }

    #[test]
    fn expressions_round_trip() {
        for src in [
            "\\[s:S] -> \\(c:!Int.s) -> send [Int] [s] 1 c",
            "let (x, c) = receive [Int] [s] c in (x + 1 * 2, c)",
            "case t of { Con x -> x, Add l r -> l - (r - 1) }",
            "rec f : Int -> Int = \\x -> f x",
        ] {
            let e = parse_expr(src).unwrap();
            let again = parse_expr(&pretty_expr(&e)).unwrap();
            assert_eq!(e, again, "{src}");
        }
    }
}
