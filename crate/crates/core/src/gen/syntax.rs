//! Random syntax trees for printer and parser round trips. Nothing here is
//! kinded or typed; the trees only have to be things the parser can
//! produce.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::ast::*;

const VARS: [&str; 6] = ["x", "y", "c", "acc", "s'", "go_1"];
const TVARS: [&str; 4] = ["a", "b", "s", "t"];
const PROTOS: [&str; 4] = ["Arith", "Stream", "P", "Seq"];
const TAGS: [&str; 5] = ["Neg", "Add", "More", "Quit", "Leaf"];
const KINDS: [Kind; 3] = [Kind::S, Kind::T, Kind::P];

fn pick(rng: &mut impl Rng, xs: &[&str]) -> Name {
    name(xs.choose(rng).unwrap())
}

/// A type with at most `size` nodes.
pub fn ty(rng: &mut impl Rng, size: usize) -> Type {
    if size <= 1 {
        return match rng.gen_range(0..6) {
            0 => Type::Unit,
            1 => Type::base(BASE_TYPES.choose(rng).unwrap()),
            2 => Type::EndWait,
            3 => Type::EndTerm,
            4 => Type::Proto(pick(rng, &PROTOS), vec![]),
            _ => Type::Var(pick(rng, &TVARS)),
        };
    }
    let n = size - 1;
    let split = |rng: &mut dyn rand::RngCore| {
        let l = rng.gen_range(1..=n.max(2) - 1).min(n);
        (l, (n - l).max(1))
    };
    match rng.gen_range(0..8) {
        0 => {
            let (l, r) = split(rng);
            Type::fun(ty(rng, l), ty(rng, r))
        }
        1 => {
            let (l, r) = split(rng);
            Type::pair(ty(rng, l), ty(rng, r))
        }
        2 => Type::Forall(pick(rng, &TVARS), *KINDS.choose(rng).unwrap(), Box::new(ty(rng, n))),
        3 => {
            let (l, r) = split(rng);
            Type::input(ty(rng, l), ty(rng, r))
        }
        4 => {
            let (l, r) = split(rng);
            Type::output(ty(rng, l), ty(rng, r))
        }
        5 => Type::dual(ty(rng, n)),
        6 => Type::neg(ty(rng, n)),
        _ => {
            let k = rng.gen_range(1..=3.min(n));
            Type::Proto(pick(rng, &PROTOS), (0..k).map(|_| ty(rng, n / k)).collect())
        }
    }
}

/// An expression with roughly `size` nodes.
pub fn expr(rng: &mut impl Rng, size: usize) -> Expr {
    if size <= 1 {
        return match rng.gen_range(0..10) {
            0 => Expr::unit(),
            1 => Expr::int(rng.gen_range(0..1000)),
            2 => Expr::Lit(Lit::Char(*['a', 'Z', '\n', '\'', '"', '\\'].choose(rng).unwrap())),
            3 => Expr::Lit(Lit::Str(["", "hi there", "q\"uote", "tab\t", "back\\slash"].choose(rng).unwrap().to_string())),
            4 => Expr::con(TAGS.choose(rng).unwrap()),
            5 => Expr::Const(
                [Const::Fork, Const::New, Const::Receive, Const::Send, Const::Wait, Const::Terminate]
                    .choose(rng)
                    .unwrap()
                    .clone(),
            ),
            6 => Expr::Const(Const::Select(pick(rng, &TAGS))),
            _ => Expr::Var(pick(rng, &VARS)),
        };
    }
    let n = size - 1;
    let half = |rng: &mut dyn rand::RngCore| {
        let l = rng.gen_range(0..=n);
        (l.max(1), (n - l).max(1))
    };
    match rng.gen_range(0..13) {
        0 => {
            let t = if rng.gen_bool(0.5) { Some(ty(rng, 3)) } else { None };
            Expr::Abs(pick(rng, &VARS), t, Box::new(expr(rng, n)))
        }
        1 => Expr::TAbs(pick(rng, &TVARS), *KINDS.choose(rng).unwrap(), Box::new(expr(rng, n))),
        2 => Expr::Rec(pick(rng, &VARS), ty(rng, 3), Box::new(Expr::abs("x", None, expr(rng, n)))),
        3 | 4 => {
            let (l, r) = half(rng);
            Expr::app(expr(rng, l), expr(rng, r))
        }
        5 => Expr::tapp(expr(rng, n), ty(rng, 3)),
        6 => {
            let (l, r) = half(rng);
            Expr::pair(expr(rng, l), expr(rng, r))
        }
        7 => {
            let (l, r) = half(rng);
            Expr::Let(pick(rng, &VARS), Box::new(expr(rng, l)), Box::new(expr(rng, r)))
        }
        8 => {
            let (l, r) = half(rng);
            Expr::LetPair(pick(rng, &VARS), pick(rng, &VARS), Box::new(expr(rng, l)), Box::new(expr(rng, r)))
        }
        9 => {
            let (l, r) = half(rng);
            Expr::let_unit(expr(rng, l), expr(rng, r))
        }
        10 => {
            let arms = rng.gen_range(1..=3);
            let each = (n / (arms + 1)).max(1);
            let scrutinee = expr(rng, each);
            let mut tags: Vec<&str> = TAGS.to_vec();
            tags.shuffle(rng);
            Expr::Match(
                Box::new(scrutinee),
                tags[..arms]
                    .iter()
                    .map(|t| Arm {
                        tag: name(t),
                        binders: (0..rng.gen_range(0..3)).map(|_| pick(rng, &VARS)).collect(),
                        body: expr(rng, each),
                    })
                    .collect(),
            )
        }
        11 => {
            let (l, r) = half(rng);
            let op = *[
                BinOp::Add,
                BinOp::Sub,
                BinOp::Mul,
                BinOp::Div,
                BinOp::Eq,
                BinOp::Ne,
                BinOp::Lt,
                BinOp::Le,
                BinOp::Gt,
                BinOp::Ge,
            ]
            .choose(rng)
            .unwrap();
            Expr::BinOp(op, Box::new(expr(rng, l)), Box::new(expr(rng, r)))
        }
        _ => {
            let k = rng.gen_range(1..=3);
            // The parser leaves constructor application as ordinary
            // application.
            let head = Expr::Con { tag: pick(rng, &TAGS), targs: vec![], args: vec![] };
            (0..k).fold(head, |f, _| Expr::app(f, expr(rng, (n / k).max(1))))
        }
    }
}

/// A program of `decls` declarations of each sort, mixed.
pub fn program(rng: &mut impl Rng, decls: usize, size: usize) -> SourceProgram {
    let mut out = Vec::new();
    for i in 0..decls {
        out.push(match rng.gen_range(0..4) {
            0 => Decl::Protocol(ProtocolDecl {
                name: name(&format!("Q{i}")),
                params: TVARS[..rng.gen_range(0..3)].iter().map(|v| name(v)).collect(),
                ctors: (0..rng.gen_range(1..=3))
                    .map(|c| CtorDecl {
                        tag: name(&format!("K{i}x{c}")),
                        payload: (0..rng.gen_range(0..3)).map(|_| ty(rng, size / 4 + 1)).collect(),
                    })
                    .collect(),
                is_data: rng.gen_bool(0.3),
            }),
            1 => Decl::Alias(TypeAlias {
                name: name(&format!("A{i}")),
                params: TVARS[..rng.gen_range(0..3)]
                    .iter()
                    .map(|v| (name(v), if rng.gen_bool(0.5) { Some(*KINDS.choose(rng).unwrap()) } else { None }))
                    .collect(),
                body: ty(rng, size / 2 + 1),
            }),
            2 => Decl::Signature(Signature { name: name(&format!("f{i}")), ty: ty(rng, size / 2 + 1) }),
            _ => Decl::Definition(Definition {
                name: name(&format!("f{i}")),
                params: (0..rng.gen_range(0..3))
                    .map(|_| {
                        if rng.gen_bool(0.3) {
                            Param::Type(pick(rng, &TVARS))
                        } else {
                            Param::Var(pick(rng, &VARS))
                        }
                    })
                    .collect(),
                body: expr(rng, size),
            }),
        });
    }
    SourceProgram { spans: Vec::new(), decls: out }
}
