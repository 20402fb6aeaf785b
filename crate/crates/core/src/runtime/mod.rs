//! Execution by rewriting process syntax along the labelled transition
//! systems for expressions and processes.
//!
//! A thread offers session operations; parallel composition pairs
//! complementary offers; the restriction binding both ends turns a pair into
//! a silent step. The machine only ever takes silent steps at the root.

mod context;
mod expr;
mod machine;
mod preservation;
mod process;

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::ast::{name, Expr, Name, Proc, Type};
use crate::kindcheck::KindContext;
use crate::typecheck::{CheckedProgram, Mult, TypeContext};

pub use context::{step_ctx, CtxError, SelRule};
pub use expr::{channel_names, channels, is_channel, is_value, rename_free, step_expr, ExprStep, Globals, HOLE};
pub use machine::{run, Blocked, Machine, Outcome, Policy, RunConfig, RunResult, TraceStep};
pub use preservation::{check_preservation, PreservationReport, Violation};
pub use process::{enabled_transitions, stuck_threads, Semantics, Transition};

/// Labels of session operations, seen from one endpoint.
#[derive(Clone, Debug, PartialEq)]
pub enum Sigma {
    RecvVal(Name, Expr),
    SendVal(Name, Expr),
    RecvTag(Name, Name),
    SendTag(Name, Name),
    /// `wait`
    Close(Name),
    /// `terminate`
    Open(Name),
}

impl Sigma {
    pub fn subject(&self) -> &Name {
        match self {
            Sigma::RecvVal(x, _)
            | Sigma::SendVal(x, _)
            | Sigma::RecvTag(x, _)
            | Sigma::SendTag(x, _)
            | Sigma::Close(x)
            | Sigma::Open(x) => x,
        }
    }

    fn free(&self) -> HashSet<Name> {
        let mut out = HashSet::from([self.subject().clone()]);
        if let Sigma::RecvVal(_, v) | Sigma::SendVal(_, v) = self {
            out.extend(v.free_vars().into_iter().filter(|n| &**n != HOLE));
        }
        out
    }
}

/// Expression and process labels in one type. `Beta`, `Fork` and `New` only
/// come from expressions; `Tau`, `Scope` and `Par` only from processes.
#[derive(Clone, Debug, PartialEq)]
pub enum Label {
    Sigma(Sigma),
    Beta,
    Fork(Expr),
    /// Endpoint names and the channel type as written.
    New(Name, Name, Type),
    Tau,
    /// A send on `chan` of a value mentioning endpoints of the restrictions
    /// in `binders` (innermost first), whose scope is being opened.
    Scope { binders: Vec<(Name, Name, Type)>, chan: Name, value: Expr },
    Par(Box<Label>, Box<Label>),
}

impl Label {
    pub fn par(a: Label, b: Label) -> Label {
        Label::Par(Box::new(a), Box::new(b))
    }

    /// Free names of a process label. A complete exchange keeps its value
    /// inside whatever scopes surround both parties, so only the two
    /// subjects count.
    pub fn free(&self) -> HashSet<Name> {
        match self {
            Label::Sigma(s) => s.free(),
            Label::Beta | Label::Tau => HashSet::new(),
            Label::Fork(v) => v.free_vars(),
            Label::New(..) => HashSet::new(),
            Label::Scope { binders, chan, value } => {
                let mut out = value.free_vars();
                out.insert(chan.clone());
                for (a, b, _) in binders {
                    out.remove(a);
                    out.remove(b);
                }
                out
            }
            Label::Par(a, b) => match (&**a, &**b) {
                (Label::Sigma(Sigma::RecvVal(x, _)), Label::Sigma(Sigma::SendVal(y, _)))
                | (Label::Sigma(Sigma::RecvVal(x, _)), Label::Scope { chan: y, .. }) => {
                    HashSet::from([x.clone(), y.clone()])
                }
                _ => {
                    let mut out = a.free();
                    out.extend(b.free());
                    out
                }
            },
        }
    }
}

impl fmt::Display for Sigma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sigma::RecvVal(x, Expr::Var(h)) if &**h == HOLE => write!(f, "{x}?_"),
            Sigma::RecvVal(x, v) => write!(f, "{x}?{}", atom(v)),
            Sigma::SendVal(x, v) => write!(f, "{x}!{}", atom(v)),
            Sigma::RecvTag(x, c) => write!(f, "{x}?{c}"),
            Sigma::SendTag(x, c) => write!(f, "{x}!{c}"),
            Sigma::Close(x) => write!(f, "{x}@"),
            Sigma::Open(x) => write!(f, "{x}✓"),
        }
    }
}

fn atom(v: &Expr) -> String {
    let s = v.to_string();
    if s.contains(' ') {
        format!("({s})")
    } else {
        s
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Sigma(s) => s.fmt(f),
            Label::Beta => f.write_str("β"),
            Label::Fork(v) => write!(f, "fork {}", atom(v)),
            Label::New(x, y, t) => write!(f, "new {x} {y} : {t}"),
            Label::Tau => f.write_str("τ"),
            Label::Scope { binders, chan, value } => {
                for (a, b, _) in binders.iter().rev() {
                    write!(f, "ν{a}{b}.")?;
                }
                write!(f, "{chan}!{}", atom(value))
            }
            Label::Par(a, b) => write!(f, "({a} | {b})"),
        }
    }
}

/// A checked program prepared for execution. Top-level names get an `@`
/// prefix so substituted values can never be captured by a local binder.
#[derive(Clone, Debug)]
pub struct Image {
    pub delta: KindContext,
    pub globals: Globals,
    /// The globals as unrestricted entries, for typing runtime processes.
    pub gamma: TypeContext,
}

impl Image {
    pub fn new(p: &CheckedProgram) -> Image {
        let rename: HashMap<Name, Name> = p.order.iter().map(|n| (n.clone(), global_name(n))).collect();
        let mut gamma = TypeContext::new();
        let mut globals = Globals::new();
        for n in &p.order {
            let g = &p.globals[n];
            gamma.bind(rename[n].clone(), g.ty.clone(), Mult::Un);
            globals.insert(rename[n].clone(), rename_free(&g.body, &rename));
        }
        Image { delta: p.delta.clone(), globals, gamma }
    }

    /// The initial process: one thread running `main`.
    pub fn main_process(&self) -> Proc {
        Proc::Thread(Expr::Var(global_name("main")))
    }
}

pub fn global_name(n: &str) -> Name {
    name(&format!("@{n}"))
}
