//! Transitions of processes.

use crate::ast::{Expr, Name, Proc, Type};
use crate::normalize::{equiv, nf_neg, nf_pos};
use crate::typecheck::{Mult, TypeContext};

use super::context::{step_ctx, SelRule};
use super::expr::{channels, step_expr, ExprStep, HOLE};
use super::{Image, Label, Sigma};

/// What the machine runs: a program image and the context rule set.
#[derive(Clone, Copy)]
pub struct Semantics<'a> {
    pub image: &'a Image,
    pub sel: SelRule,
}

#[derive(Clone, Debug)]
pub struct Transition {
    pub label: Label,
    /// The last rule applied, outermost.
    pub rule: &'static str,
    pub next: Proc,
    /// Indices of the threads that moved, counted left to right.
    pub actors: Vec<usize>,
    pub output: Option<String>,
    /// Whether the step used the fresh channel name it was offered.
    pub made_channel: bool,
    /// Problems found while advancing the type of a restriction.
    pub notes: Vec<String>,
    /// For a synchronisation, the joint action it consumed.
    pub via: Option<Label>,
}

impl Transition {
    fn with(mut self, rule: &'static str, label: Label, next: Proc) -> Transition {
        self.rule = rule;
        self.label = label;
        self.next = next;
        self
    }
}

/// Every transition of `p`. A `new` would create the channel numbered `fresh`.
pub fn enabled_transitions(sem: Semantics<'_>, p: &Proc, fresh: u32) -> Vec<Transition> {
    explore(sem, p, fresh).0
}

/// Threads that are neither values nor able to step, with the reason.
pub fn stuck_threads(sem: Semantics<'_>, p: &Proc) -> Vec<(usize, String)> {
    explore(sem, p, 0).1
}

pub(crate) fn explore(sem: Semantics<'_>, p: &Proc, fresh: u32) -> (Vec<Transition>, Vec<(usize, String)>) {
    let mut ex = Explorer { sem, fresh, offset: 0, stuck: Vec::new() };
    let ts = ex.go(p);
    (ts, ex.stuck)
}

struct Explorer<'a> {
    sem: Semantics<'a>,
    fresh: u32,
    offset: usize,
    stuck: Vec<(usize, String)>,
}

impl Explorer<'_> {
    fn go(&mut self, p: &Proc) -> Vec<Transition> {
        match p {
            Proc::Thread(e) => self.thread(e),
            Proc::Par(l, r) => self.par(l, r),
            Proc::New { x, y, ty, body } => self.restrict(x, y, ty, body),
        }
    }

    fn thread(&mut self, e: &Expr) -> Vec<Transition> {
        let me = self.offset;
        self.offset += 1;
        let base = |label, rule, next, output| Transition {
            label,
            rule,
            next,
            actors: vec![me],
            output,
            made_channel: false,
            notes: Vec::new(),
            via: None,
        };
        match step_expr(&self.sem.image.globals, e, self.fresh) {
            ExprStep::Value => Vec::new(),
            ExprStep::Stuck(why) => {
                self.stuck.push((me, why));
                Vec::new()
            }
            ExprStep::Step { label: Label::Fork(v), next, output } => {
                let spawned = Proc::Thread(Expr::app(v, Expr::unit()));
                vec![base(Label::Tau, "Act-Fork", Proc::par(Proc::Thread(next), spawned), output)]
            }
            ExprStep::Step { label: Label::New(x, y, t), next, output } => {
                let p = Proc::New { x, y, ty: nf_pos(&t), body: Box::new(Proc::Thread(next)) };
                let mut t = base(Label::Tau, "Act-New", p, output);
                t.made_channel = true;
                vec![t]
            }
            ExprStep::Step { next, output, .. } => vec![base(Label::Tau, "Act-Beta", Proc::Thread(next), output)],
            ExprStep::Offers(os) => os
                .into_iter()
                .map(|(s, next)| base(Label::Sigma(s), "Act-Session", Proc::Thread(next), None))
                .collect(),
        }
    }

    fn par(&mut self, l: &Proc, r: &Proc) -> Vec<Transition> {
        let left = self.go(l);
        let right = self.go(r);
        let mut out = Vec::new();
        for t in &left {
            let next = Proc::par(t.next.clone(), r.clone());
            out.push(t.clone().with("Act-ParL", t.label.clone(), next));
        }
        for t in &right {
            let next = Proc::par(l.clone(), t.next.clone());
            out.push(t.clone().with("Act-ParR", t.label.clone(), next));
        }
        for a in &left {
            for b in &right {
                if let Some(t) = join(a, b) {
                    out.push(t);
                }
            }
        }
        out
    }

    fn restrict(&mut self, x: &Name, y: &Name, ty: &Type, body: &Proc) -> Vec<Transition> {
        let inner = self.go(body);
        let mut out = Vec::new();
        let ours = |n: &Name| n == x || n == y;
        for t in inner {
            let mentions = |v: &Expr| {
                let cs = channels(v);
                (cs.contains(x), cs.contains(y))
            };
            match &t.label {
                Label::Par(a, b) if subjects(a, b).is_some_and(|(p, q)| ours(p) && ours(q)) => {
                    let rule = match (&**a, &**b) {
                        (Label::Sigma(Sigma::RecvVal(..)), Label::Sigma(Sigma::SendVal(..))) => "Act-Msg",
                        (Label::Sigma(Sigma::RecvTag(..)), Label::Sigma(Sigma::SendTag(..))) => "Act-Bra",
                        (Label::Sigma(Sigma::Close(_)), Label::Sigma(Sigma::Open(_))) => {
                            let mut w = t.clone().with("Act-Wait", Label::Tau, t.next.clone());
                            w.via = Some(t.label.clone());
                            out.push(w);
                            continue;
                        }
                        (Label::Sigma(Sigma::RecvVal(_, v)), Label::Scope { binders, .. }) => {
                            let (a0, _, _) = &binders[0];
                            if channels(v).contains(a0) {
                                "Act-CloseL"
                            } else {
                                "Act-CloseR"
                            }
                        }
                        _ => unreachable!("joins only pair complementary labels"),
                    };
                    let (ty2, notes) = self.advance(x, y, ty, &t.label);
                    let mut body = t.next.clone();
                    if let Label::Scope { binders, .. } = &**b {
                        for (a, b, s) in binders {
                            body = Proc::New { x: a.clone(), y: b.clone(), ty: s.clone(), body: Box::new(body) };
                        }
                    }
                    let next = Proc::New { x: x.clone(), y: y.clone(), ty: ty2, body: Box::new(body) };
                    let via = t.label.clone();
                    let mut t = t.with(rule, Label::Tau, next);
                    t.notes.extend(notes);
                    t.via = Some(via);
                    out.push(t);
                }
                Label::Sigma(Sigma::SendVal(c, v)) if !ours(c) && mentions(v) != (false, false) => {
                    let rule = if mentions(v).0 { "Act-OpenL" } else { "Act-OpenR" };
                    let label = Label::Scope {
                        binders: vec![(x.clone(), y.clone(), ty.clone())],
                        chan: c.clone(),
                        value: v.clone(),
                    };
                    let next = t.next.clone();
                    out.push(t.with(rule, label, next));
                }
                Label::Scope { binders, chan, value } if !ours(chan) && mentions(value) != (false, false) => {
                    let rule = if mentions(value).0 { "Act-OpenL" } else { "Act-OpenR" };
                    let mut binders = binders.clone();
                    binders.push((x.clone(), y.clone(), ty.clone()));
                    let label = Label::Scope { binders, chan: chan.clone(), value: value.clone() };
                    let next = t.next.clone();
                    out.push(t.with(rule, label, next));
                }
                label if !label.free().iter().any(ours) => {
                    let next = Proc::New { x: x.clone(), y: y.clone(), ty: ty.clone(), body: Box::new(t.next.clone()) };
                    let label = label.clone();
                    out.push(t.with("Act-Res", label, next));
                }
                _ => {}
            }
        }
        out
    }

    /// New type of `x` after the exchange `label` between `x` and `y`.
    fn advance(&self, x: &Name, y: &Name, ty: &Type, label: &Label) -> (Type, Vec<String>) {
        let mut g = TypeContext::new();
        g.bind(x.clone(), ty.clone(), Mult::Lin);
        g.bind(y.clone(), nf_neg(ty), Mult::Lin);
        let decls = &self.sem.image.delta.decls;
        match step_ctx(decls, &g, label, self.sem.sel) {
            Ok(g2) => {
                let tx = g2.get(x).cloned();
                let ty_ = g2.get(y).cloned();
                match (tx, ty_) {
                    (Some(tx), Some(ty_)) => {
                        let mut notes = Vec::new();
                        if !equiv(&ty_, &nf_neg(&tx)) {
                            notes.push(format!("after {label}, `{y}: {ty_}` is not dual to `{x}: {tx}`"));
                        }
                        (tx, notes)
                    }
                    _ => (ty.clone(), vec![format!("{label} dropped an endpoint of ({x} {y})")]),
                }
            }
            Err(e) => (ty.clone(), vec![e.to_string()]),
        }
    }
}

fn subjects<'a>(a: &'a Label, b: &'a Label) -> Option<(&'a Name, &'a Name)> {
    let subj = |l: &'a Label| match l {
        Label::Sigma(s) => Some(s.subject()),
        Label::Scope { chan, .. } => Some(chan),
        _ => None,
    };
    Some((subj(a)?, subj(b)?))
}

/// Pairs an action of the left process with a complementary one of the
/// right. The receiving side is written first in the joint label.
fn join(a: &Transition, b: &Transition) -> Option<Transition> {
    let (recv, send, rule) = match (&a.label, &b.label) {
        (Label::Sigma(s), _) if is_receiving(s) => (a, b, "Act-JoinL"),
        (_, Label::Sigma(s)) if is_receiving(s) => (b, a, "Act-JoinR"),
        _ => return None,
    };
    let Label::Sigma(r) = &recv.label else { unreachable!() };
    let (label, recv_next) = match (r, &send.label) {
        (Sigma::RecvVal(x, _), Label::Sigma(Sigma::SendVal(y, v))) | (Sigma::RecvVal(x, _), Label::Scope { chan: y, value: v, .. })
            if x != y =>
        {
            let l = Label::par(Label::Sigma(Sigma::RecvVal(x.clone(), v.clone())), send.label.clone());
            (l, fill(&recv.next, v))
        }
        (Sigma::RecvTag(x, c), Label::Sigma(Sigma::SendTag(y, d))) if x != y && c == d => {
            (Label::par(recv.label.clone(), send.label.clone()), recv.next.clone())
        }
        (Sigma::Close(x), Label::Sigma(Sigma::Open(y))) if x != y => {
            (Label::par(recv.label.clone(), send.label.clone()), recv.next.clone())
        }
        _ => return None,
    };
    let next = if std::ptr::eq(recv, a) {
        Proc::par(recv_next, send.next.clone())
    } else {
        Proc::par(send.next.clone(), recv_next)
    };
    let mut actors = a.actors.clone();
    actors.extend(&b.actors);
    let mut notes = a.notes.clone();
    notes.extend(b.notes.iter().cloned());
    Some(Transition {
        label,
        rule,
        next,
        actors,
        output: a.output.clone().or_else(|| b.output.clone()),
        made_channel: false,
        notes,
        via: None,
    })
}

fn is_receiving(s: &Sigma) -> bool {
    matches!(s, Sigma::RecvVal(..) | Sigma::RecvTag(..) | Sigma::Close(_))
}

/// Plugs a received value into the receiver's continuation.
fn fill(p: &Proc, v: &Expr) -> Proc {
    let hole = crate::ast::name(HOLE);
    match p {
        Proc::Thread(e) => Proc::Thread(e.subst(&hole, v)),
        Proc::Par(a, b) => Proc::par(fill(a, v), fill(b, v)),
        Proc::New { x, y, ty, body } => {
            Proc::New { x: x.clone(), y: y.clone(), ty: ty.clone(), body: Box::new(fill(body, v)) }
        }
    }
}

/// Whether `label`, seen at the restriction of `x` and `y`, lets it move.
pub(crate) fn in_progress_set(label: &Label, x: &Name, y: &Name) -> bool {
    match label {
        Label::Tau => true,
        Label::Par(a, b) => subjects(a, b).is_some_and(|(p, q)| (p == x && q == y) || (p == y && q == x)),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{name, Const, Expr, Type};
    use crate::typecheck::{load, type_process};

    fn image() -> Image {
        Image::new(&load("main : Unit\nmain = ()").unwrap())
    }

    fn nu(x: &str, y: &str, ty: Type, body: Proc) -> Proc {
        Proc::New { x: name(x), y: name(y), ty, body: Box::new(body) }
    }

    fn call(c: Const, targs: &[Type], args: Vec<Expr>) -> Expr {
        let f = targs.iter().fold(Expr::Const(c), |f, t| Expr::tapp(f, t.clone()));
        args.into_iter().fold(f, Expr::app)
    }

    fn only_tau(img: &Image, p: &Proc) -> Transition {
        let sem = Semantics { image: img, sel: SelRule::Sound };
        let mut ts: Vec<_> = enabled_transitions(sem, p, 0).into_iter().filter(|t| t.label == Label::Tau).collect();
        assert_eq!(ts.len(), 1, "{:?}", ts.iter().map(|t| t.rule).collect::<Vec<_>>());
        ts.pop().unwrap()
    }

    #[test]
    fn beta_lifts_to_a_silent_step() {
        let img = image();
        let p = Proc::Thread(Expr::app(Expr::abs("x", Some(Type::Unit), Expr::var("x")), Expr::unit()));
        let t = only_tau(&img, &p);
        assert_eq!(t.next, Proc::Thread(Expr::unit()));
    }

    #[test]
    fn wait_meets_terminate_and_drops_the_restriction() {
        let img = image();
        let p = nu(
            "x",
            "y",
            Type::EndWait,
            Proc::par(
                Proc::Thread(call(Const::Wait, &[], vec![Expr::var("x")])),
                Proc::Thread(call(Const::Terminate, &[], vec![Expr::var("y")])),
            ),
        );
        let t = only_tau(&img, &p);
        assert_eq!(t.rule, "Act-Wait");
        assert_eq!(t.next, Proc::par(Proc::Thread(Expr::unit()), Proc::Thread(Expr::unit())));
    }

    #[test]
    fn sending_a_private_end_widens_its_scope() {
        // ν#0(ν#1(⟨terminate (send #1a #0a)⟩ | ⟨wait #1b⟩) | ⟨receiver on #0b⟩)
        let img = image();
        let sender = call(
            Const::Terminate,
            &[],
            vec![call(Const::Send, &[Type::EndTerm, Type::EndTerm], vec![Expr::var("#1a"), Expr::var("#0a")])],
        );
        let receiver = Expr::let_pair(
            "c",
            "d",
            call(Const::Receive, &[Type::EndTerm, Type::EndWait], vec![Expr::var("#0b")]),
            Expr::let_unit(
                call(Const::Wait, &[], vec![Expr::var("d")]),
                call(Const::Terminate, &[], vec![Expr::var("c")]),
            ),
        );
        let p = nu(
            "#0a",
            "#0b",
            Type::output(Type::EndTerm, Type::EndTerm),
            Proc::par(
                nu(
                    "#1a",
                    "#1b",
                    Type::EndTerm,
                    Proc::par(Proc::Thread(sender), Proc::Thread(call(Const::Wait, &[], vec![Expr::var("#1b")]))),
                ),
                Proc::Thread(receiver),
            ),
        );
        type_process(&img.delta, &img.gamma, &p).unwrap();
        let t = only_tau(&img, &p);
        assert_eq!(t.rule, "Act-CloseL");
        // The #1 restriction now sits inside #0 and covers the receiver.
        let Proc::New { x, body, .. } = &t.next else { panic!("{}", t.next) };
        assert_eq!(&**x, "#0a");
        let Proc::New { x: a, body: inner, .. } = &**body else { panic!("{}", t.next) };
        assert_eq!(&**a, "#1a");
        let held: Vec<_> = inner.threads().into_iter().filter(|e| channels(e).contains("#1a")).collect();
        assert_eq!(held.len(), 1, "{}", t.next);
        type_process(&img.delta, &img.gamma, &t.next).unwrap();
    }
}
