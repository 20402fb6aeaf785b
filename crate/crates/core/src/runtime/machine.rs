use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ast::Proc;
use crate::typecheck::CheckedProgram;

use super::context::SelRule;
use super::process::{explore, in_progress_set, Semantics, Transition};
use super::{Image, Label};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Policy {
    /// Threads take turns in left-to-right order.
    RoundRobin,
    /// Uniform choice among enabled steps, from a seeded generator.
    Random(u64),
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub policy: Policy,
    pub fuel: usize,
    pub trace: bool,
    pub sel: SelRule,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig { policy: Policy::RoundRobin, fuel: 100_000, trace: false, sel: SelRule::Sound }
    }
}

/// A restriction that cannot move, with the actions its body offers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Blocked {
    pub x: String,
    pub y: String,
    pub offers: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Completed,
    Deadlock(Vec<Blocked>),
    FuelExhausted,
    StuckExpr { thread: usize, reason: String },
}

impl Outcome {
    pub fn name(&self) -> &'static str {
        match self {
            Outcome::Completed => "completed",
            Outcome::Deadlock(_) => "deadlock",
            Outcome::FuelExhausted => "fuel",
            Outcome::StuckExpr { .. } => "stuck",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Completed => 0,
            Outcome::Deadlock(_) => 2,
            Outcome::FuelExhausted => 3,
            Outcome::StuckExpr { .. } => 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceStep {
    pub step: usize,
    pub label: String,
    pub rule: String,
    pub fuel: usize,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub outcome: Outcome,
    pub output: Vec<String>,
    pub trace: Vec<TraceStep>,
    pub steps: usize,
    pub last: Proc,
}

pub struct Machine<'a> {
    sem: Semantics<'a>,
    pub root: Proc,
    fresh: u32,
    pub fuel: usize,
    pub steps: usize,
    rng: Option<ChaCha8Rng>,
    turn: usize,
    pub output: Vec<String>,
    pub trace: Vec<TraceStep>,
    record: bool,
}

impl<'a> Machine<'a> {
    pub fn new(image: &'a Image, cfg: &RunConfig) -> Machine<'a> {
        Machine::with_root(image, cfg, image.main_process())
    }

    pub fn with_root(image: &'a Image, cfg: &RunConfig, root: Proc) -> Machine<'a> {
        Machine {
            sem: Semantics { image, sel: cfg.sel },
            root,
            fresh: 0,
            fuel: cfg.fuel,
            steps: 0,
            rng: match cfg.policy {
                Policy::RoundRobin => None,
                Policy::Random(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
            },
            turn: 0,
            output: Vec::new(),
            trace: Vec::new(),
            record: cfg.trace,
        }
    }

    /// Takes one silent step and returns it, or says why there is none.
    pub fn step(&mut self) -> Result<Transition, Outcome> {
        let (all, stuck) = explore(self.sem, &self.root, self.fresh);
        if let Some((thread, reason)) = stuck.into_iter().next() {
            return Err(Outcome::StuckExpr { thread, reason });
        }
        let mut silent: Vec<Transition> = all.into_iter().filter(|t| t.label == Label::Tau).collect();
        if silent.is_empty() {
            return Err(if is_completed(&self.root) {
                Outcome::Completed
            } else {
                Outcome::Deadlock(blocked(self.sem, &self.root))
            });
        }
        if self.fuel == 0 {
            return Err(Outcome::FuelExhausted);
        }
        let i = self.choose(&silent);
        let t = silent.swap_remove(i);
        self.root = t.next.clone();
        self.fuel -= 1;
        self.steps += 1;
        if t.made_channel {
            self.fresh += 1;
        }
        if let Some(o) = &t.output {
            self.output.push(o.clone());
        }
        if self.record {
            self.trace.push(TraceStep {
                step: self.steps,
                label: describe(&t),
                rule: t.rule.to_string(),
                fuel: self.fuel,
            });
        }
        Ok(t)
    }

    fn choose(&mut self, ts: &[Transition]) -> usize {
        if let Some(rng) = &mut self.rng {
            return rng.gen_range(0..ts.len());
        }
        let n = self.root.threads().len().max(1);
        let distance = |t: &Transition| t.actors.iter().map(|&a| (a + n - self.turn % n) % n).min().unwrap_or(n);
        let (i, best) = ts.iter().enumerate().min_by_key(|(_, t)| distance(t)).expect("non-empty");
        let first = best.actors.iter().min_by_key(|&&a| (a + n - self.turn % n) % n).copied().unwrap_or(0);
        self.turn = first + 1;
        i
    }

    pub fn run(mut self) -> RunResult {
        let outcome = loop {
            if let Err(o) = self.step() {
                break o;
            }
        };
        RunResult { outcome, output: self.output, trace: self.trace, steps: self.steps, last: self.root }
    }
}

pub fn run(p: &CheckedProgram, cfg: &RunConfig) -> RunResult {
    let image = Image::new(p);
    Machine::new(&image, cfg).run()
}

/// Silent steps carry the synchronised actions in the trace, so that a
/// reader sees what happened rather than a row of `τ`.
fn describe(t: &Transition) -> String {
    match &t.via {
        Some(l) => l.to_string(),
        None => t.label.to_string(),
    }
}

fn is_completed(p: &Proc) -> bool {
    match p {
        Proc::Thread(e) => e.is_unit(),
        Proc::Par(a, b) => is_completed(a) && is_completed(b),
        Proc::New { .. } => false,
    }
}

fn blocked(sem: Semantics<'_>, p: &Proc) -> Vec<Blocked> {
    let mut out = Vec::new();
    let mut stack = vec![p];
    while let Some(p) = stack.pop() {
        match p {
            Proc::Thread(_) => {}
            Proc::Par(a, b) => {
                stack.push(b);
                stack.push(a);
            }
            Proc::New { x, y, body, .. } => {
                let ts = explore(sem, body, 0).0;
                debug_assert!(ts.iter().all(|t| !in_progress_set(&t.label, x, y)));
                let mut offers: Vec<String> = ts.iter().map(|t| t.label.to_string()).collect();
                offers.dedup();
                out.push(Blocked { x: x.to_string(), y: y.to_string(), offers });
                stack.push(body);
            }
        }
    }
    out
}
