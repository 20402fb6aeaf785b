//! Re-typing the running process after every step.

use std::collections::HashMap;

use crate::ast::{Name, Proc};
use crate::typecheck::{type_process, CheckedProgram};

use super::expr::channels;
use super::machine::{Machine, Outcome, RunConfig};
use super::Image;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    /// 0 for the initial process.
    pub step: usize,
    pub rule: String,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct PreservationReport {
    pub steps: usize,
    pub outcome: Outcome,
    pub violations: Vec<Violation>,
}

impl PreservationReport {
    pub fn preserved(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Give up after this many violations; later ones are usually echoes.
const MAX_VIOLATIONS: usize = 16;

/// Runs `p` and checks after each step that the process still types in the
/// globals, that both ends of every synchronised channel stayed dual, and
/// that no endpoint is held by two threads.
pub fn check_preservation(p: &CheckedProgram, cfg: &RunConfig) -> PreservationReport {
    let image = Image::new(p);
    let mut m = Machine::new(&image, cfg);
    let mut violations = Vec::new();
    check_state(&image, &m.root, 0, "start", &mut violations);
    let outcome = loop {
        match m.step() {
            Ok(t) => {
                for n in &t.notes {
                    violations.push(Violation { step: m.steps, rule: t.rule.to_string(), reason: n.clone() });
                }
                check_state(&image, &m.root, m.steps, t.rule, &mut violations);
                if violations.len() >= MAX_VIOLATIONS {
                    break Outcome::FuelExhausted;
                }
            }
            Err(o) => break o,
        }
    };
    PreservationReport { steps: m.steps, outcome, violations }
}

fn check_state(image: &Image, p: &Proc, step: usize, rule: &str, out: &mut Vec<Violation>) {
    if let Err(e) = type_process(&image.delta, &image.gamma, p) {
        out.push(Violation { step, rule: rule.to_string(), reason: format!("{} {e}", e.code()) });
    }
    let mut holders: HashMap<Name, usize> = HashMap::new();
    for e in p.threads() {
        for c in channels(e) {
            *holders.entry(c).or_default() += 1;
        }
    }
    let mut shared: Vec<_> = holders.into_iter().filter(|(_, n)| *n > 1).map(|(c, _)| c).collect();
    shared.sort();
    for c in shared {
        out.push(Violation { step, rule: rule.to_string(), reason: format!("`{c}` is held by several threads") });
    }
}
