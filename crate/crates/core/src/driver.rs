//! Text in, reports out: what the command line and the playground share.

use serde::Serialize;
use serde_json::{json, Value};

use crate::ast::{Kind, Name};
use crate::diagnostics::{Diagnostic, Span};
use crate::kindcheck::{synth_kind, KindContext};
use crate::normalize::{nf_neg, nf_pos};
use crate::parser::{parse_type, pretty_type};
use crate::runtime::{self, Outcome, RunConfig, RunResult};
use crate::typecheck::{check_source, CheckedProgram};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NormalForms {
    pub kind: String,
    /// Normal form of the type.
    pub pos: String,
    /// Normal form of its dual; session types only.
    pub neg: Option<String>,
}

impl NormalForms {
    /// `pos` on the first line, then `neg` if there is one.
    pub fn lines(&self) -> String {
        match &self.neg {
            Some(n) => format!("{}\n{n}", self.pos),
            None => self.pos.clone(),
        }
    }
}

/// Normal forms of a type written in source syntax. Free variables take
/// their kind from `kinds` and default to S; `delta` supplies protocols.
pub fn normal_forms(src: &str, delta: &KindContext, kinds: &[(Name, Kind)]) -> Result<NormalForms, Vec<Diagnostic>> {
    let t = parse_type(src)?;
    let mut ctx = delta.clone();
    let mut free: Vec<Name> = t.free_vars().into_iter().filter(|v| !ctx.contains(v)).collect();
    free.sort();
    for v in free {
        let k = kinds.iter().find(|(n, _)| *n == v).map_or(Kind::S, |(_, k)| *k);
        ctx.push(v, k);
    }
    let kind = synth_kind(&ctx, &t).map_err(|e| vec![Diagnostic::error(e.code(), Span::new(1, 1, 0), e.to_string())])?;
    Ok(NormalForms {
        kind: kind.to_string(),
        pos: pretty_type(&nf_pos(&t)),
        neg: (kind == Kind::S).then(|| pretty_type(&nf_neg(&t))),
    })
}

pub fn diagnostics_json(ds: &[Diagnostic]) -> Value {
    Value::Array(ds.iter().map(Diagnostic::to_json).collect())
}

/// Checks a program; `Ok` carries any warnings alongside it.
pub fn check(src: &str) -> Result<(CheckedProgram, Vec<Diagnostic>), Vec<Diagnostic>> {
    match check_source(src) {
        (Some(p), ds) => Ok((p, ds)),
        (None, ds) => Err(ds),
    }
}

pub fn outcome_json(r: &RunResult) -> Value {
    let mut v = json!({
        "outcome": r.outcome.name(),
        "exit_code": r.outcome.exit_code(),
        "steps": r.steps,
        "output": r.output,
    });
    match &r.outcome {
        Outcome::Deadlock(w) => v["blocked"] = json!(w),
        Outcome::StuckExpr { thread, reason } => v["stuck"] = json!({ "thread": thread, "reason": reason }),
        _ => {}
    }
    v
}

/// One line describing how a run ended.
pub fn outcome_line(r: &RunResult) -> String {
    match &r.outcome {
        Outcome::Completed => format!("completed after {} steps", r.steps),
        Outcome::FuelExhausted => format!("out of fuel after {} steps", r.steps),
        Outcome::StuckExpr { thread, reason } => format!("thread {thread} is stuck: {reason}"),
        Outcome::Deadlock(w) => {
            let parts: Vec<String> = w
                .iter()
                .map(|b| {
                    let offers = if b.offers.is_empty() { "nothing".to_string() } else { b.offers.join(", ") };
                    format!("({} {}) offers {offers}", b.x, b.y)
                })
                .collect();
            format!("deadlock after {} steps: {}", r.steps, parts.join("; "))
        }
    }
}

/// Checks and runs a program.
pub fn run(src: &str, cfg: &RunConfig) -> Result<RunResult, Vec<Diagnostic>> {
    let (p, _) = check(src)?;
    Ok(runtime::run(&p, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        let nf = normal_forms("Dual(?(-Int).a)", &KindContext::default(), &[]).unwrap();
        assert_eq!(nf.pos, "?Int.Dual a");
        assert_eq!(nf.neg.as_deref(), Some("!Int.a"));
        assert_eq!(nf.kind, "S");
    }

    #[test]
    fn free_variable_kinds_can_be_set() {
        let k = [(crate::ast::name("p"), Kind::P)];
        let nf = normal_forms("- -p", &KindContext::default(), &k).unwrap();
        assert_eq!((nf.pos.as_str(), nf.neg), ("p", None));
        assert!(normal_forms("Dual p", &KindContext::default(), &k).is_err());
        assert!(normal_forms("Dual p", &KindContext::default(), &[]).is_ok());
    }

    #[test]
    fn run_reports_deadlock_witness() {
        let src = "main : Unit\nmain =\n  let (x, y) = new [End?] in\n  let (u, v) = new [End?] in\n  \
                   let () = fork (\\w -> let () = w in let () = wait u in terminate y) in\n  \
                   let () = wait x in terminate v\n";
        let r = run(src, &RunConfig::default()).unwrap();
        assert_eq!(r.outcome.name(), "deadlock");
        assert_eq!(outcome_json(&r)["blocked"].as_array().unwrap().len(), 2);
        assert!(outcome_line(&r).starts_with("deadlock"));
    }
}
