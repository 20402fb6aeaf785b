//! Playground bindings. Each export takes source text and returns a JSON
//! string, so the page never has to know about the Rust types.

use algst::driver;
use algst::kindcheck::KindContext;
use algst::runtime::RunConfig;
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Normal forms of a type, or its diagnostics.
#[wasm_bindgen]
pub fn normalize(ty: &str) -> String {
    match driver::normal_forms(ty, &KindContext::default(), &[]) {
        Ok(n) => json!({ "ok": true, "kind": n.kind, "pos": n.pos, "neg": n.neg }),
        Err(ds) => json!({ "ok": false, "diagnostics": driver::diagnostics_json(&ds) }),
    }
    .to_string()
}

#[wasm_bindgen]
pub fn check(src: &str) -> String {
    let (ok, ds) = match driver::check(src) {
        Ok((_, ds)) => (true, ds),
        Err(ds) => (false, ds),
    };
    json!({ "ok": ok, "diagnostics": driver::diagnostics_json(&ds) }).to_string()
}

/// Runs `main` under the round-robin scheduler.
#[wasm_bindgen]
pub fn run(src: &str, fuel: u32) -> String {
    let cfg = RunConfig { fuel: fuel as usize, ..RunConfig::default() };
    match driver::run(src, &cfg) {
        Ok(r) => {
            let mut v = driver::outcome_json(&r);
            v["ok"] = json!(true);
            v["summary"] = json!(driver::outcome_line(&r));
            v
        }
        Err(ds) => json!({ "ok": false, "diagnostics": driver::diagnostics_json(&ds) }),
    }
    .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: String) -> serde_json::Value {
        serde_json::from_str(&s).unwrap()
    }

    #[test]
    fn normalize_reports_both_forms() {
        let v = parse(normalize("Dual(?(-Int).a)"));
        assert_eq!(v["pos"], "?Int.Dual a");
        assert_eq!(v["neg"], "!Int.a");
        assert_eq!(parse(normalize("?"))["ok"], false);
    }

    #[test]
    fn check_and_run() {
        let src = "main : Unit\nmain = ()\n";
        assert_eq!(parse(check(src))["ok"], true);
        let v = parse(run(src, 100));
        assert_eq!(v["outcome"], "completed");
        let bad = parse(check("main : Int\nmain = ()\n"));
        assert_eq!(bad["ok"], false);
        assert!(bad["diagnostics"][0]["line"].is_u64());
    }
}
