use std::path::PathBuf;
use std::process::{Command, Output};

fn algst(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_algst")).args(args).output().unwrap()
}

fn corpus(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/corpus").join(name);
    p.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn nf_prints_the_worked_example() {
    let o = algst(&["nf", "Dual(?(-Int).a)"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().next(), Some("?Int.Dual a"));
}

#[test]
fn nf_uses_declarations_and_kinds() {
    let o = algst(&["nf", "--decls", &corpus("arith.algst"), "!(-Arith).End!"]);
    assert_eq!(stdout(&o), "?Arith.End!\n!Arith.End?\n");
    let o = algst(&["nf", "--kind", "p:P", "Dual p"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn check_accepts_the_ast_program() {
    let o = algst(&["check", &corpus("sendAst.algst")]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn check_rejects_a_mutation_with_a_location() {
    let o = algst(&["check", &corpus("mutations/missingAdd.algst")]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains(":5:20: error[T007]"), "{err}");
}

#[test]
fn check_json_is_stable() {
    let args = ["check", "--json", &corpus("mutations/missingAdd.algst"), &corpus("hello.algst")];
    let a = algst(&args);
    let b = algst(&args);
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v[0]["diagnostics"][0]["code"], "T007");
    assert_eq!(v[1]["diagnostics"].as_array().map(Vec::len), Some(0));
}

#[test]
fn run_exit_codes_follow_the_outcome() {
    assert_eq!(algst(&["run", &corpus("hello.algst")]).status.code(), Some(0));
    assert_eq!(algst(&["run", &corpus("deadlock.algst")]).status.code(), Some(2));
    assert_eq!(algst(&["run", "--fuel", "100", &corpus("ones.algst")]).status.code(), Some(3));
    assert_eq!(algst(&["run", &corpus("mutations/missingAdd.algst")]).status.code(), Some(1));
}

#[test]
fn run_prints_output_and_json() {
    let o = algst(&["run", &corpus("arithClient.algst")]);
    assert_eq!(stdout(&o), "7\n-5\n");
    let o = algst(&["run", "--json", "--seed", "3", &corpus("arithClient.algst")]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["outcome"], "completed");
    assert_eq!(v["output"], serde_json::json!(["7", "-5"]));
}

#[test]
fn trace_lines_are_json() {
    let o = algst(&["run", "--trace", &corpus("hello.algst")]);
    let err = String::from_utf8(o.stderr).unwrap();
    let steps: Vec<serde_json::Value> =
        err.lines().filter(|l| l.starts_with('{')).map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(!steps.is_empty());
    for (i, s) in steps.iter().enumerate() {
        assert_eq!(s["step"], i + 1);
        assert!(s["rule"].is_string() && s["label"].is_string() && s["fuel"].is_u64());
    }
}

#[test]
fn usage_and_io_errors() {
    assert_eq!(algst(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(algst(&["run", "--policy", "round-robin", "--seed", "1", &corpus("hello.algst")]).status.code(), Some(64));
    assert_eq!(algst(&["check", "/definitely/not/here.algst"]).status.code(), Some(66));
    let v = algst(&["--version"]);
    assert_eq!(v.status.code(), Some(0));
    assert!(stdout(&v).contains("grammar"));
}

#[test]
fn bench_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("equiv");
    let o = algst(&["bench", "--min", "6", "--max", "8", "--reps", "2", "--out", base.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(base.with_extension("csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("size,kind,median_ns,p10_ns,p90_ns"));
    assert_eq!(lines.count(), 6);
    let js: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(base.with_extension("json")).unwrap()).unwrap();
    assert!(js["eq"]["slope"].is_f64() && js["neq"]["r2"].is_f64());
}
