use std::process::Command;

fn main() {
    let rustc = std::env::var("RUSTC").unwrap_or_else(|_| "rustc".into());
    let version = Command::new(rustc)
        .arg("--version")
        .output()
        .ok()
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .unwrap_or_else(|| "rustc unknown".into());
    println!("cargo:rustc-env=ALGST_RUSTC={version}");
    // Keep in step with `algst::parser::GRAMMAR_VERSION`; a test checks it.
    println!("cargo:rustc-env=ALGST_GRAMMAR=1");
    println!("cargo:rerun-if-changed=build.rs");
}
