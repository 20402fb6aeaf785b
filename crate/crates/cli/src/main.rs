use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use algst::ast::{name, Kind, Name};
use algst::bench::{bench_equiv, with_stack, PairKind};
use algst::diagnostics::{has_errors, Diagnostic};
use algst::driver;
use algst::kindcheck::KindContext;
use algst::runtime::{Machine, Policy, RunConfig, TraceStep};
use algst::runtime::Image;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

const EXIT_DIAGNOSTICS: u8 = 1;
const EXIT_USAGE: u8 = 64;
const EXIT_IO: u8 = 66;

fn long_version() -> &'static str {
    concat!(
        env!("CARGO_PKG_VERSION"),
        " (",
        env!("ALGST_RUSTC"),
        ", grammar ",
        env!("ALGST_GRAMMAR"),
        ")"
    )
}

#[derive(Parser)]
#[command(name = "algst", version = long_version(), about = "Algebraic session types: check, run and normalise")]
struct Cli {
    /// Machine-readable output.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    RoundRobin,
    Random,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse, kind-check and type-check programs.
    Check {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Check a program, then run `main`.
    Run {
        path: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        fuel: usize,
        /// Seed for the random scheduler; implies `--policy random`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        policy: Option<PolicyArg>,
        /// One JSON line per step on stderr.
        #[arg(long)]
        trace: bool,
    },
    /// Time type equivalence on generated instances.
    Bench {
        /// Smallest size, as a power of two.
        #[arg(long, default_value_t = 10)]
        min: u32,
        /// Largest size, as a power of two.
        #[arg(long, default_value_t = 20)]
        max: u32,
        /// Exponent increment between sizes.
        #[arg(long, default_value_t = 1)]
        step: u32,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Write `<out>.csv` and `<out>.json` instead of printing CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the normal form of a type and, for session types, of its dual.
    Nf {
        ty: String,
        /// Program whose protocol declarations are in scope.
        #[arg(long)]
        decls: Option<PathBuf>,
        /// Kind of a free variable, as `name:K`. Unlisted ones are S.
        #[arg(long = "kind", value_parser = parse_binding)]
        kinds: Vec<(Name, Kind)>,
    },
}

fn parse_binding(s: &str) -> Result<(Name, Kind), String> {
    let (v, k) = s.split_once(':').ok_or("expected name:K")?;
    let k = match k {
        "S" => Kind::S,
        "T" => Kind::T,
        "P" => Kind::P,
        _ => return Err(format!("unknown kind `{k}`")),
    };
    Ok((name(v), k))
}

enum Failure {
    Io(PathBuf, io::Error),
    Usage(String),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Io(p, e)) => {
            eprintln!("algst: {}: {e}", p.display());
            ExitCode::from(EXIT_IO)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("algst: {m}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn read(p: &Path) -> Result<String, Failure> {
    fs::read_to_string(p).map_err(|e| Failure::Io(p.to_path_buf(), e))
}

fn dispatch(cli: &Cli) -> Result<u8, Failure> {
    match &cli.cmd {
        Cmd::Check { paths } => check(paths, cli.json),
        Cmd::Run { path, fuel, seed, policy, trace } => {
            let policy = match (policy, seed) {
                (Some(PolicyArg::RoundRobin), Some(_)) => {
                    return Err(Failure::Usage("--seed needs the random policy".into()))
                }
                (Some(PolicyArg::RoundRobin), None) | (None, None) => Policy::RoundRobin,
                (_, s) => Policy::Random(s.unwrap_or(0)),
            };
            let cfg = RunConfig { policy, fuel: *fuel, trace: *trace, ..RunConfig::default() };
            run(path, &cfg, cli.json)
        }
        Cmd::Bench { min, max, step, reps, seed, out } => {
            if min > max || *step == 0 || *min < 2 || *max > 26 {
                return Err(Failure::Usage("bench needs 2 <= min <= max <= 26 and step >= 1".into()));
            }
            bench(*min, *max, *step, *reps, *seed, out.as_deref(), cli.json)
        }
        Cmd::Nf { ty, decls, kinds } => nf(ty, decls.as_deref(), kinds, cli.json),
    }
}

fn print_diags(path: &Path, ds: &[Diagnostic]) {
    for d in ds {
        eprintln!("{}:{d}", path.display());
    }
}

fn check(paths: &[PathBuf], as_json: bool) -> Result<u8, Failure> {
    let mut failed = false;
    let mut report = Vec::new();
    for p in paths {
        let src = read(p)?;
        let ds = match driver::check(&src) {
            Ok((_, warnings)) => warnings,
            Err(errors) => errors,
        };
        failed |= has_errors(&ds);
        if as_json {
            report.push(json!({ "path": p.display().to_string(), "diagnostics": driver::diagnostics_json(&ds) }));
        } else {
            print_diags(p, &ds);
            if !has_errors(&ds) {
                println!("{}: ok", p.display());
            }
        }
    }
    if as_json {
        println!("{}", serde_json::Value::Array(report));
    }
    Ok(if failed { EXIT_DIAGNOSTICS } else { 0 })
}

fn run(path: &Path, cfg: &RunConfig, as_json: bool) -> Result<u8, Failure> {
    let src = read(path)?;
    let program = match driver::check(&src) {
        Ok((p, _)) => p,
        Err(ds) => {
            if as_json {
                println!("{}", json!({ "diagnostics": driver::diagnostics_json(&ds) }));
            } else {
                print_diags(path, &ds);
            }
            return Ok(EXIT_DIAGNOSTICS);
        }
    };
    let image = Image::new(&program);
    // Stream the trace as the machine goes rather than after the fact.
    let quiet = RunConfig { trace: false, ..cfg.clone() };
    let mut m = Machine::new(&image, &quiet);
    let stderr = io::stderr();
    let outcome = loop {
        match m.step() {
            Ok(t) if cfg.trace => {
                let label = t.via.as_ref().unwrap_or(&t.label).to_string();
                let line = TraceStep { step: m.steps, label, rule: t.rule.to_string(), fuel: m.fuel };
                let _ = writeln!(stderr.lock(), "{}", serde_json::to_string(&line).unwrap());
            }
            Ok(_) => {}
            Err(o) => break o,
        }
    };
    let r = algst::runtime::RunResult { outcome, output: m.output, trace: Vec::new(), steps: m.steps, last: m.root };
    if as_json {
        println!("{}", driver::outcome_json(&r));
    } else {
        for line in &r.output {
            println!("{line}");
        }
        eprintln!("{}", driver::outcome_line(&r));
    }
    Ok(r.outcome.exit_code() as u8)
}

fn bench(min: u32, max: u32, step: u32, reps: usize, seed: u64, out: Option<&Path>, as_json: bool) -> Result<u8, Failure> {
    let sizes: Vec<usize> = (min..=max).step_by(step as usize).map(|k| 1usize << k).collect();
    let table = with_stack(4096, move || bench_equiv(&sizes, reps, seed));
    let report = json!({
        "rows": table.rows,
        "eq": { "slope": table.eq.slope, "r2": table.eq.r2, "ratios": table.ratios(PairKind::Eq, 0) },
        "neq": { "slope": table.neq.slope, "r2": table.neq.r2, "ratios": table.ratios(PairKind::Neq, 0) },
    });
    match out {
        Some(base) => {
            let csv = base.with_extension("csv");
            let js = base.with_extension("json");
            fs::write(&csv, table.to_csv()).map_err(|e| Failure::Io(csv.clone(), e))?;
            fs::write(&js, serde_json::to_string_pretty(&report).unwrap()).map_err(|e| Failure::Io(js.clone(), e))?;
            eprintln!("wrote {} and {}", csv.display(), js.display());
        }
        None if as_json => println!("{report}"),
        None => print!("{}", table.to_csv()),
    }
    eprintln!(
        "slope eq {:.3} (r2 {:.4}), neq {:.3} (r2 {:.4})",
        table.eq.slope, table.eq.r2, table.neq.slope, table.neq.r2
    );
    Ok(0)
}

fn nf(ty: &str, decls: Option<&Path>, kinds: &[(Name, Kind)], as_json: bool) -> Result<u8, Failure> {
    let delta = match decls {
        None => KindContext::default(),
        Some(p) => match driver::check(&read(p)?) {
            Ok((prog, _)) => prog.delta,
            Err(ds) => {
                print_diags(p, &ds);
                return Ok(EXIT_DIAGNOSTICS);
            }
        },
    };
    match driver::normal_forms(ty, &delta, kinds) {
        Ok(n) if as_json => println!("{}", json!(n)),
        Ok(n) => println!("{}", n.lines()),
        Err(ds) => {
            if as_json {
                println!("{}", json!({ "diagnostics": driver::diagnostics_json(&ds) }));
            } else {
                print_diags(Path::new("<type>"), &ds);
            }
            return Ok(EXIT_DIAGNOSTICS);
        }
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    #[test]
    fn build_script_grammar_matches_the_parser() {
        assert_eq!(env!("ALGST_GRAMMAR"), algst::parser::GRAMMAR_VERSION.to_string());
    }
}
