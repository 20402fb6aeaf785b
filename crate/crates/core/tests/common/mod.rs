#![allow(dead_code)]

use std::fs;
use std::panic;
use std::path::{Path, PathBuf};

use algst::ast::{Decl, SourceProgram};
use algst::parser::{parse_bytes, parse_program, pretty_program};
use rand_chacha::ChaCha8Rng;

use algst::runtime::{run, Outcome, RunConfig};
use algst::typecheck::{load, CheckedProgram};
use rand::Rng;

pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

pub fn source(name: &str) -> String {
    fs::read_to_string(corpus_dir().join(format!("{name}.algst"))).unwrap()
}

pub fn program(name: &str) -> CheckedProgram {
    load(&source(name)).unwrap_or_else(|e| panic!("{name}: {e:?}"))
}

/// Corpus programs with a `run:` line in their sidecar.
pub fn runnable() -> Vec<String> {
    let mut out: Vec<String> = fs::read_dir(corpus_dir())
        .unwrap()
        .filter_map(|e| {
            let p = e.unwrap().path();
            let text = fs::read_to_string(&p).ok()?;
            (p.extension()? == "expect" && text.lines().any(|l| l.starts_with("run:")))
                .then(|| p.file_stem().unwrap().to_string_lossy().into_owned())
        })
        .collect();
    out.sort();
    out
}

#[derive(Clone, Debug, PartialEq)]
pub enum Tree {
    Leaf(i64),
    Node(Box<Tree>, Box<Tree>),
}

pub fn random_tree(rng: &mut impl Rng, depth: u32) -> Tree {
    if depth == 0 || rng.gen_bool(0.4) {
        Tree::Leaf(rng.gen_range(-99..100))
    } else {
        Tree::Node(Box::new(random_tree(rng, depth - 1)), Box::new(random_tree(rng, depth - 1)))
    }
}

pub fn depth(t: &Tree) -> u32 {
    match t {
        Tree::Leaf(_) => 0,
        Tree::Node(l, r) => 1 + depth(l).max(depth(r)),
    }
}

fn int(n: i64) -> String {
    if n < 0 {
        format!("(0 - {})", -n)
    } else {
        n.to_string()
    }
}

pub fn tree_source(t: &Tree) -> String {
    match t {
        Tree::Leaf(n) => format!("(Con {})", int(*n)),
        Tree::Node(l, r) => format!("(Add {} {})", tree_source(l), tree_source(r)),
    }
}

/// What the program's `dump` should print for `t`.
pub fn preorder(t: &Tree, out: &mut Vec<String>) {
    match t {
        Tree::Leaf(n) => out.extend(["0".to_string(), n.to_string()]),
        Tree::Node(l, r) => {
            out.push("1".into());
            preorder(l, out);
            preorder(r, out);
        }
    }
}

/// Sends `t` through the corpus round-trip program; returns the rebuilt
/// tree's dump, or a description of what went wrong.
pub fn round_trip(t: &Tree) -> Result<Vec<String>, String> {
    let base = source("astRoundTrip");
    let start = base.find("tree = ").unwrap();
    let end = start + base[start..].find('\n').unwrap();
    let src = format!("{}tree = {}{}", &base[..start], tree_source(t), &base[end..]);
    let p = load(&src).map_err(|e| format!("{e:?}"))?;
    let r = run(&p, &RunConfig { fuel: 1_000_000, ..RunConfig::default() });
    match r.outcome {
        Outcome::Completed => Ok(r.output),
        o => Err(format!("{o:?}")),
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Query {
    Neg(i64),
    Add(i64, i64),
}

impl Query {
    pub fn random(rng: &mut impl Rng) -> Query {
        let (x, y) = (rng.gen_range(-1000..1000), rng.gen_range(-1000..1000));
        if rng.gen_bool(0.5) {
            Query::Neg(x)
        } else {
            Query::Add(x, y)
        }
    }

    pub fn answer(self) -> i64 {
        match self {
            Query::Neg(x) => -x,
            Query::Add(x, y) => x + y,
        }
    }
}

/// Asks the corpus arithmetic server one question.
pub fn ask(q: Query) -> Result<i64, String> {
    let base = source("arithClient");
    let start = base.find("main : Unit").unwrap();
    let call = match q {
        Query::Neg(x) => format!("neg {} c", int(x)),
        Query::Add(x, y) => format!("add {} {} c", int(x), int(y)),
    };
    let src = format!(
        "{}main : Unit\nmain =\n  let (c, s) = new [!Arith.End!] in\n  \
         let () = fork (\\u -> let () = u in serveArith [End?] s |> wait) in\n  {call}\n",
        &base[..start]
    );
    let p = load(&src).map_err(|e| format!("{e:?}"))?;
    let r = run(&p, &RunConfig::default());
    match (&r.outcome, r.output.as_slice()) {
        (Outcome::Completed, [x]) => x.parse().map_err(|_| x.clone()),
        (o, out) => Err(format!("{o:?} {out:?}")),
    }
}

pub fn unspanned(p: &SourceProgram) -> Vec<Decl> {
    p.decls
        .iter()
        .map(|d| match d {
            Decl::Definition(def) => {
                let mut def = def.clone();
                def.body = def.body.strip_spans();
                Decl::Definition(def)
            }
            d => d.clone(),
        })
        .collect()
}

/// `parse (pretty p) == p`, ignoring positions.
pub fn round_trips(p: &SourceProgram) -> Result<(), String> {
    let text = pretty_program(p);
    let (q, diags) = parse_program(&text);
    if !diags.is_empty() {
        return Err(format!("{text}\n{diags:?}"));
    }
    if unspanned(&q) != unspanned(p) {
        return Err(format!("{text}\nreparsed as\n{}", pretty_program(&q)));
    }
    Ok(())
}

/// Text the lexer knows well, so that the parser gets past the first token.
const SOUP: [&str; 40] = [
    "x", "f", "Int", "Arith", "End?", "End!", "Dual", "forall", "(", ")", "[", "]", "{", "}", "->", "\\", ".", "?",
    "!", "-", "--", ",", ":", "=", "|", "|>", "let", "in", "case", "of", "match", "with", "protocol", "data",
    "type", "\n", " ", "1", "'c'", "\"s\"",
];

pub fn soup(rng: &mut ChaCha8Rng) -> Vec<u8> {
    let n = rng.gen_range(0..60);
    (0..n).map(|_| SOUP[rng.gen_range(0..SOUP.len())]).collect::<Vec<_>>().join(" ").into_bytes()
}

pub fn noise(rng: &mut ChaCha8Rng) -> Vec<u8> {
    let n = rng.gen_range(0..200);
    match rng.gen_range(0..2) {
        0 => (0..n).map(|_| rng.gen()).collect(),
        _ => (0..n).map(|_| rng.gen_range(b' '..=b'~')).collect(),
    }
}

/// Parsing `bytes` must not panic; clean parses must round trip.
pub fn survives(bytes: &[u8]) -> Result<(), String> {
    let r = panic::catch_unwind(|| parse_bytes(bytes));
    match r {
        Err(_) => Err(format!("panic on {:?}", String::from_utf8_lossy(bytes))),
        Ok((p, d)) if d.is_empty() => round_trips(&p),
        Ok(_) => Ok(()),
    }
}
