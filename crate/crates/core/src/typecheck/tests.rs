use super::*;
use crate::parser::parse_expr;

fn ctx_of(src: &str) -> (KindContext, TypeContext) {
    let p = load(src).unwrap_or_else(|d| panic!("{d:?}"));
    (p.delta.clone(), p.context())
}

fn codes(src: &str) -> Vec<&'static str> {
    check_source(src).1.iter().filter(|d| d.is_error()).map(|d| d.code).collect()
}

const ARITH: &str = "\
protocol Arith = Neg Int | Add Int Int
main : Unit
main = ()
";

#[test]
fn select_type_materializes_payload() {
    let (delta, _) = ctx_of(ARITH);
    let t = typeof_select(&delta.decls, "Add").unwrap();
    assert_eq!(
        parser::pretty_type(&t),
        "forall (s:S). !Arith.s -> !Int.!Int.s"
    );
}

#[test]
fn negated_payload_reverses_direction() {
    let (delta, _) = ctx_of("protocol Ask = Ask Int -Int\nmain : Unit\nmain = ()\n");
    let t = typeof_select(&delta.decls, "Ask").unwrap();
    assert_eq!(parser::pretty_type(&t), "forall (s:S). !Ask.s -> !Int.?Int.s");
}

#[test]
fn channel_match_binds_continuation() {
    let (delta, g) = ctx_of(ARITH);
    let e = parse_expr("\\(c:?Arith.End!) -> case c of { Neg c -> let (x, c) = receive [Int, End!] c in let () = terminate c in printInt x, Add c -> let (x, c) = receive [Int, ?Int.End!] c in let (y, c) = receive [Int, End!] c in let () = terminate c in printInt (x + y) }").unwrap();
    let t = synth(&delta, &g, &e).unwrap();
    assert_eq!(parser::pretty_type(&t.ty), "?Arith.End! -> Unit");
}

#[test]
fn linear_variables_must_be_used_once() {
    let (delta, g) = ctx_of(ARITH);
    let twice = parse_expr("\\(c:End!) -> let () = terminate c in terminate c").unwrap();
    assert_eq!(synth(&delta, &g, &twice).unwrap_err().code(), "T001");
    let never = parse_expr("\\(c:End!) -> ()").unwrap();
    assert_eq!(synth(&delta, &g, &never).unwrap_err().code(), "T002");
}

#[test]
fn branches_must_agree_on_leftovers() {
    let src = "\
f : Bool -> End! -> Unit
f b c = if b then terminate c else ()
main : Unit
main = ()
";
    assert_eq!(codes(src), vec!["T008"]);
}

#[test]
fn data_types_build_and_match() {
    let src = "\
data List a = Nil | Cons a (List a)
len : List Int -> Int
len = rec len : List Int -> Int = \\l -> case l of { Nil -> 0, Cons x xs -> x + len xs }
main : Unit
main = printInt (len (Cons [Int] 1 (Nil [Int])))
";
    assert_eq!(codes(src), Vec::<&str>::new(), "{:?}", check_source(src).1);
}

#[test]
fn program_errors_are_located() {
    let src = "main : Unit\nmain = terminate zz\n";
    let (_, d) = check_source(src);
    assert_eq!(d[0].code, "T001");
    assert_eq!((d[0].span.line, d[0].span.col), (2, 18));
}

#[test]
fn main_must_be_unit() {
    assert_eq!(codes("main : Int\nmain = 1\n"), vec!["T023"]);
}

#[test]
fn polymorphic_definitions_check() {
    let src = "\
protocol Stream a = Next a (Stream a) | Stop
swap : forall (a:T) (b:T). (a, b) -> (b, a)
swap [a] [b] p = let (x, y) = p in (y, x)
main : Unit
main = let (x, y) = swap [Int, Unit] (1, ()) in let () = x in printInt y
";
    assert_eq!(codes(src), Vec::<&str>::new(), "{:?}", check_source(src).1);
}
