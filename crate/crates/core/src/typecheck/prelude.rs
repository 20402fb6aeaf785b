/// Declarations every program can use.
pub const PRELUDE: &str = "\
data Bool = True | False
sendInt : forall (s:S). Int -> !Int.s -> s
sendInt [s] x c = send [Int, s] x c
receiveInt : forall (s:S). ?Int.s -> (Int, s)
receiveInt [s] c = receive [Int, s] c
";
