//! Typing of runtime processes.

use crate::ast::{Kind, Proc, Type};
use crate::kindcheck::{check_kind, KindContext};
use crate::normalize::nf_neg;

use super::{check, release, Mult, TResult, TypeContext, TypeError};

/// How linear resources are divided between the two sides of `P | Q`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SplitStrategy {
    /// Type the left side first and hand its leftovers to the right.
    #[default]
    Threaded,
    /// Try every split of the linear entries. Exponential; small processes only.
    Exhaustive,
}

/// Types `p` under `g` (globals plus free channel endpoints). Every linear
/// entry must be consumed.
pub fn type_process(delta: &KindContext, g: &TypeContext, p: &Proc) -> TResult<()> {
    type_process_with(delta, g, p, SplitStrategy::Threaded)
}

pub fn type_process_with(delta: &KindContext, g: &TypeContext, p: &Proc, how: SplitStrategy) -> TResult<()> {
    let left = match how {
        SplitStrategy::Threaded => threaded(delta, g, p)?,
        SplitStrategy::Exhaustive => {
            exhaustive(delta, g, p)?;
            return Ok(());
        }
    };
    let unused = left.linear().next().map(|e| e.name.clone());
    match unused {
        Some(n) => Err(TypeError::Unconsumed(n)),
        None => Ok(()),
    }
}

fn bind_endpoints(delta: &KindContext, g: &TypeContext, p: &Proc) -> TResult<(TypeContext, [u32; 2])> {
    let Proc::New { x, y, ty, .. } = p else { unreachable!() };
    check_kind(delta, ty, Kind::S)?;
    let mut ctx = g.clone();
    for n in [x, y] {
        if ctx.has_linear(n) {
            return Err(TypeError::Shadow(n.clone()));
        }
    }
    let ux = ctx.bind(x.clone(), ty.clone(), Mult::Lin);
    let uy = ctx.bind(y.clone(), nf_neg(ty), Mult::Lin);
    Ok((ctx, [ux, uy]))
}

fn threaded(delta: &KindContext, g: &TypeContext, p: &Proc) -> TResult<TypeContext> {
    match p {
        Proc::Thread(e) => Ok(check(delta, g, e, &Type::Unit)?.0),
        Proc::Par(a, b) => {
            let g1 = threaded(delta, g, a)?;
            threaded(delta, &g1, b)
        }
        Proc::New { body, .. } => {
            let (ctx, uids) = bind_endpoints(delta, g, p)?;
            let mut left = threaded(delta, &ctx, body)?;
            release(&mut left, &uids)?;
            Ok(left)
        }
    }
}

// Every linear entry handed to `p` must be used by it.
fn exhaustive(delta: &KindContext, g: &TypeContext, p: &Proc) -> TResult<()> {
    let fail = |g: &TypeContext| match g.linear().next() {
        Some(e) => Err(TypeError::Unconsumed(e.name.clone())),
        None => Ok(()),
    };
    match p {
        Proc::Thread(e) => fail(&check(delta, g, e, &Type::Unit)?.0),
        Proc::New { .. } => exhaustive(delta, &bind_endpoints(delta, g, p)?.0, inner(p)),
        Proc::Par(a, b) => {
            let lin: Vec<usize> =
                (0..g.entries.len()).filter(|&i| g.entries[i].mult == Mult::Lin).collect();
            assert!(lin.len() < 20, "exhaustive split over {} linear entries", lin.len());
            let mut last = None;
            for mask in 0u32..(1 << lin.len()) {
                let side = |left: bool| {
                    let mut c = g.clone();
                    c.entries = g
                        .entries
                        .iter()
                        .enumerate()
                        .filter(|(i, e)| {
                            e.mult == Mult::Un || {
                                let k = lin.iter().position(|j| j == i).unwrap();
                                (mask >> k & 1 == 1) == left
                            }
                        })
                        .map(|(_, e)| e.clone())
                        .collect();
                    c
                };
                match exhaustive(delta, &side(true), a).and_then(|_| exhaustive(delta, &side(false), b)) {
                    Ok(()) => return Ok(()),
                    Err(e) => last = Some(e),
                }
            }
            Err(last.expect("at least one split"))
        }
    }
}

fn inner(p: &Proc) -> &Proc {
    match p {
        Proc::New { body, .. } => body,
        _ => p,
    }
}
