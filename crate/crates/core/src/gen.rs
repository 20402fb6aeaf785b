//! Random well-kinded types for property tests and benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::ast::{name, Kind, Name, Type};
use crate::conversion::neighbours;
use crate::kindcheck::{synth_kind, KindContext};

pub mod syntax;

/// Generates types that kind-check under `delta` (its free variables and
/// protocols are drawn on).
pub struct TypeGen<'a> {
    pub delta: &'a KindContext,
    bound: Vec<(Name, Kind)>,
    next: usize,
}

impl<'a> TypeGen<'a> {
    pub fn new(delta: &'a KindContext) -> TypeGen<'a> {
        TypeGen { delta, bound: Vec::new(), next: 0 }
    }

    /// A type of kind at most `kind` with at most `size` nodes.
    pub fn ty<R: Rng>(&mut self, rng: &mut R, kind: Kind, size: usize) -> Type {
        debug_assert!(size >= 1);
        let mut opts: Vec<u8> = vec![0];
        if size >= 2 {
            opts.extend([1, 2]);
        }
        if kind >= Kind::T {
            opts.push(3);
            if size >= 3 {
                opts.extend([4, 5]);
            }
            if size >= 2 {
                opts.push(6);
            }
        }
        if kind == Kind::P && size >= 2 {
            opts.extend([7, 7]);
        }
        if kind == Kind::P && !self.delta.decls.protocols.is_empty() {
            opts.push(8);
        }
        if size >= 3 {
            opts.extend([9, 9]);
        }
        match *opts.choose(rng).unwrap() {
            0 => self.session_leaf(rng),
            1 => Type::dual(self.ty(rng, Kind::S, size - 1)),
            2 => self.session_leaf(rng),
            3 => self.value_leaf(rng),
            4 => {
                let (a, b) = self.split(rng, size - 1);
                Type::fun(self.ty(rng, Kind::T, a), self.ty(rng, Kind::T, b))
            }
            5 => {
                let (a, b) = self.split(rng, size - 1);
                Type::pair(self.ty(rng, Kind::T, a), self.ty(rng, Kind::T, b))
            }
            6 => {
                let k = *[Kind::S, Kind::T].choose(rng).unwrap();
                let v = name(&format!("v{}", self.next));
                self.next += 1;
                self.bound.push((v.clone(), k));
                let body = self.ty(rng, Kind::T, size - 1);
                self.bound.pop();
                Type::Forall(v, k, Box::new(body))
            }
            7 => Type::neg(self.ty(rng, Kind::P, size - 1)),
            8 => self.protocol(rng, size),
            _ => {
                let (a, b) = self.split(rng, size - 1);
                let payload = self.ty(rng, Kind::P, a);
                let cont = self.ty(rng, Kind::S, b);
                if rng.gen() {
                    Type::input(payload, cont)
                } else {
                    Type::output(payload, cont)
                }
            }
        }
    }

    fn split<R: Rng>(&mut self, rng: &mut R, n: usize) -> (usize, usize) {
        let a = rng.gen_range(1..n);
        (a, n - a)
    }

    fn vars(&self, k: Kind) -> Vec<Name> {
        let free = self.delta.vars.iter().filter(|(v, _)| !self.bound.iter().any(|(b, _)| b == v));
        free.chain(self.bound.iter()).filter(|(_, vk)| vk.is_sub(k)).map(|(v, _)| v.clone()).collect()
    }

    fn session_leaf<R: Rng>(&mut self, rng: &mut R) -> Type {
        let vars = self.vars(Kind::S);
        match rng.gen_range(0..4) {
            0 => Type::EndWait,
            1 => Type::EndTerm,
            _ if !vars.is_empty() => Type::Var(vars.choose(rng).unwrap().clone()),
            _ => Type::EndTerm,
        }
    }

    fn value_leaf<R: Rng>(&mut self, rng: &mut R) -> Type {
        let vars = self.vars(Kind::T);
        match rng.gen_range(0..4) {
            0 => Type::Unit,
            1 => Type::int(),
            _ if !vars.is_empty() => Type::Var(vars.choose(rng).unwrap().clone()),
            _ => Type::base("String"),
        }
    }

    fn protocol<R: Rng>(&mut self, rng: &mut R, size: usize) -> Type {
        let mut protos: Vec<_> = self.delta.decls.protocols.values().collect();
        protos.sort_by(|a, b| a.name.cmp(&b.name));
        let fits: Vec<_> = protos.into_iter().filter(|p| p.params.len() < size).collect();
        let Some(p) = fits.choose(rng) else { return self.value_leaf(rng) };
        let k = p.param_kind();
        let mut left = size - 1;
        let mut args = Vec::new();
        for i in 0..p.params.len() {
            let rest = p.params.len() - i - 1;
            let n = if rest == 0 { left } else { rng.gen_range(1..=left - rest) };
            left -= n;
            args.push(self.ty(rng, k, n));
        }
        Type::Proto(p.name.clone(), args)
    }
}

/// A random rewrite walk from `t`: a type convertible to it, usually of a
/// different shape. Steps may grow the type by up to `slack` nodes.
pub fn convertible<R: Rng>(rng: &mut R, delta: &KindContext, t: &Type, steps: usize, slack: usize) -> Type {
    let goal = synth_kind(delta, t).expect("walk from a well-kinded type");
    let cap = t.size() + slack;
    let mut cur = t.clone();
    for _ in 0..steps {
        let next = neighbours(delta, &cur, goal, cap);
        match next.choose(rng) {
            Some(n) => cur = n.clone(),
            None => break,
        }
    }
    cur
}

/// A pair of types of the same kind with at most `max` nodes each. About half
/// the pairs are convertible by construction; the rest are independent or
/// differ by one leaf.
pub fn pair<R: Rng>(rng: &mut R, delta: &KindContext, max: usize) -> (Type, Type) {
    let kind = *[Kind::S, Kind::S, Kind::T, Kind::P].choose(rng).unwrap();
    let mut g = TypeGen::new(delta);
    let n = rng.gen_range(1..=max);
    let t = g.ty(rng, kind, n);
    let steps = rng.gen_range(1..8);
    let u = match rng.gen_range(0..4) {
        0 | 1 => convertible(rng, delta, &t, steps, max - n),
        2 => {
            let walked = convertible(rng, delta, &t, steps, max - n);
            flip_leaf(rng, &walked)
        }
        _ => {
            let m = rng.gen_range(1..=max);
            g.ty(rng, kind, m)
        }
    };
    (t, u)
}

/// Swaps one `End?`/`End!` or `?`/`!`, which usually breaks equivalence.
fn flip_leaf<R: Rng>(rng: &mut R, t: &Type) -> Type {
    let count = count_flippable(t);
    if count == 0 {
        return t.clone();
    }
    let mut k = rng.gen_range(0..count);
    flip_nth(t, &mut k)
}

fn count_flippable(t: &Type) -> usize {
    let here = usize::from(matches!(t, Type::EndWait | Type::EndTerm | Type::In(..) | Type::Out(..)));
    here + match t {
        Type::Fun(a, b) | Type::Pair(a, b) | Type::In(a, b) | Type::Out(a, b) => {
            count_flippable(a) + count_flippable(b)
        }
        Type::Forall(_, _, b) | Type::Dual(b) | Type::Neg(b) => count_flippable(b),
        Type::Proto(_, args) => args.iter().map(count_flippable).sum(),
        _ => 0,
    }
}

fn flip_nth(t: &Type, k: &mut usize) -> Type {
    let hit = matches!(t, Type::EndWait | Type::EndTerm | Type::In(..) | Type::Out(..));
    if hit {
        if *k == 0 {
            *k = usize::MAX;
            return match t {
                Type::EndWait => Type::EndTerm,
                Type::EndTerm => Type::EndWait,
                Type::In(a, b) => Type::Out(a.clone(), b.clone()),
                Type::Out(a, b) => Type::In(a.clone(), b.clone()),
                _ => unreachable!(),
            };
        }
        *k = k.wrapping_sub(1);
    }
    let mut go = |x: &Type| if *k == usize::MAX { x.clone() } else { flip_nth(x, k) };
    match t {
        Type::Fun(a, b) => Type::fun(go(a), go(b)),
        Type::Pair(a, b) => Type::pair(go(a), go(b)),
        Type::In(a, b) => Type::input(go(a), go(b)),
        Type::Out(a, b) => Type::output(go(a), go(b)),
        Type::Forall(v, kd, b) => Type::Forall(v.clone(), *kd, Box::new(go(b))),
        Type::Dual(b) => Type::dual(go(b)),
        Type::Neg(b) => Type::neg(go(b)),
        Type::Proto(n, args) => Type::Proto(n.clone(), args.iter().map(go).collect()),
        _ => t.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kindcheck::check_kind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_types_are_well_kinded_and_small() {
        let delta = KindContext::default().with(name("a"), Kind::S).with(name("x"), Kind::T);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            let k = *[Kind::S, Kind::T, Kind::P].choose(&mut rng).unwrap();
            let n = rng.gen_range(1..=12);
            let t = TypeGen::new(&delta).ty(&mut rng, k, n);
            assert!(t.size() <= n, "{t} exceeds {n}");
            check_kind(&delta, &t, k).unwrap_or_else(|e| panic!("{t}: {e}"));
        }
    }

    #[test]
    fn pairs_share_a_kind() {
        let delta = KindContext::default().with(name("a"), Kind::S);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let (t, u) = pair(&mut rng, &delta, 12);
            assert!(t.size() <= 12 && u.size() <= 12);
            synth_kind(&delta, &t).unwrap();
            synth_kind(&delta, &u).unwrap();
        }
    }
}
