use std::fmt;

use crate::ast::{Name, Type};
use crate::normalize::alpha_equal;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mult {
    Lin,
    Un,
}

#[derive(Clone, Debug)]
pub struct Entry {
    pub name: Name,
    pub ty: Type,
    pub mult: Mult,
    /// Identifies the binding occurrence, so a scope releases its own entry
    /// even when the name is shadowed.
    pub uid: u32,
}

/// Ordered typing context. Linear entries disappear when used; unrestricted
/// ones stay.
#[derive(Clone, Debug, Default)]
pub struct TypeContext {
    pub entries: Vec<Entry>,
    next: u32,
}

impl TypeContext {
    pub fn new() -> TypeContext {
        TypeContext::default()
    }

    pub fn lookup(&self, x: &str) -> Option<(usize, &Entry)> {
        self.entries.iter().enumerate().rev().find(|(_, e)| &*e.name == x)
    }

    pub fn get(&self, x: &str) -> Option<&Type> {
        self.lookup(x).map(|(_, e)| &e.ty)
    }

    pub fn bind(&mut self, name: Name, ty: Type, mult: Mult) -> u32 {
        let uid = self.next;
        self.next += 1;
        self.entries.push(Entry { name, ty, mult, uid });
        uid
    }

    /// Removes the entry created by the `bind` call that returned `uid`.
    pub fn release(&mut self, uid: u32) -> Option<Entry> {
        let i = self.entries.iter().position(|e| e.uid == uid)?;
        Some(self.entries.remove(i))
    }

    pub fn with_lin(mut self, name: Name, ty: Type) -> TypeContext {
        self.bind(name, ty, Mult::Lin);
        self
    }

    pub fn remove_at(&mut self, i: usize) -> Entry {
        self.entries.remove(i)
    }

    pub fn remove(&mut self, x: &str) -> Option<Entry> {
        let i = self.lookup(x)?.0;
        Some(self.entries.remove(i))
    }

    pub fn has_linear(&self, x: &str) -> bool {
        self.entries.iter().any(|e| e.mult == Mult::Lin && &*e.name == x)
    }

    pub fn linear(&self) -> impl Iterator<Item = &Entry> {
        self.entries.iter().filter(|e| e.mult == Mult::Lin)
    }

    pub fn is_unrestricted(&self) -> bool {
        self.linear().next().is_none()
    }

    /// Same names with alpha-equivalent types, in any order.
    pub fn alpha_eq(&self, other: &TypeContext) -> bool {
        self.entries.len() == other.entries.len()
            && self.entries.iter().all(|e| {
                other
                    .entries
                    .iter()
                    .any(|o| o.name == e.name && o.mult == e.mult && alpha_equal(&o.ty, &e.ty))
            })
    }
}

impl fmt::Display for TypeContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lin: Vec<String> = self.linear().map(|e| format!("{}: {}", e.name, e.ty)).collect();
        write!(f, "{{{}}}", lin.join(", "))
    }
}
