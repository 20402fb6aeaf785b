//! Algebraic session types with protocol polarity.
//!
//! The pipeline is: [`parser`] → [`kindcheck`] → [`typecheck`] →
//! [`runtime`]. [`normalize`] decides type equivalence and [`conversion`]
//! is the declarative rewriting oracle it is tested against.

pub mod ast;
pub mod bench;
pub mod conversion;
pub mod diagnostics;
pub mod driver;
pub mod gen;
pub mod kindcheck;
pub mod normalize;
pub mod parser;
pub mod runtime;
pub mod typecheck;
