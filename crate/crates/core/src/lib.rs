//! Executable semantics of an OSEK/VDX kernel with an explicit-state LTL
//! model checker on top.
//!
//! Pipeline: [`oil`] and [`task_lang`] parse a configuration and task bodies,
//! [`kernel::Kernel`] turns them into a transition system, [`explorer`]
//! enumerates its states, [`ltl`] checks temporal properties over the
//! resulting graph and [`conformance`] compares verdicts with test results.

pub mod conformance;
pub mod explorer;
pub mod kernel;
mod lexer;
pub mod ltl;
pub mod oil;
pub mod task_lang;
pub mod timing;

pub use lexer::{LexError, Pos};
