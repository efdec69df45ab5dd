//! Normative rule language: terms and states of affairs, a constraint
//! solver, the rule parser and the forward-chaining engine.

pub mod constraints;
pub mod kernel;
pub mod parser;
pub mod engine;
