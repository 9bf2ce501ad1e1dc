//! Prompt construction and evaluation for in-context text-to-SQL.

pub mod catalog;
pub mod eval;
pub mod gateway;
pub mod prompt;
pub mod runner;
pub mod sampler;
pub mod sql;
