//! SQL and DDL normalization.
//!
//! [`normalize_sql`] parses a query and prints it back in canonical form:
//! lowercase keywords and identifiers, single spaces between tokens, no space
//! before `,` or `;`, no padding inside parentheses, single-quoted string
//! literals, and a terminating `;`. [`template_key`] additionally replaces
//! every string and numeric literal with `value`, so queries that differ only
//! in their constants share a key.

pub mod ast;
pub mod ddl;
pub mod lexer;
pub mod parser;
pub mod printer;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::DatabaseSchema;
pub use ddl::normalize_ddl;
use printer::PrintOptions;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SqlError {
    #[error("parse error at byte {pos}: {message}")]
    Parse { pos: usize, message: String },
    #[error("expected a single statement, found another at byte {pos}")]
    MultipleStatements { pos: usize },
    #[error("empty statement")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NormalizedSql(pub String);

impl NormalizedSql {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NormalizedSql {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TemplateKey(pub String);

impl TemplateKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TemplateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Parses one statement. With a schema, double-quoted tokens naming a known
/// table or column are identifiers; otherwise they are string literals.
pub fn parse(sql: &str, schema: Option<&DatabaseSchema>) -> Result<ast::Query, SqlError> {
    match schema {
        Some(s) => {
            let resolve = |name: &str| s.resolves_identifier(name);
            parser::parse_statement(sql, Some(&resolve))
        }
        None => parser::parse_statement(sql, None),
    }
}

pub fn normalize_sql(sql: &str) -> Result<NormalizedSql, SqlError> {
    normalize_sql_with_schema(sql, None)
}

pub fn normalize_sql_with_schema(sql: &str, schema: Option<&DatabaseSchema>) -> Result<NormalizedSql, SqlError> {
    let query = parse(sql, schema)?;
    Ok(NormalizedSql(printer::print_statement(&query, PrintOptions::default())))
}

pub fn template_key(sql: &str) -> Result<TemplateKey, SqlError> {
    template_key_with_schema(sql, None)
}

pub fn template_key_with_schema(sql: &str, schema: Option<&DatabaseSchema>) -> Result<TemplateKey, SqlError> {
    let query = parse(sql, schema)?;
    Ok(TemplateKey(printer::print_statement(
        &query,
        PrintOptions { mask_literals: true },
    )))
}

/// True when the outermost query of `sql` has an `ORDER BY` clause.
pub fn has_top_level_order_by(sql: &str) -> Result<bool, SqlError> {
    Ok(parse(sql, None)?.has_top_level_order_by())
}
