//! Turning a completion into a predicted SQL statement.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StitchedSql {
    pub sql: String,
    /// The completion contributed nothing after truncation.
    pub degenerate: bool,
}

/// Prefixes the prompt's cue to the completion, cuts at the earliest stop
/// sequence, trims trailing whitespace and terminates with `;`.
pub fn stitch_sql(cue: &str, completion: &str, stop_sequences: &[String]) -> StitchedSql {
    let cut = stop_sequences
        .iter()
        .filter(|s| !s.is_empty())
        .filter_map(|s| completion.find(s.as_str()))
        .min()
        .unwrap_or(completion.len());
    let body = &completion[..cut];
    let degenerate = body.trim().is_empty();
    let mut sql = String::from(cue);
    if body.starts_with(|c: char| c.is_alphanumeric() || c == '_') {
        sql.push(' ');
    }
    sql.push_str(body);
    let mut sql = sql.trim_end().to_string();
    if !sql.ends_with(';') {
        sql.push(';');
    }
    StitchedSql { sql, degenerate }
}
