//! Execution accuracy and paired significance testing.
//!
//! Each statement runs on its own read-only connection with a wall-clock
//! deadline enforced through the SQLite progress handler. Results compare as
//! ordered sequences when the gold query has a top-level `ORDER BY` and as
//! multisets otherwise.

mod mcnemar;

use std::cmp::Ordering;
use std::path::Path;
use std::time::{Duration, Instant};

use rusqlite::ffi::ErrorCode;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{open_read_only, CellValue};
use crate::sql::lexer::{tokenize, TokenKind};
use crate::sql::parser::parse_statement;

pub use mcnemar::{mcnemar_from_counts, mcnemar_test, McNemarResult, EXACT_LIMIT};

pub const DEFAULT_TIMEOUT_MS: u64 = 30_000;
/// Relative tolerance for comparing real-valued cells.
pub const REAL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("gold query of {example_id} failed: {message}")]
    GoldError { example_id: String, message: String },
    #[error("outcome lists are misaligned: {0}")]
    MisalignedOutcomes(String),
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub rows: Vec<Vec<CellValue>>,
    pub column_count: usize,
    pub error: Option<String>,
    pub timed_out: bool,
    pub elapsed_ms: u64,
}

impl ExecutionResult {
    fn failed(message: String, timed_out: bool, started: Instant) -> Self {
        Self {
            rows: Vec::new(),
            column_count: 0,
            error: Some(message),
            timed_out,
            elapsed_ms: started.elapsed().as_millis() as u64,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Runs one read-only statement. Failures are reported in the result, never raised.
pub fn execute_sql(db_file: &Path, sql: &str, timeout_ms: u64) -> ExecutionResult {
    let started = Instant::now();
    let conn = match open_read_only(db_file) {
        Ok(c) => c,
        Err(e) => return ExecutionResult::failed(e.to_string(), false, started),
    };
    let deadline = started + Duration::from_millis(timeout_ms.max(1));
    conn.progress_handler(1_000, Some(move || Instant::now() >= deadline));

    let is_interrupt = |e: &rusqlite::Error| matches!(e.sqlite_error_code(), Some(ErrorCode::OperationInterrupted));
    let fail = |e: rusqlite::Error| {
        let timed_out = is_interrupt(&e);
        let message = if timed_out {
            format!("timed out after {timeout_ms} ms")
        } else {
            e.to_string()
        };
        ExecutionResult::failed(message, timed_out, started)
    };

    let mut stmt = match conn.prepare(sql) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    if !stmt.readonly() {
        return ExecutionResult::failed("only read-only statements may run".into(), false, started);
    }
    let column_count = stmt.column_count();
    let mut rows = Vec::new();
    let mut cursor = match stmt.query([]) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    loop {
        match cursor.next() {
            Ok(Some(row)) => {
                let mut cells = Vec::with_capacity(column_count);
                for i in 0..column_count {
                    match row.get_ref(i) {
                        Ok(v) => cells.push(CellValue::from_ref(v)),
                        Err(e) => return fail(e),
                    }
                }
                rows.push(cells);
            }
            Ok(None) => break,
            Err(e) => return fail(e),
        }
    }
    ExecutionResult {
        rows,
        column_count,
        error: None,
        timed_out: false,
        elapsed_ms: started.elapsed().as_millis() as u64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    Exact,
    Mismatch,
    PredError,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub example_id: String,
    #[serde(rename = "match")]
    pub matched: bool,
    pub reason: Reason,
}

impl EvalOutcome {
    pub fn new(example_id: impl Into<String>, reason: Reason) -> Self {
        Self {
            example_id: example_id.into(),
            matched: reason == Reason::Exact,
            reason,
        }
    }
}

/// True when the outermost statement of `sql` carries an `ORDER BY`. Falls
/// back to a token scan at parenthesis depth zero when the parser rejects the text.
pub fn is_order_sensitive(sql: &str) -> bool {
    if let Ok(q) = parse_statement(sql, None) {
        return q.has_top_level_order_by();
    }
    let Ok(tokens) = tokenize(sql) else {
        return false;
    };
    let mut depth = 0i32;
    tokens.windows(2).any(|w| {
        match w[0].kind {
            TokenKind::Symbol("(") => depth += 1,
            TokenKind::Symbol(")") => depth -= 1,
            _ => {}
        }
        depth == 0 && w[0].is_word("order") && w[1].is_word("by")
    })
}

fn cmp_rows(a: &[CellValue], b: &[CellValue]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}

fn rows_equal(a: &[Vec<CellValue>], b: &[Vec<CellValue>]) -> bool {
    a.len() == b.len()
        && a
            .iter()
            .zip(b)
            .all(|(x, y)| x.len() == y.len() && x.iter().zip(y).all(|(p, q)| p.approx_eq(q, REAL_TOLERANCE)))
}

/// Compares two successful results under ordered or multiset semantics.
pub fn results_match(pred: &ExecutionResult, gold: &ExecutionResult, ordered: bool) -> bool {
    if pred.column_count != gold.column_count {
        return false;
    }
    if ordered {
        return rows_equal(&pred.rows, &gold.rows);
    }
    let mut p = pred.rows.clone();
    let mut g = gold.rows.clone();
    p.sort_by(|a, b| cmp_rows(a, b));
    g.sort_by(|a, b| cmp_rows(a, b));
    rows_equal(&p, &g)
}

/// Scores one prediction. A failing gold query is a dataset defect and is raised.
pub fn execution_accuracy(
    example_id: &str,
    pred: &str,
    gold: &str,
    db_file: &Path,
    timeout_ms: u64,
) -> Result<EvalOutcome> {
    let gold_result = execute_sql(db_file, gold, timeout_ms);
    if let Some(message) = gold_result.error {
        return Err(EvalError::GoldError {
            example_id: example_id.to_string(),
            message,
        });
    }
    let pred_result = execute_sql(db_file, pred, timeout_ms);
    let reason = if pred_result.timed_out {
        Reason::Timeout
    } else if pred_result.error.is_some() {
        Reason::PredError
    } else if results_match(&pred_result, &gold_result, is_order_sensitive(gold)) {
        Reason::Exact
    } else {
        Reason::Mismatch
    };
    Ok(EvalOutcome::new(example_id, reason))
}
