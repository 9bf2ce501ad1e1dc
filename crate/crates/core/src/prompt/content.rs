//! Content serializations: `INSERT INTO` rows, `SELECT *` rows, and per-column distinct values.

use crate::catalog::{CellValue, TableSample, TableSchema};

use super::{ContentFormat, NormalizationMode, PromptError, Result};

/// Separator between cells in `SelectRow` header and data lines.
pub const COLUMN_SEPARATOR: &str = "    ";

fn check_shape(table: &TableSchema, sample: &TableSample) -> Result<()> {
    let mismatch = |message: String| PromptError::SampleMismatch {
        table: table.name.clone(),
        message,
    };
    if !sample.table.eq_ignore_ascii_case(&table.name) {
        return Err(mismatch(format!("sample belongs to table {}", sample.table)));
    }
    let width = table.columns.len();
    if let Some(row) = sample.rows.iter().find(|r| r.len() != width) {
        return Err(mismatch(format!("row has {} cells, table has {width} columns", row.len())));
    }
    if sample.distinct_values.len() != width {
        return Err(mismatch(format!(
            "{} distinct-value lists for {width} columns",
            sample.distinct_values.len()
        )));
    }
    Ok(())
}

fn join_cells<'a>(cells: impl IntoIterator<Item = &'a CellValue>, render: fn(&CellValue) -> String, sep: &str) -> String {
    cells.into_iter().map(render).collect::<Vec<_>>().join(sep)
}

/// Renders the sampled content of one table. Cell values keep their case in both modes.
///
/// Returns an empty string for `InsertRow` on a table with no rows.
pub fn serialize_content(
    table: &TableSchema,
    sample: &TableSample,
    format: ContentFormat,
    mode: NormalizationMode,
) -> Result<String> {
    check_shape(table, sample)?;
    let name = mode.apply(&table.name);
    let cols: Vec<String> = table.column_names().map(|c| mode.apply(c)).collect();
    let text = match format {
        ContentFormat::NoContent => {
            return Err(PromptError::InvalidSpec("no content format to serialize".into()));
        }
        ContentFormat::InsertRow(r) => {
            let head = format!(
                "{} {name} ({}) {} (",
                mode.apply("INSERT INTO"),
                cols.join(", "),
                mode.apply("VALUES")
            );
            sample
                .rows
                .iter()
                .take(r)
                .map(|row| format!("{head}{});", join_cells(row, CellValue::render_quoted, ", ")))
                .collect::<Vec<_>>()
                .join("\n")
        }
        ContentFormat::SelectRow(r) => {
            let mut lines = vec![
                "/*".to_string(),
                format!("{r} example rows:"),
                format!("{} {name} {} {r};", mode.apply("SELECT * FROM"), mode.apply("LIMIT")),
                cols.join(COLUMN_SEPARATOR),
            ];
            for row in sample.rows.iter().take(r) {
                lines.push(join_cells(row, |c| c.to_string(), COLUMN_SEPARATOR));
            }
            lines.push("*/".into());
            lines.join("\n")
        }
        ContentFormat::SelectCol(r) => {
            let mut lines = vec![
                "/*".to_string(),
                format!(
                    "{} {name} {} {r} {}",
                    mode.apply("Columns in"),
                    mode.apply("and"),
                    mode.apply("distinct examples in each column:")
                ),
            ];
            for (col, values) in cols.iter().zip(&sample.distinct_values) {
                let values = join_cells(values.iter().take(r), CellValue::render_quoted, ", ");
                lines.push(format!("{col}: {values}").trim_end().to_string());
            }
            lines.push("*/".into());
            lines.join("\n")
        }
    };
    Ok(text)
}
