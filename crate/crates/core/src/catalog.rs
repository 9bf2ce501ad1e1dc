//! Schema introspection and content sampling for SQLite database files.
//!
//! A [`DatabaseSchema`] is read from `sqlite_master` and the table/foreign-key
//! pragmas. Content is sampled row-wise ([`sample_rows`]) and column-wise
//! ([`sample_distinct_values`]), always in physical row order so the same file
//! produces the same prompt text on every call.

use std::cmp::Ordering;
use std::fmt;
use std::path::{Path, PathBuf};

use rusqlite::types::ValueRef;
use rusqlite::{Connection, OpenFlags};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("database file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("not a database: {path}: {message}")]
    NotADatabase { path: PathBuf, message: String },
    #[error("unknown table: {0}")]
    UnknownTable(String),
    #[error("unknown column {column} in table {table}")]
    UnknownColumn { table: String, column: String },
    #[error("sample size must be at least 1")]
    InvalidSampleSize,
    #[error(transparent)]
    Sqlite(#[from] rusqlite::Error),
}

pub type Result<T, E = CatalogError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnDef {
    pub name: String,
    /// Type as written in the DDL, e.g. `int`, `text`, `varchar(20)`.
    pub declared_type: String,
    pub ordinal: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForeignKeyDef {
    pub from_table: String,
    pub from_columns: Vec<String>,
    pub to_table: String,
    pub to_columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableSchema {
    pub name: String,
    pub columns: Vec<ColumnDef>,
    pub primary_key: Vec<String>,
    pub foreign_keys: Vec<ForeignKeyDef>,
    /// The `CREATE TABLE` text as stored in the catalog, without a trailing `;`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ddl: Option<String>,
}

impl TableSchema {
    pub fn column(&self, name: &str) -> Option<&ColumnDef> {
        self.columns
            .iter()
            .find(|c| c.name.eq_ignore_ascii_case(name))
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatabaseSchema {
    pub db_id: String,
    pub tables: Vec<TableSchema>,
}

impl DatabaseSchema {
    pub fn table(&self, name: &str) -> Option<&TableSchema> {
        self.tables
            .iter()
            .find(|t| t.name.eq_ignore_ascii_case(name))
    }

    /// True when `name` names a table or a column of any table (ASCII case-insensitive).
    pub fn resolves_identifier(&self, name: &str) -> bool {
        self.tables.iter().any(|t| {
            t.name.eq_ignore_ascii_case(name) || t.columns.iter().any(|c| c.name.eq_ignore_ascii_case(name))
        })
    }
}

/// A single database cell. Blobs are read as lossy UTF-8 text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "lowercase")]
pub enum CellValue {
    Integer(i64),
    Real(f64),
    Text(String),
    Null,
}

impl CellValue {
    pub(crate) fn from_ref(value: ValueRef<'_>) -> Self {
        match value {
            ValueRef::Null => CellValue::Null,
            ValueRef::Integer(i) => CellValue::Integer(i),
            ValueRef::Real(f) => CellValue::Real(f),
            ValueRef::Text(t) => CellValue::Text(String::from_utf8_lossy(t).into_owned()),
            ValueRef::Blob(b) => CellValue::Text(String::from_utf8_lossy(b).into_owned()),
        }
    }

    fn type_rank(&self) -> u8 {
        match self {
            CellValue::Null => 0,
            CellValue::Integer(_) => 1,
            CellValue::Real(_) => 2,
            CellValue::Text(_) => 3,
        }
    }

    /// Total order: by type (null < integer < real < text), then by value.
    pub fn total_cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (CellValue::Integer(a), CellValue::Integer(b)) => a.cmp(b),
            (CellValue::Real(a), CellValue::Real(b)) => a.total_cmp(b),
            (CellValue::Text(a), CellValue::Text(b)) => a.cmp(b),
            _ => self.type_rank().cmp(&other.type_rank()),
        }
    }

    /// Typed equality where reals agree within `rel_tol` relative tolerance.
    pub fn approx_eq(&self, other: &Self, rel_tol: f64) -> bool {
        match (self, other) {
            (CellValue::Real(a), CellValue::Real(b)) => {
                a == b || (a - b).abs() <= rel_tol * a.abs().max(b.abs())
            }
            _ => self == other,
        }
    }

    /// Rendering used inside `INSERT INTO` and column-wise content blocks.
    pub fn render_quoted(&self) -> String {
        match self {
            CellValue::Text(t) => format!("\"{}\"", t.replace('"', "\"\"")),
            other => other.to_string(),
        }
    }
}

/// Plain rendering: text unquoted, reals always with a decimal point, `NULL` for null.
impl fmt::Display for CellValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellValue::Integer(i) => write!(f, "{i}"),
            // Debug formatting is the shortest round-trip form and keeps ".0".
            CellValue::Real(r) => write!(f, "{r:?}"),
            CellValue::Text(t) => f.write_str(t),
            CellValue::Null => f.write_str("NULL"),
        }
    }
}

/// Sampled content of one table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSample {
    pub table: String,
    pub rows: Vec<Vec<CellValue>>,
    /// One list per column, in column order.
    pub distinct_values: Vec<Vec<CellValue>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContentSample {
    pub tables: Vec<TableSample>,
}

impl ContentSample {
    pub fn table(&self, name: &str) -> Option<&TableSample> {
        self.tables
            .iter()
            .find(|t| t.table.eq_ignore_ascii_case(name))
    }
}

/// Opens `db_file` read-only, distinguishing a missing file from a non-database file.
pub fn open_read_only(db_file: &Path) -> Result<Connection> {
    if !db_file.is_file() {
        return Err(CatalogError::FileNotFound(db_file.to_path_buf()));
    }
    let conn = Connection::open_with_flags(
        db_file,
        OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX,
    )
    .map_err(|e| not_a_database(db_file, e))?;
    // Opening is lazy; touching the header surfaces SQLITE_NOTADB.
    conn.query_row("SELECT count(*) FROM sqlite_master", [], |r| r.get::<_, i64>(0))
        .map_err(|e| not_a_database(db_file, e))?;
    Ok(conn)
}

fn not_a_database(path: &Path, err: rusqlite::Error) -> CatalogError {
    CatalogError::NotADatabase {
        path: path.to_path_buf(),
        message: err.to_string(),
    }
}

pub(crate) fn quote_ident(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

/// The `db_id` of a Spider-layout file is its stem: `<root>/<db_id>/<db_id>.sqlite`.
fn db_id_from_path(db_file: &Path) -> String {
    db_file
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn introspect_schema(db_file: &Path) -> Result<DatabaseSchema> {
    let conn = open_read_only(db_file)?;
    introspect_connection(&conn, &db_id_from_path(db_file))
}

pub fn introspect_connection(conn: &Connection, db_id: &str) -> Result<DatabaseSchema> {
    let mut stmt = conn.prepare(
        "SELECT name, sql FROM sqlite_master \
         WHERE type = 'table' AND name NOT LIKE 'sqlite\\_%' ESCAPE '\\' ORDER BY rowid",
    )?;
    let entries = stmt
        .query_map([], |r| Ok((r.get::<_, String>(0)?, r.get::<_, Option<String>>(1)?)))?
        .collect::<Result<Vec<_>, _>>()?;

    let mut tables = Vec::with_capacity(entries.len());
    for (name, ddl) in entries {
        let mut columns = Vec::new();
        let mut pk: Vec<(i64, String)> = Vec::new();
        let mut info = conn.prepare(&format!("PRAGMA table_info({})", quote_ident(&name)))?;
        let mut rows = info.query([])?;
        while let Some(row) = rows.next()? {
            let col: String = row.get(1)?;
            let ty: Option<String> = row.get(2)?;
            let pk_pos: i64 = row.get(5)?;
            if pk_pos > 0 {
                pk.push((pk_pos, col.clone()));
            }
            columns.push(ColumnDef {
                ordinal: columns.len(),
                name: col,
                declared_type: ty.unwrap_or_default(),
            });
        }
        pk.sort();
        tables.push(TableSchema {
            name,
            columns,
            primary_key: pk.into_iter().map(|(_, c)| c).collect(),
            foreign_keys: Vec::new(),
            ddl,
        });
    }

    // Foreign keys need every table loaded to resolve their targets.
    let mut resolved = Vec::with_capacity(tables.len());
    for table in &tables {
        resolved.push(read_foreign_keys(conn, table, &tables)?);
    }
    for (table, fks) in tables.iter_mut().zip(resolved) {
        table.foreign_keys = fks;
    }

    Ok(DatabaseSchema {
        db_id: db_id.to_string(),
        tables,
    })
}

fn read_foreign_keys(
    conn: &Connection,
    table: &TableSchema,
    all: &[TableSchema],
) -> Result<Vec<ForeignKeyDef>> {
    // (id, seq, target table, from, to)
    let mut stmt = conn.prepare(&format!(
        "PRAGMA foreign_key_list({})",
        quote_ident(&table.name)
    ))?;
    let raw = stmt
        .query_map([], |r| {
            Ok((
                r.get::<_, i64>(0)?,
                r.get::<_, i64>(1)?,
                r.get::<_, String>(2)?,
                r.get::<_, String>(3)?,
                r.get::<_, Option<String>>(4)?,
            ))
        })?
        .collect::<Result<Vec<_>, _>>()?;

    // SQLite numbers constraints in reverse declaration order.
    let mut ids: Vec<i64> = raw.iter().map(|r| r.0).collect();
    ids.sort_unstable();
    ids.dedup();
    ids.reverse();

    let mut fks = Vec::new();
    'constraint: for id in ids {
        let mut parts: Vec<_> = raw.iter().filter(|r| r.0 == id).collect();
        parts.sort_by_key(|r| r.1);
        let Some(target) = all.iter().find(|t| t.name.eq_ignore_ascii_case(&parts[0].2)) else {
            log::warn!("{}: foreign key references unknown table {}", table.name, parts[0].2);
            continue;
        };
        let mut from_columns = Vec::new();
        let mut to_columns = Vec::new();
        for (i, part) in parts.iter().enumerate() {
            let Some(from) = table.column(&part.3) else {
                log::warn!("{}: foreign key from unknown column {}", table.name, part.3);
                continue 'constraint;
            };
            // A missing target column list means the target's primary key.
            let to_name = match &part.4 {
                Some(to) => to.clone(),
                None => match target.primary_key.get(i) {
                    Some(pk) => pk.clone(),
                    None => continue 'constraint,
                },
            };
            let Some(to) = target.column(&to_name) else {
                log::warn!(
                    "{}: foreign key references unknown column {}.{}",
                    table.name,
                    target.name,
                    to_name
                );
                continue 'constraint;
            };
            from_columns.push(from.name.clone());
            // Keep the spelling used in the constraint when it matches case-insensitively.
            to_columns.push(if part.4.is_some() { to_name } else { to.name.clone() });
        }
        fks.push(ForeignKeyDef {
            from_table: table.name.clone(),
            from_columns,
            to_table: target.name.clone(),
            to_columns,
        });
    }
    Ok(fks)
}

fn resolve_table<'a>(schema: &'a DatabaseSchema, table: &str) -> Result<&'a TableSchema> {
    schema
        .table(table)
        .ok_or_else(|| CatalogError::UnknownTable(table.to_string()))
}

fn has_rowid(conn: &Connection, table: &str) -> bool {
    conn.prepare(&format!("SELECT rowid FROM {} LIMIT 0", quote_ident(table)))
        .is_ok()
}

fn scan_sql(conn: &Connection, table: &str, projection: &str) -> String {
    let order = if has_rowid(conn, table) { " ORDER BY rowid" } else { "" };
    format!("SELECT {projection} FROM {}{order}", quote_ident(table))
}

/// First `r` rows of `table` in physical (rowid) order.
pub fn sample_rows(db_file: &Path, table: &str, r: usize) -> Result<Vec<Vec<CellValue>>> {
    let conn = open_read_only(db_file)?;
    let schema = introspect_connection(&conn, &db_id_from_path(db_file))?;
    let table = resolve_table(&schema, table)?;
    sample_rows_conn(&conn, table, r)
}

pub fn sample_rows_conn(conn: &Connection, table: &TableSchema, r: usize) -> Result<Vec<Vec<CellValue>>> {
    if r == 0 {
        return Err(CatalogError::InvalidSampleSize);
    }
    let projection = table
        .columns
        .iter()
        .map(|c| quote_ident(&c.name))
        .collect::<Vec<_>>()
        .join(", ");
    let sql = format!("{} LIMIT {r}", scan_sql(conn, &table.name, &projection));
    let mut stmt = conn.prepare(&sql)?;
    let width = table.columns.len();
    let rows = stmt
        .query_map([], |row| {
            (0..width)
                .map(|i| row.get_ref(i).map(CellValue::from_ref))
                .collect::<Result<Vec<_>, _>>()
        })?
        .collect::<Result<Vec<_>, _>>()?;
    Ok(rows)
}

/// Up to `r` distinct values of `column`, ordered by first occurrence in physical row order.
pub fn sample_distinct_values(
    db_file: &Path,
    table: &str,
    column: &str,
    r: usize,
) -> Result<Vec<CellValue>> {
    let conn = open_read_only(db_file)?;
    let schema = introspect_connection(&conn, &db_id_from_path(db_file))?;
    let table = resolve_table(&schema, table)?;
    let column = table
        .column(column)
        .ok_or_else(|| CatalogError::UnknownColumn {
            table: table.name.clone(),
            column: column.to_string(),
        })?;
    sample_distinct_conn(&conn, table, &column.name, r)
}

pub fn sample_distinct_conn(
    conn: &Connection,
    table: &TableSchema,
    column: &str,
    r: usize,
) -> Result<Vec<CellValue>> {
    if r == 0 {
        return Err(CatalogError::InvalidSampleSize);
    }
    let sql = scan_sql(conn, &table.name, &quote_ident(column));
    let mut stmt = conn.prepare(&sql)?;
    let mut rows = stmt.query([])?;
    let mut seen: Vec<CellValue> = Vec::with_capacity(r);
    while let Some(row) = rows.next()? {
        let value = CellValue::from_ref(row.get_ref(0)?);
        if !seen.contains(&value) {
            seen.push(value);
            if seen.len() == r {
                break;
            }
        }
    }
    Ok(seen)
}

/// Samples rows and distinct values for every table of `schema`.
pub fn sample_content(conn: &Connection, schema: &DatabaseSchema, r: usize) -> Result<ContentSample> {
    let mut tables = Vec::with_capacity(schema.tables.len());
    for table in &schema.tables {
        let rows = sample_rows_conn(conn, table, r)?;
        let distinct_values = table
            .columns
            .iter()
            .map(|c| sample_distinct_conn(conn, table, &c.name, r))
            .collect::<Result<Vec<_>>>()?;
        tables.push(TableSample {
            table: table.name.clone(),
            rows,
            distinct_values,
        });
    }
    Ok(ContentSample { tables })
}

/// A schema together with its sampled content; everything a database prompt needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatabaseContext {
    pub schema: DatabaseSchema,
    pub content: ContentSample,
}

impl DatabaseContext {
    pub fn load(db_file: &Path, r: usize) -> Result<Self> {
        let conn = open_read_only(db_file)?;
        let schema = introspect_connection(&conn, &db_id_from_path(db_file))?;
        let content = sample_content(&conn, &schema, r)?;
        Ok(Self { schema, content })
    }
}
