//! Database prompts and full prompt assembly.
//!
//! A database prompt is the text form of one database: its schema in one of
//! four [`SchemaFormat`]s, optionally followed per table by sampled content in
//! a [`ContentFormat`]. [`assemble_prompt`] places database prompts, the task
//! instruction, demonstrations and the test question into the layout of the
//! chosen [`Setting`].

mod assemble;
mod content;
mod schema;
pub mod tokens;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sql::SqlError;

pub use assemble::{assemble_prompt, database_prompt, INSTRUCTION};
pub use content::{serialize_content, COLUMN_SEPARATOR};
pub use schema::serialize_schema;
pub use tokens::{count_tokens, tokenizer, TokenCounter};

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("schema has no tables")]
    EmptySchema,
    #[error("content sample does not match table {table}: {message}")]
    SampleMismatch { table: String, message: String },
    #[error("demonstrations do not fit the {setting} setting: {message}")]
    SettingMismatch { setting: Setting, message: String },
    #[error("invalid prompt spec: {0}")]
    InvalidSpec(String),
    #[error("no database context supplied for demonstration database {0}")]
    UnknownDemoDatabase(String),
    #[error("unknown tokenizer: {0}")]
    UnknownTokenizer(String),
    #[error("cannot normalize DDL of table {table}: {source}")]
    Ddl { table: String, source: SqlError },
    #[error("cannot normalize demonstration SQL {sql:?}: {source}")]
    DemoSql { sql: String, source: SqlError },
}

pub type Result<T, E = PromptError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SchemaFormat {
    TableColumns,
    ColumnsEq,
    ColumnsEqFk,
    CreateTable,
}

impl SchemaFormat {
    pub const ALL: [SchemaFormat; 4] = [
        SchemaFormat::TableColumns,
        SchemaFormat::ColumnsEq,
        SchemaFormat::ColumnsEqFk,
        SchemaFormat::CreateTable,
    ];

    pub fn carries_relationships(self) -> bool {
        matches!(self, SchemaFormat::ColumnsEqFk | SchemaFormat::CreateTable)
    }

    /// Row label used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            SchemaFormat::TableColumns => "Table(Columns)",
            SchemaFormat::ColumnsEq => "Columns=[]",
            SchemaFormat::ColumnsEqFk => "Columns=[]+ForeignKey",
            SchemaFormat::CreateTable => "CreateTable",
        }
    }
}

impl fmt::Display for SchemaFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemaFormat::TableColumns => "table_columns",
            SchemaFormat::ColumnsEq => "columns_eq",
            SchemaFormat::ColumnsEqFk => "columns_eq_fk",
            SchemaFormat::CreateTable => "create_table",
        })
    }
}

fn squash(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

impl FromStr for SchemaFormat {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self> {
        match squash(s).as_str() {
            "tablecolumns" => Ok(SchemaFormat::TableColumns),
            "columnseq" | "columns" => Ok(SchemaFormat::ColumnsEq),
            "columnseqfk" | "columnseqforeignkey" | "columnsforeignkey" | "columnsfk" => {
                Ok(SchemaFormat::ColumnsEqFk)
            }
            "createtable" => Ok(SchemaFormat::CreateTable),
            _ => Err(PromptError::InvalidSpec(format!("unknown schema format {s:?}"))),
        }
    }
}

impl TryFrom<String> for SchemaFormat {
    type Error = PromptError;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SchemaFormat> for String {
    fn from(f: SchemaFormat) -> String {
        f.to_string()
    }
}

pub const DEFAULT_ROWS: usize = 3;

/// Content shown after each table's schema; the payload is the number of rows or values R.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ContentFormat {
    NoContent,
    InsertRow(usize),
    SelectRow(usize),
    SelectCol(usize),
}

impl ContentFormat {
    pub fn rows(self) -> Option<usize> {
        match self {
            ContentFormat::NoContent => None,
            ContentFormat::InsertRow(r) | ContentFormat::SelectRow(r) | ContentFormat::SelectCol(r) => Some(r),
        }
    }

    pub fn label(self) -> String {
        match self {
            ContentFormat::NoContent => String::new(),
            ContentFormat::InsertRow(r) => format!("InsertRow {r}"),
            ContentFormat::SelectRow(r) => format!("SelectRow {r}"),
            ContentFormat::SelectCol(r) => format!("SelectCol {r}"),
        }
    }
}

impl fmt::Display for ContentFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContentFormat::NoContent => f.write_str("none"),
            ContentFormat::InsertRow(r) => write!(f, "insert_row:{r}"),
            ContentFormat::SelectRow(r) => write!(f, "select_row:{r}"),
            ContentFormat::SelectCol(r) => write!(f, "select_col:{r}"),
        }
    }
}

impl FromStr for ContentFormat {
    type Err = PromptError;

    /// Accepts `none`, `select_row`, `select_row:3`, `SelectRow 3` and similar.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || PromptError::InvalidSpec(format!("unknown content format {s:?}"));
        let trimmed = s.trim();
        let split = trimmed
            .rfind(|c: char| !c.is_ascii_digit())
            .map_or(0, |i| i + trimmed[i..].chars().next().map_or(1, char::len_utf8));
        let (name, digits) = trimmed.split_at(split);
        let r = if digits.is_empty() {
            DEFAULT_ROWS
        } else {
            digits.parse().map_err(|_| bad())?
        };
        if r == 0 {
            return Err(PromptError::InvalidSpec("content rows must be at least 1".into()));
        }
        match squash(name).as_str() {
            "" | "none" | "nocontent" if digits.is_empty() => Ok(ContentFormat::NoContent),
            "insertrow" => Ok(ContentFormat::InsertRow(r)),
            "selectrow" => Ok(ContentFormat::SelectRow(r)),
            "selectcol" => Ok(ContentFormat::SelectCol(r)),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for ContentFormat {
    type Error = PromptError;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ContentFormat> for String {
    fn from(f: ContentFormat) -> String {
        f.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizationMode {
    Unnormalized,
    Normalized,
}

impl NormalizationMode {
    pub fn is_normalized(self) -> bool {
        self == NormalizationMode::Normalized
    }

    /// The completion cue that ends every prompt.
    pub fn cue(self) -> &'static str {
        match self {
            NormalizationMode::Unnormalized => "SELECT",
            NormalizationMode::Normalized => "select",
        }
    }

    /// Applies the mode to schema text: lowercased when normalized.
    pub(crate) fn apply(self, s: &str) -> String {
        match self {
            NormalizationMode::Unnormalized => s.to_string(),
            NormalizationMode::Normalized => s.to_ascii_lowercase(),
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            NormalizationMode::Unnormalized => "U",
            NormalizationMode::Normalized => "N",
        }
    }
}

impl fmt::Display for NormalizationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormalizationMode::Unnormalized => "unnormalized",
            NormalizationMode::Normalized => "normalized",
        })
    }
}

impl FromStr for NormalizationMode {
    type Err = PromptError;
    fn from_str(s: &str) -> Result<Self> {
        match squash(s).as_str() {
            "u" | "unnormalized" => Ok(NormalizationMode::Unnormalized),
            "n" | "normalized" => Ok(NormalizationMode::Normalized),
            _ => Err(PromptError::InvalidSpec(format!("unknown normalization mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    ZeroShot,
    SingleDomain,
    CrossDomain,
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Setting::ZeroShot => "zero_shot",
            Setting::SingleDomain => "single_domain",
            Setting::CrossDomain => "cross_domain",
        })
    }
}

impl FromStr for Setting {
    type Err = PromptError;
    fn from_str(s: &str) -> Result<Self> {
        match squash(s).as_str() {
            "zeroshot" => Ok(Setting::ZeroShot),
            "singledomain" => Ok(Setting::SingleDomain),
            "crossdomain" => Ok(Setting::CrossDomain),
            _ => Err(PromptError::InvalidSpec(format!("unknown setting {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PromptSpec {
    pub schema_format: SchemaFormat,
    pub content_format: ContentFormat,
    pub mode: NormalizationMode,
    pub setting: Setting,
}

impl PromptSpec {
    pub fn validate(&self) -> Result<()> {
        if self.content_format != ContentFormat::NoContent && self.schema_format != SchemaFormat::CreateTable {
            return Err(PromptError::InvalidSpec(format!(
                "content format {} requires the create_table schema format",
                self.content_format
            )));
        }
        if self.content_format.rows() == Some(0) {
            return Err(PromptError::InvalidSpec("content rows must be at least 1".into()));
        }
        Ok(())
    }

    /// Construction label as used in report rows, e.g. `CreateTable+SelectRow 3`.
    pub fn construction_label(&self) -> String {
        match self.content_format {
            ContentFormat::NoContent => self.schema_format.label().to_string(),
            c => format!("{}+{}", self.schema_format.label(), c.label()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionLabel {
    DemoDatabase,
    DemoExamples,
    TestDatabase,
    Instruction,
    Question,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub label: SectionLabel,
    pub start: usize,
    pub end: usize,
}

/// A rendered prompt. Sections tile `text` exactly, in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptText {
    pub text: String,
    pub sections: Vec<Section>,
}

impl PromptText {
    pub fn section_text(&self, section: &Section) -> &str {
        &self.text[section.start..section.end]
    }

    pub(crate) fn push(&mut self, label: SectionLabel, text: &str) {
        let start = self.text.len();
        self.text.push_str(text);
        self.sections.push(Section {
            label,
            start,
            end: self.text.len(),
        });
    }
}
