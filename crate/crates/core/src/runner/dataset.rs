//! Spider-format example files and database directories.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::value::RawValue;

use crate::sampler::Example;
use crate::sql::parser::parse_statement;

use super::{Result, RunnerError};

/// Examples in file order plus the database file of every referenced db_id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub examples: Vec<Example>,
    pub db_files: BTreeMap<String, PathBuf>,
}

impl Dataset {
    /// Examples grouped by db_id, each group in file order.
    pub fn by_database(&self) -> BTreeMap<String, Vec<Example>> {
        let mut map: BTreeMap<String, Vec<Example>> = BTreeMap::new();
        for e in &self.examples {
            map.entry(e.db_id.clone()).or_default().push(e.clone());
        }
        map
    }
}

#[derive(Deserialize)]
struct Record {
    question: String,
    query: String,
    db_id: String,
}

/// Spider layout: `<root>/<db_id>/<db_id>.sqlite`.
pub fn database_path(tables_root: &Path, db_id: &str) -> PathBuf {
    tables_root.join(db_id).join(format!("{db_id}.sqlite"))
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Reads a JSON array of `{question, query, db_id}` records.
pub fn load_dataset(examples_file: &Path, tables_root: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(examples_file).map_err(|e| RunnerError::Io {
        path: examples_file.to_path_buf(),
        source: e,
    })?;
    let malformed = |line: usize, message: String| RunnerError::MalformedRecord {
        path: examples_file.to_path_buf(),
        line,
        message,
    };
    if text.trim().is_empty() {
        log::warn!("{} contains no examples", examples_file.display());
        return Ok(Dataset::default());
    }
    let raws: Vec<&RawValue> = serde_json::from_str(&text).map_err(|e| malformed(e.line(), e.to_string()))?;
    if raws.is_empty() {
        log::warn!("{} contains no examples", examples_file.display());
    }
    let mut dataset = Dataset::default();
    for raw in raws {
        let offset = raw.get().as_ptr() as usize - text.as_ptr() as usize;
        let line = line_of(&text, offset);
        let rec: Record = serde_json::from_str(raw.get()).map_err(|e| malformed(line, e.to_string()))?;
        if rec.db_id.is_empty() {
            return Err(malformed(line, "empty db_id".into()));
        }
        if let Err(e) = parse_statement(&rec.query, None) {
            return Err(malformed(line, format!("gold SQL does not parse: {e}")));
        }
        if !dataset.db_files.contains_key(&rec.db_id) {
            let path = database_path(tables_root, &rec.db_id);
            if !path.is_file() {
                return Err(RunnerError::MissingDatabase { db_id: rec.db_id, path });
            }
            dataset.db_files.insert(rec.db_id.clone(), path);
        }
        dataset.examples.push(Example {
            nlq: rec.question,
            sql: rec.query,
            db_id: rec.db_id,
        });
    }
    log::info!(
        "loaded {} examples over {} databases from {}",
        dataset.examples.len(),
        dataset.db_files.len(),
        examples_file.display()
    );
    Ok(dataset)
}

/// Every `<root>/<db_id>/<db_id>.sqlite` under `tables_root`, sorted by db_id.
pub fn discover_databases(tables_root: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let entries = fs::read_dir(tables_root).map_err(|e| RunnerError::Io {
        path: tables_root.to_path_buf(),
        source: e,
    })?;
    let mut out = BTreeMap::new();
    for entry in entries.flatten() {
        let db_id = entry.file_name().to_string_lossy().into_owned();
        let path = database_path(tables_root, &db_id);
        if path.is_file() {
            out.insert(db_id, path);
        }
    }
    Ok(out)
}
