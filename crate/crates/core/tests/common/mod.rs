//! Fixture databases and datasets shared by the integration tests.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use rusqlite::Connection;
use sqlprompt_core::catalog::DatabaseContext;
use sqlprompt_core::sampler::Example;

pub fn fixture_dir() -> PathBuf {
    // Also compiled into the validation crate, so resolve through the workspace layout.
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

pub fn golden(name: &str) -> String {
    fs::read_to_string(fixture_dir().join(name)).unwrap()
}

/// Builds `<root>/<db_id>/<db_id>.sqlite` from `fixtures/<script>.sql`.
pub fn build_db(root: &Path, db_id: &str, script: &str) -> PathBuf {
    let dir = root.join(db_id);
    fs::create_dir_all(&dir).unwrap();
    let path = dir.join(format!("{db_id}.sqlite"));
    let sql = fs::read_to_string(fixture_dir().join(format!("{script}.sql"))).unwrap();
    let conn = Connection::open(&path).unwrap();
    conn.execute_batch("PRAGMA foreign_keys = OFF;").unwrap();
    conn.execute_batch(&sql).unwrap();
    path
}

/// A Spider-layout database root holding every fixture database.
pub struct Fixtures {
    pub dir: tempfile::TempDir,
    pub root: PathBuf,
}

impl Fixtures {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("database");
        build_db(&root, "network_1", "network_1");
        build_db(&root, "network_1_snippet", "network_1_snippet");
        build_db(&root, "book_2", "book_2");
        build_db(&root, "race_track", "race_track");
        Self { dir, root }
    }

    pub fn db(&self, db_id: &str) -> PathBuf {
        self.root.join(db_id).join(format!("{db_id}.sqlite"))
    }

    pub fn context(&self, db_id: &str, rows: usize) -> DatabaseContext {
        DatabaseContext::load(&self.db(db_id), rows).unwrap()
    }

    /// Writes a Spider-format examples file next to the database root.
    pub fn write_examples(&self, name: &str, examples: &[Example]) -> PathBuf {
        let records: Vec<_> = examples
            .iter()
            .map(|e| serde_json::json!({"question": e.nlq, "query": e.sql, "db_id": e.db_id}))
            .collect();
        let path = self.dir.path().join(name);
        fs::write(&path, serde_json::to_string_pretty(&records).unwrap()).unwrap();
        path
    }
}

pub fn ex(db_id: &str, nlq: &str, sql: &str) -> Example {
    Example {
        nlq: nlq.into(),
        sql: sql.into(),
        db_id: db_id.into(),
    }
}

/// Fifty network_1 examples. The `LIMIT` variants share a template pairwise.
pub fn network_pool() -> Vec<Example> {
    let mut out = Vec::new();
    let cols = ["id", "name", "grade"];
    let ops = ["=", ">", "<", "!=", ">="];
    for (ci, col) in cols.iter().enumerate() {
        for (oi, op) in ops.iter().enumerate() {
            out.push(ex(
                "network_1",
                &format!("Which students have {col} {op} the value {ci}{oi}?"),
                &format!("SELECT name FROM Highschooler WHERE {col} {op} {}", 10 + ci * 5 + oi),
            ));
        }
    }
    for col in cols {
        for agg in ["count", "max", "min", "avg", "sum"] {
            out.push(ex(
                "network_1",
                &format!("What is the {agg} of {col}?"),
                &format!("SELECT {agg}({col}) FROM Highschooler"),
            ));
        }
    }
    for (i, dir) in ["ASC", "DESC"].iter().enumerate() {
        for col in cols {
            for lim in [1, 3] {
                out.push(ex(
                    "network_1",
                    &format!("List names ordered by {col} {i} limited {lim}."),
                    &format!("SELECT name FROM Highschooler ORDER BY {col} {dir} LIMIT {lim}"),
                ));
            }
        }
    }
    for t in ["Friend", "Likes"] {
        for c in ["student_id", "count(*)"] {
            out.push(ex("network_1", &format!("Show {c} of {t}."), &format!("SELECT {c} FROM {t}")));
        }
    }
    for g in ["grade", "name"] {
        out.push(ex(
            "network_1",
            &format!("Count students per {g}."),
            &format!("SELECT {g}, count(*) FROM Highschooler GROUP BY {g}"),
        ));
    }
    out.push(ex("network_1", "Which grades exist?", "SELECT DISTINCT grade FROM Highschooler"));
    out.push(ex(
        "network_1",
        "Who is in grade 9 or 10?",
        "SELECT name FROM Highschooler WHERE grade BETWEEN 9 AND 10",
    ));
    assert_eq!(out.len(), 50);
    out
}
