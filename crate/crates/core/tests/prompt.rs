mod common;

use std::collections::HashMap;
use std::sync::LazyLock;

use common::{ex, Fixtures};
use proptest::prelude::*;
use rusqlite::Connection;
use sqlprompt_core::catalog::{CellValue, DatabaseContext, DatabaseSchema, TableSample};
use sqlprompt_core::prompt::{
    assemble_prompt, count_tokens, database_prompt, serialize_content, serialize_schema, ContentFormat,
    NormalizationMode, PromptError, PromptSpec, SchemaFormat, Setting, INSTRUCTION,
};
use sqlprompt_core::sampler::{DemoGroup, DemonstrationSet};

use NormalizationMode::{Normalized, Unnormalized};

static BOOK: LazyLock<DatabaseContext> = LazyLock::new(|| Fixtures::new().context("book_2", 3));

fn spec(schema_format: SchemaFormat, content_format: ContentFormat, mode: NormalizationMode, setting: Setting) -> PromptSpec {
    PromptSpec {
        schema_format,
        content_format,
        mode,
        setting,
    }
}

#[test]
fn schema_examples() {
    let fx = Fixtures::new();
    let snippet = fx.context("network_1_snippet", 3).schema;
    assert_eq!(
        serialize_schema(&snippet, SchemaFormat::TableColumns, Unnormalized).unwrap(),
        "Highschooler(ID, name, grade);\nFriend(student_id, friend_id);"
    );
    let fk = serialize_schema(&snippet, SchemaFormat::ColumnsEqFk, Unnormalized).unwrap();
    assert!(fk.starts_with("Table Highschooler, Columns = [ID, name, grade];\nTable Friend, Columns = [student_id, friend_id];\n"));
    assert!(fk.ends_with("Foreign_keys = [Friend.student_id = Highschooler.ID, Friend.friend_id = Highschooler.ID];"));

    let net = fx.context("network_1", 3).schema;
    assert!(serialize_schema(&net, SchemaFormat::CreateTable, Normalized)
        .unwrap()
        .starts_with("create table highschooler (\nid int primary key,\nname text,\ngrade int\n);"));

    let empty = DatabaseSchema {
        db_id: "empty".into(),
        tables: vec![],
    };
    assert!(matches!(
        serialize_schema(&empty, SchemaFormat::TableColumns, Normalized),
        Err(PromptError::EmptySchema)
    ));
}

#[test]
fn content_examples() {
    let fx = Fixtures::new();
    let net = fx.context("network_1", 3);
    let hs = &net.schema.tables[0];
    let sample = net.content.table("Highschooler").unwrap();
    let insert = serialize_content(hs, sample, ContentFormat::InsertRow(3), Unnormalized).unwrap();
    assert_eq!(
        insert.lines().next().unwrap(),
        "INSERT INTO Highschooler (ID, name, grade) VALUES (1510, \"Jordan\", 9);"
    );
    let cols = serialize_content(hs, sample, ContentFormat::SelectCol(3), Unnormalized).unwrap();
    assert!(cols.contains("name: \"Jordan\", \"Gabriel\", \"Tiffany\""));

    let wrong = TableSample {
        table: "Highschooler".into(),
        rows: vec![vec![CellValue::Integer(1)]],
        distinct_values: vec![vec![]; 3],
    };
    assert!(matches!(
        serialize_content(hs, &wrong, ContentFormat::SelectRow(3), Normalized),
        Err(PromptError::SampleMismatch { .. })
    ));
}

#[test]
fn empty_table_select_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e").join("e.sqlite");
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    Connection::open(&path).unwrap().execute_batch("CREATE TABLE Pets(PetID int, Name text);").unwrap();
    let ctx = DatabaseContext::load(&path, 3).unwrap();
    let text = serialize_content(&ctx.schema.tables[0], &ctx.content.tables[0], ContentFormat::SelectRow(3), Normalized).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.first(), Some(&"/*"));
    assert_eq!(lines.last(), Some(&"*/"));
    let select = lines.iter().position(|l| l.starts_with("select * from pets limit 3;")).unwrap();
    assert_eq!(lines[select + 1], "petid    name");
    assert_eq!(select + 3, lines.len());
}

#[test]
fn token_counts() {
    for name in sqlprompt_core::prompt::tokens::available_tokenizers() {
        assert_eq!(count_tokens("", name).unwrap(), 0, "{name}");
    }
    assert_eq!(count_tokens("select", "whitespace").unwrap(), 1);
    assert_eq!(count_tokens("select count(*) from t", "whitespace").unwrap(), 4);
    assert!(matches!(count_tokens("x", "nope"), Err(PromptError::UnknownTokenizer(_))));
}

#[test]
fn single_domain_demos_are_normalized_in_both_modes() {
    let fx = Fixtures::new();
    let net = fx.context("network_1", 3);
    let demos = DemonstrationSet {
        groups: vec![DemoGroup {
            db_id: "network_1".into(),
            examples: vec![ex("network_1", "What is Kyle's id?", "SELECT ID FROM Highschooler WHERE name  =  \"Kyle\"")],
        }],
    };
    for mode in [Unnormalized, Normalized] {
        let s = spec(SchemaFormat::CreateTable, ContentFormat::NoContent, mode, Setting::SingleDomain);
        let p = assemble_prompt(&s, &net, "How many high schoolers are there?", &demos, &HashMap::new()).unwrap();
        let pair = "Question: What is Kyle's id?\nselect id from highschooler where name = 'Kyle';\n";
        let at = p.text.find(pair).unwrap();
        assert!(p.text[..at].ends_with(&format!("{INSTRUCTION}\n\n")));
        assert!(p.text[at + pair.len()..].starts_with("Question: How many high schoolers are there?\n"));
    }
}

#[test]
fn setting_mismatches() {
    let fx = Fixtures::new();
    let net = fx.context("network_1", 3);
    let own = DemonstrationSet {
        groups: vec![DemoGroup {
            db_id: "network_1".into(),
            examples: vec![ex("network_1", "q", "select 1")],
        }],
    };
    let none = HashMap::new();
    let zero = spec(SchemaFormat::TableColumns, ContentFormat::NoContent, Normalized, Setting::ZeroShot);
    assert!(matches!(
        assemble_prompt(&zero, &net, "q", &own, &none),
        Err(PromptError::SettingMismatch { .. })
    ));
    let cross = PromptSpec {
        setting: Setting::CrossDomain,
        ..zero
    };
    assert!(matches!(
        assemble_prompt(&cross, &net, "q", &own, &none),
        Err(PromptError::SettingMismatch { .. })
    ));
    let invalid = spec(SchemaFormat::ColumnsEq, ContentFormat::SelectRow(3), Normalized, Setting::ZeroShot);
    assert!(matches!(
        assemble_prompt(&invalid, &net, "q", &DemonstrationSet::default(), &none),
        Err(PromptError::InvalidSpec(_))
    ));
}

#[derive(Debug, Clone)]
struct RandomTable {
    name: String,
    columns: Vec<(String, bool)>,
    rows: Vec<Vec<Result<i64, String>>>,
}

fn random_table() -> impl Strategy<Value = RandomTable> {
    ("[A-Z][a-zA-Z]{0,6}", prop::collection::vec(("[A-Z][a-zA-Z_]{0,6}", any::<bool>()), 1..4)).prop_flat_map(
        |(name, columns)| {
            let row = columns
                .iter()
                .map(|(_, text)| {
                    if *text {
                        "[A-Za-z][A-Za-z ]{0,8}".prop_map(Err).boxed()
                    } else {
                        (-500i64..5000).prop_map(Ok).boxed()
                    }
                })
                .collect::<Vec<_>>();
            (Just(name), Just(columns), prop::collection::vec(row, 0..6))
        },
    )
    .prop_map(|(name, columns, rows)| RandomTable { name, columns, rows })
}

/// Writes tab-indented DDL, as in Spider, and returns the loaded context.
fn build_random(tables: &[RandomTable], dir: &std::path::Path) -> DatabaseContext {
    let path = dir.join("rand_db").join("rand_db.sqlite");
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    let conn = Connection::open(&path).unwrap();
    for (t, table) in tables.iter().enumerate() {
        let cols: Vec<String> = table
            .columns
            .iter()
            .enumerate()
            .map(|(i, (c, text))| format!("\t\"{c}{i}\" {}", if *text { "TEXT" } else { "INT" }))
            .collect();
        conn.execute_batch(&format!("CREATE TABLE \"{}{t}\" (\n{}\n);", table.name, cols.join(",\n")))
            .unwrap();
        for row in &table.rows {
            let values: Vec<String> = row
                .iter()
                .map(|v| match v {
                    Ok(i) => i.to_string(),
                    Err(s) => format!("'{s}'"),
                })
                .collect();
            conn.execute_batch(&format!("INSERT INTO \"{}{t}\" VALUES ({});", table.name, values.join(", ")))
                .unwrap();
        }
    }
    drop(conn);
    DatabaseContext::load(&path, 3).unwrap()
}

fn any_spec() -> impl Strategy<Value = PromptSpec> {
    let content = prop_oneof![
        Just(ContentFormat::NoContent),
        (1usize..4).prop_map(ContentFormat::InsertRow),
        (1usize..4).prop_map(ContentFormat::SelectRow),
        (1usize..4).prop_map(ContentFormat::SelectCol),
    ];
    (prop::sample::select(SchemaFormat::ALL.to_vec()), content, any::<bool>()).prop_map(|(schema_format, content_format, n)| {
        let schema_format = if content_format == ContentFormat::NoContent { schema_format } else { SchemaFormat::CreateTable };
        spec(schema_format, content_format, if n { Normalized } else { Unnormalized }, Setting::ZeroShot)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn prompt_invariants(tables in prop::collection::vec(random_table(), 1..4), s in any_spec(), nlq in "[A-Z][a-z ]{0,20}\\?") {
        let dir = tempfile::tempdir().unwrap();
        let db = build_random(&tables, dir.path());
        let none = HashMap::new();
        let zero = assemble_prompt(&s, &db, &nlq, &DemonstrationSet::default(), &none).unwrap();

        // Determinism.
        prop_assert_eq!(&zero, &assemble_prompt(&s, &db, &nlq, &DemonstrationSet::default(), &none).unwrap());

        // Cue ending.
        let cue_line = format!("Question: {nlq}\n{}", s.mode.cue());
        prop_assert!(zero.text.ends_with(&cue_line));
        prop_assert!(!zero.text.ends_with('\n'));

        // Section integrity.
        let joined: String = zero.sections.iter().map(|sec| zero.section_text(sec)).collect();
        prop_assert_eq!(&joined, &zero.text);
        for w in zero.sections.windows(2) {
            prop_assert_eq!(w[0].end, w[1].start);
        }

        // Composition with a cross-domain prefix.
        let cross_spec = PromptSpec { setting: Setting::CrossDomain, ..s };
        let demos = DemonstrationSet {
            groups: vec![DemoGroup {
                db_id: "book_2".into(),
                examples: vec![ex("book_2", "How many books are there?", "SELECT count(*) FROM book")],
            }],
        };
        let demo_dbs = HashMap::from([("book_2".to_string(), BOOK.clone())]);
        let cross = assemble_prompt(&cross_spec, &db, &nlq, &demos, &demo_dbs).unwrap();
        prop_assert!(cross.text.ends_with(&zero.text));
        prop_assert!(cross.text.len() > zero.text.len());
    }

    #[test]
    fn content_keeps_case(tables in prop::collection::vec(random_table(), 1..3), r in 1usize..4, which in 0usize..3) {
        let dir = tempfile::tempdir().unwrap();
        let db = build_random(&tables, dir.path());
        let content_format = [ContentFormat::InsertRow(r), ContentFormat::SelectRow(r), ContentFormat::SelectCol(r)][which];
        for mode in [Unnormalized, Normalized] {
            let s = spec(SchemaFormat::CreateTable, content_format, mode, Setting::ZeroShot);
            let text = database_prompt(&db, &s).unwrap();
            for sample in &db.content.tables {
                let cells: Vec<&CellValue> = match content_format {
                    ContentFormat::SelectCol(_) => sample.distinct_values.iter().flat_map(|col| col.iter().take(r)).collect(),
                    _ => sample.rows.iter().take(r).flatten().collect(),
                };
                for cell in cells {
                    let rendered = match content_format {
                        ContentFormat::SelectRow(_) => cell.to_string(),
                        _ => cell.render_quoted(),
                    };
                    prop_assert!(text.contains(&rendered), "{:?} missing from {}", rendered, text);
                }
            }
        }
    }

    #[test]
    fn normalization_shortens_padded_ddl(tables in prop::collection::vec(random_table(), 1..4), r in 1usize..4, which in 0usize..4) {
        let dir = tempfile::tempdir().unwrap();
        let db = build_random(&tables, dir.path());
        let content_format = [ContentFormat::NoContent, ContentFormat::InsertRow(r), ContentFormat::SelectRow(r), ContentFormat::SelectCol(r)][which];
        let at = |mode| database_prompt(&db, &spec(SchemaFormat::CreateTable, content_format, mode, Setting::ZeroShot)).unwrap();
        prop_assert!(at(Normalized).chars().count() < at(Unnormalized).chars().count());
    }
}
