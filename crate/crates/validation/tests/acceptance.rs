//! Acceptance criteria, one pass/fail line each. Runs without the libtest harness.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::{ex, golden, network_pool, Fixtures};
use rusqlite::Connection;
use sqlprompt_core::catalog::{CellValue, DatabaseContext};
use sqlprompt_core::eval::{execute_sql, execution_accuracy, is_order_sensitive, mcnemar_from_counts, Reason};
use sqlprompt_core::gateway::{CompletionResponse, FinishReason, FnProvider};
use sqlprompt_core::prompt::tokens::CharCounter;
use sqlprompt_core::prompt::{
    assemble_prompt, database_prompt, serialize_content, serialize_schema, ContentFormat, NormalizationMode,
    PromptSpec, SchemaFormat, Setting,
};
use sqlprompt_core::runner::{self, tables, ExperimentConfig, Gateways, ReportFormat, RunReport};
use sqlprompt_core::sampler::{filter_demo_databases, sample_cross_domain, sample_single_domain, DemoGroup, DemonstrationSet, Example};
use sqlprompt_core::sql::{normalize_ddl, normalize_sql, normalize_sql_with_schema, template_key};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>, what: &str) -> Result<T, String> {
    r.map_err(|e| format!("{what}: {e}"))
}

fn same_text(label: &str, got: &str, want: &str) -> Result<(), String> {
    if got == want {
        return Ok(());
    }
    let at = got.bytes().zip(want.bytes()).position(|(a, b)| a != b).unwrap_or(got.len().min(want.len()));
    let ctx = |s: &str| {
        let mut lo = at.saturating_sub(40).min(s.len());
        while !s.is_char_boundary(lo) {
            lo -= 1;
        }
        let mut hi = (at + 40).min(s.len());
        while !s.is_char_boundary(hi) {
            hi += 1;
        }
        format!("{:?}", &s[lo..hi])
    };
    Err(format!("{label}: first difference at byte {at}: got {} want {}", ctx(got), ctx(want)))
}

const NORMALIZED_SELECT_ROW: PromptSpec = PromptSpec {
    schema_format: SchemaFormat::CreateTable,
    content_format: ContentFormat::SelectRow(3),
    mode: NormalizationMode::Normalized,
    setting: Setting::ZeroShot,
};
const TEST_QUESTION: &str = "How many high schoolers are there?";

fn golden_prompt_fidelity() -> Outcome {
    let fx = Fixtures::new();
    let started = Instant::now();
    let net = fx.context("network_1", 3);
    let none = HashMap::new();

    let zero = ok(
        assemble_prompt(&NORMALIZED_SELECT_ROW, &net, TEST_QUESTION, &DemonstrationSet::default(), &none),
        "zero-shot",
    )?;
    same_text("zero-shot", &zero.text, &golden("zero_shot_prompt.txt"))?;

    let single = DemonstrationSet {
        groups: vec![DemoGroup {
            db_id: "network_1".into(),
            examples: vec![
                ex("network_1", "What is Kyle's id?", "SELECT ID FROM Highschooler WHERE name  =  \"Kyle\""),
                ex(
                    "network_1",
                    "Return the names of friends of the high school student Kyle.",
                    "SELECT T3.name FROM Friend AS T1 JOIN Highschooler AS T2 ON T1.student_id  =  T2.id JOIN Highschooler AS T3 ON T1.friend_id  =  T3.id WHERE T2.name  =  \"Kyle\"",
                ),
                ex(
                    "network_1",
                    "Show names of all high school students who do not have any friends.",
                    "SELECT name FROM Highschooler EXCEPT SELECT T2.name FROM Friend AS T1 JOIN Highschooler AS T2 ON T1.student_id  =  T2.id",
                ),
                ex("network_1", "What are the names and grades for each high schooler?", "SELECT name ,  grade FROM Highschooler"),
            ],
        }],
    };
    let spec = PromptSpec {
        setting: Setting::SingleDomain,
        ..NORMALIZED_SELECT_ROW
    };
    let p = ok(assemble_prompt(&spec, &net, TEST_QUESTION, &single, &none), "single-domain")?;
    same_text("4-shot single-domain", &p.text, &golden("single_domain_prompt.txt"))?;

    let cross = DemonstrationSet {
        groups: vec![
            DemoGroup {
                db_id: "book_2".into(),
                examples: vec![
                    ex("book_2", "List the writers of the books in ascending alphabetical order.", "SELECT Writer FROM book ORDER BY Writer ASC"),
                    ex("book_2", "How many books are there?", "SELECT count(*) FROM book"),
                ],
            },
            DemoGroup {
                db_id: "race_track".into(),
                examples: vec![
                    ex("race_track", "Show the name and location for all tracks.", "SELECT name ,  LOCATION FROM the track"),
                    ex(
                        "race_track",
                        "Show the name of track and the number of races in each track.",
                        "SELECT T2.name ,  count(*) FROM race AS T1 JOIN track AS T2 ON T1.track_id  =  T2.track_id GROUP BY T1.track_id",
                    ),
                ],
            },
        ],
    };
    let demo_dbs: HashMap<String, DatabaseContext> =
        ["book_2", "race_track"].iter().map(|id| (id.to_string(), fx.context(id, 3))).collect();
    let spec = PromptSpec {
        setting: Setting::CrossDomain,
        ..NORMALIZED_SELECT_ROW
    };
    let p = ok(assemble_prompt(&spec, &net, TEST_QUESTION, &cross, &demo_dbs), "cross-domain")?;
    same_text("4-shot cross-domain", &p.text, &golden("cross_domain_prompt.txt"))?;

    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("3 prompts byte-exact in {elapsed:.1?}"))
}

fn figure_serializers() -> Outcome {
    let fx = Fixtures::new();
    let snippet = fx.context("network_1_snippet", 3);
    let u = NormalizationMode::Unnormalized;
    let columns_eq = "Table Highschooler, Columns = [ID, name, grade];\nTable Friend, Columns = [student_id, friend_id];";
    let expected = [
        (SchemaFormat::TableColumns, "Highschooler(ID, name, grade);\nFriend(student_id, friend_id);".to_string()),
        (SchemaFormat::ColumnsEq, columns_eq.to_string()),
        (
            SchemaFormat::ColumnsEqFk,
            format!("{columns_eq}\nForeign_keys = [Friend.student_id = Highschooler.ID, Friend.friend_id = Highschooler.ID];"),
        ),
        (
            SchemaFormat::CreateTable,
            "CREATE TABLE Highschooler (\nID int primary key,\nname text,\ngrade int\n);\n\
             CREATE TABLE Friend (\nstudent_id int,\nfriend_id int,\nprimary key (student_id,friend_id),\n\
             foreign key(student_id) references Highschooler(ID),\nforeign key (friend_id) references Highschooler(ID)\n);"
                .to_string(),
        ),
    ];
    for (format, want) in &expected {
        let got = ok(serialize_schema(&snippet.schema, *format, u), format.label())?;
        same_text(format.label(), &got, want)?;
    }

    let table = snippet.schema.table("Highschooler").ok_or("no Highschooler table")?;
    let sample = snippet.content.table("Highschooler").ok_or("no Highschooler sample")?;
    let content = |f| ok(serialize_content(table, sample, f, u), "content");
    same_text(
        "InsertRow",
        &content(ContentFormat::InsertRow(3))?,
        "INSERT INTO Highschooler (ID, name, grade) VALUES (1510, \"Jordan\", 9);\n\
         INSERT INTO Highschooler (ID, name, grade) VALUES (1689, \"Gabriel\", 9);\n\
         INSERT INTO Highschooler (ID, name, grade) VALUES (1381, \"Tiffany\", 9);",
    )?;
    same_text(
        "SelectRow",
        &content(ContentFormat::SelectRow(3))?,
        "/*\n3 example rows:\nSELECT * FROM Highschooler LIMIT 3;\nID    name    grade\n1510    Jordan    9\n\
         1689    Gabriel    9\n1381    Tiffany    9\n*/",
    )?;
    // The figure's id line reflects SQLite scanning the primary-key index for
    // DISTINCT; values here follow first occurrence in row order.
    same_text(
        "SelectCol",
        &content(ContentFormat::SelectCol(3))?,
        "/*\nColumns in Highschooler and 3 distinct examples in each column:\nID: 1510, 1689, 1381\n\
         name: \"Jordan\", \"Gabriel\", \"Tiffany\"\ngrade: 9, 10, 11\n*/",
    )?;
    let engine = execute_sql(&fx.db("network_1_snippet"), "SELECT DISTINCT ID FROM Highschooler LIMIT 3", 1000);
    let ids: Vec<String> = engine.rows.iter().map(|r| r[0].to_string()).collect();
    ensure(ids == ["1025", "1101", "1247"], || format!("engine DISTINCT order gave {ids:?}"))?;
    Ok("4 schema and 3 content constructions exact; name/grade lines of SelectCol exact, id line by first occurrence (engine order 1025, 1101, 1247 confirmed)".into())
}

#[derive(serde::Deserialize)]
struct CorpusEntry {
    db_id: String,
    query: String,
}

/// Synthetic DDL in Spider's assorted styles.
fn ddl_corpus() -> Vec<String> {
    let quotes = [("", ""), ("\"", "\""), ("`", "`"), ("[", "]")];
    let types = ["int", "text", "real", "varchar(20)", "NUMERIC(10,2)"];
    let mut out = Vec::new();
    for i in 0..50 {
        let (ql, qr) = quotes[i % quotes.len()];
        let q = |s: &str| format!("{ql}{s}{qr}");
        let ncols = 2 + i % 4;
        let cols: Vec<String> = (0..ncols)
            .map(|c| format!("{} {}", q(&format!("Col_{i}_{c}")), types[(i + c) % types.len()]))
            .collect();
        let mut items = cols.clone();
        items.push(format!("PRIMARY KEY ({})", q(&format!("Col_{i}_0"))));
        if i % 2 == 0 {
            items.push(format!("FOREIGN KEY ({}) REFERENCES {}({})", q(&format!("Col_{i}_1")), q("Other"), q("Id")));
        }
        let name = q(&format!("Table_{i}"));
        out.push(format!("CREATE TABLE {name} (\n{}\n);", items.join(",\n")));
        out.push(format!("create table {name}({});", items.join(", ")));
        out.push(format!("CREATE TABLE IF NOT EXISTS {name} (\n\t{}\n)", items.join(" ,\n\t")));
        out.push(format!("Create Table {name}  (  {}  ) ;", items.join("  ,  ")));
    }
    out
}

fn normalization() -> Outcome {
    let fig4_ddl = "CREATE TABLE Highschooler(\n\tID int primary key, \n\tname text, \n\tgrade int);";
    same_text(
        "reference DDL",
        &ok(normalize_ddl(fig4_ddl), "ddl")?,
        "create table highschooler (\nid int primary key,\nname text,\ngrade int\n);",
    )?;
    let fig4_sql = "SELECT count( * ) FROM Highschooler WHERE Name = \"Kyle\";";
    same_text(
        "reference SQL",
        ok(normalize_sql(fig4_sql), "sql")?.as_str(),
        "select count(*) from highschooler where name = 'Kyle';",
    )?;

    let fx = Fixtures::new();
    let corpus: Vec<CorpusEntry> = ok(serde_json::from_str(&golden("corpus.json")), "corpus")?;
    ensure(corpus.len() >= 200, || format!("corpus has {} statements", corpus.len()))?;
    let contexts: HashMap<String, DatabaseContext> =
        ["network_1", "book_2", "race_track"].iter().map(|id| (id.to_string(), fx.context(id, 3))).collect();
    for e in &corpus {
        let schema = Some(&contexts[&e.db_id].schema);
        let once = ok(normalize_sql_with_schema(&e.query, schema), &e.query)?;
        let twice = ok(normalize_sql_with_schema(once.as_str(), schema), once.as_str())?;
        same_text(&format!("idempotence of {}", e.query), twice.as_str(), once.as_str())?;
        let db = fx.db(&e.db_id);
        let original = execute_sql(&db, &e.query, 5000);
        let normalized = execute_sql(&db, once.as_str(), 5000);
        ensure(original.is_ok(), || format!("{} fails: {:?}", e.query, original.error))?;
        ensure(normalized.is_ok(), || format!("{} fails: {:?}", once, normalized.error))?;
        let ordered = is_order_sensitive(&e.query);
        ensure(sqlprompt_core::eval::results_match(&normalized, &original, ordered), || {
            format!("{} and {} differ on {}", e.query, once, e.db_id)
        })?;
    }

    let mut ddl = ddl_corpus();
    for ctx in contexts.values() {
        ddl.extend(ctx.schema.tables.iter().filter_map(|t| t.ddl.clone()));
    }
    ddl.push(fig4_ddl.into());
    ensure(ddl.len() >= 200, || format!("DDL corpus has {} statements", ddl.len()))?;
    for stmt in &ddl {
        let once = ok(normalize_ddl(stmt), stmt)?;
        let twice = ok(normalize_ddl(&once), &once)?;
        same_text(&format!("idempotence of {stmt:?}"), &twice, &once)?;
    }
    Ok(format!(
        "reference DDL and SQL exact; {} SQL statements idempotent and execution-equivalent; {} DDL statements idempotent",
        corpus.len(),
        ddl.len()
    ))
}

fn prompt_shrinkage() -> Outcome {
    let fx = Fixtures::new();
    let net = fx.context("network_1", 3);
    let mut specs: Vec<(SchemaFormat, ContentFormat)> =
        SchemaFormat::ALL.iter().map(|f| (*f, ContentFormat::NoContent)).collect();
    for c in [ContentFormat::InsertRow(3), ContentFormat::SelectRow(3), ContentFormat::SelectCol(3)] {
        specs.push((SchemaFormat::CreateTable, c));
    }
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for (schema_format, content_format) in specs {
        let at = |mode| PromptSpec {
            schema_format,
            content_format,
            mode,
            setting: Setting::ZeroShot,
        };
        let un = ok(database_prompt(&net, &at(NormalizationMode::Unnormalized)), "U")?.chars().count();
        let no = ok(database_prompt(&net, &at(NormalizationMode::Normalized)), "N")?.chars().count();
        let label = at(NormalizationMode::Normalized).construction_label();
        lines.push(format!("{label} {un}->{no}"));
        if no >= un {
            failures.push(format!("{label} {un}->{no}"));
        }
    }
    if failures.is_empty() {
        Ok(lines.join(", "))
    } else {
        Err(format!("not strictly shorter: {} (all: {})", failures.join(", "), lines.join(", ")))
    }
}

fn sampling_protocol() -> Outcome {
    let pool = network_pool();
    let keys: Vec<_> = pool.iter().map(|e| template_key(&e.sql).unwrap()).collect();
    let mut sampled = 0usize;
    let mut candidates_with_twin = 0usize;
    for trial in 0..1000u64 {
        let t = trial as usize % pool.len();
        let others: Vec<Example> = pool.iter().enumerate().filter(|(i, _)| *i != t).map(|(_, e)| e.clone()).collect();
        if others.iter().any(|e| template_key(&e.sql).unwrap() == keys[t]) {
            candidates_with_twin += 1;
        }
        let n = 1 + (trial as usize % 8);
        let demos = ok(sample_single_domain(&pool[t], &others, n, trial, trial), "single-domain")?;
        for d in demos.examples() {
            sampled += 1;
            ensure(template_key(&d.sql).unwrap() != keys[t], || format!("trial {trial}: {} shares a template", d.sql))?;
        }
    }
    ensure(candidates_with_twin > 0, || "pool has no template twins; check is vacuous".into())?;

    let mut training: BTreeMap<String, Vec<Example>> = BTreeMap::new();
    for d in 0..12 {
        let db = format!("db_{d:02}");
        let examples = (0..6).map(|i| ex(&db, &format!("q{i}"), &format!("select {i} from t{d}"))).collect();
        training.insert(db, examples);
    }
    let eligible: Vec<String> = training.keys().cloned().collect();
    let mut shapes = 0;
    for m in [1, 2, 4, 8] {
        for k in [1, 2, 4, 6] {
            for seed in 0..10u64 {
                let set = ok(
                    sample_cross_domain(&training, &eligible, Some("db_03"), m, k, seed, seed + 7),
                    "cross-domain",
                )?;
                ensure(set.groups.len() == m, || format!("M={m}: {} groups", set.groups.len()))?;
                ensure(set.groups.iter().all(|g| g.examples.len() == k), || format!("K={k} violated"))?;
                ensure(set.len() == m * k, || "M x K != N".into())?;
                ensure(set.groups.iter().all(|g| g.db_id != "db_03"), || "test database sampled".into())?;
                let mut ids: Vec<_> = set.groups.iter().map(|g| &g.db_id).collect();
                ids.dedup();
                ensure(ids.len() == m, || "duplicate demonstration database".into())?;
                shapes += 1;
            }
        }
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let make = |id: &str, ncols: usize| -> Result<DatabaseContext, String> {
        let path = dir.path().join(format!("{id}.sqlite"));
        let cols: Vec<String> = (0..ncols).map(|c| format!("column_number_{c} text")).collect();
        ok(Connection::open(&path), "open")?
            .execute_batch(&format!("create table t ({});", cols.join(", ")))
            .map_err(|e| e.to_string())?;
        ok(DatabaseContext::load(&path, 3), "load")
    };
    let small = make("small", 2)?;
    let large = make("large", 60)?;
    let spec = PromptSpec {
        setting: Setting::CrossDomain,
        ..NORMALIZED_SELECT_ROW
    };
    let limit = ok(database_prompt(&large, &spec), "prompt")?.chars().count();
    let dbs = vec![small, large];
    let kept: Vec<&str> = filter_demo_databases(&dbs, &spec, &CharCounter, limit)
        .into_iter()
        .map(|d| d.schema.db_id.as_str())
        .collect();
    ensure(kept == ["small"], || format!("filter kept {kept:?} at limit {limit}"))?;
    Ok(format!(
        "1000 trials, {sampled} demonstrations, no template matches ({candidates_with_twin} trials had a twin in the pool); {shapes} cross-domain sets well-formed; filter drops the database at exactly the limit ({limit} chars)"
    ))
}

fn ex_oracle() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let db = dir.path().join("students.sqlite");
    ok(Connection::open(&db), "open")?
        .execute_batch(
            "create table student (id integer primary key, name text, gpa real);
             insert into student values (1, 'Ann', 3.5), (2, 'Bob', 2.0), (3, 'Cid', 3.5);",
        )
        .map_err(|e| e.to_string())?;
    use CellValue::{Integer as I, Real as R, Text as T};
    let t = |s: &str| T(s.into());
    // (prediction, its hand-computed rows, gold, its hand-computed rows)
    type Case = (&'static str, Vec<Vec<CellValue>>, &'static str, Vec<Vec<CellValue>>);
    let abc = || vec![vec![t("Ann")], vec![t("Bob")], vec![t("Cid")]];
    let ac = || vec![vec![t("Ann")], vec![t("Cid")]];
    let equivalent: Vec<Case> = vec![
        ("select count(*) from student", vec![vec![I(3)]], "select count(id) from student", vec![vec![I(3)]]),
        ("select name from student where gpa > 3", ac(), "select name from student where gpa >= 3.5", ac()),
        ("select name from student order by id desc", vec![vec![t("Cid")], vec![t("Bob")], vec![t("Ann")]], "select name from student", abc()),
        ("select max(gpa) from student", vec![vec![R(3.5)]], "select gpa from student order by gpa desc limit 1", vec![vec![R(3.5)]]),
        ("select id, name from student where name = 'Bob'", vec![vec![I(2), t("Bob")]], "select id, name from student where id = 2", vec![vec![I(2), t("Bob")]]),
        ("select name from student where gpa = 3.5 order by name", ac(), "select name from student where gpa > 3 order by name", ac()),
        ("select avg(gpa) from student", vec![vec![R(3.0)]], "select sum(gpa) / count(*) from student", vec![vec![R(3.0)]]),
        ("select name from student where id in (1, 3)", ac(), "select name from student where id != 2", ac()),
        (
            "select gpa, count(*) from student group by gpa",
            vec![vec![R(2.0), I(1)], vec![R(3.5), I(2)]],
            "select gpa, count(id) from student group by gpa order by count(id)",
            vec![vec![R(2.0), I(1)], vec![R(3.5), I(2)]],
        ),
        ("select upper(name) from student where id = 1", vec![vec![t("ANN")]], "select 'ANN'", vec![vec![t("ANN")]]),
    ];
    let inequivalent: Vec<Case> = vec![
        ("select name from student", abc(), "select id from student", vec![vec![I(1)], vec![I(2)], vec![I(3)]]),
        ("select count(*) from student where gpa > 3", vec![vec![I(2)]], "select count(*) from student", vec![vec![I(3)]]),
        ("select name from student order by name desc", vec![vec![t("Cid")], vec![t("Bob")], vec![t("Ann")]], "select name from student order by name", abc()),
        ("select 1", vec![vec![I(1)]], "select 1.0", vec![vec![R(1.0)]]),
        ("select '3'", vec![vec![t("3")]], "select 3", vec![vec![I(3)]]),
        ("select name, gpa from student where id = 1", vec![vec![t("Ann"), R(3.5)]], "select name from student where id = 1", vec![vec![t("Ann")]]),
        ("select distinct gpa from student", vec![vec![R(3.5)], vec![R(2.0)]], "select gpa from student", vec![vec![R(3.5)], vec![R(2.0)], vec![R(3.5)]]),
        ("select name from student where id = 4", vec![], "select name from student where id = 1", vec![vec![t("Ann")]]),
        ("select avg(gpa) from student", vec![vec![R(3.0)]], "select max(gpa) from student", vec![vec![R(3.5)]]),
        ("select name from student where name = 'ann'", vec![], "select name from student where name = 'Ann'", vec![vec![t("Ann")]]),
    ];

    // Independent comparison of the hand-computed results.
    fn hand_equal(mut a: Vec<Vec<CellValue>>, mut b: Vec<Vec<CellValue>>, ordered: bool) -> bool {
        let key = |r: &Vec<CellValue>| format!("{r:?}");
        if !ordered {
            a.sort_by_key(key);
            b.sort_by_key(key);
        }
        a == b
    }
    let sorted = |mut rows: Vec<Vec<CellValue>>| {
        rows.sort_by_key(|r| format!("{r:?}"));
        rows
    };
    for (expect_match, cases) in [(true, &equivalent), (false, &inequivalent)] {
        for (pred, pred_rows, gold, gold_rows) in cases {
            for (sql, rows) in [(pred, pred_rows), (gold, gold_rows)] {
                let got = execute_sql(&db, sql, 1000);
                ensure(got.is_ok(), || format!("{sql}: {:?}", got.error))?;
                ensure(sorted(got.rows.clone()) == sorted(rows.clone()), || format!("{sql} gave {:?}", got.rows))?;
                if is_order_sensitive(sql) {
                    ensure(&got.rows == rows, || format!("{sql} order {:?}", got.rows))?;
                }
            }
            let ordered = is_order_sensitive(gold);
            ensure(hand_equal(pred_rows.clone(), gold_rows.clone(), ordered) == expect_match, || {
                format!("hand label wrong for {pred} / {gold}")
            })?;
            let outcome = ok(execution_accuracy("x", pred, gold, &db, 1000), gold)?;
            ensure(outcome.matched == expect_match, || format!("{pred} vs {gold}: {:?}", outcome.reason))?;
        }
    }
    for bad in ["select nope from student", "selec name from student", "insert into student values (4, 'Dee', 1.0)"] {
        let outcome = ok(execution_accuracy("x", bad, "select 1", &db, 1000), bad)?;
        ensure(!outcome.matched && outcome.reason == Reason::PredError, || format!("{bad}: {:?}", outcome.reason))?;
    }
    Ok("10 equivalent pairs match, 10 inequivalent pairs mismatch, 3 erroring predictions score pred_error".into())
}

fn mcnemar() -> Outcome {
    // Exact two-sided binomial sum, from scratch.
    let choose = |n: u64, k: u64| (0..k).fold(1.0f64, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
    let oracle = 2.0 * (0..=5).map(|i| choose(20, i)).sum::<f64>() / 2f64.powi(20);
    let p = mcnemar_from_counts(15, 5).p_value;
    ensure((p - 0.0414).abs() < 1e-3, || format!("p(15,5) = {p}"))?;
    ensure((p - oracle).abs() < 1e-12, || format!("p(15,5) = {p}, binomial sum {oracle}"))?;
    for (b, c) in [(0, 0), (10, 10)] {
        let p = mcnemar_from_counts(b, c).p_value;
        ensure(p == 1.0, || format!("p({b},{c}) = {p}"))?;
    }
    Ok(format!("p(15,5) = {p:.6} (binomial sum {oracle:.6}); p(0,0) = p(10,10) = 1"))
}

fn scripted(answers: HashMap<String, String>) -> Gateways {
    Gateways::with_provider(Arc::new(FnProvider::new(move |req| {
        let question = req
            .prompt
            .rsplit("Question: ")
            .next()
            .and_then(|s| s.lines().next())
            .unwrap_or_default()
            .to_string();
        Ok(CompletionResponse {
            text: answers.get(&question).cloned().unwrap_or_else(|| " 1".into()),
            finish_reason: FinishReason::Stop,
            provider_latency_ms: 0,
        })
    })))
}

fn base_config(fx: &Fixtures, examples: &Path, cache: &Path) -> ExperimentConfig {
    ExperimentConfig {
        setting: Setting::ZeroShot,
        schema_format: SchemaFormat::CreateTable,
        content_format: ContentFormat::SelectRow(3),
        mode: NormalizationMode::Normalized,
        model_name: "fixture-model".into(),
        examples_file: examples.to_path_buf(),
        db_root: fx.root.clone(),
        cache_file: Some(cache.to_path_buf()),
        timeout_ms: 5000,
        ..ExperimentConfig::default()
    }
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).into_iter().flatten().flatten() {
            let p = entry.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn end_to_end_replay() -> Outcome {
    let fx = Fixtures::new();
    let started = Instant::now();
    let examples = [
        ex("network_1", "How many high schoolers are there?", "SELECT count(*) FROM Highschooler"),
        ex("network_1", "What is Kyle's id?", "SELECT ID FROM Highschooler WHERE name  =  \"Kyle\""),
        ex("network_1", "Show the names of all high schoolers in grade 10.", "SELECT name FROM Highschooler WHERE grade  =  10"),
        ex("network_1", "How many friendships are there?", "SELECT count(*) FROM Friend"),
        ex("network_1", "What is the highest grade?", "SELECT max(grade) FROM Highschooler"),
    ];
    let answers: HashMap<String, String> = [
        ("How many high schoolers are there?", " count(*) from highschooler;"),
        ("What is Kyle's id?", " id from highschooler where name = 'Kyle';"),
        ("Show the names of all high schoolers in grade 10.", " name from highschooler where grade = 10;"),
        ("How many friendships are there?", " count(*) from likes;"),
        ("What is the highest grade?", " min(grade) from highschooler;"),
    ]
    .into_iter()
    .map(|(q, a)| (q.to_string(), a.to_string()))
    .collect();
    let file = fx.write_examples("dev5.json", &examples);
    let cache = fx.dir.path().join("cache.jsonl");
    let dumps = fx.dir.path().join("prompts");
    let mut config = base_config(&fx, &file, &cache);
    config.dump_prompts = Some(dumps.clone());

    let record = ExperimentConfig {
        policy: sqlprompt_core::gateway::Policy::Record,
        ..config.clone()
    };
    ok(runner::run_experiment(&record, &ok(scripted(answers).for_config(&record), "gateway")?), "record run")?;
    let frozen = fs::read(&cache).map_err(|e| e.to_string())?;

    // Replay gateways carry no provider, so nothing can reach the network.
    let mut artifacts = Vec::new();
    for run in 0..2 {
        let gateways = Gateways::new();
        let report = ok(runner::run_experiment(&config, &ok(gateways.for_config(&config), "gateway")?), "replay run")?;
        for s in &report.seeds {
            ensure(s.accuracy == 0.6, || format!("seed {} accuracy {}", s.seed, s.accuracy))?;
        }
        ensure(report.mean_accuracy == 0.6, || format!("mean accuracy {}", report.mean_accuracy))?;
        let out = fx.dir.path().join(format!("run{run}"));
        ok(runner::emit_report(std::slice::from_ref(&report), ReportFormat::Json, &out.join("report.json")), "json")?;
        ok(runner::emit_report(&[report], ReportFormat::Csv, &out.join("report.csv")), "csv")?;
        artifacts.push((read_tree(&out), read_tree(&dumps)));
    }
    ensure(artifacts[0] == artifacts[1], || "reruns differ".into())?;
    ensure(fs::read(&cache).map_err(|e| e.to_string())? == frozen, || "replay modified the cache".into())?;
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "accuracy 0.6 on every seed; reports and {} prompt dumps byte-identical across reruns in {elapsed:.1?}",
        artifacts[0].1.len()
    ))
}

fn report_structure() -> Outcome {
    let fx = Fixtures::new();
    let tests = fx.write_examples(
        "dev.json",
        &[
            ex("network_1", "How many high schoolers are there?", "SELECT count(*) FROM Highschooler"),
            ex("network_1", "How many friendships are there?", "SELECT count(*) FROM Friend"),
            ex("network_1", "How many likes are there?", "SELECT count(*) FROM Likes"),
            ex("network_1", "What is the highest grade?", "SELECT max(grade) FROM Highschooler"),
            ex("network_1", "What is the lowest grade?", "SELECT min(grade) FROM Highschooler"),
            ex("network_1", "List all names.", "SELECT name FROM Highschooler"),
        ],
    );
    let train = fx.write_examples(
        "train.json",
        &[
            ex("book_2", "How many books are there?", "SELECT count(*) FROM book"),
            ex("book_2", "List the writers.", "SELECT Writer FROM book"),
            ex("race_track", "How many tracks are there?", "SELECT count(*) FROM track"),
            ex("race_track", "List race names.", "SELECT name FROM race"),
        ],
    );
    let cache = fx.dir.path().join("matrix.jsonl");
    let base = ExperimentConfig {
        train_file: Some(train),
        ..base_config(&fx, &tests, &cache)
    };
    let mut cells = Vec::new();
    for mode in [NormalizationMode::Unnormalized, NormalizationMode::Normalized] {
        for schema_format in SchemaFormat::ALL {
            cells.push(ExperimentConfig {
                schema_format,
                content_format: ContentFormat::NoContent,
                mode,
                ..base.clone()
            });
        }
        for content_format in [ContentFormat::InsertRow(3), ContentFormat::SelectRow(3), ContentFormat::SelectCol(3)] {
            cells.push(ExperimentConfig {
                content_format,
                mode,
                ..base.clone()
            });
        }
    }
    for n in [1, 4] {
        cells.push(ExperimentConfig {
            setting: Setting::SingleDomain,
            n,
            ..base.clone()
        });
    }
    for (m, k) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
        cells.push(ExperimentConfig {
            setting: Setting::CrossDomain,
            m,
            k,
            ..base.clone()
        });
    }
    let cells: Vec<ExperimentConfig> = cells.into_iter().map(|c| c.validated()).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    let record: Vec<ExperimentConfig> = cells
        .iter()
        .map(|c| ExperimentConfig {
            policy: sqlprompt_core::gateway::Policy::Record,
            ..c.clone()
        })
        .collect();
    let answers = [("How many high schoolers are there?", " count(*) from highschooler")]
        .into_iter()
        .map(|(q, a)| (q.to_string(), a.to_string()))
        .collect();
    for outcome in runner::run_matrix(&record, &scripted(answers)) {
        ensure(outcome.error.is_none(), || format!("{}: {:?}", outcome.label, outcome.error))?;
    }
    let replayed = runner::run_matrix(&cells, &Gateways::new());
    let reports: Vec<RunReport> = replayed
        .into_iter()
        .map(|o| o.report.ok_or_else(|| format!("{}: {:?}", o.label, o.error)))
        .collect::<Result<_, _>>()?;

    let csv_path = fx.dir.path().join("out").join("matrix.csv");
    ok(runner::emit_report(&reports, ReportFormat::Csv, &csv_path), "csv")?;
    let mut reader = ok(csv::Reader::from_path(&csv_path), "read csv")?;
    let header: Vec<String> = ok(reader.headers(), "header")?.iter().map(String::from).collect();
    let want = ["setting", "schema_format", "content_format", "mode", "N", "M", "K", "seed", "accuracy", "mean_tokens"];
    ensure(header == want, || format!("CSV header {header:?}"))?;
    let rows = reader.records().count();
    ensure(rows == reports.len() * 4, || format!("{rows} CSV rows for {} cells", reports.len()))?;
    let bins = fs::read_to_string(fx.dir.path().join("out").join("matrix.length_bins.csv")).map_err(|e| e.to_string())?;
    ensure(bins.starts_with("construction,mode,setting,N,bin_start,bin_end,examples,accuracy"), || bins.lines().next().unwrap_or("").into())?;

    let zero = tables::zero_shot_table(&reports);
    let want = ["Group", "Construction", "# Tokens (U)", "# Tokens (N)", "EX (U)", "EX (N)"];
    ensure(zero.headers == want, || format!("zero-shot headers {:?}", zero.headers))?;
    ensure(zero.rows.len() == 7, || format!("{} zero-shot rows", zero.rows.len()))?;
    let groups: Vec<&str> = zero.rows.iter().map(|r| r[0].as_str()).collect();
    ensure(
        groups == ["Table Schema", "Table Schema", "+Relationship", "+Relationship", "+Relationship+Content", "+Relationship+Content", "+Relationship+Content"],
        || format!("zero-shot groups {groups:?}"),
    )?;
    ensure(zero.rows.iter().all(|r| r[2..].iter().all(|c| c != "-")), || "zero-shot table has gaps".into())?;

    let single = tables::shots_table(&reports, Setting::SingleDomain, NormalizationMode::Normalized);
    ensure(single.headers == ["Construction", "0-shot", "1-shot", "4-shot"], || format!("single-domain headers {:?}", single.headers))?;
    ensure(single.rows.len() == 1 && single.rows[0][0] == "CreateTable+SelectRow 3", || format!("{:?}", single.rows))?;

    let heat = tables::heatmaps(&reports);
    ensure(heat.len() == 1, || format!("{} heatmaps", heat.len()))?;
    ensure(heat[0].headers == ["M \\ K", "1", "2"] && heat[0].rows.len() == 2, || format!("{heat:?}"))?;
    let scatter = tables::length_scatter(&reports);
    ensure(scatter.rows.len() == 4, || format!("{} scatter points", scatter.rows.len()))?;
    let mc = ok(tables::mcnemar_table(&reports, 0.05), "mcnemar")?;
    ensure(mc.headers[..4] == ["Prompt 1", "Prompt 2", "Model", "Normalization"], || format!("{:?}", mc.headers))?;
    ensure(mc.rows.len() == 2 * 21, || format!("{} McNemar rows", mc.rows.len()))?;
    Ok(format!(
        "{} replayed cells; CSV, length bins, zero-shot, shots, heatmap, length and McNemar tables have the expected shape",
        reports.len()
    ))
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        ("golden prompt fidelity", golden_prompt_fidelity),
        ("figure-level serializers", figure_serializers),
        ("normalization", normalization),
        ("prompt shrinkage", prompt_shrinkage),
        ("sampling protocol", sampling_protocol),
        ("execution-accuracy oracle", ex_oracle),
        ("McNemar", mcnemar),
        ("end-to-end replay", end_to_end_replay),
        ("explicit non-reproduction", report_structure),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match std::panic::catch_unwind(check) {
            Ok(Ok(detail)) => println!("PASS {name}: {detail}"),
            Ok(Err(reason)) => {
                failed += 1;
                println!("FAIL {name}: {reason}");
            }
            Err(_) => {
                failed += 1;
                println!("FAIL {name}: panicked");
            }
        }
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
