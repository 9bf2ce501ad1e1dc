//! Prompt layouts for the zero-shot, single-domain and cross-domain settings.

use std::collections::HashMap;

use crate::catalog::{DatabaseContext, TableSample};
use crate::sampler::{DemoGroup, DemonstrationSet};
use crate::sql::normalize_sql_with_schema;

use super::content::serialize_content;
use super::schema::{create_table, serialize_schema};
use super::{ContentFormat, PromptError, PromptSpec, PromptText, Result, SectionLabel, Setting};

pub const INSTRUCTION: &str = "-- Using valid SQLite, answer the following questions for the tables provided above.";

/// The database prompt: schema, plus a content block after each table when the spec asks for one.
pub fn database_prompt(db: &DatabaseContext, spec: &PromptSpec) -> Result<String> {
    spec.validate()?;
    if spec.content_format == ContentFormat::NoContent {
        return serialize_schema(&db.schema, spec.schema_format, spec.mode);
    }
    if db.schema.tables.is_empty() {
        return Err(PromptError::EmptySchema);
    }
    let mut blocks = Vec::with_capacity(db.schema.tables.len());
    for table in &db.schema.tables {
        let sample = match db.content.table(&table.name) {
            Some(s) => s.clone(),
            None => TableSample {
                table: table.name.clone(),
                rows: Vec::new(),
                distinct_values: vec![Vec::new(); table.columns.len()],
            },
        };
        let ddl = create_table(table, spec.mode)?;
        let content = serialize_content(table, &sample, spec.content_format, spec.mode)?;
        blocks.push(if content.is_empty() { ddl } else { format!("{ddl}\n{content}") });
    }
    Ok(blocks.join("\n\n"))
}

fn pairs(group: &DemoGroup, db: &DatabaseContext) -> Result<String> {
    let mut out = String::new();
    for e in &group.examples {
        let sql = normalize_sql_with_schema(&e.sql, Some(&db.schema)).map_err(|source| PromptError::DemoSql {
            sql: e.sql.clone(),
            source,
        })?;
        out.push_str("Question: ");
        out.push_str(&e.nlq);
        out.push('\n');
        out.push_str(sql.as_str());
        out.push('\n');
    }
    Ok(out)
}

fn check_setting(spec: &PromptSpec, test_db: &str, demos: &DemonstrationSet) -> Result<()> {
    let fail = |message: String| {
        Err(PromptError::SettingMismatch {
            setting: spec.setting,
            message,
        })
    };
    match spec.setting {
        Setting::ZeroShot if !demos.is_empty() => fail(format!("{} demonstrations given", demos.len())),
        Setting::ZeroShot => Ok(()),
        _ if demos.is_empty() => fail("no demonstrations given".into()),
        Setting::SingleDomain => match demos.groups.iter().find(|g| g.db_id != test_db) {
            Some(g) => fail(format!("demonstrations from {} for test database {test_db}", g.db_id)),
            None => Ok(()),
        },
        Setting::CrossDomain => {
            if demos.groups.iter().any(|g| g.db_id == test_db) {
                return fail(format!("demonstrations drawn from the test database {test_db}"));
            }
            match demos.groups.iter().find(|g| g.examples.iter().any(|e| e.db_id != g.db_id)) {
                Some(g) => fail(format!("group {} holds examples of another database", g.db_id)),
                None => Ok(()),
            }
        }
    }
}

/// Builds the full prompt. `demo_dbs` supplies the database context of every
/// cross-domain demonstration group; it is not consulted otherwise.
pub fn assemble_prompt(
    spec: &PromptSpec,
    test_db: &DatabaseContext,
    test_nlq: &str,
    demos: &DemonstrationSet,
    demo_dbs: &HashMap<String, DatabaseContext>,
) -> Result<PromptText> {
    spec.validate()?;
    check_setting(spec, &test_db.schema.db_id, demos)?;
    let mut prompt = PromptText {
        text: String::new(),
        sections: Vec::new(),
    };
    let instruction = format!("{INSTRUCTION}\n\n");

    if spec.setting == Setting::CrossDomain {
        for group in demos.groups.iter().filter(|g| !g.examples.is_empty()) {
            let db = demo_dbs
                .get(&group.db_id)
                .ok_or_else(|| PromptError::UnknownDemoDatabase(group.db_id.clone()))?;
            prompt.push(SectionLabel::DemoDatabase, &format!("{}\n\n", database_prompt(db, spec)?));
            prompt.push(SectionLabel::Instruction, &instruction);
            prompt.push(SectionLabel::DemoExamples, &format!("{}\n", pairs(group, db)?));
        }
    }

    prompt.push(SectionLabel::TestDatabase, &format!("{}\n\n", database_prompt(test_db, spec)?));
    prompt.push(SectionLabel::Instruction, &instruction);
    if spec.setting == Setting::SingleDomain {
        let mut text = String::new();
        for group in &demos.groups {
            text.push_str(&pairs(group, test_db)?);
        }
        prompt.push(SectionLabel::DemoExamples, &text);
    }
    prompt.push(SectionLabel::Question, &format!("Question: {test_nlq}\n{}", spec.mode.cue()));
    Ok(prompt)
}
