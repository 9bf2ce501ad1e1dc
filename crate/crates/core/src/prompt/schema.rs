//! Schema serializations.

use crate::catalog::{DatabaseSchema, TableSchema};
use crate::sql::normalize_ddl;

use super::{NormalizationMode, PromptError, Result, SchemaFormat};

/// Renders the schema of every table in `schema`, in catalog order.
pub fn serialize_schema(schema: &DatabaseSchema, format: SchemaFormat, mode: NormalizationMode) -> Result<String> {
    if schema.tables.is_empty() {
        return Err(PromptError::EmptySchema);
    }
    let text = match format {
        SchemaFormat::TableColumns => lines(schema, |t| format!("{}({});", t.name, columns(t))),
        SchemaFormat::ColumnsEq => lines(schema, columns_eq_line),
        SchemaFormat::ColumnsEqFk => format!("{}\n{}", lines(schema, columns_eq_line), foreign_keys_line(schema)),
        SchemaFormat::CreateTable => {
            let statements = schema
                .tables
                .iter()
                .map(|t| create_table(t, mode))
                .collect::<Result<Vec<_>>>()?;
            // Normalization puts a blank line between statements; raw DDL is left as stored.
            let sep = if mode.is_normalized() { "\n\n" } else { "\n" };
            return Ok(statements.join(sep));
        }
    };
    Ok(mode.apply(&text))
}

fn lines(schema: &DatabaseSchema, f: impl Fn(&TableSchema) -> String) -> String {
    schema.tables.iter().map(f).collect::<Vec<_>>().join("\n")
}

fn columns(t: &TableSchema) -> String {
    t.column_names().collect::<Vec<_>>().join(", ")
}

fn columns_eq_line(t: &TableSchema) -> String {
    format!("Table {}, Columns = [{}];", t.name, columns(t))
}

fn foreign_keys_line(schema: &DatabaseSchema) -> String {
    let pairs: Vec<String> = schema
        .tables
        .iter()
        .flat_map(|t| &t.foreign_keys)
        .flat_map(|fk| {
            fk.from_columns
                .iter()
                .zip(&fk.to_columns)
                .map(|(from, to)| format!("{}.{} = {}.{}", fk.from_table, from, fk.to_table, to))
        })
        .collect();
    format!("Foreign_keys = [{}];", pairs.join(", "))
}

/// One `CREATE TABLE` statement ending in `;`.
pub(crate) fn create_table(table: &TableSchema, mode: NormalizationMode) -> Result<String> {
    let raw = match &table.ddl {
        Some(ddl) => ddl.trim_end().trim_end_matches(';').to_string(),
        None => generated_ddl(table),
    };
    if mode.is_normalized() {
        normalize_ddl(&raw).map_err(|source| PromptError::Ddl {
            table: table.name.clone(),
            source,
        })
    } else {
        Ok(format!("{raw};"))
    }
}

/// DDL reconstructed from catalog metadata, for schemas that carry no stored text.
fn generated_ddl(table: &TableSchema) -> String {
    let mut items: Vec<String> = table
        .columns
        .iter()
        .map(|c| {
            if c.declared_type.is_empty() {
                c.name.clone()
            } else {
                format!("{} {}", c.name, c.declared_type)
            }
        })
        .collect();
    if !table.primary_key.is_empty() {
        items.push(format!("primary key ({})", table.primary_key.join(", ")));
    }
    for fk in &table.foreign_keys {
        items.push(format!(
            "foreign key ({}) references {}({})",
            fk.from_columns.join(", "),
            fk.to_table,
            fk.to_columns.join(", ")
        ));
    }
    format!("CREATE TABLE {} (\n{}\n)", table.name, items.join(",\n"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{ColumnDef, ForeignKeyDef};

    fn col(name: &str, ty: &str, ordinal: usize) -> ColumnDef {
        ColumnDef {
            name: name.into(),
            declared_type: ty.into(),
            ordinal,
        }
    }

    fn snippet() -> DatabaseSchema {
        let fk = |c: &str| ForeignKeyDef {
            from_table: "Friend".into(),
            from_columns: vec![c.into()],
            to_table: "Highschooler".into(),
            to_columns: vec!["ID".into()],
        };
        DatabaseSchema {
            db_id: "network_1".into(),
            tables: vec![
                TableSchema {
                    name: "Highschooler".into(),
                    columns: vec![col("ID", "int", 0), col("name", "text", 1), col("grade", "int", 2)],
                    primary_key: vec!["ID".into()],
                    foreign_keys: vec![],
                    ddl: None,
                },
                TableSchema {
                    name: "Friend".into(),
                    columns: vec![col("student_id", "int", 0), col("friend_id", "int", 1)],
                    primary_key: vec!["student_id".into(), "friend_id".into()],
                    foreign_keys: vec![fk("student_id"), fk("friend_id")],
                    ddl: None,
                },
            ],
        }
    }

    #[test]
    fn list_formats() {
        let s = snippet();
        let u = NormalizationMode::Unnormalized;
        assert_eq!(
            serialize_schema(&s, SchemaFormat::TableColumns, u).unwrap(),
            "Highschooler(ID, name, grade);\nFriend(student_id, friend_id);"
        );
        assert_eq!(
            serialize_schema(&s, SchemaFormat::ColumnsEq, NormalizationMode::Normalized).unwrap(),
            "table highschooler, columns = [id, name, grade];\ntable friend, columns = [student_id, friend_id];"
        );
        let fk = serialize_schema(&s, SchemaFormat::ColumnsEqFk, u).unwrap();
        assert!(fk.ends_with(
            "\nForeign_keys = [Friend.student_id = Highschooler.ID, Friend.friend_id = Highschooler.ID];"
        ));
    }

    #[test]
    fn empty_foreign_keys_and_schema() {
        let mut s = snippet();
        s.tables.truncate(1);
        let fk = serialize_schema(&s, SchemaFormat::ColumnsEqFk, NormalizationMode::Unnormalized).unwrap();
        assert!(fk.ends_with("\nForeign_keys = [];"));
        s.tables.clear();
        assert!(matches!(
            serialize_schema(&s, SchemaFormat::TableColumns, NormalizationMode::Unnormalized),
            Err(PromptError::EmptySchema)
        ));
    }

    #[test]
    fn generated_create_table() {
        let s = snippet();
        let n = serialize_schema(&s, SchemaFormat::CreateTable, NormalizationMode::Normalized).unwrap();
        assert_eq!(
            n,
            "create table highschooler (\nid int,\nname text,\ngrade int,\nprimary key (id)\n);\n\n\
             create table friend (\nstudent_id int,\nfriend_id int,\nprimary key (student_id, friend_id),\n\
             foreign key (student_id) references highschooler(id),\nforeign key (friend_id) references highschooler(id)\n);"
        );
    }
}
