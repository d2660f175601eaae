//! Database schemas: the in-memory model, the Spider `tables.json` loader,
//! DDL rendering/reading and the marker-delimited linking prompt.

mod catalog;
mod ddl;
mod prompt;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use catalog::{load_schema_catalog, parse_schema_catalog};
pub use ddl::{read_ddl, render_ddl, render_tables_ddl};
pub use prompt::{
    chunk_schema, render_linking_prompt, LexicalTokenEstimator, PromptChunk, TokenEstimator,
    CLOSE_MARKER, DEFAULT_TOKEN_BUDGET, OPEN_MARKER,
};

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("malformed schema catalog at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("integrity error in database `{db_id}`: {message}")]
    Integrity { db_id: String, message: String },
    #[error("DDL read error at byte {offset}: {message}")]
    Ddl { offset: usize, message: String },
    #[error("question contains a candidate marker character ({0:?}); markers must be unambiguous")]
    MarkerInQuestion(char),
    #[error("cannot render a linking prompt for an empty table subset")]
    EmptySubset,
    #[error("table `{table}` needs {tokens} tokens on its own, over the budget of {budget}")]
    TableExceedsBudget {
        table: String,
        tokens: usize,
        budget: usize,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Spider column type vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ColumnType {
    Text,
    Number,
    Time,
    Boolean,
    Others,
}

impl ColumnType {
    pub fn as_str(self) -> &'static str {
        match self {
            ColumnType::Text => "TEXT",
            ColumnType::Number => "NUMBER",
            ColumnType::Time => "TIME",
            ColumnType::Boolean => "BOOLEAN",
            ColumnType::Others => "OTHERS",
        }
    }

    /// Maps a catalog type string onto the vocabulary. BIRD-style SQL types
    /// (integer, real, date, ...) are folded onto their Spider counterparts.
    pub fn from_catalog(s: &str) -> ColumnType {
        match s.trim().to_ascii_lowercase().as_str() {
            "text" | "varchar" | "char" | "string" => ColumnType::Text,
            "number" | "integer" | "int" | "real" | "float" | "double" | "numeric"
            | "decimal" | "bigint" => ColumnType::Number,
            "time" | "date" | "datetime" | "timestamp" => ColumnType::Time,
            "boolean" | "bool" => ColumnType::Boolean,
            _ => ColumnType::Others,
        }
    }
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ColumnType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "TEXT" => Ok(ColumnType::Text),
            "NUMBER" => Ok(ColumnType::Number),
            "TIME" => Ok(ColumnType::Time),
            "BOOLEAN" => Ok(ColumnType::Boolean),
            "OTHERS" => Ok(ColumnType::Others),
            other => Err(format!("unknown column type `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub data_type: ColumnType,
}

impl Column {
    pub fn new(name: impl Into<String>, data_type: ColumnType) -> Self {
        Column {
            name: name.into(),
            data_type,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForeignKey {
    pub column: String,
    pub ref_table: String,
    pub ref_column: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub name: String,
    /// Source order. The first column is the fallback column for
    /// table-only references.
    pub columns: Vec<Column>,
    pub primary_keys: Vec<String>,
    pub foreign_keys: Vec<ForeignKey>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: Vec<Column>) -> Self {
        Table {
            name: name.into(),
            columns,
            primary_keys: Vec::new(),
            foreign_keys: Vec::new(),
        }
    }

    pub fn with_primary_key(mut self, column: &str) -> Self {
        self.primary_keys.push(column.to_string());
        self
    }

    pub fn with_foreign_key(mut self, column: &str, ref_table: &str, ref_column: &str) -> Self {
        self.foreign_keys.push(ForeignKey {
            column: column.to_string(),
            ref_table: ref_table.to_string(),
            ref_column: ref_column.to_string(),
        });
        self
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns
            .iter()
            .find(|c| c.name.eq_ignore_ascii_case(name))
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.column(name).is_some()
    }

    pub fn is_primary_key(&self, column: &str) -> bool {
        self.primary_keys
            .iter()
            .any(|k| k.eq_ignore_ascii_case(column))
    }

    pub fn qualified_columns(&self) -> impl Iterator<Item = QualifiedColumn> + '_ {
        self.columns
            .iter()
            .map(move |c| QualifiedColumn::new(&self.name, &c.name))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatabaseSchema {
    pub db_id: String,
    pub tables: Vec<Table>,
}

impl DatabaseSchema {
    /// Builds a schema, canonicalizing identifiers to lower case and checking
    /// the structural invariants.
    pub fn new(db_id: impl Into<String>, tables: Vec<Table>) -> Result<Self, SchemaError> {
        let schema = DatabaseSchema {
            db_id: db_id.into(),
            tables: tables.into_iter().map(canonical_table).collect(),
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables
            .iter()
            .find(|t| t.name.eq_ignore_ascii_case(name))
    }

    pub fn contains(&self, qc: &QualifiedColumn) -> bool {
        self.table(&qc.table)
            .is_some_and(|t| t.has_column(&qc.column))
    }

    /// Every column of every table in schema order.
    pub fn qualified_columns(&self) -> Vec<QualifiedColumn> {
        self.tables
            .iter()
            .flat_map(|t| t.qualified_columns())
            .collect()
    }

    pub fn column_count(&self) -> usize {
        self.tables.iter().map(|t| t.columns.len()).sum()
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        let fail = |message: String| SchemaError::Integrity {
            db_id: self.db_id.clone(),
            message,
        };
        for (i, table) in self.tables.iter().enumerate() {
            if self.tables[..i]
                .iter()
                .any(|t| t.name.eq_ignore_ascii_case(&table.name))
            {
                return Err(fail(format!("duplicate table name `{}`", table.name)));
            }
            if table.columns.is_empty() {
                return Err(fail(format!("table `{}` has no columns", table.name)));
            }
            for (j, col) in table.columns.iter().enumerate() {
                if col.name.trim().is_empty() {
                    return Err(fail(format!("table `{}` has an unnamed column", table.name)));
                }
                if table.columns[..j]
                    .iter()
                    .any(|c| c.name.eq_ignore_ascii_case(&col.name))
                {
                    return Err(fail(format!(
                        "duplicate column `{}` in table `{}`",
                        col.name, table.name
                    )));
                }
            }
            for pk in &table.primary_keys {
                if !table.has_column(pk) {
                    return Err(fail(format!(
                        "primary key `{}.{}` is not a column",
                        table.name, pk
                    )));
                }
            }
            for fk in &table.foreign_keys {
                if !table.has_column(&fk.column) {
                    return Err(fail(format!(
                        "foreign key column `{}.{}` is not a column",
                        table.name, fk.column
                    )));
                }
                let target = QualifiedColumn::new(&fk.ref_table, &fk.ref_column);
                if !self.contains(&target) {
                    return Err(fail(format!(
                        "foreign key `{}.{}` references missing column `{}`",
                        table.name, fk.column, target
                    )));
                }
            }
        }
        Ok(())
    }
}

fn canonical_table(t: Table) -> Table {
    let lower = |s: String| s.trim().to_lowercase();
    let columns: Vec<Column> = t
        .columns
        .into_iter()
        .map(|c| Column {
            name: lower(c.name),
            data_type: c.data_type,
        })
        .collect();
    // Primary keys follow column order so rendering and reading agree.
    let mut primary_keys: Vec<String> = t.primary_keys.into_iter().map(lower).collect();
    primary_keys.sort_by_key(|k| columns.iter().position(|c| &c.name == k));
    primary_keys.dedup();
    Table {
        name: lower(t.name),
        columns,
        primary_keys,
        foreign_keys: t
            .foreign_keys
            .into_iter()
            .map(|fk| ForeignKey {
                column: lower(fk.column),
                ref_table: lower(fk.ref_table),
                ref_column: lower(fk.ref_column),
            })
            .collect(),
    }
}

/// A `table.column` pair in canonical lower-case form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QualifiedColumn {
    pub table: String,
    pub column: String,
}

impl QualifiedColumn {
    pub fn new(table: &str, column: &str) -> Self {
        QualifiedColumn {
            table: table.trim().to_lowercase(),
            column: column.trim().to_lowercase(),
        }
    }
}

impl fmt::Display for QualifiedColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.table, self.column)
    }
}

impl FromStr for QualifiedColumn {
    type Err = String;

    /// Splits on the first `.`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('.') {
            Some((t, c)) if !t.trim().is_empty() && !c.trim().is_empty() => {
                Ok(QualifiedColumn::new(t, c))
            }
            _ => Err(format!("`{s}` is not a qualified column (expected table.column)")),
        }
    }
}

impl Serialize for QualifiedColumn {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for QualifiedColumn {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identifiers_are_lower_cased() {
        let s = DatabaseSchema::new(
            "db",
            vec![Table::new("Singer", vec![Column::new("Singer_ID", ColumnType::Number)])
                .with_primary_key("Singer_ID")],
        )
        .unwrap();
        assert_eq!(s.tables[0].name, "singer");
        assert_eq!(s.tables[0].columns[0].name, "singer_id");
        assert_eq!(s.tables[0].primary_keys, vec!["singer_id"]);
    }

    #[test]
    fn duplicate_table_names_rejected() {
        let t = || Table::new("a", vec![Column::new("x", ColumnType::Text)]);
        let mut second = t();
        second.name = "A".into();
        assert!(matches!(
            DatabaseSchema::new("db", vec![t(), second]),
            Err(SchemaError::Integrity { .. })
        ));
    }

    #[test]
    fn dangling_foreign_key_rejected() {
        let t = Table::new("a", vec![Column::new("x", ColumnType::Text)])
            .with_foreign_key("x", "b", "y");
        assert!(DatabaseSchema::new("db", vec![t]).is_err());
    }

    #[test]
    fn empty_table_rejected() {
        assert!(DatabaseSchema::new("db", vec![Table::new("a", vec![])]).is_err());
    }

    #[test]
    fn qualified_column_parse_and_display() {
        let qc: QualifiedColumn = "Book.Title".parse().unwrap();
        assert_eq!(qc, QualifiedColumn::new("book", "title"));
        assert_eq!(qc.to_string(), "book.title");
        assert!("title".parse::<QualifiedColumn>().is_err());
    }
}
