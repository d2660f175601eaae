use std::path::Path;

use serde::Deserialize;

use super::{Column, ColumnType, DatabaseSchema, ForeignKey, SchemaError, Table};

#[derive(Deserialize)]
struct RawSchema {
    db_id: String,
    table_names_original: Vec<String>,
    column_names_original: Vec<(i64, String)>,
    column_types: Vec<String>,
    #[serde(default)]
    primary_keys: Vec<RawKey>,
    #[serde(default)]
    foreign_keys: Vec<(usize, usize)>,
}

/// BIRD lists composite primary keys as nested arrays.
#[derive(Deserialize)]
#[serde(untagged)]
enum RawKey {
    Single(usize),
    Composite(Vec<usize>),
}

pub fn load_schema_catalog(path: impl AsRef<Path>) -> Result<Vec<DatabaseSchema>, SchemaError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| SchemaError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_schema_catalog(&text)
}

/// Parses the contents of a Spider/BIRD `tables.json` file.
pub fn parse_schema_catalog(text: &str) -> Result<Vec<DatabaseSchema>, SchemaError> {
    let raw: Vec<RawSchema> = serde_json::from_str(text).map_err(|e| SchemaError::Parse {
        offset: byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    })?;
    raw.into_iter().map(resolve).collect()
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line - 1)
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

fn resolve(raw: RawSchema) -> Result<DatabaseSchema, SchemaError> {
    let db_id = raw.db_id.clone();
    let fail = |message: String| SchemaError::Integrity {
        db_id: db_id.clone(),
        message,
    };
    if raw.column_types.len() != raw.column_names_original.len() {
        return Err(fail(format!(
            "{} column types for {} columns",
            raw.column_types.len(),
            raw.column_names_original.len()
        )));
    }

    let mut tables: Vec<Table> = raw
        .table_names_original
        .iter()
        .map(|name| Table::new(name.as_str(), Vec::new()))
        .collect();
    // (table index, column name) for every catalog column index, `*` included.
    let mut locations: Vec<Option<(usize, String)>> = Vec::with_capacity(raw.column_names_original.len());
    for ((table_idx, name), ty) in raw.column_names_original.iter().zip(&raw.column_types) {
        if *table_idx < 0 {
            locations.push(None);
            continue;
        }
        let t = *table_idx as usize;
        let table = tables
            .get_mut(t)
            .ok_or_else(|| fail(format!("column `{name}` refers to table index {t}")))?;
        table
            .columns
            .push(Column::new(name.as_str(), ColumnType::from_catalog(ty)));
        locations.push(Some((t, name.clone())));
    }

    let lookup = |idx: usize| -> Result<&(usize, String), SchemaError> {
        locations
            .get(idx)
            .and_then(Option::as_ref)
            .ok_or_else(|| fail(format!("key refers to column index {idx}, which does not exist")))
    };

    for key in &raw.primary_keys {
        let members = match key {
            RawKey::Single(i) => vec![*i],
            RawKey::Composite(v) => v.clone(),
        };
        for idx in members {
            let (t, name) = lookup(idx)?;
            tables[*t].primary_keys.push(name.clone());
        }
    }
    for &(from, to) in &raw.foreign_keys {
        let (t, name) = lookup(from)?;
        let (rt, rname) = lookup(to)?;
        let ref_table = tables[*rt].name.clone();
        tables[*t].foreign_keys.push(ForeignKey {
            column: name.clone(),
            ref_table,
            ref_column: rname.clone(),
        });
    }

    DatabaseSchema::new(raw.db_id, tables)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::QualifiedColumn;

    const CAR: &str = r#"[{
        "db_id": "car_1",
        "table_names_original": ["continents", "car_makers", "model_list"],
        "column_names_original": [[-1, "*"], [0, "ContId"], [0, "Continent"],
            [1, "Id"], [1, "Maker"], [1, "FullName"], [1, "Country"],
            [2, "ModelId"], [2, "Maker"], [2, "Model"]],
        "column_types": ["text", "number", "text", "number", "text", "text", "text",
            "number", "number", "text"],
        "primary_keys": [1, 3, 7],
        "foreign_keys": [[8, 3]]
    }]"#;

    #[test]
    fn loads_car_makers_and_model_list() {
        let schemas = parse_schema_catalog(CAR).unwrap();
        assert_eq!(schemas.len(), 1);
        let s = &schemas[0];
        assert_eq!(s.db_id, "car_1");
        let makers = s.table("car_makers").unwrap();
        assert_eq!(
            makers.columns.iter().map(|c| c.name.as_str()).collect::<Vec<_>>(),
            ["id", "maker", "fullname", "country"]
        );
        assert!(makers.is_primary_key("id"));
        let models = s.table("model_list").unwrap();
        assert!(models.has_column("maker"));
        assert_eq!(models.foreign_keys[0].ref_table, "car_makers");
        assert_eq!(models.foreign_keys[0].ref_column, "id");
        assert!(!s.contains(&QualifiedColumn::new("car_makers", "*")));
    }

    #[test]
    fn empty_array_is_empty_catalog() {
        assert!(parse_schema_catalog("[]").unwrap().is_empty());
    }

    #[test]
    fn dangling_foreign_key_index_is_integrity_error() {
        let bad = CAR.replace("[[8, 3]]", "[[8, 42]]");
        match parse_schema_catalog(&bad) {
            Err(SchemaError::Integrity { db_id, .. }) => assert_eq!(db_id, "car_1"),
            other => panic!("expected integrity error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_json_reports_offset() {
        let text = "[{\"db_id\": \"x\",\n  oops}]";
        match parse_schema_catalog(text) {
            Err(SchemaError::Parse { offset, .. }) => assert_eq!(&text[offset..offset + 1], "o"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn composite_primary_key_entries() {
        let text = CAR.replace("[1, 3, 7]", "[1, [3, 4], 7]");
        let s = &parse_schema_catalog(&text).unwrap()[0];
        let makers = s.table("car_makers").unwrap();
        assert!(makers.is_primary_key("id") && makers.is_primary_key("maker"));
    }
}
