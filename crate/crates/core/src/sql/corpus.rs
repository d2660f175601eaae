//! Whole-dataset extraction for Spider and BIRD example files.

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::analysis::{analyze, AnalysisNote};
use super::link::SchemaLink;
use super::SqlError;
use crate::schema::DatabaseSchema;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub question_id: String,
    pub db_id: String,
    pub question: String,
    pub sql: String,
    pub link: SchemaLink,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowFailure {
    pub row: usize,
    pub question_id: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowNote {
    pub row: usize,
    pub question_id: String,
    pub note: AnalysisNote,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ExtractionReport {
    pub total_rows: usize,
    pub extracted: usize,
    pub fallback_rows: usize,
    pub failures: Vec<RowFailure>,
    pub notes: Vec<RowNote>,
}

impl ExtractionReport {
    pub fn success_rate(&self) -> f64 {
        if self.total_rows == 0 {
            1.0
        } else {
            self.extracted as f64 / self.total_rows as f64
        }
    }
}

/// Reads a dataset file as a JSON array of row objects.
pub fn load_dataset(path: &Path) -> Result<Vec<Value>, SqlError> {
    let err = |message: String| SqlError::Dataset {
        path: path.display().to_string(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    match serde_json::from_str(&text).map_err(|e| err(e.to_string()))? {
        Value::Array(rows) => Ok(rows),
        _ => Err(err("expected a JSON array of examples".into())),
    }
}

/// Extracts every row; rows that fail are listed in the report. Only an
/// unreadable file is an error.
pub fn extract_corpus(
    dataset_path: &Path,
    catalog: &[DatabaseSchema],
) -> Result<(Vec<LabeledExample>, ExtractionReport), SqlError> {
    let rows = load_dataset(dataset_path)?;
    Ok(extract_rows(&rows, catalog))
}

pub(crate) fn extract_rows(rows: &[Value], catalog: &[DatabaseSchema]) -> (Vec<LabeledExample>, ExtractionReport) {
    let by_id: HashMap<&str, &DatabaseSchema> = catalog.iter().map(|s| (s.db_id.as_str(), s)).collect();
    let results: Vec<_> = rows
        .par_iter()
        .enumerate()
        .map(|(idx, row)| extract_row(idx, row, &by_id))
        .collect();

    let mut examples = Vec::new();
    let mut report = ExtractionReport {
        total_rows: rows.len(),
        ..Default::default()
    };
    for (idx, result) in results.into_iter().enumerate() {
        match result {
            Ok((example, notes)) => {
                if example.link.entries.values().any(|e| e.fallback) {
                    report.fallback_rows += 1;
                }
                report.notes.extend(notes.into_iter().map(|note| RowNote {
                    row: idx,
                    question_id: example.question_id.clone(),
                    note,
                }));
                examples.push(example);
            }
            Err(failure) => report.failures.push(failure),
        }
    }
    report.extracted = examples.len();
    (examples, report)
}

fn extract_row(
    idx: usize,
    row: &Value,
    catalog: &HashMap<&str, &DatabaseSchema>,
) -> Result<(LabeledExample, Vec<AnalysisNote>), RowFailure> {
    let question_id = match row.get("question_id") {
        Some(Value::String(s)) => Some(s.clone()),
        Some(Value::Number(n)) => Some(n.to_string()),
        _ => None,
    };
    let fail = |reason: String| RowFailure {
        row: idx,
        question_id: question_id.clone(),
        reason,
    };
    let field = |names: &[&str]| {
        names
            .iter()
            .find_map(|n| row.get(*n).and_then(Value::as_str))
            .map(str::to_string)
    };
    let question = field(&["question"]).ok_or_else(|| fail("missing `question`".into()))?;
    let sql = field(&["query", "SQL", "sql"]).ok_or_else(|| fail("missing `query`/`SQL`".into()))?;
    let db_id = field(&["db_id"]).ok_or_else(|| fail("missing `db_id`".into()))?;
    let schema = catalog
        .get(db_id.as_str())
        .ok_or_else(|| fail(format!("database `{db_id}` not in catalog")))?;
    let analysis = analyze(&sql, schema).map_err(|e| fail(e.to_string()))?;
    let question_id = question_id.clone().unwrap_or_else(|| idx.to_string());
    let mut link = analysis.link;
    link.question_id = question_id.clone();
    Ok((
        LabeledExample {
            question_id,
            db_id,
            question,
            sql,
            link,
        },
        analysis.notes,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::fixtures::book_publication;
    use serde_json::json;

    #[test]
    fn malformed_row_is_reported_not_thrown() {
        let rows = vec![
            json!({"question": "Titles?", "query": "SELECT title FROM book", "db_id": "book_2"}),
            json!({"question": "Broken", "query": "SELECT FROM WHERE", "db_id": "book_2"}),
        ];
        let (examples, report) = extract_rows(&rows, &[book_publication()]);
        assert_eq!(examples.len(), 1);
        assert_eq!(examples[0].question_id, "0");
        assert_eq!(report.failures.len(), 1);
        assert_eq!(report.failures[0].row, 1);
        assert!(report.failures[0].reason.contains("syntax"));
    }

    #[test]
    fn bird_layout_and_explicit_ids() {
        let rows = vec![json!({
            "question_id": 17, "question": "Cheapest?", "SQL": "SELECT MIN(price) FROM publication",
            "db_id": "book_2", "evidence": "ignored"
        })];
        let (examples, report) = extract_rows(&rows, &[book_publication()]);
        assert!(report.failures.is_empty());
        assert_eq!(examples[0].question_id, "17");
        assert_eq!(examples[0].link.len(), 1);
    }

    #[test]
    fn unknown_database_fails_row() {
        let rows = vec![json!({"question": "q", "query": "SELECT 1", "db_id": "nope"})];
        let (_, report) = extract_rows(&rows, &[book_publication()]);
        assert!(report.failures[0].reason.contains("nope"));
    }

    #[test]
    fn notes_carry_row_identity() {
        let rows = vec![json!({
            "question": "q",
            "query": "SELECT title FROM book, publication WHERE book.book_id = publication.book_id",
            "db_id": "book_2"
        })];
        let (_, report) = extract_rows(&rows, &[book_publication()]);
        assert_eq!(report.notes.len(), 1);
        assert!(matches!(report.notes[0].note, AnalysisNote::WhereEquiJoin { .. }));
    }
}
