//! Focused schemas: the thresholded sub-schema and role block handed to SQL
//! generation, plus noise injection for generation training data.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::head::sigmoid;
use crate::rng::substream;
use crate::schema::{render_tables_ddl, DatabaseSchema, QualifiedColumn, Table};
use crate::scorers::PredictionRecord;
use crate::sql::{LinkEntry, Role, SchemaLink};

pub const DEFAULT_ROLE_THRESHOLD: f64 = -3.0;
pub const DEFAULT_RELEVANCE_THRESHOLD: f64 = -3.0;

#[derive(Debug, Error, PartialEq)]
pub enum FocusError {
    #[error("sample row for `{table}` has {found} values but {expected} columns are retained")]
    Arity {
        table: String,
        expected: usize,
        found: usize,
    },
    #[error("noise rate {0} is outside [0, 1]")]
    Rate(f64),
    #[error("threshold {name} must be finite, got {value}")]
    Threshold { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FocusPolicy {
    pub relevance_threshold: f64,
    pub role_threshold: f64,
    pub include_sample_rows: bool,
    pub rows_per_table: usize,
    /// Lines placed before and after the role block.
    pub role_block_delimiters: Option<(String, String)>,
}

impl Default for FocusPolicy {
    fn default() -> Self {
        FocusPolicy {
            relevance_threshold: DEFAULT_RELEVANCE_THRESHOLD,
            role_threshold: DEFAULT_ROLE_THRESHOLD,
            include_sample_rows: false,
            rows_per_table: 1,
            role_block_delimiters: None,
        }
    }
}

impl FocusPolicy {
    pub fn validate(&self) -> Result<(), FocusError> {
        for (name, value) in [
            ("relevance_threshold", self.relevance_threshold),
            ("role_threshold", self.role_threshold),
        ] {
            if !value.is_finite() {
                return Err(FocusError::Threshold { name, value });
            }
        }
        Ok(())
    }
}

/// Per-role column lists in role order, best first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RoleBlock {
    pub lines: Vec<(Role, Vec<QualifiedColumn>)>,
}

impl RoleBlock {
    /// The block a perfect linker would produce: gold columns per role in
    /// name order.
    pub fn from_link(link: &SchemaLink) -> Self {
        RoleBlock {
            lines: Role::ALL
                .iter()
                .map(|&r| (r, link.with_role(r).into_iter().cloned().collect()))
                .collect(),
        }
    }

    pub fn columns(&self, role: Role) -> &[QualifiedColumn] {
        self.lines
            .iter()
            .find(|(r, _)| *r == role)
            .map_or(&[], |(_, c)| c.as_slice())
    }

    pub fn render(&self) -> String {
        self.lines
            .iter()
            .map(|(role, cols)| {
                let list = if cols.is_empty() {
                    "None".to_string()
                } else {
                    cols.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
                };
                format!("{role}: {list}")
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FocusedSchema {
    pub db_id: String,
    pub question_id: String,
    /// Schema-ordered tables cut down to retained columns and keys.
    pub retained: Vec<Table>,
    /// Absent for coarse predictions.
    pub role_block: Option<RoleBlock>,
    pub question: String,
    pub sample_rows: BTreeMap<String, Vec<Vec<Value>>>,
    pub role_block_delimiters: Option<(String, String)>,
    /// Set when nothing cleared the threshold.
    pub empty: bool,
}

impl FocusedSchema {
    pub fn retained_columns(&self) -> BTreeSet<QualifiedColumn> {
        self.retained.iter().flat_map(|t| t.qualified_columns()).collect()
    }
}

/// Cutoff on the relevance score, in logit or probability space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Logit(f64),
    Probability(f64),
}

/// Columns whose relevance clears the threshold.
pub fn retained_by(record: &PredictionRecord, threshold: Threshold) -> BTreeSet<QualifiedColumn> {
    record
        .scores
        .iter()
        .filter(|(_, s)| match threshold {
            Threshold::Logit(t) => s.relevant >= t,
            Threshold::Probability(p) => sigmoid(s.relevant) >= p,
        })
        .map(|(c, _)| c.clone())
        .collect()
}

/// Keeps columns with relevance logit at or above the policy threshold.
/// Infinite thresholds are accepted here (keep all, keep none).
pub fn apply_threshold(
    record: &PredictionRecord,
    schema: &DatabaseSchema,
    question: &str,
    policy: &FocusPolicy,
) -> FocusedSchema {
    let keep = retained_by(record, Threshold::Logit(policy.relevance_threshold));
    let kept = |t: &str, c: &str| keep.contains(&QualifiedColumn::new(t, c));
    let retained: Vec<Table> = schema
        .tables
        .iter()
        .filter_map(|t| {
            let columns: Vec<_> = t.columns.iter().filter(|c| kept(&t.name, &c.name)).cloned().collect();
            if columns.is_empty() {
                return None;
            }
            Some(Table {
                name: t.name.clone(),
                columns,
                primary_keys: t.primary_keys.iter().filter(|k| kept(&t.name, k)).cloned().collect(),
                foreign_keys: t
                    .foreign_keys
                    .iter()
                    .filter(|fk| kept(&t.name, &fk.column) && kept(&fk.ref_table, &fk.ref_column))
                    .cloned()
                    .collect(),
            })
        })
        .collect();

    let role_block = record.is_fine().then(|| RoleBlock {
        lines: Role::ALL
            .iter()
            .map(|&role| {
                let mut cols: Vec<(f64, &QualifiedColumn)> = record
                    .scores
                    .iter()
                    .filter(|(c, _)| keep.contains(*c))
                    .filter_map(|(c, s)| s.role(role).map(|z| (z, c)))
                    .filter(|(z, _)| *z >= policy.role_threshold)
                    .collect();
                cols.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
                (role, cols.into_iter().map(|(_, c)| c.clone()).collect())
            })
            .collect(),
    });

    FocusedSchema {
        db_id: schema.db_id.clone(),
        question_id: record.question_id.clone(),
        empty: retained.is_empty(),
        retained,
        role_block,
        question: question.to_string(),
        sample_rows: BTreeMap::new(),
        role_block_delimiters: policy.role_block_delimiters.clone(),
    }
}

fn sql_literal(v: &Value) -> String {
    match v {
        Value::Null => "NULL".into(),
        Value::Bool(b) => if *b { "TRUE" } else { "FALSE" }.into(),
        Value::Number(n) => n.to_string(),
        Value::String(s) => format!("'{}'", s.replace('\'', "''")),
        other => format!("'{}'", other.to_string().replace('\'', "''")),
    }
}

/// DDL (with sample-row comments), the role block, then the question,
/// separated by blank lines.
pub fn render_focused_prompt(fs: &FocusedSchema) -> String {
    let mut parts = Vec::new();
    if !fs.retained.is_empty() {
        let blocks: Vec<String> = fs
            .retained
            .iter()
            .map(|t| {
                let mut block = render_tables_ddl(std::slice::from_ref(t));
                for row in fs.sample_rows.get(&t.name).into_iter().flatten() {
                    let values: Vec<String> = row.iter().map(sql_literal).collect();
                    block.push_str(&format!("\n-- sample row: {}", values.join(", ")));
                }
                block
            })
            .collect();
        parts.push(blocks.join("\n\n"));
    }
    if let Some(block) = &fs.role_block {
        let body = block.render();
        parts.push(match &fs.role_block_delimiters {
            Some((open, close)) => format!("{open}\n{body}\n{close}"),
            None => body,
        });
    }
    parts.push(fs.question.clone());
    parts.join("\n\n")
}

/// Embeds up to `rows_per_table` rows per retained table. Rows must list
/// exactly the retained columns; tables that were dropped are skipped.
pub fn attach_sample_rows(
    mut fs: FocusedSchema,
    rows: &BTreeMap<String, Vec<Vec<Value>>>,
    rows_per_table: usize,
) -> Result<FocusedSchema, FocusError> {
    for table in &fs.retained {
        let Some(table_rows) = rows.get(&table.name) else {
            continue;
        };
        for row in table_rows {
            if row.len() != table.columns.len() {
                return Err(FocusError::Arity {
                    table: table.name.clone(),
                    expected: table.columns.len(),
                    found: row.len(),
                });
            }
        }
        let take: Vec<_> = table_rows.iter().take(rows_per_table).cloned().collect();
        if !take.is_empty() {
            fs.sample_rows.insert(table.name.clone(), take);
        }
    }
    Ok(fs)
}

/// Number of distractors added for a pool of `pool` non-gold columns.
pub fn noise_count(rate: f64, pool: usize) -> usize {
    (rate * pool as f64 + 0.5).floor() as usize
}

/// Adds `⌊rate·|D| + 0.5⌋` columns drawn without replacement from the
/// non-gold columns `D`, flagged as noise with no roles.
pub fn inject_noise(link: &SchemaLink, schema: &DatabaseSchema, rate: f64, seed: u64) -> Result<SchemaLink, FocusError> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(FocusError::Rate(rate));
    }
    let pool: Vec<QualifiedColumn> = schema
        .qualified_columns()
        .into_iter()
        .filter(|c| !link.contains(c))
        .collect();
    let k = noise_count(rate, pool.len()).min(pool.len());
    let mut rng = substream(seed, &["noise", &link.question_id]);
    let mut out = link.clone();
    for i in sample(&mut rng, pool.len(), k) {
        out.entries.insert(
            pool[i].clone(),
            LinkEntry {
                noise: true,
                ..Default::default()
            },
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::head::Granularity;
    use crate::schema::fixtures::book_publication;
    use crate::schema::{chunk_schema, LexicalTokenEstimator};
    use crate::scorers::{oracle_score, ColumnScore, LinkingInstance};
    use crate::sql::extract_ground_truth;

    const QUESTION: &str = "Show the titles of books in descending order of publication price.";

    fn gold() -> SchemaLink {
        extract_ground_truth(
            "SELECT title FROM book JOIN publication ON book.book_id = publication.book_id ORDER BY price DESC",
            &book_publication(),
        )
        .unwrap()
    }

    fn oracle(granularity: Granularity) -> PredictionRecord {
        let chunk = chunk_schema(&book_publication(), QUESTION, 3000, &LexicalTokenEstimator)
            .unwrap()
            .remove(0);
        let inst = LinkingInstance::new("q", QUESTION, chunk, Some(&gold()));
        oracle_score(&inst, 0.0, 0.0, 0, granularity).unwrap()
    }

    #[test]
    fn oracle_focus_matches_gold_role_block() {
        let fs = apply_threshold(&oracle(Granularity::Fine), &book_publication(), QUESTION, &FocusPolicy::default());
        let names: Vec<String> = fs.retained_columns().iter().map(ToString::to_string).collect();
        assert_eq!(
            names,
            vec!["book.book_id", "book.title", "publication.book_id", "publication.price"]
        );
        let block = fs.role_block.as_ref().unwrap();
        assert_eq!(block, &RoleBlock::from_link(&gold()));
        assert_eq!(
            block.render(),
            "selected: book.title\njoin: book.book_id, publication.book_id\ncondition: None\n\
             order: publication.price\ngroup: None"
        );
        // publication_id is gone, so is publication's PRIMARY KEY line.
        let publication = &fs.retained[0];
        assert!(publication.primary_keys.is_empty());
        assert_eq!(publication.foreign_keys.len(), 1);
    }

    #[test]
    fn infinite_thresholds() {
        let r = oracle(Granularity::Fine);
        let all = FocusPolicy {
            relevance_threshold: f64::NEG_INFINITY,
            ..Default::default()
        };
        assert_eq!(apply_threshold(&r, &book_publication(), QUESTION, &all).retained_columns().len(), 9);
        let none = FocusPolicy {
            relevance_threshold: f64::INFINITY,
            ..Default::default()
        };
        let fs = apply_threshold(&r, &book_publication(), QUESTION, &none);
        assert!(fs.empty);
        let text = render_focused_prompt(&fs);
        assert!(!text.contains("CREATE TABLE"));
        assert!(text.starts_with("selected: None\njoin: None"));
        assert!(none.validate().is_err());
    }

    #[test]
    fn coarse_has_no_role_block() {
        let fs = apply_threshold(&oracle(Granularity::Coarse), &book_publication(), QUESTION, &FocusPolicy::default());
        let text = render_focused_prompt(&fs);
        assert!(!text.contains("selected:"));
        assert!(text.ends_with(&format!("title TEXT );\n\n{QUESTION}")));
    }

    #[test]
    fn role_ties_break_by_name_and_scores_order() {
        let mut r = PredictionRecord::new("q", "book_2");
        let fine = |sel: f64| ColumnScore::fine(0.0, [sel, -9.0, -9.0, -9.0, -9.0]);
        r.scores.insert("book.writer".parse().unwrap(), fine(-1.0));
        r.scores.insert("book.title".parse().unwrap(), fine(2.0));
        r.scores.insert("book.issues".parse().unwrap(), fine(-1.0));
        r.scores.insert("book.book_id".parse().unwrap(), fine(-3.5));
        let fs = apply_threshold(&r, &book_publication(), QUESTION, &FocusPolicy::default());
        let sel: Vec<String> = fs.role_block.unwrap().columns(Role::Selected).iter().map(ToString::to_string).collect();
        assert_eq!(sel, vec!["book.title", "book.issues", "book.writer"]);
    }

    #[test]
    fn delimiters_wrap_block() {
        let policy = FocusPolicy {
            role_block_delimiters: Some(("[roles]".into(), "[/roles]".into())),
            ..Default::default()
        };
        let fs = apply_threshold(&oracle(Granularity::Fine), &book_publication(), QUESTION, &policy);
        assert!(render_focused_prompt(&fs).contains("[roles]\nselected: book.title"));
    }

    #[test]
    fn sample_rows() {
        let fs = apply_threshold(&oracle(Granularity::Fine), &book_publication(), QUESTION, &FocusPolicy::default());
        let plain = render_focused_prompt(&fs);
        let same = attach_sample_rows(fs.clone(), &BTreeMap::new(), 1).unwrap();
        assert_eq!(render_focused_prompt(&same), plain);

        let mut rows = BTreeMap::new();
        rows.insert("book".to_string(), vec![vec![Value::from(1), Value::from("Bo'ok")]]);
        rows.insert("publication".to_string(), vec![vec![Value::from(1), Value::from(9.5)]]);
        let with = attach_sample_rows(fs.clone(), &rows, 1).unwrap();
        let text = render_focused_prompt(&with);
        assert!(text.contains("REFERENCES book(book_id) );\n-- sample row: 1, 9.5\n\nCREATE TABLE book"));
        assert!(text.contains("title TEXT );\n-- sample row: 1, 'Bo''ok'\n\nselected:"));

        rows.insert("book".to_string(), vec![vec![Value::from(1), Value::from("x"), Value::from(3)]]);
        assert_eq!(
            attach_sample_rows(fs, &rows, 1).unwrap_err(),
            FocusError::Arity {
                table: "book".into(),
                expected: 2,
                found: 3
            }
        );
    }

    #[test]
    fn noise_counts() {
        assert_eq!(noise_count(0.2, 10), 2);
        assert_eq!(noise_count(0.25, 10), 3);
        assert_eq!(noise_count(0.0, 10), 0);
        assert_eq!(noise_count(1.0, 10), 10);
        let schema = book_publication();
        let link = gold();
        let noisy = inject_noise(&link, &schema, 0.2, 5).unwrap();
        assert_eq!(noisy.len(), 5);
        for (c, e) in &link.entries {
            assert_eq!(noisy.entries[c], *e);
        }
        assert_eq!(inject_noise(&link, &schema, 0.0, 5).unwrap(), link);
        assert_eq!(inject_noise(&link, &schema, 1.0, 5).unwrap().len(), 9);
        assert!(inject_noise(&link, &schema, 1.1, 5).is_err());
    }
}
