//! Column scorers and the prediction file format.
//!
//! Every backend produces [`PredictionRecord`]s: a relevance logit per
//! candidate column, plus per-role logits for fine-grained scorers.

mod lexical;
mod oracle;
mod predictions;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lexical::lexical_score;
pub use oracle::{oracle_score, ORACLE_LOGIT};
pub use predictions::{
    load_predictions, merge_records, read_predictions, validate_predictions, write_predictions, ColumnScore,
    PredictionRecord,
};

use crate::schema::{chunk_schema, DatabaseSchema, PromptChunk, SchemaError, TokenEstimator};
use crate::sql::{LabeledExample, SchemaLink};

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("instance `{0}` has no ground-truth labels")]
    MissingLabels(String),
    #[error("rate {name} = {value} is outside [0, 1]")]
    Rate { name: &'static str, value: f64 },
    #[error("prediction file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("question `{question_id}` scores `{column}` twice")]
    DuplicateColumn { question_id: String, column: String },
    #[error("question `{question_id}` appears with databases `{a}` and `{b}`")]
    DbConflict {
        question_id: String,
        a: String,
        b: String,
    },
    #[error("unknown columns in predictions: {}", offenders.join(", "))]
    Validation { offenders: Vec<String> },
    #[error("database `{0}` not in catalog")]
    UnknownDatabase(String),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One prompt to score: a question against one chunk of its schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkingInstance {
    pub question_id: String,
    pub db_id: String,
    pub question: String,
    pub chunk: PromptChunk,
    /// Gold link restricted to this chunk's candidates.
    pub labels: Option<SchemaLink>,
}

impl LinkingInstance {
    pub fn new(question_id: &str, question: &str, chunk: PromptChunk, labels: Option<&SchemaLink>) -> Self {
        let labels = labels.map(|link| {
            let mut restricted = SchemaLink::new(&link.question_id, &link.db_id);
            restricted.entries = link
                .entries
                .iter()
                .filter(|(c, _)| chunk.candidates.contains(c))
                .map(|(c, e)| (c.clone(), *e))
                .collect();
            restricted
        });
        LinkingInstance {
            question_id: question_id.to_string(),
            db_id: chunk.db_id.clone(),
            question: question.to_string(),
            chunk,
            labels,
        }
    }
}

/// Chunks every example's schema under `budget` and attaches its labels.
pub fn build_instances(
    examples: &[LabeledExample],
    catalog: &[DatabaseSchema],
    budget: usize,
    estimator: &dyn TokenEstimator,
) -> Result<Vec<LinkingInstance>, ScorerError> {
    let by_id: HashMap<&str, &DatabaseSchema> = catalog.iter().map(|s| (s.db_id.as_str(), s)).collect();
    let mut out = Vec::new();
    for ex in examples {
        let schema = by_id
            .get(ex.db_id.as_str())
            .ok_or_else(|| ScorerError::UnknownDatabase(ex.db_id.clone()))?;
        for chunk in chunk_schema(schema, &ex.question, budget, estimator)? {
            out.push(LinkingInstance::new(&ex.question_id, &ex.question, chunk, Some(&ex.link)));
        }
    }
    Ok(out)
}
