//! Linking prompts with the candidate list repeated after the question, and
//! greedy chunking of large schemas under a token budget.

use serde::{Deserialize, Serialize};

use super::{render_tables_ddl, DatabaseSchema, QualifiedColumn, SchemaError, Table};

pub const OPEN_MARKER: char = '\u{00AB}';
pub const CLOSE_MARKER: char = '\u{00BB}';
pub const DEFAULT_TOKEN_BUDGET: usize = 3000;

/// Estimates the token length of a prompt.
pub trait TokenEstimator {
    fn estimate(&self, text: &str) -> usize;
}

impl<F: Fn(&str) -> usize> TokenEstimator for F {
    fn estimate(&self, text: &str) -> usize {
        self(text)
    }
}

/// Counts maximal alphanumeric runs plus every other non-whitespace
/// character. Deterministic and needs no tokenizer assets.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalTokenEstimator;

impl TokenEstimator for LexicalTokenEstimator {
    fn estimate(&self, text: &str) -> usize {
        let mut count = 0;
        let mut in_run = false;
        for c in text.chars() {
            if c.is_alphanumeric() {
                if !in_run {
                    count += 1;
                    in_run = true;
                }
            } else {
                in_run = false;
                if !c.is_whitespace() {
                    count += 1;
                }
            }
        }
        count
    }
}

/// Renders the schema subset, the question and the marker-delimited
/// candidate list. The returned candidates align index-for-index with the
/// marker pairs in the text.
pub fn render_linking_prompt(
    tables: &[Table],
    question: &str,
) -> Result<(String, Vec<QualifiedColumn>), SchemaError> {
    if tables.is_empty() {
        return Err(SchemaError::EmptySubset);
    }
    if let Some(c) = question
        .chars()
        .find(|&c| c == OPEN_MARKER || c == CLOSE_MARKER)
    {
        return Err(SchemaError::MarkerInQuestion(c));
    }
    let candidates: Vec<QualifiedColumn> =
        tables.iter().flat_map(|t| t.qualified_columns()).collect();
    let lines: Vec<String> = tables
        .iter()
        .flat_map(|t| {
            t.columns
                .iter()
                .map(move |c| format!("{OPEN_MARKER} {} {}{CLOSE_MARKER}", t.name, c.name))
        })
        .collect();
    let text = format!(
        "{}\nTo answer:\n{}\nWe need columns:\n{}",
        render_tables_ddl(tables),
        question,
        lines.join("\n")
    );
    Ok((text, candidates))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptChunk {
    pub db_id: String,
    pub tables_included: Vec<String>,
    pub candidates: Vec<QualifiedColumn>,
    pub rendered_text: String,
    pub token_count: usize,
}

/// Splits the schema into prompts by placing tables, in schema order, into
/// the current chunk for as long as the whole rendered chunk stays within
/// `budget`. A table that does not fit on its own is an error.
pub fn chunk_schema(
    schema: &DatabaseSchema,
    question: &str,
    budget: usize,
    estimator: &dyn TokenEstimator,
) -> Result<Vec<PromptChunk>, SchemaError> {
    let make = |tables: &[Table]| -> Result<PromptChunk, SchemaError> {
        let (text, candidates) = render_linking_prompt(tables, question)?;
        Ok(PromptChunk {
            db_id: schema.db_id.clone(),
            tables_included: tables.iter().map(|t| t.name.clone()).collect(),
            candidates,
            token_count: estimator.estimate(&text),
            rendered_text: text,
        })
    };

    let mut chunks = Vec::new();
    let mut current: Vec<Table> = Vec::new();
    let mut current_chunk: Option<PromptChunk> = None;
    for table in &schema.tables {
        current.push(table.clone());
        let candidate = make(&current)?;
        if candidate.token_count <= budget {
            current_chunk = Some(candidate);
            continue;
        }
        current.pop();
        match current_chunk.take() {
            Some(done) => {
                chunks.push(done);
                current.clear();
                current.push(table.clone());
                let alone = make(&current)?;
                if alone.token_count > budget {
                    return Err(SchemaError::TableExceedsBudget {
                        table: table.name.clone(),
                        tokens: alone.token_count,
                        budget,
                    });
                }
                current_chunk = Some(alone);
            }
            None => {
                return Err(SchemaError::TableExceedsBudget {
                    table: table.name.clone(),
                    tokens: candidate.token_count,
                    budget,
                })
            }
        }
    }
    chunks.extend(current_chunk);
    Ok(chunks)
}
