//! Name-matching baseline: question n-grams against identifier n-grams.

use super::{ColumnScore, LinkingInstance, PredictionRecord};
use crate::schema::QualifiedColumn;

const MAX_N: usize = 3;
const TABLE_WEIGHT: f64 = 0.5;
const LOGIT_CAP: f64 = 10.0;

/// Lower-cased alphanumeric runs with a crude plural strip, so "titles"
/// meets `title`.
fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| {
            let w = w.to_lowercase();
            if w.len() > 3 && w.ends_with('s') && !w.ends_with("ss") {
                w[..w.len() - 1].to_string()
            } else {
                w
            }
        })
        .collect()
}

fn ngrams(tokens: &[String]) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    for n in 1..=MAX_N.min(tokens.len()) {
        for start in 0..=tokens.len() - n {
            out.push((n, tokens[start..start + n].join(" ")));
        }
    }
    out
}

/// Share of an identifier's n-gram mass found in the question. Each match
/// is discounted by how late its first occurrence is, from 1 at the start
/// of the question down to 1/2 at the end.
fn overlap(question: &[String], q_grams: &[(usize, usize, String)], column: &QualifiedColumn) -> f64 {
    let mut matched = 0.0;
    let mut total = 0.0;
    let len = question.len().max(1) as f64;
    for (ident, weight) in [(&column.column, 1.0), (&column.table, TABLE_WEIGHT)] {
        for (n, gram) in ngrams(&words(ident)) {
            let w = weight * n as f64;
            total += w;
            if let Some((_, pos, _)) = q_grams.iter().find(|(qn, _, g)| *qn == n && *g == gram) {
                matched += w * (1.0 - *pos as f64 / (2.0 * len));
            }
        }
    }
    if total == 0.0 {
        0.0
    } else {
        matched / total
    }
}

fn log_odds(s: f64) -> f64 {
    if s <= 0.0 {
        -LOGIT_CAP
    } else if s >= 1.0 {
        LOGIT_CAP
    } else {
        (s / (1.0 - s)).ln().clamp(-LOGIT_CAP, LOGIT_CAP)
    }
}

/// Coarse record scoring every candidate of the instance's chunk.
pub fn lexical_score(instance: &LinkingInstance) -> PredictionRecord {
    let question = words(&instance.question);
    let mut q_grams = Vec::new();
    for n in 1..=MAX_N.min(question.len()) {
        for start in 0..=question.len() - n {
            q_grams.push((n, start, question[start..start + n].join(" ")));
        }
    }
    let mut record = PredictionRecord::new(&instance.question_id, &instance.db_id);
    for column in &instance.chunk.candidates {
        let s = overlap(&question, &q_grams, column);
        record.scores.insert(column.clone(), ColumnScore::coarse(log_odds(s)));
    }
    record
}
