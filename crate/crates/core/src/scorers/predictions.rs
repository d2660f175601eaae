//! Line-delimited prediction records:
//!
//! ```text
//! {"question_id": "..", "db_id": "..", "scores": {"table.column": {"relevant": -1.2, "selected": .., ...}}}
//! ```
//!
//! Role keys are optional but come as a complete set of five.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ScorerError;
use crate::head::{reduce_relevance, RelevanceReduction, ScoreSet};
use crate::schema::{DatabaseSchema, QualifiedColumn};
use crate::sql::Role;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnScore {
    pub relevant: f64,
    /// Logits in role order: selected, join, condition, order, group.
    pub roles: Option<[f64; 5]>,
}

impl ColumnScore {
    pub fn coarse(relevant: f64) -> Self {
        ColumnScore { relevant, roles: None }
    }

    pub fn fine(relevant: f64, roles: [f64; 5]) -> Self {
        ColumnScore {
            relevant,
            roles: Some(roles),
        }
    }

    pub fn role(&self, role: Role) -> Option<f64> {
        self.roles.map(|r| r[role.index()])
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictionRecord {
    pub question_id: String,
    pub db_id: String,
    pub scores: BTreeMap<QualifiedColumn, ColumnScore>,
}

impl PredictionRecord {
    pub fn new(question_id: impl Into<String>, db_id: impl Into<String>) -> Self {
        PredictionRecord {
            question_id: question_id.into(),
            db_id: db_id.into(),
            scores: BTreeMap::new(),
        }
    }

    /// True when every column carries role logits.
    pub fn is_fine(&self) -> bool {
        !self.scores.is_empty() && self.scores.values().all(|s| s.roles.is_some())
    }

    pub fn relevance(&self, column: &QualifiedColumn) -> Option<f64> {
        self.scores.get(column).map(|s| s.relevant)
    }

    /// Converts head output; the score set must name its candidates.
    pub fn from_score_set<T: Scalar>(
        question_id: &str,
        db_id: &str,
        scores: &ScoreSet<T>,
        reduction: RelevanceReduction,
    ) -> Result<Self, ScorerError> {
        if scores.candidates.len() != scores.len() {
            return Err(ScorerError::Format {
                line: 0,
                message: format!(
                    "score set has {} rows but {} candidate names",
                    scores.len(),
                    scores.candidates.len()
                ),
            });
        }
        let relevance = reduce_relevance(&scores.logits, reduction);
        let f = |v: T| v.to_f64().unwrap_or(f64::NAN);
        let mut record = PredictionRecord::new(question_id, db_id);
        for (i, column) in scores.candidates.iter().enumerate() {
            let row = scores.logits.row(i);
            let score = if row.len() == Role::ALL.len() {
                ColumnScore::fine(f(relevance[i]), std::array::from_fn(|k| f(row[k])))
            } else {
                ColumnScore::coarse(f(relevance[i]))
            };
            record.scores.insert(column.clone(), score);
        }
        Ok(record)
    }

    pub fn to_json_line(&self) -> String {
        let scores = self
            .scores
            .iter()
            .map(|(c, s)| {
                let r = |role: Role| s.role(role);
                (
                    c.to_string(),
                    WireScore {
                        relevant: s.relevant,
                        selected: r(Role::Selected),
                        join: r(Role::Join),
                        condition: r(Role::Condition),
                        order: r(Role::Order),
                        group: r(Role::Group),
                    },
                )
            })
            .collect();
        serde_json::to_string(&WireRecord {
            question_id: self.question_id.clone(),
            db_id: self.db_id.clone(),
            scores,
        })
        .expect("finite scores serialize")
    }

    pub fn from_json_line(line: &str) -> Result<Self, String> {
        let wire: WireRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let mut record = PredictionRecord::new(wire.question_id, wire.db_id);
        for (name, w) in wire.scores {
            let column: QualifiedColumn = name
                .parse()
                .map_err(|_| format!("score key `{name}` is not table.column"))?;
            let roles = [w.selected, w.join, w.condition, w.order, w.group];
            let score = match roles.iter().filter(|r| r.is_some()).count() {
                0 => ColumnScore::coarse(w.relevant),
                5 => ColumnScore::fine(w.relevant, roles.map(|r| r.unwrap_or_default())),
                _ => return Err(format!("`{name}` has a partial set of role logits")),
            };
            if record.scores.insert(column, score).is_some() {
                return Err(format!("`{name}` listed twice"));
            }
        }
        Ok(record)
    }
}

#[derive(Serialize, Deserialize)]
struct WireScore {
    relevant: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    selected: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    join: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    condition: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    order: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    group: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct WireRecord {
    question_id: String,
    db_id: String,
    scores: BTreeMap<String, WireScore>,
}

pub fn write_predictions<W: Write>(mut out: W, records: &[PredictionRecord]) -> std::io::Result<()> {
    for r in records {
        writeln!(out, "{}", r.to_json_line())?;
    }
    Ok(())
}

/// Parses every line and merges chunk records of the same question.
pub fn read_predictions<R: BufRead>(input: R) -> Result<Vec<PredictionRecord>, ScorerError> {
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| ScorerError::Format {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(
            PredictionRecord::from_json_line(&line).map_err(|message| ScorerError::Format { line: i + 1, message })?,
        );
    }
    merge_records(records)
}

/// Unions records that share a question id, in first-appearance order.
/// The candidate sets being merged must be disjoint.
pub fn merge_records(records: Vec<PredictionRecord>) -> Result<Vec<PredictionRecord>, ScorerError> {
    let mut order: Vec<PredictionRecord> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for r in records {
        let Some(&i) = index.get(&r.question_id) else {
            index.insert(r.question_id.clone(), order.len());
            order.push(r);
            continue;
        };
        let target = &mut order[i];
        if target.db_id != r.db_id {
            return Err(ScorerError::DbConflict {
                question_id: r.question_id,
                a: target.db_id.clone(),
                b: r.db_id,
            });
        }
        for (column, score) in r.scores {
            if target.scores.contains_key(&column) {
                return Err(ScorerError::DuplicateColumn {
                    question_id: r.question_id,
                    column: column.to_string(),
                });
            }
            target.scores.insert(column, score);
        }
    }
    Ok(order)
}

/// Checks every scored column against the catalog and, when given, the
/// question's candidate set.
pub fn validate_predictions(
    records: &[PredictionRecord],
    catalog: &[DatabaseSchema],
    candidates: Option<&HashMap<String, BTreeSet<QualifiedColumn>>>,
) -> Result<(), ScorerError> {
    let by_id: HashMap<&str, &DatabaseSchema> = catalog.iter().map(|s| (s.db_id.as_str(), s)).collect();
    let mut offenders = Vec::new();
    for r in records {
        let schema = by_id
            .get(r.db_id.as_str())
            .ok_or_else(|| ScorerError::UnknownDatabase(r.db_id.clone()))?;
        let allowed = candidates.and_then(|c| c.get(&r.question_id));
        for column in r.scores.keys() {
            if !schema.contains(column) || allowed.is_some_and(|a| !a.contains(column)) {
                offenders.push(format!("{}: {column}", r.question_id));
            }
        }
    }
    if offenders.is_empty() {
        Ok(())
    } else {
        Err(ScorerError::Validation { offenders })
    }
}

pub fn load_predictions(
    path: &Path,
    catalog: &[DatabaseSchema],
    candidates: Option<&HashMap<String, BTreeSet<QualifiedColumn>>>,
) -> Result<Vec<PredictionRecord>, ScorerError> {
    let file = std::fs::File::open(path).map_err(|source| ScorerError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let records = read_predictions(BufReader::new(file))?;
    validate_predictions(&records, catalog, candidates)?;
    Ok(records)
}
