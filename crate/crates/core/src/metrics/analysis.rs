//! Relating linker quality to externally supplied generation outcomes.

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use super::{align, gold_items, predicted_items, Level, MetricsError};
use crate::scorers::PredictionRecord;
use crate::sql::SchemaLink;

/// F-score range `[min, max)`; buckets may overlap.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bucket {
    pub label: String,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl Bucket {
    pub fn below(label: &str, max: f64) -> Self {
        Bucket {
            label: label.into(),
            min: None,
            max: Some(max),
        }
    }

    pub fn at_least(label: &str, min: f64) -> Self {
        Bucket {
            label: label.into(),
            min: Some(min),
            max: None,
        }
    }

    pub fn contains(&self, f: f64) -> bool {
        self.min.map_or(true, |m| f >= m) && self.max.map_or(true, |m| f < m)
    }

    /// `<80%`, `>=80%`, `>=90%`.
    pub fn defaults() -> Vec<Bucket> {
        vec![
            Bucket::below("<80%", 0.8),
            Bucket::at_least(">=80%", 0.8),
            Bucket::at_least(">=90%", 0.9),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BucketResult {
    pub label: String,
    pub count: usize,
    pub correct: usize,
    /// Absent for an empty bucket.
    pub accuracy: Option<f64>,
}

fn outcome_map<'a>(
    ids: impl Iterator<Item = &'a str>,
    outcomes: &'a [(String, bool)],
) -> Result<HashMap<&'a str, bool>, MetricsError> {
    let mut map = HashMap::new();
    for (id, ok) in outcomes {
        if map.insert(id.as_str(), *ok).is_some() {
            return Err(MetricsError::DuplicateInstance(id.clone()));
        }
    }
    let ids: BTreeSet<&str> = ids.collect();
    let outcome_ids: BTreeSet<&str> = map.keys().copied().collect();
    if ids != outcome_ids {
        return Err(MetricsError::InstanceMismatch(
            ids.symmetric_difference(&outcome_ids).map(|s| s.to_string()).collect(),
        ));
    }
    Ok(map)
}

/// Outcome accuracy of the instances falling in each bucket.
pub fn bucket_analysis(
    per_instance_f: &[(String, f64)],
    outcomes: &[(String, bool)],
    buckets: &[Bucket],
) -> Result<Vec<BucketResult>, MetricsError> {
    let map = outcome_map(per_instance_f.iter().map(|(id, _)| id.as_str()), outcomes)?;
    Ok(buckets
        .iter()
        .map(|b| {
            let members: Vec<bool> = per_instance_f
                .iter()
                .filter(|(_, f)| b.contains(*f))
                .map(|(id, _)| map[id.as_str()])
                .collect();
            let correct = members.iter().filter(|&&c| c).count();
            BucketResult {
                label: b.label.clone(),
                count: members.len(),
                correct,
                accuracy: (!members.is_empty()).then(|| correct as f64 / members.len() as f64),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImperfectRecall {
    pub count: usize,
    pub fraction: f64,
    /// Absent when every instance has full recall.
    pub accuracy: Option<f64>,
    pub question_ids: Vec<String>,
}

/// The instances missing at least one gold item at `threshold`.
pub fn imperfect_recall_report(
    predictions: &[PredictionRecord],
    ground_truth: &[SchemaLink],
    outcomes: &[(String, bool)],
    threshold: f64,
    level: Level,
) -> Result<ImperfectRecall, MetricsError> {
    let pairs = align(predictions, ground_truth)?;
    let map = outcome_map(pairs.iter().map(|(p, _)| p.question_id.as_str()), outcomes)?;
    let subset: Vec<&str> = pairs
        .iter()
        .filter(|(p, g)| {
            let pred = predicted_items(p, threshold, level);
            !gold_items(g, level).is_subset(&pred)
        })
        .map(|(p, _)| p.question_id.as_str())
        .collect();
    let correct = subset.iter().filter(|id| map[*id]).count();
    Ok(ImperfectRecall {
        count: subset.len(),
        fraction: if pairs.is_empty() {
            0.0
        } else {
            subset.len() as f64 / pairs.len() as f64
        },
        accuracy: (!subset.is_empty()).then(|| correct as f64 / subset.len() as f64),
        question_ids: subset.into_iter().map(String::from).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[(&str, f64)]) -> Vec<(String, f64)> {
        v.iter().map(|(a, f)| (a.to_string(), *f)).collect()
    }

    #[test]
    fn buckets_count_and_score() {
        let f = ids(&[("a", 0.5), ("b", 0.85), ("c", 0.95), ("d", 1.0)]);
        let out: Vec<(String, bool)> = vec![
            ("a".into(), false),
            ("b".into(), true),
            ("c".into(), true),
            ("d".into(), false),
        ];
        let r = bucket_analysis(&f, &out, &Bucket::defaults()).unwrap();
        let counts: Vec<usize> = r.iter().map(|b| b.count).collect();
        assert_eq!(counts, vec![1, 3, 2]);
        assert_eq!(r[0].accuracy, Some(0.0));
        assert_eq!(r[2].accuracy, Some(0.5));
        assert!(bucket_analysis(&f, &out[..3], &Bucket::defaults()).is_err());
    }

    #[test]
    fn empty_bucket_has_no_accuracy() {
        let f = ids(&[("a", 0.95)]);
        let r = bucket_analysis(&f, &[("a".into(), true)], &Bucket::defaults()).unwrap();
        assert_eq!(r[0].accuracy, None);
        assert_eq!(r[1].accuracy, Some(1.0));
    }
}
