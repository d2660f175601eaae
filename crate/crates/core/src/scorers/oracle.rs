use rand::Rng;

use super::{ColumnScore, LinkingInstance, PredictionRecord, ScorerError};
use crate::head::Granularity;
use crate::rng::substream;
use crate::sql::Role;

/// Saturation logit; far outside any threshold worth sweeping.
pub const ORACLE_LOGIT: f64 = 10.0;

/// Ground truth as scores: `+10` for gold columns, `-10` otherwise, with
/// each positive dropped with probability `fn_rate` and each negative
/// promoted with probability `fp_rate`. Draws come from a stream keyed by
/// `(seed, question_id, column)`, so a column's fate does not depend on
/// which other columns share its chunk.
pub fn oracle_score(
    instance: &LinkingInstance,
    fp_rate: f64,
    fn_rate: f64,
    seed: u64,
    granularity: Granularity,
) -> Result<PredictionRecord, ScorerError> {
    for (name, value) in [("fp_rate", fp_rate), ("fn_rate", fn_rate)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(ScorerError::Rate { name, value });
        }
    }
    let labels = instance
        .labels
        .as_ref()
        .ok_or_else(|| ScorerError::MissingLabels(instance.question_id.clone()))?;
    let mut record = PredictionRecord::new(&instance.question_id, &instance.db_id);
    for column in &instance.chunk.candidates {
        let name = column.to_string();
        let u: f64 = substream(seed, &["oracle", &instance.question_id, &name]).gen();
        let entry = labels.entries.get(column);
        let kept = match entry {
            Some(_) => u >= fn_rate,
            None => u < fp_rate,
        };
        let sign = |b: bool| if b { ORACLE_LOGIT } else { -ORACLE_LOGIT };
        let score = match granularity {
            Granularity::Coarse => ColumnScore::coarse(sign(kept)),
            Granularity::Fine => {
                let roles = entry.filter(|_| kept).map(|e| e.roles).unwrap_or_default();
                ColumnScore::fine(sign(kept), Role::ALL.map(|r| sign(roles.contains(r))))
            }
        };
        record.scores.insert(column.clone(), score);
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::fixtures::book_publication;
    use crate::schema::{chunk_schema, LexicalTokenEstimator};
    use crate::sql::extract_ground_truth;

    fn instance() -> LinkingInstance {
        let schema = book_publication();
        let link = extract_ground_truth(
            "SELECT title FROM book JOIN publication ON book.book_id = publication.book_id ORDER BY price DESC",
            &schema,
        )
        .unwrap();
        let q = "Show the titles of books in descending order of publication price.";
        let chunk = chunk_schema(&schema, q, 3000, &LexicalTokenEstimator).unwrap().remove(0);
        LinkingInstance::new("q1", q, chunk, Some(&link))
    }

    #[test]
    fn noiseless_oracle_is_ground_truth() {
        let r = oracle_score(&instance(), 0.0, 0.0, 1, Granularity::Fine).unwrap();
        let positive: Vec<String> = r
            .scores
            .iter()
            .filter(|(_, s)| s.relevant == ORACLE_LOGIT)
            .map(|(c, _)| c.to_string())
            .collect();
        assert_eq!(
            positive,
            vec!["book.book_id", "book.title", "publication.book_id", "publication.price"]
        );
        let title = r.scores[&"book.title".parse().unwrap()];
        assert_eq!(title.role(Role::Selected), Some(ORACLE_LOGIT));
        assert_eq!(title.role(Role::Order), Some(-ORACLE_LOGIT));
        assert!(r.scores.values().all(|s| s.relevant.abs() == ORACLE_LOGIT));
    }

    #[test]
    fn full_false_negative_rate_drops_everything() {
        let r = oracle_score(&instance(), 0.0, 1.0, 3, Granularity::Coarse).unwrap();
        assert!(r.scores.values().all(|s| s.relevant == -ORACLE_LOGIT));
    }

    #[test]
    fn deterministic_and_validated() {
        let a = oracle_score(&instance(), 0.3, 0.3, 9, Granularity::Fine).unwrap();
        let b = oracle_score(&instance(), 0.3, 0.3, 9, Granularity::Fine).unwrap();
        assert_eq!(a, b);
        assert!(oracle_score(&instance(), 1.5, 0.0, 9, Granularity::Fine).is_err());
        let mut bare = instance();
        bare.labels = None;
        assert!(matches!(
            oracle_score(&bare, 0.0, 0.0, 9, Granularity::Fine),
            Err(ScorerError::MissingLabels(_))
        ));
    }
}
