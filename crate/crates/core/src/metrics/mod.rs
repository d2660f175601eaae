//! Linker evaluation: precision, recall and F-beta at table or column
//! level, ranking metrics, threshold sweeps and outcome analyses.
//!
//! `prf` pools counts over instances (micro average). `prf_macro` averages
//! per-instance precision and recall instead.

mod analysis;
mod rank;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use analysis::{bucket_analysis, imperfect_recall_report, Bucket, BucketResult, ImperfectRecall};
pub use rank::{average_ranks, pr_auc, roc_auc, spearman, PrAuc};

use crate::schema::QualifiedColumn;
use crate::scorers::PredictionRecord;
use crate::sql::SchemaLink;
use crate::Scalar;

pub const DEFAULT_BETA: f64 = 6.0;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    #[error("score is NaN")]
    NanScore,
    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),
    #[error("question ids differ between the two inputs: {}", .0.join(", "))]
    InstanceMismatch(Vec<String>),
    #[error("question `{0}` listed twice")]
    DuplicateInstance(String),
    #[error("beta must be positive and finite, got {0}")]
    Beta(f64),
    #[error("thresholds must be strictly decreasing and not NaN")]
    Thresholds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Table,
    #[default]
    Column,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Table => "table",
            Level::Column => "column",
        })
    }
}

impl FromStr for Level {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "table" => Ok(Level::Table),
            "column" => Ok(Level::Column),
            other => Err(format!("unknown level `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    pub beta: f64,
    pub thresholds: Vec<f64>,
    pub level: Level,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            beta: DEFAULT_BETA,
            thresholds: (0..=6).map(|t| 0.0 - t as f64).collect(),
            level: Level::Column,
        }
    }
}

impl MetricsConfig {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(MetricsError::Beta(self.beta));
        }
        if self.thresholds.iter().any(|t| t.is_nan()) || self.thresholds.windows(2).any(|w| w[0] <= w[1]) {
            return Err(MetricsError::Thresholds);
        }
        Ok(())
    }
}

/// `(1 + β²)·P·R / (β²·P + R)`, zero when both are zero.
pub fn f_beta<T: Scalar>(precision: T, recall: T, beta: T) -> T {
    let b2 = beta * beta;
    let denom = b2 * precision + recall;
    if denom == T::zero() {
        T::zero()
    } else {
        (T::one() + b2) * precision * recall / denom
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl std::ops::Add for Counts {
    type Output = Counts;
    fn add(self, o: Counts) -> Counts {
        Counts {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

impl Counts {
    /// Zero when nothing was predicted.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    /// Zero when nothing was relevant.
    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn prf(&self, beta: f64) -> Prf {
        let (precision, recall) = (self.precision(), self.recall());
        Prf {
            precision,
            recall,
            f_beta: f_beta(precision, recall, beta),
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f_beta: f64,
}

/// Item identity at a level: a column, or a column with an empty column
/// name standing for its table.
fn item(c: &QualifiedColumn, level: Level) -> QualifiedColumn {
    match level {
        Level::Column => c.clone(),
        Level::Table => QualifiedColumn::new(&c.table, ""),
    }
}

/// Gold items: every non-noise link entry, fallback entries included.
pub fn gold_items(link: &SchemaLink, level: Level) -> BTreeSet<QualifiedColumn> {
    link.entries
        .iter()
        .filter(|(_, e)| !e.noise)
        .map(|(c, _)| item(c, level))
        .collect()
}

/// Items whose relevance clears `threshold`; a table clears it when any of
/// its columns does.
pub fn predicted_items(record: &PredictionRecord, threshold: f64, level: Level) -> BTreeSet<QualifiedColumn> {
    record
        .scores
        .iter()
        .filter(|(_, s)| s.relevant >= threshold)
        .map(|(c, _)| item(c, level))
        .collect()
}

/// Pairs every prediction with its gold link by question id.
pub fn align<'a>(
    predictions: &'a [PredictionRecord],
    ground_truth: &'a [SchemaLink],
) -> Result<Vec<(&'a PredictionRecord, &'a SchemaLink)>, MetricsError> {
    let mut gold: HashMap<&str, &SchemaLink> = HashMap::new();
    for g in ground_truth {
        if gold.insert(&g.question_id, g).is_some() {
            return Err(MetricsError::DuplicateInstance(g.question_id.clone()));
        }
    }
    let mut seen = BTreeSet::new();
    let mut missing = BTreeSet::new();
    let mut pairs = Vec::with_capacity(predictions.len());
    for p in predictions {
        if !seen.insert(p.question_id.as_str()) {
            return Err(MetricsError::DuplicateInstance(p.question_id.clone()));
        }
        match gold.get(p.question_id.as_str()) {
            Some(g) => pairs.push((p, *g)),
            None => {
                missing.insert(p.question_id.clone());
            }
        }
    }
    for id in gold.keys() {
        if !seen.contains(id) {
            missing.insert(id.to_string());
        }
    }
    if missing.is_empty() {
        Ok(pairs)
    } else {
        Err(MetricsError::InstanceMismatch(missing.into_iter().collect()))
    }
}

pub fn instance_counts(record: &PredictionRecord, link: &SchemaLink, threshold: f64, level: Level) -> Counts {
    let pred = predicted_items(record, threshold, level);
    let gold = gold_items(link, level);
    let tp = pred.intersection(&gold).count();
    Counts {
        tp,
        fp: pred.len() - tp,
        fn_: gold.len() - tp,
    }
}

/// Micro-averaged precision, recall and F-beta.
pub fn prf(
    predictions: &[PredictionRecord],
    ground_truth: &[SchemaLink],
    threshold: f64,
    level: Level,
    beta: f64,
) -> Result<Prf, MetricsError> {
    let pairs = align(predictions, ground_truth)?;
    let counts = pairs
        .par_iter()
        .map(|(p, g)| instance_counts(p, g, threshold, level))
        .reduce(Counts::default, |a, b| a + b);
    Ok(counts.prf(beta))
}

/// Mean per-instance precision and recall, with F-beta of the means.
pub fn prf_macro(
    predictions: &[PredictionRecord],
    ground_truth: &[SchemaLink],
    threshold: f64,
    level: Level,
    beta: f64,
) -> Result<Prf, MetricsError> {
    let pairs = align(predictions, ground_truth)?;
    if pairs.is_empty() {
        return Err(MetricsError::Degenerate("no instances"));
    }
    let (sp, sr) = pairs
        .iter()
        .map(|(p, g)| instance_counts(p, g, threshold, level))
        .fold((0.0, 0.0), |(sp, sr), c| (sp + c.precision(), sr + c.recall()));
    let n = pairs.len() as f64;
    let (precision, recall) = (sp / n, sr / n);
    Ok(Prf {
        precision,
        recall,
        f_beta: f_beta(precision, recall, beta),
    })
}

/// F-beta of every instance at one threshold, in prediction order.
pub fn instance_f_scores(
    predictions: &[PredictionRecord],
    ground_truth: &[SchemaLink],
    threshold: f64,
    level: Level,
    beta: f64,
) -> Result<Vec<(String, f64)>, MetricsError> {
    Ok(align(predictions, ground_truth)?
        .into_iter()
        .map(|(p, g)| (p.question_id.clone(), instance_counts(p, g, threshold, level).prf(beta).f_beta))
        .collect())
}

/// Pooled `(score, is_gold)` items. A table scores as its best column.
/// Gold items the linker never scored enter at negative infinity.
pub fn scored_items(
    predictions: &[PredictionRecord],
    ground_truth: &[SchemaLink],
    level: Level,
) -> Result<Vec<(f64, bool)>, MetricsError> {
    let pairs = align(predictions, ground_truth)?;
    let mut out = Vec::new();
    for (p, g) in pairs {
        let gold = gold_items(g, level);
        let mut best: std::collections::BTreeMap<QualifiedColumn, f64> = Default::default();
        for (c, s) in &p.scores {
            let e = best.entry(item(c, level)).or_insert(f64::NEG_INFINITY);
            *e = e.max(s.relevant);
        }
        for g_item in &gold {
            best.entry(g_item.clone()).or_insert(f64::NEG_INFINITY);
        }
        out.extend(best.into_iter().map(|(k, v)| (v, gold.contains(&k))));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceScore {
    pub question_id: String,
    pub f_beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub level: Level,
    pub beta: f64,
    pub instances: usize,
    pub rows: Vec<SweepRow>,
    /// Absent when the pooled items are all gold or all non-gold.
    pub roc_auc: Option<f64>,
    pub pr_auc: Option<PrAuc>,
    /// First threshold reaching the maximum F-beta.
    pub best_threshold: Option<f64>,
    /// Per-instance F-beta at the best threshold.
    pub per_instance: Vec<InstanceScore>,
}

/// Scores `predictions` at every configured threshold.
pub fn sweep(
    predictions: &[PredictionRecord],
    ground_truth: &[SchemaLink],
    config: &MetricsConfig,
) -> Result<MetricsReport, MetricsError> {
    config.validate()?;
    let pairs = align(predictions, ground_truth)?;
    let rows: Vec<SweepRow> = config
        .thresholds
        .iter()
        .map(|&t| {
            let c = pairs
                .par_iter()
                .map(|(p, g)| instance_counts(p, g, t, config.level))
                .reduce(Counts::default, |a, b| a + b);
            let prf = c.prf(config.beta);
            SweepRow {
                threshold: t,
                precision: prf.precision,
                recall: prf.recall,
                f_beta: prf.f_beta,
            }
        })
        .collect();
    let mut best: Option<&SweepRow> = None;
    for r in &rows {
        if best.map_or(true, |b| r.f_beta > b.f_beta) {
            best = Some(r);
        }
    }
    let best_threshold = best.map(|b| b.threshold);
    let items = scored_items(predictions, ground_truth, config.level)?;
    let per_instance = match best_threshold {
        Some(t) => instance_f_scores(predictions, ground_truth, t, config.level, config.beta)?
            .into_iter()
            .map(|(question_id, f_beta)| InstanceScore { question_id, f_beta })
            .collect(),
        None => Vec::new(),
    };
    Ok(MetricsReport {
        level: config.level,
        beta: config.beta,
        instances: pairs.len(),
        rows,
        roc_auc: roc_auc(&items).ok(),
        pr_auc: pr_auc(&items).ok(),
        best_threshold,
        per_instance,
    })
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Threshold, precision, recall, F-beta per row.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["threshold", "precision", "recall", "f_beta"])
            .expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.threshold.to_string(),
                format!("{:.6}", r.precision),
                format!("{:.6}", r.recall),
                format!("{:.6}", r.f_beta),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("ascii")
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "level: {}  beta: {}  instances: {}\n",
            self.level, self.beta, self.instances
        );
        s.push_str(&format!(
            "{:>9}  {:>9}  {:>9}  {:>9}\n",
            "threshold", "precision", "recall", "f_beta"
        ));
        for r in &self.rows {
            let mark = if Some(r.threshold) == self.best_threshold { " *" } else { "" };
            s.push_str(&format!(
                "{:>9}  {:>9.4}  {:>9.4}  {:>9.4}{mark}\n",
                r.threshold, r.precision, r.recall, r.f_beta
            ));
        }
        let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.4}"));
        s.push_str(&format!("roc_auc: {}\n", opt(self.roc_auc)));
        match &self.pr_auc {
            Some(p) => s.push_str(&format!("pr_auc: {:.4} [{:.4}, {:.4}]\n", p.value, p.worst, p.best)),
            None => s.push_str("pr_auc: n/a\n"),
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorers::ColumnScore;
    use crate::sql::RoleSet;

    fn qc(s: &str) -> QualifiedColumn {
        s.parse().unwrap()
    }

    fn link(id: &str, cols: &[&str]) -> SchemaLink {
        let mut l = SchemaLink::new(id, "d");
        for c in cols {
            l.add_roles(qc(c), RoleSet::of(&[crate::sql::Role::Selected]));
        }
        l
    }

    fn record(id: &str, scores: &[(&str, f64)]) -> PredictionRecord {
        let mut r = PredictionRecord::new(id, "d");
        for (c, s) in scores {
            r.scores.insert(qc(c), ColumnScore::coarse(*s));
        }
        r
    }

    #[test]
    fn f_beta_values() {
        assert!((f_beta(0.5f64, 1.0, 6.0) - 37.0 * 0.5 / 19.0).abs() < 1e-15);
        assert_eq!(f_beta(0.0, 0.0, 6.0), 0.0);
        assert!((f_beta(0.3f32, 0.3, 2.0) - 0.3).abs() < 1e-7);
    }

    #[test]
    fn micro_pools_counts() {
        let gold = [link("a", &["t.x"]), link("b", &["t.x", "t.y", "u.z"])];
        let preds = [
            record("a", &[("t.x", 1.0), ("t.y", 1.0), ("u.z", -5.0)]),
            record("b", &[("t.x", 1.0), ("t.y", -5.0), ("u.z", -5.0)]),
        ];
        let p = prf(&preds, &gold, 0.0, Level::Column, 1.0).unwrap();
        assert_eq!((p.precision, p.recall), (2.0 / 3.0, 0.5));
        let m = prf_macro(&preds, &gold, 0.0, Level::Column, 1.0).unwrap();
        assert_eq!((m.precision, m.recall), (0.75, 2.0 / 3.0));
        let t = prf(&preds, &gold, 0.0, Level::Table, 1.0).unwrap();
        assert_eq!((t.precision, t.recall), (1.0, 2.0 / 3.0));
    }

    #[test]
    fn nothing_predicted_is_zero_precision() {
        let p = prf(&[record("a", &[("t.x", -1.0)])], &[link("a", &["t.x"])], 0.0, Level::Column, 6.0).unwrap();
        assert_eq!((p.precision, p.recall, p.f_beta), (0.0, 0.0, 0.0));
    }

    #[test]
    fn mismatch_errors() {
        let err = prf(&[record("a", &[])], &[link("b", &["t.x"])], 0.0, Level::Column, 6.0).unwrap_err();
        assert_eq!(err, MetricsError::InstanceMismatch(vec!["a".into(), "b".into()]));
    }

    #[test]
    fn noise_entries_are_not_gold() {
        let mut l = link("a", &["t.x"]);
        l.entries.insert(
            qc("t.y"),
            crate::sql::LinkEntry {
                noise: true,
                ..Default::default()
            },
        );
        assert_eq!(gold_items(&l, Level::Column).len(), 1);
    }

    #[test]
    fn sweep_report() {
        let gold = [link("a", &["t.x"]), link("b", &["t.y"])];
        let preds = [
            record("a", &[("t.x", -0.5), ("t.y", -2.5)]),
            record("b", &[("t.x", -3.5), ("t.y", -1.5)]),
        ];
        let report = sweep(&preds, &gold, &MetricsConfig::default()).unwrap();
        assert_eq!(report.rows.len(), 7);
        let recalls: Vec<f64> = report.rows.iter().map(|r| r.recall).collect();
        assert_eq!(recalls, vec![0.0, 0.5, 1.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(report.best_threshold, Some(-2.0));
        assert_eq!(report.roc_auc, Some(1.0));
        assert_eq!(report.to_json(), report.to_json());
        let csv = report.to_csv();
        assert_eq!(csv.lines().count(), 8);
        assert!(csv.starts_with("threshold,precision,recall,f_beta\n0,0.000000,"));
        assert!(report.to_text().contains("-2     1.0000     1.0000     1.0000 *"));
    }

    #[test]
    fn config_validation() {
        assert!(MetricsConfig::default().validate().is_ok());
        let bad = MetricsConfig {
            thresholds: vec![0.0, 0.0],
            ..Default::default()
        };
        assert_eq!(bad.validate(), Err(MetricsError::Thresholds));
        let bad = MetricsConfig {
            beta: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
