//! Threshold-free ranking metrics.

use serde::Serialize;

use super::MetricsError;
use crate::Scalar;

fn to_f64<T: Scalar>(scores: &[(T, bool)]) -> Result<Vec<(f64, bool)>, MetricsError> {
    scores
        .iter()
        .map(|&(s, l)| {
            let v = s.to_f64().unwrap_or(f64::NAN);
            if v.is_nan() {
                Err(MetricsError::NanScore)
            } else {
                Ok((v, l))
            }
        })
        .collect()
}

/// 1-based ranks in ascending order, ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half (Mann-Whitney U over pooled items).
pub fn roc_auc<T: Scalar>(scores: &[(T, bool)]) -> Result<f64, MetricsError> {
    let scores = to_f64(scores)?;
    let pos = scores.iter().filter(|s| s.1).count();
    let neg = scores.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricsError::Degenerate(if pos == 0 {
            "no positive items"
        } else {
            "no negative items"
        }));
    }
    let values: Vec<f64> = scores.iter().map(|s| s.0).collect();
    let ranks = average_ranks(&values);
    let rank_sum: f64 = ranks.iter().zip(&scores).filter(|(_, s)| s.1).map(|(r, _)| r).sum();
    let p = pos as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * neg as f64))
}

/// Average precision plus its range over orderings of tied scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrAuc {
    /// Ties kept in input order.
    pub value: f64,
    /// Ties resolved negatives first.
    pub worst: f64,
    /// Ties resolved positives first.
    pub best: f64,
}

/// Step-wise average precision: mean over positives of precision at the
/// positive's rank, scores descending. Equal scores keep input order.
pub fn pr_auc<T: Scalar>(scores: &[(T, bool)]) -> Result<PrAuc, MetricsError> {
    let scores = to_f64(scores)?;
    let total_pos = scores.iter().filter(|s| s.1).count();
    if total_pos == 0 {
        return Err(MetricsError::Degenerate("no positive items"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].0.total_cmp(&scores[a].0));

    let mut value = 0.0;
    let mut tp = 0usize;
    for (rank, &i) in order.iter().enumerate() {
        if scores[i].1 {
            tp += 1;
            value += tp as f64 / (rank + 1) as f64;
        }
    }

    let (mut worst, mut best) = (0.0, 0.0);
    let (mut seen, mut tp) = (0usize, 0usize);
    let mut g = 0;
    while g < order.len() {
        let mut end = g;
        while end < order.len() && scores[order[end]].0 == scores[order[g]].0 {
            end += 1;
        }
        let p = order[g..end].iter().filter(|&&i| scores[i].1).count();
        let n = end - g - p;
        for k in 1..=p {
            best += (tp + k) as f64 / (seen + k) as f64;
            worst += (tp + k) as f64 / (seen + n + k) as f64;
        }
        seen = end;
        tp += p;
        g = end;
    }
    let denom = total_pos as f64;
    Ok(PrAuc {
        value: value / denom,
        worst: worst / denom,
        best: best / denom,
    })
}

/// Rank correlation with average ranks for ties.
pub fn spearman<T: Scalar>(x: &[T], y: &[T]) -> Result<f64, MetricsError> {
    if x.len() != y.len() {
        return Err(MetricsError::Length(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(MetricsError::Degenerate("fewer than two observations"));
    }
    let conv = |v: &[T]| -> Result<Vec<f64>, MetricsError> {
        v.iter()
            .map(|s| match s.to_f64() {
                Some(f) if !f.is_nan() => Ok(f),
                _ => Err(MetricsError::NanScore),
            })
            .collect()
    };
    let rx = average_ranks(&conv(x)?);
    let ry = average_ranks(&conv(y)?);
    pearson(&rx, &ry)
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricsError::Degenerate("constant input"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}
