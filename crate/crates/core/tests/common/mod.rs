#![allow(dead_code)]
//! Brute-force reference implementations and fixture helpers shared by the
//! integration tests.

use std::path::PathBuf;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

/// Every positive-negative pair, ties worth one half.
pub fn roc_pairs(items: &[(f64, bool)]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for a in items.iter().filter(|i| i.1) {
        for b in items.iter().filter(|i| !i.1) {
            pairs += 1.0;
            if a.0 > b.0 {
                wins += 1.0;
            } else if a.0 == b.0 {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// AP for an explicit ranking given as item indices, best first.
pub fn ap_of_ranking(items: &[(f64, bool)], ranking: &[usize]) -> f64 {
    let total = items.iter().filter(|i| i.1).count() as f64;
    let mut sum = 0.0;
    for (k, &i) in ranking.iter().enumerate() {
        if items[i].1 {
            let hits = ranking[..=k].iter().filter(|&&j| items[j].1).count();
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    sum / total
}

/// Rank by counting: items with a higher score, or an equal score and a
/// lower index, come first.
pub fn stable_ranking(items: &[(f64, bool)]) -> Vec<usize> {
    let mut slots = vec![0; items.len()];
    for i in 0..items.len() {
        let r = (0..items.len())
            .filter(|&j| items[j].0 > items[i].0 || (items[j].0 == items[i].0 && j < i))
            .count();
        slots[r] = i;
    }
    slots
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

pub fn rank_pearson(x: &[f64], y: &[f64]) -> f64 {
    let rank = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|a| {
                let below = v.iter().filter(|b| *b < a).count() as f64;
                let equal = v.iter().filter(|b| *b == a).count() as f64;
                below + (equal + 1.0) / 2.0
            })
            .collect()
    };
    let (rx, ry) = (rank(x), rank(y));
    let n = x.len() as f64;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n;
    let (mx, my) = (mean(&rx), mean(&ry));
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}
