//! Extractive relevance head over externally supplied hidden states.
//!
//! Each candidate column is wrapped in a pair of marker tokens. The head
//! concatenates the final-layer states at the open and close markers,
//! `C[i] = E[α_i] ⊕ E[ω_i]`, and projects: `logits = C·W + b`.

mod exchange;
mod matrix;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use exchange::{
    read_hidden_states, read_hidden_states_json, write_hidden_states, write_hidden_states_json, FloatWidth,
    EXCHANGE_MAGIC,
};
pub use matrix::Matrix;

use crate::schema::QualifiedColumn;
use crate::sql::Role;
use crate::Scalar;

#[derive(Debug, Error)]
pub enum HeadError {
    #[error("marker structure: {0}")]
    Markers(String),
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: String,
        found: String,
    },
    #[error("label {value} at ({row}, {col}) is not 0 or 1")]
    Label { row: usize, col: usize, value: String },
    #[error("hidden-state exchange: {0}")]
    Exchange(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Coarse predicts one relevance per column, fine one per role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    #[default]
    Coarse,
    Fine,
}

impl Granularity {
    pub fn outputs(self) -> usize {
        match self {
            Granularity::Coarse => 1,
            Granularity::Fine => Role::ALL.len(),
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Granularity::Coarse => "coarse",
            Granularity::Fine => "fine",
        })
    }
}

impl FromStr for Granularity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "coarse" => Ok(Granularity::Coarse),
            "fine" => Ok(Granularity::Fine),
            other => Err(format!("unknown granularity `{other}` (expected coarse or fine)")),
        }
    }
}

/// Hidden states of one prompt with its marker positions.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSequence<T> {
    alpha: Vec<usize>,
    omega: Vec<usize>,
    hidden: Matrix<T>,
    candidates: Vec<QualifiedColumn>,
}

impl<T: Scalar> TokenSequence<T> {
    /// Locates markers by token id.
    pub fn from_tokens(tokens: &[u32], open_id: u32, close_id: u32, hidden: Matrix<T>) -> Result<Self, HeadError> {
        if tokens.len() != hidden.rows() {
            return Err(HeadError::Dimension {
                what: "token sequence",
                expected: format!("{} hidden rows", tokens.len()),
                found: format!("{}", hidden.rows()),
            });
        }
        let positions = |id: u32| {
            tokens
                .iter()
                .enumerate()
                .filter(|(_, &t)| t == id)
                .map(|(i, _)| i)
                .collect::<Vec<_>>()
        };
        Self::from_positions(positions(open_id), positions(close_id), hidden)
    }

    pub fn from_positions(alpha: Vec<usize>, omega: Vec<usize>, hidden: Matrix<T>) -> Result<Self, HeadError> {
        if alpha.len() != omega.len() {
            return Err(HeadError::Markers(format!(
                "{} open markers but {} close markers",
                alpha.len(),
                omega.len()
            )));
        }
        let mut last: Option<usize> = None;
        for (i, (&a, &w)) in alpha.iter().zip(&omega).enumerate() {
            if last.is_some_and(|l| a <= l) || a >= w {
                return Err(HeadError::Markers(format!(
                    "pair {i} at ({a}, {w}) breaks open/close alternation"
                )));
            }
            if w >= hidden.rows() {
                return Err(HeadError::Markers(format!(
                    "close marker {w} beyond {} hidden rows",
                    hidden.rows()
                )));
            }
            last = Some(w);
        }
        Ok(TokenSequence {
            alpha,
            omega,
            hidden,
            candidates: Vec::new(),
        })
    }

    /// Names the candidate behind each marker pair.
    pub fn with_candidates(mut self, candidates: Vec<QualifiedColumn>) -> Result<Self, HeadError> {
        if candidates.len() != self.alpha.len() {
            return Err(HeadError::Dimension {
                what: "candidate list",
                expected: format!("{} names", self.alpha.len()),
                found: format!("{}", candidates.len()),
            });
        }
        self.candidates = candidates;
        Ok(self)
    }

    pub fn alpha(&self) -> &[usize] {
        &self.alpha
    }

    pub fn omega(&self) -> &[usize] {
        &self.omega
    }

    pub fn hidden(&self) -> &Matrix<T> {
        &self.hidden
    }

    pub fn candidates(&self) -> &[QualifiedColumn] {
        &self.candidates
    }

    pub fn pair_count(&self) -> usize {
        self.alpha.len()
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden.cols()
    }
}

/// `M × 2d` matrix whose row `i` is `hidden[α_i] ⊕ hidden[ω_i]`.
pub fn gather_candidates<T: Scalar>(seq: &TokenSequence<T>) -> Matrix<T> {
    let d = seq.hidden_size();
    let mut out = Matrix::zeros(seq.pair_count(), 2 * d);
    for (i, (&a, &w)) in seq.alpha.iter().zip(&seq.omega).enumerate() {
        let row = out.row_mut(i);
        row[..d].copy_from_slice(seq.hidden.row(a));
        row[d..].copy_from_slice(seq.hidden.row(w));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadParameters<T> {
    /// `2d × R`
    pub weight: Matrix<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> HeadParameters<T> {
    pub fn new(weight: Matrix<T>, bias: Vec<T>) -> Result<Self, HeadError> {
        if weight.rows() % 2 != 0 {
            return Err(HeadError::Dimension {
                what: "weight rows",
                expected: "an even count (2d)".into(),
                found: weight.rows().to_string(),
            });
        }
        if ![1, Role::ALL.len()].contains(&weight.cols()) {
            return Err(HeadError::Dimension {
                what: "weight columns",
                expected: format!("1 or {}", Role::ALL.len()),
                found: weight.cols().to_string(),
            });
        }
        if bias.len() != weight.cols() {
            return Err(HeadError::Dimension {
                what: "bias",
                expected: format!("{} values", weight.cols()),
                found: bias.len().to_string(),
            });
        }
        Ok(HeadParameters { weight, bias })
    }

    pub fn zeros(hidden_size: usize, granularity: Granularity) -> Self {
        let r = granularity.outputs();
        HeadParameters {
            weight: Matrix::zeros(2 * hidden_size, r),
            bias: vec![T::zero(); r],
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.weight.rows() / 2
    }

    pub fn outputs(&self) -> usize {
        self.weight.cols()
    }

    pub fn granularity(&self) -> Granularity {
        if self.outputs() == 1 {
            Granularity::Coarse
        } else {
            Granularity::Fine
        }
    }
}

/// Head output for one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet<T> {
    pub candidates: Vec<QualifiedColumn>,
    /// Concatenated marker states, kept for the gradient.
    pub features: Matrix<T>,
    pub logits: Matrix<T>,
    pub probabilities: Matrix<T>,
}

impl<T: Scalar> ScoreSet<T> {
    pub fn len(&self) -> usize {
        self.logits.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn granularity(&self) -> Granularity {
        if self.logits.cols() == 1 {
            Granularity::Coarse
        } else {
            Granularity::Fine
        }
    }
}

/// Logistic function kept strictly inside (0, 1).
pub fn sigmoid<T: Scalar>(z: T) -> T {
    let one = T::one();
    let p = if z >= T::zero() {
        one / (one + (-z).exp())
    } else {
        let e = z.exp();
        e / (one + e)
    };
    p.max(T::min_positive_value()).min(one - T::epsilon())
}

/// `ln(1 + e^z)` without overflow.
pub fn softplus<T: Scalar>(z: T) -> T {
    z.max(T::zero()) + (-z.abs()).exp().ln_1p()
}

pub fn forward<T: Scalar>(seq: &TokenSequence<T>, params: &HeadParameters<T>) -> Result<ScoreSet<T>, HeadError> {
    let mut scores = forward_features(gather_candidates(seq), params)?;
    scores.candidates = seq.candidates.clone();
    Ok(scores)
}

/// Projection of an already gathered `M × 2d` feature matrix.
pub fn forward_features<T: Scalar>(features: Matrix<T>, params: &HeadParameters<T>) -> Result<ScoreSet<T>, HeadError> {
    if features.cols() != params.weight.rows() {
        return Err(HeadError::Dimension {
            what: "hidden size",
            expected: format!("{} feature columns (2d)", params.weight.rows()),
            found: features.cols().to_string(),
        });
    }
    let mut logits = features.matmul(&params.weight)?;
    for r in 0..logits.rows() {
        for (z, &b) in logits.row_mut(r).iter_mut().zip(&params.bias) {
            *z = *z + b;
        }
    }
    let probabilities = logits.map(sigmoid);
    Ok(ScoreSet {
        candidates: Vec::new(),
        features,
        logits,
        probabilities,
    })
}

/// Scores many sequences in parallel; results keep input order.
pub fn score_batch<T: Scalar>(
    seqs: &[TokenSequence<T>],
    params: &HeadParameters<T>,
) -> Vec<Result<ScoreSet<T>, HeadError>> {
    seqs.par_iter().map(|s| forward(s, params)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossGradient<T> {
    pub loss: T,
    pub grad_weight: Matrix<T>,
    pub grad_bias: Vec<T>,
}

/// Mean binary cross-entropy over all `M·R` outputs, with gradients.
///
/// Per element `softplus(z) - y·z`, evaluated as `softplus(±z)` to avoid
/// cancellation; `dL/dz = (σ(z) - y) / (M·R)`.
pub fn bce_loss<T: Scalar>(scores: &ScoreSet<T>, labels: &Matrix<T>) -> Result<LossGradient<T>, HeadError> {
    let (m, r) = (scores.logits.rows(), scores.logits.cols());
    if labels.rows() != m || labels.cols() != r {
        return Err(HeadError::Dimension {
            what: "labels",
            expected: format!("{m}x{r}"),
            found: format!("{}x{}", labels.rows(), labels.cols()),
        });
    }
    let count = T::from_usize((m * r).max(1)).expect("count fits the scalar type");
    let mut loss = T::zero();
    let mut dz = Matrix::zeros(m, r);
    for i in 0..m {
        for j in 0..r {
            let y = labels.get(i, j);
            if y != T::zero() && y != T::one() {
                return Err(HeadError::Label {
                    row: i,
                    col: j,
                    value: y.to_string(),
                });
            }
            let z = scores.logits.get(i, j);
            loss = loss + if y == T::one() { softplus(-z) } else { softplus(z) };
            // Unclamped logistic so the gradient stays exact.
            let p = if z >= T::zero() {
                T::one() / (T::one() + (-z).exp())
            } else {
                z.exp() / (T::one() + z.exp())
            };
            dz.set(i, j, (p - y) / count);
        }
    }
    let grad_weight = scores.features.transpose().matmul(&dz)?;
    let grad_bias = (0..r)
        .map(|j| (0..m).fold(T::zero(), |acc, i| acc + dz.get(i, j)))
        .collect();
    Ok(LossGradient {
        loss: loss / count,
        grad_weight,
        grad_bias,
    })
}

/// How per-role logits collapse into one column relevance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelevanceReduction {
    #[default]
    Max,
    /// Take a single role output as the relevance.
    Role(Role),
}

/// Column relevance logit per candidate: identity for coarse, max over
/// roles for fine.
pub fn coarse_relevance<T: Scalar>(scores: &ScoreSet<T>) -> Vec<T> {
    reduce_relevance(&scores.logits, RelevanceReduction::Max)
}

pub fn reduce_relevance<T: Scalar>(logits: &Matrix<T>, reduction: RelevanceReduction) -> Vec<T> {
    (0..logits.rows())
        .map(|i| {
            let row = logits.row(i);
            match reduction {
                _ if row.len() == 1 => row[0],
                RelevanceReduction::Max => row.iter().copied().fold(T::neg_infinity(), T::max),
                RelevanceReduction::Role(role) => row[role.index()],
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn seq(rows: usize, d: usize, alpha: Vec<usize>, omega: Vec<usize>) -> TokenSequence<f64> {
        let hidden = Matrix::from_fn(rows, d, |r, c| (r * 10 + c) as f64);
        TokenSequence::from_positions(alpha, omega, hidden).unwrap()
    }

    #[test]
    fn gathers_marker_rows() {
        let s = seq(7, 3, vec![2], vec![5]);
        let c = gather_candidates(&s);
        assert_eq!(c.row(0), &[20.0, 21.0, 22.0, 50.0, 51.0, 52.0]);
        let empty = gather_candidates(&seq(4, 3, vec![], vec![]));
        assert_eq!((empty.rows(), empty.cols()), (0, 6));
    }

    #[test]
    fn markers_from_token_ids() {
        let tokens = [9, 1, 7, 2, 1, 8, 8, 2];
        let s = TokenSequence::from_tokens(&tokens, 1, 2, Matrix::<f32>::zeros(8, 2)).unwrap();
        assert_eq!(s.alpha(), &[1, 4]);
        assert_eq!(s.omega(), &[3, 7]);
    }

    #[test]
    fn rejects_bad_markers() {
        let h = || Matrix::<f64>::zeros(8, 2);
        assert!(TokenSequence::from_positions(vec![1, 3], vec![2], h()).is_err());
        assert!(TokenSequence::from_positions(vec![3], vec![2], h()).is_err());
        assert!(TokenSequence::from_positions(vec![1, 2], vec![3, 4], h()).is_err());
        assert!(TokenSequence::from_positions(vec![1], vec![9], h()).is_err());
        assert!(TokenSequence::from_tokens(&[1, 1, 2], 1, 2, Matrix::<f64>::zeros(3, 2)).is_err());
    }

    #[test]
    fn zero_parameters_give_one_half() {
        let s = seq(10, 4, vec![0, 3, 6], vec![2, 5, 9]);
        let out = forward(&s, &HeadParameters::zeros(4, Granularity::Fine)).unwrap();
        assert!(out.probabilities.as_slice().iter().all(|&p| p == 0.5));
        assert_eq!((out.len(), out.logits.cols()), (3, 5));
    }

    #[test]
    fn bias_only() {
        let s = seq(4, 2, vec![0], vec![3]);
        let mut p = HeadParameters::zeros(2, Granularity::Coarse);
        p.bias[0] = 1.5;
        let out = forward(&s, &p).unwrap();
        assert_relative_eq!(out.probabilities.get(0, 0), 1.0 / (1.0 + (-1.5f64).exp()));
    }

    #[test]
    fn dimension_mismatch() {
        let s = seq(4, 2, vec![0], vec![3]);
        assert!(forward(&s, &HeadParameters::zeros(3, Granularity::Coarse)).is_err());
        assert!(HeadParameters::new(Matrix::<f64>::zeros(4, 2), vec![0.0; 2]).is_err());
        assert!(HeadParameters::new(Matrix::<f64>::zeros(4, 1), vec![0.0; 2]).is_err());
    }

    #[test]
    fn zero_logit_loss_is_ln2() {
        let s = seq(6, 2, vec![0, 3], vec![1, 5]);
        let out = forward(&s, &HeadParameters::zeros(2, Granularity::Fine)).unwrap();
        let labels = Matrix::from_fn(2, 5, |r, c| ((r + c) % 2) as f64);
        let lg = bce_loss(&out, &labels).unwrap();
        assert_relative_eq!(lg.loss, std::f64::consts::LN_2, max_relative = 1e-15);
    }

    #[test]
    fn confident_correct_loss_vanishes() {
        let features = Matrix::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let params = HeadParameters::new(Matrix::new(2, 1, vec![20.0, -20.0]).unwrap(), vec![0.0]).unwrap();
        let out = forward_features(features, &params).unwrap();
        let labels = Matrix::new(2, 1, vec![1.0, 0.0]).unwrap();
        assert!(bce_loss(&out, &labels).unwrap().loss < 1e-8);
    }

    #[test]
    fn loss_rejects_bad_labels() {
        let s = seq(3, 1, vec![0], vec![2]);
        let out = forward(&s, &HeadParameters::zeros(1, Granularity::Coarse)).unwrap();
        assert!(bce_loss(&out, &Matrix::new(1, 1, vec![0.5]).unwrap()).is_err());
        assert!(bce_loss(&out, &Matrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn extreme_logits_stay_finite() {
        for z in [-500.0f64, 500.0] {
            let features = Matrix::new(1, 2, vec![1.0, 0.0]).unwrap();
            let params = HeadParameters::new(Matrix::new(2, 1, vec![z, 0.0]).unwrap(), vec![0.0]).unwrap();
            let out = forward_features(features, &params).unwrap();
            let p = out.probabilities.get(0, 0);
            assert!(p > 0.0 && p < 1.0);
            for y in [0.0, 1.0] {
                let lg = bce_loss(&out, &Matrix::new(1, 1, vec![y]).unwrap()).unwrap();
                assert!(lg.loss.is_finite());
            }
        }
    }

    #[test]
    fn relevance_reduction() {
        let coarse = Matrix::new(1, 1, vec![-2.5]).unwrap();
        assert_eq!(reduce_relevance(&coarse, RelevanceReduction::Max), vec![-2.5]);
        let fine = Matrix::new(1, 5, vec![-1.0, 3.0, -4.0, 0.0, -2.0]).unwrap();
        assert_eq!(reduce_relevance(&fine, RelevanceReduction::Max), vec![3.0]);
        assert_eq!(reduce_relevance(&fine, RelevanceReduction::Role(Role::Order)), vec![0.0]);
    }

    #[test]
    fn single_precision_path() {
        let hidden = Matrix::<f32>::from_fn(5, 3, |r, c| (r as f32 - c as f32) * 0.1);
        let s = TokenSequence::from_positions(vec![0, 2], vec![1, 4], hidden).unwrap();
        let params = HeadParameters::new(Matrix::from_fn(6, 1, |r, _| r as f32 * 0.5), vec![0.25]).unwrap();
        let out = forward(&s, &params).unwrap();
        let c = gather_candidates(&s);
        for i in 0..2 {
            let z: f64 = (0..6).map(|k| c.get(i, k) as f64 * k as f64 * 0.5).sum::<f64>() + 0.25;
            assert_relative_eq!(out.logits.get(i, 0) as f64, z, max_relative = 1e-3);
        }
    }
}
