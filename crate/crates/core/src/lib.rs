//! Schema linking for Text-to-SQL: ground-truth extraction from gold SQL,
//! an extractive relevance head over marker hidden states, reference
//! scorers, focused-schema prompts and linking metrics.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};

pub mod focus;
pub mod head;
pub mod metrics;
pub mod rng;
pub mod schema;
pub mod scorers;
pub mod sql;

/// Floating-point element type for the head and the ranking metrics.
pub trait Scalar: Float + FromPrimitive + Debug + Display + Default + Send + Sync + 'static {}

impl<T> Scalar for T where T: Float + FromPrimitive + Debug + Display + Default + Send + Sync + 'static {}

pub type Matrix32 = head::Matrix<f32>;
pub type Matrix64 = head::Matrix<f64>;
pub type TokenSequence32 = head::TokenSequence<f32>;
pub type TokenSequence64 = head::TokenSequence<f64>;
pub type HeadParameters32 = head::HeadParameters<f32>;
pub type HeadParameters64 = head::HeadParameters<f64>;
pub type ScoreSet32 = head::ScoreSet<f32>;
pub type ScoreSet64 = head::ScoreSet<f64>;
