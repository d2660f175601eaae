//! Ground-truth SQL analysis: parsing, alias resolution and role-labeled
//! schema links.

mod analysis;
pub mod ast;
mod corpus;
mod lexer;
mod link;
mod parser;

use thiserror::Error;

pub use analysis::{
    analyze, extract_ground_truth, parse_sql, Analysis, AnalysisNote, Binding, BoundReference, QueryAst,
};
pub use corpus::{extract_corpus, load_dataset, ExtractionReport, LabeledExample, RowFailure, RowNote};
pub use link::{
    diff_links, read_links, write_links, LinkDiff, LinkEntry, Role, RoleMismatch, RoleSet, SchemaLink,
};
pub use parser::parse_query;

#[derive(Debug, Error)]
pub enum SqlError {
    #[error("syntax error at byte {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown table alias `{alias}` at byte {pos}")]
    UnknownAlias { alias: String, pos: usize },
    #[error("unknown table `{table}`")]
    UnknownTable { table: String },
    #[error("column `{column}` at byte {pos} is not in any table in scope")]
    UnknownColumn { column: String, pos: usize },
    #[error("column `{column}` at byte {pos} is ambiguous between {tables:?}")]
    AmbiguousColumn {
        column: String,
        tables: Vec<String>,
        pos: usize,
    },
    #[error("links belong to different databases: `{a}` vs `{b}`")]
    DbMismatch { a: String, b: String },
    #[error("link file line {line}: {message}")]
    LinkFile { line: usize, message: String },
    #[error("dataset {path}: {message}")]
    Dataset { path: String, message: String },
}
