//! SQL parsing and provenance extraction.

pub mod ast;
pub mod extract;
pub mod lexer;
pub mod parser;

pub use ast::{Statement, StatementKind};
pub use extract::{extract, to_events, Extraction, ExtractionError};
pub use parser::parse;

/// Syntax error outside the supported grammar, with the byte offset of the
/// offending input. Upstream this triggers the parse-failure path.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("parse error at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(offset: usize, message: impl Into<String>) -> Self {
        ParseError {
            offset,
            message: message.into(),
        }
    }
}
