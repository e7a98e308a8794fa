//! ludolog — a logic-programming toolkit for strategic games.
//!
//! The crate turns natural-language descriptions of strategic scenarios into
//! executable game specifications: a lexer/parser for a closed
//! logic-programming dialect, a backtracking resolution engine with the
//! game-independent situation-calculus rules built in, payoff-matrix
//! extraction and ordering-based game classification, an LLM pipeline with a
//! syntax-repair loop and record/replay transport, and an evaluation harness
//! that aggregates syntactic/semantic accuracy over a description corpus.

pub mod engine;
pub mod eval;
pub mod games;
pub mod lexer;
pub mod number;
pub mod parser;
pub mod cli;
pub mod corpus;
pub mod pipeline;
pub mod term;

pub use engine::{solve, EngineError, EngineLimits, Solution};
pub use number::Number;
pub use parser::{check_syntax, check_syntax_with, parse_program, parse_query, SyntaxReport};
pub use term::{Clause, Program, Span, Term};
