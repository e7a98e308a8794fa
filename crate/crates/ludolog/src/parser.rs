//! Operator-precedence parser with clause-boundary error recovery.
//!
//! The dialect is a closed logic-programming subset: the operators in
//! [`crate::term::infix_op`]/[`prefix_op`], `%` comments, lists, integers and
//! decimals. Directives are not executed; any `:- ...` or `?- ...` clause is
//! skipped with an `unknown_directive` warning. On a syntax error the parser
//! records it and resumes at the next clause-terminating `.`, so one pass
//! reports every broken clause — the repair prompt depends on that.

use std::collections::HashMap;
use std::fmt;

use serde::de::Error as _;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::lexer::{tokenize_lossy, Tok, Token};
use crate::term::{infix_op, prefix_op, Assoc, Clause, Program, Span, Term, ARG_PREC, MAX_PREC};

#[derive(Debug, Clone)]
pub struct SyntaxError {
    pub message: String,
    pub span: Span,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "line {}, column {}: {}",
            self.span.line, self.span.col, self.message
        )
    }
}

/// Equality ignores byte offsets: the serialized form carries line/column
/// only, and reports must round-trip through JSON unchanged.
impl PartialEq for SyntaxError {
    fn eq(&self, other: &Self) -> bool {
        self.message == other.message
            && self.span.line == other.span.line
            && self.span.col == other.span.col
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningKind {
    SingletonVariable,
    UnknownDirective,
}

#[derive(Debug, Clone)]
pub struct SyntaxWarning {
    pub kind: WarningKind,
    pub message: String,
    pub span: Span,
}

impl PartialEq for SyntaxWarning {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.message == other.message
            && self.span.line == other.span.line
            && self.span.col == other.span.col
    }
}

/// Result of checking one source text. `ok` is true exactly when `errors`
/// is empty; warnings never flip it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SyntaxReport {
    pub errors: Vec<SyntaxError>,
    pub warnings: Vec<SyntaxWarning>,
}

impl SyntaxReport {
    pub fn ok(&self) -> bool {
        self.errors.is_empty()
    }
}

impl Serialize for SyntaxError {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("SyntaxError", 3)?;
        s.serialize_field("message", &self.message)?;
        s.serialize_field("line", &self.span.line)?;
        s.serialize_field("col", &self.span.col)?;
        s.end()
    }
}

impl<'de> Deserialize<'de> for SyntaxError {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            message: String,
            line: u32,
            col: u32,
        }
        let w = Wire::deserialize(deserializer)?;
        Ok(SyntaxError {
            message: w.message,
            span: Span::new(w.line, w.col, 0, 0),
        })
    }
}

impl Serialize for SyntaxWarning {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("SyntaxWarning", 4)?;
        s.serialize_field("kind", &self.kind)?;
        s.serialize_field("message", &self.message)?;
        s.serialize_field("line", &self.span.line)?;
        s.serialize_field("col", &self.span.col)?;
        s.end()
    }
}

impl<'de> Deserialize<'de> for SyntaxWarning {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            kind: WarningKind,
            message: String,
            line: u32,
            col: u32,
        }
        let w = Wire::deserialize(deserializer)?;
        Ok(SyntaxWarning {
            kind: w.kind,
            message: w.message,
            span: Span::new(w.line, w.col, 0, 0),
        })
    }
}

impl Serialize for SyntaxReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("SyntaxReport", 3)?;
        s.serialize_field("ok", &self.ok())?;
        s.serialize_field("errors", &self.errors)?;
        s.serialize_field("warnings", &self.warnings)?;
        s.end()
    }
}

impl<'de> Deserialize<'de> for SyntaxReport {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            ok: bool,
            errors: Vec<SyntaxError>,
            warnings: Vec<SyntaxWarning>,
        }
        let w = Wire::deserialize(deserializer)?;
        if w.ok != w.errors.is_empty() {
            return Err(D::Error::custom("report 'ok' disagrees with its errors"));
        }
        Ok(SyntaxReport {
            errors: w.errors,
            warnings: w.warnings,
        })
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Promote singleton-variable warnings to errors.
    pub strict: bool,
}

pub fn parse_program(text: &str) -> (Program, SyntaxReport) {
    parse_program_named(text, "<input>", &ParseOptions::default())
}

pub fn parse_program_named(
    text: &str,
    source_name: &str,
    options: &ParseOptions,
) -> (Program, SyntaxReport) {
    let (tokens, lex_errors) = tokenize_lossy(text);
    let mut parser = Parser::new(tokens);
    let mut report = SyntaxReport::default();
    for err in lex_errors {
        report.errors.push(SyntaxError {
            message: err.message,
            span: err.span,
        });
    }
    let clauses = parser.program(&mut report, options);
    report
        .errors
        .sort_by_key(|e| (e.span.byte_start, e.span.line, e.span.col));
    (
        Program {
            clauses,
            source_name: source_name.to_string(),
        },
        report,
    )
}

/// The pipeline's validation gate: parse and keep only the report.
pub fn check_syntax(text: &str) -> SyntaxReport {
    check_syntax_with(text, &ParseOptions::default())
}

pub fn check_syntax_with(text: &str, options: &ParseOptions) -> SyntaxReport {
    parse_program_named(text, "<input>", options).1
}

/// Parses a query of the form `?- g1, g2.` (the `?-` and final `.` are both
/// optional). Variable ids are numbered from 0 in first-occurrence order.
pub fn parse_query(text: &str) -> Result<Vec<Term>, SyntaxError> {
    let tokens = tokenize_lossy(text);
    if let Some(hole) = tokens.1.into_iter().next() {
        return Err(SyntaxError {
            message: hole.message,
            span: hole.span,
        });
    }
    let mut parser = Parser::new(tokens.0);
    if matches!(parser.peek(), Some(Tok::Op("?-"))) {
        parser.next();
    }
    let t = parser.term(MAX_PREC)?;
    if matches!(parser.peek(), Some(Tok::Dot)) {
        parser.next();
    }
    if let Some(tok) = parser.tokens.get(parser.pos) {
        return Err(SyntaxError {
            message: "unexpected input after query".to_string(),
            span: tok.span,
        });
    }
    Ok(flatten_conjunction(t.term))
}

/// Parses a single ground-ish term (no trailing `.`), for CLI arguments.
pub fn parse_term_str(text: &str) -> Result<Term, SyntaxError> {
    let tokens = tokenize_lossy(text);
    if let Some(hole) = tokens.1.into_iter().next() {
        return Err(SyntaxError {
            message: hole.message,
            span: hole.span,
        });
    }
    let mut parser = Parser::new(tokens.0);
    let t = parser.term(ARG_PREC)?;
    if let Some(tok) = parser.tokens.get(parser.pos) {
        return Err(SyntaxError {
            message: "unexpected input after term".to_string(),
            span: tok.span,
        });
    }
    Ok(t.term)
}

fn flatten_conjunction(term: Term) -> Vec<Term> {
    match term {
        Term::Compound(f, args) if f == "," && args.len() == 2 => {
            let mut iter = args.into_iter();
            let left = iter.next().unwrap();
            let right = iter.next().unwrap();
            let mut out = flatten_conjunction(left);
            out.extend(flatten_conjunction(right));
            out
        }
        other => vec![other],
    }
}

struct Parsed {
    term: Term,
    prec: u32,
    span: Span,
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    vars: HashMap<String, usize>,
    next_var: usize,
    /// `(name, span)` of each named-variable occurrence in the current clause.
    occurrences: Vec<(String, Span)>,
    directive_warnings: Vec<SyntaxWarning>,
}

impl Parser {
    fn new(tokens: Vec<Token>) -> Self {
        Parser {
            tokens,
            pos: 0,
            vars: HashMap::new(),
            next_var: 0,
            occurrences: Vec::new(),
            directive_warnings: Vec::new(),
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn peek_span(&self) -> Span {
        self.tokens.get(self.pos).map_or_else(
            || {
                self.tokens
                    .last()
                    .map(|t| Span::new(t.span.line, t.span.col, t.span.byte_end, t.span.byte_end))
                    .unwrap_or_default()
            },
            |t| t.span,
        )
    }

    fn next(&mut self) -> Option<Token> {
        let tok = self.tokens.get(self.pos).cloned();
        if tok.is_some() {
            self.pos += 1;
        }
        tok
    }

    fn eof(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn reset_clause_state(&mut self) {
        self.vars.clear();
        self.next_var = 0;
        self.occurrences.clear();
    }

    /// Skips tokens until a clause-terminating `.` has been consumed. If the
    /// token that triggered the error was itself a `.`, the boundary is
    /// already behind us.
    fn recover(&mut self) {
        if self.pos > 0 && self.tokens.get(self.pos - 1).map(|t| &t.tok) == Some(&Tok::Dot) {
            return;
        }
        while let Some(tok) = self.next() {
            if tok.tok == Tok::Dot {
                break;
            }
        }
    }

    fn program(&mut self, report: &mut SyntaxReport, options: &ParseOptions) -> Vec<Clause> {
        let mut clauses = Vec::new();
        while !self.eof() {
            // A hole between clauses was already reported by the lexer; its
            // surrounding junk was skipped there too.
            if matches!(self.peek(), Some(Tok::Hole)) {
                self.next();
                continue;
            }
            self.reset_clause_state();
            let start_span = self.peek_span();
            match self.clause() {
                Ok(None) => {} // directive or hole handled inside
                Ok(Some(mut clause)) => {
                    clause.span = Span::new(
                        start_span.line,
                        start_span.col,
                        start_span.byte_start,
                        clause.span.byte_end,
                    );
                    self.check_singletons(report, options);
                    clauses.push(clause);
                }
                Err(Some(err)) => {
                    report.errors.push(err);
                    self.recover();
                }
                Err(None) => {
                    // Lexical hole mid-clause: the error is already recorded.
                    self.recover();
                }
            }
        }
        self.emit_directive_warnings(report);
        clauses
    }

    fn emit_directive_warnings(&mut self, report: &mut SyntaxReport) {
        report.warnings.append(&mut self.directive_warnings);
        report
            .warnings
            .sort_by_key(|w| (w.span.byte_start, w.span.line, w.span.col));
    }

    fn check_singletons(&mut self, report: &mut SyntaxReport, options: &ParseOptions) {
        let mut counts: HashMap<&str, (usize, Span)> = HashMap::new();
        let mut order: Vec<&str> = Vec::new();
        for (name, span) in &self.occurrences {
            let entry = counts.entry(name).or_insert_with(|| {
                order.push(name);
                (0, *span)
            });
            entry.0 += 1;
        }
        for name in order {
            let (count, span) = counts[name];
            if count == 1 {
                let message = format!("singleton variable {name}");
                if options.strict {
                    report.errors.push(SyntaxError { message, span });
                } else {
                    report.warnings.push(SyntaxWarning {
                        kind: WarningKind::SingletonVariable,
                        message,
                        span,
                    });
                }
            }
        }
    }

    /// Parses one clause ending in `.`. `Ok(None)` for skipped directives,
    /// `Err(None)` when a lexical hole interrupted the clause.
    fn clause(&mut self) -> Result<Option<Clause>, Option<SyntaxError>> {
        let term = self.term(MAX_PREC).map_err(|e| {
            if e.message == HOLE_MESSAGE {
                None
            } else {
                Some(e)
            }
        })?;
        let dot_span = self.peek_span();
        match self.next() {
            Some(tok) if tok.tok == Tok::Dot => {}
            Some(tok) if tok.tok == Tok::Hole => return Err(None),
            _ => {
                return Err(Some(SyntaxError {
                    message: "expected '.' after clause".to_string(),
                    span: dot_span,
                }))
            }
        }
        let end = dot_span.byte_end;
        let span = Span::new(term.span.line, term.span.col, term.span.byte_start, end);
        match term.term {
            Term::Compound(f, args) if f == ":-" && args.len() == 2 => {
                let mut iter = args.into_iter();
                let head = iter.next().unwrap();
                let body = flatten_conjunction(iter.next().unwrap());
                self.validate_head(&head, span)?;
                Ok(Some(Clause {
                    head,
                    body,
                    span,
                    n_vars: self.next_var,
                }))
            }
            Term::Compound(f, args) if (f == ":-" || f == "?-") && args.len() == 1 => {
                self.directive_warnings.push(SyntaxWarning {
                    kind: WarningKind::UnknownDirective,
                    message: format!(
                        "unknown directive '{}' ignored",
                        Term::Compound(f, args)
                    ),
                    span,
                });
                Ok(None)
            }
            head => {
                self.validate_head(&head, span)?;
                Ok(Some(Clause {
                    head,
                    body: Vec::new(),
                    span,
                    n_vars: self.next_var,
                }))
            }
        }
    }

    fn validate_head(&self, head: &Term, span: Span) -> Result<(), Option<SyntaxError>> {
        let message = match head {
            Term::Var(_) => "clause head may not be a variable",
            Term::Number(_) => "clause head may not be a number",
            _ => return Ok(()),
        };
        Err(Some(SyntaxError {
            message: message.to_string(),
            span,
        }))
    }

    fn term(&mut self, max_prec: u32) -> Result<Parsed, SyntaxError> {
        let mut left = self.primary(max_prec)?;
        while let Some(tok) = self.peek() {
            let op_name: &str = match tok {
                Tok::Comma => ",",
                Tok::Op(op) => op,
                Tok::Atom(name) if infix_op(name).is_some() => name,
                _ => break,
            };
            let Some((prec, assoc)) = infix_op(op_name) else {
                break;
            };
            if prec > max_prec {
                break;
            }
            let (left_max, right_max) = match assoc {
                Assoc::Xfx => (prec - 1, prec - 1),
                Assoc::Xfy => (prec - 1, prec),
                Assoc::Yfx => (prec, prec - 1),
            };
            if left.prec > left_max {
                let span = self.peek_span();
                return Err(SyntaxError {
                    message: format!("operator '{op_name}' priority clash"),
                    span,
                });
            }
            let op_name = op_name.to_string();
            self.next();
            let right = self.term(right_max)?;
            left = Parsed {
                span: Span::new(
                    left.span.line,
                    left.span.col,
                    left.span.byte_start,
                    right.span.byte_end,
                ),
                term: Term::Compound(op_name, vec![left.term, right.term]),
                prec,
            };
        }
        Ok(left)
    }

    fn primary(&mut self, max_prec: u32) -> Result<Parsed, SyntaxError> {
        let span = self.peek_span();
        let Some(token) = self.next() else {
            return Err(SyntaxError {
                message: "unexpected end of input".to_string(),
                span,
            });
        };
        match token.tok {
            Tok::Hole => Err(SyntaxError {
                message: HOLE_MESSAGE.to_string(),
                span: token.span,
            }),
            Tok::Atom(name) => Ok(Parsed {
                term: Term::Atom(name),
                prec: 0,
                span: token.span,
            }),
            Tok::Num(n) => Ok(Parsed {
                term: Term::Number(n),
                prec: 0,
                span: token.span,
            }),
            Tok::Var(name) => {
                let term = self.make_var(name, token.span);
                Ok(Parsed {
                    term,
                    prec: 0,
                    span: token.span,
                })
            }
            Tok::Functor(name) => {
                let mut args = vec![self.term(ARG_PREC)?.term];
                loop {
                    match self.next() {
                        Some(tok) if tok.tok == Tok::Comma => args.push(self.term(ARG_PREC)?.term),
                        Some(tok) if tok.tok == Tok::Close => {
                            let span = Span::new(
                                token.span.line,
                                token.span.col,
                                token.span.byte_start,
                                tok.span.byte_end,
                            );
                            return Ok(Parsed {
                                term: Term::Compound(name, args),
                                prec: 0,
                                span,
                            });
                        }
                        other => {
                            let span = other.map_or(self.peek_span(), |t| t.span);
                            return Err(SyntaxError {
                                message: "expected ',' or ')' in argument list".to_string(),
                                span,
                            });
                        }
                    }
                }
            }
            Tok::Open => {
                let inner = self.term(MAX_PREC)?;
                match self.next() {
                    Some(tok) if tok.tok == Tok::Close => Ok(Parsed {
                        term: inner.term,
                        prec: 0,
                        span: Span::new(
                            token.span.line,
                            token.span.col,
                            token.span.byte_start,
                            tok.span.byte_end,
                        ),
                    }),
                    other => {
                        let span = other.map_or(self.peek_span(), |t| t.span);
                        Err(SyntaxError {
                            message: "expected ')'".to_string(),
                            span,
                        })
                    }
                }
            }
            Tok::OpenList => self.list(token.span),
            Tok::Op(op) => {
                // A minus directly before a number literal folds into a
                // negative literal, so `payoff(a,b,-1,3)` needs no spaces.
                if op == "-" {
                    if let Some(Tok::Num(_)) = self.peek() {
                        let num_tok = self.next().unwrap();
                        let Tok::Num(n) = num_tok.tok else { unreachable!() };
                        let negated = n.checked_neg().ok_or_else(|| SyntaxError {
                            message: "number literal out of range".to_string(),
                            span: num_tok.span,
                        })?;
                        return Ok(Parsed {
                            term: Term::Number(negated),
                            prec: 0,
                            span: Span::new(
                                token.span.line,
                                token.span.col,
                                token.span.byte_start,
                                num_tok.span.byte_end,
                            ),
                        });
                    }
                }
                let Some((prec, operand_max)) = prefix_op(op) else {
                    return Err(SyntaxError {
                        message: format!("unexpected operator '{op}'"),
                        span: token.span,
                    });
                };
                if prec > max_prec {
                    return Err(SyntaxError {
                        message: format!("operator '{op}' not allowed here"),
                        span: token.span,
                    });
                }
                let operand = self.term(operand_max)?;
                Ok(Parsed {
                    span: Span::new(
                        token.span.line,
                        token.span.col,
                        token.span.byte_start,
                        operand.span.byte_end,
                    ),
                    term: Term::Compound(op.to_string(), vec![operand.term]),
                    prec,
                })
            }
            Tok::Close | Tok::CloseList | Tok::Comma | Tok::Bar | Tok::Dot => Err(SyntaxError {
                message: format!("unexpected token '{}'", token_text(&token.tok)),
                span: token.span,
            }),
        }
    }

    fn list(&mut self, open_span: Span) -> Result<Parsed, SyntaxError> {
        if matches!(self.peek(), Some(Tok::CloseList)) {
            let close = self.next().unwrap();
            return Ok(Parsed {
                term: Term::Atom("[]".to_string()),
                prec: 0,
                span: Span::new(
                    open_span.line,
                    open_span.col,
                    open_span.byte_start,
                    close.span.byte_end,
                ),
            });
        }
        let mut items = vec![self.term(ARG_PREC)?.term];
        let mut tail = Term::Atom("[]".to_string());
        loop {
            match self.next() {
                Some(tok) if tok.tok == Tok::Comma => items.push(self.term(ARG_PREC)?.term),
                Some(tok) if tok.tok == Tok::Bar => {
                    tail = self.term(ARG_PREC)?.term;
                    match self.next() {
                        Some(t) if t.tok == Tok::CloseList => break,
                        other => {
                            let span = other.map_or(self.peek_span(), |t| t.span);
                            return Err(SyntaxError {
                                message: "expected ']' after list tail".to_string(),
                                span,
                            });
                        }
                    }
                }
                Some(tok) if tok.tok == Tok::CloseList => break,
                other => {
                    let span = other.map_or(self.peek_span(), |t| t.span);
                    return Err(SyntaxError {
                        message: "expected ',', '|' or ']' in list".to_string(),
                        span,
                    });
                }
            }
        }
        let term = items.into_iter().rev().fold(tail, |acc, item| {
            Term::Compound(".".to_string(), vec![item, acc])
        });
        Ok(Parsed {
            term,
            prec: 0,
            span: open_span,
        })
    }

    fn make_var(&mut self, name: String, span: Span) -> Term {
        if name == "_" {
            let id = self.next_var;
            self.next_var += 1;
            return Term::Var(crate::term::Var {
                name: "_".to_string(),
                id,
            });
        }
        self.occurrences.push((name.clone(), span));
        let id = match self.vars.get(&name) {
            Some(&id) => id,
            None => {
                let id = self.next_var;
                self.next_var += 1;
                self.vars.insert(name.clone(), id);
                id
            }
        };
        Term::Var(crate::term::Var { name, id })
    }
}

/// Internal sentinel: a lexical hole interrupted the clause; the lexer
/// already reported the real error.
const HOLE_MESSAGE: &str = "\u{0}hole";

fn token_text(tok: &Tok) -> &'static str {
    match tok {
        Tok::Close => ")",
        Tok::CloseList => "]",
        Tok::Comma => ",",
        Tok::Bar => "|",
        Tok::Dot => ".",
        _ => "?",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::print_term;

    fn ok_program(text: &str) -> Program {
        let (program, report) = parse_program(text);
        assert!(report.ok(), "unexpected errors: {:?}", report.errors);
        program
    }

    #[test]
    fn fact_and_rule_parse_identically_shaped() {
        let program = ok_program("foo(a).\nbar(X) :- foo(X).");
        assert_eq!(program.len(), 2);
        assert!(program.clauses[0].body.is_empty());
        assert_eq!(program.clauses[1].body.len(), 1);
    }

    #[test]
    fn negative_payoff_without_spaces() {
        let program = ok_program("payoff(a,b,-1,3).");
        let head = &program.clauses[0].head;
        assert_eq!(print_term(head), "payoff(a,b,-1,3)");
    }

    #[test]
    fn quoting_is_canonicalized_in_equality() {
        let a = ok_program("payoff('abc').");
        let b = ok_program("payoff(abc).");
        assert_eq!(a.clauses[0].head, b.clauses[0].head);
    }

    #[test]
    fn shared_variable_names_share_ids() {
        let program = ok_program("f(X, Y, X).");
        let Term::Compound(_, args) = &program.clauses[0].head else {
            panic!()
        };
        assert_eq!(args[0], args[2]);
        assert_ne!(args[0], args[1]);
    }

    #[test]
    fn anonymous_variables_are_fresh() {
        let program = ok_program("f(_, _).");
        let Term::Compound(_, args) = &program.clauses[0].head else {
            panic!()
        };
        assert_ne!(args[0], args[1]);
        let report = check_syntax("f(_, _).");
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn singleton_warning_exactly_once_rule() {
        let report = check_syntax("effect(did(P, M), choice(P, M), S).");
        assert!(report.ok());
        assert_eq!(report.warnings.len(), 1);
        assert_eq!(report.warnings[0].kind, WarningKind::SingletonVariable);
        assert_eq!(report.warnings[0].message, "singleton variable S");
        // Twice-used variables never warn.
        assert!(check_syntax("f(X, X).").warnings.is_empty());
    }

    #[test]
    fn strict_mode_promotes_singletons() {
        let report = check_syntax_with(
            "effect(did(P, M), choice(P, M), S).",
            &ParseOptions { strict: true },
        );
        assert!(!report.ok());
        assert_eq!(report.errors[0].message, "singleton variable S");
    }

    #[test]
    fn head_must_be_callable() {
        let (_, report) = parse_program("X :- foo.");
        assert_eq!(report.errors[0].message, "clause head may not be a variable");
        let (_, report) = parse_program("42.");
        assert_eq!(report.errors[0].message, "clause head may not be a number");
    }

    #[test]
    fn error_recovery_at_clause_boundary() {
        let (program, report) = parse_program("foo(X :-.\nbar.");
        assert!(!report.ok());
        assert_eq!(report.errors.len(), 1);
        assert_eq!(program.len(), 1);
        assert_eq!(print_term(&program.clauses[0].head), "bar");
    }

    #[test]
    fn multiple_errors_reported_in_order() {
        let (_, report) = parse_program("foo(.\nbar(.\nbaz.");
        assert_eq!(report.errors.len(), 2);
        assert!(report.errors[0].span.line < report.errors[1].span.line);
    }

    #[test]
    fn directives_warn_and_are_skipped() {
        let (program, report) = parse_program(":- use_module(library(lists)).\nfoo.");
        assert!(report.ok());
        assert_eq!(program.len(), 1);
        assert_eq!(report.warnings.len(), 1);
        assert_eq!(report.warnings[0].kind, WarningKind::UnknownDirective);
    }

    #[test]
    fn empty_input_is_ok() {
        let (program, report) = parse_program("");
        assert!(report.ok());
        assert!(program.is_empty());
    }

    #[test]
    fn if_then_else_shape() {
        let program = ok_program("f(X) :- ( g(X) -> h(X) ; i(X) ).");
        let body = &program.clauses[0].body;
        assert_eq!(body.len(), 1);
        let Term::Compound(f, args) = &body[0] else { panic!() };
        assert_eq!(f, ";");
        let Term::Compound(inner, _) = &args[0] else { panic!() };
        assert_eq!(inner, "->");
    }

    #[test]
    fn query_parsing() {
        let goals = parse_query("?- game(s0, F), finally(goal(p1, 100), F).").unwrap();
        assert_eq!(goals.len(), 2);
        let goals = parse_query("foo(X)").unwrap();
        assert_eq!(goals.len(), 1);
        assert!(parse_query("foo(").is_err());
    }

    #[test]
    fn report_json_shape() {
        let report = check_syntax("effect(did(P, M), choice(P, M), S).\n// x");
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["ok"], serde_json::json!(false));
        assert_eq!(json["errors"][0]["line"], serde_json::json!(2));
        assert_eq!(json["errors"][0]["col"], serde_json::json!(1));
        assert_eq!(
            json["warnings"][0]["kind"],
            serde_json::json!("singleton_variable")
        );
        let back: SyntaxReport = serde_json::from_value(json).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn span_soundness() {
        let text = "foo(X :-.\n// zap\nbar(1 + ).\n";
        let (_, report) = parse_program(text);
        assert!(!report.ok());
        for err in &report.errors {
            assert!(err.span.byte_start < text.len());
            let line_start: usize = text
                .lines()
                .take(err.span.line as usize - 1)
                .map(|l| l.len() + 1)
                .sum();
            assert_eq!(line_start + err.span.col as usize - 1, err.span.byte_start);
        }
    }

    #[test]
    fn round_trip_structural_equality() {
        let src = "\
game(F,F) :- final(F).
game(S,F) :- \\+ final(S), legal(M,S), game(do(M,S),F).
f(X) :- ( g(X) -> Y is X + 1, h(Y) ; i(-1) ).
payoff('D','D',35,35).
";
        let (program, report) = parse_program(src);
        assert!(report.ok());
        let printed = program.pretty();
        let (reparsed, report2) = parse_program(&printed);
        assert!(report2.ok(), "reparse failed: {:?}\n{}", report2.errors, printed);
        assert_eq!(program.clauses.len(), reparsed.clauses.len());
        for (a, b) in program.clauses.iter().zip(&reparsed.clauses) {
            assert_eq!(a.head, b.head);
            assert_eq!(a.body, b.body);
        }
    }
}
