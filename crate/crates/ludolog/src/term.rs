//! Terms, clauses and programs of the game-description dialect.
//!
//! The printer is precedence-aware so that `pretty()` output reparses to a
//! structurally equal term; compound arguments are joined with a bare comma,
//! matching the solver's answer format.

use std::fmt;

use crate::number::Number;

/// Source range of a token or clause: 1-based line/column of the first byte
/// plus byte offsets into the original text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub line: u32,
    pub col: u32,
    pub byte_start: usize,
    pub byte_end: usize,
}

impl Span {
    pub fn new(line: u32, col: u32, byte_start: usize, byte_end: usize) -> Self {
        Span {
            line,
            col,
            byte_start,
            byte_end,
        }
    }
}

/// A logic variable. `id` is clause-local after parsing and globally unique
/// inside the engine after renaming. Anonymous `_` occurrences each get a
/// fresh id but keep the name `_`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Var {
    pub name: String,
    pub id: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Atom(String),
    Number(Number),
    Var(Var),
    Compound(String, Vec<Term>),
}

impl Term {
    pub fn atom(name: impl Into<String>) -> Term {
        Term::Atom(name.into())
    }

    pub fn int(n: i64) -> Term {
        Term::Number(Number::integer(n))
    }

    pub fn var(name: impl Into<String>, id: usize) -> Term {
        Term::Var(Var {
            name: name.into(),
            id,
        })
    }

    pub fn compound(functor: impl Into<String>, args: Vec<Term>) -> Term {
        let functor = functor.into();
        debug_assert!(!args.is_empty(), "zero-arity compounds must be atoms");
        Term::Compound(functor, args)
    }

    /// `(name, arity)` of a callable term, `None` for variables and numbers.
    pub fn functor_arity(&self) -> Option<(&str, usize)> {
        match self {
            Term::Atom(name) => Some((name, 0)),
            Term::Compound(name, args) => Some((name, args.len())),
            _ => None,
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Atom(_) | Term::Number(_) => true,
            Term::Compound(_, args) => args.iter().all(Term::is_ground),
        }
    }

    /// Structural depth: atoms/numbers/vars have depth 1.
    pub fn depth(&self) -> usize {
        match self {
            Term::Compound(_, args) => 1 + args.iter().map(Term::depth).max().unwrap_or(0),
            _ => 1,
        }
    }

    pub fn visit_vars<'a>(&'a self, f: &mut impl FnMut(&'a Var)) {
        match self {
            Term::Var(v) => f(v),
            Term::Compound(_, args) => {
                for arg in args {
                    arg.visit_vars(f);
                }
            }
            _ => {}
        }
    }

    pub fn max_var_id(&self) -> Option<usize> {
        let mut max = None;
        self.visit_vars(&mut |v| max = Some(max.map_or(v.id, |m: usize| m.max(v.id))));
        max
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_term(self))
    }
}

/// A clause `head :- body.`; facts have an empty body. Variable ids inside
/// are clause-local, numbered from 0 in first-occurrence order.
#[derive(Debug, Clone, PartialEq)]
pub struct Clause {
    pub head: Term,
    pub body: Vec<Term>,
    pub span: Span,
    pub n_vars: usize,
}

impl Clause {
    pub fn pretty(&self) -> String {
        if self.body.is_empty() {
            format!("{}.", print_term(&self.head))
        } else {
            let body: Vec<String> = self.body.iter().map(print_term).collect();
            format!("{} :- {}.", print_term(&self.head), body.join(", "))
        }
    }
}

/// An ordered clause list. Clause order equals textual order; resolution
/// tries clauses in this order, so it is part of program semantics.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    pub clauses: Vec<Clause>,
    pub source_name: String,
}

impl Program {
    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    /// Concatenates two programs, renumbering nothing: clause-local variable
    /// ids stay valid because they never cross clause boundaries.
    pub fn concat(&self, other: &Program) -> Program {
        let mut clauses = self.clauses.clone();
        clauses.extend(other.clauses.iter().cloned());
        Program {
            clauses,
            source_name: format!("{}+{}", self.source_name, other.source_name),
        }
    }

    pub fn pretty(&self) -> String {
        let mut out = String::new();
        for clause in &self.clauses {
            out.push_str(&clause.pretty());
            out.push('\n');
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Operator table (shared between parser and printer)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Assoc {
    Xfx,
    Xfy,
    Yfx,
}

pub(crate) const MAX_PREC: u32 = 1200;
/// Compound arguments and list items parse below the comma operator.
pub(crate) const ARG_PREC: u32 = 999;

pub(crate) fn infix_op(name: &str) -> Option<(u32, Assoc)> {
    Some(match name {
        ":-" => (1200, Assoc::Xfx),
        ";" => (1100, Assoc::Xfy),
        "->" => (1050, Assoc::Xfy),
        "," => (1000, Assoc::Xfy),
        "=" | "\\=" | "==" | "\\==" | "is" | "<" | ">" | "=<" | ">=" => (700, Assoc::Xfx),
        "+" | "-" => (500, Assoc::Yfx),
        "*" | "/" => (400, Assoc::Yfx),
        _ => return None,
    })
}

/// Prefix operators: `(precedence, operand_max)`; `fy` keeps the same level,
/// `fx` drops one.
pub(crate) fn prefix_op(name: &str) -> Option<(u32, u32)> {
    Some(match name {
        ":-" | "?-" => (1200, 1199),
        "\\+" => (900, 900),
        "-" => (200, 200),
        _ => return None,
    })
}

// ---------------------------------------------------------------------------
// Printer
// ---------------------------------------------------------------------------

pub fn print_term(term: &Term) -> String {
    let mut out = String::new();
    write_term(&mut out, term, MAX_PREC);
    out
}

fn is_unquoted_atom(name: &str) -> bool {
    let mut bytes = name.bytes();
    match bytes.next() {
        Some(b) if b.is_ascii_lowercase() => {}
        _ => return false,
    }
    bytes.all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

pub(crate) fn quote_atom(name: &str) -> String {
    let mut out = String::with_capacity(name.len() + 2);
    out.push('\'');
    for ch in name.chars() {
        match ch {
            '\'' => out.push_str("\\'"),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            _ => out.push(ch),
        }
    }
    out.push('\'');
    out
}

fn atom_text(name: &str) -> String {
    if is_unquoted_atom(name) || name == "[]" {
        name.to_string()
    } else {
        quote_atom(name)
    }
}

fn is_symbolic(ch: char) -> bool {
    matches!(
        ch,
        '+' | '-' | '*' | '/' | '\\' | '=' | '<' | '>' | ':' | '?' | ';'
    )
}

/// Appends `text`, inserting a space when the junction would otherwise lex
/// as one symbolic token (e.g. `1- -2`).
fn push_token(out: &mut String, text: &str) {
    if let (Some(prev), Some(next)) = (out.chars().last(), text.chars().next()) {
        if is_symbolic(prev) && is_symbolic(next) {
            out.push(' ');
        }
    }
    out.push_str(text);
}

fn write_term(out: &mut String, term: &Term, max_prec: u32) {
    match term {
        Term::Atom(name) => push_token(out, &atom_text(name)),
        Term::Number(n) => push_token(out, &n.to_string()),
        Term::Var(v) => {
            if v.name == "_" {
                out.push('_');
            } else {
                out.push_str(&v.name);
            }
        }
        Term::Compound(functor, args) => write_compound(out, functor, args, max_prec),
    }
}

fn write_compound(out: &mut String, functor: &str, args: &[Term], max_prec: u32) {
    // List cells print in bracket notation.
    if functor == "." && args.len() == 2 {
        write_list(out, args);
        return;
    }
    if args.len() == 2 {
        if let Some((prec, assoc)) = infix_op(functor) {
            let (left_max, right_max) = match assoc {
                Assoc::Xfx => (prec - 1, prec - 1),
                Assoc::Xfy => (prec - 1, prec),
                Assoc::Yfx => (prec, prec - 1),
            };
            let parens = prec > max_prec;
            if parens {
                out.push('(');
            }
            write_term(out, &args[0], left_max);
            if functor == "," {
                out.push(',');
            } else if functor.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_') {
                out.push(' ');
                out.push_str(functor);
                out.push(' ');
            } else {
                push_token(out, functor);
            }
            write_term(out, &args[1], right_max);
            if parens {
                out.push(')');
            }
            return;
        }
    }
    if args.len() == 1 {
        if let Some((prec, operand_max)) = prefix_op(functor) {
            let parens = prec > max_prec;
            if parens {
                out.push('(');
            }
            push_token(out, functor);
            if functor.bytes().all(|b| b.is_ascii_alphabetic()) {
                out.push(' ');
            }
            // `\+` reads better with a space, and `- 1` must not re-lex as
            // the literal `-1`.
            if functor == "\\+" || matches!(args[0], Term::Number(_)) {
                out.push(' ');
            }
            write_term(out, &args[0], operand_max);
            if parens {
                out.push(')');
            }
            return;
        }
    }
    push_token(out, &atom_text(functor));
    out.push('(');
    for (i, arg) in args.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write_term(out, arg, ARG_PREC);
    }
    out.push(')');
}

fn write_list(out: &mut String, cell: &[Term]) {
    out.push('[');
    write_term(out, &cell[0], ARG_PREC);
    let mut tail = &cell[1];
    loop {
        match tail {
            Term::Atom(name) if name == "[]" => break,
            Term::Compound(functor, args) if functor == "." && args.len() == 2 => {
                out.push(',');
                write_term(out, &args[0], ARG_PREC);
                tail = &args[1];
            }
            other => {
                out.push('|');
                write_term(out, other, ARG_PREC);
                break;
            }
        }
    }
    out.push(']');
}
