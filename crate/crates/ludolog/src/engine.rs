//! Backtracking resolution engine over [`Program`]s.
//!
//! SLD resolution with depth-first search, clause order and left-to-right
//! goal order, so answer order is deterministic and matches the textual
//! order of the program. Negation as failure, if-then-else with commit to
//! the first condition solution, and a small set of builtins. The
//! game-independent situation-calculus rules ship with the engine.
//!
//! Generated programs are untrusted, so the occurs check is on, every
//! resolution step is counted against a limit, and term depth is bounded:
//! a query either yields finitely many solutions, exhausts, or aborts with
//! a resource error — it never hangs or returns a wrong answer.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::rc::Rc;

use thiserror::Error;

use crate::number::Number;
use crate::parser::parse_program_named;
use crate::term::{print_term, Program, Term, Var};

pub const GAME_INDEPENDENT_SRC: &str = include_str!("../fixtures/games/game_independent.pl");

/// The built-in game-independent rules: `game/2` (two clauses) and
/// `holds/2` (initially / effect / frame).
pub fn game_independent_program() -> Program {
    let (program, report) = parse_program_named(
        GAME_INDEPENDENT_SRC,
        "game_independent",
        &Default::default(),
    );
    debug_assert!(report.ok());
    program
}

/// Prepends the game-independent rules to a game-specific program.
pub fn with_game_rules(game_specific: &Program) -> Program {
    game_independent_program().concat(game_specific)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineLimits {
    pub max_inference_steps: u64,
    pub max_term_depth: usize,
    pub max_solutions: Option<u64>,
}

impl Default for EngineLimits {
    fn default() -> Self {
        EngineLimits {
            max_inference_steps: 1_000_000,
            max_term_depth: 512,
            max_solutions: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitKind {
    Steps,
    Depth,
    Solutions,
}

impl fmt::Display for LimitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LimitKind::Steps => write!(f, "inference steps"),
            LimitKind::Depth => write!(f, "term depth"),
            LimitKind::Solutions => write!(f, "solutions"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(LimitKind),
    #[error("type error: {0}")]
    Type(String),
}

/// Query diagnostics. Unknown predicates fail silently during resolution but
/// are counted here, which is how a missing helper predicate in generated
/// code surfaces as a precise verdict instead of a crash.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Diagnostics {
    pub steps_used: u64,
    /// `name/arity` of every unknown predicate called, with call counts.
    pub unknown_predicates: BTreeMap<String, u64>,
    /// Negation-as-failure calls whose goal was not ground (lint signal).
    pub non_ground_naf_calls: u64,
}

/// One answer: the query's named variables bound to fully resolved terms,
/// in first-occurrence order, plus the 0-based derivation index.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub bindings: Vec<(String, Term)>,
    pub index: u64,
}

/// Answer line in the solver's output format: `X=1, Y=2`, or `true` for a
/// variable-free query.
pub fn format_solution(solution: &Solution) -> String {
    if solution.bindings.is_empty() {
        return "true".to_string();
    }
    solution
        .bindings
        .iter()
        .map(|(name, term)| format!("{name}={}", print_term(term)))
        .collect::<Vec<_>>()
        .join(", ")
}

// ---------------------------------------------------------------------------
// Functional unification (public surface)
// ---------------------------------------------------------------------------

/// A variable-id-to-term mapping. Applying the bindings repeatedly reaches a
/// fixpoint because the occurs check rejects cycles.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bindings {
    map: HashMap<usize, Term>,
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, id: usize) -> Option<&Term> {
        self.map.get(&id)
    }

    /// Fully applies the bindings to a term.
    pub fn resolve(&self, term: &Term) -> Term {
        match term {
            Term::Var(v) => match self.map.get(&v.id) {
                Some(bound) => self.resolve(bound),
                None => term.clone(),
            },
            Term::Compound(f, args) => Term::Compound(
                f.clone(),
                args.iter().map(|a| self.resolve(a)).collect(),
            ),
            _ => term.clone(),
        }
    }

    fn walk<'a>(&'a self, mut term: &'a Term) -> &'a Term {
        while let Term::Var(v) = term {
            match self.map.get(&v.id) {
                Some(bound) => term = bound,
                None => break,
            }
        }
        term
    }

    fn occurs(&self, id: usize, term: &Term) -> bool {
        match self.walk(term) {
            Term::Var(v) => v.id == id,
            Term::Compound(_, args) => args.iter().any(|a| self.occurs(id, a)),
            _ => false,
        }
    }
}

/// Most general unifier extending `env`, with the occurs check; `None` on
/// mismatch. Failure is a normal outcome, not an error.
pub fn unify(a: &Term, b: &Term, env: &Bindings) -> Option<Bindings> {
    let mut out = env.clone();
    unify_in_place(a, b, &mut out).then_some(out)
}

fn unify_in_place(a: &Term, b: &Term, env: &mut Bindings) -> bool {
    let a = env.walk(a).clone();
    let b = env.walk(b).clone();
    match (&a, &b) {
        (Term::Var(x), Term::Var(y)) if x.id == y.id => true,
        (Term::Var(x), other) | (other, Term::Var(x)) => {
            if env.occurs(x.id, other) {
                false
            } else {
                env.map.insert(x.id, other.clone());
                true
            }
        }
        (Term::Atom(x), Term::Atom(y)) => x == y,
        (Term::Number(x), Term::Number(y)) => x == y,
        (Term::Compound(f, xs), Term::Compound(g, ys)) => {
            f == g && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| unify_in_place(x, y, env))
        }
        _ => false,
    }
}

// ---------------------------------------------------------------------------
// Machine
// ---------------------------------------------------------------------------

#[derive(Clone)]
enum Goals {
    Nil,
    Cons(Rc<(Term, Goals)>),
}

impl Goals {
    fn cons(goal: Term, rest: Goals) -> Goals {
        Goals::Cons(Rc::new((goal, rest)))
    }

    fn is_empty(&self) -> bool {
        matches!(self, Goals::Nil)
    }

    fn pop(&self) -> Option<(Term, Goals)> {
        match self {
            Goals::Nil => None,
            Goals::Cons(node) => Some((node.0.clone(), node.1.clone())),
        }
    }

    fn extend_front(self, goals: &[Term]) -> Goals {
        goals
            .iter()
            .rev()
            .fold(self, |acc, g| Goals::cons(g.clone(), acc))
    }
}

struct ChoicePoint {
    goals: Goals,
    trail_mark: usize,
    alt: Alt,
}

enum Alt {
    /// Remaining clauses for a predicate call.
    Clauses {
        goal: Term,
        clauses: Rc<Vec<usize>>,
        next: usize,
    },
    /// Untried right branch of a disjunction; `goals` is already the full
    /// continuation.
    Continue,
}

enum StepOutcome {
    Continue,
    Fail,
}

/// Lazily enumerates solutions; each `next()` resumes the search. The
/// iterator yields `Err` once on a resource/type error and then stops.
pub struct Solutions<'p> {
    machine: Machine<'p>,
    state: IterState,
}

enum IterState {
    Fresh,
    Running,
    Done,
}

impl<'p> Solutions<'p> {
    pub fn diagnostics(&self) -> &Diagnostics {
        &self.machine.diagnostics
    }
}

impl<'p> Iterator for Solutions<'p> {
    type Item = Result<Solution, EngineError>;

    fn next(&mut self) -> Option<Self::Item> {
        match self.state {
            IterState::Done => return None,
            IterState::Fresh => self.state = IterState::Running,
            IterState::Running => {
                if !self.machine.backtrack() {
                    self.state = IterState::Done;
                    return None;
                }
            }
        }
        match self.machine.run() {
            Err(e) => {
                self.state = IterState::Done;
                Some(Err(e))
            }
            Ok(false) => {
                self.state = IterState::Done;
                None
            }
            Ok(true) => {
                if let Some(cap) = self.machine.limits.max_solutions {
                    if self.machine.emitted >= cap {
                        self.state = IterState::Done;
                        return Some(Err(EngineError::ResourceLimit(LimitKind::Solutions)));
                    }
                }
                let solution = self.machine.project();
                self.machine.emitted += 1;
                Some(Ok(solution))
            }
        }
    }
}

/// Runs `query` (conjunction of goals) against `program` under `limits`.
///
/// Solutions are emitted in depth-first, clause-order, left-to-right
/// goal-order sequence.
pub fn solve<'p>(program: &'p Program, query: &[Term], limits: EngineLimits) -> Solutions<'p> {
    Solutions {
        machine: Machine::new(program, query, limits),
        state: IterState::Fresh,
    }
}

/// Materializes all solutions plus diagnostics.
pub fn solve_all(
    program: &Program,
    query: &[Term],
    limits: EngineLimits,
) -> (Result<Vec<Solution>, EngineError>, Diagnostics) {
    let mut solutions = solve(program, query, limits);
    let mut out = Vec::new();
    let result = loop {
        match solutions.next() {
            Some(Ok(s)) => out.push(s),
            Some(Err(e)) => break Err(e),
            None => break Ok(out),
        }
    };
    let diagnostics = solutions.machine.diagnostics;
    (result, diagnostics)
}

struct Machine<'p> {
    program: &'p Program,
    index: HashMap<(String, usize), Rc<Vec<usize>>>,
    store: Vec<Option<Term>>,
    trail: Vec<usize>,
    cps: Vec<ChoicePoint>,
    goals: Goals,
    query_vars: Vec<(String, usize)>,
    limits: EngineLimits,
    diagnostics: Diagnostics,
    emitted: u64,
}

impl<'p> Machine<'p> {
    fn new(program: &'p Program, query: &[Term], limits: EngineLimits) -> Self {
        let mut index: HashMap<(String, usize), Vec<usize>> = HashMap::new();
        for (i, clause) in program.clauses.iter().enumerate() {
            if let Some((name, arity)) = clause.head.functor_arity() {
                index.entry((name.to_string(), arity)).or_default().push(i);
            }
        }
        let index = index.into_iter().map(|(k, v)| (k, Rc::new(v))).collect();

        let n_query_vars = query
            .iter()
            .filter_map(Term::max_var_id)
            .max()
            .map_or(0, |m| m + 1);
        let mut query_vars: Vec<(String, usize)> = Vec::new();
        for goal in query {
            goal.visit_vars(&mut |v: &Var| {
                if v.name != "_" && !query_vars.iter().any(|(_, id)| *id == v.id) {
                    query_vars.push((v.name.clone(), v.id));
                }
            });
        }
        query_vars.sort_by_key(|(_, id)| *id);

        let goals = Goals::Nil.extend_front(query);
        Machine {
            program,
            index,
            store: vec![None; n_query_vars],
            trail: Vec::new(),
            cps: Vec::new(),
            goals,
            query_vars,
            limits,
            diagnostics: Diagnostics::default(),
            emitted: 0,
        }
    }

    // -- store ------------------------------------------------------------

    fn fresh_vars(&mut self, n: usize) -> usize {
        let base = self.store.len();
        self.store.resize(base + n, None);
        base
    }

    fn bind(&mut self, id: usize, term: Term) {
        debug_assert!(self.store[id].is_none());
        self.store[id] = Some(term);
        self.trail.push(id);
    }

    fn undo_to(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let id = self.trail.pop().unwrap();
            self.store[id] = None;
        }
    }

    fn walk<'a>(&'a self, mut term: &'a Term) -> &'a Term {
        while let Term::Var(v) = term {
            match self.store.get(v.id).and_then(|s| s.as_ref()) {
                Some(bound) => term = bound,
                None => break,
            }
        }
        term
    }

    fn resolve(&self, term: &Term) -> Term {
        match self.walk(term) {
            Term::Compound(f, args) => {
                Term::Compound(f.clone(), args.iter().map(|a| self.resolve(a)).collect())
            }
            other => other.clone(),
        }
    }

    fn is_ground(&self, term: &Term) -> bool {
        match self.walk(term) {
            Term::Var(_) => false,
            Term::Compound(_, args) => args.iter().all(|a| self.is_ground(a)),
            _ => true,
        }
    }

    fn occurs(&self, id: usize, term: &Term) -> bool {
        match self.walk(term) {
            Term::Var(v) => v.id == id,
            Term::Compound(_, args) => args.iter().any(|a| self.occurs(id, a)),
            _ => false,
        }
    }

    fn unify(&mut self, a: &Term, b: &Term) -> bool {
        let a = self.walk(a).clone();
        let b = self.walk(b).clone();
        match (&a, &b) {
            (Term::Var(x), Term::Var(y)) if x.id == y.id => true,
            (Term::Var(x), other) | (other, Term::Var(x)) => {
                if self.occurs(x.id, other) {
                    false
                } else {
                    self.bind(x.id, other.clone());
                    true
                }
            }
            (Term::Atom(x), Term::Atom(y)) => x == y,
            (Term::Number(x), Term::Number(y)) => x == y,
            (Term::Compound(f, xs), Term::Compound(g, ys)) => {
                f == g && xs.len() == ys.len() && {
                    for (x, y) in xs.iter().zip(ys) {
                        if !self.unify(x, y) {
                            return false;
                        }
                    }
                    true
                }
            }
            _ => false,
        }
    }

    /// Guards the resolved form of a term before it is used: bounded depth,
    /// and a node budget so that bindings with heavy sharing (whose resolved
    /// tree is exponentially larger than the store) cannot stall the check
    /// itself. Every term reaching the store passes through a dispatched
    /// goal, so this bound covers downstream unification and projection too.
    fn exceeds_depth(&self, term: &Term) -> bool {
        fn walk_capped(machine: &Machine, term: &Term, depth: usize, budget: &mut usize) -> bool {
            if depth == 0 || *budget == 0 {
                return true;
            }
            *budget -= 1;
            match machine.walk(term) {
                Term::Compound(_, args) => args
                    .iter()
                    .any(|a| walk_capped(machine, a, depth - 1, budget)),
                _ => false,
            }
        }
        let mut budget = self.limits.max_term_depth.saturating_mul(64).max(4096);
        walk_capped(self, term, self.limits.max_term_depth, &mut budget)
    }

    fn count_step(&mut self) -> Result<(), EngineError> {
        self.diagnostics.steps_used += 1;
        if self.diagnostics.steps_used > self.limits.max_inference_steps {
            return Err(EngineError::ResourceLimit(LimitKind::Steps));
        }
        Ok(())
    }

    fn rename_clause_term(&self, term: &Term, base: usize) -> Term {
        match term {
            Term::Var(v) => Term::Var(Var {
                name: v.name.clone(),
                id: base + v.id,
            }),
            Term::Compound(f, args) => Term::Compound(
                f.clone(),
                args.iter().map(|a| self.rename_clause_term(a, base)).collect(),
            ),
            other => other.clone(),
        }
    }

    // -- search -----------------------------------------------------------

    /// Runs until the next solution (`Ok(true)`), exhaustion (`Ok(false)`),
    /// or an error.
    fn run(&mut self) -> Result<bool, EngineError> {
        loop {
            if self.goals.is_empty() {
                return Ok(true);
            }
            match self.step()? {
                StepOutcome::Continue => {}
                StepOutcome::Fail => {
                    if !self.backtrack() {
                        return Ok(false);
                    }
                }
            }
        }
    }

    fn step(&mut self) -> Result<StepOutcome, EngineError> {
        let (goal, rest) = self.goals.pop().expect("step on empty goal list");
        self.count_step()?;
        if self.exceeds_depth(&goal) {
            return Err(EngineError::ResourceLimit(LimitKind::Depth));
        }
        let goal = self.walk(&goal).clone();
        match &goal {
            Term::Var(_) => Err(EngineError::Type(
                "cannot call an unbound variable".to_string(),
            )),
            Term::Number(_) => Err(EngineError::Type("cannot call a number".to_string())),
            Term::Atom(name) => match name.as_str() {
                "true" => {
                    self.goals = rest;
                    Ok(StepOutcome::Continue)
                }
                "fail" | "false" => Ok(StepOutcome::Fail),
                _ => self.call(goal.clone(), rest),
            },
            Term::Compound(f, args) => match (f.as_str(), args.len()) {
                (",", 2) => {
                    self.goals = Goals::cons(args[0].clone(), Goals::cons(args[1].clone(), rest));
                    Ok(StepOutcome::Continue)
                }
                (";", 2) => {
                    // If-then-else commits to the first condition solution.
                    let lhs = self.walk(&args[0]).clone();
                    if let Term::Compound(inner, cond_then) = &lhs {
                        if inner == "->" && cond_then.len() == 2 {
                            let mark = self.trail.len();
                            return if self.prove(cond_then[0].clone())? {
                                self.goals = Goals::cons(cond_then[1].clone(), rest);
                                Ok(StepOutcome::Continue)
                            } else {
                                self.undo_to(mark);
                                self.goals = Goals::cons(args[1].clone(), rest);
                                Ok(StepOutcome::Continue)
                            };
                        }
                    }
                    self.cps.push(ChoicePoint {
                        goals: Goals::cons(args[1].clone(), rest.clone()),
                        trail_mark: self.trail.len(),
                        alt: Alt::Continue,
                    });
                    self.goals = Goals::cons(args[0].clone(), rest);
                    Ok(StepOutcome::Continue)
                }
                ("->", 2) => {
                    let mark = self.trail.len();
                    if self.prove(args[0].clone())? {
                        self.goals = Goals::cons(args[1].clone(), rest);
                        Ok(StepOutcome::Continue)
                    } else {
                        self.undo_to(mark);
                        Ok(StepOutcome::Fail)
                    }
                }
                ("\\+", 1) => {
                    if !self.is_ground(&args[0]) {
                        self.diagnostics.non_ground_naf_calls += 1;
                    }
                    let mark = self.trail.len();
                    let proved = self.prove(args[0].clone())?;
                    self.undo_to(mark);
                    if proved {
                        Ok(StepOutcome::Fail)
                    } else {
                        self.goals = rest;
                        Ok(StepOutcome::Continue)
                    }
                }
                ("=", 2) => {
                    if self.unify(&args[0], &args[1]) {
                        self.goals = rest;
                        Ok(StepOutcome::Continue)
                    } else {
                        Ok(StepOutcome::Fail)
                    }
                }
                ("\\=", 2) => {
                    let mark = self.trail.len();
                    let unifiable = self.unify(&args[0], &args[1]);
                    self.undo_to(mark);
                    if unifiable {
                        Ok(StepOutcome::Fail)
                    } else {
                        self.goals = rest;
                        Ok(StepOutcome::Continue)
                    }
                }
                ("==", 2) | ("\\==", 2) => {
                    let equal = self.resolve(&args[0]) == self.resolve(&args[1]);
                    if equal == (f == "==") {
                        self.goals = rest;
                        Ok(StepOutcome::Continue)
                    } else {
                        Ok(StepOutcome::Fail)
                    }
                }
                ("is", 2) => {
                    let value = Term::Number(self.eval_arith(&args[1])?);
                    if self.unify(&args[0], &value) {
                        self.goals = rest;
                        Ok(StepOutcome::Continue)
                    } else {
                        Ok(StepOutcome::Fail)
                    }
                }
                ("<", 2) | (">", 2) | ("=<", 2) | (">=", 2) => {
                    let lhs = self.eval_arith(&args[0])?;
                    let rhs = self.eval_arith(&args[1])?;
                    let holds = match f.as_str() {
                        "<" => lhs < rhs,
                        ">" => lhs > rhs,
                        "=<" => lhs <= rhs,
                        _ => lhs >= rhs,
                    };
                    if holds {
                        self.goals = rest;
                        Ok(StepOutcome::Continue)
                    } else {
                        Ok(StepOutcome::Fail)
                    }
                }
                ("ground", 1) => {
                    if self.is_ground(&args[0]) {
                        self.goals = rest;
                        Ok(StepOutcome::Continue)
                    } else {
                        Ok(StepOutcome::Fail)
                    }
                }
                _ => self.call(goal.clone(), rest),
            },
        }
    }

    /// Calls a user-defined predicate. Unknown predicates fail silently and
    /// are recorded in the diagnostics.
    fn call(&mut self, goal: Term, rest: Goals) -> Result<StepOutcome, EngineError> {
        let (name, arity) = goal
            .functor_arity()
            .map(|(n, a)| (n.to_string(), a))
            .expect("callable goal");
        let Some(clauses) = self.index.get(&(name.clone(), arity)).cloned() else {
            *self
                .diagnostics
                .unknown_predicates
                .entry(format!("{name}/{arity}"))
                .or_insert(0) += 1;
            return Ok(StepOutcome::Fail);
        };
        let trail_mark = self.trail.len();
        if self.try_clauses(&goal, &clauses, 0, &rest, trail_mark)? {
            Ok(StepOutcome::Continue)
        } else {
            Ok(StepOutcome::Fail)
        }
    }

    /// Tries clauses from `start`; on a match, pushes a choice point for the
    /// remaining ones and sets up body goals. Every head-unification attempt
    /// counts as an inference step.
    fn try_clauses(
        &mut self,
        goal: &Term,
        clauses: &Rc<Vec<usize>>,
        start: usize,
        rest: &Goals,
        trail_mark: usize,
    ) -> Result<bool, EngineError> {
        for (slot, &clause_idx) in clauses.iter().enumerate().skip(start) {
            if slot > start {
                self.count_step()?;
            }
            let clause = &self.program.clauses[clause_idx];
            let base = self.fresh_vars(clause.n_vars);
            let head = self.rename_clause_term(&clause.head, base);
            if self.unify(goal, &head) {
                let clause = &self.program.clauses[clause_idx];
                let body: Vec<Term> = clause
                    .body
                    .iter()
                    .map(|g| self.rename_clause_term(g, base))
                    .collect();
                if slot + 1 < clauses.len() {
                    self.cps.push(ChoicePoint {
                        goals: rest.clone(),
                        trail_mark,
                        alt: Alt::Clauses {
                            goal: goal.clone(),
                            clauses: clauses.clone(),
                            next: slot + 1,
                        },
                    });
                }
                self.goals = rest.clone().extend_front(&body);
                return Ok(true);
            }
            self.undo_to(trail_mark);
        }
        Ok(false)
    }

    /// Pops choice points until one resumes; `false` when the search space
    /// is exhausted. A resource error during clause retry is reported on the
    /// next `run()` iteration via the poisoned step counter.
    fn backtrack(&mut self) -> bool {
        while let Some(cp) = self.cps.pop() {
            self.undo_to(cp.trail_mark);
            match cp.alt {
                Alt::Continue => {
                    self.goals = cp.goals;
                    return true;
                }
                Alt::Clauses {
                    goal,
                    clauses,
                    next,
                } => match self.try_clauses(&goal, &clauses, next, &cp.goals, cp.trail_mark) {
                    Ok(true) => return true,
                    Ok(false) => {}
                    Err(_) => {
                        // Re-signal the limit from the main loop.
                        self.goals = Goals::cons(Term::atom("fail"), Goals::Nil);
                        return true;
                    }
                },
            }
        }
        false
    }

    /// Proves `goal` once, keeping its bindings (callers undo when needed).
    /// Runs on the same store and step budget with a private search stack.
    fn prove(&mut self, goal: Term) -> Result<bool, EngineError> {
        let saved_goals = std::mem::replace(&mut self.goals, Goals::cons(goal, Goals::Nil));
        let saved_cps = std::mem::take(&mut self.cps);
        let result = self.run();
        self.cps = saved_cps;
        self.goals = saved_goals;
        result
    }

    fn project(&self) -> Solution {
        let bindings = self
            .query_vars
            .iter()
            .map(|(name, id)| {
                (
                    name.clone(),
                    self.resolve(&Term::Var(Var {
                        name: name.clone(),
                        id: *id,
                    })),
                )
            })
            .collect();
        Solution {
            bindings,
            index: self.emitted,
        }
    }

    // -- arithmetic ---------------------------------------------------------

    fn eval_arith(&self, term: &Term) -> Result<Number, EngineError> {
        let term = self.walk(term).clone();
        match &term {
            Term::Number(n) => Ok(*n),
            Term::Var(_) => Err(EngineError::Type(
                "arithmetic expression is not ground".to_string(),
            )),
            Term::Atom(name) => Err(EngineError::Type(format!(
                "cannot evaluate atom '{name}'"
            ))),
            Term::Compound(f, args) => {
                let overflow = || EngineError::Type("arithmetic overflow".to_string());
                match (f.as_str(), args.len()) {
                    ("-", 1) => self.eval_arith(&args[0])?.checked_neg().ok_or_else(overflow),
                    ("+", 1) => self.eval_arith(&args[0]),
                    ("+", 2) | ("-", 2) | ("*", 2) | ("/", 2) => {
                        let lhs = self.eval_arith(&args[0])?;
                        let rhs = self.eval_arith(&args[1])?;
                        match f.as_str() {
                            "+" => lhs.checked_add(rhs).ok_or_else(overflow),
                            "-" => lhs.checked_sub(rhs).ok_or_else(overflow),
                            "*" => lhs.checked_mul(rhs).ok_or_else(overflow),
                            _ => lhs.checked_div(rhs).ok_or_else(|| {
                                if rhs.is_zero() {
                                    EngineError::Type("division by zero".to_string())
                                } else {
                                    overflow()
                                }
                            }),
                        }
                    }
                    _ => Err(EngineError::Type(format!(
                        "unknown arithmetic function '{f}/{}'",
                        args.len()
                    ))),
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Situation traces and outcome enumeration
// ---------------------------------------------------------------------------

/// A ground move history: `s0` or `do(choice(Player,Move), Inner)` with the
/// initial-situation constant innermost.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SituationTrace(Term);

impl SituationTrace {
    pub fn term(&self) -> &Term {
        &self.0
    }

    /// Moves from oldest to newest.
    pub fn moves(&self) -> Vec<&Term> {
        let mut moves = Vec::new();
        let mut cursor = &self.0;
        while let Term::Compound(f, args) = cursor {
            if f == "do" && args.len() == 2 {
                moves.push(&args[0]);
                cursor = &args[1];
            } else {
                break;
            }
        }
        moves.reverse();
        moves
    }
}

impl fmt::Display for SituationTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_term(&self.0))
    }
}

impl TryFrom<Term> for SituationTrace {
    type Error = String;

    fn try_from(term: Term) -> Result<Self, Self::Error> {
        fn check(term: &Term) -> Result<(), String> {
            match term {
                Term::Atom(_) => Ok(()),
                Term::Compound(f, args) if f == "do" && args.len() == 2 => {
                    match &args[0] {
                        Term::Compound(g, move_args) if g == "choice" && move_args.len() == 2 => {
                            if !args[0].is_ground() {
                                return Err(format!(
                                    "move is not ground: {}",
                                    print_term(&args[0])
                                ));
                            }
                        }
                        other => {
                            return Err(format!(
                                "expected a choice(Player,Move) move, found {}",
                                print_term(other)
                            ))
                        }
                    }
                    check(&args[1])
                }
                other => Err(format!(
                    "not a move history: {}",
                    print_term(other)
                )),
            }
        }
        check(&term)?;
        Ok(SituationTrace(term))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnumerateError {
    #[error("no initial/1 fact: the program never declares an initial situation")]
    NoInitial,
    #[error("no outcomes: {finals} final situation(s) reached but no ground finally(outcome(...), F) is derivable")]
    NoOutcomes { finals: usize },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Enumerates every play of a game-specific program: runs `game(I,F)` from
/// each `initial(I)` fact and collects the ground `outcome/6` tuples per
/// final situation. The game-independent rules are supplied internally, so
/// pass only the game-specific clauses.
///
/// The initial situation is never assumed to be `s0`: a missing `initial/1`
/// fact is an error, because grading must not mask it.
pub fn enumerate_outcomes(
    game_specific: &Program,
    limits: EngineLimits,
) -> Result<Vec<(SituationTrace, Term)>, EnumerateError> {
    let program = with_game_rules(game_specific);

    let init_query = [Term::compound("initial", vec![Term::var("I", 0)])];
    let (initials, _) = solve_all(&program, &init_query, limits);
    let initials: Vec<Term> = initials?
        .into_iter()
        .map(|s| s.bindings[0].1.clone())
        .collect();
    if initials.is_empty() {
        return Err(EnumerateError::NoInitial);
    }

    let mut finals = Vec::new();
    for initial in &initials {
        let game_query = [Term::compound(
            "game",
            vec![initial.clone(), Term::var("F", 0)],
        )];
        let (traces, _) = solve_all(&program, &game_query, limits);
        for solution in traces? {
            finals.push(solution.bindings[0].1.clone());
        }
    }

    let mut pairs = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for final_term in &finals {
        let outcome_vars: Vec<Term> = ["P1", "M1", "U1", "P2", "M2", "U2"]
            .iter()
            .enumerate()
            .map(|(i, name)| Term::var(*name, i))
            .collect();
        let outcome_query = [Term::compound(
            "finally",
            vec![
                Term::compound("outcome", outcome_vars),
                final_term.clone(),
            ],
        )];
        let (outcomes, _) = solve_all(&program, &outcome_query, limits);
        for solution in outcomes? {
            let args: Vec<Term> = solution.bindings.iter().map(|(_, t)| t.clone()).collect();
            let outcome = Term::compound("outcome", args);
            let trace = SituationTrace::try_from(final_term.clone())
                .map_err(|e| EngineError::Type(format!("final situation is not a move history: {e}")))?;
            let key = (trace.to_string(), print_term(&outcome));
            if seen.insert(key) {
                pairs.push((trace, outcome));
            }
        }
    }
    if pairs.is_empty() {
        return Err(EnumerateError::NoOutcomes {
            finals: finals.len(),
        });
    }
    Ok(pairs)
}

/// True iff `holds(fluent, situation)` has at least one solution in the
/// given (already composed) program.
pub fn holds_in(
    program: &Program,
    fluent: &Term,
    situation: &Term,
    limits: EngineLimits,
) -> Result<bool, EngineError> {
    let query = [Term::compound(
        "holds",
        vec![fluent.clone(), situation.clone()],
    )];
    let mut solutions = solve(program, &query, limits);
    match solutions.next() {
        Some(Ok(_)) => Ok(true),
        Some(Err(e)) => Err(e),
        None => Ok(false),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_program, parse_query};

    fn program(text: &str) -> Program {
        let (program, report) = parse_program(text);
        assert!(report.ok(), "{:?}", report.errors);
        program
    }

    fn run(prog: &Program, query: &str) -> Vec<String> {
        let goals = parse_query(query).unwrap();
        let (solutions, _) = solve_all(prog, &goals, EngineLimits::default());
        solutions
            .unwrap()
            .iter()
            .map(format_solution)
            .collect()
    }

    #[test]
    fn unify_examples() {
        let env = Bindings::new();
        let x = Term::var("X", 0);
        let s0 = Term::atom("s0");
        let out = unify(&x, &s0, &env).unwrap();
        assert_eq!(out.resolve(&x), s0);

        let m = Term::var("M", 1);
        let lhs = Term::compound("do", vec![m.clone(), s0.clone()]);
        let choice = Term::compound("choice", vec![Term::atom("p1"), Term::atom("C")]);
        let rhs = Term::compound("do", vec![choice.clone(), s0.clone()]);
        let out = unify(&lhs, &rhs, &env).unwrap();
        assert_eq!(out.resolve(&m), choice);

        // Occurs check: X and f(X) do not unify.
        let fx = Term::compound("f", vec![x.clone()]);
        assert!(unify(&x, &fx, &env).is_none());
    }

    #[test]
    fn game_independent_rules_are_five_clauses() {
        let gamma = game_independent_program();
        assert_eq!(gamma.len(), 5);
        let heads: Vec<_> = gamma
            .clauses
            .iter()
            .map(|c| c.head.functor_arity().unwrap().0.to_string())
            .collect();
        assert_eq!(heads, ["game", "game", "holds", "holds", "holds"]);
        // Pretty output reparses cleanly.
        let (reparsed, report) = parse_program(&gamma.pretty());
        assert!(report.ok());
        assert_eq!(reparsed.len(), 5);
    }

    #[test]
    fn fail_consumes_one_step() {
        let prog = program("");
        let goals = parse_query("fail").unwrap();
        let (solutions, diag) = solve_all(&prog, &goals, EngineLimits::default());
        assert_eq!(solutions.unwrap().len(), 0);
        assert_eq!(diag.steps_used, 1);
    }

    #[test]
    fn clause_order_determines_solution_order() {
        let prog = program("p(b).\np(a).\np(c).");
        assert_eq!(run(&prog, "p(X)"), ["X=b", "X=a", "X=c"]);
    }

    #[test]
    fn conjunction_and_backtracking() {
        let prog = program("p(a).\np(b).\nq(b).\nq(c).");
        assert_eq!(run(&prog, "p(X), q(X)"), ["X=b"]);
    }

    #[test]
    fn negation_as_failure() {
        let prog = program("p(a).\nq(b).");
        assert_eq!(run(&prog, "\\+ p(b)"), ["true"]);
        assert_eq!(run(&prog, "\\+ p(a)"), Vec::<String>::new());
        // Non-ground NAF is recorded for lint purposes.
        let goals = parse_query("\\+ p(X)").unwrap();
        let (_, diag) = solve_all(&prog, &goals, EngineLimits::default());
        assert_eq!(diag.non_ground_naf_calls, 1);
    }

    #[test]
    fn if_then_else_commits() {
        let prog = program("p(a).\np(b).\nq(a, one).\nq(b, two).");
        // The condition commits to its first solution (X=a).
        assert_eq!(run(&prog, "( p(X) -> q(X, Y) ; Y = none )"), ["X=a, Y=one"]);
        assert_eq!(run(&prog, "( p(z) -> Y = yes ; Y = no )"), ["Y=no"]);
        assert_eq!(run(&prog, "p(z) -> X = 1"), Vec::<String>::new());
    }

    #[test]
    fn disjunction_enumerates_both_branches() {
        let prog = program("p(a).\nq(b).");
        assert_eq!(run(&prog, "( p(X) ; q(X) )"), ["X=a", "X=b"]);
    }

    #[test]
    fn arithmetic_and_comparison() {
        let prog = program("");
        assert_eq!(run(&prog, "X is 2 + 3 * 4"), ["X=14"]);
        assert_eq!(run(&prog, "X is (2 + 3) * 4"), ["X=20"]);
        assert_eq!(run(&prog, "X is 7 / 2"), ["X=3.5"]);
        assert_eq!(run(&prog, "X is - (3 + 4)"), ["X=-7"]);
        assert_eq!(run(&prog, "3 < 4, 4 >= 4, 3 =< 3, 5 > 1"), ["true"]);
        assert_eq!(run(&prog, "1 > 2"), Vec::<String>::new());
    }

    #[test]
    fn arithmetic_type_errors() {
        let prog = program("");
        for query in ["X is foo + 1", "X is Y + 1", "X is 1 / 0", "foo < 1"] {
            let goals = parse_query(query).unwrap();
            let (result, _) = solve_all(&prog, &goals, EngineLimits::default());
            assert!(
                matches!(result, Err(EngineError::Type(_))),
                "expected type error for {query}"
            );
        }
    }

    #[test]
    fn structural_comparison() {
        let prog = program("");
        assert_eq!(run(&prog, "X = f(a), X == f(a)"), ["X=f(a)"]);
        assert_eq!(run(&prog, "f(a) \\== f(b)"), ["true"]);
        assert_eq!(run(&prog, "X \\= X"), Vec::<String>::new());
        assert_eq!(run(&prog, "f(a) \\= g(b)"), ["true"]);
        // Unbound query variables stay visible in the projection.
        assert_eq!(run(&prog, "f(X) \\= g(a)"), ["X=X"]);
    }

    #[test]
    fn ground_builtin() {
        let prog = program("");
        assert_eq!(run(&prog, "ground(f(a,1))"), ["true"]);
        assert_eq!(run(&prog, "ground(f(a,X))"), Vec::<String>::new());
    }

    #[test]
    fn unknown_predicates_fail_with_diagnostics() {
        let prog = program("p(a) :- missing(a).");
        let goals = parse_query("p(X)").unwrap();
        let (solutions, diag) = solve_all(&prog, &goals, EngineLimits::default());
        assert_eq!(solutions.unwrap().len(), 0);
        assert_eq!(diag.unknown_predicates.get("missing/1"), Some(&1));
    }

    #[test]
    fn step_limit_stops_runaway_recursion() {
        let prog = program("p :- p.");
        let goals = parse_query("p").unwrap();
        let limits = EngineLimits {
            max_inference_steps: 1000,
            ..Default::default()
        };
        let (result, diag) = solve_all(&prog, &goals, limits);
        assert_eq!(result, Err(EngineError::ResourceLimit(LimitKind::Steps)));
        assert!(diag.steps_used >= 1000);
    }

    #[test]
    fn depth_limit_stops_growing_terms() {
        let prog = program("q(X) :- q(f(X)).");
        let goals = parse_query("q(a)").unwrap();
        let (result, _) = solve_all(&prog, &goals, EngineLimits::default());
        assert_eq!(result, Err(EngineError::ResourceLimit(LimitKind::Depth)));
    }

    #[test]
    fn solution_cap_aborts_when_exceeded() {
        let prog = program("p(a).\np(b).\np(c).");
        let goals = parse_query("p(X)").unwrap();
        let limits = EngineLimits {
            max_solutions: Some(2),
            ..Default::default()
        };
        let mut solutions = solve(&prog, &goals, limits);
        assert!(solutions.next().unwrap().is_ok());
        assert!(solutions.next().unwrap().is_ok());
        assert_eq!(
            solutions.next(),
            Some(Err(EngineError::ResourceLimit(LimitKind::Solutions)))
        );
        // A query with exactly the cap's worth of solutions ends cleanly.
        let prog2 = program("p(a).\np(b).");
        let goals2 = parse_query("p(X)").unwrap();
        let (result, _) = solve_all(&prog2, &goals2, limits);
        assert_eq!(result.unwrap().len(), 2);
    }

    #[test]
    fn anonymous_query_vars_are_not_projected() {
        let prog = program("p(a, b).");
        assert_eq!(run(&prog, "p(_, X)"), ["X=b"]);
    }
}
