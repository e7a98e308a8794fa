//! Canonical game programs, payoff-matrix extraction and ordering-based
//! game classification.
//!
//! A 2x2 game is classified by the order of the four outcomes T/R/P/S seen
//! from each player's side. Move labels are discovered, not assumed: the
//! classifier searches every cooperate/defect labeling of the two axes, so a
//! generated program may call its moves anything. All comparisons are exact
//! and strict by default.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{
    enumerate_outcomes, holds_in, solve_all, with_game_rules, EngineLimits, EnumerateError,
};
use crate::number::Number;
use crate::parser::parse_program_named;
use crate::term::{print_term, Program, Term};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum GameClass {
    PrisonersDilemma,
    HawkDove,
    MatchingPennies,
    StagHunt,
    BattleOfSexes,
    SequentialPd,
    RockPaperScissors,
}

impl GameClass {
    pub const ALL: [GameClass; 7] = [
        GameClass::PrisonersDilemma,
        GameClass::HawkDove,
        GameClass::MatchingPennies,
        GameClass::StagHunt,
        GameClass::BattleOfSexes,
        GameClass::SequentialPd,
        GameClass::RockPaperScissors,
    ];

    /// The five simultaneous 2x2 classes.
    pub const CLASSIC: [GameClass; 5] = [
        GameClass::PrisonersDilemma,
        GameClass::HawkDove,
        GameClass::MatchingPennies,
        GameClass::StagHunt,
        GameClass::BattleOfSexes,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            GameClass::PrisonersDilemma => "prisoners_dilemma",
            GameClass::HawkDove => "hawk_dove",
            GameClass::MatchingPennies => "matching_pennies",
            GameClass::StagHunt => "stag_hunt",
            GameClass::BattleOfSexes => "battle_of_sexes",
            GameClass::SequentialPd => "sequential_pd",
            GameClass::RockPaperScissors => "rock_paper_scissors",
        }
    }
}

impl fmt::Display for GameClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GameClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GameClass::ALL
            .iter()
            .find(|c| c.name() == s)
            .copied()
            .ok_or_else(|| format!("unknown game class '{s}'"))
    }
}

/// Source text of the shipped game-specific program for a class.
pub fn canonical_game_source(class: GameClass) -> &'static str {
    match class {
        GameClass::PrisonersDilemma => {
            include_str!("../fixtures/games/prisoners_dilemma.pl")
        }
        GameClass::HawkDove => include_str!("../fixtures/games/hawk_dove.pl"),
        GameClass::MatchingPennies => include_str!("../fixtures/games/matching_pennies.pl"),
        GameClass::StagHunt => include_str!("../fixtures/games/stag_hunt.pl"),
        GameClass::BattleOfSexes => include_str!("../fixtures/games/battle_of_sexes.pl"),
        GameClass::SequentialPd => include_str!("../fixtures/games/sequential_pd.pl"),
        GameClass::RockPaperScissors => {
            include_str!("../fixtures/games/rock_paper_scissors.pl")
        }
    }
}

/// Parses the shipped game-specific program for a class.
pub fn canonical_game(class: GameClass) -> Program {
    let (program, report) =
        parse_program_named(canonical_game_source(class), class.name(), &Default::default());
    debug_assert!(report.ok(), "canonical program failed to parse");
    program
}

// ---------------------------------------------------------------------------
// Payoff matrices
// ---------------------------------------------------------------------------

/// Numeric outcome table of a game: one cell per joint move profile, holding
/// `(row player's payoff, column player's payoff)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffMatrix {
    pub row_actions: Vec<String>,
    pub col_actions: Vec<String>,
    /// Row-major: `payoffs[r][c]` pairs with `(row_actions[r], col_actions[c])`.
    pub payoffs: Vec<Vec<(Number, Number)>>,
}

impl PayoffMatrix {
    pub fn get(&self, row: usize, col: usize) -> (Number, Number) {
        self.payoffs[row][col]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.row_actions.len(), self.col_actions.len())
    }

    pub fn is_zero_sum(&self) -> bool {
        self.payoffs.iter().flatten().all(|(u1, u2)| {
            u1.checked_add(*u2).map(|s| s.is_zero()).unwrap_or(false)
        })
    }

    /// First cell whose payoffs do not sum to zero.
    fn zero_sum_offender(&self) -> Option<(usize, usize)> {
        for (r, row) in self.payoffs.iter().enumerate() {
            for (c, (u1, u2)) in row.iter().enumerate() {
                if !u1.checked_add(*u2).map(|s| s.is_zero()).unwrap_or(false) {
                    return Some((r, c));
                }
            }
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExtractionError {
    #[error("{0}")]
    Enumerate(#[from] EnumerateError),
    #[error("conflicting payoffs for profile ({row},{col}): ({}, {}) vs ({}, {})", first.0, first.1, second.0, second.1)]
    ConflictingCell {
        row: String,
        col: String,
        first: (Number, Number),
        second: (Number, Number),
    },
    #[error("incomplete payoff matrix: no outcome for profile ({row},{col})")]
    IncompleteMatrix { row: String, col: String },
    #[error("non-numeric payoff for profile ({row},{col}): {value}")]
    NonNumericPayoff {
        row: String,
        col: String,
        value: String,
    },
}

fn move_label(term: &Term) -> String {
    match term {
        Term::Atom(name) => name.clone(),
        other => print_term(other),
    }
}

/// Executes the game and maps every enumerated `outcome(P1,M1,U1,P2,M2,U2)`
/// tuple into a payoff cell keyed by `(M1,M2)`. Payoffs must be concrete
/// numbers; symbolic payoffs are rejected.
pub fn extract_matrix(
    game_specific: &Program,
    limits: EngineLimits,
) -> Result<PayoffMatrix, ExtractionError> {
    let pairs = enumerate_outcomes(game_specific, limits)?;
    let mut row_actions: Vec<String> = Vec::new();
    let mut col_actions: Vec<String> = Vec::new();
    let mut cells: Vec<(usize, usize, (Number, Number))> = Vec::new();

    for (_, outcome) in &pairs {
        let Term::Compound(_, args) = outcome else {
            unreachable!("outcomes are compounds by construction")
        };
        let row = move_label(&args[1]);
        let col = move_label(&args[4]);
        let payoff_of = |t: &Term| -> Result<Number, ExtractionError> {
            match t {
                Term::Number(n) => Ok(*n),
                other => Err(ExtractionError::NonNumericPayoff {
                    row: row.clone(),
                    col: col.clone(),
                    value: print_term(other),
                }),
            }
        };
        let payoff = (payoff_of(&args[2])?, payoff_of(&args[5])?);
        let r = position_or_insert(&mut row_actions, &row);
        let c = position_or_insert(&mut col_actions, &col);
        match cells.iter().find(|(cr, cc, _)| (*cr, *cc) == (r, c)) {
            Some((_, _, existing)) if *existing != payoff => {
                return Err(ExtractionError::ConflictingCell {
                    row,
                    col,
                    first: *existing,
                    second: payoff,
                })
            }
            Some(_) => {}
            None => cells.push((r, c, payoff)),
        }
    }

    let mut payoffs =
        vec![vec![None; col_actions.len()]; row_actions.len()];
    for (r, c, payoff) in cells {
        payoffs[r][c] = Some(payoff);
    }
    let mut table = Vec::with_capacity(row_actions.len());
    for (r, row) in payoffs.into_iter().enumerate() {
        let mut out_row = Vec::with_capacity(col_actions.len());
        for (c, cell) in row.into_iter().enumerate() {
            match cell {
                Some(payoff) => out_row.push(payoff),
                None => {
                    return Err(ExtractionError::IncompleteMatrix {
                        row: row_actions[r].clone(),
                        col: col_actions[c].clone(),
                    })
                }
            }
        }
        table.push(out_row);
    }
    Ok(PayoffMatrix {
        row_actions,
        col_actions,
        payoffs: table,
    })
}

fn position_or_insert(actions: &mut Vec<String>, label: &str) -> usize {
    match actions.iter().position(|a| a == label) {
        Some(i) => i,
        None => {
            actions.push(label.to_string());
            actions.len() - 1
        }
    }
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassifyConfig {
    /// Require strict inequalities in the defining orderings.
    pub strict: bool,
    /// Require exact zero-sum payoffs for Matching Pennies (its orderings
    /// alone do not force it).
    pub require_zero_sum: bool,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            strict: true,
            require_zero_sum: true,
        }
    }
}

/// One player's four outcomes under a candidate cooperate/defect labeling.
#[derive(Debug, Clone, Copy)]
struct Quad {
    t: Number,
    r: Number,
    p: Number,
    s: Number,
}

impl Quad {
    fn value(&self, name: &str) -> Number {
        match name {
            "T" => self.t,
            "R" => self.r,
            "P" => self.p,
            _ => self.s,
        }
    }
}

/// `(row_c, col_c)`: which action index plays the cooperate role per axis.
const LABELINGS: [(usize, usize); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];

fn quads(matrix: &PayoffMatrix, row_c: usize, col_c: usize) -> (Quad, Quad) {
    let row_d = 1 - row_c;
    let col_d = 1 - col_c;
    let row = Quad {
        r: matrix.get(row_c, col_c).0,
        s: matrix.get(row_c, col_d).0,
        t: matrix.get(row_d, col_c).0,
        p: matrix.get(row_d, col_d).0,
    };
    let col = Quad {
        r: matrix.get(row_c, col_c).1,
        t: matrix.get(row_c, col_d).1,
        s: matrix.get(row_d, col_c).1,
        p: matrix.get(row_d, col_d).1,
    };
    (row, col)
}

type Chain = &'static [(&'static str, &'static str)];

/// Required `left > right` relations per class, for the row and column
/// player's own quads. The column side of Battle of the Sexes and Matching
/// Pennies mirrors the row side; T vs S (and pairs within a group) are
/// deliberately unordered.
fn class_constraints(class: GameClass) -> Option<(Chain, Chain)> {
    let same: Chain = match class {
        GameClass::PrisonersDilemma | GameClass::SequentialPd => {
            &[("T", "R"), ("R", "P"), ("P", "S")]
        }
        GameClass::HawkDove => &[("T", "R"), ("R", "S"), ("S", "P")],
        GameClass::StagHunt => &[("R", "T"), ("T", "P"), ("P", "S")],
        GameClass::BattleOfSexes => {
            return Some((
                &[("R", "P"), ("P", "T"), ("P", "S")],
                &[("P", "R"), ("R", "T"), ("R", "S")],
            ));
        }
        GameClass::MatchingPennies => {
            return Some((
                &[("R", "T"), ("R", "S"), ("P", "T"), ("P", "S")],
                &[("T", "R"), ("T", "P"), ("S", "R"), ("S", "P")],
            ));
        }
        GameClass::RockPaperScissors => return None,
    };
    Some((same, same))
}

fn violations(quad: &Quad, chain: Chain, strict: bool) -> Vec<(&'static str, &'static str)> {
    chain
        .iter()
        .filter(|(a, b)| {
            let (av, bv) = (quad.value(a), quad.value(b));
            if strict {
                av <= bv
            } else {
                av < bv
            }
        })
        .copied()
        .collect()
}

fn matches_class(
    matrix: &PayoffMatrix,
    class: GameClass,
    config: &ClassifyConfig,
) -> bool {
    let Some((row_chain, col_chain)) = class_constraints(class) else {
        return false;
    };
    if class == GameClass::MatchingPennies && config.require_zero_sum && !matrix.is_zero_sum() {
        return false;
    }
    LABELINGS.iter().any(|&(row_c, col_c)| {
        let (row, col) = quads(matrix, row_c, col_c);
        violations(&row, row_chain, config.strict).is_empty()
            && violations(&col, col_chain, config.strict).is_empty()
    })
}

/// Classifies a payoff matrix under the default configuration.
pub fn classify(matrix: &PayoffMatrix) -> BTreeSet<GameClass> {
    classify_with(matrix, &ClassifyConfig::default())
}

/// All classes whose defining relations the matrix satisfies under some
/// cooperate/defect labeling; an empty set means unclassifiable. 2x2
/// matrices are tested against the five classic orderings, 3x3 matrices
/// against the cyclic zero-sum pattern.
pub fn classify_with(matrix: &PayoffMatrix, config: &ClassifyConfig) -> BTreeSet<GameClass> {
    let mut out = BTreeSet::new();
    match matrix.shape() {
        (2, 2) => {
            for class in GameClass::CLASSIC {
                if matches_class(matrix, class, config) {
                    out.insert(class);
                }
            }
        }
        (3, 3)
            if cyclic_dominance_defects(matrix).is_empty() => {
                out.insert(GameClass::RockPaperScissors);
            }
        _ => {}
    }
    out
}

/// Sign-pattern check for rock-paper-scissors shaped matrices: zero-sum,
/// drawing diagonal, opposite-signed mirror cells and a cyclic (not
/// transitive) dominance tournament. Row and column move sets must match.
fn cyclic_dominance_defects(matrix: &PayoffMatrix) -> Vec<Defect> {
    let mut defects = Vec::new();
    let mut rows_sorted = matrix.row_actions.clone();
    let mut cols_sorted = matrix.col_actions.clone();
    rows_sorted.sort();
    cols_sorted.sort();
    if rows_sorted != cols_sorted {
        defects.push(Defect {
            kind: DefectKind::WrongShape,
            detail: "row and column move sets differ".to_string(),
        });
        return defects;
    }
    // Column index of each row action, so mirror cells compare correctly
    // even if the discovery order differed per axis.
    let col_of = |label: &str| {
        matrix
            .col_actions
            .iter()
            .position(|c| c == label)
            .expect("move sets match")
    };
    if let Some((r, c)) = matrix.zero_sum_offender() {
        defects.push(Defect {
            kind: DefectKind::ZeroSumViolation,
            detail: format!(
                "payoffs for profile ({},{}) sum to a non-zero value",
                matrix.row_actions[r], matrix.col_actions[c]
            ),
        });
        return defects;
    }
    for (r, label) in matrix.row_actions.iter().enumerate() {
        let (u1, _) = matrix.get(r, col_of(label));
        if !u1.is_zero() {
            defects.push(Defect {
                kind: DefectKind::OrderingViolation,
                detail: format!("profile ({label},{label}) should be a draw (payoff 0)"),
            });
        }
    }
    if !defects.is_empty() {
        return defects;
    }
    // beats(i,j): the row player wins when playing i against j.
    let beats = |i: usize, j: usize| matrix.get(i, col_of(&matrix.row_actions[j])).0
        > Number::ZERO;
    let mut out_degree = [0usize; 3];
    #[allow(clippy::needless_range_loop)]
    for i in 0..3 {
        for j in 0..3 {
            if i == j {
                continue;
            }
            let rr = matrix.get(i, col_of(&matrix.row_actions[j])).0;
            let mirrored = matrix.get(j, col_of(&matrix.row_actions[i])).0;
            if rr.is_zero() || mirrored.is_zero() {
                defects.push(Defect {
                    kind: DefectKind::OrderingViolation,
                    detail: format!(
                        "profile ({},{}) has no winner",
                        matrix.row_actions[i], matrix.row_actions[j]
                    ),
                });
                return defects;
            }
            if i < j && (rr > Number::ZERO) == (mirrored > Number::ZERO) {
                defects.push(Defect {
                    kind: DefectKind::AsymmetryViolation,
                    detail: format!(
                        "profiles ({},{}) and ({},{}) agree on the winner's side",
                        matrix.row_actions[i],
                        matrix.row_actions[j],
                        matrix.row_actions[j],
                        matrix.row_actions[i]
                    ),
                });
                return defects;
            }
            if beats(i, j) {
                out_degree[i] += 1;
            }
        }
    }
    if out_degree.iter().any(|&d| d != 1) {
        defects.push(Defect {
            kind: DefectKind::OrderingViolation,
            detail: "dominance is not cyclic: one move beats (or loses to) both others"
                .to_string(),
        });
    }
    defects
}

// ---------------------------------------------------------------------------
// Semantic verdicts
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefectKind {
    OrderingViolation,
    ExtractionFailure,
    WrongShape,
    AsymmetryViolation,
    ZeroSumViolation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Defect {
    pub kind: DefectKind,
    pub detail: String,
}

/// Mechanized semantic review of a generated game program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticVerdict {
    pub ok: bool,
    pub detected_classes: BTreeSet<GameClass>,
    pub expected: GameClass,
    pub defects: Vec<Defect>,
}

/// Extracts the payoff matrix by executing the program, classifies it, and
/// checks the expected class. `ok` holds exactly when the expected class is
/// among the detected ones; otherwise the defects name each failed
/// inequality or structural check.
pub fn check_semantics(
    game_specific: &Program,
    expected: GameClass,
    limits: EngineLimits,
    config: &ClassifyConfig,
) -> SemanticVerdict {
    let matrix = match extract_matrix(game_specific, limits) {
        Ok(matrix) => matrix,
        Err(err) => {
            return SemanticVerdict {
                ok: false,
                detected_classes: BTreeSet::new(),
                expected,
                defects: vec![Defect {
                    kind: DefectKind::ExtractionFailure,
                    detail: err.to_string(),
                }],
            }
        }
    };
    let mut detected = classify_with(&matrix, config);
    if matrix.shape() == (2, 2) && detected.contains(&GameClass::PrisonersDilemma) {
        if let Ok(defects) = sequential_structure_defects(game_specific, limits) {
            if defects.is_empty() {
                detected.insert(GameClass::SequentialPd);
            }
        }
    }
    if detected.contains(&expected) {
        return SemanticVerdict {
            ok: true,
            detected_classes: detected,
            expected,
            defects: Vec::new(),
        };
    }
    let mut defects = Vec::new();
    match expected {
        GameClass::RockPaperScissors => {
            if matrix.shape() != (3, 3) {
                defects.push(wrong_shape_defect(&matrix, (3, 3)));
            } else {
                defects.extend(cyclic_dominance_defects(&matrix));
            }
        }
        GameClass::SequentialPd => {
            if matrix.shape() != (2, 2) {
                defects.push(wrong_shape_defect(&matrix, (2, 2)));
            } else {
                defects.extend(ordering_defects(
                    &matrix,
                    GameClass::PrisonersDilemma,
                    config,
                ));
                match sequential_structure_defects(game_specific, limits) {
                    Ok(structural) => defects.extend(structural),
                    Err(e) => defects.push(Defect {
                        kind: DefectKind::ExtractionFailure,
                        detail: e.to_string(),
                    }),
                }
            }
        }
        classic => {
            if matrix.shape() != (2, 2) {
                defects.push(wrong_shape_defect(&matrix, (2, 2)));
            } else {
                defects.extend(ordering_defects(&matrix, classic, config));
            }
        }
    }
    SemanticVerdict {
        ok: false,
        detected_classes: detected,
        expected,
        defects,
    }
}

fn wrong_shape_defect(matrix: &PayoffMatrix, wanted: (usize, usize)) -> Defect {
    let (r, c) = matrix.shape();
    Defect {
        kind: DefectKind::WrongShape,
        detail: format!(
            "expected a {}x{} payoff matrix, found {r}x{c}",
            wanted.0, wanted.1
        ),
    }
}

/// Defects for the labeling that comes closest to the expected ordering.
/// Column-side failures while the row side holds are reported as asymmetry
/// violations for the asymmetric classes.
fn ordering_defects(
    matrix: &PayoffMatrix,
    class: GameClass,
    config: &ClassifyConfig,
) -> Vec<Defect> {
    let (row_chain, col_chain) = class_constraints(class).expect("classic class");
    let zero_sum_needed = class == GameClass::MatchingPennies && config.require_zero_sum;

    let mut best: Option<(usize, Vec<Defect>)> = None;
    for &(row_c, col_c) in &LABELINGS {
        let (row, col) = quads(matrix, row_c, col_c);
        let row_violations = violations(&row, row_chain, config.strict);
        let col_violations = violations(&col, col_chain, config.strict);
        let mut defects = Vec::new();
        let asymmetric = matches!(
            class,
            GameClass::BattleOfSexes | GameClass::MatchingPennies
        );
        let col_kind = if asymmetric && row_violations.is_empty() && !col_violations.is_empty()
        {
            DefectKind::AsymmetryViolation
        } else {
            DefectKind::OrderingViolation
        };
        let relation = if config.strict { ">" } else { ">=" };
        for (a, b) in &row_violations {
            defects.push(Defect {
                kind: DefectKind::OrderingViolation,
                detail: format!(
                    "row: {a}={} not {relation} {b}={}",
                    row.value(a),
                    row.value(b)
                ),
            });
        }
        for (a, b) in &col_violations {
            defects.push(Defect {
                kind: col_kind,
                detail: format!(
                    "col: {a}={} not {relation} {b}={}",
                    col.value(a),
                    col.value(b)
                ),
            });
        }
        if zero_sum_needed && defects.is_empty() {
            if let Some((r, c)) = matrix.zero_sum_offender() {
                defects.push(Defect {
                    kind: DefectKind::ZeroSumViolation,
                    detail: format!(
                        "payoffs for profile ({},{}) sum to a non-zero value",
                        matrix.row_actions[r], matrix.col_actions[c]
                    ),
                });
            }
        }
        let score = defects.len();
        if best.as_ref().is_none_or(|(s, _)| score < *s) {
            best = Some((score, defects));
        }
    }
    best.expect("at least one labeling").1
}

/// Structural checks for turn-based play: exactly one player controls the
/// initial situation, and the other player gains control (only) after the
/// opening move.
fn sequential_structure_defects(
    game_specific: &Program,
    limits: EngineLimits,
) -> Result<Vec<Defect>, EnumerateError> {
    let program = with_game_rules(game_specific);
    let mut defects = Vec::new();

    let init_query = [Term::compound("initial", vec![Term::var("I", 0)])];
    let (initials, _) = solve_all(&program, &init_query, limits);
    let initials = initials.map_err(EnumerateError::Engine)?;
    let Some(initial) = initials.first().map(|s| s.bindings[0].1.clone()) else {
        return Err(EnumerateError::NoInitial);
    };

    let player_query = [Term::compound(
        "holds",
        vec![
            Term::compound("player", vec![Term::var("P", 0)]),
            initial.clone(),
        ],
    )];
    let (players, _) = solve_all(&program, &player_query, limits);
    let mut players: Vec<Term> = players
        .map_err(EnumerateError::Engine)?
        .into_iter()
        .map(|s| s.bindings[0].1.clone())
        .collect();
    players.dedup();

    let mut controllers = Vec::new();
    for player in &players {
        let control = Term::compound("control", vec![player.clone()]);
        if holds_in(&program, &control, &initial, limits).map_err(EnumerateError::Engine)? {
            controllers.push(player.clone());
        }
    }
    if controllers.len() != 1 {
        defects.push(Defect {
            kind: DefectKind::WrongShape,
            detail: format!(
                "expected exactly one player in control of the initial situation, found {}",
                controllers.len()
            ),
        });
        return Ok(defects);
    }
    let first = &controllers[0];
    let followers: Vec<&Term> = players.iter().filter(|p| *p != first).collect();

    let legal_query = [Term::compound(
        "legal",
        vec![Term::var("M", 0), initial.clone()],
    )];
    let (moves, _) = solve_all(&program, &legal_query, limits);
    let moves = moves.map_err(EnumerateError::Engine)?;
    if moves.is_empty() {
        defects.push(Defect {
            kind: DefectKind::WrongShape,
            detail: "no legal opening move".to_string(),
        });
        return Ok(defects);
    }
    for opening in moves {
        let after = Term::compound(
            "do",
            vec![opening.bindings[0].1.clone(), initial.clone()],
        );
        let first_control = Term::compound("control", vec![first.clone()]);
        if holds_in(&program, &first_control, &after, limits).map_err(EnumerateError::Engine)? {
            defects.push(Defect {
                kind: DefectKind::WrongShape,
                detail: "the first mover keeps control after the opening move".to_string(),
            });
        }
        for follower in &followers {
            let control = Term::compound("control", vec![(*follower).clone()]);
            if !holds_in(&program, &control, &after, limits).map_err(EnumerateError::Engine)? {
                defects.push(Defect {
                    kind: DefectKind::WrongShape,
                    detail: format!(
                        "player {} never gains control after the opening move",
                        print_term(follower)
                    ),
                });
            }
        }
        if !defects.is_empty() {
            break;
        }
    }
    Ok(defects)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix_2x2(cells: [[(i64, i64); 2]; 2]) -> PayoffMatrix {
        PayoffMatrix {
            row_actions: vec!["C".into(), "D".into()],
            col_actions: vec!["C".into(), "D".into()],
            payoffs: cells
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|(a, b)| (Number::integer(*a), Number::integer(*b)))
                        .collect()
                })
                .collect(),
        }
    }

    #[test]
    fn canonical_sources_parse_clean() {
        for class in GameClass::ALL {
            let program = canonical_game(class);
            assert!(!program.is_empty());
        }
    }

    #[test]
    fn pd_matrix_classifies_as_pd_only() {
        let m = matrix_2x2([[(65, 65), (10, 100)], [(100, 10), (35, 35)]]);
        let classes = classify(&m);
        assert_eq!(classes.into_iter().collect::<Vec<_>>(), [GameClass::PrisonersDilemma]);
    }

    #[test]
    fn stag_hunt_example_values() {
        let m = matrix_2x2([[(3, 3), (0, 2)], [(2, 0), (1, 1)]]);
        assert_eq!(
            classify(&m).into_iter().collect::<Vec<_>>(),
            [GameClass::StagHunt]
        );
    }

    #[test]
    fn degenerate_matrix_is_unclassifiable() {
        let m = matrix_2x2([[(0, 0), (0, 0)], [(0, 0), (0, 0)]]);
        assert!(classify(&m).is_empty());
    }

    #[test]
    fn label_invariance() {
        // Same stag hunt with renamed moves and swapped action order.
        let m = PayoffMatrix {
            row_actions: vec!["slack".into(), "team_up".into()],
            col_actions: vec!["slack".into(), "team_up".into()],
            payoffs: vec![
                vec![(Number::integer(1), Number::integer(1)), (Number::integer(2), Number::integer(0))],
                vec![(Number::integer(0), Number::integer(2)), (Number::integer(3), Number::integer(3))],
            ],
        };
        assert_eq!(
            classify(&m).into_iter().collect::<Vec<_>>(),
            [GameClass::StagHunt]
        );
    }

    #[test]
    fn matching_pennies_requires_zero_sum_by_default() {
        let mut m = matrix_2x2([[(1, -1), (-1, 1)], [(-1, 1), (1, -1)]]);
        assert_eq!(
            classify(&m).into_iter().collect::<Vec<_>>(),
            [GameClass::MatchingPennies]
        );
        // Break the sum but keep the orderings.
        m.payoffs[0][0] = (Number::integer(2), Number::integer(-1));
        assert!(classify(&m).is_empty());
        let relaxed = ClassifyConfig {
            require_zero_sum: false,
            ..Default::default()
        };
        assert_eq!(
            classify_with(&m, &relaxed).into_iter().collect::<Vec<_>>(),
            [GameClass::MatchingPennies]
        );
    }

    #[test]
    fn ties_violate_strict_orderings() {
        let m = matrix_2x2([[(65, 65), (10, 100)], [(100, 10), (65, 65)]]);
        assert!(classify(&m).is_empty());
        let weak = ClassifyConfig {
            strict: false,
            ..Default::default()
        };
        assert!(classify_with(&m, &weak).contains(&GameClass::PrisonersDilemma));
    }

    #[test]
    fn extraction_from_canonical_pd() {
        let matrix = extract_matrix(
            &canonical_game(GameClass::PrisonersDilemma),
            EngineLimits::default(),
        )
        .unwrap();
        assert_eq!(matrix.shape(), (2, 2));
        let r = |label: &str| matrix.row_actions.iter().position(|a| a == label).unwrap();
        let c = |label: &str| matrix.col_actions.iter().position(|a| a == label).unwrap();
        assert_eq!(
            matrix.get(r("C"), c("C")),
            (Number::integer(65), Number::integer(65))
        );
        assert_eq!(
            matrix.get(r("C"), c("D")),
            (Number::integer(10), Number::integer(100))
        );
        assert_eq!(
            matrix.get(r("D"), c("C")),
            (Number::integer(100), Number::integer(10))
        );
        assert_eq!(
            matrix.get(r("D"), c("D")),
            (Number::integer(35), Number::integer(35))
        );
    }

    #[test]
    fn canonical_soundness_across_the_five_classes() {
        for class in GameClass::CLASSIC {
            let matrix =
                extract_matrix(&canonical_game(class), EngineLimits::default()).unwrap();
            let detected = classify(&matrix);
            assert!(detected.contains(&class), "{class} not detected");
            for other in GameClass::CLASSIC {
                if other != class {
                    assert!(
                        !detected.contains(&other),
                        "{class} misdetected as {other}"
                    );
                }
            }
        }
    }

    #[test]
    fn rps_matrix_is_zero_sum_and_cyclic() {
        let matrix = extract_matrix(
            &canonical_game(GameClass::RockPaperScissors),
            EngineLimits::default(),
        )
        .unwrap();
        assert_eq!(matrix.shape(), (3, 3));
        assert!(matrix.is_zero_sum());
        assert_eq!(
            classify(&matrix).into_iter().collect::<Vec<_>>(),
            [GameClass::RockPaperScissors]
        );
    }

    #[test]
    fn semantic_verdicts_on_canonical_games() {
        let limits = EngineLimits::default();
        let config = ClassifyConfig::default();
        for class in GameClass::ALL {
            let verdict = check_semantics(&canonical_game(class), class, limits, &config);
            assert!(verdict.ok, "{class}: {:?}", verdict.defects);
        }
        // A hawk-dove program is not a prisoner's dilemma.
        let verdict = check_semantics(
            &canonical_game(GameClass::HawkDove),
            GameClass::PrisonersDilemma,
            limits,
            &config,
        );
        assert!(!verdict.ok);
        assert_eq!(
            verdict.detected_classes.iter().collect::<Vec<_>>(),
            [&GameClass::HawkDove]
        );
        assert!(verdict
            .defects
            .iter()
            .all(|d| d.kind == DefectKind::OrderingViolation));
    }

    #[test]
    fn simultaneous_pd_is_not_sequential() {
        let verdict = check_semantics(
            &canonical_game(GameClass::PrisonersDilemma),
            GameClass::SequentialPd,
            EngineLimits::default(),
            &ClassifyConfig::default(),
        );
        assert!(!verdict.ok);
        assert!(verdict
            .defects
            .iter()
            .any(|d| d.kind == DefectKind::WrongShape));
    }

    #[test]
    fn sequential_pd_detects_both_structure_and_ordering() {
        let verdict = check_semantics(
            &canonical_game(GameClass::SequentialPd),
            GameClass::SequentialPd,
            EngineLimits::default(),
            &ClassifyConfig::default(),
        );
        assert!(verdict.ok, "{:?}", verdict.defects);
        assert!(verdict
            .detected_classes
            .contains(&GameClass::SequentialPd));
    }

    #[test]
    fn matrix_serde_round_trip() {
        let matrix = extract_matrix(
            &canonical_game(GameClass::HawkDove),
            EngineLimits::default(),
        )
        .unwrap();
        let json = serde_json::to_string(&matrix).unwrap();
        let back: PayoffMatrix = serde_json::from_str(&json).unwrap();
        assert_eq!(matrix, back);
    }
}
