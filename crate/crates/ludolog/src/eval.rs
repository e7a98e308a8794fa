//! Evaluation harness: formalizes every description in a manifest, grades
//! the results, and aggregates first-attempt syntactic accuracy and
//! semantic accuracy per (style, payoffs) cell and per game class.
//!
//! Records are independent, so the harness fans them out over a worker pool
//! (rayon, behind the `parallel` feature) and folds the completed rows
//! sequentially; the transcript writer is the only shared sink. With the
//! feature disabled the same code runs on a plain iterator.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{DescriptionRecord, Manifest, PayoffStyle, Style};
use crate::engine::EngineLimits;
use crate::games::{check_semantics, ClassifyConfig, GameClass, SemanticVerdict};
use crate::parser::parse_program;
use crate::pipeline::{
    FormalizationResult, FormalizeStatus, Pipeline, PipelineError, PromptMode,
};

/// An accuracy ratio with its integer numerator and denominator; the value
/// is undefined when the denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Ratio {
    pub numerator: u64,
    pub denominator: u64,
}

impl Ratio {
    pub fn value(&self) -> Option<f64> {
        (self.denominator > 0).then(|| self.numerator as f64 / self.denominator as f64)
    }

    fn tally(&mut self, hit: bool) {
        self.denominator += 1;
        if hit {
            self.numerator += 1;
        }
    }

    pub fn render(&self) -> String {
        match self.value() {
            Some(v) => format!("{v:.2} ({}/{})", self.numerator, self.denominator),
            None => format!("undefined ({}/{})", self.numerator, self.denominator),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CellAccuracy {
    pub syntactic: Ratio,
    pub semantic: Ratio,
}

/// The four (style, payoffs) cells of the accuracy grid.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CellGrid {
    pub standard_numerical: CellAccuracy,
    pub standard_non_numerical: CellAccuracy,
    pub non_standard_numerical: CellAccuracy,
    pub non_standard_non_numerical: CellAccuracy,
}

impl CellGrid {
    pub fn cell(&self, style: Style, payoffs: PayoffStyle) -> &CellAccuracy {
        match (style, payoffs) {
            (Style::Standard, PayoffStyle::Numerical) => &self.standard_numerical,
            (Style::Standard, PayoffStyle::NonNumerical) => &self.standard_non_numerical,
            (Style::NonStandard, PayoffStyle::Numerical) => &self.non_standard_numerical,
            (Style::NonStandard, PayoffStyle::NonNumerical) => {
                &self.non_standard_non_numerical
            }
        }
    }

    fn cell_mut(&mut self, style: Style, payoffs: PayoffStyle) -> &mut CellAccuracy {
        match (style, payoffs) {
            (Style::Standard, PayoffStyle::Numerical) => &mut self.standard_numerical,
            (Style::Standard, PayoffStyle::NonNumerical) => &mut self.standard_non_numerical,
            (Style::NonStandard, PayoffStyle::Numerical) => &mut self.non_standard_numerical,
            (Style::NonStandard, PayoffStyle::NonNumerical) => {
                &mut self.non_standard_non_numerical
            }
        }
    }
}

/// Per-class semantic accuracy, with a non-standard-only breakdown since
/// the aggregation basis differs between reports.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassAccuracy {
    pub overall: Ratio,
    pub non_standard: Ratio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub id: String,
    pub game_class: GameClass,
    pub style: Style,
    pub payoffs: PayoffStyle,
    pub status: FormalizeStatus,
    pub first_attempt_syntax_ok: bool,
    pub excluded: bool,
    /// Present when a final program existed to grade.
    pub verdict: Option<SemanticVerdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall_syntactic: Ratio,
    pub cells: CellGrid,
    pub per_class: BTreeMap<GameClass, ClassAccuracy>,
    pub exclusions: Vec<Exclusion>,
    pub rows: Vec<EvalRow>,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("one-shot example record '{0}' not found in the manifest")]
    MissingExample(String),
    #[error("cannot read gold program for example '{id}': {source}")]
    ExampleGold {
        id: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub mode: PromptMode,
    /// Manifest id whose description and gold program serve as the one-shot
    /// example.
    pub example_id: String,
    pub classify: ClassifyConfig,
    pub limits: EngineLimits,
    /// Worker-pool width; `None` uses the global default.
    pub workers: Option<usize>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            mode: PromptMode::OneShot,
            example_id: "pd_std_num".to_string(),
            classify: ClassifyConfig::default(),
            limits: EngineLimits::default(),
            workers: None,
        }
    }
}

/// Formalizes and grades one record. The semantic verdict uses the final
/// program even when it needed repair rounds; records that never produced a
/// syntactically valid program carry no verdict.
fn grade_record(
    record: &DescriptionRecord,
    pipeline: &Pipeline,
    example: Option<(&str, &str)>,
    opts: &EvalOptions,
) -> Result<EvalRow, PipelineError> {
    let result: FormalizationResult =
        pipeline.formalize(&record.id, &record.text, crate::engine::GAME_INDEPENDENT_SRC, example)?;
    let verdict = result.final_program.as_deref().map(|source| {
        let (program, _) = parse_program(source);
        check_semantics(&program, record.game_class, opts.limits, &opts.classify)
    });
    Ok(EvalRow {
        id: record.id.clone(),
        game_class: record.game_class,
        style: record.style,
        payoffs: record.payoffs,
        status: result.status,
        first_attempt_syntax_ok: result.first_attempt_syntax_ok,
        excluded: record.excluded(),
        verdict,
    })
}

/// Evaluates the whole manifest, fanning records out over the worker pool
/// when the `parallel` feature is enabled.
pub fn evaluate(
    manifest: &Manifest,
    pipeline: &Pipeline,
    opts: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    let example = resolve_example(manifest, opts)?;
    let example_ref = example.as_ref().map(|(nl, xi)| (nl.as_str(), xi.as_str()));
    let rows = map_records(manifest, pipeline, example_ref, opts)?;
    Ok(aggregate(manifest, rows))
}

/// Sequential fallback, also used as the baseline in the benchmark suite.
pub fn evaluate_sequential(
    manifest: &Manifest,
    pipeline: &Pipeline,
    opts: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    let example = resolve_example(manifest, opts)?;
    let example_ref = example.as_ref().map(|(nl, xi)| (nl.as_str(), xi.as_str()));
    let rows = manifest
        .records
        .iter()
        .map(|r| grade_record(r, pipeline, example_ref, opts))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(aggregate(manifest, rows))
}

fn resolve_example(
    manifest: &Manifest,
    opts: &EvalOptions,
) -> Result<Option<(String, String)>, EvalError> {
    match opts.mode {
        PromptMode::ZeroShot => Ok(None),
        PromptMode::OneShot => {
            let record = manifest
                .get(&opts.example_id)
                .ok_or_else(|| EvalError::MissingExample(opts.example_id.clone()))?;
            let gold = manifest
                .load_gold(&record.id)
                .map_err(|source| EvalError::ExampleGold {
                    id: record.id.clone(),
                    source,
                })?;
            Ok(Some((record.text.clone(), gold)))
        }
    }
}

#[cfg(feature = "parallel")]
fn map_records(
    manifest: &Manifest,
    pipeline: &Pipeline,
    example: Option<(&str, &str)>,
    opts: &EvalOptions,
) -> Result<Vec<EvalRow>, PipelineError> {
    use rayon::prelude::*;
    let run = || {
        manifest
            .records
            .par_iter()
            .map(|r| grade_record(r, pipeline, example, opts))
            .collect::<Result<Vec<_>, _>>()
    };
    match opts.workers {
        Some(width) => rayon::ThreadPoolBuilder::new()
            .num_threads(width)
            .build()
            .expect("worker pool")
            .install(run),
        None => run(),
    }
}

#[cfg(not(feature = "parallel"))]
fn map_records(
    manifest: &Manifest,
    pipeline: &Pipeline,
    example: Option<(&str, &str)>,
    opts: &EvalOptions,
) -> Result<Vec<EvalRow>, PipelineError> {
    manifest
        .records
        .iter()
        .map(|r| grade_record(r, pipeline, example, opts))
        .collect()
}

/// Single-threaded fold over the completed rows.
///
/// The syntactic numerator counts first-attempt successes over all records.
/// The semantic denominator drops excluded records and records that never
/// produced a program (failed syntax entirely, or the transport failed).
fn aggregate(manifest: &Manifest, rows: Vec<EvalRow>) -> EvalReport {
    let mut report = EvalReport {
        overall_syntactic: Ratio::default(),
        cells: CellGrid::default(),
        per_class: BTreeMap::new(),
        exclusions: Vec::new(),
        rows: Vec::new(),
    };
    for row in &rows {
        let cell = report.cells.cell_mut(row.style, row.payoffs);
        cell.syntactic.tally(row.first_attempt_syntax_ok);
        report.overall_syntactic.tally(row.first_attempt_syntax_ok);

        let scorable = !row.excluded && row.verdict.is_some();
        if scorable {
            let ok = row.verdict.as_ref().is_some_and(|v| v.ok);
            cell.semantic.tally(ok);
            let class = report.per_class.entry(row.game_class).or_default();
            class.overall.tally(ok);
            if row.style == Style::NonStandard {
                class.non_standard.tally(ok);
            }
        }
        if row.excluded {
            let reason = manifest
                .get(&row.id)
                .and_then(|r| r.notes.clone())
                .unwrap_or_default();
            report.exclusions.push(Exclusion {
                id: row.id.clone(),
                reason,
            });
        }
    }
    report.rows = rows;
    report
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderFormat {
    Json,
    Markdown,
}

pub fn render_report(report: &EvalReport, format: RenderFormat) -> String {
    match format {
        RenderFormat::Json => {
            serde_json::to_string_pretty(report).expect("report serializes")
        }
        RenderFormat::Markdown => render_markdown(report),
    }
}

fn status_text(status: FormalizeStatus) -> &'static str {
    match status {
        FormalizeStatus::OkFirstTry => "ok_first_try",
        FormalizeStatus::OkAfterRepair => "ok_after_repair",
        FormalizeStatus::FailedSyntax => "failed_syntax",
        FormalizeStatus::LlmError => "llm_error",
    }
}

fn render_markdown(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str("# Evaluation report\n\n");
    out.push_str("## Accuracy by description variant\n\n");
    out.push_str(
        "| Payoffs/Desc. | Standard synt | Standard sem | Non-standard synt | Non-standard sem |\n",
    );
    out.push_str("|---|---|---|---|---|\n");
    for (label, payoffs) in [
        ("Numerical", PayoffStyle::Numerical),
        ("Non-numerical", PayoffStyle::NonNumerical),
    ] {
        let std_cell = report.cells.cell(Style::Standard, payoffs);
        let ns_cell = report.cells.cell(Style::NonStandard, payoffs);
        out.push_str(&format!(
            "| {label} | {} | {} | {} | {} |\n",
            std_cell.syntactic.render(),
            std_cell.semantic.render(),
            ns_cell.syntactic.render(),
            ns_cell.semantic.render(),
        ));
    }
    out.push_str(&format!(
        "\nOverall first-attempt syntactic accuracy: {}\n",
        report.overall_syntactic.render()
    ));

    out.push_str("\n## Semantic accuracy by game class\n\n");
    out.push_str("| Class | All styles | Non-standard only |\n|---|---|---|\n");
    for (class, accuracy) in &report.per_class {
        out.push_str(&format!(
            "| {class} | {} | {} |\n",
            accuracy.overall.render(),
            accuracy.non_standard.render()
        ));
    }

    if !report.exclusions.is_empty() {
        out.push_str("\n## Exclusions\n\n");
        for exclusion in &report.exclusions {
            out.push_str(&format!("- `{}` — {}\n", exclusion.id, exclusion.reason));
        }
    }

    out.push_str("\n## Per-description results\n\n");
    out.push_str("| id | class | status | first attempt ok | semantics |\n|---|---|---|---|---|\n");
    for row in &report.rows {
        let semantics = if row.excluded {
            "excluded".to_string()
        } else {
            match &row.verdict {
                Some(v) if v.ok => "ok".to_string(),
                Some(_) => "defective".to_string(),
                None => "not scored".to_string(),
            }
        };
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} |\n",
            row.id,
            row.game_class,
            status_text(row.status),
            row.first_attempt_syntax_ok,
            semantics
        ));
    }
    out
}
