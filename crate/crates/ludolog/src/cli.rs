//! Command-line interface: one binary exposing the toolkit.
//!
//! Machine-readable output (JSON, or the solver's answer format for
//! `solve`) goes to stdout; diagnostics go to stderr. Exit codes: 0 on
//! success, 1 on domain failure (syntax errors, failed verdicts, failed
//! formalization), 2 on usage errors.

use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::corpus::{load_manifest, Manifest};
use crate::engine::{
    enumerate_outcomes, format_solution, solve, EngineLimits, GAME_INDEPENDENT_SRC,
};
use crate::eval::{evaluate, render_report, EvalOptions, RenderFormat};
use crate::games::{check_semantics, classify_with, extract_matrix, ClassifyConfig, GameClass};
use crate::parser::{check_syntax_with, parse_program_named, parse_query, ParseOptions};
use crate::pipeline::{
    ChatClient, FormalizeStatus, HttpChatClient, LlmConfig, Pipeline, PipelineOptions,
    PromptMode, ReplayClient, TranscriptWriter,
};
use crate::term::Program;

#[derive(Parser)]
#[command(name = "ludolog", version, about = "Logic-programming toolkit for strategic games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a game program and print its syntax report as JSON.
    Parse {
        /// Program file (.pl).
        file: PathBuf,
        /// Treat singleton-variable warnings as errors.
        #[arg(long)]
        strict: bool,
    },
    /// Run queries against a game program and print answers.
    Solve {
        /// Program file (.pl); the game-independent rules are prepended
        /// unless --bare is given.
        file: PathBuf,
        /// Query to run (e.g. "game(s0,F)"); reads queries from stdin when
        /// omitted.
        #[arg(long)]
        query: Option<String>,
        /// Do not prepend the game-independent rules.
        #[arg(long)]
        bare: bool,
        #[command(flatten)]
        limits: LimitArgs,
    },
    /// Enumerate every play of a game and print trace/outcome pairs.
    Outcomes {
        file: PathBuf,
        #[command(flatten)]
        limits: LimitArgs,
    },
    /// Extract the payoff matrix and classify the game.
    Classify {
        file: PathBuf,
        /// Expected class; the verdict decides the exit code.
        #[arg(long, value_parser = parse_class)]
        expect: Option<GameClass>,
        #[command(flatten)]
        classify: ClassifyArgs,
        #[command(flatten)]
        limits: LimitArgs,
    },
    /// Formalize one description from a manifest through the LLM pipeline.
    Formalize {
        #[arg(long)]
        manifest: PathBuf,
        /// Description id to formalize.
        #[arg(long)]
        id: String,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Formalize and grade every description in a manifest.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        /// Write the JSON report here (stdout always gets it too).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write a markdown report here.
        #[arg(long)]
        markdown: Option<PathBuf>,
        /// Worker-pool width for record-level parallelism.
        #[arg(long)]
        workers: Option<usize>,
        #[command(flatten)]
        classify: ClassifyArgs,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Re-run the pipeline offline from a transcript and print per-record
    /// statuses.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        transcript: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
}

#[derive(Args)]
struct LimitArgs {
    /// Inference-step budget per query.
    #[arg(long, default_value_t = 1_000_000)]
    max_steps: u64,
    /// Term-depth bound.
    #[arg(long, default_value_t = 512)]
    max_depth: usize,
    /// Stop after this many solutions.
    #[arg(long)]
    max_solutions: Option<u64>,
}

impl LimitArgs {
    fn to_limits(&self) -> EngineLimits {
        EngineLimits {
            max_inference_steps: self.max_steps,
            max_term_depth: self.max_depth,
            max_solutions: self.max_solutions,
        }
    }
}

#[derive(Args)]
struct ClassifyArgs {
    /// Accept weak (non-strict) payoff orderings.
    #[arg(long)]
    weak: bool,
    /// Do not require zero-sum payoffs for matching pennies.
    #[arg(long)]
    allow_non_zero_sum_mp: bool,
}

impl ClassifyArgs {
    fn to_config(&self) -> ClassifyConfig {
        ClassifyConfig {
            strict: !self.weak,
            require_zero_sum: !self.allow_non_zero_sum_mp,
        }
    }
}

#[derive(Args)]
struct PipelineArgs {
    /// Configuration file (TOML) for endpoint/model/limits.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replay transcript instead of calling the live endpoint.
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Record requests/responses into this transcript file.
    #[arg(long)]
    record: Option<PathBuf>,
    /// Prompting mode.
    #[arg(long, default_value = "one_shot", value_parser = parse_mode)]
    mode: PromptMode,
    /// Manifest id providing the one-shot example.
    #[arg(long, default_value = "pd_std_num")]
    example_id: String,
    /// Treat singleton warnings as errors when validating generated code.
    #[arg(long)]
    strict: bool,
    /// Re-issue the original translation prompt on the final attempt.
    #[arg(long)]
    fresh_restart: bool,
    /// Override the configured model name.
    #[arg(long)]
    model: Option<String>,
    /// Override the configured endpoint URL.
    #[arg(long)]
    endpoint: Option<String>,
    /// Override the configured attempt budget.
    #[arg(long)]
    max_attempts: Option<u32>,
}

fn parse_class(s: &str) -> Result<GameClass, String> {
    s.parse()
}

fn parse_mode(s: &str) -> Result<PromptMode, String> {
    match s {
        "one_shot" => Ok(PromptMode::OneShot),
        "zero_shot" => Ok(PromptMode::ZeroShot),
        other => Err(format!("unknown mode '{other}' (one_shot|zero_shot)")),
    }
}

/// Configuration file overlay; flags take precedence over these, which take
/// precedence over the defaults. The API key comes from the environment
/// variable named by `api_key_env`, never from the file itself.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    endpoint: Option<String>,
    model: Option<String>,
    temperature: Option<f64>,
    max_output_tokens: Option<u32>,
    max_attempts: Option<u32>,
    timeout_secs: Option<u64>,
    api_key_env: Option<String>,
    retry_backoff_ms: Option<u64>,
}

fn load_llm_config(args: &PipelineArgs) -> Result<LlmConfig, String> {
    let mut cfg = LlmConfig::default();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let file: FileConfig =
            toml::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))?;
        if let Some(v) = file.endpoint {
            cfg.endpoint = v;
        }
        if let Some(v) = file.model {
            cfg.model = v;
        }
        if let Some(v) = file.temperature {
            cfg.temperature = v;
        }
        if let Some(v) = file.max_output_tokens {
            cfg.max_output_tokens = v;
        }
        if let Some(v) = file.max_attempts {
            cfg.max_attempts = v;
        }
        if let Some(v) = file.timeout_secs {
            cfg.timeout_secs = v;
        }
        if let Some(v) = file.api_key_env {
            cfg.api_key_env = v;
        }
        if let Some(v) = file.retry_backoff_ms {
            cfg.retry_backoff_ms = v;
        }
    }
    if let Some(model) = &args.model {
        cfg.model = model.clone();
    }
    if let Some(endpoint) = &args.endpoint {
        cfg.endpoint = endpoint.clone();
    }
    if let Some(max_attempts) = args.max_attempts {
        cfg.max_attempts = max_attempts;
    }
    Ok(cfg)
}

pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32, String> {
    match cli.command {
        Command::Parse { file, strict } => cmd_parse(&file, strict),
        Command::Solve {
            file,
            query,
            bare,
            limits,
        } => cmd_solve(&file, query.as_deref(), bare, limits.to_limits()),
        Command::Outcomes { file, limits } => cmd_outcomes(&file, limits.to_limits()),
        Command::Classify {
            file,
            expect,
            classify,
            limits,
        } => cmd_classify(&file, expect, &classify.to_config(), limits.to_limits()),
        Command::Formalize {
            manifest,
            id,
            pipeline,
        } => cmd_formalize(&manifest, &id, &pipeline),
        Command::Eval {
            manifest,
            out,
            markdown,
            workers,
            classify,
            pipeline,
        } => cmd_eval(
            &manifest,
            out.as_deref(),
            markdown.as_deref(),
            workers,
            &classify.to_config(),
            &pipeline,
        ),
        Command::Replay {
            manifest,
            transcript,
            pipeline,
        } => cmd_replay(&manifest, &transcript, &pipeline),
    }
}

fn read_program(path: &Path, strict: bool) -> Result<(Program, crate::parser::SyntaxReport), String> {
    let text =
        fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let name = path.display().to_string();
    Ok(parse_program_named(&text, &name, &ParseOptions { strict }))
}

fn cmd_parse(file: &Path, strict: bool) -> Result<i32, String> {
    let text =
        fs::read_to_string(file).map_err(|e| format!("cannot read {}: {e}", file.display()))?;
    let report = check_syntax_with(&text, &ParseOptions { strict });
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(if report.ok() { 0 } else { 1 })
}

fn compose(file: &Path, bare: bool) -> Result<Program, String> {
    let (program, report) = read_program(file, false)?;
    if !report.ok() {
        for error in &report.errors {
            eprintln!("{}: {error}", file.display());
        }
        return Err("program has syntax errors".to_string());
    }
    Ok(if bare {
        program
    } else {
        crate::engine::with_game_rules(&program)
    })
}

fn run_query(program: &Program, query_text: &str, limits: EngineLimits) -> Result<i32, String> {
    let goals = parse_query(query_text).map_err(|e| format!("query: {e}"))?;
    let mut stdout = std::io::stdout().lock();
    for result in solve(program, &goals, limits) {
        match result {
            Ok(solution) => {
                writeln!(stdout, "{} ;", format_solution(&solution)).map_err(|e| e.to_string())?;
            }
            Err(err) => {
                eprintln!("error: {err}");
                return Ok(1);
            }
        }
    }
    writeln!(stdout, "false.").map_err(|e| e.to_string())?;
    Ok(0)
}

fn cmd_solve(
    file: &Path,
    query: Option<&str>,
    bare: bool,
    limits: EngineLimits,
) -> Result<i32, String> {
    let program = compose(file, bare)?;
    match query {
        Some(text) => run_query(&program, text, limits),
        None => {
            // Batch REPL: one query per stdin line, answers printed eagerly.
            let stdin = std::io::stdin();
            let mut exit = 0;
            for line in stdin.lock().lines() {
                let line = line.map_err(|e| e.to_string())?;
                let trimmed = line.trim();
                if trimmed.is_empty() {
                    continue;
                }
                if trimmed == "halt." {
                    break;
                }
                match run_query(&program, trimmed, limits) {
                    Ok(code) => exit = exit.max(code),
                    Err(message) => {
                        eprintln!("error: {message}");
                        exit = 1;
                    }
                }
            }
            Ok(exit)
        }
    }
}

fn cmd_outcomes(file: &Path, limits: EngineLimits) -> Result<i32, String> {
    let (program, report) = read_program(file, false)?;
    if !report.ok() {
        println!(
            "{}",
            serde_json::json!({ "error": "syntax", "report": report })
        );
        return Ok(1);
    }
    match enumerate_outcomes(&program, limits) {
        Ok(pairs) => {
            let rows: Vec<serde_json::Value> = pairs
                .iter()
                .map(|(trace, outcome)| {
                    serde_json::json!({
                        "trace": trace.to_string(),
                        "outcome": crate::term::print_term(outcome),
                    })
                })
                .collect();
            println!("{}", serde_json::to_string_pretty(&rows).expect("serializes"));
            Ok(0)
        }
        Err(err) => {
            println!("{}", serde_json::json!({ "error": err.to_string() }));
            Ok(1)
        }
    }
}

fn cmd_classify(
    file: &Path,
    expect: Option<GameClass>,
    config: &ClassifyConfig,
    limits: EngineLimits,
) -> Result<i32, String> {
    let (program, report) = read_program(file, false)?;
    if !report.ok() {
        println!(
            "{}",
            serde_json::json!({ "error": "syntax", "report": report })
        );
        return Ok(1);
    }
    match expect {
        Some(expected) => {
            let verdict = check_semantics(&program, expected, limits, config);
            println!(
                "{}",
                serde_json::to_string_pretty(&verdict).expect("verdict serializes")
            );
            Ok(if verdict.ok { 0 } else { 1 })
        }
        None => match extract_matrix(&program, limits) {
            Ok(matrix) => {
                let classes = classify_with(&matrix, config);
                println!(
                    "{}",
                    serde_json::to_string_pretty(&serde_json::json!({
                        "matrix": matrix,
                        "classes": classes,
                    }))
                    .expect("serializes")
                );
                Ok(0)
            }
            Err(err) => {
                println!("{}", serde_json::json!({ "error": err.to_string() }));
                Ok(1)
            }
        },
    }
}

struct ClientChoice {
    replay: Option<ReplayClient>,
    live: Option<HttpChatClient>,
}

impl ClientChoice {
    fn new(args: &PipelineArgs, cfg: &LlmConfig) -> Result<Self, String> {
        match &args.replay {
            Some(path) => Ok(ClientChoice {
                replay: Some(
                    ReplayClient::from_path(path)
                        .map_err(|e| format!("transcript {}: {e}", path.display()))?,
                ),
                live: None,
            }),
            None => Ok(ClientChoice {
                replay: None,
                live: Some(HttpChatClient::new(cfg)),
            }),
        }
    }

    fn client(&self) -> &dyn ChatClient {
        match (&self.replay, &self.live) {
            (Some(replay), _) => replay,
            (_, Some(live)) => live,
            _ => unreachable!(),
        }
    }
}

fn build_pipeline<'c>(
    args: &PipelineArgs,
    cfg: LlmConfig,
    client: &'c dyn ChatClient,
) -> Result<Pipeline<'c>, String> {
    let mut pipeline = Pipeline::new(client, cfg);
    pipeline.opts = PipelineOptions {
        strict: args.strict,
        fresh_restart: args.fresh_restart,
    };
    if let Some(path) = &args.record {
        pipeline.transcript = Some(
            TranscriptWriter::create(path)
                .map_err(|e| format!("transcript {}: {e}", path.display()))?,
        );
    }
    Ok(pipeline)
}

fn one_shot_example(
    manifest: &Manifest,
    args: &PipelineArgs,
) -> Result<Option<(String, String)>, String> {
    match args.mode {
        PromptMode::ZeroShot => Ok(None),
        PromptMode::OneShot => {
            let record = manifest.get(&args.example_id).ok_or_else(|| {
                format!("example record '{}' not found in manifest", args.example_id)
            })?;
            let gold = manifest
                .load_gold(&record.id)
                .map_err(|e| format!("gold program for '{}': {e}", record.id))?;
            Ok(Some((record.text.clone(), gold)))
        }
    }
}

fn cmd_formalize(manifest_path: &Path, id: &str, args: &PipelineArgs) -> Result<i32, String> {
    let manifest = load_manifest(manifest_path).map_err(|e| e.to_string())?;
    let record = manifest
        .get(id)
        .ok_or_else(|| format!("record '{id}' not found in manifest"))?;
    let cfg = load_llm_config(args)?;
    let choice = ClientChoice::new(args, &cfg)?;
    let pipeline = build_pipeline(args, cfg, choice.client())?;
    let example = one_shot_example(&manifest, args)?;
    let example_ref = example.as_ref().map(|(nl, xi)| (nl.as_str(), xi.as_str()));
    let result = pipeline
        .formalize(&record.id, &record.text, GAME_INDEPENDENT_SRC, example_ref)
        .map_err(|e| e.to_string())?;
    println!(
        "{}",
        serde_json::to_string_pretty(&result).expect("result serializes")
    );
    Ok(match result.status {
        FormalizeStatus::OkFirstTry | FormalizeStatus::OkAfterRepair => 0,
        _ => 1,
    })
}

fn cmd_eval(
    manifest_path: &Path,
    out: Option<&Path>,
    markdown: Option<&Path>,
    workers: Option<usize>,
    classify: &ClassifyConfig,
    args: &PipelineArgs,
) -> Result<i32, String> {
    let manifest = load_manifest(manifest_path).map_err(|e| e.to_string())?;
    let cfg = load_llm_config(args)?;
    let choice = ClientChoice::new(args, &cfg)?;
    let pipeline = build_pipeline(args, cfg, choice.client())?;
    let opts = EvalOptions {
        mode: args.mode,
        example_id: args.example_id.clone(),
        classify: *classify,
        limits: EngineLimits::default(),
        workers,
    };
    let report = evaluate(&manifest, &pipeline, &opts).map_err(|e| e.to_string())?;
    let json = render_report(&report, RenderFormat::Json);
    if let Some(path) = out {
        fs::write(path, &json).map_err(|e| format!("write {}: {e}", path.display()))?;
    }
    if let Some(path) = markdown {
        fs::write(path, render_report(&report, RenderFormat::Markdown))
            .map_err(|e| format!("write {}: {e}", path.display()))?;
    }
    println!("{json}");
    Ok(0)
}

fn cmd_replay(
    manifest_path: &Path,
    transcript: &Path,
    args: &PipelineArgs,
) -> Result<i32, String> {
    let manifest = load_manifest(manifest_path).map_err(|e| e.to_string())?;
    let cfg = load_llm_config(args)?;
    let replay = ReplayClient::from_path(transcript)
        .map_err(|e| format!("transcript {}: {e}", transcript.display()))?;
    let pipeline = build_pipeline(args, cfg, &replay)?;
    let example = one_shot_example(&manifest, args)?;
    let example_ref = example.as_ref().map(|(nl, xi)| (nl.as_str(), xi.as_str()));
    let mut rows = Vec::new();
    for record in &manifest.records {
        let result = pipeline
            .formalize(&record.id, &record.text, GAME_INDEPENDENT_SRC, example_ref)
            .map_err(|e| e.to_string())?;
        rows.push(serde_json::json!({
            "id": result.description_id,
            "status": result.status,
            "first_attempt_syntax_ok": result.first_attempt_syntax_ok,
            "attempts": result.attempts.len(),
        }));
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&rows).expect("rows serialize")
    );
    Ok(0)
}
