//! Formalization pipeline: prompt assembly, LLM transport with
//! record/replay, code extraction, and the syntax-repair loop.
//!
//! The loop translates a description once and then self-corrects with the
//! checker's error trace, up to a bounded number of attempts. Every prompt
//! is appended to the transcript before the network call, so a run can be
//! replayed offline bit-for-bit.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parser::{check_syntax_with, ParseOptions, SyntaxReport};

pub const PROMPT_TEMPLATE_VERSION: &str = "prompt-template/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    ZeroShot,
    OneShot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptParts {
    pub gamma: String,
    pub example_nl: Option<String>,
    pub example_xi: Option<String>,
    pub target_nl: String,
}

/// A fully rendered prompt. One-shot bundles carry both example parts;
/// zero-shot (and repair) bundles carry neither.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_text: String,
    pub user_text: String,
    pub mode: PromptMode,
    pub parts: PromptParts,
    pub template_version: String,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("one-shot example program fails the syntax check: {0:?}")]
    InvalidExample(Vec<String>),
    #[error("transcript i/o: {0}")]
    Transcript(#[from] std::io::Error),
    #[error("transcript line {line}: {message}")]
    TranscriptFormat { line: usize, message: String },
}

const SYSTEM_TEXT: &str = "You are an expert in logic programming and game theory. \
You translate natural language descriptions of strategic interactions into \
game-specific clauses for a situation-calculus game solver. Reply with exactly \
one fenced code block containing only valid clauses of the solver dialect.";

/// Builds the translation prompt: the game-independent rules, optionally a
/// worked example (description plus game-specific clauses), then the target
/// description. Deterministic: the same inputs yield byte-identical bundles.
pub fn build_prompt(
    gamma_src: &str,
    example: Option<(&str, &str)>,
    target_nl: &str,
) -> Result<PromptBundle, PipelineError> {
    if let Some((_, example_xi)) = example {
        let report = check_syntax_with(example_xi, &ParseOptions::default());
        if !report.ok() {
            return Err(PipelineError::InvalidExample(
                report.errors.iter().map(|e| e.to_string()).collect(),
            ));
        }
    }
    let mut user = String::new();
    user.push_str("The solver's game-independent rules are:\n\n```\n");
    user.push_str(gamma_src);
    user.push_str("```\n\n");
    if let Some((example_nl, example_xi)) = example {
        user.push_str("Example game description:\n\n");
        user.push_str(example_nl);
        user.push_str("\n\nGame-specific clauses for the example:\n\n```\n");
        user.push_str(example_xi);
        user.push_str("```\n\n");
    }
    user.push_str(
        "Translate the following game description into game-specific clauses \
         (initial/1, initially/2, possible/2, legal/2, effect/3, abnormal/3, \
         final/1, payoff facts with concrete numbers, finally/2):\n\n",
    );
    user.push_str(target_nl);
    user.push_str(
        "\n\nReply with exactly one fenced code block containing only the \
         game-specific clauses. Comments must use %.\n",
    );
    let mode = if example.is_some() {
        PromptMode::OneShot
    } else {
        PromptMode::ZeroShot
    };
    Ok(PromptBundle {
        system_text: SYSTEM_TEXT.to_string(),
        user_text: user,
        mode,
        parts: PromptParts {
            gamma: gamma_src.to_string(),
            example_nl: example.map(|(nl, _)| nl.to_string()),
            example_xi: example.map(|(_, xi)| xi.to_string()),
            target_nl: target_nl.to_string(),
        },
        template_version: PROMPT_TEMPLATE_VERSION.to_string(),
    })
}

/// Builds the self-correction prompt from the previous code and its syntax
/// report: every error with line/column, plus the dialect rules relevant to
/// the observed error kinds.
pub fn repair_prompt(previous_code: &str, report: &SyntaxReport) -> PromptBundle {
    debug_assert!(!report.ok());
    let mut user = String::new();
    user.push_str("The following clauses were rejected by the syntax checker:\n\n```\n");
    user.push_str(previous_code);
    if !previous_code.ends_with('\n') {
        user.push('\n');
    }
    user.push_str("```\n\nErrors:\n");
    for error in &report.errors {
        user.push_str(&format!(
            "- line {}, column {}: {}\n",
            error.span.line, error.span.col, error.message
        ));
    }
    user.push_str("\nDialect rules:\n");
    let mentions = |needle: &str| report.errors.iter().any(|e| e.message.contains(needle));
    if mentions("comment delimiter") {
        user.push_str("- comments must use % ; the '//' delimiter is not supported.\n");
    }
    if mentions("unterminated quoted atom") {
        user.push_str("- quoted atoms must be closed with a matching ' on the same line.\n");
    }
    if mentions("singleton variable") {
        user.push_str(
            "- every named variable must occur at least twice in its clause; \
             use _ for unused arguments.\n",
        );
    }
    if mentions("unknown operator") || mentions("priority clash") {
        user.push_str(
            "- only the operators :- ?- ; -> , \\+ = \\= == \\== is < > =< >= + - * / \
             are available.\n",
        );
    }
    user.push_str("- every clause must end with a period.\n");
    user.push_str("\nReturn the corrected clauses in one fenced code block.\n");
    PromptBundle {
        system_text: SYSTEM_TEXT.to_string(),
        user_text: user,
        mode: PromptMode::ZeroShot,
        parts: PromptParts {
            gamma: String::new(),
            example_nl: None,
            example_xi: None,
            target_nl: String::new(),
        },
        template_version: PROMPT_TEMPLATE_VERSION.to_string(),
    }
}

// ---------------------------------------------------------------------------
// Code extraction
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Error)]
#[error("no formal clauses found in the response")]
pub struct ExtractCodeError;

/// Pulls program text out of a chat response: the concatenation of all
/// fenced code blocks, or — when the reply has no fences — the longest run
/// of consecutive lines that parses cleanly as clauses. Trailing prose falls
/// away by construction.
pub fn extract_code(raw_response: &str) -> Result<String, ExtractCodeError> {
    let fenced = fenced_blocks(raw_response);
    if !fenced.is_empty() {
        return Ok(fenced.join("\n"));
    }
    let lines: Vec<&str> = raw_response.lines().collect();
    let mut best: Option<(usize, usize)> = None; // (start, len)
    let mut start = 0;
    while start < lines.len() {
        let mut good_len = 0;
        for end in start..lines.len() {
            let candidate = lines[start..=end].join("\n");
            let (program, report) = crate::parser::parse_program(&candidate);
            if report.ok() && !program.is_empty() {
                good_len = end - start + 1;
            }
        }
        if good_len > 0 && best.is_none_or(|(_, len)| good_len > len) {
            best = Some((start, good_len));
        }
        start += good_len.max(1);
    }
    match best {
        Some((start, len)) => Ok(lines[start..start + len].join("\n")),
        None => Err(ExtractCodeError),
    }
}

fn fenced_blocks(text: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current: Option<String> = None;
    for line in text.lines() {
        if line.trim_start().starts_with("```") {
            match current.take() {
                Some(block) => blocks.push(block),
                None => current = Some(String::new()),
            }
            continue;
        }
        if let Some(block) = current.as_mut() {
            block.push_str(line);
            block.push('\n');
        }
    }
    blocks
}

// ---------------------------------------------------------------------------
// LLM transport
// ---------------------------------------------------------------------------

/// Transport and decoding parameters for the chat endpoint. The API key is
/// read from the environment, never from configuration files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LlmConfig {
    pub model: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub endpoint: String,
    pub timeout_secs: u64,
    pub max_attempts: u32,
    pub api_key_env: String,
    pub retry_backoff_ms: u64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            model: "gpt-4o".to_string(),
            temperature: 1.0,
            max_output_tokens: 1024,
            endpoint: "https://api.openai.com/v1/chat/completions".to_string(),
            timeout_secs: 60,
            max_attempts: 5,
            api_key_env: "OPENAI_API_KEY".to_string(),
            retry_backoff_ms: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// Chat-completions request body, serialized verbatim onto the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

#[derive(Debug, Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Debug, Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Debug, Deserialize)]
struct WireMessage {
    content: String,
}

/// Identifies a single LLM call for transcript matching.
#[derive(Debug, Clone)]
pub struct ChatCall {
    pub description_id: String,
    pub attempt_index: u32,
    pub request: ChatRequest,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("http {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed response: {0}")]
    Protocol(String),
    #[error("replay miss: {0}")]
    ReplayMiss(String),
}

pub trait ChatClient: Send + Sync {
    fn complete(&self, call: &ChatCall) -> Result<String, LlmError>;
}

/// Live HTTP client for an OpenAI-compatible chat-completions endpoint.
/// Transport failures and 5xx responses are retried up to three times with
/// exponential backoff; those retries do not count as correction attempts.
pub struct HttpChatClient {
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
    retry_backoff: Duration,
}

impl HttpChatClient {
    pub fn new(cfg: &LlmConfig) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build();
        HttpChatClient {
            endpoint: cfg.endpoint.clone(),
            api_key: std::env::var(&cfg.api_key_env).ok(),
            agent,
            retry_backoff: Duration::from_millis(cfg.retry_backoff_ms),
        }
    }

    fn attempt(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let mut req = self
            .agent
            .post(&self.endpoint)
            .set("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        let body = serde_json::to_string(request)
            .map_err(|e| LlmError::Protocol(e.to_string()))?;
        match req.send_string(&body) {
            Ok(response) => {
                let text = response
                    .into_string()
                    .map_err(|e| LlmError::Transport(e.to_string()))?;
                let wire: WireResponse = serde_json::from_str(&text)
                    .map_err(|e| LlmError::Protocol(e.to_string()))?;
                wire.choices
                    .into_iter()
                    .next()
                    .map(|c| c.message.content)
                    .ok_or_else(|| LlmError::Protocol("response has no choices".to_string()))
            }
            Err(ureq::Error::Status(status, response)) => Err(LlmError::Http {
                status,
                body: response.into_string().unwrap_or_default(),
            }),
            Err(ureq::Error::Transport(t)) => Err(LlmError::Transport(t.to_string())),
        }
    }
}

impl ChatClient for HttpChatClient {
    fn complete(&self, call: &ChatCall) -> Result<String, LlmError> {
        let mut last = None;
        for retry in 0..3u32 {
            if retry > 0 {
                std::thread::sleep(self.retry_backoff * 2u32.pow(retry - 1));
            }
            match self.attempt(&call.request) {
                Ok(content) => return Ok(content),
                Err(err) => {
                    let retryable = matches!(&err, LlmError::Transport(_))
                        || matches!(&err, LlmError::Http { status, .. } if *status >= 500);
                    last = Some(err);
                    if !retryable {
                        break;
                    }
                }
            }
        }
        Err(last.expect("at least one attempt"))
    }
}

// ---------------------------------------------------------------------------
// Transcripts
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Request,
    Response,
    Error,
}

/// One transcript line: a request is logged before the network call, the
/// response (or transport error) after.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub ts: String,
    pub description_id: String,
    pub attempt: u32,
    pub kind: RecordKind,
    pub payload: serde_json::Value,
}

/// Append-only JSON-lines log; the single serialization point when records
/// are written from parallel workers.
pub struct TranscriptWriter {
    file: Mutex<File>,
}

impl TranscriptWriter {
    pub fn create(path: &Path) -> Result<Self, PipelineError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)?;
        Ok(TranscriptWriter {
            file: Mutex::new(file),
        })
    }

    pub fn append(&self, record: &TranscriptRecord) -> Result<(), PipelineError> {
        let line = serde_json::to_string(record).expect("record serializes");
        let mut file = self.file.lock().expect("transcript lock");
        writeln!(file, "{line}")?;
        Ok(())
    }
}

pub fn load_transcript(path: &Path) -> Result<Vec<TranscriptRecord>, PipelineError> {
    let file = File::open(path)?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| PipelineError::TranscriptFormat {
            line: i + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Offline client that replays recorded responses, matched by
/// `(description_id, attempt_index)`. The stored request must equal the
/// incoming one — a mismatch means the prompts drifted since recording.
pub struct ReplayClient {
    requests: HashMap<(String, u32), ChatRequest>,
    outcomes: HashMap<(String, u32), Result<String, String>>,
    pub verify_requests: bool,
}

impl ReplayClient {
    pub fn from_records(records: &[TranscriptRecord]) -> Result<Self, PipelineError> {
        let mut requests = HashMap::new();
        let mut outcomes = HashMap::new();
        for (i, record) in records.iter().enumerate() {
            let key = (record.description_id.clone(), record.attempt);
            match record.kind {
                RecordKind::Request => {
                    let request: ChatRequest = serde_json::from_value(record.payload.clone())
                        .map_err(|e| PipelineError::TranscriptFormat {
                            line: i + 1,
                            message: e.to_string(),
                        })?;
                    requests.insert(key, request);
                }
                RecordKind::Response => {
                    let content = record
                        .payload
                        .get("content")
                        .and_then(|v| v.as_str())
                        .ok_or_else(|| PipelineError::TranscriptFormat {
                            line: i + 1,
                            message: "response record lacks 'content'".to_string(),
                        })?;
                    outcomes.insert(key, Ok(content.to_string()));
                }
                RecordKind::Error => {
                    let message = record
                        .payload
                        .get("message")
                        .and_then(|v| v.as_str())
                        .unwrap_or("recorded transport error");
                    outcomes.insert(key, Err(message.to_string()));
                }
            }
        }
        Ok(ReplayClient {
            requests,
            outcomes,
            verify_requests: true,
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, PipelineError> {
        Self::from_records(&load_transcript(path)?)
    }
}

impl ChatClient for ReplayClient {
    fn complete(&self, call: &ChatCall) -> Result<String, LlmError> {
        let key = (call.description_id.clone(), call.attempt_index);
        if self.verify_requests {
            if let Some(recorded) = self.requests.get(&key) {
                if *recorded != call.request {
                    return Err(LlmError::ReplayMiss(format!(
                        "request for {} attempt {} differs from the recorded one",
                        call.description_id, call.attempt_index
                    )));
                }
            }
        }
        match self.outcomes.get(&key) {
            Some(Ok(content)) => Ok(content.clone()),
            Some(Err(message)) => Err(LlmError::Transport(message.clone())),
            None => Err(LlmError::ReplayMiss(format!(
                "no recorded response for {} attempt {}",
                call.description_id, call.attempt_index
            ))),
        }
    }
}

// ---------------------------------------------------------------------------
// The formalization loop
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormalizeStatus {
    OkFirstTry,
    OkAfterRepair,
    FailedSyntax,
    LlmError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub prompt: PromptBundle,
    pub raw_response: String,
    pub extracted_code: Option<String>,
    pub report: SyntaxReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormalizationResult {
    pub description_id: String,
    /// Source of the accepted program; present only when it passes the
    /// syntax check under the active strictness.
    pub final_program: Option<String>,
    pub attempts: Vec<AttemptRecord>,
    pub status: FormalizeStatus,
    /// Drives the first-attempt syntactic-accuracy metric.
    pub first_attempt_syntax_ok: bool,
    pub translate_calls: u32,
    pub self_correct_calls: u32,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PipelineOptions {
    /// Promote singleton warnings to errors when validating generated code.
    pub strict: bool,
    /// Re-issue the original translation prompt on the final attempt instead
    /// of another correction round.
    pub fresh_restart: bool,
}

pub struct Pipeline<'c> {
    pub client: &'c dyn ChatClient,
    pub cfg: LlmConfig,
    pub opts: PipelineOptions,
    pub transcript: Option<TranscriptWriter>,
}

impl<'c> Pipeline<'c> {
    pub fn new(client: &'c dyn ChatClient, cfg: LlmConfig) -> Self {
        Pipeline {
            client,
            cfg,
            opts: PipelineOptions::default(),
            transcript: None,
        }
    }

    fn request_for(&self, bundle: &PromptBundle) -> ChatRequest {
        ChatRequest {
            model: self.cfg.model.clone(),
            messages: vec![
                ChatMessage {
                    role: "system".to_string(),
                    content: bundle.system_text.clone(),
                },
                ChatMessage {
                    role: "user".to_string(),
                    content: bundle.user_text.clone(),
                },
            ],
            temperature: self.cfg.temperature,
            max_tokens: self.cfg.max_output_tokens,
        }
    }

    fn log(&self, record: TranscriptRecord) {
        if let Some(writer) = &self.transcript {
            // Transcript writes must not lose a prompt; surface the failure.
            writer.append(&record).expect("transcript append");
        }
    }

    /// Runs the translate/check/self-correct loop for one description.
    pub fn formalize(
        &self,
        description_id: &str,
        target_nl: &str,
        gamma_src: &str,
        example: Option<(&str, &str)>,
    ) -> Result<FormalizationResult, PipelineError> {
        let parse_opts = ParseOptions {
            strict: self.opts.strict,
        };
        let translate = build_prompt(gamma_src, example, target_nl)?;
        let mut attempts: Vec<AttemptRecord> = Vec::new();
        let mut translate_calls = 0u32;
        let mut self_correct_calls = 0u32;
        let mut prompt = translate.clone();
        let mut is_translate = true;

        for attempt_index in 1..=self.cfg.max_attempts {
            if is_translate {
                translate_calls += 1;
            } else {
                self_correct_calls += 1;
            }
            let request = self.request_for(&prompt);
            let call = ChatCall {
                description_id: description_id.to_string(),
                attempt_index,
                request: request.clone(),
            };
            self.log(TranscriptRecord {
                ts: now_rfc3339(),
                description_id: description_id.to_string(),
                attempt: attempt_index,
                kind: RecordKind::Request,
                payload: serde_json::to_value(&request).expect("request serializes"),
            });
            let content = match self.client.complete(&call) {
                Ok(content) => content,
                Err(err) => {
                    self.log(TranscriptRecord {
                        ts: now_rfc3339(),
                        description_id: description_id.to_string(),
                        attempt: attempt_index,
                        kind: RecordKind::Error,
                        payload: serde_json::json!({ "message": err.to_string() }),
                    });
                    return Ok(FormalizationResult {
                        description_id: description_id.to_string(),
                        final_program: None,
                        attempts,
                        status: FormalizeStatus::LlmError,
                        first_attempt_syntax_ok: false,
                        translate_calls,
                        self_correct_calls,
                    });
                }
            };
            self.log(TranscriptRecord {
                ts: now_rfc3339(),
                description_id: description_id.to_string(),
                attempt: attempt_index,
                kind: RecordKind::Response,
                payload: serde_json::json!({ "content": content }),
            });

            let extracted = extract_code(&content);
            let report = match &extracted {
                Ok(code) => check_syntax_with(code, &parse_opts),
                Err(e) => SyntaxReport {
                    errors: vec![crate::parser::SyntaxError {
                        message: e.to_string(),
                        span: crate::term::Span::new(1, 1, 0, 0),
                    }],
                    warnings: Vec::new(),
                },
            };
            let record = AttemptRecord {
                prompt: prompt.clone(),
                raw_response: content.clone(),
                extracted_code: extracted.as_ref().ok().cloned(),
                report: report.clone(),
            };
            attempts.push(record);

            if report.ok() {
                let code = extracted.expect("ok report implies extracted code");
                let status = if attempt_index == 1 {
                    FormalizeStatus::OkFirstTry
                } else {
                    FormalizeStatus::OkAfterRepair
                };
                let first_attempt_syntax_ok = attempts[0].report.ok();
                return Ok(FormalizationResult {
                    description_id: description_id.to_string(),
                    final_program: Some(code),
                    attempts,
                    status,
                    first_attempt_syntax_ok,
                    translate_calls,
                    self_correct_calls,
                });
            }

            if attempt_index < self.cfg.max_attempts {
                let final_round = attempt_index + 1 == self.cfg.max_attempts;
                if self.opts.fresh_restart && final_round {
                    prompt = translate.clone();
                    is_translate = true;
                } else {
                    let previous_code = extracted.as_deref().unwrap_or(&content);
                    prompt = repair_prompt(previous_code, &report);
                    is_translate = false;
                }
            }
        }

        let first_attempt_syntax_ok = attempts.first().is_some_and(|a| a.report.ok());
        Ok(FormalizationResult {
            description_id: description_id.to_string(),
            final_program: None,
            attempts,
            status: FormalizeStatus::FailedSyntax,
            first_attempt_syntax_ok,
            translate_calls,
            self_correct_calls,
        })
    }
}
