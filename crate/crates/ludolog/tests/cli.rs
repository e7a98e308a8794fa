//! End-to-end tests driving the built binary.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use ludolog::pipeline::{RecordKind, TranscriptRecord};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ludolog"))
}

fn fixture(path: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(path)
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).unwrap()
}

#[test]
fn parse_valid_program() {
    let output = bin()
        .args(["parse"])
        .arg(fixture("games/prisoners_dilemma.pl"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
    assert_eq!(report["ok"], serde_json::json!(true));
    assert!(output.stderr.is_empty(), "stderr must stay clean on success");
}

#[test]
fn parse_broken_program_exits_nonzero() {
    let output = bin()
        .args(["parse"])
        .arg(fixture("defects/comment_delimiter.pl"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
    assert_eq!(report["ok"], serde_json::json!(false));
    assert!(stdout_of(&output).contains("unsupported comment delimiter"));
}

#[test]
fn parse_strict_promotes_singletons() {
    let file = fixture("defects/singleton.pl");
    let relaxed = bin().args(["parse"]).arg(&file).output().unwrap();
    assert_eq!(relaxed.status.code(), Some(0));
    let strict = bin()
        .args(["parse", "--strict"])
        .arg(&file)
        .output()
        .unwrap();
    assert_eq!(strict.status.code(), Some(1));
}

#[test]
fn solve_reference_query_byte_format() {
    let output = bin()
        .args(["solve"])
        .arg(fixture("games/prisoners_dilemma.pl"))
        .args(["--query", "game(s0,F), finally(goal(p1,100),F)"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    assert_eq!(
        stdout_of(&output),
        "F=do(choice(p2,'C'),do(choice(p1,'D'),s0)) ;\n\
         F=do(choice(p1,'D'),do(choice(p2,'C'),s0)) ;\n\
         false.\n"
    );
}

#[test]
fn solve_reads_queries_from_stdin() {
    let mut child = bin()
        .args(["solve"])
        .arg(fixture("games/prisoners_dilemma.pl"))
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .as_mut()
        .unwrap()
        .write_all(b"?- holds(control(p1), s0).\n?- holds(control(p1), do(choice(p1,'C'), s0)).\nhalt.\n")
        .unwrap();
    let output = child.wait_with_output().unwrap();
    assert_eq!(output.status.code(), Some(0));
    assert_eq!(stdout_of(&output), "true ;\nfalse.\nfalse.\n");
}

#[test]
fn classify_reports_the_class() {
    let output = bin()
        .args(["classify"])
        .arg(fixture("games/stag_hunt.pl"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
    assert_eq!(json["classes"], serde_json::json!(["stag_hunt"]));
}

#[test]
fn classify_expect_fails_on_defective_program() {
    let output = bin()
        .args(["classify"])
        .arg(fixture("defects/bos_swapped.pl"))
        .args(["--expect", "battle_of_sexes"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let verdict: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
    assert_eq!(verdict["ok"], serde_json::json!(false));
    assert_eq!(verdict["expected"], serde_json::json!("battle_of_sexes"));
    assert!(!verdict["defects"].as_array().unwrap().is_empty());
}

#[test]
fn outcomes_enumerates_plays() {
    let output = bin()
        .args(["outcomes"])
        .arg(fixture("games/sequential_pd.pl"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let rows: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 4);
}

#[test]
fn outcomes_reports_missing_payoff_lookup() {
    let output = bin()
        .args(["outcomes"])
        .arg(fixture("defects/payoff_single_constant.pl"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let json: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
    assert!(json["error"].as_str().unwrap().contains("no outcomes"));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let output = bin().args(["frobnicate"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

// ---------------------------------------------------------------------------
// Pipeline subcommands against a recorded transcript.
// ---------------------------------------------------------------------------

fn fenced(source: &str) -> String {
    format!("```\n{source}```\n")
}

fn write_transcript(path: &Path, records: &[TranscriptRecord]) {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record).unwrap());
        out.push('\n');
    }
    std::fs::write(path, out).unwrap();
}

fn response_record(id: &str, attempt: u32, content: &str) -> TranscriptRecord {
    TranscriptRecord {
        ts: "2026-01-01T00:00:00Z".to_string(),
        description_id: id.to_string(),
        attempt,
        kind: RecordKind::Response,
        payload: serde_json::json!({ "content": content }),
    }
}

/// Replay responses for every seed-corpus record: each one answers with its
/// own gold program.
fn seed_replay_transcript(dir: &Path) -> PathBuf {
    let manifest = ludolog::corpus::load_manifest(&ludolog::corpus::seed_manifest_path()).unwrap();
    let records: Vec<TranscriptRecord> = manifest
        .records
        .iter()
        .map(|record| {
            let gold = manifest.load_gold(&record.id).unwrap();
            response_record(&record.id, 1, &fenced(&gold))
        })
        .collect();
    let path = dir.join("seed_replay.jsonl");
    write_transcript(&path, &records);
    path
}

#[test]
fn eval_replay_over_the_seed_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let transcript = seed_replay_transcript(dir.path());
    let report_path = dir.path().join("report.json");
    let markdown_path = dir.path().join("report.md");
    let output = bin()
        .args(["eval", "--manifest"])
        .arg(ludolog::corpus::seed_manifest_path())
        .args(["--replay"])
        .arg(&transcript)
        .args(["--out"])
        .arg(&report_path)
        .args(["--markdown"])
        .arg(&markdown_path)
        .args(["--workers", "2"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{}", String::from_utf8_lossy(&output.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
    // Every gold program is first-try valid and semantically correct.
    assert_eq!(report["overall_syntactic"]["numerator"], serde_json::json!(22));
    assert_eq!(report["overall_syntactic"]["denominator"], serde_json::json!(22));
    let markdown = std::fs::read_to_string(&markdown_path).unwrap();
    assert!(markdown.contains("| Numerical |"));
    let on_disk: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report, on_disk);
}

#[test]
fn formalize_single_record_from_replay() {
    let dir = tempfile::tempdir().unwrap();
    let transcript = seed_replay_transcript(dir.path());
    let output = bin()
        .args(["formalize", "--manifest"])
        .arg(ludolog::corpus::seed_manifest_path())
        .args(["--id", "hd_std_num", "--replay"])
        .arg(&transcript)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{}", String::from_utf8_lossy(&output.stderr));
    let result: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
    assert_eq!(result["status"], serde_json::json!("ok_first_try"));
    assert_eq!(result["first_attempt_syntax_ok"], serde_json::json!(true));
}

#[test]
fn formalize_exit_code_reflects_failure() {
    let dir = tempfile::tempdir().unwrap();
    let records: Vec<TranscriptRecord> = (1..=5)
        .map(|attempt| response_record("pd_std_num", attempt, "```\n// broken\nfoo.\n```\n"))
        .collect();
    let transcript = dir.path().join("broken.jsonl");
    write_transcript(&transcript, &records);
    let output = bin()
        .args(["formalize", "--manifest"])
        .arg(ludolog::corpus::seed_manifest_path())
        .args(["--id", "pd_std_num", "--replay"])
        .arg(&transcript)
        .args(["--mode", "zero_shot"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let result: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
    assert_eq!(result["status"], serde_json::json!("failed_syntax"));
    assert_eq!(result["attempts"].as_array().unwrap().len(), 5);
}

#[test]
fn replay_subcommand_reports_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let transcript = seed_replay_transcript(dir.path());
    let output = bin()
        .args(["replay", "--manifest"])
        .arg(ludolog::corpus::seed_manifest_path())
        .args(["--transcript"])
        .arg(&transcript)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{}", String::from_utf8_lossy(&output.stderr));
    let rows: serde_json::Value = serde_json::from_str(&stdout_of(&output)).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 22);
    for row in rows.as_array().unwrap() {
        assert_eq!(row["status"], serde_json::json!("ok_first_try"));
    }
}

#[test]
fn transcript_recording_logs_prompts_before_responses() {
    let dir = tempfile::tempdir().unwrap();
    let replay_in = seed_replay_transcript(dir.path());
    let log_out = dir.path().join("log.jsonl");
    let output = bin()
        .args(["formalize", "--manifest"])
        .arg(ludolog::corpus::seed_manifest_path())
        .args(["--id", "sh_std_num", "--replay"])
        .arg(&replay_in)
        .args(["--record"])
        .arg(&log_out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let log = ludolog::pipeline::load_transcript(&log_out).unwrap();
    assert_eq!(log.len(), 2);
    assert_eq!(log[0].kind, RecordKind::Request);
    assert_eq!(log[1].kind, RecordKind::Response);
    // The stored request is the verbatim prompt that was sent.
    assert!(log[0].payload["messages"][1]["content"]
        .as_str()
        .unwrap()
        .contains("game-independent rules"));
}
