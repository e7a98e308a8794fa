//! Description corpus: the JSON-lines manifest schema, ingestion, and
//! access to the gold programs shipped next to it.
//!
//! A record pairs a natural-language scenario with its declared game class.
//! Records carrying a non-empty `notes` field are excluded from semantic
//! scoring (the mechanism for dropping incomplete or ambiguous scenarios
//! from the denominator). Gold programs live as sibling `<id>.pl` files.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::games::GameClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Style {
    /// The typical metaphor for the game.
    Standard,
    /// A newly invented scenario modelled by the game.
    NonStandard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayoffStyle {
    Numerical,
    NonNumerical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptionRecord {
    pub id: String,
    pub game_class: GameClass,
    pub style: Style,
    pub payoffs: PayoffStyle,
    pub text: String,
    /// Non-empty notes exclude the record from semantic scoring.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

impl DescriptionRecord {
    pub fn excluded(&self) -> bool {
        self.notes.as_deref().is_some_and(|n| !n.is_empty())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub records: Vec<DescriptionRecord>,
    /// Directory the manifest was loaded from; gold programs resolve here.
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CellCounts {
    pub standard_numerical: usize,
    pub standard_non_numerical: usize,
    pub non_standard_numerical: usize,
    pub non_standard_non_numerical: usize,
}

impl CellCounts {
    pub fn get(&self, style: Style, payoffs: PayoffStyle) -> usize {
        match (style, payoffs) {
            (Style::Standard, PayoffStyle::Numerical) => self.standard_numerical,
            (Style::Standard, PayoffStyle::NonNumerical) => self.standard_non_numerical,
            (Style::NonStandard, PayoffStyle::Numerical) => self.non_standard_numerical,
            (Style::NonStandard, PayoffStyle::NonNumerical) => self.non_standard_non_numerical,
        }
    }

    pub fn total(&self) -> usize {
        self.standard_numerical
            + self.standard_non_numerical
            + self.non_standard_numerical
            + self.non_standard_non_numerical
    }
}

impl Manifest {
    /// Counts per (style, payoffs) cell, always computed from the records.
    pub fn counts(&self) -> CellCounts {
        let mut counts = CellCounts::default();
        for record in &self.records {
            match (record.style, record.payoffs) {
                (Style::Standard, PayoffStyle::Numerical) => counts.standard_numerical += 1,
                (Style::Standard, PayoffStyle::NonNumerical) => {
                    counts.standard_non_numerical += 1
                }
                (Style::NonStandard, PayoffStyle::Numerical) => {
                    counts.non_standard_numerical += 1
                }
                (Style::NonStandard, PayoffStyle::NonNumerical) => {
                    counts.non_standard_non_numerical += 1
                }
            }
        }
        counts
    }

    /// True iff the manifest has the full benchmark layout: 5 standard and
    /// 50 non-standard descriptions per payoff variant (110 in total).
    pub fn has_full_dataset_shape(&self) -> bool {
        self.counts()
            == CellCounts {
                standard_numerical: 5,
                standard_non_numerical: 5,
                non_standard_numerical: 50,
                non_standard_non_numerical: 50,
            }
    }

    pub fn get(&self, id: &str) -> Option<&DescriptionRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    /// Path of the gold program for a record: `<manifest dir>/<id>.pl`.
    pub fn gold_path(&self, id: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{id}.pl")))
    }

    pub fn load_gold(&self, id: &str) -> Result<String, std::io::Error> {
        let path = self.gold_path(id).ok_or_else(|| {
            std::io::Error::new(
                std::io::ErrorKind::NotFound,
                "manifest has no directory to resolve gold programs",
            )
        })?;
        fs::read_to_string(path)
    }
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate id '{id}'")]
    DuplicateId { id: String, line: usize },
    #[error("line {line}: record '{id}' has an empty description text")]
    EmptyText { id: String, line: usize },
}

/// Loads a JSON-lines manifest, rejecting duplicate ids and empty texts.
pub fn load_manifest(path: &Path) -> Result<Manifest, ManifestError> {
    let text = fs::read_to_string(path)?;
    let mut records = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: DescriptionRecord =
            serde_json::from_str(line).map_err(|e| ManifestError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        if record.text.trim().is_empty() {
            return Err(ManifestError::EmptyText {
                id: record.id,
                line: i + 1,
            });
        }
        if !seen.insert(record.id.clone()) {
            return Err(ManifestError::DuplicateId {
                id: record.id,
                line: i + 1,
            });
        }
        records.push(record);
    }
    Ok(Manifest {
        records,
        dir: path.parent().map(Path::to_path_buf),
    })
}

/// Writes the manifest back as JSON lines with canonical field order, so
/// save-after-load is byte-stable.
pub fn save_manifest(manifest: &Manifest, path: &Path) -> Result<(), ManifestError> {
    let mut out = String::new();
    for record in &manifest.records {
        out.push_str(&serde_json::to_string(record).expect("record serializes"));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Directory of the seed corpus shipped with the crate.
pub fn seed_corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join("corpus")
}

pub fn seed_manifest_path() -> PathBuf {
    seed_corpus_dir().join("manifest.jsonl")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::{check_semantics, ClassifyConfig};
    use crate::engine::EngineLimits;
    use std::io::Write;

    fn record(id: &str, style: Style, payoffs: PayoffStyle) -> DescriptionRecord {
        DescriptionRecord {
            id: id.to_string(),
            game_class: GameClass::PrisonersDilemma,
            style,
            payoffs,
            text: "some scenario".to_string(),
            notes: None,
        }
    }

    #[test]
    fn seed_manifest_covers_all_classes_and_styles() {
        let manifest = load_manifest(&seed_manifest_path()).unwrap();
        assert!(manifest.records.len() >= 12);
        for class in GameClass::CLASSIC {
            for payoffs in [PayoffStyle::Numerical, PayoffStyle::NonNumerical] {
                assert!(
                    manifest.records.iter().any(|r| r.game_class == class
                        && r.style == Style::Standard
                        && r.payoffs == payoffs),
                    "missing standard/{payoffs:?} description for {class}"
                );
            }
        }
        for class in [GameClass::SequentialPd, GameClass::RockPaperScissors] {
            assert!(manifest.records.iter().any(|r| r.game_class == class));
        }
        // The seed is a subset, not the full benchmark.
        assert!(!manifest.has_full_dataset_shape());
    }

    #[test]
    fn gold_programs_anchor_the_grader() {
        let manifest = load_manifest(&seed_manifest_path()).unwrap();
        let limits = EngineLimits::default();
        let config = ClassifyConfig::default();
        for record in &manifest.records {
            let source = manifest.load_gold(&record.id).unwrap_or_else(|_| {
                panic!("missing gold program for {}", record.id)
            });
            let (program, report) = crate::parser::parse_program(&source);
            assert!(report.ok(), "{}: {:?}", record.id, report.errors);
            let verdict = check_semantics(&program, record.game_class, limits, &config);
            assert!(
                verdict.ok,
                "{}: gold program fails semantics: {:?}",
                record.id, verdict.defects
            );
        }
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        let record = record("dup", Style::Standard, PayoffStyle::Numerical);
        let line = serde_json::to_string(&record).unwrap();
        writeln!(file, "{line}").unwrap();
        writeln!(file, "{line}").unwrap();
        let err = load_manifest(file.path()).unwrap_err();
        assert!(matches!(err, ManifestError::DuplicateId { ref id, line: 2 } if id == "dup"));
    }

    #[test]
    fn empty_file_is_an_empty_manifest() {
        let file = tempfile::NamedTempFile::new().unwrap();
        let manifest = load_manifest(file.path()).unwrap();
        assert!(manifest.records.is_empty());
        assert_eq!(manifest.counts().total(), 0);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "{}", serde_json::to_string(&record("a", Style::Standard, PayoffStyle::Numerical)).unwrap()).unwrap();
        writeln!(file, "{{not json").unwrap();
        let err = load_manifest(file.path()).unwrap_err();
        assert!(matches!(err, ManifestError::Parse { line: 2, .. }));
    }

    #[test]
    fn full_dataset_shape_check() {
        let mut manifest = Manifest::default();
        for i in 0..5 {
            manifest.records.push(record(&format!("sn{i}"), Style::Standard, PayoffStyle::Numerical));
            manifest.records.push(record(&format!("sx{i}"), Style::Standard, PayoffStyle::NonNumerical));
        }
        for i in 0..50 {
            manifest.records.push(record(&format!("nn{i}"), Style::NonStandard, PayoffStyle::Numerical));
            manifest.records.push(record(&format!("nx{i}"), Style::NonStandard, PayoffStyle::NonNumerical));
        }
        assert!(manifest.has_full_dataset_shape());
        // 110 records in the wrong cells is not the benchmark shape.
        let mut wrong = Manifest::default();
        for i in 0..110 {
            wrong.records.push(record(&format!("r{i}"), Style::NonStandard, PayoffStyle::Numerical));
        }
        assert!(!wrong.has_full_dataset_shape());
    }

    #[test]
    fn save_load_round_trip_is_byte_stable() {
        let manifest = load_manifest(&seed_manifest_path()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let first = dir.path().join("m1.jsonl");
        let second = dir.path().join("m2.jsonl");
        save_manifest(&manifest, &first).unwrap();
        let reloaded = load_manifest(&first).unwrap();
        assert_eq!(manifest.records, reloaded.records);
        save_manifest(&reloaded, &second).unwrap();
        assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());
    }
}
