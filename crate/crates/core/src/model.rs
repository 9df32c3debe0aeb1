//! Case records and the other value types shared by every pipeline stage,
//! plus their JSONL persistence.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Why a model cannot answer a case.
///
/// The declaration order is the serialization order: document, ambiguity,
/// capability. The action letters of the judging prompt map onto it as
/// A, B and C.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UncertaintySource {
    Document,
    Ambiguity,
    Capability,
}

impl UncertaintySource {
    pub const ALL: [UncertaintySource; 3] = [
        UncertaintySource::Document,
        UncertaintySource::Ambiguity,
        UncertaintySource::Capability,
    ];

    pub fn letter(self) -> char {
        match self {
            UncertaintySource::Document => 'A',
            UncertaintySource::Ambiguity => 'B',
            UncertaintySource::Capability => 'C',
        }
    }

    pub fn from_letter(letter: char) -> Option<Self> {
        match letter {
            'A' => Some(UncertaintySource::Document),
            'B' => Some(UncertaintySource::Ambiguity),
            'C' => Some(UncertaintySource::Capability),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            UncertaintySource::Document => "document",
            UncertaintySource::Ambiguity => "ambiguity",
            UncertaintySource::Capability => "capability",
        }
    }
}

impl fmt::Display for UncertaintySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Source dataset of a case. Names outside the known five are kept verbatim
/// under `Custom`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dataset {
    HotpotQA,
    AmbigQA,
    TechQA,
    ExpertQA,
    ToolBench,
    Custom(String),
}

impl Dataset {
    /// Known names map to their variant, anything else to `Custom`.
    pub fn from_name(name: &str) -> Self {
        name.parse().unwrap_or_else(|never| match never {})
    }

    pub fn name(&self) -> &str {
        match self {
            Dataset::HotpotQA => "HotpotQA",
            Dataset::AmbigQA => "AmbigQA",
            Dataset::TechQA => "TechQA",
            Dataset::ExpertQA => "ExpertQA",
            Dataset::ToolBench => "ToolBench",
            Dataset::Custom(name) => name,
        }
    }

    /// Short-answer QA datasets are judged for binary correctness; the rest
    /// are graded on usefulness.
    pub fn is_short_answer(&self) -> bool {
        matches!(self, Dataset::HotpotQA | Dataset::AmbigQA)
    }

    /// Answer length budget used by the answering prompt.
    pub fn answer_token_budget(&self) -> u32 {
        if self.is_short_answer() {
            50
        } else {
            500
        }
    }
}

impl FromStr for Dataset {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "HotpotQA" => Dataset::HotpotQA,
            "AmbigQA" => Dataset::AmbigQA,
            "TechQA" => Dataset::TechQA,
            "ExpertQA" => Dataset::ExpertQA,
            "ToolBench" => Dataset::ToolBench,
            other => Dataset::Custom(other.to_string()),
        })
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for Dataset {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Dataset {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let name = String::deserialize(deserializer)?;
        Ok(name.parse().unwrap_or_else(|never| match never {}))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Benchmark,
    #[default]
    Training,
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "benchmark" => Ok(Split::Benchmark),
            "training" => Ok(Split::Training),
            other => Err(Error::Parameter(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub body: String,
    pub is_gold: bool,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, title: impl Into<String>, body: impl Into<String>, is_gold: bool) -> Self {
        Document {
            doc_id: doc_id.into(),
            title: title.into(),
            body: body.into(),
            is_gold,
        }
    }
}

/// One benchmark item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub id: String,
    pub dataset: Dataset,
    pub original_query: String,
    pub actual_query: String,
    pub gold_documents: Vec<Document>,
    pub actual_documents: Vec<Document>,
    pub clarification: Option<String>,
    pub gold_answer: String,
    pub gold_inquiry: Option<String>,
    pub label: Option<UncertaintySource>,
    pub split: Split,
}

impl Case {
    /// Gold documents whose ids do not occur among the actual documents.
    pub fn missing_gold_documents(&self) -> Vec<&Document> {
        let present: HashSet<&str> = self.actual_documents.iter().map(|d| d.doc_id.as_str()).collect();
        self.gold_documents
            .iter()
            .filter(|d| !present.contains(d.doc_id.as_str()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Prompt,
    Inquiry,
    Answer,
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "prompt" => Ok(Strategy::Prompt),
            "inquiry" => Ok(Strategy::Inquiry),
            "answer" => Ok(Strategy::Answer),
            other => Err(Error::Parameter(format!("unknown strategy `{other}`"))),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Prompt => "prompt",
            Strategy::Inquiry => "inquiry",
            Strategy::Answer => "answer",
        })
    }
}

/// A predicted uncertainty source with everything that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Judgment {
    pub case_id: String,
    pub strategy: Strategy,
    pub predicted: UncertaintySource,
    pub samples: Vec<UncertaintySource>,
    pub inquiry: Option<String>,
    #[serde(default)]
    pub inquiry_answers: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Retrieval,
    User,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub channel: Channel,
    pub inquiry: String,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionTranscript {
    pub case_id: String,
    pub turns: Vec<Turn>,
    pub final_answer: String,
}

impl InteractionTranscript {
    pub fn channel(&self) -> Channel {
        self.turns.first().map(|t| t.channel).unwrap_or(Channel::None)
    }
}

/// Checks every per-label invariant of a case. Never fails; an empty list
/// means the case is well formed.
pub fn validate_case(case: &Case) -> Vec<String> {
    let mut violations = Vec::new();
    if case.id.trim().is_empty() {
        violations.push("id must be non-empty".to_string());
    }
    for doc in case.gold_documents.iter().chain(&case.actual_documents) {
        if doc.body.trim().is_empty() {
            violations.push(format!("document `{}` has an empty body", doc.doc_id));
        }
    }
    match case.label {
        Some(UncertaintySource::Ambiguity) => {
            if case.clarification.as_deref().map_or(true, |c| c.trim().is_empty()) {
                violations.push("Ambiguity requires clarification".to_string());
            }
            if case.original_query == case.actual_query {
                violations.push("Ambiguity requires actual_query != original_query".to_string());
            }
        }
        Some(UncertaintySource::Document) => {
            if case.missing_gold_documents().is_empty() {
                violations.push(
                    "Document requires at least one gold_documents entry missing from actual_documents".to_string(),
                );
            }
        }
        Some(UncertaintySource::Capability) => {
            if case.actual_query != case.original_query {
                violations.push("Capability requires actual_query = original_query".to_string());
            }
            if case.actual_documents != case.gold_documents {
                violations.push("Capability requires actual_documents = gold_documents".to_string());
            }
        }
        None => {}
    }
    violations
}

/// Reads newline-delimited JSON records. Blank lines are skipped; a record
/// that fails to parse reports its 1-based line number.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| Error::Record {
            line: idx + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for record in records {
        let line = serde_json::to_string(record).map_err(|e| Error::Parameter(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads a case file, rejecting duplicate ids.
pub fn read_cases(path: &Path) -> Result<Vec<Case>> {
    let cases: Vec<Case> = read_jsonl(path)?;
    ensure_unique(cases.iter().map(|c| c.id.as_str()))?;
    Ok(cases)
}

pub fn write_cases(path: &Path, cases: &[Case]) -> Result<()> {
    ensure_unique(cases.iter().map(|c| c.id.as_str()))?;
    write_jsonl(path, cases)
}

pub fn read_documents(path: &Path) -> Result<Vec<Document>> {
    read_jsonl(path)
}

pub(crate) fn ensure_unique<'a>(ids: impl IntoIterator<Item = &'a str>) -> Result<()> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::DuplicateId(id.to_string()));
        }
    }
    Ok(())
}
