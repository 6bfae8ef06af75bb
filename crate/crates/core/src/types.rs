//! Domain vocabulary shared by every stage: criteria, languages, and the three
//! record types that flow through the JSONL files.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};
use thiserror::Error;

/// Errors raised while parsing or validating a single record.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RecordError {
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
}

/// The five code quality dimensions a preference can be about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Criterion {
    /// Functional correctness.
    FC,
    /// Execution (runtime) efficiency.
    EE,
    /// Memory efficiency.
    ME,
    /// Readability and maintainability.
    RM,
    /// Security hardness.
    SH,
}

impl Criterion {
    pub const ALL: [Criterion; 5] = [
        Criterion::FC,
        Criterion::EE,
        Criterion::ME,
        Criterion::RM,
        Criterion::SH,
    ];

    /// Short tag used on disk.
    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::FC => "FC",
            Criterion::EE => "EE",
            Criterion::ME => "ME",
            Criterion::RM => "RM",
            Criterion::SH => "SH",
        }
    }

    /// Long snake_case name, accepted on input as an alias of the tag.
    pub fn name(self) -> &'static str {
        match self {
            Criterion::FC => "functional_correctness",
            Criterion::EE => "execution_efficiency",
            Criterion::ME => "memory_efficiency",
            Criterion::RM => "readability_maintainability",
            Criterion::SH => "security_hardness",
        }
    }

    /// Human readable label, as used in judge prompts and report headers.
    pub fn label(self) -> &'static str {
        match self {
            Criterion::FC => "Functional Correctness",
            Criterion::EE => "Execution Efficiency",
            Criterion::ME => "Memory Efficiency",
            Criterion::RM => "Readability And Maintainability",
            Criterion::SH => "Security Hardness",
        }
    }

    /// Column header in report tables.
    pub fn column(self) -> &'static str {
        match self {
            Criterion::RM => "R&M",
            other => other.as_str(),
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Criterion {
    type Err = RecordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        for c in Criterion::ALL {
            if s == c.as_str() || s == c.name() {
                return Ok(c);
            }
        }
        if s == "R&M" {
            return Ok(Criterion::RM);
        }
        Err(RecordError::InvariantViolation(format!("unknown criterion {s:?}")))
    }
}

impl Serialize for Criterion {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Criterion {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The eight programming languages covered by the benchmark and training data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Language {
    C,
    CSharp,
    Cpp,
    Go,
    Java,
    JavaScript,
    Python,
    Ruby,
}

impl Language {
    pub const ALL: [Language; 8] = [
        Language::C,
        Language::CSharp,
        Language::Cpp,
        Language::Go,
        Language::Java,
        Language::JavaScript,
        Language::Python,
        Language::Ruby,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Language::C => "C",
            Language::CSharp => "C#",
            Language::Cpp => "C++",
            Language::Go => "Go",
            Language::Java => "Java",
            Language::JavaScript => "JavaScript",
            Language::Python => "Python",
            Language::Ruby => "Ruby",
        }
    }

    fn aliases(self) -> &'static [&'static str] {
        match self {
            Language::C => &["c"],
            Language::CSharp => &["csharp", "c#"],
            Language::Cpp => &["cpp", "c++"],
            Language::Go => &["go", "golang"],
            Language::Java => &["java"],
            Language::JavaScript => &["javascript", "js"],
            Language::Python => &["python"],
            Language::Ruby => &["ruby"],
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Language {
    type Err = RecordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        for lang in Language::ALL {
            if s == lang.as_str() || lang.aliases().contains(&s) {
                return Ok(lang);
            }
        }
        Err(RecordError::InvariantViolation(format!("unknown language {s:?}")))
    }
}

impl Serialize for Language {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Language {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Eval,
}

/// One `(criteria prompt, task prompt, chosen, rejected)` preference tuple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub id: String,
    #[serde(default)]
    pub criteria_prompt: Option<String>,
    pub task_prompt: String,
    pub chosen: String,
    pub rejected: String,
    pub criterion: Criterion,
    pub language: Language,
    pub subset: String,
    pub split: Split,
    /// Fields we do not model are carried through untouched.
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl PreferencePair {
    pub const REQUIRED: &'static [&'static str] = &[
        "id",
        "task_prompt",
        "chosen",
        "rejected",
        "criterion",
        "language",
        "subset",
        "split",
    ];

    pub fn validate(&self) -> Result<(), RecordError> {
        if self.id.is_empty() {
            return Err(RecordError::InvariantViolation("empty id".into()));
        }
        if self.task_prompt.is_empty() {
            return Err(RecordError::InvariantViolation("empty task_prompt".into()));
        }
        if self.chosen == self.rejected {
            return Err(RecordError::InvariantViolation("chosen equals rejected".into()));
        }
        Ok(())
    }

    /// String metadata field from the passthrough map.
    pub fn extra_str(&self, key: &str) -> Option<&str> {
        self.extra.get(key).and_then(Value::as_str)
    }
}

/// A mined single-file commit together with the repository metadata the
/// mining gates look at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub commit_sha: String,
    pub repo: String,
    pub license: String,
    pub language: Language,
    pub message: String,
    pub old_file: String,
    pub new_file: String,
    pub authored_at: DateTime<Utc>,
    pub stars: i64,
    pub contributors: i64,
    pub issues: i64,
    pub merged_pr: bool,
    pub reverted: bool,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl CommitRecord {
    pub const REQUIRED: &'static [&'static str] = &[
        "commit_sha",
        "repo",
        "license",
        "language",
        "message",
        "old_file",
        "new_file",
        "authored_at",
        "stars",
        "contributors",
        "issues",
        "merged_pr",
        "reverted",
    ];

    pub fn validate(&self) -> Result<(), RecordError> {
        if self.old_file == self.new_file {
            return Err(RecordError::InvariantViolation("old_file equals new_file".into()));
        }
        for (name, v) in [
            ("stars", self.stars),
            ("contributors", self.contributors),
            ("issues", self.issues),
        ] {
            if v < 0 {
                return Err(RecordError::InvariantViolation(format!("negative {name}")));
            }
        }
        Ok(())
    }
}

/// One candidate solution in a re-ranking list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub problem_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_id: Option<String>,
    pub solution: String,
    pub rm_score: f64,
    pub ground_truth_pass_fraction: f64,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl RankedCandidate {
    pub const REQUIRED: &'static [&'static str] =
        &["problem_id", "solution", "rm_score", "ground_truth_pass_fraction"];

    pub fn validate(&self) -> Result<(), RecordError> {
        if !self.rm_score.is_finite() {
            return Err(RecordError::InvariantViolation("rm_score is not finite".into()));
        }
        let f = self.ground_truth_pass_fraction;
        if !(0.0..=1.0).contains(&f) {
            return Err(RecordError::InvariantViolation(
                "ground_truth_pass_fraction outside [0, 1]".into(),
            ));
        }
        Ok(())
    }

    pub fn fully_correct(&self) -> bool {
        self.ground_truth_pass_fraction == 1.0
    }
}

/// Any record that can appear in a data file.
#[derive(Debug, Clone, PartialEq)]
pub enum Record {
    Pair(PreferencePair),
    Commit(CommitRecord),
    Candidate(RankedCandidate),
}

/// A record type that can be parsed from one JSONL line.
pub trait JsonRecord: Serialize + Sized {
    const REQUIRED: &'static [&'static str];
    fn from_object(obj: Map<String, Value>) -> Result<Self, RecordError>;
}

fn typed<T: serde::de::DeserializeOwned>(obj: Map<String, Value>) -> Result<T, RecordError> {
    serde_json::from_value(Value::Object(obj))
        .map_err(|e| RecordError::InvariantViolation(e.to_string()))
}

fn check_required(obj: &Map<String, Value>, required: &[&str]) -> Result<(), RecordError> {
    for name in required {
        match obj.get(*name) {
            None | Some(Value::Null) => return Err(RecordError::MissingField((*name).to_string())),
            Some(_) => {}
        }
    }
    Ok(())
}

// Closed enums are checked before serde sees them so the message stays stable.
fn check_enum_fields(obj: &Map<String, Value>) -> Result<(), RecordError> {
    if let Some(Value::String(s)) = obj.get("language") {
        if s.parse::<Language>().is_err() {
            return Err(RecordError::InvariantViolation("unknown language".into()));
        }
    }
    if let Some(Value::String(s)) = obj.get("criterion") {
        if s.parse::<Criterion>().is_err() {
            return Err(RecordError::InvariantViolation("unknown criterion".into()));
        }
    }
    Ok(())
}

impl JsonRecord for PreferencePair {
    const REQUIRED: &'static [&'static str] = PreferencePair::REQUIRED;
    fn from_object(obj: Map<String, Value>) -> Result<Self, RecordError> {
        check_required(&obj, Self::REQUIRED)?;
        check_enum_fields(&obj)?;
        let pair: PreferencePair = typed(obj)?;
        pair.validate()?;
        Ok(pair)
    }
}

impl JsonRecord for CommitRecord {
    const REQUIRED: &'static [&'static str] = CommitRecord::REQUIRED;
    fn from_object(obj: Map<String, Value>) -> Result<Self, RecordError> {
        check_required(&obj, Self::REQUIRED)?;
        check_enum_fields(&obj)?;
        let rec: CommitRecord = typed(obj)?;
        rec.validate()?;
        Ok(rec)
    }
}

impl JsonRecord for RankedCandidate {
    const REQUIRED: &'static [&'static str] = RankedCandidate::REQUIRED;
    fn from_object(obj: Map<String, Value>) -> Result<Self, RecordError> {
        check_required(&obj, Self::REQUIRED)?;
        let cand: RankedCandidate = typed(obj)?;
        cand.validate()?;
        Ok(cand)
    }
}

fn object_of(line: &str) -> Result<Map<String, Value>, RecordError> {
    match serde_json::from_str::<Value>(line) {
        Ok(Value::Object(obj)) => Ok(obj),
        Ok(_) => Err(RecordError::MalformedJson("expected a JSON object".into())),
        Err(e) => Err(RecordError::MalformedJson(e.to_string())),
    }
}

/// Parse one line as a specific record type.
pub fn parse_as<T: JsonRecord>(line: &str) -> Result<T, RecordError> {
    T::from_object(object_of(line)?)
}

/// Parse one line, inferring the record type from its keys.
pub fn parse_record(line: &str) -> Result<Record, RecordError> {
    let obj = object_of(line)?;
    // Pair and candidate keys are checked first: mined pairs carry
    // `commit_sha` as passthrough metadata.
    if obj.contains_key("chosen") || obj.contains_key("rejected") {
        PreferencePair::from_object(obj).map(Record::Pair)
    } else if obj.contains_key("rm_score") || obj.contains_key("ground_truth_pass_fraction") {
        RankedCandidate::from_object(obj).map(Record::Candidate)
    } else if obj.contains_key("commit_sha") {
        CommitRecord::from_object(obj).map(Record::Commit)
    } else {
        Err(RecordError::InvariantViolation("unrecognised record shape".into()))
    }
}

/// Serialize a record as one JSON line (no trailing newline).
pub fn to_line<T: Serialize>(rec: &T) -> String {
    serde_json::to_string(rec).expect("records always serialize")
}
