//! Commit preference mining: record gates, keyword tagging, judge consensus
//! and pair emission.
//!
//! Gates run in a fixed order and the first failure names the reject reason:
//! license, message length, message blocklist, stars, contributors, issues,
//! date window, merged PR, not reverted, repository exclusion.

pub mod judge;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{CommitRecord, Criterion, PreferencePair, RecordError, Split};

pub use judge::{
    inverse_instruction, judge_saliency, JudgeClient, JudgeError, JudgeRequest, JudgeVerdict,
    ReplayJudge, Saliency,
};

pub const COMMIT_SUBSET: &str = "CommitPref";

const DEFAULT_TERMS: &str = include_str!("../../templates/criteria_terms.toml");

pub const DEFAULT_LICENSES: &[&str] = &[
    "mit",
    "artistic-2.0",
    "isc",
    "cc0-1.0",
    "epl-1.0",
    "mpl-2.0",
    "unlicense",
    "apache-2.0",
    "bsd-3-clause",
    "agpl-3.0",
    "lgpl-2.1",
    "bsd-2-clause",
];

pub const DEFAULT_BLOCKLIST: &[&str] = &[
    "update readme.md",
    "initial commit",
    "update",
    "mirroring from micro.blog.",
    "update data.json",
    "update data.js",
    "add files via upload",
    "update readme",
    "can't you see i'm updating the time?",
    "dummy",
    "update index.html",
    "first commit",
    "create readme.md",
    "heartbeat update",
    "updated readme",
    "update log",
    "test",
    "no message",
    "readme",
    "wip",
    "updates",
    "commit",
    "update _config.yaml",
    "testing",
    "tweak",
    "tweaks",
    "modified",
    "edited",
    "yolo commit",
    "yolo",
    "made it work",
    "work in progress",
    "fixing",
    "for review",
    "my changes",
    "revised",
    "addressed comments",
    "placeholder",
    "test commit",
    "trying something",
    "experimental changes",
    "hack",
    "do not merge",
    "various updates",
    "stuff",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quorum {
    All,
    Majority,
}

pub fn default_criteria_terms() -> BTreeMap<Criterion, Vec<String>> {
    toml::from_str(DEFAULT_TERMS).expect("bundled criteria terms parse")
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("message_len_min ({0}) must be below message_len_max ({1})")]
    LengthBounds(usize, usize),
    #[error("criteria_terms lacks criterion {0}")]
    MissingCriterion(Criterion),
    #[error("judge_threshold {0} outside 1..=5")]
    Threshold(u8),
    #[error("date_from {0} is after date_to {1}")]
    DateWindow(NaiveDate, NaiveDate),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiningConfig {
    pub license_allowlist: BTreeSet<String>,
    /// Exclusive lower bound on message length in characters.
    pub message_len_min: usize,
    /// Exclusive upper bound on message length in characters.
    pub message_len_max: usize,
    pub message_blocklist: BTreeSet<String>,
    /// Lowercased messages starting with any of these are rejected.
    pub blocked_prefixes: Vec<String>,
    pub min_stars: i64,
    pub min_contributors: i64,
    pub min_issues: i64,
    pub date_from: NaiveDate,
    pub date_to: NaiveDate,
    pub criteria_terms: BTreeMap<Criterion, Vec<String>>,
    pub judge_threshold: u8,
    pub judge_quorum: Quorum,
    /// Minimum classifier probability when a commit classifier is plugged in.
    pub classifier_threshold: f64,
    /// Repositories that must not contribute (e.g. the eval repo set when
    /// mining training data).
    pub excluded_repos: BTreeSet<String>,
    pub split: Split,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig::eval_defaults()
    }
}

impl MiningConfig {
    /// Benchmark mining window: June 2019 through January 2021.
    pub fn eval_defaults() -> Self {
        MiningConfig {
            license_allowlist: DEFAULT_LICENSES.iter().map(|s| s.to_string()).collect(),
            message_len_min: 10,
            message_len_max: 15000,
            message_blocklist: DEFAULT_BLOCKLIST.iter().map(|s| s.to_string()).collect(),
            blocked_prefixes: vec!["merge".to_string()],
            min_stars: 15,
            min_contributors: 5,
            min_issues: 10,
            date_from: NaiveDate::from_ymd_opt(2019, 6, 1).unwrap(),
            date_to: NaiveDate::from_ymd_opt(2021, 1, 31).unwrap(),
            criteria_terms: default_criteria_terms(),
            judge_threshold: 4,
            judge_quorum: Quorum::All,
            classifier_threshold: 0.5,
            excluded_repos: BTreeSet::new(),
            split: Split::Eval,
        }
    }

    /// Training mining window: everything up to the end of March 2019.
    pub fn train_defaults() -> Self {
        MiningConfig {
            date_from: NaiveDate::from_ymd_opt(2008, 1, 1).unwrap(),
            date_to: NaiveDate::from_ymd_opt(2019, 3, 31).unwrap(),
            split: Split::Train,
            ..MiningConfig::eval_defaults()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.message_len_min >= self.message_len_max {
            return Err(ConfigError::LengthBounds(self.message_len_min, self.message_len_max));
        }
        for c in Criterion::ALL {
            if !self.criteria_terms.contains_key(&c) {
                return Err(ConfigError::MissingCriterion(c));
            }
        }
        if !(1..=5).contains(&self.judge_threshold) {
            return Err(ConfigError::Threshold(self.judge_threshold));
        }
        if self.date_from > self.date_to {
            return Err(ConfigError::DateWindow(self.date_from, self.date_to));
        }
        Ok(())
    }
}

/// Record-level gates, in evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Gate {
    License,
    MessageLength,
    Blocklist,
    Stars,
    Contributors,
    Issues,
    Date,
    MergedPr,
    Reverted,
    RepoExcluded,
}

impl Gate {
    pub const ORDER: [Gate; 10] = [
        Gate::License,
        Gate::MessageLength,
        Gate::Blocklist,
        Gate::Stars,
        Gate::Contributors,
        Gate::Issues,
        Gate::Date,
        Gate::MergedPr,
        Gate::Reverted,
        Gate::RepoExcluded,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Gate::License => "license",
            Gate::MessageLength => "message_length",
            Gate::Blocklist => "blocklist",
            Gate::Stars => "stars",
            Gate::Contributors => "contributors",
            Gate::Issues => "issues",
            Gate::Date => "date",
            Gate::MergedPr => "merged_pr",
            Gate::Reverted => "reverted",
            Gate::RepoExcluded => "repo_excluded",
        }
    }

    /// Whether `rec` satisfies this gate.
    pub fn passes(self, rec: &CommitRecord, cfg: &MiningConfig) -> bool {
        match self {
            Gate::License => cfg.license_allowlist.contains(&rec.license.to_lowercase()),
            Gate::MessageLength => {
                let n = rec.message.chars().count();
                cfg.message_len_min < n && n < cfg.message_len_max
            }
            Gate::Blocklist => {
                let lower = rec.message.to_lowercase();
                !cfg.message_blocklist.contains(&lower)
                    && !cfg.blocked_prefixes.iter().any(|p| lower.starts_with(p.as_str()))
            }
            Gate::Stars => rec.stars >= cfg.min_stars,
            Gate::Contributors => rec.contributors >= cfg.min_contributors,
            Gate::Issues => rec.issues >= cfg.min_issues,
            Gate::Date => {
                let day = rec.authored_at.date_naive();
                cfg.date_from <= day && day <= cfg.date_to
            }
            Gate::MergedPr => rec.merged_pr,
            Gate::Reverted => !rec.reverted,
            Gate::RepoExcluded => !cfg.excluded_repos.contains(&rec.repo),
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateVerdict {
    Pass,
    Reject(Gate),
}

/// Run every record gate; the first failing gate in [`Gate::ORDER`] is
/// reported.
pub fn filter_record(rec: &CommitRecord, cfg: &MiningConfig) -> GateVerdict {
    match Gate::ORDER.iter().find(|g| !g.passes(rec, cfg)) {
        Some(g) => GateVerdict::Reject(*g),
        None => GateVerdict::Pass,
    }
}

/// Optional learned commit classifier. When configured, a criterion is kept
/// only if both the keyword tagger and the classifier agree.
pub trait CommitClassifier: Send + Sync {
    fn probabilities(&self, message: &str) -> BTreeMap<Criterion, f64>;
}

/// Criteria whose search terms occur in the lowercased commit message.
pub fn tag_criteria(rec: &CommitRecord, cfg: &MiningConfig) -> BTreeSet<Criterion> {
    let lower = rec.message.to_lowercase();
    cfg.criteria_terms
        .iter()
        .filter(|(_, terms)| terms.iter().any(|t| lower.contains(t.as_str())))
        .map(|(c, _)| *c)
        .collect()
}

pub fn tag_with_classifier(
    rec: &CommitRecord,
    cfg: &MiningConfig,
    classifier: Option<&dyn CommitClassifier>,
) -> BTreeSet<Criterion> {
    let tags = tag_criteria(rec, cfg);
    let Some(cls) = classifier else {
        return tags;
    };
    let probs = cls.probabilities(&rec.message);
    tags.into_iter()
        .filter(|c| probs.get(c).copied().unwrap_or(0.0) >= cfg.classifier_threshold)
        .collect()
}

/// Turn an accepted commit into a preference pair: the post-change file is
/// chosen, the pre-change file rejected.
pub fn emit_pair(
    rec: &CommitRecord,
    criterion: Criterion,
    instruction: &str,
    split: Split,
) -> Result<PreferencePair, RecordError> {
    let mut extra = serde_json::Map::new();
    extra.insert("repo".into(), rec.repo.clone().into());
    extra.insert("commit_sha".into(), rec.commit_sha.clone().into());
    extra.insert("license".into(), rec.license.clone().into());
    let pair = PreferencePair {
        id: judge::record_key(rec),
        criteria_prompt: None,
        task_prompt: instruction.to_string(),
        chosen: rec.new_file.clone(),
        rejected: rec.old_file.clone(),
        criterion,
        language: rec.language,
        subset: COMMIT_SUBSET.to_string(),
        split,
        extra,
    };
    pair.validate()?;
    Ok(pair)
}

/// Why a record did not become a pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RejectReason {
    Gate(Gate),
    NoCriteria,
    JudgeRejected,
    MultiPurpose,
    JudgeUnparseable,
    NoInstruction,
    InvalidPair,
}

impl RejectReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            RejectReason::Gate(g) => g.as_str(),
            RejectReason::NoCriteria => "no_criteria",
            RejectReason::JudgeRejected => "judge_rejected",
            RejectReason::MultiPurpose => "multi_purpose",
            RejectReason::JudgeUnparseable => "judge_unparseable",
            RejectReason::NoInstruction => "no_instruction",
            RejectReason::InvalidPair => "invalid_pair",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiningReject {
    pub commit_sha: String,
    pub reason: String,
}

/// Result of resolving a tag set through the judges.
#[derive(Debug, Clone, PartialEq)]
pub enum Resolution {
    Accepted { criterion: Criterion, ratings: Vec<JudgeVerdict> },
    Rejected(RejectReason),
}

/// Query judges once per tagged criterion. At most one criterion survives:
/// the accepted one with the highest mean rating. A tie at the top means the
/// change serves several purposes and it is dropped.
pub fn resolve_criteria(
    rec: &CommitRecord,
    tags: &BTreeSet<Criterion>,
    judges: &[&dyn JudgeClient],
    cfg: &MiningConfig,
) -> Result<Resolution, JudgeError> {
    if tags.is_empty() {
        return Ok(Resolution::Rejected(RejectReason::NoCriteria));
    }
    let mut accepted = Vec::new();
    for c in tags {
        match judge_saliency(rec, *c, judges, cfg) {
            Ok(s) if s.accepted() => accepted.push((*c, s)),
            Ok(_) => {}
            Err(JudgeError::UnparseableRating { .. }) => {
                return Ok(Resolution::Rejected(RejectReason::JudgeUnparseable))
            }
            Err(e) => return Err(e),
        }
    }
    let best = accepted.iter().map(|(_, s)| s.mean_rating()).fold(f64::NEG_INFINITY, f64::max);
    let mut top = accepted.into_iter().filter(|(_, s)| s.mean_rating() == best);
    match (top.next(), top.next()) {
        (None, _) => Ok(Resolution::Rejected(RejectReason::JudgeRejected)),
        (Some(_), Some(_)) => Ok(Resolution::Rejected(RejectReason::MultiPurpose)),
        (Some((criterion, s)), None) => Ok(Resolution::Accepted {
            criterion,
            ratings: s.ratings().to_vec(),
        }),
    }
}

/// Everything a mining run produces.
#[derive(Debug, Clone, Default)]
pub struct MiningOutput {
    pub pairs: Vec<PreferencePair>,
    pub rejects: Vec<MiningReject>,
}

impl MiningOutput {
    /// Reject counts keyed by reason.
    pub fn reject_counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for r in &self.rejects {
            *out.entry(r.reason.clone()).or_insert(0) += 1;
        }
        out
    }
}

/// Judges and optional classifier used by [`mine`].
pub struct MiningServices<'a> {
    pub judges: Vec<&'a dyn JudgeClient>,
    /// Judge used to write inverse instructions; falls back to the first
    /// judge. Records carrying an `instruction` field skip the call.
    pub instruction_judge: Option<&'a dyn JudgeClient>,
    pub classifier: Option<&'a dyn CommitClassifier>,
}

enum Outcome {
    Pair(Box<PreferencePair>),
    Reject(RejectReason),
}

fn mine_one(
    rec: &CommitRecord,
    cfg: &MiningConfig,
    svc: &MiningServices<'_>,
) -> Result<Outcome, JudgeError> {
    if let GateVerdict::Reject(g) = filter_record(rec, cfg) {
        return Ok(Outcome::Reject(RejectReason::Gate(g)));
    }
    let tags = tag_with_classifier(rec, cfg, svc.classifier);
    let (criterion, ratings) = match resolve_criteria(rec, &tags, &svc.judges, cfg)? {
        Resolution::Rejected(r) => return Ok(Outcome::Reject(r)),
        Resolution::Accepted { criterion, ratings } => (criterion, ratings),
    };
    let instruction = match rec.extra.get("instruction").and_then(|v| v.as_str()) {
        Some(s) => s.to_string(),
        None => {
            let judge = svc.instruction_judge.unwrap_or(svc.judges[0]);
            match inverse_instruction(rec, judge) {
                Ok(s) => s,
                Err(JudgeError::MissingInstruction { .. }) => {
                    return Ok(Outcome::Reject(RejectReason::NoInstruction))
                }
                Err(e) => return Err(e),
            }
        }
    };
    let Ok(mut pair) = emit_pair(rec, criterion, &instruction, cfg.split) else {
        return Ok(Outcome::Reject(RejectReason::InvalidPair));
    };
    pair.extra.insert(
        "judge_ratings".into(),
        serde_json::to_value(&ratings).expect("verdicts serialize"),
    );
    Ok(Outcome::Pair(Box::new(pair)))
}

/// Run the whole funnel over `records`. Work is spread over the current rayon
/// pool, which bounds the number of in-flight judge calls. Output is sorted
/// by (repo, commit_sha).
pub fn mine(
    records: &[CommitRecord],
    cfg: &MiningConfig,
    svc: &MiningServices<'_>,
) -> Result<MiningOutput, JudgeError> {
    assert!(!svc.judges.is_empty(), "at least one judge must be configured");
    let outcomes: Vec<Result<Outcome, JudgeError>> =
        records.par_iter().map(|r| mine_one(r, cfg, svc)).collect();
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|a, b| {
        let (ra, rb) = (&records[*a], &records[*b]);
        (&ra.repo, &ra.commit_sha, a).cmp(&(&rb.repo, &rb.commit_sha, b))
    });
    let mut outcomes: Vec<Option<Result<Outcome, JudgeError>>> =
        outcomes.into_iter().map(Some).collect();
    let mut out = MiningOutput::default();
    for idx in order {
        match outcomes[idx].take().expect("each outcome visited once")? {
            Outcome::Pair(p) => out.pairs.push(*p),
            Outcome::Reject(r) => out.rejects.push(MiningReject {
                commit_sha: records[idx].commit_sha.clone(),
                reason: r.as_str().to_string(),
            }),
        }
    }
    Ok(out)
}
