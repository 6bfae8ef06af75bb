//! LLM judges: the client abstraction, an HTTP chat-completions client, a
//! replay client for recorded replies, and the consensus rule.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::net::{HttpError, JsonEndpoint, RetryPolicy};
use crate::prompts::{self, ChatPrompt};
use crate::types::{CommitRecord, Criterion};

use super::{MiningConfig, Quorum};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum JudgeError {
    #[error("judge {judge_id} unreachable: {detail}")]
    JudgeUnreachable { judge_id: String, detail: String },
    #[error("judge {judge_id} reply has no usable [RATING]: {raw_reply:?}")]
    UnparseableRating { judge_id: String, raw_reply: String },
    #[error("judge {judge_id} reply has no [INSTRUCTION] section")]
    MissingInstruction { judge_id: String },
}

/// One judge query. `key` identifies the query independent of the prompt
/// text (`<repo>@<sha>:<criterion>` or `<repo>@<sha>:instruction`) so replies
/// can be recorded and replayed.
#[derive(Debug, Clone)]
pub struct JudgeRequest {
    pub key: String,
    pub prompt: ChatPrompt,
}

pub trait JudgeClient: Send + Sync {
    fn id(&self) -> &str;
    fn complete(&self, req: &JudgeRequest) -> Result<String, JudgeError>;
}

/// OpenAI-compatible `/v1/chat/completions` judge.
pub struct HttpJudge {
    id: String,
    model: String,
    endpoint: JsonEndpoint,
}

impl HttpJudge {
    pub fn new(id: &str, base_url: &str, model: &str, token: Option<String>) -> Result<Self, JudgeError> {
        let endpoint = JsonEndpoint::new(base_url, token, RetryPolicy::default()).map_err(|e| {
            JudgeError::JudgeUnreachable { judge_id: id.to_string(), detail: e.to_string() }
        })?;
        Ok(HttpJudge { id: id.to_string(), model: model.to_string(), endpoint })
    }
}

impl JudgeClient for HttpJudge {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, req: &JudgeRequest) -> Result<String, JudgeError> {
        let body = json!({
            "model": self.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": req.prompt.system},
                {"role": "user", "content": req.prompt.user},
            ],
        });
        let unreachable = |e: HttpError| JudgeError::JudgeUnreachable {
            judge_id: self.id.clone(),
            detail: e.to_string(),
        };
        let reply = self.endpoint.post("/v1/chat/completions", &body).map_err(unreachable)?;
        reply
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| JudgeError::JudgeUnreachable {
                judge_id: self.id.clone(),
                detail: "reply lacks choices[0].message.content".into(),
            })
    }
}

/// One recorded reply, as stored in a replay file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordedReply {
    pub judge_id: String,
    pub key: String,
    pub reply: String,
}

/// Serves replies recorded earlier, keyed by request key.
pub struct ReplayJudge {
    id: String,
    replies: HashMap<String, String>,
}

impl ReplayJudge {
    pub fn new(id: &str, replies: impl IntoIterator<Item = (String, String)>) -> Self {
        ReplayJudge { id: id.to_string(), replies: replies.into_iter().collect() }
    }

    /// Load every reply for `judge_id` from a JSONL file of [`RecordedReply`].
    pub fn from_file(judge_id: &str, path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut replies = HashMap::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: RecordedReply = serde_json::from_str(line).map_err(|e| {
                std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("{}:{}: {e}", path.display(), n + 1),
                )
            })?;
            if rec.judge_id == judge_id {
                replies.insert(rec.key, rec.reply);
            }
        }
        Ok(ReplayJudge::new(judge_id, replies))
    }
}

impl JudgeClient for ReplayJudge {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, req: &JudgeRequest) -> Result<String, JudgeError> {
        self.replies.get(&req.key).cloned().ok_or_else(|| JudgeError::JudgeUnreachable {
            judge_id: self.id.clone(),
            detail: format!("no recorded reply for {}", req.key),
        })
    }
}

/// One judge's score for one (commit, criterion).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub judge_id: String,
    pub rating: u8,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Saliency {
    Accept(Vec<JudgeVerdict>),
    Reject(Vec<JudgeVerdict>),
}

impl Saliency {
    pub fn ratings(&self) -> &[JudgeVerdict] {
        match self {
            Saliency::Accept(r) | Saliency::Reject(r) => r,
        }
    }

    pub fn accepted(&self) -> bool {
        matches!(self, Saliency::Accept(_))
    }

    pub fn mean_rating(&self) -> f64 {
        let r = self.ratings();
        if r.is_empty() {
            return 0.0;
        }
        r.iter().map(|v| f64::from(v.rating)).sum::<f64>() / r.len() as f64
    }
}

pub fn parse_rating(judge_id: &str, reply: &str) -> Result<JudgeVerdict, JudgeError> {
    let unparseable = || JudgeError::UnparseableRating {
        judge_id: judge_id.to_string(),
        raw_reply: reply.to_string(),
    };
    let raw = prompts::extract_tagged(reply, "RATING").ok_or_else(unparseable)?;
    let rating: u8 = raw.parse().map_err(|_| unparseable())?;
    if !(1..=5).contains(&rating) {
        return Err(unparseable());
    }
    let summary = prompts::extract_tagged(reply, "SUMMARY").unwrap_or_default().to_string();
    Ok(JudgeVerdict { judge_id: judge_id.to_string(), rating, summary })
}

pub fn quorum_holds(ratings: &[u8], threshold: u8, quorum: Quorum) -> bool {
    if ratings.is_empty() {
        return false;
    }
    let passing = ratings.iter().filter(|r| **r >= threshold).count();
    match quorum {
        Quorum::All => passing == ratings.len(),
        Quorum::Majority => 2 * passing > ratings.len(),
    }
}

pub fn record_key(rec: &CommitRecord) -> String {
    format!("{}@{}", rec.repo, rec.commit_sha)
}

/// Ask every judge to rate `rec` along `criterion` and apply the quorum rule.
pub fn judge_saliency(
    rec: &CommitRecord,
    criterion: Criterion,
    judges: &[&dyn JudgeClient],
    cfg: &MiningConfig,
) -> Result<Saliency, JudgeError> {
    assert!(!judges.is_empty(), "at least one judge must be configured");
    let req = JudgeRequest {
        key: format!("{}:{}", record_key(rec), criterion.as_str()),
        prompt: prompts::saliency_prompt(
            criterion,
            rec.language,
            &rec.old_file,
            &rec.new_file,
            &rec.message,
        ),
    };
    let mut verdicts = Vec::with_capacity(judges.len());
    for judge in judges {
        let reply = judge.complete(&req)?;
        verdicts.push(parse_rating(judge.id(), &reply)?);
    }
    let ratings: Vec<u8> = verdicts.iter().map(|v| v.rating).collect();
    Ok(if quorum_holds(&ratings, cfg.judge_threshold, cfg.judge_quorum) {
        Saliency::Accept(verdicts)
    } else {
        Saliency::Reject(verdicts)
    })
}

/// Problem style used for a commit's inverse instruction; a pure function of
/// the record key so reruns pick the same style.
pub fn style_for(rec: &CommitRecord) -> &'static str {
    let styles = prompts::content_styles();
    let h = crate::text::fnv1a64(record_key(rec).as_bytes());
    styles[(h % styles.len() as u64) as usize]
}

/// Ask `judge` for a task prompt both file versions plausibly answer.
pub fn inverse_instruction(rec: &CommitRecord, judge: &dyn JudgeClient) -> Result<String, JudgeError> {
    let req = JudgeRequest {
        key: format!("{}:instruction", record_key(rec)),
        prompt: prompts::inverse_instruction_prompt(
            rec.language,
            style_for(rec),
            &rec.old_file,
            &rec.new_file,
        ),
    };
    let reply = judge.complete(&req)?;
    prompts::extract_tagged(&reply, "INSTRUCTION")
        .filter(|s| !s.is_empty())
        .map(str::to_owned)
        .ok_or_else(|| JudgeError::MissingInstruction { judge_id: judge.id().to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Language;
    use chrono::TimeZone;

    struct Fixed(&'static str, String);

    impl JudgeClient for Fixed {
        fn id(&self) -> &str {
            self.0
        }
        fn complete(&self, _req: &JudgeRequest) -> Result<String, JudgeError> {
            Ok(self.1.clone())
        }
    }

    fn rated(id: &'static str, r: u8) -> Fixed {
        Fixed(id, format!("[SUMMARY]did a thing[/SUMMARY] [RATING]{r}[/RATING]"))
    }

    fn rec() -> CommitRecord {
        CommitRecord {
            commit_sha: "abc".into(),
            repo: "o/r".into(),
            license: "mit".into(),
            language: Language::C,
            message: "fix memory leak".into(),
            old_file: "a".into(),
            new_file: "b".into(),
            authored_at: chrono::Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap(),
            stars: 20,
            contributors: 5,
            issues: 10,
            merged_pr: true,
            reverted: false,
            extra: Default::default(),
        }
    }

    fn run(ratings: &[u8], quorum: Quorum) -> Saliency {
        let ids = ["j0", "j1", "j2", "j3", "j4"];
        let judges: Vec<Fixed> = ratings.iter().zip(ids).map(|(r, id)| rated(id, *r)).collect();
        let refs: Vec<&dyn JudgeClient> = judges.iter().map(|j| j as &dyn JudgeClient).collect();
        let cfg = MiningConfig { judge_quorum: quorum, ..MiningConfig::default() };
        judge_saliency(&rec(), Criterion::ME, &refs, &cfg).unwrap()
    }

    #[test]
    fn all_quorum() {
        assert!(run(&[5, 4, 4], Quorum::All).accepted());
        assert!(!run(&[5, 3, 4], Quorum::All).accepted());
    }

    #[test]
    fn majority_quorum() {
        assert!(run(&[5, 3, 4], Quorum::Majority).accepted());
        assert!(!run(&[5, 3, 2], Quorum::Majority).accepted());
        assert!(!run(&[5, 3], Quorum::Majority).accepted());
    }

    #[test]
    fn verdicts_keep_summaries() {
        let s = run(&[4], Quorum::All);
        assert_eq!(s.ratings()[0].summary, "did a thing");
        assert_eq!(s.mean_rating(), 4.0);
    }

    #[test]
    fn missing_rating_tags() {
        let j = Fixed("j", "I like it, 5/5".into());
        let cfg = MiningConfig::default();
        let err = judge_saliency(&rec(), Criterion::FC, &[&j], &cfg).unwrap_err();
        assert!(matches!(err, JudgeError::UnparseableRating { ref judge_id, .. } if judge_id == "j"));
    }

    #[test]
    fn out_of_range_rating() {
        assert!(parse_rating("j", "[RATING]6[/RATING]").is_err());
        assert!(parse_rating("j", "[RATING]0[/RATING]").is_err());
        assert!(parse_rating("j", "[RATING]four[/RATING]").is_err());
        assert_eq!(parse_rating("j", "[RATING] 3 [/RATING]").unwrap().rating, 3);
    }

    #[test]
    fn replay_judge_misses_are_unreachable() {
        let j = ReplayJudge::new("r", [("o/r@abc:ME".to_string(), "[RATING]5[/RATING]".to_string())]);
        let cfg = MiningConfig::default();
        assert!(judge_saliency(&rec(), Criterion::ME, &[&j], &cfg).unwrap().accepted());
        assert!(matches!(
            judge_saliency(&rec(), Criterion::SH, &[&j], &cfg),
            Err(JudgeError::JudgeUnreachable { .. })
        ));
    }

    #[test]
    fn inverse_instruction_parsing() {
        let j = Fixed("j", "[DESCRIPTION]d[/DESCRIPTION][INSTRUCTION]Write a cache.[\\INSTRUCTION]".into());
        assert_eq!(inverse_instruction(&rec(), &j).unwrap(), "Write a cache.");
        let j = Fixed("j", "[INSTRUCTION][/INSTRUCTION]".into());
        assert!(inverse_instruction(&rec(), &j).is_err());
    }

    #[test]
    fn style_is_stable() {
        assert_eq!(style_for(&rec()), style_for(&rec()));
        assert!(prompts::content_styles().contains(&style_for(&rec())));
    }
}
