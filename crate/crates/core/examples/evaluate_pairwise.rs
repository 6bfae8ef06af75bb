//! Pairwise accuracy of a custom scorer, broken down by criterion and
//! language, rendered as the markdown report the CLI writes.
//!
//! ```text
//! cargo run --example evaluate_pairwise
//! ```

use serde_json::Map;

use themis::metrics::{self, PromptMode, ReportBundle};
use themis::scorer::{ScoreError, ScoreRequest, ScoreResponse, Scorer};
use themis::types::{Criterion, Language, PreferencePair, Split};

/// Rewards defensive checks and penalises length. Good at correctness,
/// blind to efficiency.
struct GuardCounter;

impl Scorer for GuardCounter {
    fn model_id(&self) -> &str {
        "guard-counter"
    }

    fn score_unchecked(&self, req: &ScoreRequest) -> Result<ScoreResponse, ScoreError> {
        let guards = req.response.matches("if ").count() as f64;
        let reward = guards - 0.001 * req.response.len() as f64;
        Ok(ScoreResponse { reward, model_id: self.model_id().into(), latency_ms: 0 })
    }
}

fn pair(i: usize, criterion: Criterion, language: Language, chosen: &str, rejected: &str) -> PreferencePair {
    PreferencePair {
        id: format!("{}-{i}", criterion.as_str()),
        criteria_prompt: None,
        task_prompt: "Implement the function described in the docstring.".into(),
        chosen: chosen.into(),
        rejected: rejected.into(),
        criterion,
        language,
        subset: "CommitPref".into(),
        split: Split::Eval,
        extra: Map::new(),
    }
}

fn main() -> anyhow::Result<()> {
    let mut pairs = Vec::new();
    for i in 0..6 {
        let lang = [Language::Python, Language::Go][i % 2];
        pairs.push(pair(i, Criterion::FC, lang, "if not xs: return 0\nreturn xs[0]", "return xs[0]"));
        pairs.push(pair(
            i,
            Criterion::EE,
            lang,
            "seen = set(xs)\nreturn [y for y in ys if y in seen]",
            "return [y for y in ys if y in xs]",
        ));
    }

    let mut bundle = ReportBundle::default();
    for mode in [PromptMode::None, PromptMode::Single] {
        let report = metrics::pairwise_accuracy(&pairs, &GuardCounter, mode, 4)?;
        assert!(report.decomposition_holds());
        bundle.pairwise.push(report);
    }
    let (markdown, _csv) = metrics::emit_report(&bundle);
    println!("{markdown}");
    Ok(())
}
