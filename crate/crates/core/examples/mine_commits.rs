//! Mine preference pairs from commit records with replayed judge replies.
//!
//! ```text
//! cargo run --example mine_commits
//! ```

use chrono::{TimeZone, Utc};
use serde_json::Map;

use themis::mining::judge::ReplayJudge;
use themis::mining::{self, JudgeClient, MiningConfig, MiningServices};
use themis::types::{CommitRecord, Language};

fn commit(sha: &str, message: &str, stars: i64) -> CommitRecord {
    let mut extra = Map::new();
    extra.insert("instruction".into(), "Write a function that returns the first item of a list, or None.".into());
    CommitRecord {
        commit_sha: sha.into(),
        repo: "acme/tools".into(),
        license: "mit".into(),
        language: Language::Python,
        message: message.into(),
        old_file: "def first(xs):\n    return xs[0]\n".into(),
        new_file: "def first(xs):\n    if not xs:\n        return None\n    return xs[0]\n".into(),
        authored_at: Utc.with_ymd_and_hms(2020, 3, 2, 9, 30, 0).unwrap(),
        stars,
        contributors: 8,
        issues: 30,
        merged_pr: true,
        reverted: false,
        extra,
    }
}

fn main() -> anyhow::Result<()> {
    let records = vec![
        commit("a1", "fix bug when the input list is empty", 120),
        commit("b2", "fix bug in the empty list path", 120),
        commit("c3", "fix bug when the input list is empty", 3),
        commit("d4", "update readme", 120),
    ];
    let rating = |r: u8| format!("[SUMMARY]Handles the empty case.[/SUMMARY]\n[RATING]{r}[/RATING]");
    let judge = ReplayJudge::new(
        "replay",
        [
            ("acme/tools@a1:FC".to_string(), rating(5)),
            ("acme/tools@b2:FC".to_string(), rating(2)),
        ],
    );
    let services = MiningServices { judges: vec![&judge as &dyn JudgeClient], instruction_judge: None, classifier: None };
    let out = mining::mine(&records, &MiningConfig::eval_defaults(), &services)?;

    for p in &out.pairs {
        println!("pair {} [{} / {}]", p.id, p.criterion.as_str(), p.language.as_str());
        println!("  task:     {}", p.task_prompt);
        println!("  chosen:   {:?}", p.chosen);
        println!("  rejected: {:?}", p.rejected);
    }
    for r in &out.rejects {
        println!("reject {}: {}", r.commit_sha, r.reason);
    }
    Ok(())
}
