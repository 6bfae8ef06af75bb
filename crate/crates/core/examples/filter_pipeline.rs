//! Run all five filter stages over a handful of pairs and show why each
//! rejected pair was dropped.
//!
//! ```text
//! cargo run --example filter_pipeline
//! ```

use serde_json::Map;

use themis::filter::{self, FilterConfig, FilterContext, Stage};
use themis::types::{Criterion, Language, PreferencePair, Split};

fn pair(id: &str, language: Language, task: &str, chosen: &str, rejected: &str) -> PreferencePair {
    PreferencePair {
        id: id.into(),
        criteria_prompt: None,
        task_prompt: task.into(),
        chosen: chosen.into(),
        rejected: rejected.into(),
        criterion: Criterion::FC,
        language,
        subset: "CommitPref".into(),
        split: Split::Train,
        extra: Map::new(),
    }
}

const GOOD_NEW: &str = "def total(xs):\n    acc = 0\n    for x in xs:\n        if x is not None:\n            acc += x\n    return acc\n";
const GOOD_OLD: &str = "def total(xs):\n    acc = 0\n    for x in xs:\n        acc += x\n    return acc\n";
const TASK: &str = "Write a function that adds up the numbers in a list and skips missing values.";

fn main() -> anyhow::Result<()> {
    let huge = format!("def f():\n    if True:\n        return [{}]\n", vec!["1"; 6000].join(", "));
    let pairs = vec![
        pair("keep", Language::Python, TASK, GOOD_NEW, GOOD_OLD),
        pair("too-long", Language::Python, TASK, &huge, GOOD_OLD),
        pair("flat", Language::Python, TASK, "x = 1\n", "x = 2\n"),
        pair("unbalanced", Language::JavaScript, TASK, "function f( {\n", "function f() { return 1; }\n"),
        pair("not-english", Language::Python, "编写一个函数把列表里的数字加起来并跳过缺失的值", GOOD_NEW, GOOD_OLD),
        pair("copy", Language::Python, TASK, GOOD_NEW, GOOD_OLD),
        pair("leaked", Language::Python, "Given a list of integers return the sum of all the even numbers that appear at odd positions in it.", GOOD_NEW, GOOD_OLD),
    ];
    let ctx = FilterContext {
        bench_prompts: vec!["Given a list of integers, return the sum of all the even numbers that appear at odd positions in it.".into()],
        ..FilterContext::default()
    };
    let out = filter::run(pairs, &Stage::ALL, &ctx, &FilterConfig::pm())?;

    for (stage, n) in &out.stage_inputs {
        println!("{:<9} saw {n} pairs", stage.as_str());
    }
    println!("kept: {:?}", out.kept.iter().map(|p| p.id.as_str()).collect::<Vec<_>>());
    for r in &out.rejects {
        println!("drop {:<12} {:<9} {:<15} {}", r.id, r.stage, r.reason, r.evidence);
    }
    Ok(())
}
