//! Audit the shipped benchmark manifest and assemble a small set of pairs
//! against it.
//!
//! ```text
//! cargo run --example assemble_benchmark
//! ```

use serde_json::Map;

use themis::bench::{self, AuditMode, BenchmarkManifest};
use themis::types::{Criterion, Language, PreferencePair, Split};

fn main() -> anyhow::Result<()> {
    let manifest = BenchmarkManifest::code_reward_bench();
    println!("{}", bench::marginals_table(&manifest));
    let m = bench::audit_totals(&manifest);
    println!("cells sum to {}, declared total {}\n", manifest.cell_sum(), manifest.total);
    assert_eq!(m.criterion_sum(), m.language_sum());

    let pairs: Vec<PreferencePair> = (0..12)
        .map(|i| PreferencePair {
            id: format!("p{i:02}"),
            criteria_prompt: None,
            task_prompt: "t".into(),
            chosen: "a".into(),
            rejected: "b".into(),
            criterion: [Criterion::EE, Criterion::FC][i % 2],
            language: [Language::Go, Language::Python, Language::C][i % 3],
            subset: "CommitPref".into(),
            split: Split::Eval,
            extra: Map::new(),
        })
        .collect();
    let (ordered, audit) = bench::assemble(pairs, &manifest, AuditMode::Lenient)?;
    println!("benchmark order: {:?}", ordered.iter().map(|p| p.id.as_str()).collect::<Vec<_>>());
    println!("{} of {} cells off target; first rows of the audit:", audit.flagged().count(), audit.rows.len());
    for line in audit.to_csv().lines().take(6) {
        println!("  {line}");
    }
    Ok(())
}
