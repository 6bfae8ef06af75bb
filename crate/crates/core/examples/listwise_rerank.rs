//! Best-of-n reranking metrics: Hits@1 and the median per-problem Spearman
//! correlation between reward and test pass rate.
//!
//! ```text
//! cargo run --example listwise_rerank
//! ```

use serde_json::Map;

use themis::metrics;
use themis::types::RankedCandidate;

fn main() -> anyhow::Result<()> {
    // (reward, fraction of tests passed) for four candidates per problem.
    let lists: [(&str, [(f64, f64); 4]); 4] = [
        ("two-sum", [(2.1, 1.0), (1.5, 0.5), (0.3, 0.0), (-1.0, 0.25)]),
        ("lru-cache", [(0.9, 0.75), (1.2, 0.5), (0.1, 1.0), (-0.5, 0.0)]),
        ("parse-int", [(0.4, 0.0), (0.4, 1.0), (0.2, 0.5), (0.1, 0.25)]),
        ("no-solution", [(1.0, 0.5), (0.5, 0.25), (0.0, 0.0), (-1.0, 0.0)]),
    ];
    let cands: Vec<RankedCandidate> = lists
        .iter()
        .flat_map(|(pid, rows)| {
            rows.iter().enumerate().map(move |(i, (s, f))| RankedCandidate {
                problem_id: pid.to_string(),
                candidate_id: Some(format!("c{i}")),
                solution: format!("candidate {i}"),
                rm_score: *s,
                ground_truth_pass_fraction: *f,
                extra: Map::new(),
            })
        })
        .collect();
    let problems = metrics::group_problems(cands);

    for (pid, list) in &problems {
        let order: Vec<String> = metrics::sorted_by_rank(list)
            .iter()
            .map(|c| format!("{}({:.2})", c.candidate_id.as_deref().unwrap_or("?"), c.ground_truth_pass_fraction))
            .collect();
        println!("{pid:<12} ranked: {}", order.join(" > "));
    }
    let hits = metrics::hits_at_k(&problems, 1, false)?;
    println!("\nhits@1 per problem: {:?}", hits.hits);
    let rc = metrics::rank_corr(&problems, 4)?;
    println!("spearman per problem: {:?}", rc.per_problem);

    let report = metrics::listwise_report("example-rm", &problems, 1, 4, false)?;
    println!(
        "\nhits@1 = {} over {} problems ({} without a correct candidate), median rho = {}",
        metrics::fmt_acc(report.hits_at_k_mean),
        report.n_problems - report.n_excluded,
        report.n_excluded,
        metrics::fmt_rho(report.rank_corr_median),
    );
    Ok(())
}
