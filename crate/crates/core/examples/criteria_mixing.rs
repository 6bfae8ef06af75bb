//! Criteria-prompt mixing used during training: each pair is seen with no
//! criteria prompt, the all-criteria prompt, or the prompt for its own
//! criterion.
//!
//! ```text
//! cargo run --example criteria_mixing
//! ```

use std::collections::BTreeMap;

use themis::train::{CriteriaMode, MixSampler};
use themis::types::Criterion;

fn main() {
    let sampler = MixSampler { rng_seed: 2024, ..MixSampler::default() };
    let draws = 100_000u64;
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for k in 0..draws {
        let name = match sampler.mode_for(k, Criterion::SH) {
            CriteriaMode::None => "none",
            CriteriaMode::All => "all",
            CriteriaMode::Single(_) => "single",
        };
        *counts.entry(name).or_default() += 1;
    }
    println!("target: none {:.2}, all {:.2}, single {:.2}", sampler.p_none, sampler.p_all, sampler.p_single);
    for (name, n) in &counts {
        println!("  {name:<6} {:.4}", *n as f64 / draws as f64);
    }

    println!("\nsingle-criterion prompt for {}:", Criterion::SH.label());
    println!("{}", CriteriaMode::Single(Criterion::SH).prompt().unwrap());
    let all = CriteriaMode::All.prompt().unwrap();
    println!("\nall-criteria prompt: {} lines", all.lines().count());
}
