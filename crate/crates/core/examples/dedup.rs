//! MinHash LSH near-duplicate removal on raw token streams.
//!
//! Documents are compared by exact shingle Jaccard once LSH has proposed
//! them as candidates, so the printed similarity is exact.
//!
//! ```text
//! cargo run --example dedup
//! ```

use themis::filter::dedup::{self, DedupDecision, DedupParams};
use themis::text::TokenStream;

fn main() {
    let base: Vec<String> = (0..400).map(|i| format!("w{i}")).collect();
    let mut one_edit = base.clone();
    one_edit[200] = "changed".into();
    let mut many_edits = base.clone();
    for i in [30, 90, 150, 210, 270, 330] {
        many_edits[i] = format!("edit{i}");
    }
    let unrelated: Vec<String> = (0..400).map(|i| format!("z{i}")).collect();

    let docs: Vec<TokenStream> = [&base, &one_edit, &many_edits, &unrelated, &base[..10].to_vec()]
        .iter()
        .map(|t| TokenStream::normalize(&t.join(" ")))
        .collect();
    let names = ["base", "one-edit", "six-edits", "unrelated", "short"];

    let params = DedupParams { shingle_size: 20, threshold: 0.75, num_hashes: 128, bands: 16, rows_per_band: 8, seed: 0 };
    let sets: Vec<_> = docs.iter().map(|d| dedup::shingles(d, params.shingle_size)).collect();
    for (i, d) in dedup::dedup_documents(&docs, &params).iter().enumerate() {
        let j = dedup::jaccard(&sets[0], &sets[i]);
        match d {
            DedupDecision::Keep => println!("{:<10} keep   (J vs base {j:.3})", names[i]),
            DedupDecision::UnderShingled => println!("{:<10} keep   (shorter than one shingle)", names[i]),
            DedupDecision::Drop { duplicate_of, jaccard } => {
                println!("{:<10} drop   duplicate of {} at J={jaccard:.3}", names[i], names[*duplicate_of])
            }
        }
    }
}
