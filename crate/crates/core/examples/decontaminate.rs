//! 13-gram overlap check of training prompts against benchmark prompts.
//!
//! ```text
//! cargo run --example decontaminate
//! ```

use themis::filter::NgramIndex;

fn main() {
    let bench = [
        "Write a function that returns the longest strictly increasing subsequence of an array of integers.",
        "Implement an LRU cache with get and put operations that both run in constant time.",
    ];
    let index = NgramIndex::build(bench, 13);
    println!("indexed {} distinct 13-grams", index.len());

    let train = [
        "Write a function that returns the longest strictly increasing\nsubsequence of an ARRAY of integers, in Rust.",
        "Implement a cache with get and put.",
        "Parse a CSV line into fields, honouring quoted commas.",
    ];
    for t in train {
        match index.first_match(t) {
            Some(g) => println!("contaminated: {t:?}\n  shares: {g}"),
            None => println!("clean:        {t:?}"),
        }
    }
}
