//! MinHash near-duplicate removal with banded LSH candidates and exact
//! Jaccard confirmation.

use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::text::{fnv1a64, TokenStream};
use crate::types::PreferencePair;

const MERSENNE_61: u64 = (1 << 61) - 1;

/// Hashed shingle set of one document.
pub type ShingleSet = HashSet<u64>;

/// Token `size`-gram shingles of a normalized token stream.
pub fn shingles(stream: &TokenStream, size: usize) -> ShingleSet {
    stream.ngrams(size).map(|g| fnv1a64(g.as_bytes())).collect()
}

/// Text that is deduplicated for a pair: the task prompt and both responses.
pub fn document(pair: &PreferencePair) -> TokenStream {
    TokenStream::normalize_all([pair.task_prompt.as_str(), &pair.chosen, &pair.rejected])
}

pub fn jaccard(a: &ShingleSet, b: &ShingleSet) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let inter = small.iter().filter(|x| large.contains(x)).count();
    inter as f64 / (a.len() + b.len() - inter) as f64
}

/// `num_hashes` universal hash functions `(a*x + b) mod (2^61 - 1)`.
#[derive(Debug, Clone)]
pub struct MinHasher {
    params: Vec<(u64, u64)>,
}

impl MinHasher {
    pub fn new(num_hashes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = (0..num_hashes)
            .map(|_| (rng.random_range(1..MERSENNE_61), rng.random_range(0..MERSENNE_61)))
            .collect();
        MinHasher { params }
    }

    pub fn signature(&self, set: &ShingleSet) -> Vec<u64> {
        let mut sig = vec![u64::MAX; self.params.len()];
        for &x in set {
            let x = u128::from(x % MERSENNE_61);
            for (slot, &(a, b)) in sig.iter_mut().zip(&self.params) {
                let h = ((u128::from(a) * x + u128::from(b)) % u128::from(MERSENNE_61)) as u64;
                if h < *slot {
                    *slot = h;
                }
            }
        }
        sig
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DedupParams {
    pub shingle_size: usize,
    pub threshold: f64,
    pub num_hashes: usize,
    pub bands: usize,
    pub rows_per_band: usize,
    pub seed: u64,
}

/// Fate of one input document.
#[derive(Debug, Clone, PartialEq)]
pub enum DedupDecision {
    Keep,
    /// Kept without comparison: fewer tokens than one shingle.
    UnderShingled,
    Drop { duplicate_of: usize, jaccard: f64 },
}

/// Greedy pass in input order: a document is dropped when an earlier
/// surviving document has exact shingle Jaccard at or above the threshold.
/// LSH bands only propose candidates.
pub fn dedup_documents(docs: &[TokenStream], p: &DedupParams) -> Vec<DedupDecision> {
    assert_eq!(p.bands * p.rows_per_band, p.num_hashes, "bands x rows must equal num_hashes");
    let hasher = MinHasher::new(p.num_hashes, p.seed);
    let prepared: Vec<Option<(ShingleSet, Vec<u64>)>> = docs
        .par_iter()
        .map(|d| {
            if d.len() < p.shingle_size {
                return None;
            }
            let set = shingles(d, p.shingle_size);
            let sig = hasher.signature(&set);
            Some((set, sig))
        })
        .collect();

    let mut buckets: HashMap<(usize, u64), Vec<usize>> = HashMap::new();
    let mut out = Vec::with_capacity(docs.len());
    for (idx, prep) in prepared.iter().enumerate() {
        let Some((set, sig)) = prep else {
            out.push(DedupDecision::UnderShingled);
            continue;
        };
        let keys: Vec<(usize, u64)> = sig
            .chunks(p.rows_per_band)
            .enumerate()
            .map(|(band, rows)| {
                let bytes: Vec<u8> = rows.iter().flat_map(|v| v.to_le_bytes()).collect();
                (band, fnv1a64(&bytes))
            })
            .collect();
        let mut candidates: Vec<usize> = keys
            .iter()
            .filter_map(|k| buckets.get(k))
            .flatten()
            .copied()
            .collect();
        candidates.sort_unstable();
        candidates.dedup();
        let hit = candidates.into_iter().find_map(|c| {
            let (other, _) = prepared[c].as_ref().expect("only shingled docs are indexed");
            let j = jaccard(set, other);
            (j >= p.threshold).then_some((c, j))
        });
        match hit {
            Some((duplicate_of, jaccard)) => out.push(DedupDecision::Drop { duplicate_of, jaccard }),
            None => {
                for k in keys {
                    buckets.entry(k).or_default().push(idx);
                }
                out.push(DedupDecision::Keep);
            }
        }
    }
    out
}
