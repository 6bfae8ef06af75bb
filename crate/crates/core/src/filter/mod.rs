//! Cleaning pipeline for preference data: length and syntax-depth gates,
//! prompt language and perplexity gates, MinHash near-dedup and n-gram
//! decontamination against benchmark prompts.

pub mod dedup;
pub mod langppl;
pub mod syntax;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::text::{PunctTokenizer, TokenStream, Tokenizer};
use crate::types::{Language, PreferencePair};

pub use dedup::{DedupDecision, DedupParams};
pub use langppl::{AsciiLangId, LangIdClassifier, PerplexityScorer, ScorerUnavailable, UnigramPerplexity};
pub use syntax::{ParseError, SyntaxParser, SyntaxRegistry};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FilterError {
    #[error("no grammar registered for {0}")]
    GrammarUnavailable(Language),
    #[error(transparent)]
    ScorerUnavailable(#[from] ScorerUnavailable),
    #[error("invalid filter config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub max_tokens: usize,
    pub min_ast_depth: usize,
    pub perplexity_max: f64,
    pub shingle_size: usize,
    pub jaccard_threshold: f64,
    pub decontam_ngram: usize,
    pub num_hashes: usize,
    pub bands: usize,
    pub rows_per_band: usize,
    pub rng_seed: u64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig::pm()
    }
}

impl FilterConfig {
    /// Settings for pairwise-training (PM) data.
    pub fn pm() -> Self {
        FilterConfig {
            max_tokens: 4096,
            min_ast_depth: 3,
            perplexity_max: 1200.0,
            shingle_size: 20,
            jaccard_threshold: 0.75,
            decontam_ngram: 13,
            num_hashes: 128,
            bands: 16,
            rows_per_band: 8,
            rng_seed: 0,
        }
    }

    /// Settings for pre-training (PT) data: shorter length cap.
    pub fn pt() -> Self {
        FilterConfig { max_tokens: 2560, ..FilterConfig::pm() }
    }

    pub fn validate(&self) -> Result<(), FilterError> {
        if self.bands * self.rows_per_band != self.num_hashes {
            return Err(FilterError::Config(format!(
                "bands ({}) x rows_per_band ({}) != num_hashes ({})",
                self.bands, self.rows_per_band, self.num_hashes
            )));
        }
        if !(self.jaccard_threshold > 0.0 && self.jaccard_threshold < 1.0) {
            return Err(FilterError::Config("jaccard_threshold must lie in (0, 1)".into()));
        }
        if self.shingle_size == 0 || self.decontam_ngram == 0 || self.num_hashes == 0 {
            return Err(FilterError::Config("shingle_size, decontam_ngram and num_hashes must be positive".into()));
        }
        Ok(())
    }

    pub fn dedup_params(&self) -> DedupParams {
        DedupParams {
            shingle_size: self.shingle_size,
            threshold: self.jaccard_threshold,
            num_hashes: self.num_hashes,
            bands: self.bands,
            rows_per_band: self.rows_per_band,
            seed: self.rng_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Pass,
    Reject { reason: String, evidence: Value },
}

impl Verdict {
    fn reject(reason: &str, evidence: Value) -> Self {
        Verdict::Reject { reason: reason.to_string(), evidence }
    }

    pub fn passed(&self) -> bool {
        matches!(self, Verdict::Pass)
    }
}

/// Stages in their fixed execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Length,
    Depth,
    LangPpl,
    Dedup,
    Decontam,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Length, Stage::Depth, Stage::LangPpl, Stage::Dedup, Stage::Decontam];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Length => "length",
            Stage::Depth => "depth",
            Stage::LangPpl => "langppl",
            Stage::Dedup => "dedup",
            Stage::Decontam => "decontam",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

fn side_tokens(pair: &PreferencePair, response: &str, tok: &dyn Tokenizer) -> usize {
    pair.criteria_prompt.as_deref().map_or(0, |c| tok.count(c)) + tok.count(&pair.task_prompt) + tok.count(response)
}

/// Both `prompt + response` sequences must fit in `max_tokens`.
pub fn length_gate(pair: &PreferencePair, tok: &dyn Tokenizer, cfg: &FilterConfig) -> Verdict {
    let chosen = side_tokens(pair, &pair.chosen, tok);
    let rejected = side_tokens(pair, &pair.rejected, tok);
    if chosen <= cfg.max_tokens && rejected <= cfg.max_tokens {
        Verdict::Pass
    } else {
        Verdict::reject(
            "too_long",
            json!({"chosen_tokens": chosen, "rejected_tokens": rejected, "max_tokens": cfg.max_tokens}),
        )
    }
}

/// Both responses must parse and reach `min_ast_depth`.
pub fn ast_depth_gate(pair: &PreferencePair, reg: &SyntaxRegistry, cfg: &FilterConfig) -> Result<Verdict, FilterError> {
    let parser = reg.get(pair.language).ok_or(FilterError::GrammarUnavailable(pair.language))?;
    for (side, code) in [("chosen", &pair.chosen), ("rejected", &pair.rejected)] {
        match parser.max_depth(code) {
            Err(e) => return Ok(Verdict::reject("parse_error", json!({"side": side, "error": e.0}))),
            Ok(d) if d < cfg.min_ast_depth => {
                return Ok(Verdict::reject("shallow_ast", json!({"side": side, "depth": d})))
            }
            Ok(_) => {}
        }
    }
    Ok(Verdict::Pass)
}

/// Task prompt must be English and no more perplexing than `perplexity_max`.
pub fn lang_perplexity_gate(
    pair: &PreferencePair,
    lid: &dyn LangIdClassifier,
    lm: &dyn PerplexityScorer,
    cfg: &FilterConfig,
) -> Result<Verdict, FilterError> {
    let lang = lid.identify(&pair.task_prompt)?;
    if lang != langppl::ENGLISH {
        return Ok(Verdict::reject("language_id", json!({"language": lang})));
    }
    let ppl = lm.perplexity(&pair.task_prompt)?;
    if ppl <= cfg.perplexity_max {
        Ok(Verdict::Pass)
    } else {
        let shown = if ppl.is_finite() { json!(ppl) } else { json!("inf") };
        Ok(Verdict::reject("perplexity", json!({"perplexity": shown})))
    }
}

/// Exact n-gram index over normalized benchmark prompts.
#[derive(Debug, Clone, Default)]
pub struct NgramIndex {
    n: usize,
    grams: HashSet<String>,
}

impl NgramIndex {
    pub fn build<'a>(prompts: impl IntoIterator<Item = &'a str>, n: usize) -> Self {
        let grams = prompts
            .into_iter()
            .flat_map(|p| TokenStream::normalize(p).ngrams(n).collect::<Vec<_>>())
            .collect();
        NgramIndex { n, grams }
    }

    pub fn len(&self) -> usize {
        self.grams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grams.is_empty()
    }

    /// First n-gram of `text` that also occurs in the index.
    pub fn first_match(&self, text: &str) -> Option<String> {
        TokenStream::normalize(text).ngrams(self.n).find(|g| self.grams.contains(g))
    }
}

/// Decide, per pair, whether its task prompt overlaps the benchmark index.
pub fn decontaminate(pairs: &[PreferencePair], index: &NgramIndex) -> Vec<Verdict> {
    pairs
        .par_iter()
        .map(|p| match index.first_match(&p.task_prompt) {
            Some(g) => Verdict::reject("ngram_overlap", json!({"ngram": g})),
            None => Verdict::Pass,
        })
        .collect()
}

/// Dedup verdicts for `pairs`, plus ids that were too short to shingle.
pub fn minhash_dedup(pairs: &[PreferencePair], cfg: &FilterConfig) -> (Vec<Verdict>, Vec<String>) {
    let docs: Vec<TokenStream> = pairs.par_iter().map(dedup::document).collect();
    let decisions = dedup::dedup_documents(&docs, &cfg.dedup_params());
    let mut under = Vec::new();
    let verdicts = decisions
        .into_iter()
        .zip(pairs)
        .map(|(d, p)| match d {
            DedupDecision::Keep => Verdict::Pass,
            DedupDecision::UnderShingled => {
                under.push(p.id.clone());
                Verdict::Pass
            }
            DedupDecision::Drop { duplicate_of, jaccard } => Verdict::reject(
                "near_duplicate",
                json!({"duplicate_of": pairs[duplicate_of].id, "jaccard": jaccard}),
            ),
        })
        .collect();
    (verdicts, under)
}

/// Pluggable components used by [`run`].
pub struct FilterContext {
    pub tokenizer: Box<dyn Tokenizer>,
    pub syntax: SyntaxRegistry,
    pub lang_id: Box<dyn LangIdClassifier>,
    pub perplexity: Box<dyn PerplexityScorer>,
    pub bench_prompts: Vec<String>,
}

impl Default for FilterContext {
    fn default() -> Self {
        FilterContext {
            tokenizer: Box::new(PunctTokenizer),
            syntax: SyntaxRegistry::default(),
            lang_id: Box::new(AsciiLangId::default()),
            perplexity: Box::new(UnigramPerplexity::default()),
            bench_prompts: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReject {
    pub id: String,
    pub stage: String,
    pub reason: String,
    pub evidence: Value,
}

#[derive(Debug, Clone, Default)]
pub struct FilterOutput {
    pub kept: Vec<PreferencePair>,
    pub rejects: Vec<FilterReject>,
    /// Ids kept by dedup without comparison because they were too short.
    pub under_shingled: Vec<String>,
    /// Records entering each executed stage, in order.
    pub stage_inputs: Vec<(Stage, usize)>,
}

fn apply(
    stage: Stage,
    pairs: Vec<PreferencePair>,
    verdicts: Vec<Verdict>,
    rejects: &mut Vec<FilterReject>,
) -> Vec<PreferencePair> {
    let mut kept = Vec::with_capacity(pairs.len());
    for (p, v) in pairs.into_iter().zip(verdicts) {
        match v {
            Verdict::Pass => kept.push(p),
            Verdict::Reject { reason, evidence } => rejects.push(FilterReject {
                id: p.id,
                stage: stage.as_str().to_string(),
                reason,
                evidence,
            }),
        }
    }
    kept
}

/// Run `stages` over one dataset. Stages always execute in the fixed order
/// of [`Stage::ALL`] regardless of how they are listed.
pub fn run(
    pairs: Vec<PreferencePair>,
    stages: &[Stage],
    ctx: &FilterContext,
    cfg: &FilterConfig,
) -> Result<FilterOutput, FilterError> {
    cfg.validate()?;
    let mut out = FilterOutput::default();
    let mut current = pairs;
    for stage in Stage::ALL.into_iter().filter(|s| stages.contains(s)) {
        out.stage_inputs.push((stage, current.len()));
        let verdicts = match stage {
            Stage::Length => current
                .par_iter()
                .map(|p| length_gate(p, ctx.tokenizer.as_ref(), cfg))
                .collect(),
            Stage::Depth => current
                .par_iter()
                .map(|p| ast_depth_gate(p, &ctx.syntax, cfg))
                .collect::<Result<Vec<_>, _>>()?,
            Stage::LangPpl => current
                .par_iter()
                .map(|p| lang_perplexity_gate(p, ctx.lang_id.as_ref(), ctx.perplexity.as_ref(), cfg))
                .collect::<Result<Vec<_>, _>>()?,
            Stage::Dedup => {
                let (v, under) = minhash_dedup(&current, cfg);
                out.under_shingled = under;
                v
            }
            Stage::Decontam => {
                let index = NgramIndex::build(ctx.bench_prompts.iter().map(String::as_str), cfg.decontam_ngram);
                decontaminate(&current, &index)
            }
        };
        current = apply(stage, current, verdicts, &mut out.rejects);
    }
    out.kept = current;
    Ok(out)
}
