//! Language identification and perplexity scoring for task prompts.
//!
//! The built-in scorers are small heuristics so the pipeline runs without
//! external models. Production runs plug real models in through the traits.

use std::collections::HashSet;

use thiserror::Error;

use crate::text::TokenStream;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("scorer unavailable: {0}")]
pub struct ScorerUnavailable(pub String);

pub const ENGLISH: &str = "en";

pub trait LangIdClassifier: Send + Sync {
    /// ISO 639-1 code of the dominant language; `en` for English.
    fn identify(&self, text: &str) -> Result<String, ScorerUnavailable>;
}

pub trait PerplexityScorer: Send + Sync {
    fn perplexity(&self, text: &str) -> Result<f64, ScorerUnavailable>;
}

/// Calls text English when at least `min_ascii_ratio` of its letters are
/// ASCII.
#[derive(Debug, Clone, Copy)]
pub struct AsciiLangId {
    pub min_ascii_ratio: f64,
}

impl Default for AsciiLangId {
    fn default() -> Self {
        AsciiLangId { min_ascii_ratio: 0.9 }
    }
}

impl LangIdClassifier for AsciiLangId {
    fn identify(&self, text: &str) -> Result<String, ScorerUnavailable> {
        let (mut ascii, mut total) = (0usize, 0usize);
        for c in text.chars().filter(|c| c.is_alphabetic()) {
            total += 1;
            if c.is_ascii() {
                ascii += 1;
            }
        }
        if total > 0 && ascii as f64 / total as f64 >= self.min_ascii_ratio {
            Ok(ENGLISH.to_string())
        } else {
            Ok("und".to_string())
        }
    }
}

const COMMON_WORDS: &str = "the of and to a in is that for it as with be on not this are by or from at \
an which you have was but all can if will one has would there their what so when more no do \
out up use its than then them these some each into other new only also how any two may such \
should must given write function return returns program code list string number numbers value \
values array input output integer integers file data class method create implement find first \
make using whether sum print line lines each element elements true false count order result";

/// Unigram model: listed words share `known_mass` of the probability
/// uniformly; the rest is spread over `oov_vocab` unseen words.
#[derive(Debug, Clone)]
pub struct UnigramPerplexity {
    words: HashSet<String>,
    known_mass: f64,
    oov_vocab: usize,
}

impl Default for UnigramPerplexity {
    fn default() -> Self {
        UnigramPerplexity::new(COMMON_WORDS.split_whitespace(), 0.55, 2000)
    }
}

impl UnigramPerplexity {
    pub fn new<'a>(words: impl IntoIterator<Item = &'a str>, known_mass: f64, oov_vocab: usize) -> Self {
        assert!(known_mass > 0.0 && known_mass < 1.0 && oov_vocab > 0);
        UnigramPerplexity {
            words: words.into_iter().map(str::to_lowercase).collect(),
            known_mass,
            oov_vocab,
        }
    }

    fn log_prob(&self, token: &str) -> f64 {
        if self.words.contains(token) {
            (self.known_mass / self.words.len() as f64).ln()
        } else {
            ((1.0 - self.known_mass) / self.oov_vocab as f64).ln()
        }
    }
}

impl PerplexityScorer for UnigramPerplexity {
    /// Text without any word tokens has infinite perplexity.
    fn perplexity(&self, text: &str) -> Result<f64, ScorerUnavailable> {
        let stream = TokenStream::normalize(text);
        if stream.is_empty() {
            return Ok(f64::INFINITY);
        }
        let total: f64 = stream.tokens().iter().map(|t| self.log_prob(t)).sum();
        Ok((-total / stream.len() as f64).exp())
    }
}
