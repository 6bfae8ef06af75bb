//! Tokenization and text normalization used by the length gate, shingling,
//! n-gram decontamination and the toy reward model.

/// Pluggable token counter for the length gate.
pub trait Tokenizer: Send + Sync {
    fn tokenize(&self, text: &str) -> Vec<String>;

    fn count(&self, text: &str) -> usize {
        self.tokenize(text).len()
    }
}

/// Splits on whitespace and emits each punctuation character as its own token.
/// Runs of alphanumerics and `_` form one token.
#[derive(Debug, Default, Clone, Copy)]
pub struct PunctTokenizer;

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

impl Tokenizer for PunctTokenizer {
    fn tokenize(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut cur = String::new();
        for c in text.chars() {
            if is_word_char(c) {
                cur.push(c);
                continue;
            }
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            if !c.is_whitespace() {
                out.push(c.to_string());
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
        out
    }

    fn count(&self, text: &str) -> usize {
        let mut n = 0;
        let mut in_word = false;
        for c in text.chars() {
            if is_word_char(c) {
                if !in_word {
                    n += 1;
                    in_word = true;
                }
            } else {
                in_word = false;
                if !c.is_whitespace() {
                    n += 1;
                }
            }
        }
        n
    }
}

/// Lowercased, punctuation-free tokens. Punctuation acts as a separator, so
/// `foo.bar(x)` normalizes to `foo bar x`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenStream {
    tokens: Vec<String>,
}

impl TokenStream {
    pub fn normalize(text: &str) -> Self {
        let mut tokens = Vec::new();
        let mut cur = String::new();
        for c in text.chars() {
            if is_word_char(c) {
                cur.extend(c.to_lowercase());
            } else if !cur.is_empty() {
                tokens.push(std::mem::take(&mut cur));
            }
        }
        if !cur.is_empty() {
            tokens.push(cur);
        }
        TokenStream { tokens }
    }

    /// Normalize several segments as if they were one text separated by
    /// whitespace.
    pub fn normalize_all<'a>(parts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut tokens = Vec::new();
        for p in parts {
            tokens.extend(TokenStream::normalize(p).tokens);
        }
        TokenStream { tokens }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Contiguous `n`-token windows, each joined with a single space.
    pub fn ngrams(&self, n: usize) -> impl Iterator<Item = String> + '_ {
        assert!(n > 0, "n-gram size must be positive");
        self.tokens.windows(n).map(|w| w.join(" "))
    }
}

/// 64-bit FNV-1a. Stable across platforms and releases, unlike `DefaultHasher`.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// SplitMix64 finalizer; spreads FNV output before bucketing.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn punct_tokenizer_splits_symbols() {
        let t = PunctTokenizer;
        assert_eq!(t.tokenize("fn main() {x_1+=2;}"), vec![
            "fn", "main", "(", ")", "{", "x_1", "+", "=", "2", ";", "}"
        ]);
        assert_eq!(t.count("fn main() {x_1+=2;}"), 11);
        assert_eq!(t.count("   "), 0);
    }

    #[test]
    fn normalization_drops_case_and_punctuation() {
        let s = TokenStream::normalize("Hello, World!  foo.bar(X)");
        assert_eq!(s.tokens(), &["hello", "world", "foo", "bar", "x"]);
        assert!(s.tokens().iter().all(|t| !t.is_empty()));
    }

    #[test]
    fn whitespace_layout_does_not_matter() {
        assert_eq!(
            TokenStream::normalize("a  b\n\tc"),
            TokenStream::normalize("a b c")
        );
    }

    #[test]
    fn ngram_windows() {
        let s = TokenStream::normalize("a b c d");
        let grams: Vec<_> = s.ngrams(3).collect();
        assert_eq!(grams, vec!["a b c", "b c d"]);
        assert_eq!(s.ngrams(5).count(), 0);
    }

    #[test]
    fn fnv_known_vectors() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
    }
}
