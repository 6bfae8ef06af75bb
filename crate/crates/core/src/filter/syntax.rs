//! Structural parsers that recover syntax-tree depth without full grammars.
//!
//! Depth convention: the root is level 1, a top-level statement or
//! expression is level 2, and every enclosing block, indented suite or
//! bracket group adds one level to what it contains. An empty source has
//! depth 1.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::types::Language;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("parse error: {0}")]
pub struct ParseError(pub String);

pub trait SyntaxParser: Send + Sync {
    fn max_depth(&self, source: &str) -> Result<usize, ParseError>;
}

fn closer_for(open: char) -> char {
    match open {
        '(' => ')',
        '[' => ']',
        _ => '}',
    }
}

/// Bracket stack shared by all three parser families.
#[derive(Default)]
struct Brackets {
    stack: Vec<char>,
}

impl Brackets {
    /// Returns false when `c` was a bracket that did not match.
    fn feed(&mut self, c: char) -> Result<bool, ParseError> {
        match c {
            '(' | '[' | '{' => {
                self.stack.push(c);
                Ok(true)
            }
            ')' | ']' | '}' => match self.stack.pop() {
                Some(open) if closer_for(open) == c => Ok(true),
                Some(open) => Err(ParseError(format!("expected {:?}, found {c:?}", closer_for(open)))),
                None => Err(ParseError(format!("unmatched {c:?}"))),
            },
            _ => Ok(false),
        }
    }

    fn len(&self) -> usize {
        self.stack.len()
    }

    fn finish(&self) -> Result<(), ParseError> {
        match self.stack.last() {
            Some(open) => Err(ParseError(format!("unclosed {open:?}"))),
            None => Ok(()),
        }
    }
}

/// C-family lexical conventions.
#[derive(Debug, Clone, Copy)]
pub struct BraceSyntax {
    /// Backtick-delimited strings (Go raw strings, JS template literals).
    pub backtick_strings: bool,
    /// C# `@"..."` verbatim strings.
    pub verbatim_strings: bool,
    /// C++ `R"delim(...)delim"` raw strings.
    pub raw_strings: bool,
}

impl BraceSyntax {
    pub const C: BraceSyntax = BraceSyntax { backtick_strings: false, verbatim_strings: false, raw_strings: false };
    pub const CPP: BraceSyntax = BraceSyntax { raw_strings: true, ..BraceSyntax::C };
    pub const CSHARP: BraceSyntax = BraceSyntax { verbatim_strings: true, ..BraceSyntax::C };
    pub const GO: BraceSyntax = BraceSyntax { backtick_strings: true, ..BraceSyntax::C };
    pub const JAVA: BraceSyntax = BraceSyntax::C;
    pub const JS: BraceSyntax = BraceSyntax::GO;
}

/// Skip a quoted literal starting at `i` (the opening quote). Returns the
/// index after the closing quote.
fn skip_quoted(chars: &[char], i: usize, quote: char, escapes: bool) -> Result<usize, ParseError> {
    let mut j = i + 1;
    while j < chars.len() {
        let c = chars[j];
        if escapes && c == '\\' {
            j += 2;
            continue;
        }
        if c == quote {
            return Ok(j + 1);
        }
        if c == '\n' && quote != '`' {
            return Err(ParseError("unterminated string".into()));
        }
        j += 1;
    }
    Err(ParseError("unterminated string".into()))
}

fn find_seq(chars: &[char], from: usize, pat: &[char]) -> Option<usize> {
    (from..=chars.len().saturating_sub(pat.len())).find(|&k| chars[k..].starts_with(pat))
}

fn is_ident(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

impl SyntaxParser for BraceSyntax {
    fn max_depth(&self, source: &str) -> Result<usize, ParseError> {
        let chars: Vec<char> = source.chars().collect();
        let mut br = Brackets::default();
        let mut depth = 1;
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let next = chars.get(i + 1).copied();
            let prev_ident = i > 0 && is_ident(chars[i - 1]);
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if c == '/' && next == Some('/') {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                continue;
            }
            if c == '/' && next == Some('*') {
                let end = find_seq(&chars, i + 2, &['*', '/'])
                    .ok_or_else(|| ParseError("unterminated comment".into()))?;
                i = end + 2;
                continue;
            }
            // Closing brackets sit at the level of the construct they end.
            if matches!(c, ')' | ']' | '}') {
                br.feed(c)?;
                i += 1;
                continue;
            }
            depth = depth.max(2 + br.len());
            if br.feed(c)? {
                i += 1;
                continue;
            }
            i = if self.verbatim_strings && c == '@' && next == Some('"') {
                let mut j = i + 2;
                loop {
                    match chars.get(j) {
                        None => return Err(ParseError("unterminated string".into())),
                        Some('"') if chars.get(j + 1) == Some(&'"') => j += 2,
                        Some('"') => break j + 1,
                        Some(_) => j += 1,
                    }
                }
            } else if self.raw_strings && c == 'R' && next == Some('"') && !prev_ident {
                let open = find_seq(&chars, i + 2, &['('])
                    .ok_or_else(|| ParseError("bad raw string".into()))?;
                let mut close = vec![')'];
                close.extend(&chars[i + 2..open]);
                close.push('"');
                let end = find_seq(&chars, open + 1, &close)
                    .ok_or_else(|| ParseError("unterminated string".into()))?;
                end + close.len()
            } else if c == '"' || c == '\'' {
                skip_quoted(&chars, i, c, true)?
            } else if self.backtick_strings && c == '`' {
                skip_quoted(&chars, i, '`', false)?
            } else {
                i + 1
            };
        }
        br.finish()?;
        Ok(depth)
    }
}

/// Indentation-structured source (Python).
#[derive(Debug, Clone, Copy, Default)]
pub struct IndentSyntax;

fn indent_width(line: &str) -> usize {
    let mut w = 0;
    for c in line.chars() {
        match c {
            ' ' => w += 1,
            '\t' => w = (w / 8 + 1) * 8,
            _ => break,
        }
    }
    w
}

impl SyntaxParser for IndentSyntax {
    fn max_depth(&self, source: &str) -> Result<usize, ParseError> {
        let chars: Vec<char> = source.chars().collect();
        let mut br = Brackets::default();
        let mut indents: Vec<usize> = Vec::new();
        let mut depth = 1;
        let mut i = 0;
        let mut at_line_start = true;
        let mut continued = false;
        let mut opens_suite = false;
        while i < chars.len() {
            if at_line_start && br.len() == 0 && !continued {
                let line_end = chars[i..].iter().position(|c| *c == '\n').map_or(chars.len(), |p| i + p);
                let line: String = chars[i..line_end].iter().collect();
                let body = line.trim_start();
                if body.is_empty() || body.starts_with('#') {
                    i = line_end + 1;
                    continue;
                }
                let w = indent_width(&line);
                match indents.last().copied() {
                    None => indents.push(w),
                    Some(top) if w > top => {
                        if !opens_suite {
                            return Err(ParseError("unexpected indent".into()));
                        }
                        indents.push(w);
                    }
                    Some(top) => {
                        if opens_suite {
                            return Err(ParseError("expected an indented block".into()));
                        }
                        if w < top {
                            while indents.last().is_some_and(|t| *t > w) {
                                indents.pop();
                            }
                            if indents.last() != Some(&w) {
                                return Err(ParseError("unindent does not match any outer level".into()));
                            }
                        }
                    }
                }
                opens_suite = false;
                i += line.len() - body.len();
            }
            at_line_start = false;
            let c = chars[i];
            if c == '\n' {
                at_line_start = true;
                i += 1;
                continue;
            }
            if c == '\\' && chars.get(i + 1) == Some(&'\n') {
                continued = true;
                i += 2;
                at_line_start = true;
                continue;
            }
            continued = false;
            if c == '#' {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                continue;
            }
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if c == ':' && br.len() == 0 {
                let rest: String = chars[i + 1..].iter().take_while(|c| **c != '\n').collect();
                let rest = rest.trim();
                opens_suite = rest.is_empty() || rest.starts_with('#');
            } else if br.len() == 0 {
                opens_suite = false;
            }
            if matches!(c, ')' | ']' | '}') {
                br.feed(c)?;
                i += 1;
                continue;
            }
            depth = depth.max(1 + indents.len() + br.len());
            if br.feed(c)? {
                i += 1;
                continue;
            }
            i = if c == '"' || c == '\'' {
                if chars.get(i + 1) == Some(&c) && chars.get(i + 2) == Some(&c) {
                    let delim = [c, c, c];
                    let mut j = i + 3;
                    loop {
                        if j >= chars.len() {
                            return Err(ParseError("unterminated string".into()));
                        }
                        if chars[j] == '\\' {
                            j += 2;
                        } else if chars[j..].starts_with(&delim) {
                            break j + 3;
                        } else {
                            j += 1;
                        }
                    }
                } else {
                    skip_quoted(&chars, i, c, true)?
                }
            } else {
                i + 1
            };
        }
        br.finish()?;
        if opens_suite {
            return Err(ParseError("expected an indented block".into()));
        }
        Ok(depth)
    }
}

/// `keyword ... end` structured source (Ruby).
#[derive(Debug, Clone, Copy, Default)]
pub struct KeywordEndSyntax;

const ALWAYS_OPEN: &[&str] = &["def", "class", "module", "begin", "case"];
const STATEMENT_OPEN: &[&str] = &["if", "unless", "while", "until", "for"];
const LOOP_OPEN: &[&str] = &["while", "until", "for"];

impl SyntaxParser for KeywordEndSyntax {
    fn max_depth(&self, source: &str) -> Result<usize, ParseError> {
        let chars: Vec<char> = source.chars().collect();
        let mut br = Brackets::default();
        let mut blocks = 0usize;
        let mut depth = 1;
        let mut i = 0;
        // True while no token has been seen in the current statement.
        let mut stmt_start = true;
        // A loop header on this line absorbs one optional `do`.
        let mut loop_header = false;
        let mut at_line_start = true;
        while i < chars.len() {
            let c = chars[i];
            if at_line_start && chars[i..].starts_with(&['=', 'b', 'e', 'g', 'i', 'n']) {
                let end = (i..chars.len())
                    .find(|&k| (k == 0 || chars[k - 1] == '\n') && chars[k..].starts_with(&['=', 'e', 'n', 'd']))
                    .ok_or_else(|| ParseError("unterminated =begin".into()))?;
                i = end + 4;
                continue;
            }
            at_line_start = false;
            if c == '\n' || c == ';' {
                stmt_start = true;
                if c == '\n' {
                    loop_header = false;
                    at_line_start = true;
                }
                i += 1;
                continue;
            }
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if c == '#' {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                continue;
            }
            if matches!(c, ')' | ']' | '}') {
                br.feed(c)?;
                stmt_start = false;
                i += 1;
                continue;
            }
            if is_ident(c) && !c.is_ascii_digit() {
                let start = i;
                while i < chars.len() && is_ident(chars[i]) {
                    i += 1;
                }
                if matches!(chars.get(i), Some('?' | '!')) {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                let prev = start.checked_sub(1).map(|k| chars[k]);
                let is_call = matches!(prev, Some('.' | ':' | '@' | '$'));
                let is_key = chars.get(i) == Some(&':') && chars.get(i + 1) != Some(&':');
                let keyword = !is_call && !is_key;
                if keyword && word == "end" {
                    if blocks == 0 {
                        return Err(ParseError("unmatched `end`".into()));
                    }
                    blocks -= 1;
                    depth = depth.max(2 + blocks + br.len());
                    stmt_start = false;
                    continue;
                }
                depth = depth.max(2 + blocks + br.len());
                if keyword {
                    let w = word.as_str();
                    let opens = ALWAYS_OPEN.contains(&w)
                        || (STATEMENT_OPEN.contains(&w) && stmt_start)
                        || (w == "do" && !std::mem::take(&mut loop_header));
                    if opens {
                        blocks += 1;
                        if LOOP_OPEN.contains(&w) {
                            loop_header = true;
                        }
                    }
                }
                // Assignments and operators start a fresh expression, so a
                // following `if` opens a block.
                stmt_start = false;
                continue;
            }
            depth = depth.max(2 + blocks + br.len());
            if br.feed(c)? {
                stmt_start = true;
                i += 1;
                continue;
            }
            i = if c == '"' || c == '\'' || c == '`' {
                skip_quoted(&chars, i, c, true)?
            } else {
                i + 1
            };
            stmt_start = matches!(c, '=' | '|' | '&' | ',');
        }
        br.finish()?;
        if blocks > 0 {
            return Err(ParseError("missing `end`".into()));
        }
        Ok(depth)
    }
}

/// Parsers keyed by language. Languages absent from the registry cannot be
/// depth-gated.
pub struct SyntaxRegistry {
    parsers: BTreeMap<Language, Box<dyn SyntaxParser>>,
}

impl SyntaxRegistry {
    pub fn empty() -> Self {
        SyntaxRegistry { parsers: BTreeMap::new() }
    }

    pub fn register(&mut self, lang: Language, parser: Box<dyn SyntaxParser>) {
        self.parsers.insert(lang, parser);
    }

    pub fn get(&self, lang: Language) -> Option<&dyn SyntaxParser> {
        self.parsers.get(&lang).map(|p| p.as_ref())
    }
}

impl Default for SyntaxRegistry {
    fn default() -> Self {
        let mut r = SyntaxRegistry::empty();
        r.register(Language::C, Box::new(BraceSyntax::C));
        r.register(Language::Cpp, Box::new(BraceSyntax::CPP));
        r.register(Language::CSharp, Box::new(BraceSyntax::CSHARP));
        r.register(Language::Go, Box::new(BraceSyntax::GO));
        r.register(Language::Java, Box::new(BraceSyntax::JAVA));
        r.register(Language::JavaScript, Box::new(BraceSyntax::JS));
        r.register(Language::Python, Box::new(IndentSyntax));
        r.register(Language::Ruby, Box::new(KeywordEndSyntax));
        r
    }
}
