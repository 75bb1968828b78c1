//! Token accounting: a byte-length approximation and an exact byte-level BPE.

use super::CorpusError;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum TokenCounterConfig {
    /// `ceil(bytes / 4)`.
    #[default]
    Approximate,
    /// Exact segmentation under a merges file.
    Bpe { vocab_path: PathBuf },
}

impl fmt::Display for TokenCounterConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenCounterConfig::Approximate => f.write_str("approximate"),
            TokenCounterConfig::Bpe { vocab_path } => write!(f, "bpe:{}", vocab_path.display()),
        }
    }
}

impl std::str::FromStr for TokenCounterConfig {
    type Err = String;

    /// Parses `approximate` or `bpe:<path>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "approximate" => Ok(TokenCounterConfig::Approximate),
            _ => match s.strip_prefix("bpe:") {
                Some(path) if !path.is_empty() => Ok(TokenCounterConfig::Bpe {
                    vocab_path: PathBuf::from(path),
                }),
                _ => Err(format!(
                    "unknown tokenizer {s:?}; expected `approximate` or `bpe:<merges file>`"
                )),
            },
        }
    }
}

#[derive(Debug, Clone)]
enum Mode {
    Approximate,
    Bpe(Arc<BpeModel>),
}

/// A loaded counter. Cheap to clone.
#[derive(Debug, Clone)]
pub struct TokenCounter {
    mode: Mode,
    config: TokenCounterConfig,
}

impl Default for TokenCounter {
    fn default() -> Self {
        TokenCounter::approximate()
    }
}

impl TokenCounter {
    pub fn approximate() -> Self {
        TokenCounter {
            mode: Mode::Approximate,
            config: TokenCounterConfig::Approximate,
        }
    }

    pub fn from_config(config: &TokenCounterConfig) -> Result<Self, CorpusError> {
        match config {
            TokenCounterConfig::Approximate => Ok(TokenCounter::approximate()),
            TokenCounterConfig::Bpe { vocab_path } => Ok(TokenCounter {
                mode: Mode::Bpe(Arc::new(BpeModel::load(vocab_path)?)),
                config: config.clone(),
            }),
        }
    }

    pub fn with_model(model: BpeModel, vocab_path: PathBuf) -> Self {
        TokenCounter {
            mode: Mode::Bpe(Arc::new(model)),
            config: TokenCounterConfig::Bpe { vocab_path },
        }
    }

    pub fn config(&self) -> &TokenCounterConfig {
        &self.config
    }

    pub fn count(&self, text: &str) -> usize {
        match &self.mode {
            Mode::Approximate => text.len().div_ceil(4),
            Mode::Bpe(model) => model.count(text),
        }
    }
}

pub fn count_tokens(text: &str, counter: &TokenCounter) -> usize {
    counter.count(text)
}

/// GPT-2 style byte-level BPE driven by a ranked merges list.
///
/// The merges file holds one `left right` pair per line, highest priority
/// first; an optional leading `#version` line is ignored. Symbols are written
/// in the printable byte alphabet, so a leading space shows up as `Ġ`.
#[derive(Debug, Clone)]
pub struct BpeModel {
    ranks: HashMap<(String, String), usize>,
    byte_symbols: Vec<String>,
}

impl BpeModel {
    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let bytes = std::fs::read(path).map_err(|e| {
            CorpusError::TokenCounter(format!("cannot read {}: {e}", path.display()))
        })?;
        let text = String::from_utf8(bytes).map_err(|_| {
            CorpusError::TokenCounter(format!("{} is not valid UTF-8", path.display()))
        })?;
        Self::parse(&text)
            .map_err(|msg| CorpusError::TokenCounter(format!("{}: {msg}", path.display())))
    }

    pub fn parse(merges: &str) -> Result<Self, String> {
        let mut ranks = HashMap::new();
        for (i, line) in merges.lines().enumerate() {
            if (i == 0 && line.starts_with("#version")) || line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(' ');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(l), Some(r), None) if !l.is_empty() && !r.is_empty() => {
                    let rank = ranks.len();
                    ranks.entry((l.to_string(), r.to_string())).or_insert(rank);
                }
                _ => return Err(format!("corrupt merges entry on line {}: {line:?}", i + 1)),
            }
        }
        Ok(BpeModel {
            ranks,
            byte_symbols: byte_alphabet(),
        })
    }

    pub fn merge_count(&self) -> usize {
        self.ranks.len()
    }

    pub fn count(&self, text: &str) -> usize {
        pretokenize(text)
            .into_iter()
            .map(|piece| self.encode_piece(piece).len())
            .sum()
    }

    /// Final symbols for the whole text.
    pub fn encode(&self, text: &str) -> Vec<String> {
        pretokenize(text)
            .into_iter()
            .flat_map(|piece| self.encode_piece(piece))
            .collect()
    }

    fn encode_piece(&self, piece: &str) -> Vec<String> {
        let mut symbols: Vec<String> = piece
            .bytes()
            .map(|b| self.byte_symbols[b as usize].clone())
            .collect();
        while symbols.len() > 1 {
            let best = symbols
                .windows(2)
                .filter_map(|w| self.ranks.get(&(w[0].clone(), w[1].clone())))
                .min()
                .copied();
            let Some(best) = best else { break };
            let mut merged = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len()
                    && self
                        .ranks
                        .get(&(symbols[i].clone(), symbols[i + 1].clone()))
                        == Some(&best)
                {
                    merged.push(format!("{}{}", symbols[i], symbols[i + 1]));
                    i += 2;
                } else {
                    merged.push(std::mem::take(&mut symbols[i]));
                    i += 1;
                }
            }
            symbols = merged;
        }
        symbols
    }
}

/// The reversible byte → printable character table used by GPT-2.
fn byte_alphabet() -> Vec<String> {
    let printable = |b: u32| {
        (b'!' as u32..=b'~' as u32).contains(&b)
            || (0xA1..=0xAC).contains(&b)
            || (0xAE..=0xFF).contains(&b)
    };
    let mut table = vec![String::new(); 256];
    let mut next = 0u32;
    for b in 0u32..256 {
        let c = if printable(b) {
            b
        } else {
            next += 1;
            255 + next
        };
        table[b as usize] = char::from_u32(c).expect("valid code point").to_string();
    }
    table
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Class {
    Letter,
    Number,
    Space,
    Other,
}

fn class_of(c: char) -> Class {
    if c.is_alphabetic() {
        Class::Letter
    } else if c.is_numeric() {
        Class::Number
    } else if c.is_whitespace() {
        Class::Space
    } else {
        Class::Other
    }
}

/// Splits text the way GPT-2's pre-tokenizer does: contractions, optionally
/// space-prefixed runs of letters, digits or punctuation, and whitespace runs
/// that leave their last character to the following word.
fn pretokenize(text: &str) -> Vec<&str> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let end_of = |i: usize| chars.get(i).map_or(text.len(), |&(b, _)| b);
    let mut pieces = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let start = chars[i].0;
        let c = chars[i].1;

        if c == '\'' {
            let rest = &text[start + 1..];
            let len = ["s", "t", "re", "ve", "m", "ll", "d"]
                .iter()
                .find(|suffix| rest.starts_with(**suffix))
                .map(|s| s.len());
            if let Some(len) = len {
                let stop = start + 1 + len;
                pieces.push(&text[start..stop]);
                while i < chars.len() && chars[i].0 < stop {
                    i += 1;
                }
                continue;
            }
        }

        let (body_start, body_class) = if c == ' ' {
            match chars.get(i + 1).map(|&(_, n)| class_of(n)) {
                Some(cls) if cls != Class::Space => (i + 1, cls),
                _ => (i, Class::Space),
            }
        } else {
            (i, class_of(c))
        };

        if body_class != Class::Space {
            let mut j = body_start;
            while j < chars.len() && class_of(chars[j].1) == body_class {
                j += 1;
            }
            pieces.push(&text[start..end_of(j)]);
            i = j;
            continue;
        }

        let mut j = i;
        while j < chars.len() && class_of(chars[j].1) == Class::Space {
            j += 1;
        }
        if j < chars.len() && j - i > 1 {
            j -= 1;
        }
        pieces.push(&text[start..end_of(j)]);
        i = j;
    }
    pieces
}
