//! Tokenization and vocabulary. Text is lowercased and split on anything
//! that is not alphanumeric, `#`, or `@`, keeping hashtags and mentions
//! attached to their word. Ids 0 and 1 are reserved for padding and
//! unknown tokens; the rest are ordered by frequency (descending), ties
//! broken lexicographically, so construction is deterministic.

use std::collections::{BTreeMap, HashMap};

use super::corpus::TextCorpus;

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.to_lowercase().chars() {
        if ch.is_alphanumeric() || ch == '#' || ch == '@' {
            current.push(ch);
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

#[derive(Debug, Clone)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Counts tokens over the corpus and keeps those seen at least
    /// `min_freq` times.
    pub fn build(corpus: &TextCorpus, min_freq: usize) -> Vocab {
        assert!(min_freq >= 1, "min_freq must be at least 1");
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for ex in &corpus.examples {
            for tok in tokenize(&ex.text) {
                *counts.entry(tok).or_insert(0) += 1;
            }
        }
        let mut kept: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|&(_, n)| n >= min_freq)
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

        let mut tokens = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        tokens.extend(kept.into_iter().map(|(t, _)| t));
        Self::from_tokens(tokens)
    }

    /// Rebuilds a vocabulary from its token list (checkpoint loading).
    /// The list must start with the two reserved tokens.
    pub fn from_tokens(tokens: Vec<String>) -> Vocab {
        assert!(
            tokens.len() >= 2 && tokens[PAD_ID] == PAD_TOKEN && tokens[UNK_ID] == UNK_TOKEN,
            "token list must start with the reserved pad/unk entries"
        );
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocab { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    /// Id of a token, or [`UNK_ID`] when below the frequency threshold or
    /// unseen.
    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    /// Tokenizes, maps to ids, and truncates to `max_len`.
    pub fn encode(&self, text: &str, max_len: usize) -> Vec<usize> {
        tokenize(text)
            .into_iter()
            .take(max_len)
            .map(|t| self.id(&t))
            .collect()
    }
}
