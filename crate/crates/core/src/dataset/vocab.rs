//! Word vocabulary and fixed-length tokenization.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
/// Texts are cut to this many words.
pub const MAX_TOKENS: usize = 256;
/// Words must occur at least this often in the build corpus.
pub const DEFAULT_MIN_COUNT: usize = 3;

/// Lowercased whitespace-separated words with `;` `.` `,` removed.
pub fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace().filter_map(|w| {
        let cleaned: String = w.chars().filter(|c| !matches!(c, ';' | '.' | ',')).flat_map(char::to_lowercase).collect();
        (!cleaned.is_empty()).then_some(cleaned)
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabularyFile", into = "VocabularyFile")]
pub struct Vocabulary {
    words: Vec<String>,
    min_count: usize,
    index: HashMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyFile {
    min_count: usize,
    words: Vec<String>,
}

impl From<VocabularyFile> for Vocabulary {
    fn from(f: VocabularyFile) -> Self {
        Vocabulary::from_words(f.words, f.min_count)
    }
}

impl From<Vocabulary> for VocabularyFile {
    fn from(v: Vocabulary) -> Self {
        VocabularyFile { min_count: v.min_count, words: v.words }
    }
}

impl Vocabulary {
    /// Builds from an id-ordered word list (ids 0 and 1 must be the
    /// reserved tokens).
    fn from_words(words: Vec<String>, min_count: usize) -> Self {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
        Self { words, min_count, index }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        self.words.get(id as usize).map(String::as_str)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

/// Keeps words with count ≥ `min_count`; ids after PAD/UNK go by
/// descending count, then lexicographically.
pub fn build_vocabulary<S: AsRef<str>>(texts: &[S], min_count: usize) -> Vocabulary {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for t in texts {
        for w in words(t.as_ref()) {
            *counts.entry(w).or_default() += 1;
        }
    }
    let mut kept: Vec<(String, usize)> = counts.into_iter().filter(|(_, c)| *c >= min_count).collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut list = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
    list.extend(kept.into_iter().map(|(w, _)| w).filter(|w| w != PAD_TOKEN && w != UNK_TOKEN));
    Vocabulary::from_words(list, min_count)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    /// Exactly [`MAX_TOKENS`] ids, PAD after `true_length`.
    pub tokens: Vec<u32>,
    pub true_length: usize,
}

pub fn tokenize(text: &str, vocab: &Vocabulary) -> TokenSequence {
    let mut tokens: Vec<u32> = words(text).take(MAX_TOKENS).map(|w| vocab.id(&w).unwrap_or(UNK)).collect();
    let true_length = tokens.len();
    tokens.resize(MAX_TOKENS, PAD);
    TokenSequence { tokens, true_length }
}
