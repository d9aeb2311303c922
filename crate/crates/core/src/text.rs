//! Word-level preprocessing and WordPiece subword tokenization.
//!
//! The vocabulary graph is built over subword tokens of cleaned text. The
//! pipeline here is `preprocess` (lowercase, strip punctuation, drop
//! stopwords) followed by [`wordpiece_tokenize`] against a fixed subword
//! vocabulary; continuation pieces carry the conventional `##` prefix and a
//! word with no valid segmentation becomes a single [`UNKNOWN_TOKEN`].

use std::collections::{BTreeSet, HashSet};

use thiserror::Error;

/// Placeholder for words the subword vocabulary cannot segment.
pub const UNKNOWN_TOKEN: &str = "[UNK]";

#[derive(Debug, Error, PartialEq)]
pub enum TextError {
    #[error("subword vocabulary does not contain {UNKNOWN_TOKEN}")]
    MissingUnknownToken,
    #[error("subword vocabulary line {line} is a duplicate of `{token}`")]
    DuplicateToken { line: usize, token: String },
}

/// How punctuation in a whitespace-delimited word is handled.
///
/// Edge stripping keeps interior hyphens and periods intact, which matters
/// for chemical spellings: naive punctuation removal would destroy a
/// measurement like `0.8-79`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum PunctuationPolicy {
    /// Strip leading and trailing non-alphanumeric characters.
    #[default]
    StripEdges,
    /// Leave words untouched.
    KeepAll,
}

/// Lowercases, applies the punctuation policy, and removes stopwords.
///
/// Words that become empty after stripping (pure punctuation) are dropped.
/// The stopword check runs on the cleaned lowercase form, so a list entry
/// `the` also removes `The,`.
pub fn preprocess(
    text: &str,
    stopwords: &BTreeSet<String>,
    policy: PunctuationPolicy,
) -> Vec<String> {
    text.split_whitespace()
        .map(str::to_lowercase)
        .map(|w| match policy {
            PunctuationPolicy::StripEdges => {
                w.trim_matches(|c: char| !c.is_alphanumeric()).to_string()
            }
            PunctuationPolicy::KeepAll => w,
        })
        .filter(|w| !w.is_empty() && !stopwords.contains(w))
        .collect()
}

/// Parses a stopword list: one word per line, lowercased, blank lines
/// ignored.
pub fn parse_stopwords(content: &str) -> BTreeSet<String> {
    content
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Fixed subword vocabulary for WordPiece segmentation. Continuation pieces
/// are stored with their `##` prefix.
#[derive(Debug, Clone)]
pub struct WordPieceVocab {
    tokens: HashSet<String>,
}

impl WordPieceVocab {
    /// Builds from one token per line; must include [`UNKNOWN_TOKEN`].
    pub fn parse(content: &str) -> Result<Self, TextError> {
        let mut tokens = HashSet::new();
        for (idx, line) in content.lines().enumerate() {
            let token = line.trim();
            if token.is_empty() {
                continue;
            }
            if !tokens.insert(token.to_string()) {
                return Err(TextError::DuplicateToken { line: idx + 1, token: token.into() });
            }
        }
        if !tokens.contains(UNKNOWN_TOKEN) {
            return Err(TextError::MissingUnknownToken);
        }
        Ok(WordPieceVocab { tokens })
    }

    pub fn from_tokens<I: IntoIterator<Item = S>, S: Into<String>>(
        iter: I,
    ) -> Result<Self, TextError> {
        let tokens: HashSet<String> = iter.into_iter().map(Into::into).collect();
        if !tokens.contains(UNKNOWN_TOKEN) {
            return Err(TextError::MissingUnknownToken);
        }
        Ok(WordPieceVocab { tokens })
    }

    pub fn contains(&self, token: &str) -> bool {
        self.tokens.contains(token)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Greedy longest-match-first subword segmentation.
///
/// Each word is consumed from the left, always taking the longest vocabulary
/// entry that matches the remaining prefix; pieces after the first must be
/// present in the vocabulary with their `##` prefix. A word with no valid
/// segmentation yields one [`UNKNOWN_TOKEN`] for the whole word, never a
/// partial split.
pub fn wordpiece_tokenize(words: &[String], vocab: &WordPieceVocab) -> Vec<String> {
    let mut out = Vec::with_capacity(words.len());
    for word in words {
        match split_word(word, vocab) {
            Some(mut pieces) => out.append(&mut pieces),
            None => out.push(UNKNOWN_TOKEN.to_string()),
        }
    }
    out
}

fn split_word(word: &str, vocab: &WordPieceVocab) -> Option<Vec<String>> {
    if word.is_empty() {
        return Some(Vec::new());
    }
    let chars: Vec<char> = word.chars().collect();
    let mut pieces = Vec::new();
    let mut start = 0;
    while start < chars.len() {
        let mut matched: Option<(usize, String)> = None;
        for end in (start + 1..=chars.len()).rev() {
            let body: String = chars[start..end].iter().collect();
            let candidate = if start == 0 { body } else { format!("##{body}") };
            if vocab.contains(&candidate) {
                matched = Some((end, candidate));
                break;
            }
        }
        let (end, piece) = matched?;
        pieces.push(piece);
        start = end;
    }
    Some(pieces)
}

/// Full text-to-token pipeline for one document.
pub fn tokenize_document(
    text: &str,
    stopwords: &BTreeSet<String>,
    policy: PunctuationPolicy,
    vocab: &WordPieceVocab,
) -> Vec<String> {
    wordpiece_tokenize(&preprocess(text, stopwords, policy), vocab)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stopwords(words: &[&str]) -> BTreeSet<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn preprocess_lowercases_strips_and_removes_stopwords() {
        let got = preprocess("The drug, aspirin, works.", &stopwords(&["the"]), PunctuationPolicy::StripEdges);
        assert_eq!(got, vec!["drug", "aspirin", "works"]);
    }

    #[test]
    fn preprocess_of_empty_text_is_empty() {
        assert_eq!(preprocess("", &BTreeSet::new(), PunctuationPolicy::StripEdges), Vec::<String>::new());
        assert_eq!(preprocess("  \t \n", &BTreeSet::new(), PunctuationPolicy::StripEdges), Vec::<String>::new());
    }

    #[test]
    fn edge_stripping_keeps_interior_punctuation() {
        let got = preprocess("IC50 of 0.8-79 nM", &BTreeSet::new(), PunctuationPolicy::StripEdges);
        assert_eq!(got, vec!["ic50", "of", "0.8-79", "nm"]);
    }

    #[test]
    fn pure_punctuation_words_are_dropped() {
        let got = preprocess("a -- b (c)", &BTreeSet::new(), PunctuationPolicy::StripEdges);
        assert_eq!(got, vec!["a", "b", "c"]);
    }

    #[test]
    fn keep_all_policy_preserves_punctuation() {
        let got = preprocess("works.", &BTreeSet::new(), PunctuationPolicy::KeepAll);
        assert_eq!(got, vec!["works."]);
    }

    #[test]
    fn stopword_file_parses_and_matches_after_cleaning() {
        let set = parse_stopwords("The\n\nof\n a \n");
        assert_eq!(set, stopwords(&["the", "of", "a"]));
        let got = preprocess("The fate of (a) drug", &set, PunctuationPolicy::StripEdges);
        assert_eq!(got, vec!["fate", "drug"]);
    }

    #[test]
    fn greedy_segmentation_prefers_longest_prefix() {
        let vocab = WordPieceVocab::from_tokens(["[UNK]", "x", "##yz", "xy", "##z"]).unwrap();
        // Longest first match is `xy`, then `##z`; `x` + `##yz` would need a
        // shorter first piece and greedy never backtracks to it.
        let got = wordpiece_tokenize(&["xyz".into()], &vocab);
        assert_eq!(got, vec!["xy", "##z"]);

        let vocab = WordPieceVocab::from_tokens(["[UNK]", "x", "##yz"]).unwrap();
        let got = wordpiece_tokenize(&["xyz".into()], &vocab);
        assert_eq!(got, vec!["x", "##yz"]);
    }

    #[test]
    fn whole_word_match_is_one_token() {
        let vocab = WordPieceVocab::from_tokens(["[UNK]", "aspirin", "asp", "##irin"]).unwrap();
        assert_eq!(wordpiece_tokenize(&["aspirin".into()], &vocab), vec!["aspirin"]);
    }

    #[test]
    fn unsegmentable_words_become_unknown_wholesale() {
        let vocab = WordPieceVocab::from_tokens(["[UNK]", "a", "##b"]).unwrap();
        // `abc` matches `a`, `##b`, then dead-ends on `c`: the whole word
        // falls back to the placeholder, not a partial split.
        assert_eq!(wordpiece_tokenize(&["abc".into()], &vocab), vec![UNKNOWN_TOKEN]);
        assert_eq!(wordpiece_tokenize(&["zzz".into()], &vocab), vec![UNKNOWN_TOKEN]);
    }

    #[test]
    fn vocabulary_requires_the_unknown_token() {
        assert_eq!(WordPieceVocab::parse("a\nb\n").unwrap_err(), TextError::MissingUnknownToken);
        let vocab = WordPieceVocab::parse("[UNK]\na\n##b\n\n").unwrap();
        assert_eq!(vocab.len(), 3);
        assert!(vocab.contains("##b"));
        assert_eq!(
            WordPieceVocab::parse("[UNK]\na\na\n").unwrap_err(),
            TextError::DuplicateToken { line: 3, token: "a".into() }
        );
    }

    #[test]
    fn pipeline_composes_preprocess_and_wordpiece() {
        let vocab =
            WordPieceVocab::from_tokens(["[UNK]", "aspirin", "inhibit", "##s", "cox"]).unwrap();
        let got = tokenize_document(
            "The Aspirin inhibits COX.",
            &stopwords(&["the"]),
            PunctuationPolicy::StripEdges,
            &vocab,
        );
        assert_eq!(got, vec!["aspirin", "inhibit", "##s", "cox"]);
    }
}
