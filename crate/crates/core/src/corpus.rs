//! Tokenization, vocabularies and document encoding.
//!
//! A vocabulary entry is either a word or an n-gram of words joined by
//! [`NGRAM_SEP`]. The tokenizer splits on whitespace, so no word it emits can
//! ever contain the separator.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};

/// Joins the words of an n-gram entry.
pub const NGRAM_SEP: char = ' ';

/// Lowercases `text`, splits it on whitespace and isolates punctuation runs.
///
/// A punctuation run is a maximal sequence of non-alphanumeric characters
/// inside a whitespace-delimited chunk, so `"plot:)"` yields `plot` and `:)`.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let lower = chunk.to_lowercase();
        let mut current = String::new();
        let mut current_is_word = None;
        for ch in lower.chars() {
            let is_word = ch.is_alphanumeric();
            if current_is_word.is_some_and(|w| w != is_word) {
                out.push(std::mem::take(&mut current));
            }
            current.push(ch);
            current_is_word = Some(is_word);
        }
        if !current.is_empty() {
            out.push(current);
        }
    }
    out
}

/// Bidirectional token/id map with corpus frequencies.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    entries: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
    ngram_max: usize,
}

impl Vocabulary {
    /// Builds a vocabulary from explicit entries, in the given id order.
    pub fn from_entries(entries: Vec<String>, counts: Vec<u64>, ngram_max: usize) -> Result<Self> {
        if entries.len() != counts.len() {
            return Err(Error::dim("vocabulary counts", entries.len(), counts.len()));
        }
        if ngram_max == 0 {
            return Err(Error::InvalidArgument("ngram_max must be >= 1".into()));
        }
        let mut index = HashMap::with_capacity(entries.len());
        for (id, tok) in entries.iter().enumerate() {
            if tok.is_empty() || tok.contains(['\t', '\n', '\r']) {
                return Err(Error::InvalidArgument(format!("invalid vocabulary token {tok:?}")));
            }
            if index.insert(tok.clone(), id as u32).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate vocabulary token {tok:?}")));
            }
        }
        Ok(Vocabulary {
            entries,
            counts,
            index,
            ngram_max,
        })
    }

    /// Convenience for tests and fixtures: every entry gets count 1.
    pub fn from_tokens<S: AsRef<str>>(tokens: &[S]) -> Result<Self> {
        let entries: Vec<String> = tokens.iter().map(|t| t.as_ref().to_string()).collect();
        let ngram_max = entries.iter().map(|e| e.split(NGRAM_SEP).count()).max().unwrap_or(1);
        let counts = vec![1; entries.len()];
        Self::from_entries(entries, counts, ngram_max)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.entries.get(id as usize).map(String::as_str)
    }

    pub fn count(&self, id: u32) -> Option<u64> {
        self.counts.get(id as usize).copied()
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn ngram_max(&self) -> usize {
        self.ngram_max
    }

    /// Looks up the n-gram formed by the given word ids.
    pub fn ngram_id(&self, word_ids: &[u32]) -> Option<u32> {
        match word_ids {
            [] => None,
            [single] => (*single < self.len() as u32).then_some(*single),
            _ => {
                let mut key = String::new();
                for (i, &w) in word_ids.iter().enumerate() {
                    if i > 0 {
                        key.push(NGRAM_SEP);
                    }
                    key.push_str(self.token(w)?);
                }
                self.id(&key)
            }
        }
    }

    /// Keeps the first `max_size` entries.
    pub fn truncated(&self, max_size: usize) -> Vocabulary {
        let keep = max_size.min(self.len());
        Self::from_entries(
            self.entries[..keep].to_vec(),
            self.counts[..keep].to_vec(),
            self.ngram_max,
        )
        .expect("prefix of a valid vocabulary is valid")
    }

    /// Keeps only single-word entries, preserving order.
    pub fn unigrams(&self) -> Vocabulary {
        let (entries, counts): (Vec<_>, Vec<_>) = self
            .entries
            .iter()
            .zip(&self.counts)
            .filter(|(e, _)| !e.contains(NGRAM_SEP))
            .map(|(e, c)| (e.clone(), *c))
            .unzip();
        Self::from_entries(entries, counts, 1).expect("subset of a valid vocabulary is valid")
    }
}

/// Counts all 1..=n-grams and keeps the `max_size` most frequent ones with
/// frequency at least `min_count`. Ties are broken by token order so the
/// result is reproducible.
pub fn build_vocab<D, S>(docs: &[D], max_size: usize, min_count: u64, n: usize) -> Result<Vocabulary>
where
    D: AsRef<[S]>,
    S: AsRef<str>,
{
    if max_size == 0 || min_count == 0 || n == 0 {
        return Err(Error::InvalidArgument(
            "build_vocab requires max_size, min_count and n to be >= 1".into(),
        ));
    }
    let mut freq: HashMap<String, u64> = HashMap::new();
    for doc in docs {
        let words = doc.as_ref();
        for len in 1..=n {
            for window in words.windows(len) {
                let mut key = String::new();
                for (i, w) in window.iter().enumerate() {
                    if i > 0 {
                        key.push(NGRAM_SEP);
                    }
                    key.push_str(w.as_ref());
                }
                *freq.entry(key).or_insert(0) += 1;
            }
        }
    }
    let mut ranked: Vec<(String, u64)> = freq.into_iter().filter(|(_, c)| *c >= min_count).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(max_size);
    let (entries, counts) = ranked.into_iter().unzip();
    Vocabulary::from_entries(entries, counts, n)
}

/// A document as a sequence of vocabulary ids; `None` marks an out-of-vocabulary word.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSeq {
    pub ids: Vec<Option<u32>>,
}

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Id at a (possibly virtual) position; pad and OOV positions give `None`.
    pub fn get(&self, pos: isize) -> Option<u32> {
        if pos < 0 {
            return None;
        }
        self.ids.get(pos as usize).copied().flatten()
    }

    /// Largest in-vocabulary id, used to check a document against a vocabulary.
    pub fn max_id(&self) -> Option<u32> {
        self.ids.iter().flatten().copied().max()
    }
}

pub fn encode<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> TokenSeq {
    TokenSeq {
        ids: tokens.iter().map(|t| vocab.id(t.as_ref())).collect(),
    }
}

/// Removes stoplisted tokens and re-densifies ids. Used on the target side
/// only; the input vocabulary is left untouched.
pub fn vocab_control(vocab: &Vocabulary, stoplist: &HashSet<String>) -> Vocabulary {
    let (entries, counts): (Vec<_>, Vec<_>) = vocab
        .entries
        .iter()
        .zip(&vocab.counts)
        .filter(|(e, _)| !stoplist.contains(*e))
        .map(|(e, c)| (e.clone(), *c))
        .unzip();
    Vocabulary::from_entries(entries, counts, vocab.ngram_max).expect("subset of a valid vocabulary is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &[&str]) -> Vec<String> {
        s.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn tokenize_isolates_punctuation_runs() {
        assert_eq!(
            tokenize("good acting, fun plot :)"),
            toks(&["good", "acting", ",", "fun", "plot", ":)"])
        );
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("Love it"), toks(&["love", "it"]));
        assert_eq!(tokenize("  wow!!!great "), toks(&["wow", "!!!", "great"]));
    }

    #[test]
    fn build_vocab_counts_and_truncates() {
        let docs = vec![toks(&["a", "b", "a"])];
        let v = build_vocab(&docs, 10, 1, 1).unwrap();
        assert_eq!(v.entries(), &toks(&["a", "b"])[..]);
        assert_eq!(v.counts(), &[2, 1]);

        let v = build_vocab(&docs, 1, 1, 1).unwrap();
        assert_eq!(v.entries(), &toks(&["a"])[..]);
    }

    #[test]
    fn build_vocab_bigrams() {
        let docs = vec![toks(&["a", "b"]), toks(&["a", "b"])];
        let v = build_vocab(&docs, 10, 2, 2).unwrap();
        assert_eq!(v.entries(), &toks(&["a", "a b", "b"])[..]);
        assert!(v.counts().iter().all(|&c| c == 2));
        assert_eq!(v.ngram_id(&[0, 2]), Some(1));
    }

    #[test]
    fn build_vocab_rejects_bad_params_and_accepts_empty_corpus() {
        let empty: Vec<Vec<String>> = vec![];
        assert!(build_vocab(&empty, 10, 1, 1).unwrap().is_empty());
        assert!(build_vocab(&empty, 0, 1, 1).is_err());
        assert!(build_vocab(&empty, 1, 0, 1).is_err());
        assert!(build_vocab(&empty, 1, 1, 0).is_err());
    }

    #[test]
    fn encode_maps_oov_to_none() {
        let v = Vocabulary::from_tokens(&["i", "it", "love"]).unwrap();
        assert_eq!(encode(&["love", "it"], &v).ids, vec![Some(2), Some(1)]);
        assert_eq!(encode(&["zzz"], &v).ids, vec![None]);
        assert!(encode::<&str>(&[], &v).is_empty());
    }

    #[test]
    fn vocab_control_removes_and_redensifies() {
        let v = Vocabulary::from_tokens(&["the", "fun", "plot"]).unwrap();
        let stop: HashSet<String> = ["the".to_string()].into();
        let c = vocab_control(&v, &stop);
        assert_eq!(c.entries(), &toks(&["fun", "plot"])[..]);
        assert_eq!(c.id("fun"), Some(0));
        assert_eq!(c.id("plot"), Some(1));
        // input untouched
        assert_eq!(v.len(), 3);

        assert_eq!(vocab_control(&v, &HashSet::new()), v);

        let v2 = Vocabulary::from_tokens(&["a", "b"]).unwrap();
        let all: HashSet<String> = ["a".to_string(), "b".to_string()].into();
        assert!(vocab_control(&v2, &all).is_empty());
    }

    proptest! {
        #[test]
        fn vocab_is_deterministic_and_dense(
            docs in prop::collection::vec(prop::collection::vec("[a-e]{1,2}", 0..12), 0..6),
            max in 1usize..20,
            n in 1usize..3,
        ) {
            let a = build_vocab(&docs, max, 1, n).unwrap();
            let b = build_vocab(&docs, max, 1, n).unwrap();
            prop_assert_eq!(&a, &b);
            for (id, tok) in a.entries().iter().enumerate() {
                prop_assert_eq!(a.id(tok), Some(id as u32));
            }
            for w in a.counts().windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
            for doc in &docs {
                let seq = encode(doc, &a);
                prop_assert_eq!(seq.len(), doc.len());
                prop_assert!(seq.ids.iter().flatten().all(|&id| (id as usize) < a.len()));
            }
        }

        #[test]
        fn vocab_control_size(
            toks in prop::collection::btree_set("[a-f]", 0..6),
            stop in prop::collection::btree_set("[a-h]", 0..6),
        ) {
            let toks: Vec<String> = toks.into_iter().collect();
            let v = Vocabulary::from_tokens(&toks).unwrap();
            let stop: HashSet<String> = stop.into_iter().collect();
            let hit = toks.iter().filter(|t| stop.contains(*t)).count();
            prop_assert_eq!(vocab_control(&v, &stop).len(), v.len() - hit);
        }
    }
}
