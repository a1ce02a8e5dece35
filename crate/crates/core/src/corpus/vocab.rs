use crate::{Error, Result};
use std::collections::{BTreeMap, HashMap};
use std::path::Path;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const BOS: usize = 2;
pub const EOS: usize = 3;

/// Surface strings of the reserved ids, in id order.
pub const RESERVED: [&str; 4] = ["<pad>", "<unk>", "<s>", "</s>"];

/// Word ↔ id map. Ids 0..4 are always [`RESERVED`]; every other word
/// appears exactly once.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Reserved tokens followed by `words` in the given order. Duplicates
    /// and reserved strings in `words` are ignored.
    pub fn from_words<S: AsRef<str>>(words: &[S]) -> Self {
        let mut vocab = Vocabulary {
            words: Vec::new(),
            index: HashMap::new(),
        };
        for w in RESERVED.iter().copied().chain(words.iter().map(|w| w.as_ref())) {
            if !vocab.index.contains_key(w) {
                vocab.index.insert(w.to_string(), vocab.words.len());
                vocab.words.push(w.to_string());
            }
        }
        vocab
    }

    /// Frequency-built vocabulary. Words seen fewer than `min_count` times
    /// are left out, then the `max_size` most frequent survive, ties broken
    /// lexicographically.
    pub fn build<'a, I>(sentences: I, min_count: usize, max_size: Option<usize>) -> Self
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for sentence in sentences {
            for w in sentence {
                *counts.entry(w.as_str()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(w, c)| c >= min_count.max(1) && !RESERVED.contains(&w))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        if let Some(max) = max_size {
            ranked.truncate(max);
        }
        let words: Vec<&str> = ranked.into_iter().map(|(w, _)| w).collect();
        Vocabulary::from_words(&words)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    /// Always false: the reserved ids are present.
    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Id of `word`, or [`UNK`].
    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn word(&self, id: usize) -> Option<&str> {
        self.words.get(id).map(String::as_str)
    }

    /// Non-reserved words in id order.
    pub fn content_words(&self) -> &[String] {
        &self.words[RESERVED.len()..]
    }

    pub fn encode<S: AsRef<str>>(&self, words: &[S]) -> Vec<usize> {
        words.iter().map(|w| self.id(w.as_ref())).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .map(|&i| self.word(i).unwrap_or(RESERVED[UNK]).to_string())
            .collect()
    }

    /// One content word per line.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = String::new();
        for w in self.content_words() {
            text.push_str(w);
            text.push('\n');
        }
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Reads a closed word list, one word per line (blank lines skipped).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let words: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        Ok(Vocabulary::from_words(&words))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sentences(lines: &[&str]) -> Vec<Vec<String>> {
        lines
            .iter()
            .map(|l| l.split_whitespace().map(String::from).collect())
            .collect()
    }

    #[test]
    fn min_count_filters_rare_words() {
        let s = sentences(&["a a b"]);
        let v = Vocabulary::build(s.iter().map(Vec::as_slice), 2, None);
        assert!(v.contains("a"));
        assert!(!v.contains("b"));
        assert_eq!(v.id("b"), UNK);
    }

    #[test]
    fn closed_list_is_exact() {
        let v = Vocabulary::from_words(&["x", "y", "x"]);
        assert_eq!(v.len(), 6);
        assert_eq!(v.content_words(), &["x".to_string(), "y".to_string()]);
        for (i, r) in RESERVED.iter().enumerate() {
            assert_eq!(v.id(r), i);
        }
    }

    #[test]
    fn max_size_keeps_most_frequent_with_lexicographic_ties() {
        let s = sentences(&["b b a a c"]);
        let v = Vocabulary::build(s.iter().map(Vec::as_slice), 1, Some(1));
        // Counting oracle: a and b both occur twice; "a" < "b".
        assert_eq!(v.content_words(), &["a".to_string()]);
        let s = sentences(&["z y y"]);
        let v = Vocabulary::build(s.iter().map(Vec::as_slice), 1, Some(1));
        assert_eq!(v.content_words(), &["y".to_string()]);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        let v = Vocabulary::from_words(&["q", "r", "s"]);
        v.save(&path).unwrap();
        assert_eq!(Vocabulary::load(&path).unwrap(), v);
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(words in prop::collection::vec("[a-z]{1,5}", 1..20)) {
            let v = Vocabulary::build(std::iter::once(words.as_slice()), 1, None);
            let line = words.join(" ");
            prop_assert_eq!(v.decode(&v.encode(&words)).join(" "), line);
        }
    }
}
