//! Corpus ingestion and the data path into the denoiser.
//!
//! Corpora live at `<root>/<code>.txt`, one whitespace-tokenized sentence per
//! line. Every token is tagged with its sentence's language, the in-memory
//! form of writing `word_code` for each word. Training pairs are built by
//! shuffling a sentence's tokens and asking the model for the original order.

mod csls;
mod vocab;

pub use csls::{csls_indices, csls_map, read_mapping, write_mapping, WordVectors};
pub use vocab::{Vocabulary, BOS, EOS, PAD, RESERVED, UNK};

use crate::numeric::SeededRng;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

/// A language code and its dense index.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LanguageId {
    pub code: String,
    pub index: usize,
}

/// Ordered set of language codes; indices are positions.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Languages {
    codes: Vec<String>,
    index: HashMap<String, usize>,
}

impl Languages {
    pub fn new<S: AsRef<str>>(codes: &[S]) -> Result<Self> {
        let mut langs = Languages::default();
        for c in codes {
            let c = c.as_ref();
            let valid = !c.is_empty()
                && c.chars()
                    .all(|ch| ch.is_ascii_lowercase() || ch.is_ascii_digit() || ch == '-');
            if !valid {
                return Err(Error::InvalidArgument(format!(
                    "language code `{c}` must be lowercase ascii letters, digits or `-`"
                )));
            }
            if langs.index.insert(c.to_string(), langs.codes.len()).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate language code `{c}`")));
            }
            langs.codes.push(c.to_string());
        }
        Ok(langs)
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn codes(&self) -> &[String] {
        &self.codes
    }

    pub fn get(&self, code: &str) -> Option<LanguageId> {
        self.index.get(code).map(|&index| LanguageId {
            code: code.to_string(),
            index,
        })
    }

    pub fn by_index(&self, index: usize) -> Option<LanguageId> {
        self.codes.get(index).map(|code| LanguageId {
            code: code.clone(),
            index,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = LanguageId> + '_ {
        self.codes.iter().enumerate().map(|(index, code)| LanguageId {
            code: code.clone(),
            index,
        })
    }
}

/// Sentences read for one language.
#[derive(Clone, Debug, PartialEq)]
pub struct LanguageCorpus {
    pub language: LanguageId,
    pub sentences: Vec<Vec<String>>,
    /// Non-blank lines in the file.
    pub lines_read: usize,
    /// Lines dropped for exceeding `max_len`.
    pub dropped_too_long: usize,
}

/// Reads `<root>/<code>.txt` for every language, drops lines longer than
/// `max_len` tokens, then keeps a uniform sample of at most `max_sentences`
/// in file order. Languages draw from `rng` in list order.
pub fn load_corpus(
    root: &Path,
    languages: &Languages,
    max_sentences: usize,
    max_len: usize,
    rng: &mut SeededRng,
) -> Result<Vec<LanguageCorpus>> {
    let mut out = Vec::with_capacity(languages.len());
    for language in languages.iter() {
        let path = root.join(format!("{}.txt", language.code));
        if !path.is_file() {
            return Err(Error::MissingCorpus {
                lang: language.code.clone(),
                path,
            });
        }
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let lines: Vec<Vec<String>> = text
            .lines()
            .map(|l| l.split_whitespace().map(String::from).collect::<Vec<_>>())
            .filter(|t| !t.is_empty())
            .collect();
        if lines.is_empty() {
            return Err(Error::EmptyCorpus(format!("{} ({})", language.code, path.display())));
        }
        let lines_read = lines.len();
        let kept: Vec<Vec<String>> = lines.into_iter().filter(|t| t.len() <= max_len).collect();
        let dropped_too_long = lines_read - kept.len();
        if kept.is_empty() {
            return Err(Error::EmptyCorpus(format!(
                "{}: every sentence is longer than {max_len} tokens",
                language.code
            )));
        }
        let sentences = if kept.len() > max_sentences {
            let mut idx: Vec<usize> = (0..kept.len()).collect();
            rng.shuffle(&mut idx);
            let mut chosen = idx[..max_sentences].to_vec();
            chosen.sort_unstable();
            let mut kept: Vec<Option<Vec<String>>> = kept.into_iter().map(Some).collect();
            chosen.into_iter().map(|i| kept[i].take().expect("unique")).collect()
        } else {
            kept
        };
        log::info!(
            "{}: {} sentences kept of {lines_read} ({dropped_too_long} too long)",
            language.code,
            sentences.len()
        );
        out.push(LanguageCorpus {
            language,
            sentences,
            lines_read,
            dropped_too_long,
        });
    }
    Ok(out)
}

/// How surface words become vocabulary entries.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VocabMode {
    /// All languages share one vocabulary of pivot words.
    #[default]
    SharedPivot,
    /// Each language keeps its own words: `dog` in `de` becomes `dog_de`.
    Specific,
}

impl VocabMode {
    pub fn surface(self, word: &str, code: &str) -> String {
        match self {
            VocabMode::SharedPivot => word.to_string(),
            VocabMode::Specific => format!("{word}_{code}"),
        }
    }
}

impl std::str::FromStr for VocabMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shared-pivot" => Ok(VocabMode::SharedPivot),
            "specific" => Ok(VocabMode::Specific),
            _ => Err(Error::InvalidArgument(format!(
                "unknown vocabulary mode `{s}` (expected shared-pivot or specific)"
            ))),
        }
    }
}

/// Rewrites every word that has an entry in `mapping` to its pivot word.
pub fn apply_mapping(corpus: &mut LanguageCorpus, mapping: &[(String, String)]) {
    let map: HashMap<&str, &str> = mapping.iter().map(|(s, p)| (s.as_str(), p.as_str())).collect();
    for sentence in &mut corpus.sentences {
        for w in sentence.iter_mut() {
            if let Some(p) = map.get(w.as_str()) {
                *w = p.to_string();
            }
        }
    }
}

/// Surface forms of every sentence, for vocabulary building.
pub fn surface_sentences(corpora: &[LanguageCorpus], mode: VocabMode) -> Vec<Vec<String>> {
    corpora
        .iter()
        .flat_map(|c| {
            c.sentences
                .iter()
                .map(move |s| s.iter().map(|w| mode.surface(w, &c.language.code)).collect())
        })
        .collect()
}

/// One token: a word id tagged with a language index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Token {
    pub word: usize,
    pub lang: usize,
}

/// A sentence whose tokens all carry the sentence's language.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaggedSentence {
    tokens: Vec<Token>,
    language: usize,
}

impl TaggedSentence {
    pub fn new(words: &[usize], language: usize, max_len: usize) -> Result<Self> {
        if words.is_empty() || words.len() > max_len {
            return Err(Error::InvalidArgument(format!(
                "sentence length {} outside 1..={max_len}",
                words.len()
            )));
        }
        Ok(TaggedSentence {
            tokens: words.iter().map(|&word| Token { word, lang: language }).collect(),
            language,
        })
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn words(&self) -> Vec<usize> {
        self.tokens.iter().map(|t| t.word).collect()
    }

    pub fn language(&self) -> usize {
        self.language
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// `word_code` rendering, e.g. `Er_de hat_de`.
    pub fn tagged_text(&self, vocab: &Vocabulary, languages: &Languages) -> String {
        let code = &languages.codes()[self.language];
        self.tokens
            .iter()
            .map(|t| format!("{}_{code}", vocab.word(t.word).unwrap_or(RESERVED[UNK])))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Encodes every corpus against `vocab`; out-of-vocabulary words become UNK.
pub fn tag_corpora(
    corpora: &[LanguageCorpus],
    vocab: &Vocabulary,
    mode: VocabMode,
    max_len: usize,
) -> Result<Vec<Vec<TaggedSentence>>> {
    corpora
        .iter()
        .map(|c| {
            c.sentences
                .iter()
                .map(|s| {
                    let ids: Vec<usize> = s.iter().map(|w| vocab.id(&mode.surface(w, &c.language.code))).collect();
                    TaggedSentence::new(&ids, c.language.index, max_len)
                })
                .collect()
        })
        .collect()
}

/// A shuffled source and the original it came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NoisyPair {
    pub source: TaggedSentence,
    pub target: TaggedSentence,
}

/// Uniformly random permutation of token positions (Fisher-Yates).
pub fn perturb(sentence: &TaggedSentence, rng: &mut SeededRng) -> TaggedSentence {
    let mut out = sentence.clone();
    rng.shuffle(&mut out.tokens);
    out
}

pub fn make_pair(sentence: &TaggedSentence, rng: &mut SeededRng) -> NoisyPair {
    NoisyPair {
        source: perturb(sentence, rng),
        target: sentence.clone(),
    }
}

/// Padded, time-major batch. Position `t` of row `b` lives at `t * size + b`.
///
/// Decoder input is `BOS w1 .. wn` and the decoder target `w1 .. wn EOS`, so
/// both have `n + 1` live positions per row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    pub size: usize,
    pub source_len: usize,
    pub target_len: usize,
    pub source: Vec<usize>,
    pub source_mask: Vec<bool>,
    pub decoder_input: Vec<usize>,
    pub decoder_target: Vec<usize>,
    pub target_mask: Vec<bool>,
    /// Language of each row.
    pub languages: Vec<usize>,
    pub source_lengths: Vec<usize>,
    /// Live decoder positions per row (sentence length + 1).
    pub target_lengths: Vec<usize>,
}

impl Batch {
    pub fn from_pairs(pairs: &[&NoisyPair]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let size = pairs.len();
        let source_lengths: Vec<usize> = pairs.iter().map(|p| p.source.len()).collect();
        let target_lengths: Vec<usize> = pairs.iter().map(|p| p.target.len() + 1).collect();
        let source_len = *source_lengths.iter().max().expect("nonempty");
        let target_len = *target_lengths.iter().max().expect("nonempty");
        let mut batch = Batch {
            size,
            source_len,
            target_len,
            source: vec![PAD; source_len * size],
            source_mask: vec![false; source_len * size],
            decoder_input: vec![PAD; target_len * size],
            decoder_target: vec![PAD; target_len * size],
            target_mask: vec![false; target_len * size],
            languages: pairs.iter().map(|p| p.target.language()).collect(),
            source_lengths,
            target_lengths,
        };
        for (b, pair) in pairs.iter().enumerate() {
            if pair.source.language() != pair.target.language() {
                return Err(Error::InvalidArgument("pair mixes languages".into()));
            }
            for (t, tok) in pair.source.tokens().iter().enumerate() {
                batch.source[t * size + b] = tok.word;
                batch.source_mask[t * size + b] = true;
            }
            let words = pair.target.words();
            for t in 0..=words.len() {
                let at = t * size + b;
                batch.decoder_input[at] = if t == 0 { BOS } else { words[t - 1] };
                batch.decoder_target[at] = if t < words.len() { words[t] } else { EOS };
                batch.target_mask[at] = true;
            }
        }
        Ok(batch)
    }

    /// Language of each time-major row of a sequence of length `len`.
    pub fn row_languages(&self, len: usize) -> Vec<usize> {
        (0..len * self.size).map(|r| self.languages[r % self.size]).collect()
    }

    /// Source ids of row `b` without padding.
    pub fn source_row(&self, b: usize) -> Vec<usize> {
        (0..self.source_lengths[b])
            .map(|t| self.source[t * self.size + b])
            .collect()
    }

    /// Target words of row `b`, without the end sentinel.
    pub fn target_row(&self, b: usize) -> Vec<usize> {
        (0..self.target_lengths[b] - 1)
            .map(|t| self.decoder_target[t * self.size + b])
            .collect()
    }
}

/// Shuffles pair order with `rng` and cuts consecutive batches; the last one
/// may be short.
pub fn make_batches(pairs: &[NoisyPair], batch_size: usize, rng: &mut SeededRng) -> Result<Vec<Batch>> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no pairs to batch".into()));
    }
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    rng.shuffle(&mut order);
    order
        .chunks(batch_size)
        .map(|chunk| Batch::from_pairs(&chunk.iter().map(|&i| &pairs[i]).collect::<Vec<_>>()))
        .collect()
}

/// Splits each language's sentences into (train, held-out), holding out the
/// last `held_out` sentences of a seeded permutation, but never all of them.
pub fn split_held_out(
    sentences: &[Vec<TaggedSentence>],
    held_out: usize,
    rng: &mut SeededRng,
) -> (Vec<Vec<TaggedSentence>>, Vec<Vec<TaggedSentence>>) {
    let mut train = Vec::with_capacity(sentences.len());
    let mut test = Vec::with_capacity(sentences.len());
    for lang in sentences {
        let mut idx: Vec<usize> = (0..lang.len()).collect();
        rng.shuffle(&mut idx);
        let n_test = held_out.min(lang.len().saturating_sub(1));
        let (tr, te) = idx.split_at(lang.len() - n_test);
        let mut tr = tr.to_vec();
        let mut te = te.to_vec();
        tr.sort_unstable();
        te.sort_unstable();
        train.push(tr.iter().map(|&i| lang[i].clone()).collect());
        test.push(te.iter().map(|&i| lang[i].clone()).collect());
    }
    (train, test)
}
