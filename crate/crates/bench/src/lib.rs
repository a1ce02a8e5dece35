//! Criterion benchmarks for the numeric kernels, the model and evaluation.
//! The benches live in `benches/`; this library only holds shared fixtures.

use typoemb_core::corpus::{make_batches, make_pair, Batch, TaggedSentence, Vocabulary};
use typoemb_core::synth::{generate_corpus, sample_family, FamilySpec, Lexicon};
use typoemb_core::{Matrix, SeededRng};

/// Matrix with standard normal entries.
pub fn random_matrix(rows: usize, cols: usize, rng: &mut SeededRng) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.standard_normal()).collect();
    Matrix::from_vec(rows, cols, data).expect("shape matches data")
}

/// Noisy batches drawn from a small synthetic family, plus the vocabulary size.
pub fn synthetic_batches(sentences_per_language: usize, batch_size: usize) -> (Vec<Batch>, usize, usize) {
    let spec = FamilySpec {
        sentences_per_language,
        ..FamilySpec::default()
    };
    let truth = sample_family(&spec).expect("default family");
    let lexicon = Lexicon::with_size(spec.lexicon_size).expect("default lexicon");
    let mut rng = SeededRng::new(3);
    let raw: Vec<Vec<Vec<String>>> = truth
        .profiles
        .iter()
        .map(|p| generate_corpus(p, &lexicon, sentences_per_language, &mut rng).expect("corpus"))
        .collect();
    let vocab = Vocabulary::build(raw.iter().flatten().map(Vec::as_slice), 1, None);
    let pairs: Vec<_> = raw
        .iter()
        .enumerate()
        .flat_map(|(l, c)| c.iter().map(move |s| (l, s)))
        .map(|(l, s)| {
            make_pair(
                &TaggedSentence::new(&vocab.encode(s), l, 60).expect("sentence"),
                &mut rng,
            )
        })
        .collect();
    let batches = make_batches(&pairs, batch_size, &mut rng).expect("batches");
    (batches, vocab.len(), truth.languages.len())
}
