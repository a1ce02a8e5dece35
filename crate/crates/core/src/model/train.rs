use super::{Denoiser, DenoiserCheckpoint, ModelConfig};
use crate::corpus::{make_batches, perturb, TaggedSentence};
use crate::numeric::SeededRng;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Summary of one pass over the training sentences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Optimizer step count at the end of the epoch.
    pub step: u64,
    /// Token-weighted mean loss over the epoch.
    pub loss: f64,
    /// Learning rate of the epoch's last update.
    pub lr: f64,
}

impl DenoiserCheckpoint {
    /// One epoch: every sentence is freshly shuffled, pairs are batched in a
    /// seeded order, and each batch is one Adam update. The randomness
    /// depends only on the model seed and the epoch number, so resuming at
    /// an epoch boundary reproduces an unbroken run exactly.
    pub fn train_epoch(&mut self, sentences: &[TaggedSentence]) -> Result<EpochRecord> {
        if sentences.is_empty() {
            return Err(Error::InvalidArgument("no training sentences".into()));
        }
        let epoch = self.epochs_completed;
        let mut rng = SeededRng::derived(self.model.config.seed, &format!("train.epoch.{epoch}"));
        let pairs: Vec<_> = sentences
            .iter()
            .map(|s| crate::corpus::NoisyPair {
                source: perturb(s, &mut rng),
                target: s.clone(),
            })
            .collect();
        let batches = make_batches(&pairs, self.model.config.batch_size, &mut rng)?;
        let (mut total, mut tokens, mut lr) = (0.0, 0usize, self.optimizer.lr_at(self.optimizer.step + 1));
        for batch in &batches {
            self.model.zero_grad();
            let step = self.optimizer.step + 1;
            let loss = self.model.forward_backward(batch)?;
            if !loss.loss.is_finite() {
                return Err(Error::Diverged { step, loss: loss.loss });
            }
            let mut params = self.model.params_mut();
            let stats = self.optimizer.step(&mut params).map_err(|e| match e {
                Error::NonFiniteGradient(name) => Error::NonFiniteGradient(format!("{name} at step {step}")),
                other => other,
            })?;
            total += loss.total;
            tokens += loss.tokens;
            lr = stats.lr;
        }
        self.epochs_completed += 1;
        let record = EpochRecord {
            epoch: self.epochs_completed,
            step: self.optimizer.step,
            loss: total / tokens as f64,
            lr,
        };
        log::info!(
            "epoch {} step {} loss {:.5} lr {:.3e}",
            record.epoch,
            record.step,
            record.loss,
            record.lr
        );
        self.history.push(record.clone());
        Ok(record)
    }

    /// Runs `epochs` further epochs.
    pub fn train_epochs(&mut self, sentences: &[TaggedSentence], epochs: usize) -> Result<()> {
        for _ in 0..epochs {
            self.train_epoch(sentences)?;
        }
        Ok(())
    }
}

/// Fresh model trained for `epochs` epochs on `sentences` (all languages
/// pooled). Every language index in `languages` must have a sentence.
pub fn train(
    config: ModelConfig,
    languages: Vec<String>,
    vocabulary: Vec<String>,
    sentences: &[TaggedSentence],
    epochs: usize,
) -> Result<DenoiserCheckpoint> {
    for (i, code) in languages.iter().enumerate() {
        if !sentences.iter().any(|s| s.language() == i) {
            return Err(Error::InvalidArgument(format!(
                "language `{code}` has no training sentences"
            )));
        }
    }
    let mut ckpt = DenoiserCheckpoint::new(Denoiser::new(config)?, languages, vocabulary)?;
    ckpt.train_epochs(sentences, epochs)?;
    Ok(ckpt)
}

/// Greedy-decoding token accuracy on held-out sentences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    /// Accuracy per language code, for languages with held-out sentences.
    pub per_language: BTreeMap<String, f64>,
    pub pooled: f64,
    pub correct: usize,
    pub positions: usize,
}

/// Shuffles each held-out sentence, decodes it, and counts the target
/// positions where the output token matches. Missing output positions count
/// as wrong; extra output tokens are ignored.
pub fn reconstruction_accuracy(
    ckpt: &DenoiserCheckpoint,
    held_out: &[TaggedSentence],
    rng: &mut SeededRng,
) -> Result<AccuracyReport> {
    if held_out.is_empty() {
        return Err(Error::InvalidArgument("no held-out sentences".into()));
    }
    let mut per: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for s in held_out {
        let source = perturb(s, rng).words();
        let out = ckpt.model.reconstruct(&source, s.language())?;
        let target = s.words();
        let hits = target.iter().zip(&out).filter(|(a, b)| a == b).count();
        let e = per.entry(s.language()).or_default();
        e.0 += hits;
        e.1 += target.len();
    }
    let correct = per.values().map(|v| v.0).sum();
    let positions = per.values().map(|v| v.1).sum();
    Ok(AccuracyReport {
        per_language: per
            .into_iter()
            .map(|(l, (c, n))| {
                let code = ckpt.languages.get(l).cloned().unwrap_or_else(|| l.to_string());
                (code, c as f64 / n as f64)
            })
            .collect(),
        pooled: correct as f64 / positions as f64,
        correct,
        positions,
    })
}

#[cfg(test)]
mod tests {
    use super::super::tests::tiny_config;
    use super::*;
    use crate::corpus::Vocabulary;
    use crate::nn::OptimizerConfig;
    use crate::synth::{generate_corpus, Lexicon, TypologyProfile};

    fn tiny_sentences(n: usize, langs: usize) -> Vec<TaggedSentence> {
        let mut rng = SeededRng::new(1);
        (0..n)
            .map(|i| {
                let len = 2 + rng.below(4);
                let words: Vec<usize> = (0..len).map(|_| 4 + rng.below(6)).collect();
                TaggedSentence::new(&words, i % langs, 20).unwrap()
            })
            .collect()
    }

    fn codes(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("l{i}")).collect()
    }

    fn vocab_words() -> Vec<String> {
        (4..10).map(|i| format!("w{i}")).collect()
    }

    #[test]
    fn zero_epochs_keep_initialization() {
        let s = tiny_sentences(6, 3);
        let ckpt = train(tiny_config(), codes(3), vocab_words(), &s, 0).unwrap();
        let fresh = Denoiser::new(tiny_config()).unwrap();
        assert_eq!(ckpt.model.lang_decoder.table.value, fresh.lang_decoder.table.value);
        assert!(ckpt.history.is_empty());
    }

    #[test]
    fn training_is_deterministic_and_moves_language_rows() {
        let s = tiny_sentences(9, 3);
        let a = train(tiny_config(), codes(3), vocab_words(), &s, 3).unwrap();
        let b = train(tiny_config(), codes(3), vocab_words(), &s, 3).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.model.lang_decoder.table.value, b.model.lang_decoder.table.value);
        let init = Denoiser::new(tiny_config()).unwrap();
        assert!(
            a.model
                .lang_decoder
                .table
                .value
                .max_abs_diff(&init.lang_decoder.table.value)
                > 0.0
        );
        assert_eq!(a.history.len(), 3);
        assert!(a.history.windows(2).all(|w| w[0].step < w[1].step));
    }

    #[test]
    fn resume_matches_unbroken_run() {
        let s = tiny_sentences(9, 3);
        let full = train(tiny_config(), codes(3), vocab_words(), &s, 4).unwrap();
        let mut part = train(tiny_config(), codes(3), vocab_words(), &s, 2).unwrap();
        let bytes = part.to_bytes().unwrap();
        part = DenoiserCheckpoint::from_bytes(&bytes).unwrap();
        part.train_epochs(&s, 2).unwrap();
        assert_eq!(part.to_bytes().unwrap(), full.to_bytes().unwrap());
    }

    #[test]
    fn every_language_needs_data() {
        let s = tiny_sentences(4, 2);
        assert!(train(tiny_config(), codes(3), vocab_words(), &s, 1).is_err());
    }

    #[test]
    fn divergence_reports_the_step() {
        let s = tiny_sentences(4, 3);
        let mut ckpt = train(tiny_config(), codes(3), vocab_words(), &s, 1).unwrap();
        ckpt.model.output.bias.value.fill(f64::NAN);
        match ckpt.train_epoch(&s) {
            Err(Error::Diverged { step, .. }) => assert_eq!(step, ckpt.optimizer.step + 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn untrained_accuracy_is_near_chance() {
        // Targets are uniform over the content words. A position can only
        // match when the untrained decoder emits a content word there, and
        // then with probability 1/V_content, which gives a binomial oracle.
        let config = ModelConfig {
            vocab_size: 24,
            languages: 1,
            ..tiny_config()
        };
        let vocab = config.vocab_size;
        let content = vocab - 4;
        let mut rng = SeededRng::new(77);
        let held: Vec<TaggedSentence> = (0..300)
            .map(|_| {
                let words: Vec<usize> = (0..6).map(|_| 4 + rng.below(content)).collect();
                TaggedSentence::new(&words, 0, 20).unwrap()
            })
            .collect();
        let words: Vec<String> = (0..content).map(|i| format!("w{i}")).collect();
        let ckpt = DenoiserCheckpoint::new(Denoiser::new(config).unwrap(), codes(1), words).unwrap();
        let report = reconstruction_accuracy(&ckpt, &held, &mut SeededRng::new(2)).unwrap();
        assert!((0.0..=1.0).contains(&report.pooled));

        let mut shuffle = SeededRng::new(2);
        let eligible: usize = held
            .iter()
            .map(|s| {
                let out = ckpt.model.reconstruct(&perturb(s, &mut shuffle).words(), 0).unwrap();
                out.iter().take(s.len()).filter(|&&id| id >= 4).count()
            })
            .sum();
        let p = 1.0 / content as f64;
        let mean = eligible as f64 * p;
        let sd = (eligible as f64 * p * (1.0 - p)).sqrt();
        assert!(
            (report.correct as f64 - mean).abs() <= 3.0 * sd,
            "{} vs {mean}",
            report.correct
        );

        let chance = 1.0 / vocab as f64;
        let sd = (chance * (1.0 - chance) / report.positions as f64).sqrt();
        assert!(
            (report.pooled - chance).abs() <= 3.0 * sd,
            "{} vs {chance}",
            report.pooled
        );
    }

    #[test]
    fn memorizes_a_small_corpus() {
        let lex = Lexicon::with_size(60).unwrap();
        let profile = TypologyProfile::from_labels(["SOV", "AdjN", "Post", "PreV", "NDet"]).unwrap();
        let raw = generate_corpus(&profile, &lex, 8, &mut SeededRng::new(4)).unwrap();
        let vocab = Vocabulary::build(raw.iter().map(Vec::as_slice), 1, None);
        let sentences: Vec<TaggedSentence> = raw
            .iter()
            .map(|s| TaggedSentence::new(&vocab.encode(s), 0, 20).unwrap())
            .collect();
        let config = ModelConfig {
            hidden_size: 32,
            languages: 1,
            vocab_size: vocab.len(),
            seed: 3,
            optimizer: OptimizerConfig {
                base_lr: 0.01,
                ..OptimizerConfig::default()
            },
            ..ModelConfig::default()
        };
        let mut ckpt =
            DenoiserCheckpoint::new(Denoiser::new(config).unwrap(), codes(1), vocab.content_words().to_vec()).unwrap();
        while ckpt.optimizer.step < 500 && ckpt.history.last().is_none_or(|r| r.loss >= 0.01) {
            ckpt.train_epoch(&sentences).unwrap();
        }
        let last = ckpt.history.last().unwrap();
        assert!(last.loss < 0.01, "loss {} after {} steps", last.loss, last.step);
        let report = reconstruction_accuracy(&ckpt, &sentences, &mut SeededRng::new(99)).unwrap();
        assert_eq!(report.pooled, 1.0);
    }
}
