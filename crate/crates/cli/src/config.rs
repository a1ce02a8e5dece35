use crate::CliError;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use typoemb_core::corpus::VocabMode;
use typoemb_core::eval::ClassifierConfig;
use typoemb_core::model::{ModelConfig, Side};
use typoemb_core::nn::OptimizerConfig;
use typoemb_core::numeric::derive_seed;
use typoemb_core::synth::FamilySpec;

/// Every knob of a run, as one flat TOML table. Unset paths fall back to
/// the standard layout under `out`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Global seed; every stage derives its own stream from it.
    pub seed: u64,
    pub out: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub features: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub genera: Option<PathBuf>,
    /// `feature_id,category` file for long-format feature tables; the
    /// bundled assignment is used when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub categories: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<PathBuf>,

    pub family_genera: usize,
    pub languages_per_genus: usize,
    pub mutation_rate: f64,
    pub lexicon_size: usize,
    pub sentences_per_language: usize,
    pub specific_surface: bool,

    pub max_sentences: usize,
    pub max_len: usize,
    /// Sentences per language held out for the reconstruction diagnostic.
    pub held_out: usize,
    pub min_count: usize,
    pub vocab_mode: VocabMode,

    pub word_dim: usize,
    pub lang_dim: usize,
    pub hidden_size: usize,
    pub layers: usize,
    pub batch_size: usize,
    pub max_decode_len: usize,
    pub word_embeddings_trainable: bool,
    /// Total epochs; a resumed run trains until it has completed this many.
    pub epochs: usize,
    pub base_lr: f64,
    pub lr_decay: f64,
    pub decay_interval: u64,
    pub decay_start: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub clip_norm: f64,

    pub side: Side,
    pub k: usize,
    pub repeats: usize,
    pub min_coverage: f64,
    pub classifier_l2: f64,
    pub classifier_lr: f64,
    pub classifier_max_steps: usize,
    pub classifier_tolerance: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let family = FamilySpec::default();
        let model = ModelConfig::default();
        let opt = OptimizerConfig::default();
        let clf = ClassifierConfig::default();
        RunConfig {
            seed: 0,
            out: PathBuf::from("run"),
            corpus: None,
            features: None,
            genera: None,
            categories: None,
            checkpoint: None,
            embeddings: None,
            family_genera: family.genera,
            languages_per_genus: family.languages_per_genus,
            mutation_rate: family.mutation_rate,
            lexicon_size: family.lexicon_size,
            sentences_per_language: family.sentences_per_language,
            specific_surface: family.specific_surface,
            max_sentences: 200_000,
            max_len: 50,
            held_out: 100,
            min_count: 1,
            vocab_mode: VocabMode::default(),
            word_dim: model.word_dim,
            lang_dim: model.lang_dim,
            hidden_size: model.hidden_size,
            layers: model.layers,
            batch_size: model.batch_size,
            max_decode_len: model.max_decode_len,
            word_embeddings_trainable: model.word_embeddings_trainable,
            epochs: 10,
            base_lr: opt.base_lr,
            lr_decay: opt.decay,
            decay_interval: opt.decay_interval,
            decay_start: opt.decay_start,
            beta1: opt.beta1,
            beta2: opt.beta2,
            adam_eps: opt.eps,
            clip_norm: opt.clip_norm,
            side: Side::Decoder,
            k: 3,
            repeats: 100,
            min_coverage: 0.5,
            classifier_l2: clf.l2,
            classifier_lr: clf.learning_rate,
            classifier_max_steps: clf.max_steps,
            classifier_tolerance: clf.tolerance,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim().replace('\n', " ")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn family(&self) -> FamilySpec {
        FamilySpec {
            genera: self.family_genera,
            languages_per_genus: self.languages_per_genus,
            mutation_rate: self.mutation_rate,
            lexicon_size: self.lexicon_size,
            sentences_per_language: self.sentences_per_language,
            seed: self.stage_seed("synth"),
            specific_surface: self.specific_surface,
        }
    }

    pub fn model(&self, vocab_size: usize, languages: usize) -> ModelConfig {
        ModelConfig {
            word_dim: self.word_dim,
            lang_dim: self.lang_dim,
            hidden_size: self.hidden_size,
            layers: self.layers,
            vocab_size,
            languages,
            max_decode_len: self.max_decode_len,
            batch_size: self.batch_size,
            seed: self.stage_seed("model"),
            word_embeddings_trainable: self.word_embeddings_trainable,
            optimizer: OptimizerConfig {
                base_lr: self.base_lr,
                decay: self.lr_decay,
                decay_interval: self.decay_interval,
                decay_start: self.decay_start,
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.adam_eps,
                clip_norm: self.clip_norm,
            },
        }
    }

    pub fn classifier(&self) -> ClassifierConfig {
        ClassifierConfig {
            l2: self.classifier_l2,
            learning_rate: self.classifier_lr,
            max_steps: self.classifier_max_steps,
            tolerance: self.classifier_tolerance,
            ..ClassifierConfig::default()
        }
    }

    /// Seed of one pipeline stage: the global seed hashed with the stage tag.
    pub fn stage_seed(&self, tag: &str) -> u64 {
        derive_seed(self.seed, tag)
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.corpus.clone().unwrap_or_else(|| self.out.join("corpus"))
    }

    pub fn features_path(&self) -> PathBuf {
        self.features.clone().unwrap_or_else(|| self.out.join("features.csv"))
    }

    pub fn genera_path(&self) -> PathBuf {
        self.genera.clone().unwrap_or_else(|| self.out.join("genera.txt"))
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint.clone().unwrap_or_else(|| self.out.join("model.ckpt"))
    }

    pub fn embeddings_path(&self) -> PathBuf {
        self.embeddings
            .clone()
            .unwrap_or_else(|| self.out.join(format!("embeddings.{}.txt", self.side.as_str())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_toml() {
        let c = RunConfig {
            seed: 9,
            genera: Some("g.txt".into()),
            side: Side::Encoder,
            ..RunConfig::default()
        };
        assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::parse("seed = 1\nhiden_size = 3\n").unwrap_err();
        assert!(err.to_string().contains("hiden_size"), "{err}");
        assert_eq!(err.category(), "config");
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c = RunConfig::parse("epochs = 2\nvocab_mode = \"specific\"\n").unwrap();
        assert_eq!(c.epochs, 2);
        assert_eq!(c.vocab_mode, VocabMode::Specific);
        assert_eq!(c.hidden_size, 64);
    }

    #[test]
    fn stage_seeds_differ_and_follow_the_global_seed() {
        let a = RunConfig::default();
        let b = RunConfig {
            seed: 1,
            ..RunConfig::default()
        };
        assert_ne!(a.stage_seed("model"), a.stage_seed("synth"));
        assert_ne!(a.stage_seed("model"), b.stage_seed("model"));
        assert_eq!(a.model(10, 2).seed, a.stage_seed("model"));
    }
}
