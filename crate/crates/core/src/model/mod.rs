//! The multilingual denoising autoencoder.
//!
//! Each token enters as `[word_embedding ; language_embedding]`. A stacked
//! LSTM encodes the shuffled sentence; a second stacked LSTM, started from the
//! encoder's final state, reads `BOS w1 .. wn` (teacher forcing) and attends
//! over the encoder outputs to predict `w1 .. wn EOS`. Encoder and decoder
//! keep separate language tables; the decoder table is the one exported as
//! the language embedding by default.

mod checkpoint;
mod train;

pub use checkpoint::{DenoiserCheckpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use train::{reconstruction_accuracy, train, AccuracyReport, EpochRecord};

use crate::corpus::{Batch, BOS, EOS, PAD};
use crate::nn::{
    concat_columns, masked_cross_entropy, split_columns, AttentionCache, Embedding, GlobalAttention, LayerState,
    Linear, LinearCache, OptimizerConfig, Parameter, RecurrentState, StackedLstm, StackedLstmCache,
};
use crate::numeric::{normal_sample, Matrix, SeededRng};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Architecture, data-shape and optimizer settings of a denoiser.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub word_dim: usize,
    pub lang_dim: usize,
    pub hidden_size: usize,
    pub layers: usize,
    pub vocab_size: usize,
    pub languages: usize,
    pub max_decode_len: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub word_embeddings_trainable: bool,
    pub optimizer: OptimizerConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            word_dim: 32,
            lang_dim: 50,
            hidden_size: 64,
            layers: 2,
            vocab_size: 0,
            languages: 0,
            max_decode_len: 40,
            batch_size: 16,
            seed: 0,
            word_embeddings_trainable: false,
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl ModelConfig {
    pub fn input_dim(&self) -> usize {
        self.word_dim + self.lang_dim
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("word_dim", self.word_dim),
            ("lang_dim", self.lang_dim),
            ("hidden_size", self.hidden_size),
            ("layers", self.layers),
            ("languages", self.languages),
            ("max_decode_len", self.max_decode_len),
            ("batch_size", self.batch_size),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
        }
        if self.vocab_size <= EOS {
            return Err(Error::InvalidArgument(format!(
                "vocab_size {} leaves no content words",
                self.vocab_size
            )));
        }
        self.optimizer.validate()
    }
}

/// Which language table to read.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Encoder,
    #[default]
    Decoder,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Encoder => "encoder",
            Side::Decoder => "decoder",
        }
    }
}

impl std::str::FromStr for Side {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "encoder" => Ok(Side::Encoder),
            "decoder" => Ok(Side::Decoder),
            _ => Err(Error::InvalidArgument(format!(
                "unknown side `{s}`; valid values: encoder, decoder"
            ))),
        }
    }
}

/// Seeded initial language table: normal(0, 0.1), drawn from a stream that
/// depends only on the model seed and the side.
pub fn initial_language_table(seed: u64, side: Side, languages: usize, lang_dim: usize) -> Matrix {
    let mut rng = SeededRng::derived(seed, &format!("model.language.{}", side.as_str()));
    Matrix::from_vec(
        languages,
        lang_dim,
        normal_sample(&mut rng, languages * lang_dim, 0.0, 0.1),
    )
    .expect("sized")
}

/// Seeded word vectors, normal with standard deviation `1/sqrt(word_dim)`.
pub fn initial_word_table(seed: u64, vocab: usize, word_dim: usize) -> Matrix {
    let mut rng = SeededRng::derived(seed, "model.words");
    let sd = 1.0 / (word_dim as f64).sqrt();
    Matrix::from_vec(vocab, word_dim, normal_sample(&mut rng, vocab * word_dim, 0.0, sd)).expect("sized")
}

#[derive(Clone, Debug)]
pub struct Denoiser {
    pub config: ModelConfig,
    pub words: Embedding,
    pub lang_encoder: Embedding,
    pub lang_decoder: Embedding,
    pub encoder: StackedLstm,
    pub decoder: StackedLstm,
    pub attention: GlobalAttention,
    pub output: Linear,
}

/// Loss of one batch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatchLoss {
    /// Mean per-token negative log-likelihood.
    pub loss: f64,
    /// Summed negative log-likelihood.
    pub total: f64,
    pub tokens: usize,
}

struct ForwardCache {
    enc: StackedLstmCache,
    dec: StackedLstmCache,
    att: AttentionCache,
    out: LinearCache,
    src_langs: Vec<usize>,
    tgt_langs: Vec<usize>,
    grad_logits: Matrix,
}

impl Denoiser {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut words = Parameter::new(
            "words",
            initial_word_table(config.seed, config.vocab_size, config.word_dim),
        );
        words.trainable = config.word_embeddings_trainable;
        let lang = |side: Side| {
            Embedding::new(Parameter::new(
                format!("language.{}", side.as_str()),
                initial_language_table(config.seed, side, config.languages, config.lang_dim),
            ))
        };
        let mut rng = SeededRng::derived(config.seed, "model.weights");
        let (input, hidden) = (config.input_dim(), config.hidden_size);
        let encoder = StackedLstm::new("encoder", input, hidden, config.layers, &mut rng);
        let decoder = StackedLstm::new("decoder", input, hidden, config.layers, &mut rng);
        let attention = GlobalAttention::new("attention", hidden, &mut rng);
        let output = Linear::new("output", hidden, config.vocab_size, &mut rng);
        Ok(Denoiser {
            words: Embedding::new(words),
            lang_encoder: lang(Side::Encoder),
            lang_decoder: lang(Side::Decoder),
            encoder,
            decoder,
            attention,
            output,
            config,
        })
    }

    /// Every parameter in a fixed order; checkpoints and the optimizer rely
    /// on it.
    pub fn params(&self) -> Vec<&Parameter> {
        let mut out = vec![&self.words.table, &self.lang_encoder.table, &self.lang_decoder.table];
        out.extend(self.encoder.params());
        out.extend(self.decoder.params());
        out.extend(self.attention.params());
        out.extend(self.output.params());
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out = vec![
            &mut self.words.table,
            &mut self.lang_encoder.table,
            &mut self.lang_decoder.table,
        ];
        out.extend(self.encoder.params_mut());
        out.extend(self.decoder.params_mut());
        out.extend(self.attention.params_mut());
        out.extend(self.output.params_mut());
        out
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn language_table(&self, side: Side) -> &Matrix {
        match side {
            Side::Encoder => &self.lang_encoder.table.value,
            Side::Decoder => &self.lang_decoder.table.value,
        }
    }

    fn lang_embedding(&self, side: Side) -> &Embedding {
        match side {
            Side::Encoder => &self.lang_encoder,
            Side::Decoder => &self.lang_decoder,
        }
    }

    /// `[word_embedding(word) ; language_table(side)(lang)]`.
    pub fn embed_token(&self, word: usize, lang: usize, side: Side) -> Result<Vec<f64>> {
        Ok(self.embed(&[word], &[lang], side)?.into_data())
    }

    fn embed(&self, words: &[usize], langs: &[usize], side: Side) -> Result<Matrix> {
        let w = self.words.lookup(words)?;
        let l = self.lang_embedding(side).lookup(langs)?;
        concat_columns(&w, &l)
    }

    fn forward(&self, batch: &Batch) -> Result<(BatchLoss, ForwardCache)> {
        let b = batch.size;
        let src_langs = batch.row_languages(batch.source_len);
        let tgt_langs = batch.row_languages(batch.target_len);
        let enc_in = self.embed(&batch.source, &src_langs, Side::Encoder)?;
        let zeros = RecurrentState::zeros(self.config.layers, b, self.config.hidden_size);
        let (enc_hs, enc_final, enc) = self.encoder.forward(&enc_in, b, &zeros, &batch.source_mask)?;
        let dec_in = self.embed(&batch.decoder_input, &tgt_langs, Side::Decoder)?;
        let (dec_hs, _, dec) = self.decoder.forward(&dec_in, b, &enc_final, &batch.target_mask)?;
        let (att_out, att) = self.attention.forward(&dec_hs, &enc_hs, b, &batch.source_mask)?;
        let (logits, out) = self.output.forward(&att_out)?;
        let ce = masked_cross_entropy(&logits, &batch.decoder_target, &batch.target_mask)?;
        Ok((
            BatchLoss {
                loss: ce.loss,
                total: ce.total,
                tokens: ce.count,
            },
            ForwardCache {
                enc,
                dec,
                att,
                out,
                src_langs,
                tgt_langs,
                grad_logits: ce.grad,
            },
        ))
    }

    /// Teacher-forced loss without touching gradients.
    pub fn loss(&self, batch: &Batch) -> Result<BatchLoss> {
        Ok(self.forward(batch)?.0)
    }

    /// Forward pass plus backpropagation; gradients accumulate into the
    /// parameters.
    pub fn forward_backward(&mut self, batch: &Batch) -> Result<BatchLoss> {
        let (loss, cache) = self.forward(batch)?;
        let (layers, b, hid) = (self.config.layers, batch.size, self.config.hidden_size);
        let d_att = self.output.backward(&cache.out, &cache.grad_logits);
        let (d_dec_hs, d_enc_hs) = self.attention.backward(&cache.att, &d_att);
        let no_final = RecurrentState::zeros(layers, b, hid);
        let (d_dec_in, d_enc_final) = self.decoder.backward(&cache.dec, &d_dec_hs, &no_final);
        let (d_enc_in, _) = self.encoder.backward(&cache.enc, &d_enc_hs, &d_enc_final);
        let wd = self.config.word_dim;
        let (dw, dl) = split_columns(&d_dec_in, wd);
        self.words.backward(&batch.decoder_input, &dw);
        self.lang_decoder.backward(&cache.tgt_langs, &dl);
        let (dw, dl) = split_columns(&d_enc_in, wd);
        self.words.backward(&batch.source, &dw);
        self.lang_encoder.backward(&cache.src_langs, &dl);
        Ok(loss)
    }

    /// Greedy decoding of one shuffled sentence. PAD and BOS are never
    /// emitted, EOS is not allowed as the first token, and ties go to the
    /// lower id. Stops at EOS or after `max_decode_len` tokens.
    pub fn reconstruct(&self, source: &[usize], lang: usize) -> Result<Vec<usize>> {
        if source.is_empty() {
            return Err(Error::InvalidArgument("cannot decode an empty sentence".into()));
        }
        let n = source.len();
        let enc_in = self.embed(source, &vec![lang; n], Side::Encoder)?;
        let zeros = RecurrentState::zeros(self.config.layers, 1, self.config.hidden_size);
        let mask = vec![true; n];
        let (enc_hs, mut state, _) = self.encoder.forward(&enc_in, 1, &zeros, &mask)?;
        let mut prev = BOS;
        let mut out = Vec::new();
        for step in 0..self.config.max_decode_len {
            let mut input = self.embed(&[prev], &[lang], Side::Decoder)?;
            for (layer, s) in self.decoder.layers.iter().zip(state.layers.iter_mut()) {
                let next: LayerState = layer.step(&input, s)?;
                input = next.h.clone();
                *s = next;
            }
            let att = self.attention.attend(input.data(), &enc_hs, &mask)?;
            let (logits, _) = self.output.forward(&Matrix::row_vector(&att.output))?;
            let mut best: Option<(usize, f64)> = None;
            for (id, &v) in logits.data().iter().enumerate() {
                if id == PAD || id == BOS || (id == EOS && step == 0) {
                    continue;
                }
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((id, v));
                }
            }
            let (id, _) = best.expect("vocabulary has content words");
            if id == EOS {
                break;
            }
            out.push(id);
            prev = id;
        }
        Ok(out)
    }
}
