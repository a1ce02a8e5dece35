//! Language embeddings learned by a word-reordering denoising autoencoder,
//! and the tooling to check whether they capture word-order typology.
//!
//! The crate is organised bottom-up:
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`numeric`] | dense matrices, seeded RNG, Jacobi eigensolver, PCA, k-means |
//! | [`nn`] | LSTM layers, bilinear global attention, cross-entropy, Adam + step decay |
//! | [`corpus`] | corpus loading, vocabularies, language tagging, shuffling, batching, CSLS |
//! | [`synth`] | synthetic language families with controllable word order |
//! | [`model`] | the denoising sequence-to-sequence model, training, checkpoints |
//! | [`eval`] | leave-one-out feature prediction, baselines, spectral clustering, ARI |

pub mod corpus;
pub mod error;
pub mod eval;
pub mod model;
pub mod nn;
pub mod numeric;
pub mod synth;

pub use error::{Error, Result};
pub use numeric::{Matrix, SeededRng};
