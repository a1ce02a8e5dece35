//! Pipeline stages behind the `typoemb` binary: generate a synthetic family,
//! train the denoiser, extract language embeddings, evaluate, report.

mod config;
mod pipeline;

pub use config::RunConfig;
pub use pipeline::{
    cmd_eval, cmd_extract, cmd_gen, cmd_pca, cmd_report, cmd_train, corpus_languages, load_feature_table, loss_csv,
    prepare_corpus, HeldOutSummary, Manifest, ManifestLanguage, PreparedCorpus,
};

use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] typoemb_core::Error),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// Short machine-readable class, printed as `error[<category>]`.
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.category(),
            CliError::Config(_) => "config",
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
