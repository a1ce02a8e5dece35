//! Intrinsic evaluation of language embeddings.
//!
//! Typological features are predicted leave-one-out from the embeddings and
//! compared with Majority and Random baselines; languages are clustered
//! spectrally and scored against genus labels with the adjusted Rand index;
//! a 2-D PCA projection is exported for plotting.

mod cluster;
mod features;
mod predict;
mod report;

pub use cluster::{
    adjusted_rand_index, load_genera, parse_genera, pca_export, spectral_cluster, ClusterResult, PcaExport,
    SPECTRAL_RESTARTS,
};
pub use features::{bundled_categories, parse_categories, Category, Feature, FeatureTable, BUNDLED_CATEGORIES};
pub use predict::{
    loo_predict, majority_baseline, random_baseline, wilcoxon_greater, ClassifierConfig, SoftmaxRegression,
    MIN_TRAINING_LANGUAGES, SIGNIFICANCE_LEVEL,
};
pub use report::{CategoryResult, EvalReport, FeatureResult, FoldResult};
