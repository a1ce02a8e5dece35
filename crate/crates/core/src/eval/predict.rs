use super::features::{Category, FeatureTable};
use super::report::{CategoryResult, EvalReport, FeatureResult, FoldResult};
use crate::corpus::WordVectors;
use crate::numeric::{softmax_in_place, SeededRng};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use std::collections::BTreeMap;

/// Folds need at least this many training languages with a present value.
pub const MIN_TRAINING_LANGUAGES: usize = 2;

/// Significance threshold on the one-sided test against Majority.
pub const SIGNIFICANCE_LEVEL: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierConfig {
    /// Penalty `l2 / 2 * |W|^2` on the weights (the bias is not penalised).
    pub l2: f64,
    pub learning_rate: f64,
    pub max_steps: usize,
    /// Stop once the gradient norm falls below this.
    pub tolerance: f64,
    /// Standard deviation of the initial weights.
    pub init_scale: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            l2: 1e-3,
            learning_rate: 0.1,
            max_steps: 2000,
            tolerance: 1e-6,
            init_scale: 0.01,
        }
    }
}

/// Multinomial logistic regression fitted by full-batch gradient descent.
#[derive(Clone, Debug)]
pub struct SoftmaxRegression {
    /// `(dim + 1) x classes`, row-major; the last row is the bias.
    weights: Vec<f64>,
    dim: usize,
    classes: usize,
    pub steps: usize,
}

impl SoftmaxRegression {
    pub fn fit(
        rows: &[&[f64]],
        labels: &[usize],
        classes: usize,
        config: &ClassifierConfig,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if rows.is_empty() || rows.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "classifier needs matching non-empty rows and labels, got {} and {}",
                rows.len(),
                labels.len()
            )));
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::InvalidArgument(format!("label {y} out of {classes} classes")));
        }
        let dim = rows[0].len();
        let c = classes;
        let mut w: Vec<f64> = (0..(dim + 1) * c).map(|_| rng.normal(0.0, config.init_scale)).collect();
        let mut grad = vec![0.0; w.len()];
        let mut p = vec![0.0; c];
        let scale = 1.0 / rows.len() as f64;
        let mut steps = 0;
        while steps < config.max_steps {
            grad.fill(0.0);
            for (x, &y) in rows.iter().zip(labels) {
                logits(&w, dim, c, x, &mut p);
                softmax_in_place(&mut p);
                p[y] -= 1.0;
                for (j, &xj) in x.iter().enumerate() {
                    for (g, pk) in grad[j * c..(j + 1) * c].iter_mut().zip(&p) {
                        *g += xj * pk;
                    }
                }
                for (g, pk) in grad[dim * c..].iter_mut().zip(&p) {
                    *g += pk;
                }
            }
            grad.iter_mut().for_each(|g| *g *= scale);
            for (g, wv) in grad[..dim * c].iter_mut().zip(&w) {
                *g += config.l2 * wv;
            }
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if !norm.is_finite() {
                return Err(Error::NonFiniteGradient("softmax regression".into()));
            }
            if norm < config.tolerance {
                break;
            }
            for (wv, g) in w.iter_mut().zip(&grad) {
                *wv -= config.learning_rate * g;
            }
            steps += 1;
        }
        Ok(SoftmaxRegression {
            weights: w,
            dim,
            classes,
            steps,
        })
    }

    /// Most probable class; ties go to the lower index.
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut p = vec![0.0; self.classes];
        logits(&self.weights, self.dim, self.classes, x, &mut p);
        argmax(&p)
    }
}

fn logits(w: &[f64], dim: usize, c: usize, x: &[f64], out: &mut [f64]) {
    out.copy_from_slice(&w[dim * c..]);
    for (j, &xj) in x.iter().enumerate() {
        for (o, wk) in out.iter_mut().zip(&w[j * c..(j + 1) * c]) {
            *o += xj * wk;
        }
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// One leave-one-out fold: the held-out language and its training set.
struct Fold {
    held_out: usize,
    truth: usize,
    train: Vec<usize>,
}

/// Folds per feature, plus the number skipped for lack of training data.
fn folds(table: &FeatureTable, feature: usize) -> (Vec<Fold>, usize) {
    let present: Vec<usize> = (0..table.languages().len())
        .filter(|&l| table.value(l, feature).is_some())
        .collect();
    let mut out = Vec::new();
    let mut skipped = 0;
    for &l in &present {
        let train: Vec<usize> = present.iter().copied().filter(|&o| o != l).collect();
        if train.len() < MIN_TRAINING_LANGUAGES {
            skipped += 1;
            continue;
        }
        out.push(Fold {
            held_out: l,
            truth: table.value(l, feature).expect("present"),
            train,
        });
    }
    (out, skipped)
}

/// Modal value among `languages`; ties go to the lexicographically first
/// value, which is the lowest domain index.
fn modal_value(table: &FeatureTable, feature: usize, languages: &[usize]) -> usize {
    let mut counts = vec![0usize; table.features()[feature].domain.len()];
    for &l in languages {
        counts[table.value(l, feature).expect("present")] += 1;
    }
    let mut best = 0;
    for (v, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = v;
        }
    }
    best
}

fn majority_feature_accuracy(table: &FeatureTable, feature: usize) -> Option<f64> {
    let (folds, _) = folds(table, feature);
    if folds.is_empty() {
        return None;
    }
    let hits = folds
        .iter()
        .filter(|f| modal_value(table, feature, &f.train) == f.truth)
        .count();
    Some(hits as f64 / folds.len() as f64)
}

/// Averages per-feature values within each category; features without a
/// value are left out, and categories with none are absent.
fn category_means(table: &FeatureTable, per_feature: &[Option<f64>]) -> BTreeMap<Category, f64> {
    table
        .by_category()
        .into_iter()
        .filter_map(|(cat, feats)| {
            let vals: Vec<f64> = feats.iter().filter_map(|&f| per_feature[f]).collect();
            (!vals.is_empty()).then(|| (cat, vals.iter().sum::<f64>() / vals.len() as f64))
        })
        .collect()
}

/// Leave-one-out accuracy of predicting each held-out language's modal
/// value from the others, averaged per category. Never looks at embeddings.
pub fn majority_baseline(table: &FeatureTable) -> BTreeMap<Category, f64> {
    let per: Vec<Option<f64>> = (0..table.features().len())
        .map(|f| majority_feature_accuracy(table, f))
        .collect();
    category_means(table, &per)
}

/// Accuracy of guessing uniformly over each feature's observed values,
/// averaged over `repeats` draws, per category.
pub fn random_baseline(table: &FeatureTable, repeats: usize, rng: &mut SeededRng) -> BTreeMap<Category, f64> {
    let repeats = repeats.max(1);
    let per: Vec<Option<f64>> = (0..table.features().len())
        .map(|f| {
            let (folds, _) = folds(table, f);
            if folds.is_empty() {
                return None;
            }
            let domain = table.features()[f].domain.len();
            let mut hits = 0usize;
            for _ in 0..repeats {
                hits += folds.iter().filter(|fold| rng.below(domain) == fold.truth).count();
            }
            Some(hits as f64 / (repeats * folds.len()) as f64)
        })
        .collect();
    category_means(table, &per)
}

/// One-sided Wilcoxon signed-rank test that the differences are shifted
/// above zero. Zero differences are dropped; ties get average ranks and the
/// usual variance correction; the p-value uses the normal approximation
/// without continuity correction.
pub fn wilcoxon_greater(differences: &[f64]) -> f64 {
    let mut nonzero: Vec<f64> = differences.iter().copied().filter(|d| *d != 0.0).collect();
    let n = nonzero.len();
    if n == 0 {
        return 1.0;
    }
    nonzero.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let mut w_plus = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && nonzero[j + 1].abs() == nonzero[i].abs() {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        w_plus += rank * nonzero[i..=j].iter().filter(|d| **d > 0.0).count() as f64;
        i = j + 1;
    }
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = (w_plus - mean) / var.sqrt();
    Normal::new(0.0, 1.0).expect("standard normal").sf(z)
}

/// Per-repeat outcome: for every feature and fold, whether it was right.
type RepeatHits = Vec<Vec<bool>>;

/// Leave-one-out typological feature prediction from language embeddings.
///
/// For every feature and every language with a value, a softmax regression
/// is trained on the other languages' embeddings and asked for the held-out
/// value. Each repeat permutes the training-row order and draws a fresh
/// initialisation; repeats run in parallel and are reduced in repeat order.
pub fn loo_predict(
    embeddings: &WordVectors,
    table: &FeatureTable,
    repeats: usize,
    config: &ClassifierConfig,
    rng: &mut SeededRng,
) -> Result<EvalReport> {
    if repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be positive".into()));
    }
    let rows = table
        .languages()
        .iter()
        .map(|code| {
            embeddings
                .words
                .iter()
                .position(|w| w == code)
                .ok_or_else(|| Error::Data(format!("no embedding for language `{code}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    let vector = |l: usize| embeddings.vectors.row(rows[l]);
    let n_features = table.features().len();
    let feature_folds: Vec<(Vec<Fold>, usize)> = (0..n_features).map(|f| folds(table, f)).collect();
    let base = rng.next_u64();

    let outcomes: Vec<Result<RepeatHits>> = (0..repeats)
        .into_par_iter()
        .map(|r| {
            let mut rng = SeededRng::derived(base, &format!("eval.repeat.{r}"));
            let mut hits = Vec::with_capacity(n_features);
            for (f, (folds, _)) in feature_folds.iter().enumerate() {
                let classes = table.features()[f].domain.len();
                let mut feature_hits = Vec::with_capacity(folds.len());
                for fold in folds {
                    let mut order = fold.train.clone();
                    rng.shuffle(&mut order);
                    let xs: Vec<&[f64]> = order.iter().map(|&l| vector(l)).collect();
                    let ys: Vec<usize> = order.iter().map(|&l| table.value(l, f).expect("present")).collect();
                    let model = SoftmaxRegression::fit(&xs, &ys, classes, config, &mut rng)?;
                    feature_hits.push(model.predict(vector(fold.held_out)) == fold.truth);
                }
                hits.push(feature_hits);
            }
            Ok(hits)
        })
        .collect();
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

    let majority_per: Vec<Option<f64>> = (0..n_features).map(|f| majority_feature_accuracy(table, f)).collect();
    let majority = category_means(table, &majority_per);
    let random = random_baseline(table, repeats, &mut SeededRng::derived(base, "eval.random"));

    let features: Vec<FeatureResult> = feature_folds
        .iter()
        .enumerate()
        .map(|(f, (folds, skipped))| {
            let feat = &table.features()[f];
            let fold_results: Vec<FoldResult> = folds
                .iter()
                .enumerate()
                .map(|(i, fold)| FoldResult {
                    language: table.languages()[fold.held_out].clone(),
                    truth: feat.domain[fold.truth].clone(),
                    correct: outcomes.iter().filter(|o| o[f][i]).count(),
                })
                .collect();
            let correct: usize = fold_results.iter().map(|r| r.correct).sum();
            FeatureResult {
                id: feat.id.clone(),
                category: feat.category,
                folds: fold_results,
                skipped_folds: *skipped,
                accuracy: (!folds.is_empty()).then(|| correct as f64 / (folds.len() * repeats) as f64),
                majority: majority_per[f],
            }
        })
        .collect();

    // Per repeat, average the feature accuracies inside each category.
    let per_repeat: Vec<BTreeMap<Category, f64>> = outcomes
        .iter()
        .map(|o| {
            let per: Vec<Option<f64>> = o
                .iter()
                .map(|h| (!h.is_empty()).then(|| h.iter().filter(|&&x| x).count() as f64 / h.len() as f64))
                .collect();
            category_means(table, &per)
        })
        .collect();

    let categories = Category::ALL
        .into_iter()
        .map(|cat| {
            let result = majority.get(&cat).map(|&maj| {
                let accs: Vec<f64> = per_repeat.iter().map(|m| m[&cat]).collect();
                let diffs: Vec<f64> = accs.iter().map(|a| a - maj).collect();
                let p_value = wilcoxon_greater(&diffs);
                CategoryResult {
                    features: features
                        .iter()
                        .filter(|f| f.category == cat && f.accuracy.is_some())
                        .count(),
                    accuracy: accs.iter().sum::<f64>() / accs.len() as f64,
                    majority: maj,
                    random: random[&cat],
                    p_value,
                    significant: p_value < SIGNIFICANCE_LEVEL,
                    per_repeat: accs,
                }
            });
            (cat, result)
        })
        .collect();

    Ok(EvalReport {
        repeats,
        skipped_folds: features.iter().map(|f| f.skipped_folds).sum(),
        categories,
        features,
        clusters: None,
    })
}
