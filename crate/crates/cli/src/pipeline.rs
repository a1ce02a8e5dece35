use crate::{CliError, RunConfig};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use typoemb_core::corpus::{
    load_corpus, split_held_out, surface_sentences, tag_corpora, Languages, TaggedSentence, Vocabulary, WordVectors,
};
use typoemb_core::eval::{
    adjusted_rand_index, bundled_categories, load_genera, loo_predict, parse_categories, pca_export, spectral_cluster,
    Category, EvalReport, FeatureTable,
};
use typoemb_core::model::{reconstruction_accuracy, train, AccuracyReport, DenoiserCheckpoint};
use typoemb_core::synth::{emit_ground_truth, sample_family, write_corpora, FamilySpec};
use typoemb_core::{Error, SeededRng};

type Result<T> = std::result::Result<T, CliError>;

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestLanguage {
    pub code: String,
    pub genus: usize,
    pub profile: Vec<String>,
}

/// What `gen` produced and from which seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub family: FamilySpec,
    pub languages: Vec<ManifestLanguage>,
    pub corpus: String,
    pub features: String,
    pub genera: String,
}

/// Generates a synthetic family: corpora, feature table, genus labels and a
/// manifest. Refuses a non-empty output directory unless `force` is set.
pub fn cmd_gen(cfg: &RunConfig, force: bool) -> Result<Manifest> {
    let out = &cfg.out;
    let occupied = out.is_dir()
        && std::fs::read_dir(out)
            .map_err(|e| CliError::io(out, e))?
            .next()
            .is_some();
    if occupied && !force {
        return Err(CliError::Usage(format!(
            "output directory {} is not empty (use --force to overwrite)",
            out.display()
        )));
    }
    let corpus = cfg.corpus_dir();
    if force && corpus.is_dir() {
        std::fs::remove_dir_all(&corpus).map_err(|e| CliError::io(&corpus, e))?;
    }
    create_dir(out)?;
    let spec = cfg.family();
    let gt = sample_family(&spec)?;
    write_corpora(&spec, &gt, &corpus)?;
    let (features, genera) = (cfg.features_path(), cfg.genera_path());
    emit_ground_truth(&gt, &features, &genera)?;
    let manifest = Manifest {
        seed: cfg.seed,
        family: spec,
        languages: gt
            .languages
            .iter()
            .zip(&gt.profiles)
            .zip(&gt.genera)
            .map(|((code, p), &genus)| ManifestLanguage {
                code: code.clone(),
                genus,
                profile: p.labels().iter().map(|s| s.to_string()).collect(),
            })
            .collect(),
        corpus: file_name(&corpus),
        features: file_name(&features),
        genera: file_name(&genera),
    };
    write(&out.join("manifest.json"), to_json(&manifest)?)?;
    log::info!("generated {} languages in {}", gt.languages.len(), corpus.display());
    Ok(manifest)
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(Error::from)?;
    s.push('\n');
    Ok(s)
}

/// Language codes of the `<code>.txt` files in a corpus directory, sorted.
pub fn corpus_languages(dir: &Path) -> Result<Vec<String>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut codes = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "txt") {
            if let Some(stem) = path.file_stem() {
                codes.push(stem.to_string_lossy().into_owned());
            }
        }
    }
    if codes.is_empty() {
        return Err(Error::EmptyCorpus(format!("no <code>.txt files in {}", dir.display())).into());
    }
    codes.sort();
    Ok(codes)
}

/// Training data prepared from the corpus directory.
pub struct PreparedCorpus {
    pub languages: Vec<String>,
    pub vocabulary: Vocabulary,
    pub train: Vec<TaggedSentence>,
    pub held_out: Vec<TaggedSentence>,
}

pub fn prepare_corpus(cfg: &RunConfig) -> Result<PreparedCorpus> {
    let dir = cfg.corpus_dir();
    let codes = corpus_languages(&dir)?;
    let languages = Languages::new(&codes)?;
    let mut sample = SeededRng::new(cfg.stage_seed("corpus.sample"));
    let corpora = load_corpus(&dir, &languages, cfg.max_sentences, cfg.max_len, &mut sample)?;
    let surfaces = surface_sentences(&corpora, cfg.vocab_mode);
    let vocabulary = Vocabulary::build(surfaces.iter().map(Vec::as_slice), cfg.min_count, None);
    let tagged = tag_corpora(&corpora, &vocabulary, cfg.vocab_mode, cfg.max_len)?;
    let mut split = SeededRng::new(cfg.stage_seed("corpus.split"));
    let (train, held) = split_held_out(&tagged, cfg.held_out, &mut split);
    Ok(PreparedCorpus {
        languages: codes,
        vocabulary,
        train: train.into_iter().flatten().collect(),
        held_out: held.into_iter().flatten().collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeldOutSummary {
    pub epochs: usize,
    pub step: u64,
    pub sentences: usize,
    pub accuracy: Option<AccuracyReport>,
}

/// Trains (or resumes) the denoiser until `cfg.epochs` epochs are complete,
/// then writes the checkpoint, the loss history and held-out accuracy.
pub fn cmd_train(cfg: &RunConfig, resume: Option<&Path>) -> Result<DenoiserCheckpoint> {
    let data = prepare_corpus(cfg)?;
    let ckpt = match resume {
        Some(path) => {
            let mut ckpt = DenoiserCheckpoint::load(path)?;
            if ckpt.languages != data.languages || ckpt.vocabulary != data.vocabulary.content_words() {
                return Err(Error::Data(format!(
                    "checkpoint {} was trained on different languages or vocabulary",
                    path.display()
                ))
                .into());
            }
            if ckpt.epochs_completed > cfg.epochs {
                return Err(CliError::Usage(format!(
                    "checkpoint already has {} epochs, more than the requested {}",
                    ckpt.epochs_completed, cfg.epochs
                )));
            }
            let remaining = cfg.epochs - ckpt.epochs_completed;
            ckpt.train_epochs(&data.train, remaining)?;
            ckpt
        }
        None => {
            let config = cfg.model(data.vocabulary.len(), data.languages.len());
            train(
                config,
                data.languages.clone(),
                data.vocabulary.content_words().to_vec(),
                &data.train,
                cfg.epochs,
            )?
        }
    };
    create_dir(&cfg.out)?;
    ckpt.save(&cfg.checkpoint_path())?;
    write(&cfg.out.join("loss.csv"), loss_csv(&ckpt))?;
    let accuracy = if data.held_out.is_empty() {
        None
    } else {
        let mut rng = SeededRng::new(cfg.stage_seed("train.accuracy"));
        Some(reconstruction_accuracy(&ckpt, &data.held_out, &mut rng)?)
    };
    let summary = HeldOutSummary {
        epochs: ckpt.epochs_completed,
        step: ckpt.step(),
        sentences: data.held_out.len(),
        accuracy,
    };
    write(&cfg.out.join("heldout_accuracy.json"), to_json(&summary)?)?;
    Ok(ckpt)
}

pub fn loss_csv(ckpt: &DenoiserCheckpoint) -> String {
    let mut out = String::from("step,loss,lr\n");
    for r in &ckpt.history {
        let _ = writeln!(out, "{},{},{}", r.step, r.loss, r.lr);
    }
    out
}

/// Writes the configured side's language table next to the checkpoint.
pub fn cmd_extract(cfg: &RunConfig) -> Result<PathBuf> {
    let ckpt = DenoiserCheckpoint::load(&cfg.checkpoint_path())?;
    let path = cfg.embeddings_path();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    ckpt.language_embeddings(cfg.side).save(&path)?;
    Ok(path)
}

/// Reads a feature table, choosing the format from the header: long files
/// name a `feature_id` (or `Parameter_ID`) column, anything else is the wide
/// synthetic layout, whose features all count as syntax.
pub fn load_feature_table(path: &Path, categories: Option<&Path>) -> Result<FeatureTable> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let header = text.lines().next().unwrap_or("").to_ascii_lowercase();
    let context = path.display().to_string();
    if header
        .split(',')
        .any(|h| matches!(h.trim(), "feature_id" | "parameter_id"))
    {
        let cats = match categories {
            Some(p) => {
                let t = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                parse_categories(&t, &p.display().to_string())?
            }
            None => bundled_categories(),
        };
        Ok(FeatureTable::parse_long(&text, &cats, &context)?)
    } else {
        Ok(FeatureTable::parse_wide(&text, Category::Syntax, &context)?)
    }
}

fn genus_map(path: &Path) -> Result<HashMap<String, String>> {
    Ok(load_genera(path)?.into_iter().collect())
}

/// Embeddings restricted to the languages of the feature table, in
/// embedding order. Extra embedded languages are dropped with a warning;
/// table languages without an embedding are an error.
fn align(embeddings: WordVectors, table: &FeatureTable) -> Result<(WordVectors, FeatureTable)> {
    if let Some(missing) = table.languages().iter().find(|l| !embeddings.words.contains(l)) {
        return Err(Error::Data(format!("feature table language `{missing}` has no embedding")).into());
    }
    let keep: Vec<usize> = (0..embeddings.len())
        .filter(|&i| {
            let present = table.language_index(&embeddings.words[i]).is_some();
            if !present {
                log::warn!(
                    "language `{}` is not in the feature table; excluded",
                    embeddings.words[i]
                );
            }
            present
        })
        .collect();
    let words: Vec<String> = keep.iter().map(|&i| embeddings.words[i].clone()).collect();
    let vectors = embeddings.vectors.gather_rows(&keep);
    let table = table.select_languages(&words)?;
    Ok((WordVectors::new(words, vectors)?, table))
}

/// Feature prediction, baselines, spectral clustering with ARI and the PCA
/// projection. Writes `report.json`, `report_summary.csv`, `clusters.csv`
/// and `pca.csv` under the output directory.
pub fn cmd_eval(cfg: &RunConfig) -> Result<EvalReport> {
    let embeddings = WordVectors::load(&cfg.embeddings_path())?;
    let table = load_feature_table(&cfg.features_path(), cfg.categories.as_deref())?;
    let (embeddings, table) = align(embeddings, &table)?;
    let table = table.filter_features(cfg.min_coverage)?;
    let genera_path = cfg.genera_path();
    let genera = if cfg.genera.is_some() || genera_path.is_file() {
        Some(genus_map(&genera_path)?)
    } else {
        None
    };

    let mut rng = SeededRng::new(cfg.stage_seed("eval.loo"));
    let mut report = loo_predict(&embeddings, &table, cfg.repeats, &cfg.classifier(), &mut rng)?;

    let mut rng = SeededRng::new(cfg.stage_seed("eval.cluster"));
    let mut clusters = spectral_cluster(&embeddings.vectors, cfg.k, &mut rng)?;
    let labels: Option<Vec<String>> = genera
        .as_ref()
        .map(|g| {
            embeddings
                .words
                .iter()
                .map(|l| {
                    g.get(l)
                        .cloned()
                        .ok_or_else(|| CliError::from(Error::Data(format!("no genus label for language `{l}`"))))
                })
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?;
    if let Some(labels) = &labels {
        clusters.ari = Some(adjusted_rand_index(&clusters.labels, labels)?);
    }
    let mut csv = String::from(if labels.is_some() {
        "lang,cluster,genus\n"
    } else {
        "lang,cluster\n"
    });
    for (i, lang) in embeddings.words.iter().enumerate() {
        let _ = write!(csv, "{lang},{}", clusters.labels[i]);
        if let Some(l) = &labels {
            let _ = write!(csv, ",{}", l[i]);
        }
        csv.push('\n');
    }
    report.clusters = Some(clusters);

    let projection = pca_export(&embeddings.words, &embeddings.vectors, genera.as_ref())?;
    create_dir(&cfg.out)?;
    write(&cfg.out.join("clusters.csv"), csv)?;
    write(&cfg.out.join("pca.csv"), projection.to_csv())?;
    report.save(&cfg.out.join("report.json"), &cfg.out.join("report_summary.csv"))?;
    Ok(report)
}

/// Writes `pca.csv` for the configured embeddings, with genus labels when a
/// genus file is available.
pub fn cmd_pca(cfg: &RunConfig) -> Result<PathBuf> {
    let embeddings = WordVectors::load(&cfg.embeddings_path())?;
    let genera_path = cfg.genera_path();
    let genera = if cfg.genera.is_some() || genera_path.is_file() {
        Some(genus_map(&genera_path)?)
    } else {
        None
    };
    let projection = pca_export(&embeddings.words, &embeddings.vectors, genera.as_ref())?;
    create_dir(&cfg.out)?;
    let path = cfg.out.join("pca.csv");
    write(&path, projection.to_csv())?;
    Ok(path)
}

/// Human-readable summary of `report.json` and, when present, the
/// held-out reconstruction accuracy.
pub fn cmd_report(cfg: &RunConfig) -> Result<String> {
    let path = cfg.out.join("report.json");
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let report = EvalReport::from_json(&text)?;
    let mut out = String::new();
    let _ = writeln!(out, "feature prediction ({} repeats)", report.repeats);
    let _ = writeln!(
        out,
        "{:<14}{:>9}{:>10}{:>10}{:>9}{:>12}",
        "category", "features", "accuracy", "majority", "random", "p"
    );
    for (cat, result) in &report.categories {
        match result {
            Some(r) => {
                let mark = if r.significant { "*" } else { "" };
                let _ = writeln!(
                    out,
                    "{:<14}{:>9}{:>10}{:>10.3}{:>9.3}{:>12.2e}",
                    cat.as_str(),
                    r.features,
                    format!("{:.3}{mark}", r.accuracy),
                    r.majority,
                    r.random,
                    r.p_value
                );
            }
            None => {
                let _ = writeln!(out, "{:<14}{:>9}", cat.as_str(), "absent");
            }
        }
    }
    if report.skipped_folds > 0 {
        let _ = writeln!(out, "skipped folds: {}", report.skipped_folds);
    }
    if let Some(c) = &report.clusters {
        let ari = c.ari.map_or("n/a".to_string(), |a| format!("{a:.3}"));
        let _ = writeln!(out, "spectral clustering: k={} ARI={ari}", c.k);
    }
    let held = cfg.out.join("heldout_accuracy.json");
    if held.is_file() {
        let text = std::fs::read_to_string(&held).map_err(|e| CliError::io(&held, e))?;
        let summary: HeldOutSummary = serde_json::from_str(&text).map_err(Error::from)?;
        if let Some(acc) = summary.accuracy {
            let per: BTreeMap<_, _> = acc.per_language.iter().collect();
            let _ = writeln!(
                out,
                "held-out reconstruction: {:.3} over {} positions ({} languages)",
                acc.pooled,
                acc.positions,
                per.len()
            );
        }
    }
    Ok(out)
}
