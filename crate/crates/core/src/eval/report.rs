use super::cluster::ClusterResult;
use super::features::Category;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

/// Held-out outcome for one language, summed over repeats.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub language: String,
    pub truth: String,
    /// Repeats in which the prediction was right.
    pub correct: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureResult {
    pub id: String,
    pub category: Category,
    pub folds: Vec<FoldResult>,
    pub skipped_folds: usize,
    /// Mean over repeats and folds; absent when every fold was skipped.
    pub accuracy: Option<f64>,
    pub majority: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryResult {
    /// Features contributing to the averages.
    pub features: usize,
    pub accuracy: f64,
    pub majority: f64,
    pub random: f64,
    /// One-sided signed-rank p-value of the repeat accuracies over Majority.
    pub p_value: f64,
    pub significant: bool,
    pub per_repeat: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub repeats: usize,
    pub skipped_folds: usize,
    /// Every category; `None` when the table has no usable feature for it.
    pub categories: BTreeMap<Category, Option<CategoryResult>>,
    pub features: Vec<FeatureResult>,
    pub clusters: Option<ClusterResult>,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// One row per category; absent categories have empty cells.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("category,features,accuracy,majority,random,p_value,significant\n");
        for cat in Category::ALL {
            match self.categories.get(&cat).and_then(Option::as_ref) {
                Some(r) => {
                    let _ = writeln!(
                        out,
                        "{cat},{},{},{},{},{},{}",
                        r.features, r.accuracy, r.majority, r.random, r.p_value, r.significant
                    );
                }
                None => {
                    let _ = writeln!(out, "{cat},0,,,,,");
                }
            }
        }
        if let Some(c) = &self.clusters {
            let ari = c.ari.map(|a| a.to_string()).unwrap_or_default();
            let _ = writeln!(out, "# clusters k={} ari={ari}", c.k);
        }
        out
    }

    pub fn save(&self, json: &Path, csv: &Path) -> Result<()> {
        std::fs::write(json, self.to_json()?).map_err(|e| Error::io(json, e))?;
        std::fs::write(csv, self.summary_csv()).map_err(|e| Error::io(csv, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn absent_categories_serialize_as_null_and_round_trip() {
        let mut categories: BTreeMap<Category, Option<CategoryResult>> =
            Category::ALL.into_iter().map(|c| (c, None)).collect();
        categories.insert(
            Category::Syntax,
            Some(CategoryResult {
                features: 5,
                accuracy: 0.9,
                majority: 0.6,
                random: 0.4,
                p_value: 1e-9,
                significant: true,
                per_repeat: vec![0.9],
            }),
        );
        let report = EvalReport {
            repeats: 1,
            skipped_folds: 0,
            categories,
            features: Vec::new(),
            clusters: Some(ClusterResult {
                labels: vec![0, 1],
                k: 2,
                ari: Some(1.0),
            }),
        };
        let json = report.to_json().unwrap();
        assert!(json.contains("\"Lexicon\": null"));
        assert_eq!(EvalReport::from_json(&json).unwrap(), report);
        let csv = report.summary_csv();
        assert!(csv.contains("Lexicon,0,,,,,\n"));
        assert!(csv.contains("Syntax,5,0.9,0.6,0.4,0.000000001,true\n"));
    }
}
