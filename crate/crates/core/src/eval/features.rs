use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

/// Feature-to-category assignment for WALS features, keyed by feature id.
pub const BUNDLED_CATEGORIES: &str = include_str!("../../data/wals_categories.csv");

/// Coarse grouping of typological features by how much a word-order model
/// can be expected to learn about them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Lexicon,
    Syntax,
    PartMorph,
    NonLearnable,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Lexicon,
        Category::Syntax,
        Category::PartMorph,
        Category::NonLearnable,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Lexicon => "Lexicon",
            Category::Syntax => "Syntax",
            Category::PartMorph => "PartMorph",
            Category::NonLearnable => "NonLearnable",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown feature category `{s}` (expected one of Lexicon, Syntax, PartMorph, NonLearnable)"
                ))
            })
    }
}

/// A categorical feature and its value domain, sorted lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feature {
    pub id: String,
    pub category: Category,
    pub domain: Vec<String>,
}

/// Languages by features, each cell an index into the feature's domain or
/// missing.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTable {
    languages: Vec<String>,
    features: Vec<Feature>,
    cells: Vec<Vec<Option<usize>>>,
}

impl FeatureTable {
    /// Builds a table from string cells; domains are the sorted distinct
    /// values of each column.
    pub fn from_labels(
        languages: Vec<String>,
        features: Vec<(String, Category)>,
        labels: Vec<Vec<Option<String>>>,
    ) -> Result<Self> {
        if labels.len() != languages.len() {
            return Err(Error::Data(format!(
                "{} rows of values for {} languages",
                labels.len(),
                languages.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for code in &languages {
            if !seen.insert(code) {
                return Err(Error::Data(format!("language `{code}` appears twice")));
            }
        }
        let mut ids = BTreeSet::new();
        for (id, _) in &features {
            if !ids.insert(id) {
                return Err(Error::Data(format!("feature `{id}` appears twice")));
            }
        }
        if let Some((i, row)) = labels.iter().enumerate().find(|(_, r)| r.len() != features.len()) {
            return Err(Error::Data(format!(
                "language `{}` has {} values for {} features",
                languages[i],
                row.len(),
                features.len()
            )));
        }
        let features: Vec<Feature> = features
            .into_iter()
            .enumerate()
            .map(|(f, (id, category))| {
                let domain: BTreeSet<&String> = labels.iter().filter_map(|r| r[f].as_ref()).collect();
                Feature {
                    id,
                    category,
                    domain: domain.into_iter().cloned().collect(),
                }
            })
            .collect();
        let cells = labels
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&features)
                    .map(|(v, feat)| {
                        v.as_ref()
                            .map(|v| feat.domain.binary_search(v).expect("value in domain"))
                    })
                    .collect()
            })
            .collect();
        Ok(FeatureTable {
            languages,
            features,
            cells,
        })
    }

    /// Wide CSV: header `language,<feature>...`, one row per language, empty
    /// cells missing. Every feature gets `category`.
    pub fn parse_wide(text: &str, category: Category, context: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| Error::parse(context, e.to_string()))?
            .clone();
        if header.is_empty() {
            return Err(Error::parse(context, "empty header"));
        }
        let features = header.iter().skip(1).map(|id| (id.to_string(), category)).collect();
        let mut languages = Vec::new();
        let mut labels = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::parse(context, e.to_string()))?;
            languages.push(record[0].to_string());
            labels.push(
                record
                    .iter()
                    .skip(1)
                    .map(|v| (!v.is_empty()).then(|| v.to_string()))
                    .collect(),
            );
        }
        FeatureTable::from_labels(languages, features, labels)
    }

    /// Long CSV as exported from WALS: one `language_code,feature_id,value`
    /// row per attested value. CLDF column names (`Language_ID`,
    /// `Parameter_ID`, `Value`) are accepted too. Features without a category
    /// are dropped with a warning. Languages and features keep their order
    /// of first appearance.
    pub fn parse_long(text: &str, categories: &HashMap<String, Category>, context: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| Error::parse(context, e.to_string()))?
            .clone();
        let column = |names: &[&str]| {
            header
                .iter()
                .position(|h| names.iter().any(|n| n.eq_ignore_ascii_case(h)))
                .ok_or_else(|| Error::parse(context, format!("missing column `{}`", names[0])))
        };
        let (lc, fc, vc) = (
            column(&["language_code", "Language_ID"])?,
            column(&["feature_id", "Parameter_ID"])?,
            column(&["value", "Value"])?,
        );
        let mut languages: Vec<String> = Vec::new();
        let mut lang_index = HashMap::new();
        let mut features: Vec<(String, Category)> = Vec::new();
        let mut feat_index = HashMap::new();
        let mut values: HashMap<(usize, usize), String> = HashMap::new();
        let mut uncategorized = BTreeSet::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::parse(context, e.to_string()))?;
            let field = |i: usize| record.get(i).unwrap_or("").to_string();
            let (lang, feat, value) = (field(lc), field(fc), field(vc));
            if lang.is_empty() || feat.is_empty() {
                return Err(Error::parse(context, format!("incomplete row {:?}", record)));
            }
            let Some(&category) = categories.get(&feat) else {
                uncategorized.insert(feat);
                continue;
            };
            let l = *lang_index.entry(lang.clone()).or_insert_with(|| {
                languages.push(lang.clone());
                languages.len() - 1
            });
            let f = *feat_index.entry(feat.clone()).or_insert_with(|| {
                features.push((feat.clone(), category));
                features.len() - 1
            });
            if value.is_empty() {
                continue;
            }
            if let Some(old) = values.get(&(l, f)) {
                if *old != value {
                    return Err(Error::Data(format!(
                        "{context}: language `{lang}` has values `{old}` and `{value}` for feature `{feat}`"
                    )));
                }
            }
            values.insert((l, f), value);
        }
        if !uncategorized.is_empty() {
            log::warn!(
                "{context}: dropping {} features without a category: {}",
                uncategorized.len(),
                uncategorized.into_iter().collect::<Vec<_>>().join(" ")
            );
        }
        let labels = (0..languages.len())
            .map(|l| (0..features.len()).map(|f| values.remove(&(l, f))).collect())
            .collect();
        FeatureTable::from_labels(languages, features, labels)
    }

    pub fn load_wide(path: &Path, category: Category) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        FeatureTable::parse_wide(&text, category, &path.display().to_string())
    }

    pub fn load_long(path: &Path, categories: &HashMap<String, Category>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        FeatureTable::parse_long(&text, categories, &path.display().to_string())
    }

    pub fn languages(&self) -> &[String] {
        &self.languages
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn language_index(&self, code: &str) -> Option<usize> {
        self.languages.iter().position(|l| l == code)
    }

    /// Domain index of the value, if present.
    pub fn value(&self, language: usize, feature: usize) -> Option<usize> {
        self.cells[language][feature]
    }

    pub fn label(&self, language: usize, feature: usize) -> Option<&str> {
        self.value(language, feature)
            .map(|v| self.features[feature].domain[v].as_str())
    }

    pub fn present_count(&self, feature: usize) -> usize {
        self.cells.iter().filter(|row| row[feature].is_some()).count()
    }

    /// Keeps features with strictly more than `min_coverage * languages`
    /// present values. Fully attested features always stay, so that a
    /// coverage of 1.0 keeps exactly those. Domains are left as they are.
    pub fn filter_features(&self, min_coverage: f64) -> Result<Self> {
        if !(min_coverage > 0.0 && min_coverage <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "min_coverage must lie in (0, 1], got {min_coverage}"
            )));
        }
        let threshold = min_coverage * self.languages.len() as f64;
        let keep: Vec<usize> = (0..self.features.len())
            .filter(|&f| {
                let present = self.present_count(f);
                present as f64 > threshold || present == self.languages.len()
            })
            .collect();
        Ok(FeatureTable {
            languages: self.languages.clone(),
            features: keep.iter().map(|&f| self.features[f].clone()).collect(),
            cells: self
                .cells
                .iter()
                .map(|row| keep.iter().map(|&f| row[f]).collect())
                .collect(),
        })
    }

    /// The rows for `codes`, in that order. Every code must be in the table.
    pub fn select_languages(&self, codes: &[String]) -> Result<Self> {
        let rows = codes
            .iter()
            .map(|c| {
                self.language_index(c)
                    .ok_or_else(|| Error::Data(format!("language `{c}` is not in the feature table")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureTable {
            languages: codes.to_vec(),
            features: self.features.clone(),
            cells: rows.iter().map(|&r| self.cells[r].clone()).collect(),
        })
    }

    /// Features per category, in table order.
    pub fn by_category(&self) -> BTreeMap<Category, Vec<usize>> {
        let mut out: BTreeMap<Category, Vec<usize>> = BTreeMap::new();
        for (f, feat) in self.features.iter().enumerate() {
            out.entry(feat.category).or_default().push(f);
        }
        out
    }
}

/// Parses a `feature_id,category` file.
pub fn parse_categories(text: &str, context: &str) -> Result<HashMap<String, Category>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::parse(context, e.to_string()))?;
        if record.len() != 2 {
            return Err(Error::parse(context, format!("expected 2 fields, got {:?}", record)));
        }
        let category: Category = record[1]
            .parse()
            .map_err(|e: Error| Error::parse(context, e.to_string()))?;
        if out.insert(record[0].to_string(), category).is_some() {
            return Err(Error::parse(context, format!("feature `{}` listed twice", &record[0])));
        }
    }
    Ok(out)
}

pub fn bundled_categories() -> HashMap<String, Category> {
    parse_categories(BUNDLED_CATEGORIES, "bundled categories").expect("bundled category file is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{feature_csv, sample_family, FamilySpec, FEATURE_NAMES};

    fn coverage_table(present: usize, total: usize) -> FeatureTable {
        let text: String = std::iter::once("language,f,full\n".to_string())
            .chain((0..total).map(|i| {
                let v = if i < present { "A" } else { "" };
                format!("l{i},{v},B\n")
            }))
            .collect();
        FeatureTable::parse_wide(&text, Category::Syntax, "t").unwrap()
    }

    #[test]
    fn coverage_threshold_is_strict() {
        assert_eq!(coverage_table(13, 26).filter_features(0.5).unwrap().features().len(), 1);
        let kept = coverage_table(14, 26).filter_features(0.5).unwrap();
        assert_eq!(kept.features().len(), 2);
        let full = coverage_table(25, 26).filter_features(1.0).unwrap();
        assert_eq!(
            full.features().iter().map(|f| f.id.as_str()).collect::<Vec<_>>(),
            ["full"]
        );
        assert!(coverage_table(3, 4).filter_features(0.0).is_err());
    }

    #[test]
    fn synthetic_table_round_trips_profiles() {
        let gt = sample_family(&FamilySpec::default()).unwrap();
        let table = FeatureTable::parse_wide(&feature_csv(&gt), Category::Syntax, "t").unwrap();
        assert_eq!(table.languages(), gt.languages.as_slice());
        assert_eq!(
            table.features().iter().map(|f| f.id.as_str()).collect::<Vec<_>>(),
            FEATURE_NAMES
        );
        for (l, p) in gt.profiles.iter().enumerate() {
            let labels: Vec<&str> = (0..5).map(|f| table.label(l, f).unwrap()).collect();
            assert_eq!(labels, p.labels());
        }
        for feat in table.features() {
            assert!(feat.domain.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn long_format_with_quotes_and_unknown_features() {
        let cats: HashMap<String, Category> = [
            ("81A".to_string(), Category::Syntax),
            ("1A".to_string(), Category::NonLearnable),
        ]
        .into();
        let text = "language_code,feature_id,value\n\
                    eng,81A,SVO\n\
                    deu,81A,\"No dominant order, SOV/SVO\"\n\
                    eng,1A,Average\n\
                    deu,999Z,x\n";
        let t = FeatureTable::parse_long(text, &cats, "t").unwrap();
        assert_eq!(t.languages(), ["eng", "deu"]);
        assert_eq!(t.features().len(), 2);
        assert_eq!(t.label(1, 0), Some("No dominant order, SOV/SVO"));
        assert_eq!(t.label(1, 1), None);
        assert_eq!(t.features()[1].category, Category::NonLearnable);

        let conflict = "language_code,feature_id,value\neng,81A,SVO\neng,81A,SOV\n";
        assert!(FeatureTable::parse_long(conflict, &cats, "t").is_err());
        let cldf = "ID,Language_ID,Parameter_ID,Value\n1,eng,81A,SVO\n";
        assert_eq!(
            FeatureTable::parse_long(cldf, &cats, "t").unwrap().label(0, 0),
            Some("SVO")
        );
    }

    #[test]
    fn bundled_categories_cover_the_four_groups() {
        let cats = bundled_categories();
        let count = |c| cats.values().filter(|&&v| v == c).count();
        assert_eq!(count(Category::Lexicon), 2);
        assert_eq!(count(Category::Syntax), 24);
        assert_eq!(count(Category::PartMorph), 54);
        assert_eq!(count(Category::NonLearnable), 30);
        assert_eq!(cats["81A"], Category::Syntax);
        assert_eq!(cats["129A"], Category::Lexicon);
    }

    #[test]
    fn select_languages_reorders_and_rejects_unknown() {
        let t = coverage_table(3, 3);
        let s = t.select_languages(&["l2".into(), "l0".into()]).unwrap();
        assert_eq!(s.languages(), ["l2", "l0"]);
        assert!(t.select_languages(&["zz".into()]).is_err());
    }
}
