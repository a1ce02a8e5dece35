//! Synthetic language families whose only difference is word order.
//!
//! Every language draws from one pivot lexicon and realizes the clause
//!
//! ```text
//! S = det? adj? noun          V = neg? verb          O = det? adj? noun PP?
//! PP = adposition + (det? adj? noun)
//! ```
//!
//! linearized by five binary-or-wider parameters: clause order, adjective
//! placement, pre/postpositions, negation placement and determiner placement.
//! Genera get prototypes that differ pairwise in at least three parameters;
//! member languages copy the prototype and may flip one parameter.

use crate::numeric::SeededRng;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

/// Column names of the feature table, after `language`.
pub const FEATURE_NAMES: [&str; 5] = ["clause_order", "adj_noun", "adposition", "negation", "determiner"];

const CLAUSE_ORDERS: [&str; 6] = ["SVO", "SOV", "VSO", "VOS", "OVS", "OSV"];
const ADJ_NOUN: [&str; 2] = ["AdjN", "NAdj"];
const ADPOSITION: [&str; 2] = ["Pre", "Post"];
const NEGATION: [&str; 2] = ["PreV", "PostV"];
const DETERMINER: [&str; 2] = ["DetN", "NDet"];

/// Value domain of each feature, in [`FEATURE_NAMES`] order.
pub const FEATURE_DOMAINS: [&[&str]; 5] = [&CLAUSE_ORDERS, &ADJ_NOUN, &ADPOSITION, &NEGATION, &DETERMINER];

/// Five word-order parameters, each stored as an index into its domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TypologyProfile {
    values: [usize; 5],
}

impl TypologyProfile {
    pub fn from_labels(labels: [&str; 5]) -> Result<Self> {
        let mut values = [0; 5];
        for (f, label) in labels.iter().enumerate() {
            values[f] = FEATURE_DOMAINS[f].iter().position(|v| v == label).ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "`{label}` is not a value of {} ({:?})",
                    FEATURE_NAMES[f], FEATURE_DOMAINS[f]
                ))
            })?;
        }
        Ok(TypologyProfile { values })
    }

    pub fn labels(&self) -> [&'static str; 5] {
        std::array::from_fn(|f| FEATURE_DOMAINS[f][self.values[f]])
    }

    pub fn clause_order(&self) -> &'static str {
        CLAUSE_ORDERS[self.values[0]]
    }

    fn adj_first(&self) -> bool {
        self.values[1] == 0
    }

    fn prepositional(&self) -> bool {
        self.values[2] == 0
    }

    fn neg_first(&self) -> bool {
        self.values[3] == 0
    }

    fn det_first(&self) -> bool {
        self.values[4] == 0
    }

    /// Number of parameters on which two profiles disagree.
    pub fn distance(&self, other: &TypologyProfile) -> usize {
        self.values.iter().zip(&other.values).filter(|(a, b)| a != b).count()
    }

    /// All 96 profiles in lexicographic index order.
    pub fn all() -> Vec<TypologyProfile> {
        let mut out = Vec::with_capacity(96);
        for a in 0..6 {
            for b in 0..2 {
                for c in 0..2 {
                    for d in 0..2 {
                        for e in 0..2 {
                            out.push(TypologyProfile {
                                values: [a, b, c, d, e],
                            });
                        }
                    }
                }
            }
        }
        out
    }

    /// Changes one uniformly chosen parameter to a different value, chosen
    /// uniformly among the remaining ones.
    pub fn mutate(&self, rng: &mut SeededRng) -> TypologyProfile {
        let f = rng.below(5);
        let width = FEATURE_DOMAINS[f].len();
        let shift = 1 + rng.below(width - 1);
        let mut values = self.values;
        values[f] = (values[f] + shift) % width;
        TypologyProfile { values }
    }
}

/// Pivot words by category.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lexicon {
    pub nouns: Vec<String>,
    pub verbs: Vec<String>,
    pub adjectives: Vec<String>,
    pub determiners: Vec<String>,
    pub adpositions: Vec<String>,
    pub negation: String,
}

const NOUNS: [&str; 30] = [
    "dog", "cat", "tree", "house", "bird", "river", "stone", "child", "woman", "man", "horse", "fish", "king", "city",
    "road", "ship", "book", "door", "field", "hill", "star", "moon", "sun", "fire", "wind", "boat", "apple", "table",
    "garden", "mountain",
];
const VERBS: [&str; 12] = [
    "sees", "takes", "finds", "loves", "follows", "hears", "carries", "builds", "eats", "holds", "breaks", "knows",
];
const ADJECTIVES: [&str; 10] = [
    "red", "blue", "old", "small", "big", "green", "dark", "young", "cold", "happy",
];
const DETERMINERS: [&str; 4] = ["the", "a", "this", "that"];
const ADPOSITIONS: [&str; 3] = ["near", "under", "with"];

impl Lexicon {
    /// Lexicon of `size` words: 4 determiners, 3 adpositions and one negation
    /// word, with the rest split 30:12:10 between nouns, verbs and
    /// adjectives. Size 60 gives exactly the built-in word lists; larger
    /// sizes add numbered words such as `noun31`.
    pub fn with_size(size: usize) -> Result<Self> {
        let fixed = DETERMINERS.len() + ADPOSITIONS.len() + 1;
        if size < fixed + 3 {
            return Err(Error::InvalidArgument(format!(
                "lexicon size {size} leaves no room for content words (minimum {})",
                fixed + 3
            )));
        }
        let content = size - fixed;
        let verbs = (content * 12 / 52).max(1);
        let adjectives = (content * 10 / 52).max(1);
        let nouns = content - verbs - adjectives;
        let take = |list: &[&str], n: usize, stem: &str| -> Vec<String> {
            (0..n)
                .map(|i| {
                    list.get(i)
                        .map(|w| w.to_string())
                        .unwrap_or_else(|| format!("{stem}{}", i + 1))
                })
                .collect()
        };
        Ok(Lexicon {
            nouns: take(&NOUNS, nouns, "noun"),
            verbs: take(&VERBS, verbs, "verb"),
            adjectives: take(&ADJECTIVES, adjectives, "adj"),
            determiners: DETERMINERS.iter().map(|w| w.to_string()).collect(),
            adpositions: ADPOSITIONS.iter().map(|w| w.to_string()).collect(),
            negation: "not".to_string(),
        })
    }

    pub fn len(&self) -> usize {
        self.nouns.len()
            + self.verbs.len()
            + self.adjectives.len()
            + self.determiners.len()
            + self.adpositions.len()
            + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Every word, category by category.
    pub fn words(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.len());
        for list in [
            &self.nouns,
            &self.verbs,
            &self.adjectives,
            &self.determiners,
            &self.adpositions,
        ] {
            out.extend(list.iter().cloned());
        }
        out.push(self.negation.clone());
        out
    }

    fn validate(&self) -> Result<()> {
        let cats = [
            ("nouns", &self.nouns),
            ("verbs", &self.verbs),
            ("adjectives", &self.adjectives),
            ("determiners", &self.determiners),
            ("adpositions", &self.adpositions),
        ];
        for (name, list) in cats {
            if list.is_empty() {
                return Err(Error::InvalidArgument(format!("lexicon has no {name}")));
            }
        }
        if self.negation.is_empty() {
            return Err(Error::InvalidArgument("lexicon has no negation word".into()));
        }
        Ok(())
    }
}

/// Shape of a generated family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FamilySpec {
    pub genera: usize,
    pub languages_per_genus: usize,
    /// Probability that a language flips one parameter of its prototype.
    pub mutation_rate: f64,
    pub lexicon_size: usize,
    pub sentences_per_language: usize,
    pub seed: u64,
    /// Rename every word per language (`code:word`) so no surface form is
    /// shared across languages.
    pub specific_surface: bool,
}

impl Default for FamilySpec {
    fn default() -> Self {
        FamilySpec {
            genera: 3,
            languages_per_genus: 4,
            mutation_rate: 0.25,
            lexicon_size: 60,
            sentences_per_language: 2000,
            seed: 0,
            specific_surface: false,
        }
    }
}

impl FamilySpec {
    pub fn validate(&self) -> Result<()> {
        if self.genera < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 genera, got {}",
                self.genera
            )));
        }
        if self.languages_per_genus == 0 {
            return Err(Error::InvalidArgument("languages_per_genus must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(Error::InvalidArgument(format!(
                "mutation_rate {} outside [0, 1]",
                self.mutation_rate
            )));
        }
        Ok(())
    }
}

/// Profiles and genus labels, one entry per language in code order.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub languages: Vec<String>,
    pub profiles: Vec<TypologyProfile>,
    pub genera: Vec<usize>,
}

/// Minimum number of parameters on which two genus prototypes differ.
pub const PROTOTYPE_DISTANCE: usize = 3;

/// Picks genus prototypes greedily from a seeded shuffle of all profiles,
/// then derives each language from its prototype. Codes are `g<genus>l<i>`.
pub fn sample_family(spec: &FamilySpec) -> Result<GroundTruth> {
    spec.validate()?;
    let mut rng = SeededRng::derived(spec.seed, "synth.family");
    let mut pool = TypologyProfile::all();
    rng.shuffle(&mut pool);
    let mut prototypes: Vec<TypologyProfile> = Vec::with_capacity(spec.genera);
    for p in pool {
        if prototypes.iter().all(|q| q.distance(&p) >= PROTOTYPE_DISTANCE) {
            prototypes.push(p);
            if prototypes.len() == spec.genera {
                break;
            }
        }
    }
    if prototypes.len() < spec.genera {
        return Err(Error::InvalidArgument(format!(
            "only {} prototypes differing in >= {PROTOTYPE_DISTANCE} parameters are available, {} genera requested",
            prototypes.len(),
            spec.genera
        )));
    }
    let mut gt = GroundTruth {
        languages: Vec::new(),
        profiles: Vec::new(),
        genera: Vec::new(),
    };
    for (g, proto) in prototypes.iter().enumerate() {
        for l in 0..spec.languages_per_genus {
            let profile = if rng.bernoulli(spec.mutation_rate) {
                proto.mutate(&mut rng)
            } else {
                *proto
            };
            gt.languages.push(format!("g{g}l{l}"));
            gt.profiles.push(profile);
            gt.genera.push(g);
        }
    }
    Ok(gt)
}

/// One noun phrase's draws. Every slot is drawn whether used or not, so the
/// random stream does not depend on the profile.
struct NounPhrase<'a> {
    det: Option<&'a str>,
    adj: Option<&'a str>,
    noun: &'a str,
}

fn pick<'a>(list: &'a [String], rng: &mut SeededRng) -> &'a str {
    &list[rng.below(list.len())]
}

fn draw_np<'a>(lex: &'a Lexicon, rng: &mut SeededRng) -> NounPhrase<'a> {
    let has_det = rng.bernoulli(0.5);
    let det = pick(&lex.determiners, rng);
    let has_adj = rng.bernoulli(0.5);
    let adj = pick(&lex.adjectives, rng);
    let noun = pick(&lex.nouns, rng);
    NounPhrase {
        det: has_det.then_some(det),
        adj: has_adj.then_some(adj),
        noun,
    }
}

fn linearize_np<'a>(np: &NounPhrase<'a>, p: &TypologyProfile, out: &mut Vec<&'a str>) {
    let mut core: Vec<&str> = Vec::with_capacity(2);
    match (np.adj, p.adj_first()) {
        (Some(a), true) => core.extend([a, np.noun]),
        (Some(a), false) => core.extend([np.noun, a]),
        (None, _) => core.push(np.noun),
    }
    match (np.det, p.det_first()) {
        (Some(d), true) => {
            out.push(d);
            out.extend(core);
        }
        (Some(d), false) => {
            out.extend(core);
            out.push(d);
        }
        (None, _) => out.extend(core),
    }
}

/// One sentence under `profile`.
pub fn generate_sentence(profile: &TypologyProfile, lex: &Lexicon, rng: &mut SeededRng) -> Vec<String> {
    let subject = draw_np(lex, rng);
    let has_neg = rng.bernoulli(0.5);
    let verb = pick(&lex.verbs, rng);
    let object = draw_np(lex, rng);
    let has_pp = rng.bernoulli(0.5);
    let adposition = pick(&lex.adpositions, rng);
    let pp_np = draw_np(lex, rng);

    let mut s = Vec::new();
    linearize_np(&subject, profile, &mut s);
    let mut v = Vec::new();
    match (has_neg, profile.neg_first()) {
        (true, true) => v.extend([lex.negation.as_str(), verb]),
        (true, false) => v.extend([verb, lex.negation.as_str()]),
        (false, _) => v.push(verb),
    }
    let mut o = Vec::new();
    linearize_np(&object, profile, &mut o);
    if has_pp {
        if profile.prepositional() {
            o.push(adposition);
            linearize_np(&pp_np, profile, &mut o);
        } else {
            linearize_np(&pp_np, profile, &mut o);
            o.push(adposition);
        }
    }
    let order: [&Vec<&str>; 3] = match profile.clause_order() {
        "SVO" => [&s, &v, &o],
        "SOV" => [&s, &o, &v],
        "VSO" => [&v, &s, &o],
        "VOS" => [&v, &o, &s],
        "OVS" => [&o, &v, &s],
        _ => [&o, &s, &v],
    };
    order.iter().flat_map(|c| c.iter().map(|w| w.to_string())).collect()
}

pub fn generate_corpus(
    profile: &TypologyProfile,
    lex: &Lexicon,
    n: usize,
    rng: &mut SeededRng,
) -> Result<Vec<Vec<String>>> {
    lex.validate()?;
    Ok((0..n).map(|_| generate_sentence(profile, lex, rng)).collect())
}

/// Generates and writes `<dir>/<code>.txt` for every language. Each language
/// uses its own stream derived from the family seed and its code.
pub fn write_corpora(spec: &FamilySpec, gt: &GroundTruth, dir: &Path) -> Result<()> {
    let lex = Lexicon::with_size(spec.lexicon_size)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (code, profile) in gt.languages.iter().zip(&gt.profiles) {
        let mut rng = SeededRng::derived(spec.seed, &format!("synth.corpus.{code}"));
        let sentences = generate_corpus(profile, &lex, spec.sentences_per_language, &mut rng)?;
        let mut text = String::new();
        for s in sentences {
            let words: Vec<String> = if spec.specific_surface {
                s.iter().map(|w| format!("{code}:{w}")).collect()
            } else {
                s
            };
            text.push_str(&words.join(" "));
            text.push('\n');
        }
        let path = dir.join(format!("{code}.txt"));
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

pub fn feature_csv(gt: &GroundTruth) -> String {
    let mut out = format!("language,{}\n", FEATURE_NAMES.join(","));
    for (code, p) in gt.languages.iter().zip(&gt.profiles) {
        let _ = writeln!(out, "{code},{}", p.labels().join(","));
    }
    out
}

pub fn genus_text(gt: &GroundTruth) -> String {
    let mut out = String::new();
    for (code, g) in gt.languages.iter().zip(&gt.genera) {
        let _ = writeln!(out, "{code} {g}");
    }
    out
}

/// Writes `features` (CSV table) and `genera` (two-column labels).
pub fn emit_ground_truth(gt: &GroundTruth, features: &Path, genera: &Path) -> Result<()> {
    if gt.languages.is_empty() {
        return Err(Error::InvalidArgument("empty ground truth".into()));
    }
    std::fs::write(features, feature_csv(gt)).map_err(|e| Error::io(features, e))?;
    std::fs::write(genera, genus_text(gt)).map_err(|e| Error::io(genera, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashMap;

    fn profile(labels: [&str; 5]) -> TypologyProfile {
        TypologyProfile::from_labels(labels).unwrap()
    }

    fn lex() -> Lexicon {
        Lexicon::with_size(60).unwrap()
    }

    #[test]
    fn default_lexicon_composition() {
        let l = lex();
        assert_eq!(
            (
                l.nouns.len(),
                l.verbs.len(),
                l.adjectives.len(),
                l.determiners.len(),
                l.adpositions.len()
            ),
            (30, 12, 10, 4, 3)
        );
        assert_eq!(l.len(), 60);
        assert_eq!(l.words().len(), 60);
        assert!(Lexicon::with_size(5).is_err());
        assert_eq!(Lexicon::with_size(112).unwrap().len(), 112);
    }

    #[test]
    fn template_example_with_all_slots() {
        let p = profile(["SVO", "AdjN", "Pre", "PreV", "DetN"]);
        let l = lex();
        let np = |d, a, n| NounPhrase {
            det: Some(d),
            adj: Some(a),
            noun: n,
        };
        let mut out = Vec::new();
        linearize_np(&np("the", "red", "dog"), &p, &mut out);
        assert_eq!(out, ["the", "red", "dog"]);
        // Search a seed whose draw turns every optional slot on.
        let full = (0..10_000u64)
            .map(|s| generate_sentence(&p, &l, &mut SeededRng::new(s)))
            .find(|s| s.len() == 12)
            .unwrap();
        let cats: Vec<&str> = full.iter().map(|w| category(&l, w)).collect();
        // "the red dog not sees the blue cat near the old tree"
        assert_eq!(
            cats,
            ["det", "adj", "noun", "neg", "verb", "det", "adj", "noun", "adp", "det", "adj", "noun"]
        );
    }

    fn category(l: &Lexicon, w: &str) -> &'static str {
        if l.nouns.iter().any(|x| x == w) {
            "noun"
        } else if l.verbs.iter().any(|x| x == w) {
            "verb"
        } else if l.adjectives.iter().any(|x| x == w) {
            "adj"
        } else if l.determiners.iter().any(|x| x == w) {
            "det"
        } else if l.adpositions.iter().any(|x| x == w) {
            "adp"
        } else {
            "neg"
        }
    }

    #[test]
    fn sov_moves_verb_group_to_the_end() {
        let l = lex();
        let svo = generate_sentence(
            &profile(["SVO", "AdjN", "Pre", "PreV", "DetN"]),
            &l,
            &mut SeededRng::new(3),
        );
        let sov = generate_sentence(
            &profile(["SOV", "AdjN", "Pre", "PreV", "DetN"]),
            &l,
            &mut SeededRng::new(3),
        );
        let mut a = svo.clone();
        let mut b = sov.clone();
        a.sort();
        b.sort();
        assert_eq!(a, b);
        assert_eq!(category(&l, sov.last().unwrap()), "verb");
    }

    #[test]
    fn identical_profiles_and_seeds_give_identical_corpora() {
        let p = profile(["VSO", "NAdj", "Post", "PostV", "NDet"]);
        let a = generate_corpus(&p, &lex(), 50, &mut SeededRng::new(9)).unwrap();
        let b = generate_corpus(&p, &lex(), 50, &mut SeededRng::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_category_is_rejected() {
        let mut l = lex();
        l.adpositions.clear();
        let p = profile(["SVO", "AdjN", "Pre", "PreV", "DetN"]);
        assert!(generate_corpus(&p, &l, 1, &mut SeededRng::new(0)).is_err());
    }

    #[test]
    fn zero_mutation_copies_prototypes() {
        let spec = FamilySpec {
            mutation_rate: 0.0,
            genera: 4,
            ..FamilySpec::default()
        };
        let gt = sample_family(&spec).unwrap();
        assert_eq!(gt.languages.len(), 16);
        for i in 0..gt.languages.len() {
            for j in 0..gt.languages.len() {
                if gt.genera[i] == gt.genera[j] {
                    assert_eq!(gt.profiles[i], gt.profiles[j]);
                } else {
                    assert!(gt.profiles[i].distance(&gt.profiles[j]) >= PROTOTYPE_DISTANCE);
                }
            }
        }
    }

    #[test]
    fn mutation_flips_exactly_one_parameter() {
        let spec = FamilySpec {
            mutation_rate: 1.0,
            ..FamilySpec::default()
        };
        let base = sample_family(&FamilySpec {
            mutation_rate: 0.0,
            ..spec.clone()
        })
        .unwrap();
        let gt = sample_family(&spec).unwrap();
        for g in 0..spec.genera {
            let proto = base.profiles[g * spec.languages_per_genus];
            for (p, _) in gt.profiles.iter().zip(&gt.genera).filter(|(_, &gg)| gg == g) {
                assert_eq!(p.distance(&proto), 1);
            }
        }
    }

    #[test]
    fn family_is_deterministic_and_validated() {
        let spec = FamilySpec::default();
        assert_eq!(sample_family(&spec).unwrap(), sample_family(&spec).unwrap());
        assert!(sample_family(&FamilySpec {
            genera: 1,
            ..spec.clone()
        })
        .is_err());
        assert!(sample_family(&FamilySpec {
            mutation_rate: 1.5,
            ..spec.clone()
        })
        .is_err());
        assert!(sample_family(&FamilySpec { genera: 200, ..spec }).is_err());
    }

    #[test]
    fn ground_truth_files() {
        let gt = GroundTruth {
            languages: vec!["g0l0".into(), "g1l0".into()],
            profiles: vec![
                profile(["SVO", "AdjN", "Pre", "PreV", "DetN"]),
                profile(["OSV", "NAdj", "Post", "PostV", "NDet"]),
            ],
            genera: vec![0, 1],
        };
        let csv = feature_csv(&gt);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "language,clause_order,adj_noun,adposition,negation,determiner"
        );
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[2], "g1l0,OSV,NAdj,Post,PostV,NDet");
        assert_eq!(genus_text(&gt), "g0l0 0\ng1l0 1\n");
    }

    #[test]
    fn token_frequencies_are_uniform_within_categories() {
        let l = lex();
        let p = profile(["SOV", "NAdj", "Post", "PostV", "NDet"]);
        // 56 simultaneous 3σ checks fail together about 15% of the time on
        // unbiased draws, so the seed is pinned; the chi-square test below
        // is the seed-independent check.
        let corpus = generate_corpus(&p, &l, 4000, &mut SeededRng::new(1)).unwrap();
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for w in corpus.iter().flatten() {
            *counts.entry(w.as_str()).or_default() += 1;
        }
        for list in [&l.nouns, &l.verbs, &l.adjectives, &l.determiners, &l.adpositions] {
            let total: usize = list.iter().map(|w| counts.get(w.as_str()).copied().unwrap_or(0)).sum();
            let prob = 1.0 / list.len() as f64;
            let sd = (total as f64 * prob * (1.0 - prob)).sqrt();
            for w in list {
                let c = counts.get(w.as_str()).copied().unwrap_or(0) as f64;
                assert!((c - total as f64 * prob).abs() <= 3.0 * sd, "{w}: {c} of {total}");
            }
        }
    }

    #[test]
    fn category_counts_pass_chi_square_across_seeds() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let l = lex();
        let p = profile(["VOS", "AdjN", "Pre", "PostV", "DetN"]);
        for seed in 0..20 {
            let corpus = generate_corpus(&p, &l, 2000, &mut SeededRng::new(100 + seed)).unwrap();
            let mut counts: HashMap<&str, f64> = HashMap::new();
            for w in corpus.iter().flatten() {
                *counts.entry(w.as_str()).or_default() += 1.0;
            }
            for list in [&l.nouns, &l.verbs, &l.adjectives, &l.determiners, &l.adpositions] {
                let obs: Vec<f64> = list
                    .iter()
                    .map(|w| counts.get(w.as_str()).copied().unwrap_or(0.0))
                    .collect();
                let expected = obs.iter().sum::<f64>() / obs.len() as f64;
                let stat: f64 = obs.iter().map(|o| (o - expected).powi(2) / expected).sum();
                let p_value = 1.0 - ChiSquared::new((obs.len() - 1) as f64).unwrap().cdf(stat);
                assert!(p_value > 1e-4, "seed {seed}: p = {p_value}");
            }
        }
    }

    /// Template matcher used as an independent grammaticality oracle.
    fn parses(p: &TypologyProfile, l: &Lexicon, toks: &[&str]) -> bool {
        let is = |w: &str, cat: &str| category(l, w) == cat;
        let np = |t: &[&str]| -> bool {
            let (det, rest): (bool, &[&str]) = match (p.det_first(), t) {
                (true, [d, rest @ ..]) if is(d, "det") => (true, rest),
                (false, [rest @ .., d]) if is(d, "det") => (true, rest),
                _ => (false, t),
            };
            let _ = det;
            match rest {
                [n] => is(n, "noun"),
                [a, n] if p.adj_first() => is(a, "adj") && is(n, "noun"),
                [n, a] if !p.adj_first() => is(a, "adj") && is(n, "noun"),
                _ => false,
            }
        };
        let obj = |t: &[&str]| -> bool {
            if np(t) {
                return true;
            }
            (1..t.len()).any(|k| {
                let (head, tail) = t.split_at(k);
                if p.prepositional() {
                    np(head) && matches!(tail, [a, rest @ ..] if is(a, "adp") && np(rest))
                } else {
                    np(head) && matches!(tail, [rest @ .., a] if is(a, "adp") && np(rest))
                }
            })
        };
        let verb = |t: &[&str]| -> bool {
            match t {
                [v] => is(v, "verb"),
                [n, v] if p.neg_first() => is(n, "neg") && is(v, "verb"),
                [v, n] if !p.neg_first() => is(n, "neg") && is(v, "verb"),
                _ => false,
            }
        };
        let order: Vec<char> = p.clause_order().chars().collect();
        let check = |c: char, t: &[&str]| match c {
            'S' => np(t),
            'V' => verb(t),
            _ => obj(t),
        };
        (1..toks.len()).any(|i| {
            (i + 1..toks.len())
                .any(|j| check(order[0], &toks[..i]) && check(order[1], &toks[i..j]) && check(order[2], &toks[j..]))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn sentences_parse_under_their_profile(idx in 0usize..96, seed in any::<u64>()) {
            let p = TypologyProfile::all()[idx];
            let l = lex();
            let mut rng = SeededRng::new(seed);
            for _ in 0..20 {
                let s = generate_sentence(&p, &l, &mut rng);
                let toks: Vec<&str> = s.iter().map(String::as_str).collect();
                prop_assert!(parses(&p, &l, &toks), "{:?} under {:?}", s, p.labels());
            }
        }

        #[test]
        fn verb_positions_separate_clause_orders(a in 0usize..6, b in 0usize..6, rest in 0usize..16) {
            // Rank of the verb group among the three constituents. Orders
            // sharing a rank (SOV/OSV, VSO/VOS) place the verb identically.
            let rank = |o: &str| o.find('V').unwrap();
            let (oa, ob) = (CLAUSE_ORDERS[a], CLAUSE_ORDERS[b]);
            prop_assume!(rank(oa) != rank(ob));
            let bits = [rest & 1, (rest >> 1) & 1, (rest >> 2) & 1, (rest >> 3) & 1];
            let pa = TypologyProfile { values: [a, bits[0], bits[1], bits[2], bits[3]] };
            let pb = TypologyProfile { values: [b, bits[0], bits[1], bits[2], bits[3]] };
            let l = lex();
            let full_positions = |p: &TypologyProfile| -> std::collections::BTreeSet<usize> {
                (0..3000u64)
                    .map(|s| generate_sentence(p, &l, &mut SeededRng::new(s)))
                    .filter(|s| s.len() == 12)
                    .map(|s| s.iter().position(|w| category(&l, w) == "verb").unwrap())
                    .collect()
            };
            let (va, vb) = (full_positions(&pa), full_positions(&pb));
            prop_assert!(!va.is_empty() && !vb.is_empty());
            prop_assert!(va.is_disjoint(&vb), "{} {:?} vs {} {:?}", oa, va, ob, vb);
        }
    }
}
