use crate::numeric::{kmeans, pca, squared_distance, symmetric_eig, Matrix, SeededRng};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt::Write as _;
use std::hash::Hash;
use std::path::Path;

/// k-means restarts on the spectral embedding.
pub const SPECTRAL_RESTARTS: usize = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    /// Cluster per language, numbered by first appearance.
    pub labels: Vec<usize>,
    pub k: usize,
    /// Agreement with reference labels, when those were supplied.
    pub ari: Option<f64>,
}

/// Spectral clustering of the rows of `points`.
///
/// Gaussian affinities with the median pairwise distance as bandwidth, the
/// symmetric normalised Laplacian, and k-means on the row-normalised
/// eigenvectors of its `k` smallest eigenvalues.
pub fn spectral_cluster(points: &Matrix, k: usize, rng: &mut SeededRng) -> Result<ClusterResult> {
    let n = points.rows();
    if k < 2 || k > n {
        return Err(Error::InvalidArgument(format!(
            "spectral clustering needs 2 <= k <= {n}, got k={k}"
        )));
    }
    let mut d2 = Matrix::zeros(n, n);
    let mut distances = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let d = squared_distance(points.row(i), points.row(j));
            d2.set(i, j, d);
            d2.set(j, i, d);
            distances.push(d.sqrt());
        }
    }
    distances.sort_by(f64::total_cmp);
    let m = distances.len();
    let sigma = if m % 2 == 1 {
        distances[m / 2]
    } else {
        0.5 * (distances[m / 2 - 1] + distances[m / 2])
    };
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::Data(format!(
            "degenerate affinity: median pairwise distance is {sigma}"
        )));
    }
    let mut affinity = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            affinity.set(i, j, (-d2.get(i, j) / (2.0 * sigma * sigma)).exp());
        }
    }
    let inv_sqrt_degree: Vec<f64> = (0..n)
        .map(|i| 1.0 / affinity.row(i).iter().sum::<f64>().sqrt())
        .collect();
    let mut laplacian = Matrix::identity(n);
    for i in 0..n {
        for j in 0..n {
            let v = laplacian.get(i, j) - inv_sqrt_degree[i] * affinity.get(i, j) * inv_sqrt_degree[j];
            laplacian.set(i, j, v);
        }
    }
    // Eigenvalues come out in descending order; the smallest are last.
    let eig = symmetric_eig(&laplacian)?;
    let mut embedding = Matrix::zeros(n, k);
    for i in 0..n {
        let row = embedding.row_mut(i);
        for (c, slot) in row.iter_mut().enumerate() {
            *slot = eig.vectors.get(i, n - 1 - c);
        }
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|x| *x /= norm);
        }
    }
    let result = kmeans(&embedding, k, SPECTRAL_RESTARTS, rng)?;
    Ok(ClusterResult {
        labels: first_appearance(&result.labels),
        k,
        ari: None,
    })
}

fn first_appearance<T: Eq + Hash + Clone>(labels: &[T]) -> Vec<usize> {
    let mut ids = HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = ids.len();
            *ids.entry(l.clone()).or_insert(next)
        })
        .collect()
}

fn choose2(n: usize) -> f64 {
    let n = n as f64;
    n * (n - 1.0) / 2.0
}

/// Adjusted Rand index of two labelings (Hubert and Arabie). Returns 1 when
/// the chance-corrected denominator vanishes, which happens only when both
/// partitions are all-singletons or both are a single block.
pub fn adjusted_rand_index<A, B>(a: &[A], b: &[B]) -> Result<f64>
where
    A: Eq + Hash + Clone,
    B: Eq + Hash + Clone,
{
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "label vectors differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::InvalidArgument(
            "adjusted Rand index needs at least 2 items".into(),
        ));
    }
    let (ra, rb) = (first_appearance(a), first_appearance(b));
    let (ka, kb) = (ra.iter().max().unwrap() + 1, rb.iter().max().unwrap() + 1);
    let mut table = vec![0usize; ka * kb];
    let (mut rows, mut cols) = (vec![0usize; ka], vec![0usize; kb]);
    for (&i, &j) in ra.iter().zip(&rb) {
        table[i * kb + j] += 1;
        rows[i] += 1;
        cols[j] += 1;
    }
    let index: f64 = table.iter().map(|&c| choose2(c)).sum();
    let sum_a: f64 = rows.iter().map(|&c| choose2(c)).sum();
    let sum_b: f64 = cols.iter().map(|&c| choose2(c)).sum();
    let expected = sum_a * sum_b / choose2(a.len());
    let max = 0.5 * (sum_a + sum_b);
    if max - expected == 0.0 {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Two-dimensional projection of language embeddings.
#[derive(Clone, Debug, PartialEq)]
pub struct PcaExport {
    pub languages: Vec<String>,
    /// `languages x 2`.
    pub coordinates: Matrix,
    pub explained_variance: Vec<f64>,
    pub genus: Option<Vec<String>>,
}

impl PcaExport {
    /// `lang,x,y` rows, with a `genus` column when labels were supplied.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(if self.genus.is_some() {
            "lang,x,y,genus\n"
        } else {
            "lang,x,y\n"
        });
        for (i, lang) in self.languages.iter().enumerate() {
            let (x, y) = (self.coordinates.get(i, 0), self.coordinates.get(i, 1));
            let _ = write!(out, "{lang},{x},{y}");
            if let Some(g) = &self.genus {
                let _ = write!(out, ",{}", g[i]);
            }
            out.push('\n');
        }
        out
    }
}

/// Projects `vectors` (one row per language) onto two principal components.
/// `genera` must label every language when given.
pub fn pca_export(
    languages: &[String],
    vectors: &Matrix,
    genera: Option<&HashMap<String, String>>,
) -> Result<PcaExport> {
    if languages.len() != vectors.rows() {
        return Err(Error::Shape {
            op: "pca_export",
            left: (languages.len(), 1),
            right: vectors.shape(),
        });
    }
    if languages.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "PCA export needs at least 3 languages, got {}",
            languages.len()
        )));
    }
    let p = pca(vectors, 2)?;
    let genus = genera
        .map(|g| {
            languages
                .iter()
                .map(|l| {
                    g.get(l)
                        .cloned()
                        .ok_or_else(|| Error::Data(format!("no genus label for language `{l}`")))
                })
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?;
    Ok(PcaExport {
        languages: languages.to_vec(),
        coordinates: p.coordinates,
        explained_variance: p.explained_variance,
        genus,
    })
}

/// Parses `code genus` lines; blank lines are skipped.
pub fn parse_genera(text: &str, context: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            [] => continue,
            [code, genus] => {
                if out.iter().any(|(c, _)| c == code) {
                    return Err(Error::parse(
                        context,
                        format!("line {}: language `{code}` repeated", n + 1),
                    ));
                }
                out.push((code.to_string(), genus.to_string()));
            }
            _ => {
                return Err(Error::parse(
                    context,
                    format!("line {}: expected `<language> <genus>`", n + 1),
                ))
            }
        }
    }
    Ok(out)
}

pub fn load_genera(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_genera(&text, &path.display().to_string())
}
