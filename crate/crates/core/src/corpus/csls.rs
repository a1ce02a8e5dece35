//! Word vectors in the plain-text exchange format and CSLS nearest-neighbour
//! mapping into a pivot space.
//!
//! `CSLS(x, y) = 2 cos(x, y) - r_src(x) - r_pivot(y)`, where `r_src(x)` is the
//! mean cosine between `x` and its `k` nearest pivot vectors and `r_pivot(y)`
//! the mean cosine between `y` and its `k` nearest source vectors. Hubs, which
//! are close to everything, are penalised by their own neighbourhood density.

use crate::numeric::{gemm, Matrix};
use crate::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

/// Named vectors, one row per word.
#[derive(Clone, Debug, PartialEq)]
pub struct WordVectors {
    pub words: Vec<String>,
    pub vectors: Matrix,
}

impl WordVectors {
    pub fn new(words: Vec<String>, vectors: Matrix) -> Result<Self> {
        if words.len() != vectors.rows() {
            return Err(Error::InvalidArgument(format!(
                "{} words for {} vectors",
                words.len(),
                vectors.rows()
            )));
        }
        Ok(WordVectors { words, vectors })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    /// Header `<count> <dim>`, then `<word> v1 ... v_dim`. Values use the
    /// shortest representation that parses back to the same bits.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.len(), self.dim());
        for (r, w) in self.words.iter().enumerate() {
            out.push_str(w);
            for v in self.vectors.row(r) {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str, context: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(context, "missing header line"))?;
        let head: Vec<&str> = header.split_whitespace().collect();
        let (count, dim) = match head.as_slice() {
            [c, d] => (
                c.parse::<usize>()
                    .map_err(|e| Error::parse(context, format!("bad count: {e}")))?,
                d.parse::<usize>()
                    .map_err(|e| Error::parse(context, format!("bad dimension: {e}")))?,
            ),
            _ => return Err(Error::parse(context, "header must be `<count> <dim>`")),
        };
        let mut words = Vec::with_capacity(count);
        let mut data = Vec::with_capacity(count * dim);
        for (n, line) in lines {
            let mut fields = line.split_whitespace();
            let word = fields.next().expect("non-blank line");
            let before = data.len();
            for f in fields {
                let v: f64 = f
                    .parse()
                    .map_err(|e| Error::parse(context, format!("line {}: {e}", n + 1)))?;
                data.push(v);
            }
            if data.len() - before != dim {
                return Err(Error::parse(
                    context,
                    format!("line {}: expected {dim} values, got {}", n + 1, data.len() - before),
                ));
            }
            words.push(word.to_string());
        }
        if words.len() != count {
            return Err(Error::parse(
                context,
                format!("header announces {count} rows, found {}", words.len()),
            ));
        }
        WordVectors::new(words, Matrix::from_vec(count, dim, data)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        WordVectors::parse(&text, &path.display().to_string())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// Rows scaled to unit length; a zero row is an error naming its word.
    fn normalized(&self) -> Result<Matrix> {
        let mut m = self.vectors.clone();
        for r in 0..m.rows() {
            let row = m.row_mut(r);
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 || !norm.is_finite() {
                return Err(Error::ZeroVector(self.words[r].clone()));
            }
            row.iter_mut().for_each(|v| *v /= norm);
        }
        Ok(m)
    }
}

/// Mean of the `k` largest entries of each row.
fn top_k_means(sim: &Matrix, k: usize) -> Vec<f64> {
    let k = k.min(sim.cols());
    (0..sim.rows())
        .map(|r| {
            let mut row = sim.row(r).to_vec();
            row.sort_by(|a, b| b.total_cmp(a));
            row[..k].iter().sum::<f64>() / k as f64
        })
        .collect()
}

/// For each source row, the pivot row index maximizing CSLS. Ties go to the
/// lower pivot index. `k` is clamped to the size of the other set.
pub fn csls_indices(source: &WordVectors, pivot: &WordVectors, k: usize) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::InvalidArgument("csls needs k >= 1".into()));
    }
    if source.is_empty() || pivot.is_empty() {
        return Err(Error::InvalidArgument("csls needs two nonempty vector sets".into()));
    }
    if source.dim() != pivot.dim() {
        return Err(Error::Shape {
            op: "csls",
            left: source.vectors.shape(),
            right: pivot.vectors.shape(),
        });
    }
    let xs = source.normalized()?;
    let ys = pivot.normalized()?;
    let mut cos = Matrix::zeros(xs.rows(), ys.rows());
    gemm(1.0, &xs, false, &ys, true, 0.0, &mut cos);
    let r_src = top_k_means(&cos, k);
    let r_pivot = top_k_means(&cos.transpose(), k);
    Ok((0..cos.rows())
        .map(|i| {
            let mut best = (0, f64::NEG_INFINITY);
            for (j, &c) in cos.row(i).iter().enumerate() {
                let score = 2.0 * c - r_src[i] - r_pivot[j];
                if score > best.1 {
                    best = (j, score);
                }
            }
            best.0
        })
        .collect())
}

/// `(source word, pivot word)` pairs in source order.
pub fn csls_map(source: &WordVectors, pivot: &WordVectors, k: usize) -> Result<Vec<(String, String)>> {
    Ok(csls_indices(source, pivot, k)?
        .into_iter()
        .zip(&source.words)
        .map(|(j, w)| (w.clone(), pivot.words[j].clone()))
        .collect())
}

/// Two-column `<source_word> <pivot_word>` text.
pub fn write_mapping(pairs: &[(String, String)], path: &Path) -> Result<()> {
    let mut text = String::new();
    for (s, p) in pairs {
        let _ = writeln!(text, "{s} {p}");
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_mapping(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| match l.split_whitespace().collect::<Vec<_>>().as_slice() {
            [s, p] => Ok((s.to_string(), p.to_string())),
            _ => Err(Error::parse(
                path.display().to_string(),
                format!("line {}: expected two columns", n + 1),
            )),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::SeededRng;

    fn vectors(rows: &[[f64; 2]]) -> WordVectors {
        let words = (0..rows.len()).map(|i| format!("w{i}")).collect();
        WordVectors::new(words, Matrix::from_rows(rows).unwrap()).unwrap()
    }

    fn random_vectors(rng: &mut SeededRng, n: usize, d: usize) -> WordVectors {
        let words = (0..n).map(|i| format!("w{i}")).collect();
        let data = (0..n * d).map(|_| rng.normal(0.0, 1.0)).collect();
        WordVectors::new(words, Matrix::from_vec(n, d, data).unwrap()).unwrap()
    }

    #[test]
    fn identical_sets_map_to_themselves() {
        let v = random_vectors(&mut SeededRng::new(1), 12, 5);
        assert_eq!(csls_indices(&v, &v, 1).unwrap(), (0..12).collect::<Vec<_>>());
    }

    #[test]
    fn shared_rotation_preserves_mapping() {
        let mut rng = SeededRng::new(2);
        let src = random_vectors(&mut rng, 10, 3);
        let piv = random_vectors(&mut rng, 8, 3);
        let before = csls_indices(&src, &piv, 3).unwrap();
        // Rotation about the z axis followed by a reflection of x.
        let (s, c) = 0.7f64.sin_cos();
        let q = Matrix::from_rows(&[[-c, -s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        let rot = |w: &WordVectors| WordVectors::new(w.words.clone(), w.vectors.matmul(&q).unwrap()).unwrap();
        assert_eq!(csls_indices(&rot(&src), &rot(&piv), 3).unwrap(), before);
    }

    #[test]
    fn hub_matches_exhaustive_evaluation() {
        // Pivot 0 is a hub lying between all sources.
        let src = vectors(&[[1.0, 0.1], [0.1, 1.0], [1.0, 1.2], [1.0, -0.3]]);
        let piv = vectors(&[[1.0, 1.0], [1.0, 0.0], [0.0, 1.0], [1.0, -0.5]]);
        let k = 2;
        let cos = |a: &[f64], b: &[f64]| {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            dot / (a.iter().map(|x| x * x).sum::<f64>().sqrt() * b.iter().map(|x| x * x).sum::<f64>().sqrt())
        };
        let mean_top = |mut v: Vec<f64>| {
            v.sort_by(|a, b| b.total_cmp(a));
            v[..k].iter().sum::<f64>() / k as f64
        };
        let s = |i: usize| src.vectors.row(i);
        let p = |j: usize| piv.vectors.row(j);
        let expected: Vec<usize> = (0..4)
            .map(|i| {
                let r_x = mean_top((0..4).map(|j| cos(s(i), p(j))).collect());
                let mut best = (0, f64::NEG_INFINITY);
                for j in 0..4 {
                    let r_y = mean_top((0..4).map(|i2| cos(s(i2), p(j))).collect());
                    let score = 2.0 * cos(s(i), p(j)) - r_x - r_y;
                    if score > best.1 {
                        best = (j, score);
                    }
                }
                best.0
            })
            .collect();
        assert_eq!(csls_indices(&src, &piv, k).unwrap(), expected);
    }

    #[test]
    fn zero_vector_is_named() {
        let src = vectors(&[[1.0, 0.0], [0.0, 0.0]]);
        let piv = vectors(&[[1.0, 0.0]]);
        let err = csls_map(&src, &piv, 1).unwrap_err();
        assert!(err.to_string().contains("w1"), "{err}");
    }

    #[test]
    fn text_format_round_trip() {
        let v = random_vectors(&mut SeededRng::new(3), 4, 3);
        let back = WordVectors::parse(&v.to_text(), "mem").unwrap();
        assert_eq!(back, v);
        assert!(WordVectors::parse("2 2\na 1 2\n", "mem").is_err());
        assert!(WordVectors::parse("1 2\na 1\n", "mem").is_err());
    }

    #[test]
    fn mapping_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("map.txt");
        let pairs = vec![("hund".to_string(), "dog".to_string()), ("katze".into(), "cat".into())];
        write_mapping(&pairs, &path).unwrap();
        assert_eq!(read_mapping(&path).unwrap(), pairs);
    }
}
