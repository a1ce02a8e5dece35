use super::{squared_distance, Matrix, SeededRng};
use crate::{Error, Result};

const MAX_ITERATIONS: usize = 300;

#[derive(Clone, Debug)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centroids: Matrix,
    /// Within-cluster sum of squares of the returned partition.
    pub inertia: f64,
    /// Objective after each assignment step of the winning restart.
    pub history: Vec<f64>,
}

/// Lloyd's k-means, best of `restarts` by within-cluster sum of squares.
///
/// Each restart is seeded with k-means++: the first centre is a uniform
/// draw, every further centre is drawn with probability proportional to its
/// squared distance from the nearest centre already chosen. Ties in
/// assignment go to the lower centroid index, ties between restarts to the
/// earlier restart. An emptied cluster keeps its previous centroid.
pub fn kmeans(points: &Matrix, k: usize, restarts: usize, rng: &mut SeededRng) -> Result<KMeansResult> {
    let n = points.rows();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "kmeans needs 1 <= k <= rows, got k={k}, rows={n}"
        )));
    }
    let mut best: Option<KMeansResult> = None;
    for _ in 0..restarts.max(1) {
        let run = lloyd(points, plus_plus_init(points, k, rng));
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn plus_plus_init(points: &Matrix, k: usize, rng: &mut SeededRng) -> Matrix {
    let n = points.rows();
    let mut centroids = Matrix::zeros(k, points.cols());
    let first = rng.below(n);
    centroids.row_mut(0).copy_from_slice(points.row(first));
    let mut d2: Vec<f64> = (0..n)
        .map(|i| squared_distance(points.row(i), centroids.row(0)))
        .collect();
    for c in 1..k {
        let pick = rng.weighted_index(&d2);
        centroids.row_mut(c).copy_from_slice(points.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(squared_distance(points.row(i), centroids.row(c)));
        }
    }
    centroids
}

fn lloyd(points: &Matrix, mut centroids: Matrix) -> KMeansResult {
    let (n, dim) = points.shape();
    let k = centroids.rows();
    let mut labels = vec![usize::MAX; n];
    let mut history = Vec::new();
    for _ in 0..MAX_ITERATIONS {
        let mut changed = false;
        let mut objective = 0.0;
        for (i, label) in labels.iter_mut().enumerate() {
            let (best, dist) = nearest(points.row(i), &centroids);
            objective += dist;
            if *label != best {
                *label = best;
                changed = true;
            }
        }
        history.push(objective);
        if !changed {
            break;
        }
        let mut sums = Matrix::zeros(k, dim);
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (s, x) in sums.row_mut(l).iter_mut().zip(points.row(i)) {
                *s += x;
            }
        }
        for (c, &count) in counts.iter().enumerate() {
            if count > 0 {
                for (dst, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s / count as f64;
                }
            }
        }
    }
    let inertia = (0..n)
        .map(|i| squared_distance(points.row(i), centroids.row(labels[i])))
        .sum();
    KMeansResult {
        labels,
        centroids,
        inertia,
        history,
    }
}

fn nearest(p: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.rows() {
        let d = squared_distance(p, centroids.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}
