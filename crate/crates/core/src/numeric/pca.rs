use super::{symmetric_eig, Matrix};
use crate::{Error, Result};

/// Principal component projection of a point set.
#[derive(Clone, Debug)]
pub struct Pca {
    /// `rows x k` coordinates of the centred points.
    pub coordinates: Matrix,
    /// Variance along each retained component, non-increasing.
    pub explained_variance: Vec<f64>,
    /// Total variance of the input (sum over all components).
    pub total_variance: f64,
    /// `cols x k` principal directions as columns.
    pub components: Matrix,
    /// Column means subtracted before projection.
    pub mean: Vec<f64>,
}

impl Pca {
    /// Maps coordinates back into the input space.
    pub fn reconstruct(&self) -> Matrix {
        let mut out = self
            .coordinates
            .matmul(&self.components.transpose())
            .expect("pca shapes");
        for r in 0..out.rows() {
            for (x, m) in out.row_mut(r).iter_mut().zip(&self.mean) {
                *x += m;
            }
        }
        out
    }
}

/// Projects rows of `points` onto their top-`k` principal directions.
///
/// Variances use the `n - 1` denominator. A point set with no spread yields
/// zero coordinates and zero variance.
pub fn pca(points: &Matrix, k: usize) -> Result<Pca> {
    let (n, d) = points.shape();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("pca needs at least 2 points, got {n}")));
    }
    if k > n.min(d) {
        return Err(Error::InvalidArgument(format!(
            "pca k={k} exceeds min(rows, cols) = {}",
            n.min(d)
        )));
    }

    let mut mean = vec![0.0; d];
    for r in 0..n {
        for (m, x) in mean.iter_mut().zip(points.row(r)) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut centred = points.clone();
    for r in 0..n {
        for (x, m) in centred.row_mut(r).iter_mut().zip(&mean) {
            *x -= m;
        }
    }

    let mut cov = centred.transpose().matmul(&centred)?;
    cov.scale(1.0 / (n - 1) as f64);
    let total_variance: f64 = (0..d).map(|i| cov.get(i, i)).sum();

    if total_variance <= 0.0 {
        let mut components = Matrix::zeros(d, k);
        for i in 0..k {
            components.set(i, i, 1.0);
        }
        return Ok(Pca {
            coordinates: Matrix::zeros(n, k),
            explained_variance: vec![0.0; k],
            total_variance: 0.0,
            components,
            mean,
        });
    }

    let eig = symmetric_eig(&cov)?;
    let mut components = Matrix::zeros(d, k);
    for c in 0..k {
        for r in 0..d {
            components.set(r, c, eig.vectors.get(r, c));
        }
    }
    let coordinates = centred.matmul(&components)?;
    let explained_variance = eig.values[..k].iter().map(|v| v.max(0.0)).collect();
    Ok(Pca {
        coordinates,
        explained_variance,
        total_variance,
        components,
        mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::SeededRng;

    #[test]
    fn collinear_points_one_component() {
        let pts = Matrix::from_rows(&[[0.0, 0.0, 0.0], [1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [-1.0, -2.0, -3.0]]).unwrap();
        let p = pca(&pts, 3).unwrap();
        assert!((p.explained_variance[0] / p.total_variance - 1.0).abs() < 1e-10);
    }

    #[test]
    fn full_rank_keeps_all_variance_and_reconstructs() {
        let mut rng = SeededRng::new(4);
        let data: Vec<f64> = (0..8 * 4).map(|_| rng.normal(0.0, 2.0)).collect();
        let pts = Matrix::from_vec(8, 4, data).unwrap();
        let p = pca(&pts, 4).unwrap();
        let kept: f64 = p.explained_variance.iter().sum();
        assert!((kept - p.total_variance).abs() < 1e-10);
        assert!(p.reconstruct().max_abs_diff(&pts) <= 1e-8);
        assert!(p.explained_variance.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn separated_clouds_are_linearly_separable() {
        let mut rng = SeededRng::new(21);
        let mut rows = Vec::new();
        for cloud in 0..2 {
            let centre = if cloud == 0 { -5.0 } else { 5.0 };
            for _ in 0..10 {
                let row: Vec<f64> = (0..6)
                    .map(|j| if j < 3 { centre } else { 0.0 } + rng.normal(0.0, 0.3))
                    .collect();
                rows.push(row);
            }
        }
        let pts = Matrix::from_rows(&rows).unwrap();
        let p = pca(&pts, 2).unwrap();
        // Margin test along the first component: the clouds occupy disjoint
        // intervals with a clear gap.
        let first: Vec<f64> = p.coordinates.column(0);
        let (a, b) = first.split_at(10);
        let (a_lo, a_hi) = bounds(a);
        let (b_lo, b_hi) = bounds(b);
        let gap = (b_lo - a_hi).max(a_lo - b_hi);
        assert!(gap > 1.0, "gap {gap}");
    }

    fn bounds(xs: &[f64]) -> (f64, f64) {
        xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
    }

    #[test]
    fn degenerate_points() {
        let pts = Matrix::filled(5, 3, 2.0);
        let p = pca(&pts, 2).unwrap();
        assert!(p.coordinates.data().iter().all(|&x| x == 0.0));
        assert_eq!(p.explained_variance, vec![0.0, 0.0]);
    }

    #[test]
    fn rejects_bad_k() {
        assert!(pca(&Matrix::zeros(3, 2), 3).is_err());
        assert!(pca(&Matrix::zeros(1, 2), 1).is_err());
    }
}
