use super::Matrix;
use crate::{Error, Result};

/// Eigen-decomposition of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    /// Eigenvalues, descending.
    pub values: Vec<f64>,
    /// Unit eigenvectors stored as columns, in the order of `values`.
    /// Each vector's largest-magnitude entry is positive.
    pub vectors: Matrix,
}

const MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigensolver.
///
/// Sweeps over all off-diagonal pairs, zeroing each with a plane rotation,
/// until the off-diagonal mass is negligible relative to the whole matrix.
pub fn symmetric_eig(m: &Matrix) -> Result<SymmetricEigen> {
    let n = m.rows();
    if m.cols() != n {
        return Err(Error::Shape {
            op: "symmetric_eig",
            left: m.shape(),
            right: m.shape(),
        });
    }
    let scale = m.data().iter().fold(1.0f64, |acc, x| acc.max(x.abs()));
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            asym = asym.max((m.get(i, j) - m.get(j, i)).abs());
        }
    }
    if asym > 1e-9 * scale {
        return Err(Error::NotSymmetric(asym));
    }

    // Work on the symmetrised copy.
    let mut a = m.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (a.get(i, j) + a.get(j, i));
            a.set(i, j, avg);
            a.set(j, i, avg);
        }
    }
    let mut v = Matrix::identity(n);
    let total: f64 = a.data().iter().map(|x| x * x).sum();

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a.get(i, j).powi(2))
            .sum();
        if off <= 1e-30 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, &mut v, p, q, c, s);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    order.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]).then(i.cmp(&j)));

    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = v.column(src);
        let pivot = col
            .iter()
            .enumerate()
            .fold(
                (0, 0.0f64),
                |best, (i, x)| {
                    if x.abs() > best.1.abs() + 1e-12 {
                        (i, *x)
                    } else {
                        best
                    }
                },
            )
            .1;
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for (r, x) in col.iter().enumerate() {
            vectors.set(r, dst, sign * x);
        }
    }
    Ok(SymmetricEigen {
        values: order.iter().map(|&i| diag[i]).collect(),
        vectors,
    })
}

/// A ← Jᵀ A J and V ← V J for the rotation J in the (p, q) plane.
fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let n = a.rows();
    for k in 0..n {
        let akp = a.get(k, p);
        let akq = a.get(k, q);
        a.set(k, p, c * akp - s * akq);
        a.set(k, q, s * akp + c * akq);
    }
    for k in 0..n {
        let apk = a.get(p, k);
        let aqk = a.get(q, k);
        a.set(p, k, c * apk - s * aqk);
        a.set(q, k, s * apk + c * aqk);
    }
    for k in 0..n {
        let vkp = v.get(k, p);
        let vkq = v.get(k, q);
        v.set(k, p, c * vkp - s * vkq);
        v.set(k, q, s * vkp + c * vkq);
    }
}
