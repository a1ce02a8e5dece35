use super::Parameter;
use crate::numeric::Matrix;
use crate::{Error, Result};

/// Lookup table: row `i` is the vector of id `i`.
#[derive(Clone, Debug)]
pub struct Embedding {
    pub table: Parameter,
}

impl Embedding {
    pub fn new(table: Parameter) -> Self {
        Embedding { table }
    }

    pub fn len(&self) -> usize {
        self.table.value.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.table.value.cols()
    }

    pub fn lookup(&self, ids: &[usize]) -> Result<Matrix> {
        if let Some(&bad) = ids.iter().find(|&&i| i >= self.len()) {
            return Err(Error::InvalidArgument(format!(
                "id {bad} out of range for `{}` ({} rows)",
                self.table.name,
                self.len()
            )));
        }
        Ok(self.table.value.gather_rows(ids))
    }

    /// Scatter-adds `d` (one row per id) into the table gradient.
    pub fn backward(&mut self, ids: &[usize], d: &Matrix) {
        if !self.table.trainable {
            return;
        }
        assert_eq!(ids.len(), d.rows());
        for (r, &id) in ids.iter().enumerate() {
            for (g, x) in self.table.grad.row_mut(id).iter_mut().zip(d.row(r)) {
                *g += x;
            }
        }
    }
}

/// `[a | b]` side by side.
pub fn concat_columns(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.rows() != b.rows() {
        return Err(Error::Shape {
            op: "concat_columns",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let mut out = Matrix::zeros(a.rows(), a.cols() + b.cols());
    for r in 0..a.rows() {
        let row = out.row_mut(r);
        row[..a.cols()].copy_from_slice(a.row(r));
        row[a.cols()..].copy_from_slice(b.row(r));
    }
    Ok(out)
}

/// Inverse of [`concat_columns`]: the first `at` columns and the rest.
pub fn split_columns(m: &Matrix, at: usize) -> (Matrix, Matrix) {
    let mut left = Matrix::zeros(m.rows(), at);
    let mut right = Matrix::zeros(m.rows(), m.cols() - at);
    for r in 0..m.rows() {
        left.row_mut(r).copy_from_slice(&m.row(r)[..at]);
        right.row_mut(r).copy_from_slice(&m.row(r)[at..]);
    }
    (left, right)
}
