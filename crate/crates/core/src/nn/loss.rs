use crate::numeric::{softmax_in_place, Matrix};
use crate::{Error, Result};

/// Output of [`masked_cross_entropy`].
#[derive(Clone, Debug)]
pub struct CrossEntropy {
    /// Mean negative log-likelihood over unmasked rows.
    pub loss: f64,
    /// Sum of the per-row negative log-likelihoods.
    pub total: f64,
    /// Number of unmasked rows.
    pub count: usize,
    /// d loss / d logits; zero on masked rows.
    pub grad: Matrix,
}

/// Mean softmax cross-entropy over the rows where `mask` is true.
pub fn masked_cross_entropy(logits: &Matrix, targets: &[usize], mask: &[bool]) -> Result<CrossEntropy> {
    let (rows, vocab) = logits.shape();
    if targets.len() != rows || mask.len() != rows {
        return Err(Error::InvalidArgument(format!(
            "cross-entropy: {rows} logit rows, {} targets, {} mask entries",
            targets.len(),
            mask.len()
        )));
    }
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Err(Error::InvalidArgument(
            "cross-entropy over zero unmasked positions".into(),
        ));
    }
    let mut grad = Matrix::zeros(rows, vocab);
    let mut total = 0.0;
    let scale = 1.0 / count as f64;
    for r in 0..rows {
        if !mask[r] {
            continue;
        }
        let target = targets[r];
        if target >= vocab {
            return Err(Error::InvalidArgument(format!(
                "target id {target} outside vocabulary of {vocab}"
            )));
        }
        let row = logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_z = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
        total += log_z - row[target];
        let g = grad.row_mut(r);
        g.copy_from_slice(row);
        softmax_in_place(g);
        g[target] -= 1.0;
        g.iter_mut().for_each(|x| *x *= scale);
    }
    Ok(CrossEntropy {
        loss: total * scale,
        total,
        count,
        grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{relative_error, STEP};
    use crate::numeric::SeededRng;

    #[test]
    fn confident_correct_prediction_has_zero_loss() {
        let logits = Matrix::from_rows(&[[0.0, 1000.0, 0.0], [1000.0, 0.0, 0.0]]).unwrap();
        let ce = masked_cross_entropy(&logits, &[1, 0], &[true, true]).unwrap();
        assert_eq!(ce.loss, 0.0);
    }

    #[test]
    fn uniform_logits_give_log_vocab() {
        let ce = masked_cross_entropy(&Matrix::zeros(3, 7), &[0, 3, 6], &[true; 3]).unwrap();
        assert!((ce.loss - 7f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn single_unmasked_row_equals_its_nll() {
        let logits = Matrix::from_rows(&[[1.0, 2.0, 3.0], [0.5, -1.0, 2.0], [9.0, 9.0, 9.0]]).unwrap();
        let ce = masked_cross_entropy(&logits, &[0, 1, 2], &[false, true, false]).unwrap();
        // Direct evaluation of -log softmax(row)[target].
        let row = [0.5f64, -1.0, 2.0];
        let z: f64 = row.iter().map(|x| x.exp()).sum();
        let nll = -((-1.0f64).exp() / z).ln();
        assert!((ce.loss - nll).abs() < 1e-14);
    }

    #[test]
    fn padding_rows_do_not_change_loss() {
        let logits = Matrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]]).unwrap();
        let a = masked_cross_entropy(&logits, &[0, 1], &[true, true]).unwrap();
        let padded = Matrix::from_rows(&[[1.0, 2.0], [0.0, 1.0], [5.0, -5.0], [3.0, 3.0]]).unwrap();
        let b = masked_cross_entropy(&padded, &[0, 1, 0, 0], &[true, true, false, false]).unwrap();
        assert_eq!(a.loss, b.loss);
        assert!(b.grad.row(2).iter().chain(b.grad.row(3)).all(|&g| g == 0.0));
    }

    #[test]
    fn errors() {
        assert!(masked_cross_entropy(&Matrix::zeros(2, 3), &[0, 1], &[false, false]).is_err());
        assert!(masked_cross_entropy(&Matrix::zeros(1, 3), &[3], &[true]).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for trial in 0..20u64 {
            let mut rng = SeededRng::new(400 + trial);
            let (rows, vocab) = (1 + rng.below(6), 2 + rng.below(11));
            let logits =
                Matrix::from_vec(rows, vocab, (0..rows * vocab).map(|_| rng.normal(0.0, 2.0)).collect()).unwrap();
            let targets: Vec<usize> = (0..rows).map(|_| rng.below(vocab)).collect();
            let mut mask: Vec<bool> = (0..rows).map(|_| rng.bernoulli(0.7)).collect();
            mask[0] = true;
            let ce = masked_cross_entropy(&logits, &targets, &mask).unwrap();
            let mut probe = logits.clone();
            for i in 0..probe.data().len() {
                let orig = probe.data()[i];
                probe.data_mut()[i] = orig + STEP;
                let up = masked_cross_entropy(&probe, &targets, &mask).unwrap().loss;
                probe.data_mut()[i] = orig - STEP;
                let down = masked_cross_entropy(&probe, &targets, &mask).unwrap().loss;
                probe.data_mut()[i] = orig;
                let numeric = (up - down) / (2.0 * STEP);
                assert!(relative_error(ce.grad.data()[i], numeric) < 1e-4);
            }
        }
    }
}
