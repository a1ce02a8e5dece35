use super::Parameter;
use crate::numeric::{gemm, gemm_view, softmax_in_place, Matrix, SeededRng, View, ViewMut};
use crate::{Error, Result};

/// Global attention with bilinear ("general") scoring.
///
/// ```text
/// score(d, e_t) = d · W_score · e_t
/// a             = softmax over unmasked t
/// context       = Σ_t a_t e_t
/// output        = tanh([context ; d] · W_combine)
/// ```
#[derive(Clone, Debug)]
pub struct GlobalAttention {
    pub w_score: Parameter,
    pub w_combine: Parameter,
    hidden: usize,
}

/// Result of a single query against one encoded sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionOutput {
    pub context: Vec<f64>,
    pub weights: Vec<f64>,
    pub output: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct AttentionCache {
    batch: usize,
    src_len: usize,
    tgt_len: usize,
    dec: Matrix,
    enc: Matrix,
    projected: Matrix,
    weights: Matrix,
    concat: Matrix,
    out: Matrix,
}

impl AttentionCache {
    /// Attention weights, `(S*B) x T`, row `s * B + b`.
    pub fn weights(&self) -> &Matrix {
        &self.weights
    }
}

impl GlobalAttention {
    pub fn new(name: &str, hidden: usize, rng: &mut SeededRng) -> Self {
        GlobalAttention {
            w_score: Parameter::uniform(format!("{name}.w_score"), hidden, hidden, hidden, rng),
            w_combine: Parameter::uniform(format!("{name}.w_combine"), 2 * hidden, hidden, 2 * hidden, rng),
            hidden,
        }
    }

    pub fn from_parameters(w_score: Parameter, w_combine: Parameter) -> Result<Self> {
        let hidden = w_score.value.rows();
        if w_score.value.shape() != (hidden, hidden) || w_combine.value.shape() != (2 * hidden, hidden) {
            return Err(Error::Data(format!(
                "inconsistent attention shapes: {:?} {:?}",
                w_score.value.shape(),
                w_combine.value.shape()
            )));
        }
        Ok(GlobalAttention {
            w_score,
            w_combine,
            hidden,
        })
    }

    pub fn params(&self) -> [&Parameter; 2] {
        [&self.w_score, &self.w_combine]
    }

    pub fn params_mut(&mut self) -> [&mut Parameter; 2] {
        [&mut self.w_score, &mut self.w_combine]
    }

    /// One decoder state attending over `enc` (`T x hidden`).
    pub fn attend(&self, decoder_hidden: &[f64], enc: &Matrix, mask: &[bool]) -> Result<AttentionOutput> {
        let dec = Matrix::row_vector(decoder_hidden);
        let (out, cache) = self.forward(&dec, enc, 1, mask)?;
        let h = self.hidden;
        Ok(AttentionOutput {
            context: cache.concat.data()[..h].to_vec(),
            weights: cache.weights.data().to_vec(),
            output: out.into_data(),
        })
    }

    /// Batched, time-major attention: `dec` is `(S*B) x H`, `enc` is
    /// `(T*B) x H`, `enc_mask` has `T*B` entries.
    pub fn forward(
        &self,
        dec: &Matrix,
        enc: &Matrix,
        batch: usize,
        enc_mask: &[bool],
    ) -> Result<(Matrix, AttentionCache)> {
        let h = self.hidden;
        if dec.cols() != h || enc.cols() != h {
            return Err(Error::Shape {
                op: "attention",
                left: dec.shape(),
                right: enc.shape(),
            });
        }
        if batch == 0 || !dec.rows().is_multiple_of(batch) || !enc.rows().is_multiple_of(batch) {
            return Err(Error::InvalidArgument(format!(
                "attention rows ({}, {}) not multiples of batch {batch}",
                dec.rows(),
                enc.rows()
            )));
        }
        if enc_mask.len() != enc.rows() {
            return Err(Error::InvalidArgument(format!(
                "mask length {} != encoder positions {}",
                enc_mask.len(),
                enc.rows()
            )));
        }
        let tgt_len = dec.rows() / batch;
        let src_len = enc.rows() / batch;
        for b in 0..batch {
            if !(0..src_len).any(|t| enc_mask[t * batch + b]) {
                return Err(Error::InvalidArgument(format!(
                    "all encoder positions masked for batch row {b}"
                )));
            }
        }

        let mut projected = Matrix::zeros(dec.rows(), h);
        gemm(1.0, dec, false, &self.w_score.value, false, 0.0, &mut projected);

        let mut weights = Matrix::zeros(tgt_len * batch, src_len);
        for b in 0..batch {
            gemm_view(
                1.0,
                seq_view(&projected, b, batch, tgt_len),
                seq_view(enc, b, batch, src_len).t(),
                0.0,
                seq_view_mut(&mut weights, b, batch, tgt_len),
            );
        }
        for s in 0..tgt_len {
            for b in 0..batch {
                let row = weights.row_mut(s * batch + b);
                masked_softmax(row, |t| enc_mask[t * batch + b]);
            }
        }

        let mut concat = Matrix::zeros(dec.rows(), 2 * h);
        for b in 0..batch {
            let stride = batch * 2 * h;
            gemm_view(
                1.0,
                seq_view(&weights, b, batch, tgt_len),
                seq_view(enc, b, batch, src_len),
                0.0,
                ViewMut::new(concat.data_mut(), b * 2 * h, tgt_len, h, stride, 1),
            );
        }
        for r in 0..dec.rows() {
            concat.row_mut(r)[h..].copy_from_slice(dec.row(r));
        }
        let mut out = Matrix::zeros(dec.rows(), h);
        gemm(1.0, &concat, false, &self.w_combine.value, false, 0.0, &mut out);
        out.data_mut().iter_mut().for_each(|x| *x = x.tanh());

        let cache = AttentionCache {
            batch,
            src_len,
            tgt_len,
            dec: dec.clone(),
            enc: enc.clone(),
            projected,
            weights,
            concat,
            out: out.clone(),
        };
        Ok((out, cache))
    }

    /// Returns `(d_dec, d_enc)`.
    pub fn backward(&mut self, cache: &AttentionCache, d_out: &Matrix) -> (Matrix, Matrix) {
        let h = self.hidden;
        let (batch, src_len, tgt_len) = (cache.batch, cache.src_len, cache.tgt_len);
        let rows = cache.dec.rows();

        let mut d_pre = d_out.clone();
        for (d, y) in d_pre.data_mut().iter_mut().zip(cache.out.data()) {
            *d *= 1.0 - y * y;
        }
        if self.w_combine.trainable {
            gemm(1.0, &cache.concat, true, &d_pre, false, 1.0, &mut self.w_combine.grad);
        }
        let mut d_concat = Matrix::zeros(rows, 2 * h);
        gemm(1.0, &d_pre, false, &self.w_combine.value, true, 0.0, &mut d_concat);

        let mut d_dec = Matrix::zeros(rows, h);
        for r in 0..rows {
            d_dec.row_mut(r).copy_from_slice(&d_concat.row(r)[h..]);
        }

        let mut d_enc = Matrix::zeros(cache.enc.rows(), h);
        let mut d_weights = Matrix::zeros(rows, src_len);
        for b in 0..batch {
            let d_ctx = View::new(d_concat.data(), b * 2 * h, tgt_len, h, batch * 2 * h, 1);
            gemm_view(
                1.0,
                d_ctx,
                seq_view(&cache.enc, b, batch, src_len).t(),
                0.0,
                seq_view_mut(&mut d_weights, b, batch, tgt_len),
            );
            gemm_view(
                1.0,
                seq_view(&cache.weights, b, batch, tgt_len).t(),
                d_ctx,
                1.0,
                seq_view_mut(&mut d_enc, b, batch, src_len),
            );
        }

        // Softmax backward; masked positions have zero weight and stay zero.
        let mut d_scores = d_weights;
        for r in 0..rows {
            let a = cache.weights.row(r);
            let dw = d_scores.row_mut(r);
            let dot: f64 = a.iter().zip(dw.iter()).map(|(x, y)| x * y).sum();
            for (d, &w) in dw.iter_mut().zip(a) {
                *d = w * (*d - dot);
            }
        }

        let mut d_projected = Matrix::zeros(rows, h);
        for b in 0..batch {
            gemm_view(
                1.0,
                seq_view(&d_scores, b, batch, tgt_len),
                seq_view(&cache.enc, b, batch, src_len),
                0.0,
                seq_view_mut(&mut d_projected, b, batch, tgt_len),
            );
            gemm_view(
                1.0,
                seq_view(&d_scores, b, batch, tgt_len).t(),
                seq_view(&cache.projected, b, batch, tgt_len),
                1.0,
                seq_view_mut(&mut d_enc, b, batch, src_len),
            );
        }
        if self.w_score.trainable {
            gemm(1.0, &cache.dec, true, &d_projected, false, 1.0, &mut self.w_score.grad);
        }
        gemm(1.0, &d_projected, false, &self.w_score.value, true, 1.0, &mut d_dec);
        (d_dec, d_enc)
    }
}

/// The `len x cols` block of sequence `b` inside a time-major matrix.
fn seq_view(m: &Matrix, b: usize, batch: usize, len: usize) -> View<'_> {
    let c = m.cols();
    View::new(m.data(), b * c, len, c, batch * c, 1)
}

fn seq_view_mut(m: &mut Matrix, b: usize, batch: usize, len: usize) -> ViewMut<'_> {
    let c = m.cols();
    ViewMut::new(m.data_mut(), b * c, len, c, batch * c, 1)
}

fn masked_softmax(row: &mut [f64], keep: impl Fn(usize) -> bool) {
    let kept: Vec<usize> = (0..row.len()).filter(|&t| keep(t)).collect();
    let mut vals: Vec<f64> = kept.iter().map(|&t| row[t]).collect();
    softmax_in_place(&mut vals);
    row.fill(0.0);
    for (&t, v) in kept.iter().zip(vals) {
        row[t] = v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::check_parameter;

    fn random_matrix(rng: &mut SeededRng, r: usize, c: usize) -> Matrix {
        Matrix::from_vec(r, c, (0..r * c).map(|_| rng.normal(0.0, 1.0)).collect()).unwrap()
    }

    #[test]
    fn single_unmasked_position_takes_all_weight() {
        let mut rng = SeededRng::new(1);
        let att = GlobalAttention::new("a", 3, &mut rng);
        let enc = random_matrix(&mut rng, 4, 3);
        let out = att
            .attend(&[0.3, -0.2, 0.9], &enc, &[false, false, true, false])
            .unwrap();
        assert_eq!(out.weights, vec![0.0, 0.0, 1.0, 0.0]);
        for (c, e) in out.context.iter().zip(enc.row(2)) {
            assert!((c - e).abs() < 1e-15);
        }
    }

    #[test]
    fn equal_scores_give_uniform_weights() {
        let att = GlobalAttention::new("a", 2, &mut SeededRng::new(1));
        let enc = Matrix::from_rows(&[[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]).unwrap();
        let out = att.attend(&[0.5, 0.5], &enc, &[true; 3]).unwrap();
        for w in out.weights {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn all_masked_is_an_error() {
        let att = GlobalAttention::new("a", 2, &mut SeededRng::new(1));
        assert!(att.attend(&[0.0, 0.0], &Matrix::zeros(2, 2), &[false, false]).is_err());
    }

    #[test]
    fn weights_are_distributions_over_unmasked_positions() {
        let mut rng = SeededRng::new(5);
        for _ in 0..20 {
            let (h, batch, s, t) = (1 + rng.below(6), 1 + rng.below(3), 1 + rng.below(4), 1 + rng.below(5));
            let att = GlobalAttention::new("a", h, &mut rng);
            let dec = random_matrix(&mut rng, s * batch, h);
            let enc = random_matrix(&mut rng, t * batch, h);
            let mask: Vec<bool> = (0..t * batch).map(|r| r < batch || rng.bernoulli(0.6)).collect();
            let (_, cache) = att.forward(&dec, &enc, batch, &mask).unwrap();
            for r in 0..s * batch {
                let row = cache.weights().row(r);
                let b = r % batch;
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                for (ti, &w) in row.iter().enumerate() {
                    assert!(w >= 0.0);
                    if !mask[ti * batch + b] {
                        assert_eq!(w, 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for trial in 0..20u64 {
            let mut rng = SeededRng::new(200 + trial);
            let (h, batch, s, t) = (1 + rng.below(8), 1 + rng.below(3), 1 + rng.below(4), 1 + rng.below(4));
            let mut att = GlobalAttention::new("a", h, &mut rng);
            let dec = random_matrix(&mut rng, s * batch, h);
            let enc = random_matrix(&mut rng, t * batch, h);
            let mask: Vec<bool> = (0..t * batch).map(|r| r < batch || rng.bernoulli(0.7)).collect();
            let w_out = random_matrix(&mut rng, s * batch, h);
            let objective = |a: &GlobalAttention, d: &Matrix, e: &Matrix| {
                let (out, _) = a.forward(d, e, batch, &mask).unwrap();
                out.data().iter().zip(w_out.data()).map(|(x, y)| x * y).sum::<f64>()
            };
            let (_, cache) = att.forward(&dec, &enc, batch, &mask).unwrap();
            let (d_dec, d_enc) = att.backward(&cache, &w_out);

            for idx in 0..2 {
                let snapshot = att.clone();
                let mut p = snapshot.params()[idx].clone();
                let worst = check_parameter(&mut p, |p| {
                    let mut probe = snapshot.clone();
                    *probe.params_mut()[idx] = p.clone();
                    objective(&probe, &dec, &enc)
                });
                assert!(worst < 1e-4, "trial {trial} param {idx}: {worst}");
            }
            let mut pd = Parameter::new("dec", dec.clone());
            pd.grad = d_dec;
            assert!(check_parameter(&mut pd, |p| objective(&att, &p.value, &enc)) < 1e-4);
            let mut pe = Parameter::new("enc", enc.clone());
            pe.grad = d_enc;
            assert!(check_parameter(&mut pe, |p| objective(&att, &dec, &p.value)) < 1e-4);
        }
    }
}
