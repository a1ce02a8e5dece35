//! Differentiable building blocks with hand-written backward passes.
//!
//! Sequences are laid out time-major: a batch of `B` sequences over `T`
//! steps is a `(T * B) x width` matrix whose row `t * B + b` holds step `t`
//! of sequence `b`. Every layer caches what its backward pass needs; the
//! backward pass accumulates into [`Parameter::grad`] and returns gradients
//! for its inputs.

mod adam;
mod attention;
mod embedding;
mod linear;
mod loss;
mod lstm;

pub use adam::{OptimizerConfig, OptimizerState, StepStats};
pub use attention::{AttentionCache, AttentionOutput, GlobalAttention};
pub use embedding::{concat_columns, split_columns, Embedding};
pub use linear::{Linear, LinearCache};
pub use loss::{masked_cross_entropy, CrossEntropy};
pub use lstm::{LayerState, LstmLayer, LstmSequenceCache, RecurrentState, StackedLstm, StackedLstmCache};

use crate::numeric::{Matrix, SeededRng};

/// A trainable tensor and its gradient accumulator.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Matrix,
    pub grad: Matrix,
    pub trainable: bool,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Matrix) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        Parameter {
            name: name.into(),
            value,
            grad,
            trainable: true,
        }
    }

    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn uniform(name: impl Into<String>, rows: usize, cols: usize, fan_in: usize, rng: &mut SeededRng) -> Self {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.uniform_range(-bound, bound)).collect();
        Parameter::new(name, Matrix::from_vec(rows, cols, data).expect("sized"))
    }

    pub fn zeros(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        Parameter::new(name, Matrix::zeros(rows, cols))
    }

    pub fn frozen(mut self) -> Self {
        self.trainable = false;
        self
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
