use super::Parameter;
use crate::numeric::{gemm, Matrix, SeededRng};
use crate::{Error, Result};

/// Affine map `y = x W + b`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: Parameter,
    pub bias: Parameter,
}

#[derive(Clone, Debug)]
pub struct LinearCache {
    input: Matrix,
}

impl Linear {
    pub fn new(name: &str, input: usize, output: usize, rng: &mut SeededRng) -> Self {
        Linear {
            weight: Parameter::uniform(format!("{name}.weight"), input, output, input, rng),
            bias: Parameter::zeros(format!("{name}.bias"), 1, output),
        }
    }

    pub fn from_parameters(weight: Parameter, bias: Parameter) -> Result<Self> {
        if bias.value.shape() != (1, weight.value.cols()) {
            return Err(Error::Data(format!(
                "linear bias {:?} does not match weight {:?}",
                bias.value.shape(),
                weight.value.shape()
            )));
        }
        Ok(Linear { weight, bias })
    }

    pub fn params(&self) -> [&Parameter; 2] {
        [&self.weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> [&mut Parameter; 2] {
        [&mut self.weight, &mut self.bias]
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, LinearCache)> {
        if x.cols() != self.weight.value.rows() {
            return Err(Error::Shape {
                op: "linear",
                left: x.shape(),
                right: self.weight.value.shape(),
            });
        }
        let mut y = Matrix::zeros(x.rows(), self.weight.value.cols());
        gemm(1.0, x, false, &self.weight.value, false, 0.0, &mut y);
        let b = self.bias.value.data();
        for r in 0..y.rows() {
            for (v, bb) in y.row_mut(r).iter_mut().zip(b) {
                *v += bb;
            }
        }
        Ok((y, LinearCache { input: x.clone() }))
    }

    pub fn backward(&mut self, cache: &LinearCache, d_y: &Matrix) -> Matrix {
        if self.weight.trainable {
            gemm(1.0, &cache.input, true, d_y, false, 1.0, &mut self.weight.grad);
        }
        if self.bias.trainable {
            let sums = d_y.column_sums();
            self.bias.grad.add_scaled(1.0, &sums);
        }
        let mut d_x = Matrix::zeros(d_y.rows(), self.weight.value.rows());
        gemm(1.0, d_y, false, &self.weight.value, true, 0.0, &mut d_x);
        d_x
    }
}
