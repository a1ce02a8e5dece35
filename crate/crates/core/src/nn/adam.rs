use super::Parameter;
use crate::numeric::Matrix;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Adam hyperparameters and the step-decay learning-rate schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub base_lr: f64,
    /// Multiplicative decay applied at each decay event.
    pub decay: f64,
    /// Steps between decay events once decay has started.
    pub decay_interval: u64,
    /// Step at which the first decay event fires.
    pub decay_start: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global gradient-norm ceiling; non-positive disables clipping.
    pub clip_norm: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            base_lr: 1e-3,
            decay: 0.85,
            decay_interval: 25_000,
            decay_start: 10_000,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: 5.0,
        }
    }
}

impl OptimizerConfig {
    /// Learning rate used for the update numbered `step` (1-based).
    ///
    /// `base * decay^d`, with `d = 0` before `decay_start` and
    /// `d = floor((step - decay_start) / decay_interval) + 1` from then on.
    pub fn lr_at(&self, step: u64) -> f64 {
        if step < self.decay_start {
            return self.base_lr;
        }
        let events = (step - self.decay_start) / self.decay_interval.max(1) + 1;
        self.base_lr * self.decay.powi(events.min(i32::MAX as u64) as i32)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.base_lr > 0.0
            && self.decay > 0.0
            && self.decay_interval >= 1
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid optimizer config {self:?}")))
        }
    }
}

/// Moment accumulators, one pair per parameter in a fixed order.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub config: OptimizerConfig,
    /// Number of updates applied so far.
    pub step: u64,
    pub first_moment: Vec<Matrix>,
    pub second_moment: Vec<Matrix>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    pub step: u64,
    pub lr: f64,
    /// Global gradient norm before clipping.
    pub grad_norm: f64,
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig, params: &[&Parameter]) -> Self {
        let zeros = || {
            params
                .iter()
                .map(|p| Matrix::zeros(p.value.rows(), p.value.cols()))
                .collect::<Vec<_>>()
        };
        OptimizerState {
            config,
            step: 0,
            first_moment: zeros(),
            second_moment: zeros(),
        }
    }

    pub fn lr_at(&self, step: u64) -> f64 {
        self.config.lr_at(step)
    }

    /// Clips the global gradient norm, then applies one bias-corrected Adam
    /// update to every trainable parameter. Gradients are left in place.
    pub fn step(&mut self, params: &mut [&mut Parameter]) -> Result<StepStats> {
        if params.len() != self.first_moment.len() {
            return Err(Error::InvalidArgument(format!(
                "optimizer tracks {} parameters, got {}",
                self.first_moment.len(),
                params.len()
            )));
        }
        let mut sq = 0.0;
        for (p, m) in params.iter().zip(&self.first_moment) {
            if p.grad.shape() != m.shape() {
                return Err(Error::Shape {
                    op: "adam",
                    left: p.grad.shape(),
                    right: m.shape(),
                });
            }
            if !p.trainable {
                continue;
            }
            if !p.grad.is_finite() {
                return Err(Error::NonFiniteGradient(p.name.clone()));
            }
            sq += p.grad.data().iter().map(|g| g * g).sum::<f64>();
        }
        let grad_norm = sq.sqrt();
        let clip = self.config.clip_norm;
        let scale = if clip > 0.0 && grad_norm > clip {
            clip / grad_norm
        } else {
            1.0
        };

        self.step += 1;
        let t = self.step;
        let lr = self.config.lr_at(t);
        let (b1, b2, eps) = (self.config.beta1, self.config.beta2, self.config.eps);
        let bc1 = 1.0 - b1.powf(t as f64);
        let bc2 = 1.0 - b2.powf(t as f64);
        for ((p, m), v) in params
            .iter_mut()
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            if !p.trainable {
                continue;
            }
            let Parameter { value, grad, .. } = &mut **p;
            for (((x, &g), m), v) in value
                .data_mut()
                .iter_mut()
                .zip(grad.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                let g = g * scale;
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *x -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
            }
        }
        Ok(StepStats { step: t, lr, grad_norm })
    }
}
