//! Schedule-free Adam: gradients are taken at an interpolation between the
//! fast iterate and a running average, and the average is the point served
//! for evaluation. No learning-rate schedule, no separate momentum buffer.

use ndarray::Array1;

use crate::error::{Error, Result};

/// Optimizer state over a flat parameter vector.
///
/// Per step t (1-based):
///   y_t     = (1 - beta1) * z_t + beta1 * x_t     (gradient point)
///   v_t     = beta2 * v_{t-1} + (1 - beta2) * g_t^2
///   z_{t+1} = z_t - lr * g_t / (sqrt(v_t / (1 - beta2^t)) + eps)
///   x_{t+1} = (1 - c) * x_t + c * z_{t+1},  c = 1 / (t + 1)
///
/// `x` is an exact running average of the z iterates; starting from zero
/// gradients it is a fixed point.
#[derive(Debug, Clone)]
pub struct ScheduleFreeAdam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    z: Array1<f64>,
    x: Array1<f64>,
    v: Array1<f64>,
}

impl ScheduleFreeAdam {
    pub fn new(init: Array1<f64>, lr: f64) -> Self {
        let v = Array1::zeros(init.len());
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            z: init.clone(),
            x: init,
            v,
        }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// Point at which the caller must evaluate the gradient for the next
    /// `step`.
    pub fn grad_point(&self) -> Array1<f64> {
        let b = self.beta1;
        (1.0 - b) * &self.z + b * &self.x
    }

    /// Averaged iterate; the parameters to serve.
    pub fn params(&self) -> &Array1<f64> {
        &self.x
    }

    pub fn step(&mut self, grads: &Array1<f64>) -> Result<()> {
        if grads.len() != self.z.len() {
            return Err(Error::Shape {
                expected: self.z.len(),
                got: grads.len(),
            });
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::Optimizer(format!(
                "non-finite gradient at step {}",
                self.t + 1
            )));
        }
        self.t += 1;
        let bias = 1.0 - self.beta2.powi(self.t as i32);
        let c = 1.0 / (self.t as f64 + 1.0);
        for i in 0..self.z.len() {
            let g = grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let denom = (self.v[i] / bias).sqrt() + self.eps;
            self.z[i] -= self.lr * g / denom;
            self.x[i] = (1.0 - c) * self.x[i] + c * self.z[i];
        }
        Ok(())
    }

    /// Clamp both iterates elementwise. Safety rail for log-parameterized
    /// models where a large learning rate can run away before averaging
    /// catches up.
    pub fn clamp(&mut self, lo: f64, hi: f64) {
        self.z.mapv_inplace(|v| v.clamp(lo, hi));
        self.x.mapv_inplace(|v| v.clamp(lo, hi));
    }
}
