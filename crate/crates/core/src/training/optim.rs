//! First-order parameter updates.

use serde::{Deserialize, Serialize};

use crate::encoders::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    /// Adaptive moment estimation with bias correction.
    Adam { beta1: f64, beta2: f64, eps: f64 },
    /// Plain gradient descent.
    Sgd,
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Optimizer state for one flat parameter buffer.
#[derive(Debug, Clone)]
pub struct Optimizer<T> {
    kind: OptimizerKind,
    lr: f64,
    step: u64,
    m: Vec<T>,
    v: Vec<T>,
}

impl<T: Real> Optimizer<T> {
    pub fn new(kind: OptimizerKind, lr: f64, len: usize) -> Self {
        let moments = matches!(kind, OptimizerKind::Adam { .. });
        let zeros = || if moments { vec![T::zero(); len] } else { Vec::new() };
        Self { kind, lr, step: 0, m: zeros(), v: zeros() }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update of `params` against `grads`.
    pub fn update(&mut self, params: &mut [T], grads: &[T]) {
        assert_eq!(params.len(), grads.len(), "parameter and gradient lengths differ");
        self.step += 1;
        let lr = T::of(self.lr);
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, &g) in params.iter_mut().zip(grads) {
                    *p -= lr * g;
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let t = self.step as i32;
                let (b1, b2, eps) = (T::of(beta1), T::of(beta2), T::of(eps));
                let c1 = T::one() - T::of(beta1.powi(t));
                let c2 = T::one() - T::of(beta2.powi(t));
                for i in 0..params.len() {
                    let g = grads[i];
                    self.m[i] = b1 * self.m[i] + (T::one() - b1) * g;
                    self.v[i] = b2 * self.v[i] + (T::one() - b2) * g * g;
                    let m_hat = self.m[i] / c1;
                    let v_hat = self.v[i] / c2;
                    params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
    }
}
