use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;

/// Update rule plus its hyperparameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum OptimizerKind {
    RmsProp { decay: f32, epsilon: f32 },
    Adam { beta1: f32, beta2: f32, epsilon: f32 },
}

impl OptimizerKind {
    pub fn rmsprop_default() -> OptimizerKind {
        OptimizerKind::RmsProp {
            decay: 0.99,
            epsilon: 1e-8,
        }
    }

    pub fn adam_default() -> OptimizerKind {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Per-parameter accumulator state for one optimizer instance.
///
/// Accumulator shapes mirror the parameter shapes they were created for;
/// the step counter increases by one per [`Optimizer::step`].
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f32,
    step: u64,
    /// RMSProp: squared-gradient cache. Adam: first moment.
    moment1: Vec<Tensor>,
    /// Adam only: second moment.
    moment2: Vec<Tensor>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f32, param_shapes: &[&[usize]]) -> Optimizer {
        let moment1 = param_shapes.iter().map(|s| Tensor::zeros(s)).collect();
        let moment2 = match kind {
            OptimizerKind::Adam { .. } => param_shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            OptimizerKind::RmsProp { .. } => Vec::new(),
        };
        Optimizer {
            kind,
            learning_rate,
            step: 0,
            moment1,
            moment2,
        }
    }

    pub fn for_params(kind: OptimizerKind, learning_rate: f32, params: &[&Tensor]) -> Optimizer {
        let shapes: Vec<&[usize]> = params.iter().map(|t| t.shape()).collect();
        Optimizer::new(kind, learning_rate, &shapes)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update. Gradients must be finite and shape-aligned.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != self.moment1.len() || grads.len() != params.len() {
            return Err(Error::Usage(format!(
                "optimizer tracks {} parameter tensors, got {} params / {} grads",
                self.moment1.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, g) in grads.iter().enumerate() {
            if g.shape() != params[i].shape() {
                return Err(Error::Usage(format!(
                    "gradient {i} shape {:?} does not match parameter shape {:?}",
                    g.shape(),
                    params[i].shape()
                )));
            }
            if !g.all_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite gradient in parameter tensor {i} (max |g| = {:e})",
                    g.max_abs()
                )));
            }
        }

        self.step += 1;
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::RmsProp { decay, epsilon } => {
                for ((p, g), cache) in params.iter_mut().zip(grads).zip(&mut self.moment1) {
                    for ((pv, gv), cv) in
                        p.data_mut().iter_mut().zip(g.data()).zip(cache.data_mut())
                    {
                        *cv = decay * *cv + (1.0 - decay) * gv * gv;
                        *pv -= lr * gv / (cv.sqrt() + epsilon);
                    }
                }
            }
            OptimizerKind::Adam { beta1, beta2, epsilon } => {
                let t = self.step as f64;
                let bias1 = 1.0 - (beta1 as f64).powf(t);
                let bias2 = 1.0 - (beta2 as f64).powf(t);
                for (((p, g), m), v) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(&mut self.moment1)
                    .zip(&mut self.moment2)
                {
                    for (((pv, gv), mv), vv) in p
                        .data_mut()
                        .iter_mut()
                        .zip(g.data())
                        .zip(m.data_mut())
                        .zip(v.data_mut())
                    {
                        *mv = beta1 * *mv + (1.0 - beta1) * gv;
                        *vv = beta2 * *vv + (1.0 - beta2) * gv * gv;
                        let m_hat = f64::from(*mv) / bias1;
                        let v_hat = f64::from(*vv) / bias2;
                        *pv -= (f64::from(lr) * m_hat / (v_hat.sqrt() + f64::from(epsilon))) as f32;
                    }
                }
            }
        }
        Ok(())
    }
}
