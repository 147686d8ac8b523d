use std::collections::BTreeMap;

use super::{Gradients, ModelGraph, NnError, Scalar};

/// Adam moment coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment estimates plus the step counter for bias correction.
#[derive(Debug, Clone)]
pub struct AdamState<T: Scalar = f32> {
    m: BTreeMap<String, Vec<T>>,
    v: BTreeMap<String, Vec<T>>,
    step: u64,
    params: AdamParams,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(graph: &ModelGraph<T>, params: AdamParams) -> Self {
        let zeros = |t: &super::Tensor<T>| vec![T::zero(); t.numel()];
        Self {
            m: graph.weights().iter().map(|(n, t)| (n.clone(), zeros(t))).collect(),
            v: graph.weights().iter().map(|(n, t)| (n.clone(), zeros(t))).collect(),
            step: 0,
            params,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update applied in place to the graph weights.
    pub fn step(
        &mut self,
        graph: &mut ModelGraph<T>,
        grads: &Gradients<T>,
        learning_rate: f64,
    ) -> Result<(), NnError> {
        self.step += 1;
        let b1 = T::from_f64(self.params.beta1);
        let b2 = T::from_f64(self.params.beta2);
        let one = T::one();
        let eps = T::from_f64(self.params.epsilon);
        let bc1 = T::from_f64(1.0 - self.params.beta1.powi(self.step as i32));
        let bc2 = T::from_f64(1.0 - self.params.beta2.powi(self.step as i32));
        let lr = T::from_f64(learning_rate);
        for (name, weight) in graph.weights_mut().iter_mut() {
            let g = grads.get(name).ok_or_else(|| NnError::WeightMismatch {
                name: name.clone(),
                detail: "missing gradient".into(),
            })?;
            if g.len() != weight.numel() {
                return Err(NnError::WeightMismatch {
                    name: name.clone(),
                    detail: format!("gradient length {} != weight length {}", g.len(), weight.numel()),
                });
            }
            let m = self.m.get_mut(name).expect("state matches weights");
            let v = self.v.get_mut(name).expect("state matches weights");
            let w = weight.data_mut();
            for i in 0..w.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + (one - b1) * gi;
                v[i] = b2 * v[i] + (one - b2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                w[i] = w[i] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
