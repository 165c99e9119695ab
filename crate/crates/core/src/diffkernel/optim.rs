//! Named parameter storage and SGD with momentum and cosine decay.

use serde::{Deserialize, Serialize};

use crate::diffkernel::graph::{Graph, Var};
use crate::diffkernel::tensor::Tensor;
use crate::error::{Error, Result};

/// Index of a parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(pub(crate) usize);

/// Ordered, named parameter values. Parameters live here between training
/// steps; each step binds them into a fresh graph as trainable leaves.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ParamStore {
    entries: Vec<(String, Tensor)>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.entries.push((name.into(), value));
        ParamId(self.entries.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].1
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].1
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].0
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn lookup(&self, name: &str) -> Option<ParamId> {
        self.entries.iter().position(|(n, _)| n == name).map(ParamId)
    }

    /// Bind every parameter into `graph` as a trainable leaf, in order.
    pub fn bind(&self, graph: &Graph) -> Vec<Var> {
        self.entries
            .iter()
            .map(|(_, t)| graph.param(t.clone()))
            .collect()
    }

    pub fn total_elements(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.numel()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.entries.iter().all(|(_, t)| t.all_finite())
    }
}

/// SGD with momentum and a cosine-decayed learning rate:
/// `rate(t) = base * 0.5 * (1 + cos(pi * t / total_steps))`, clamped at the
/// final value once `t` exceeds `total_steps`.
#[derive(Debug, Clone)]
pub struct Sgd {
    base_rate: f64,
    momentum: f64,
    step: usize,
    total_steps: usize,
    velocity: Vec<Tensor>,
}

impl Sgd {
    pub fn new(base_rate: f64, momentum: f64, total_steps: usize, params: &ParamStore) -> Result<Self> {
        if base_rate < 0.0 || !base_rate.is_finite() {
            return Err(Error::InvalidParameter {
                name: "base_rate",
                reason: format!("must be finite and >= 0, got {base_rate}"),
            });
        }
        if total_steps == 0 {
            return Err(Error::InvalidParameter {
                name: "total_steps",
                reason: "must be positive".into(),
            });
        }
        Ok(Self {
            base_rate,
            momentum,
            step: 0,
            total_steps,
            velocity: params.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect(),
        })
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    /// Effective learning rate at the current step.
    pub fn rate(&self) -> f64 {
        let t = self.step.min(self.total_steps) as f64;
        self.base_rate * 0.5 * (1.0 + (std::f64::consts::PI * t / self.total_steps as f64).cos())
    }

    /// Apply one update from the given gradients (one per parameter, in
    /// store order), then advance the schedule. The caller's gradient
    /// buffers are consumed, which is what zeroes them for the next step.
    pub fn step(&mut self, params: &mut ParamStore, grads: Vec<Tensor>) -> Result<()> {
        if grads.len() != params.len() {
            return Err(Error::Contract(format!(
                "expected {} gradients, got {}",
                params.len(),
                grads.len()
            )));
        }
        let rate = self.rate();
        for (i, grad) in grads.into_iter().enumerate() {
            let v = &mut self.velocity[i];
            if v.shape() != grad.shape() {
                return Err(Error::ShapeMismatch {
                    op: "Sgd::step",
                    left: v.shape().to_vec(),
                    right: grad.shape().to_vec(),
                });
            }
            // v = momentum * v + g; w -= rate * v
            for (vv, gv) in v.data_mut().iter_mut().zip(grad.data()) {
                *vv = self.momentum * *vv + gv;
            }
            params.entries[i].1.add_scaled(v, -rate)?;
        }
        self.step += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with(w: Tensor) -> (ParamStore, ParamId) {
        let mut s = ParamStore::new();
        let id = s.register("w", w);
        (s, id)
    }

    #[test]
    fn cosine_rate_at_start_and_midpoint() {
        let (store, _) = store_with(Tensor::scalar(0.0));
        let mut opt = Sgd::new(1e-4, 0.9, 100, &store).unwrap();
        assert!((opt.rate() - 1e-4).abs() < 1e-18);
        opt.step = 50;
        assert!((opt.rate() - 0.5e-4).abs() < 1e-12);
        opt.step = 100;
        assert!(opt.rate().abs() < 1e-18);
        opt.step = 250; // past the schedule: clamped at the final value
        assert!(opt.rate().abs() < 1e-18);
    }

    #[test]
    fn single_step_on_square() {
        // f(w) = w^2 from w=1 with rate 0.1: grad 2, w -> 0.8
        let (mut store, id) = store_with(Tensor::scalar(1.0));
        let mut opt = Sgd::new(0.1, 0.9, 1_000_000, &store).unwrap();
        // cosine at t=0 over a long horizon is the base rate
        let g = Graph::new();
        let w = g.param(store.value(id).clone());
        let sq = g.mul_elem(w, w).unwrap();
        let loss = g.sum_all(sq);
        g.backward(loss).unwrap();
        opt.step(&mut store, vec![g.grad(w)]).unwrap();
        assert!((store.value(id).data()[0] - 0.8).abs() < 1e-9);
        assert_eq!(opt.step_count(), 1);
    }

    #[test]
    fn zero_rate_leaves_parameters_unchanged() {
        let (mut store, id) = store_with(Tensor::vector(vec![1.0, -2.0]));
        let before = store.value(id).clone();
        let mut opt = Sgd::new(0.0, 0.9, 10, &store).unwrap();
        for _ in 0..5 {
            opt.step(&mut store, vec![Tensor::vector(vec![3.0, 4.0])]).unwrap();
        }
        assert_eq!(store.value(id), &before);
    }

    #[test]
    fn momentum_accumulates() {
        let (mut store, id) = store_with(Tensor::scalar(0.0));
        let mut opt = Sgd::new(1.0, 0.9, 1_000_000, &store).unwrap();
        opt.step(&mut store, vec![Tensor::scalar(1.0)]).unwrap();
        let after_one = store.value(id).data()[0];
        assert!((after_one + 1.0).abs() < 1e-12); // w = -1
        opt.step(&mut store, vec![Tensor::scalar(1.0)]).unwrap();
        // v = 0.9*1 + 1 = 1.9 -> w = -1 - 1.9*rate(1) ~ -2.9 for a flat schedule
        assert!(store.value(id).data()[0] < -2.89);
    }
}
