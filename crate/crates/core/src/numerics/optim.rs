use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, Gradients, Tape, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    /// Decoupled: each step subtracts `lr * weight_decay * theta`.
    pub weight_decay: f64,
    pub betas: (f64, f64),
    pub eps: f64,
}

impl AdamConfig {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            weight_decay,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            weight_decay: 0.0,
            betas: (0.9, 0.999),
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Param {
    name: String,
    value: DenseMatrix,
    #[serde(skip)]
    grad: Option<DenseMatrix>,
    m: DenseMatrix,
    v: DenseMatrix,
}

/// Named parameter tensors with their gradients and Adam moments.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    params: Vec<Param>,
    step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: DenseMatrix) -> ParamId {
        let (r, c) = value.shape();
        self.params.push(Param {
            name: name.into(),
            value,
            grad: None,
            m: DenseMatrix::zeros(r, c),
            v: DenseMatrix::zeros(r, c),
        });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &DenseMatrix {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut DenseMatrix {
        &mut self.params[id.0].value
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn grad(&self, id: ParamId) -> Option<&DenseMatrix> {
        self.params[id.0].grad.as_ref()
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.data().len()).sum()
    }

    /// Places every parameter on `tape` as a leaf. Index the result by
    /// [`ParamId::index`].
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Vec<Var> {
        self.params
            .iter()
            .map(|p| tape.leaf(p.value.clone(), trainable))
            .collect()
    }

    /// Overwrites stored gradients from a backward pass. Parameters the
    /// root does not depend on get a zero gradient.
    pub fn set_grads(&mut self, bound: &[Var], grads: &Gradients) {
        for (p, v) in self.params.iter_mut().zip(bound) {
            let (r, c) = p.value.shape();
            p.grad = Some(
                grads
                    .get(*v)
                    .cloned()
                    .unwrap_or_else(|| DenseMatrix::zeros(r, c)),
            );
        }
    }

    pub fn set_grad(&mut self, id: ParamId, grad: DenseMatrix) -> Result<()> {
        let p = &mut self.params[id.0];
        if grad.shape() != p.value.shape() {
            return Err(Error::shape(
                "set_grad",
                format!("{:?}", p.value.shape()),
                format!("{:?}", grad.shape()),
            ));
        }
        p.grad = Some(grad);
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad = None;
        }
    }

    /// One Adam step with bias correction and decoupled weight decay.
    pub fn adam_step(&mut self, cfg: &AdamConfig) -> Result<()> {
        if cfg.lr <= 0.0 || !cfg.lr.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "learning rate {} must be > 0",
                cfg.lr
            )));
        }
        if cfg.weight_decay < 0.0 {
            return Err(Error::InvalidArgument("weight decay must be >= 0".into()));
        }
        let (b1, b2) = cfg.betas;
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        for p in &mut self.params {
            let Some(g) = p.grad.as_ref() else { continue };
            let decay = cfg.lr * cfg.weight_decay;
            let value = p.value.data_mut();
            let m = p.m.data_mut();
            let v = p.v.data_mut();
            for i in 0..value.len() {
                let gi = g.data()[i];
                m[i] = b1 * m[i] + (1.0 - b1) * gi;
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                value[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps) + decay * value[i];
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = ParamStore::new();
        let id = s.add("w", DenseMatrix::filled(2, 2, 0.7));
        s.set_grad(id, DenseMatrix::zeros(2, 2)).unwrap();
        s.adam_step(&AdamConfig::new(0.1, 0.0)).unwrap();
        assert_eq!(s.value(id), &DenseMatrix::filled(2, 2, 0.7));
    }

    #[test]
    fn first_step_is_lr() {
        let mut s = ParamStore::new();
        let id = s.add("x", DenseMatrix::filled(1, 1, 1.0));
        s.set_grad(id, DenseMatrix::filled(1, 1, 1.0)).unwrap();
        s.adam_step(&AdamConfig::new(0.05, 0.0)).unwrap();
        let moved = 1.0 - s.value(id).data()[0];
        assert!((moved - 0.05).abs() < 1e-8, "{moved}");
    }

    #[test]
    fn decoupled_decay() {
        let mut s = ParamStore::new();
        let id = s.add("x", DenseMatrix::filled(1, 1, 2.0));
        s.set_grad(id, DenseMatrix::zeros(1, 1)).unwrap();
        s.adam_step(&AdamConfig::new(0.1, 0.01)).unwrap();
        assert!((s.value(id).data()[0] - (2.0 - 0.1 * 0.01 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_lr() {
        let mut s = ParamStore::new();
        s.add("x", DenseMatrix::zeros(1, 1));
        assert!(s.adam_step(&AdamConfig::new(0.0, 0.0)).is_err());
        assert!(s.adam_step(&AdamConfig::new(-1.0, 0.0)).is_err());
    }

    #[test]
    fn quadratic_descends_monotonically() {
        // loss = sum (x - 3)^2
        let mut s = ParamStore::new();
        let id = s.add("x", DenseMatrix::from_rows(&[[0.0, 1.0, -2.0]]).unwrap());
        let loss = |s: &ParamStore| {
            s.value(id)
                .data()
                .iter()
                .map(|x| (x - 3.0).powi(2))
                .sum::<f64>()
        };
        let cfg = AdamConfig::new(0.01, 0.0);
        let mut prev = loss(&s);
        for _ in 0..10 {
            let g = s.value(id).map(|x| 2.0 * (x - 3.0));
            s.set_grad(id, g).unwrap();
            s.adam_step(&cfg).unwrap();
            let cur = loss(&s);
            assert!(cur < prev);
            prev = cur;
        }
    }
}
