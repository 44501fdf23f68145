use std::collections::BTreeMap;

use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::{Result, TensorError};

/// Dense n-dimensional value in row-major order, with an optional gradient
/// buffer of the same length.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<S: Scalar> {
    shape: Vec<usize>,
    values: Vec<S>,
    requires_grad: bool,
    grad: Option<Vec<S>>,
}

impl<S: Scalar> Tensor<S> {
    pub fn new(shape: Vec<usize>, values: Vec<S>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != values.len() {
            return Err(TensorError::InvalidArgument {
                op: "Tensor::new",
                msg: format!("shape {shape:?} wants {numel} values, got {}", values.len()),
            });
        }
        Ok(Tensor { shape, values, requires_grad: true, grad: None })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel = shape.iter().product();
        Tensor { shape, values: vec![S::zero(); numel], requires_grad: true, grad: None }
    }

    /// Uniform init in (-1/sqrt(fan_in), 1/sqrt(fan_in)). The random stream
    /// is drawn in f64 and cast, so f32 and f64 instantiations see the same
    /// draws.
    pub fn uniform(shape: Vec<usize>, fan_in: usize, rng: &mut Rng) -> Self {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let numel: usize = shape.iter().product();
        let values = (0..numel)
            .map(|_| S::from_f64(rng.uniform(-bound, bound)))
            .collect();
        Tensor { shape, values, requires_grad: true, grad: None }
    }

    pub fn scalar(v: S) -> Self {
        Tensor { shape: vec![1, 1], values: vec![v], requires_grad: true, grad: None }
    }

    pub fn frozen(mut self) -> Self {
        self.requires_grad = false;
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [S] {
        &mut self.values
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn grad(&self) -> Option<&[S]> {
        self.grad.as_deref()
    }

    pub fn clear_grad(&mut self) {
        self.grad = None;
    }

    /// Accumulate a gradient contribution, allocating on first use.
    pub fn add_grad(&mut self, contrib: &[S]) {
        debug_assert_eq!(contrib.len(), self.values.len());
        let grad = self
            .grad
            .get_or_insert_with(|| vec![S::zero(); self.values.len()]);
        for (g, c) in grad.iter_mut().zip(contrib) {
            *g += *c;
        }
    }
}

/// Named map of trainable tensors plus the optimizer state that rides along
/// with them.
#[derive(Debug, Clone, Default)]
pub struct ParameterSet<S: Scalar> {
    tensors: BTreeMap<String, Tensor<S>>,
    pub(crate) adam_m: BTreeMap<String, Vec<S>>,
    pub(crate) adam_v: BTreeMap<String, Vec<S>>,
    pub(crate) adam_t: u64,
}

impl<S: Scalar> ParameterSet<S> {
    pub fn new() -> Self {
        ParameterSet {
            tensors: BTreeMap::new(),
            adam_m: BTreeMap::new(),
            adam_v: BTreeMap::new(),
            adam_t: 0,
        }
    }

    pub fn insert(&mut self, name: &str, tensor: Tensor<S>) -> Result<()> {
        if self.tensors.contains_key(name) {
            return Err(TensorError::DuplicateParam(name.to_string()));
        }
        self.tensors.insert(name.to_string(), tensor);
        Ok(())
    }

    pub fn add_uniform(
        &mut self,
        name: &str,
        shape: Vec<usize>,
        fan_in: usize,
        rng: &mut Rng,
    ) -> Result<()> {
        self.insert(name, Tensor::uniform(shape, fan_in, rng))
    }

    pub fn add_zeros(&mut self, name: &str, shape: Vec<usize>) -> Result<()> {
        self.insert(name, Tensor::zeros(shape))
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<S>> {
        self.tensors
            .get(name)
            .ok_or_else(|| TensorError::UnknownParam(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<S>> {
        self.tensors
            .get_mut(name)
            .ok_or_else(|| TensorError::UnknownParam(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    /// Iteration is in name order, which keeps every consumer deterministic.
    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor<S>)> {
        self.tensors.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor<S>)> {
        self.tensors.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.tensors.keys()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn num_values(&self) -> usize {
        self.tensors.values().map(Tensor::numel).sum()
    }

    pub fn clear_grads(&mut self) {
        for t in self.tensors.values_mut() {
            t.clear_grad();
        }
    }

    /// Drop optimizer state, e.g. after loading values for inference.
    pub fn reset_optimizer(&mut self) {
        self.adam_m.clear();
        self.adam_v.clear();
        self.adam_t = 0;
    }

    /// Copy values (not grads, not optimizer state) from another set with the
    /// same layout. Used to restore a best-epoch snapshot.
    pub fn copy_values_from(&mut self, other: &ParameterSet<S>) -> Result<()> {
        for (name, tensor) in self.tensors.iter_mut() {
            let src = other.get(name)?;
            if src.shape() != tensor.shape() {
                return Err(TensorError::ShapeMismatch {
                    op: "copy_values_from",
                    lhs: tensor.shape().to_vec(),
                    rhs: src.shape().to_vec(),
                });
            }
            tensor.values_mut().copy_from_slice(src.values());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_checks_length() {
        assert!(Tensor::<f64>::new(vec![2, 3], vec![0.0; 6]).is_ok());
        assert!(Tensor::<f64>::new(vec![2, 3], vec![0.0; 5]).is_err());
    }

    #[test]
    fn uniform_within_bound() {
        let mut rng = Rng::new(1);
        let t = Tensor::<f64>::uniform(vec![4, 9], 9, &mut rng);
        let bound = 1.0 / 3.0;
        assert!(t.values().iter().all(|v| v.abs() < bound));
    }

    #[test]
    fn duplicate_param_rejected() {
        let mut ps = ParameterSet::<f64>::new();
        ps.add_zeros("w", vec![2, 2]).unwrap();
        assert!(matches!(
            ps.add_zeros("w", vec![2, 2]),
            Err(TensorError::DuplicateParam(_))
        ));
    }

    #[test]
    fn grad_accumulates() {
        let mut t = Tensor::<f64>::zeros(vec![1, 3]);
        t.add_grad(&[1.0, 2.0, 3.0]);
        t.add_grad(&[1.0, 1.0, 1.0]);
        assert_eq!(t.grad().unwrap(), &[2.0, 3.0, 4.0]);
    }
}
