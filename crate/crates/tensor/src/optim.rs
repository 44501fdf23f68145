use crate::scalar::Scalar;
use crate::tensor::ParameterSet;
use crate::{Result, TensorError};

/// Adam with bias correction. First-moment and second-moment state lives in
/// the `ParameterSet` sidecar so a snapshot of the set carries the optimizer
/// with it.
#[derive(Debug, Clone, Copy)]
pub struct Adam<S: Scalar> {
    pub lr: S,
    pub beta1: S,
    pub beta2: S,
    pub eps: S,
}

impl<S: Scalar> Default for Adam<S> {
    fn default() -> Self {
        Adam {
            lr: S::from_f64(0.001),
            beta1: S::from_f64(0.9),
            beta2: S::from_f64(0.999),
            eps: S::from_f64(1e-8),
        }
    }
}

impl<S: Scalar> Adam<S> {
    pub fn with_lr(lr: S) -> Self {
        Adam { lr, ..Adam::default() }
    }

    /// Apply one update to every trainable parameter. Frozen tensors
    /// (`requires_grad == false`) are left untouched; a trainable tensor
    /// without a gradient is an error.
    pub fn step(&self, params: &mut ParameterSet<S>) -> Result<()> {
        params.adam_t += 1;
        let t = params.adam_t;
        let bc1 = S::one() - self.beta1.powi(t as i32);
        let bc2 = S::one() - self.beta2.powi(t as i32);

        let names: Vec<String> = params.names().cloned().collect();
        for name in names {
            if !params.get(&name)?.requires_grad() {
                continue;
            }
            let numel = params.get(&name)?.numel();
            let grad = params
                .get(&name)?
                .grad()
                .ok_or_else(|| TensorError::MissingGrad(name.clone()))?
                .to_vec();
            let m = params
                .adam_m
                .entry(name.clone())
                .or_insert_with(|| vec![S::zero(); numel]);
            for (mi, &gi) in m.iter_mut().zip(&grad) {
                *mi = self.beta1 * *mi + (S::one() - self.beta1) * gi;
            }
            let m = m.clone();
            let v = params
                .adam_v
                .entry(name.clone())
                .or_insert_with(|| vec![S::zero(); numel]);
            for (vi, &gi) in v.iter_mut().zip(&grad) {
                *vi = self.beta2 * *vi + (S::one() - self.beta2) * gi * gi;
            }
            let v = v.clone();

            let tensor = params.get_mut(&name)?;
            for ((x, mi), vi) in tensor.values_mut().iter_mut().zip(&m).zip(&v) {
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *x = *x - self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn first_step_is_signed_lr() {
        // With bias correction the first update is -lr * g / (|g| + eps),
        // i.e. about -lr * sign(g).
        let mut ps = ParameterSet::<f64>::new();
        ps.insert("w", Tensor::new(vec![1, 2], vec![1.0, -2.0]).unwrap())
            .unwrap();
        ps.get_mut("w").unwrap().add_grad(&[0.3, -0.07]);
        let adam = Adam::default();
        adam.step(&mut ps).unwrap();
        let w = ps.get("w").unwrap().values();
        assert!((w[0] - (1.0 - 0.001)).abs() < 1e-7);
        assert!((w[1] - (-2.0 + 0.001)).abs() < 1e-7);
    }

    #[test]
    fn zero_grads_leave_params_unchanged() {
        let mut ps = ParameterSet::<f64>::new();
        ps.insert("w", Tensor::new(vec![1, 2], vec![0.5, -0.5]).unwrap())
            .unwrap();
        ps.get_mut("w").unwrap().add_grad(&[0.0, 0.0]);
        Adam::default().step(&mut ps).unwrap();
        assert_eq!(ps.get("w").unwrap().values(), &[0.5, -0.5]);
    }

    #[test]
    fn frozen_param_unchanged_and_missing_grad_errors() {
        let mut ps = ParameterSet::<f64>::new();
        ps.insert("frozen", Tensor::scalar(7.0).frozen()).unwrap();
        ps.insert("live", Tensor::scalar(1.0)).unwrap();
        ps.get_mut("live").unwrap().add_grad(&[1.0]);
        Adam::default().step(&mut ps).unwrap();
        assert_eq!(ps.get("frozen").unwrap().values(), &[7.0]);
        assert!(ps.get("live").unwrap().values()[0] < 1.0);

        let mut bad = ParameterSet::<f64>::new();
        bad.insert("w", Tensor::scalar(0.0)).unwrap();
        assert!(matches!(
            Adam::default().step(&mut bad),
            Err(TensorError::MissingGrad(_))
        ));
    }
}
