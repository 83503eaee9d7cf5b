//! Bias-corrected Adam.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta1 > 0.0 && self.beta1 < 1.0) || !(self.beta2 > 0.0 && self.beta2 < 1.0) {
            return Err(Error::invalid(format!(
                "adam: betas must lie in (0, 1), got {} and {}",
                self.beta1, self.beta2
            )));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) || !(self.epsilon > 0.0) {
            return Err(Error::invalid("adam: learning rate must be finite and ≥ 0, epsilon > 0"));
        }
        Ok(())
    }
}

/// First and second moment estimates for every parameter, plus the step
/// counter.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub step: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(sizes: impl IntoIterator<Item = usize>) -> Self {
        let (first, second) = sizes
            .into_iter()
            .map(|n| (vec![T::zero(); n], vec![T::zero(); n]))
            .unzip();
        AdamState { step: 0, first, second }
    }
}

/// A mutable view of one named parameter and its gradient.
pub struct ParamUpdate<'a, T> {
    pub name: &'a str,
    pub value: &'a mut Tensor<T>,
    pub grad: Option<&'a Tensor<T>>,
}

/// Applies one Adam step. Parameters whose gradient is `None` keep their
/// value and moments. A non-finite gradient aborts before anything changes.
pub fn adam_step<T: Scalar>(params: &mut [ParamUpdate<'_, T>], state: &mut AdamState<T>, config: &AdamConfig) -> Result<()> {
    if params.len() != state.first.len() {
        return Err(Error::invalid(format!(
            "adam: state tracks {} parameters, got {}",
            state.first.len(),
            params.len()
        )));
    }
    for p in params.iter() {
        if let Some(g) = p.grad {
            if g.len() != p.value.len() {
                return Err(Error::shape("adam", p.value.shape(), g.shape()));
            }
            if let Some(i) = g.first_non_finite() {
                return Err(Error::Numeric(format!(
                    "adam: non-finite gradient for {} at element {i}",
                    p.name
                )));
            }
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (T::from_f64(config.beta1), T::from_f64(config.beta2));
    let lr = T::from_f64(config.learning_rate);
    let eps = T::from_f64(config.epsilon);
    let c1 = T::one() - b1.powi(t);
    let c2 = T::one() - b2.powi(t);
    for (i, p) in params.iter_mut().enumerate() {
        let Some(g) = p.grad else { continue };
        let (m, v) = (&mut state.first[i], &mut state.second[i]);
        for (((w, &gi), mi), vi) in p.value.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mi = b1 * *mi + (T::one() - b1) * gi;
            *vi = b2 * *vi + (T::one() - b2) * gi * gi;
            let m_hat = *mi / c1;
            let v_hat = *vi / c2;
            *w = *w - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
