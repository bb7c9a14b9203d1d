//! Adam with bias correction. One state tensor pair (first and second
//! moment) per parameter, step counter shared.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Real, Tensor};
use crate::error::CoreError;

use super::params::{GradMap, ModelParams};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState<T: Real> {
    pub hyper: AdamHyper,
    m: IndexMap<String, Tensor<T>>,
    v: IndexMap<String, Tensor<T>>,
    step: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(params: &ModelParams<T>, hyper: AdamHyper) -> Self {
        let m = params
            .iter()
            .map(|(n, t)| (n.clone(), Tensor::zeros(t.shape())))
            .collect();
        let v = params
            .iter()
            .map(|(n, t)| (n.clone(), Tensor::zeros(t.shape())))
            .collect();
        AdamState {
            hyper,
            m,
            v,
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self, name: &str) -> Option<&Tensor<T>> {
        self.m.get(name)
    }

    pub fn second_moment(&self, name: &str) -> Option<&Tensor<T>> {
        self.v.get(name)
    }

    /// Reassembles a state from checkpoint parts. Moment maps must cover
    /// exactly the parameter names, in order.
    pub fn from_parts(
        hyper: AdamHyper,
        step: u64,
        m: IndexMap<String, Tensor<T>>,
        v: IndexMap<String, Tensor<T>>,
    ) -> Self {
        AdamState { hyper, m, v, step }
    }
}

/// One Adam update. Every parameter must have a gradient of matching
/// shape; the step counter increases by exactly 1.
pub fn adam_step<T: Real>(
    params: &mut ModelParams<T>,
    grads: &GradMap<T>,
    state: &mut AdamState<T>,
) -> Result<(), CoreError> {
    state.step += 1;
    let t = state.step.min(i32::MAX as u64) as i32;
    let h = &state.hyper;
    let bias1 = 1.0 - h.beta1.powi(t);
    let bias2 = 1.0 - h.beta2.powi(t);

    let beta1 = T::from_f64(h.beta1);
    let beta2 = T::from_f64(h.beta2);
    let one_m_beta1 = T::from_f64(1.0 - h.beta1);
    let one_m_beta2 = T::from_f64(1.0 - h.beta2);
    let inv_bias1 = T::from_f64(1.0 / bias1);
    let inv_bias2 = T::from_f64(1.0 / bias2);
    let lr = T::from_f64(h.lr);
    let eps = T::from_f64(h.eps);

    let names: Vec<String> = params.iter().map(|(n, _)| n.clone()).collect();
    for name in &names {
        let grad = grads
            .get(name)
            .ok_or_else(|| CoreError::MissingGradient(name.clone()))?;
        let expected = params.get(name)?.shape().to_vec();
        if grad.shape() != expected {
            return Err(CoreError::ParamShape {
                name: name.clone(),
                expected,
                found: grad.shape().to_vec(),
            });
        }

        let m = state.m.get_mut(name).expect("moment exists").data_mut();
        let v = state.v.get_mut(name).expect("moment exists").data_mut();
        let theta = params.data_mut(name)?;
        for ((p, &g), (m_i, v_i)) in theta
            .iter_mut()
            .zip(grad.data())
            .zip(m.iter_mut().zip(v.iter_mut()))
        {
            *m_i = beta1 * *m_i + one_m_beta1 * g;
            *v_i = beta2 * *v_i + one_m_beta2 * g * g;
            let m_hat = *m_i * inv_bias1;
            let v_hat = *v_i * inv_bias2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_param(value: f64) -> ModelParams<f64> {
        let mut p = ModelParams::new();
        p.insert("theta", Tensor::vector(vec![value])).unwrap();
        p
    }

    fn grad_of(value: f64) -> GradMap<f64> {
        let mut g = GradMap::new();
        g.insert("theta".to_string(), Tensor::vector(vec![value]));
        g
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut params = one_param(1.25);
        let mut state = AdamState::new(&params, AdamHyper::default());
        adam_step(&mut params, &grad_of(0.0), &mut state).unwrap();
        assert_eq!(params.get("theta").unwrap().data()[0], 1.25);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // Bias correction makes the very first step lr * g / (|g| + eps'),
        // which is ~lr * sign(g) for any nonzero gradient.
        let mut params = one_param(1.0);
        let mut state = AdamState::new(&params, AdamHyper::default());
        adam_step(&mut params, &grad_of(0.5), &mut state).unwrap();
        let new = params.get("theta").unwrap().data()[0];
        assert!((new - (1.0 - 1e-4)).abs() < 1e-8, "got {new}");
    }

    #[test]
    fn descends_on_quadratic() {
        // f(x) = x^2, gradient 2x.
        let mut params = one_param(0.7);
        let mut state = AdamState::new(
            &params,
            AdamHyper {
                lr: 0.05,
                ..AdamHyper::default()
            },
        );
        let mut losses = Vec::new();
        for _ in 0..2 {
            let x = params.get("theta").unwrap().data()[0];
            losses.push(x * x);
            adam_step(&mut params, &grad_of(2.0 * x), &mut state).unwrap();
        }
        let x = params.get("theta").unwrap().data()[0];
        losses.push(x * x);
        assert!(losses[1] < losses[0]);
        assert!(losses[2] < losses[1]);
    }

    #[test]
    fn missing_gradient_is_contract_error() {
        let mut params = one_param(0.0);
        let mut state = AdamState::new(&params, AdamHyper::default());
        let empty = GradMap::new();
        let err = adam_step(&mut params, &empty, &mut state).unwrap_err();
        assert!(matches!(err, CoreError::MissingGradient(_)));
    }
}
