//! Adam optimizer with bias correction.

use super::net::NetworkParams;
use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Per-parameter first/second moment estimates plus the shared step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub cfg: AdamConfig,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: u64,
}

impl AdamState {
    /// Zero-initialized moments shaped after `params`.
    pub fn new(cfg: AdamConfig, params: &NetworkParams) -> Self {
        let zeros = |p: &NetworkParams| {
            p.tensors
                .iter()
                .map(|(_, t)| Tensor::zeros(t.shape().to_vec()))
                .collect::<Vec<_>>()
        };
        Self {
            cfg,
            m: zeros(params),
            v: zeros(params),
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One Adam update. `grads` is aligned with `params.tensors`; a `None` entry
/// means that tensor did not appear in the loss graph and is treated as a
/// zero gradient.
pub fn adam_step(params: &mut NetworkParams, grads: &[Option<&[f64]>], state: &mut AdamState) {
    assert_eq!(
        grads.len(),
        params.tensors.len(),
        "gradient list does not match parameter list"
    );
    state.t += 1;
    let AdamConfig { lr, beta1, beta2, eps } = state.cfg;
    let bc1 = 1.0 - beta1.powi(state.t as i32);
    let bc2 = 1.0 - beta2.powi(state.t as i32);
    for (i, (_, tensor)) in params.tensors.iter_mut().enumerate() {
        let m = state.m[i].values_mut();
        let v = state.v[i].values_mut();
        let p = tensor.values_mut();
        for j in 0..p.len() {
            let g = grads[i].map_or(0.0, |g| g[j]);
            m[j] = beta1 * m[j] + (1.0 - beta1) * g;
            v[j] = beta2 * v[j] + (1.0 - beta2) * g * g;
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            p[j] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::net::{init_params, Architecture, Head, Layer};

    fn tiny_params() -> NetworkParams {
        let arch = Architecture {
            input_shape: vec![2],
            layers: vec![Layer::Dense { inputs: 2, outputs: 2 }],
            heads: vec![Head::new("out", 1)],
        };
        init_params(&arch, 9).unwrap()
    }

    #[test]
    fn zero_gradients_leave_fresh_parameters_unchanged() {
        let mut params = tiny_params();
        let before = params.clone();
        let mut state = AdamState::new(AdamConfig::with_lr(1e-3), &params);
        let zero: Vec<Vec<f64>> = params.tensors.iter().map(|(_, t)| vec![0.0; t.len()]).collect();
        let grads: Vec<Option<&[f64]>> = zero.iter().map(|g| Some(g.as_slice())).collect();
        adam_step(&mut params, &grads, &mut state);
        assert_eq!(params, before);
    }

    #[test]
    fn constant_gradient_moves_parameters_against_its_sign() {
        let mut params = tiny_params();
        let start = params.tensors[0].1.values()[0];
        let mut state = AdamState::new(AdamConfig::with_lr(1e-3), &params);
        let ones: Vec<Vec<f64>> = params.tensors.iter().map(|(_, t)| vec![0.5; t.len()]).collect();
        for _ in 0..100 {
            let grads: Vec<Option<&[f64]>> = ones.iter().map(|g| Some(g.as_slice())).collect();
            adam_step(&mut params, &grads, &mut state);
        }
        let end = params.tensors[0].1.values()[0];
        assert!(end < start, "positive gradient must decrease the parameter");
        assert!((start - end) <= 100.0 * 1e-3 + 1e-9, "step size bounded by lr");
    }

    #[test]
    fn single_step_matches_the_hand_computed_update() {
        // One parameter, g = 0.1, lr = 1e-3, β₁ = 0.9, β₂ = 0.999, ε = 1e-8:
        //   m = 0.01, v = 1e-5·g ... after bias correction m̂ = g, v̂ = g²,
        //   so Δ = lr·g/(|g| + ε).
        let mut params = tiny_params();
        let before: Vec<f64> = params.tensors[0].1.values().to_vec();
        let mut state = AdamState::new(AdamConfig::with_lr(1e-3), &params);
        let g = 0.1;
        let full: Vec<Vec<f64>> = params.tensors.iter().map(|(_, t)| vec![g; t.len()]).collect();
        let grads: Vec<Option<&[f64]>> = full.iter().map(|v| Some(v.as_slice())).collect();
        adam_step(&mut params, &grads, &mut state);
        let expected_delta = 1e-3 * g / (g + 1e-8);
        for (b, a) in before.iter().zip(params.tensors[0].1.values()) {
            assert!(
                ((b - a) - expected_delta).abs() < 1e-12,
                "delta {} vs expected {expected_delta}",
                b - a
            );
        }
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn missing_gradients_are_treated_as_zero() {
        let mut params = tiny_params();
        let before = params.clone();
        let mut state = AdamState::new(AdamConfig::with_lr(1e-2), &params);
        let grads: Vec<Option<&[f64]>> = params.tensors.iter().map(|_| None).collect();
        adam_step(&mut params, &grads, &mut state);
        assert_eq!(params, before);
    }
}
