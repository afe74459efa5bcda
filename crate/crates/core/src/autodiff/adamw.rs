use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-4,
        }
    }
}

/// Moment estimates for one parameter tensor.
#[derive(Clone, Debug)]
pub struct AdamWState {
    m: Vec<f64>,
    v: Vec<f64>,
    shape: Vec<usize>,
    t: u64,
}

impl AdamWState {
    pub fn new(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            shape: shape.to_vec(),
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }
}

/// One AdamW update with decoupled weight decay:
/// `θ ← θ − lr·(m̂/(√v̂ + ε) + weight_decay·θ)`.
pub fn adamw_step(
    param: &mut Tensor,
    grad: &Tensor,
    state: &mut AdamWState,
    cfg: &AdamWConfig,
) -> Result<()> {
    if param.shape() != grad.shape() {
        return Err(Error::shape("adamw_step", param.shape(), grad.shape()));
    }
    if param.shape() != state.shape.as_slice() {
        return Err(Error::shape("adamw_step", param.shape(), &state.shape));
    }
    state.t += 1;
    let bc1 = 1.0 - cfg.beta1.powi(state.t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(state.t as i32);
    for (((theta, &g), m), v) in param
        .data_mut()
        .iter_mut()
        .zip(grad.data())
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *theta -= cfg.lr * (m_hat / (v_hat.sqrt() + cfg.eps) + cfg.weight_decay * *theta);
    }
    Ok(())
}

/// AdamW over an ordered list of parameter tensors.
#[derive(Clone, Debug)]
pub struct AdamW {
    pub config: AdamWConfig,
    states: Vec<AdamWState>,
}

impl AdamW {
    pub fn new<'a>(config: AdamWConfig, params: impl IntoIterator<Item = &'a Tensor>) -> Self {
        let states = params
            .into_iter()
            .map(|p| AdamWState::new(p.shape()))
            .collect();
        Self { config, states }
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != self.states.len() || grads.len() != params.len() {
            return Err(Error::InvalidConfig(format!(
                "optimizer tracks {} tensors, got {} parameters and {} gradients",
                self.states.len(),
                params.len(),
                grads.len()
            )));
        }
        for ((p, g), s) in params.iter_mut().zip(grads).zip(self.states.iter_mut()) {
            adamw_step(p, g, s, &self.config)?;
        }
        Ok(())
    }
}
