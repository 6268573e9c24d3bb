use super::params::ParameterStore;
use super::tensor::Tensor;
use super::{NeuralError, Result};

pub const DEFAULT_RHO: f64 = 0.95;
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Running averages of squared gradients and squared updates, one pair of
/// accumulators per parameter tensor.
#[derive(Clone, Debug)]
pub struct AdaDeltaState {
    pub rho: f64,
    pub epsilon: f64,
    pub accum_grad_sq: Vec<Tensor>,
    pub accum_update_sq: Vec<Tensor>,
}

impl AdaDeltaState {
    pub fn new(params: &ParameterStore) -> Self {
        Self::with_hyperparameters(params, DEFAULT_RHO, DEFAULT_EPSILON)
    }

    pub fn with_hyperparameters(params: &ParameterStore, rho: f64, epsilon: f64) -> Self {
        let zeros: Vec<Tensor> = params.values().iter().map(|v| Tensor::zeros(v.shape())).collect();
        AdaDeltaState {
            rho,
            epsilon,
            accum_grad_sq: zeros.clone(),
            accum_update_sq: zeros,
        }
    }

    /// Applies one update to `params` using its accumulated gradients.
    pub fn step(&mut self, params: &mut ParameterStore) -> Result<()> {
        let (values, grads) = params.values_and_grads_mut();
        adadelta_update(values, grads, self)
    }
}

/// ```text
/// E[g²]  ← ρ E[g²] + (1 − ρ) g²
/// Δ      = −sqrt(E[Δ²] + ε) / sqrt(E[g²] + ε) · g
/// E[Δ²]  ← ρ E[Δ²] + (1 − ρ) Δ²
/// x      ← x + Δ
/// ```
pub fn adadelta_update(params: &mut [Tensor], grads: &[Tensor], state: &mut AdaDeltaState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.accum_grad_sq.len() {
        return Err(NeuralError::ShapeMismatch(format!(
            "adadelta: {} params, {} grads, {} accumulators",
            params.len(),
            grads.len(),
            state.accum_grad_sq.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if !p.same_shape(g) || !p.same_shape(&state.accum_grad_sq[i]) || !p.same_shape(&state.accum_update_sq[i]) {
            return Err(NeuralError::ShapeMismatch(format!(
                "adadelta: tensor {i} has shape {:?}, gradient {:?}",
                p.shape(),
                g.shape()
            )));
        }
    }
    let (rho, eps) = (state.rho, state.epsilon);
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let eg = state.accum_grad_sq[i].data_mut();
        let ex = state.accum_update_sq[i].data_mut();
        for (j, (x, gj)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
            eg[j] = rho * eg[j] + (1.0 - rho) * gj * gj;
            let delta = -((ex[j] + eps).sqrt() / (eg[j] + eps).sqrt()) * gj;
            ex[j] = rho * ex[j] + (1.0 - rho) * delta * delta;
            *x += delta;
        }
    }
    Ok(())
}
