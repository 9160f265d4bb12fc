use crate::tensor::{ParamSet, Real};

/// RMSProp without momentum:
/// `a ← ρ·a + (1−ρ)·g²`, `θ ← θ − lr·g / (√a + ε)`.
#[derive(Clone, Debug)]
pub struct RmsProp<T> {
    pub rho: f64,
    pub epsilon: f64,
    accumulators: Vec<Vec<T>>,
}

impl<T: Real> RmsProp<T> {
    pub fn new(params: &ParamSet<T>, rho: f64, epsilon: f64) -> Self {
        RmsProp {
            rho,
            epsilon,
            accumulators: params.iter().map(|p| vec![T::zero(); p.value.len()]).collect(),
        }
    }

    pub fn accumulators(&self) -> &[Vec<T>] {
        &self.accumulators
    }

    /// Update every parameter from its stored gradient.
    pub fn step(&mut self, params: &mut ParamSet<T>, lr: f64) {
        let (rho, one_minus_rho) = (T::of(self.rho), T::of(1.0 - self.rho));
        let (lr, eps) = (T::of(lr), T::of(self.epsilon));
        for (p, acc) in params.iter_mut().zip(&mut self.accumulators) {
            let grads = p.grad.data();
            for ((theta, a), &g) in p.value.data_mut().iter_mut().zip(acc.iter_mut()).zip(grads) {
                *a = rho * *a + one_minus_rho * g * g;
                *theta -= lr * g / (a.sqrt() + eps);
            }
        }
    }
}

/// Rescale all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping. `max_norm = 0` disables clipping.
pub fn clip_grad_norm<T: Real>(params: &mut ParamSet<T>, max_norm: f64) -> f64 {
    let norm = params.grad_norm().as_f64();
    if max_norm > 0.0 && norm > max_norm {
        let scale = T::of(max_norm / norm);
        for p in params.iter_mut() {
            for g in p.grad.data_mut() {
                *g *= scale;
            }
        }
    }
    norm
}
