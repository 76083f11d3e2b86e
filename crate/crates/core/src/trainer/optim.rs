use serde::{Deserialize, Serialize};

use super::model::{ModelState, Params};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// `lr * (1 - t / T)` at zero-based step `t` of `T`.
    LinearDecay,
    Constant,
}

impl Schedule {
    pub fn rate(self, base: f64, step: usize, total_steps: usize) -> f64 {
        match self {
            Schedule::Constant => base,
            Schedule::LinearDecay => {
                let frac = step as f64 / total_steps.max(1) as f64;
                (base * (1.0 - frac)).max(0.0)
            }
        }
    }
}

/// AdamW hyperparameters (decoupled weight decay).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamW {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

impl AdamW {
    /// One update with learning rate `lr`. Biases are not decayed.
    pub fn step(&self, state: &mut ModelState, grads: &Params, lr: f64) {
        state.step += 1;
        let t = state.step as i32;
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);
        let decays = [true, true, false, true, false];

        let ModelState {
            params,
            first_moment,
            second_moment,
            ..
        } = state;
        let tensors = params
            .tensors_mut()
            .into_iter()
            .zip(first_moment.tensors_mut())
            .zip(second_moment.tensors_mut())
            .zip(grads.tensors())
            .zip(decays);
        for ((((theta, m), v), g), decay) in tensors {
            let wd = if decay { self.weight_decay } else { 0.0 };
            for i in 0..theta.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                theta[i] -= lr * (m_hat / (v_hat.sqrt() + self.eps) + wd * theta[i]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::model::{Activation, Dims};

    #[test]
    fn linear_decay_is_positive_and_decreasing() {
        let total = 50;
        let first = Schedule::LinearDecay.rate(5e-3, 0, total);
        let last = Schedule::LinearDecay.rate(5e-3, total - 1, total);
        assert_eq!(first, 5e-3);
        assert!(last >= 0.0 && last < first);
        assert_eq!(Schedule::Constant.rate(5e-3, total - 1, total), 5e-3);
    }

    #[test]
    fn first_step_moves_each_weight_by_lr() {
        // With bias correction the first Adam step is lr * sign(g) (up to eps).
        let dims = Dims {
            vocab: 2,
            embed: 1,
            hidden: 1,
            classes: 2,
        };
        let mut state = ModelState::init(dims, Activation::Tanh, 0);
        let before = state.params.clone();
        let mut grads = Params::zeros(dims);
        grads.output_bias = vec![0.5, -2.0];
        let opt = AdamW {
            weight_decay: 0.0,
            ..AdamW::default()
        };
        opt.step(&mut state, &grads, 0.1);
        assert!((state.params.output_bias[0] - (before.output_bias[0] - 0.1)).abs() < 1e-6);
        assert!((state.params.output_bias[1] - (before.output_bias[1] + 0.1)).abs() < 1e-6);
        assert_eq!(state.params.embedding, before.embedding);
    }
}
