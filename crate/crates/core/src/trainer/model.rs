//! Mean-pooled embedding classifier with one hidden layer.
//!
//! ```text
//! E = mean(embedding[t] for t in tokens)      pooled input embedding, d
//! h = act(W1 E + b1)                          hidden, H
//! A = W2 h + b2                               pre-softmax activations, K
//! p = softmax(A)
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::vocab::TokenId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    /// Makes the network linear in `E`; used for closed-form checks.
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output(self, h: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - h * h,
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
    pub classes: usize,
}

/// One full set of parameter-shaped tensors (also used for gradients and moments).
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    /// `vocab x embed`, row-major.
    pub embedding: Vec<f64>,
    /// `hidden x embed`.
    pub hidden_weight: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    /// `classes x hidden`.
    pub output_weight: Vec<f64>,
    pub output_bias: Vec<f64>,
}

impl Params {
    pub fn zeros(dims: Dims) -> Self {
        Self {
            embedding: vec![0.0; dims.vocab * dims.embed],
            hidden_weight: vec![0.0; dims.hidden * dims.embed],
            hidden_bias: vec![0.0; dims.hidden],
            output_weight: vec![0.0; dims.classes * dims.hidden],
            output_bias: vec![0.0; dims.classes],
        }
    }

    pub fn tensors(&self) -> [&[f64]; 5] {
        [
            &self.embedding,
            &self.hidden_weight,
            &self.hidden_bias,
            &self.output_weight,
            &self.output_bias,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 5] {
        [
            &mut self.embedding,
            &mut self.hidden_weight,
            &mut self.hidden_bias,
            &mut self.output_weight,
            &mut self.output_bias,
        ]
    }

    pub fn fill_zero(&mut self) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }
}

/// Names matching [`Params::tensors`] order; used by the checkpoint header.
pub const TENSOR_NAMES: [&str; 5] = [
    "embedding",
    "hidden_weight",
    "hidden_bias",
    "output_weight",
    "output_bias",
];

/// Parameters plus AdamW state.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub dims: Dims,
    pub activation: Activation,
    pub params: Params,
    pub first_moment: Params,
    pub second_moment: Params,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    pub pooled: Vec<f64>,
    pub hidden: Vec<f64>,
    pub activations: Vec<f64>,
    pub probs: Vec<f64>,
}

impl ForwardPass {
    pub fn predicted(&self) -> usize {
        argmax(&self.probs)
    }
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&a| (a - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

const EMBEDDING_INIT: f64 = 0.1;

impl ModelState {
    /// Uniform initialisation: embeddings in ±0.1, weights Glorot-uniform, biases zero.
    pub fn init(dims: Dims, activation: Activation, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Params::zeros(dims);
        let mut fill = |t: &mut Vec<f64>, bound: f64| {
            t.iter_mut().for_each(|x| *x = rng.gen_range(-bound..bound));
        };
        fill(&mut params.embedding, EMBEDDING_INIT);
        fill(
            &mut params.hidden_weight,
            (6.0 / (dims.embed + dims.hidden) as f64).sqrt(),
        );
        fill(
            &mut params.output_weight,
            (6.0 / (dims.hidden + dims.classes) as f64).sqrt(),
        );
        Self {
            dims,
            activation,
            params,
            first_moment: Params::zeros(dims),
            second_moment: Params::zeros(dims),
            step: 0,
        }
    }

    pub fn pool(&self, tokens: &[TokenId]) -> Vec<f64> {
        assert!(!tokens.is_empty(), "forward needs at least one token (NULL counts)");
        let d = self.dims.embed;
        let mut pooled = vec![0.0; d];
        for &t in tokens {
            let row = &self.params.embedding[t as usize * d..(t as usize + 1) * d];
            pooled.iter_mut().zip(row).for_each(|(p, r)| *p += r);
        }
        let scale = 1.0 / tokens.len() as f64;
        pooled.iter_mut().for_each(|p| *p *= scale);
        pooled
    }

    /// Everything downstream of the pooled embedding.
    pub fn forward_pooled(&self, pooled: Vec<f64>) -> ForwardPass {
        let Dims { embed: d, hidden: h_dim, classes: k, .. } = self.dims;
        let p = &self.params;
        let hidden: Vec<f64> = (0..h_dim)
            .map(|j| {
                let row = &p.hidden_weight[j * d..(j + 1) * d];
                let z = p.hidden_bias[j] + dot(row, &pooled);
                self.activation.apply(z)
            })
            .collect();
        let activations: Vec<f64> = (0..k)
            .map(|c| p.output_bias[c] + dot(&p.output_weight[c * h_dim..(c + 1) * h_dim], &hidden))
            .collect();
        let probs = softmax(&activations);
        ForwardPass {
            pooled,
            hidden,
            activations,
            probs,
        }
    }

    pub fn forward(&self, tokens: &[TokenId]) -> ForwardPass {
        self.forward_pooled(self.pool(tokens))
    }

    /// ∂A_gold / ∂E at the pooled embedding of `tokens`.
    pub fn input_gradient(&self, tokens: &[TokenId], gold: usize) -> Vec<f64> {
        let pass = self.forward(tokens);
        self.input_gradient_at(&pass, gold)
    }

    pub fn input_gradient_at(&self, pass: &ForwardPass, gold: usize) -> Vec<f64> {
        let Dims { embed: d, hidden: h_dim, classes: k, .. } = self.dims;
        assert!(gold < k, "gold label {gold} out of range for {k} classes");
        let p = &self.params;
        let mut grad = vec![0.0; d];
        for j in 0..h_dim {
            let back = p.output_weight[gold * h_dim + j]
                * self.activation.derivative_from_output(pass.hidden[j]);
            let row = &p.hidden_weight[j * d..(j + 1) * d];
            grad.iter_mut().zip(row).for_each(|(g, w)| *g += back * w);
        }
        grad
    }

    /// Accumulate cross-entropy gradients for one example into `grads`; returns the loss.
    pub(crate) fn accumulate_gradients(
        &self,
        tokens: &[TokenId],
        gold: usize,
        grads: &mut Params,
    ) -> f64 {
        let Dims { embed: d, hidden: h_dim, classes: k, .. } = self.dims;
        let p = &self.params;
        let pass = self.forward(tokens);
        let loss = -pass.probs[gold].max(f64::MIN_POSITIVE).ln();

        let d_act: Vec<f64> = (0..k)
            .map(|c| pass.probs[c] - if c == gold { 1.0 } else { 0.0 })
            .collect();
        let mut d_hidden = vec![0.0; h_dim];
        for c in 0..k {
            grads.output_bias[c] += d_act[c];
            let w_row = &p.output_weight[c * h_dim..(c + 1) * h_dim];
            let g_row = &mut grads.output_weight[c * h_dim..(c + 1) * h_dim];
            for j in 0..h_dim {
                g_row[j] += d_act[c] * pass.hidden[j];
                d_hidden[j] += d_act[c] * w_row[j];
            }
        }
        let mut d_pooled = vec![0.0; d];
        for j in 0..h_dim {
            let dz = d_hidden[j] * self.activation.derivative_from_output(pass.hidden[j]);
            grads.hidden_bias[j] += dz;
            let w_row = &p.hidden_weight[j * d..(j + 1) * d];
            let g_row = &mut grads.hidden_weight[j * d..(j + 1) * d];
            for e in 0..d {
                g_row[e] += dz * pass.pooled[e];
                d_pooled[e] += dz * w_row[e];
            }
        }
        let scale = 1.0 / tokens.len() as f64;
        for &t in tokens {
            let g_row = &mut grads.embedding[t as usize * d..(t as usize + 1) * d];
            g_row
                .iter_mut()
                .zip(&d_pooled)
                .for_each(|(g, dp)| *g += dp * scale);
        }
        loss
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims() -> Dims {
        Dims {
            vocab: 6,
            embed: 4,
            hidden: 5,
            classes: 3,
        }
    }

    #[test]
    fn probabilities_are_normalised() {
        let m = ModelState::init(dims(), Activation::Tanh, 3);
        let pass = m.forward(&[2, 3, 3, 5]);
        assert!(pass.probs.iter().all(|&p| p > 0.0 && p < 1.0));
        assert!((pass.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_output_layer_is_uniform() {
        let mut m = ModelState::init(dims(), Activation::Tanh, 3);
        m.params.output_weight.iter_mut().for_each(|w| *w = 0.0);
        let pass = m.forward(&[1, 4]);
        for p in pass.probs {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn single_token_pools_to_its_row() {
        let m = ModelState::init(dims(), Activation::Tanh, 3);
        assert_eq!(m.pool(&[4]), m.params.embedding[16..20].to_vec());
    }

    #[test]
    fn linear_model_gradient_is_output_row() {
        let d = Dims {
            vocab: 3,
            embed: 4,
            hidden: 4,
            classes: 2,
        };
        let mut m = ModelState::init(d, Activation::Identity, 1);
        m.params.hidden_weight = (0..16).map(|i| if i % 5 == 0 { 1.0 } else { 0.0 }).collect();
        for gold in 0..2 {
            let g = m.input_gradient(&[0, 2], gold);
            assert_eq!(g, m.params.output_weight[gold * 4..(gold + 1) * 4].to_vec());
        }
    }

    #[test]
    fn gradient_scales_with_gold_row() {
        let mut m = ModelState::init(dims(), Activation::Tanh, 8);
        let before = m.input_gradient(&[2, 5], 1);
        m.params.output_weight[5..10].iter_mut().for_each(|w| *w *= 2.0);
        let after = m.input_gradient(&[2, 5], 1);
        for (a, b) in after.iter().zip(&before) {
            assert!((a - 2.0 * b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.2, 0.3, 0.5]), 2);
    }
}
