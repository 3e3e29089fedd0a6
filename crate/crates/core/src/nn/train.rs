use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TinyNet;
use crate::error::{shape_mismatch, Error, Result};

/// Mini-batch Adam on two-logit cross-entropy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 5,
            learning_rate: 3e-4,
            batch_size: 128,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean cross-entropy over each epoch.
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
}

struct Adam {
    m: Vec<(Vec<f64>, Vec<f64>)>,
    v: Vec<(Vec<f64>, Vec<f64>)>,
    t: i32,
}

impl Adam {
    fn update(cfg: &TrainConfig, t: i32, p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], scale: f64) {
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for i in 0..p.len() {
            let gi = g[i] * scale;
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
}

fn zeros_like(net: &TinyNet) -> Vec<(Vec<f64>, Vec<f64>)> {
    net.layers()
        .iter()
        .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
        .collect()
}

/// Cross-entropy of the two logits against `label` and its gradient.
pub(crate) fn cross_entropy(logits: [f64; 2], label: u8) -> (f64, [f64; 2]) {
    let max = logits[0].max(logits[1]);
    let e0 = (logits[0] - max).exp();
    let e1 = (logits[1] - max).exp();
    let z = e0 + e1;
    let p = [e0 / z, e1 / z];
    let loss = -(p[label as usize].max(f64::MIN_POSITIVE)).ln();
    let mut grad = p;
    grad[label as usize] -= 1.0;
    (loss, grad)
}

/// Trains `net` in place. Only dense and conv layers are updated.
pub fn train(net: &mut TinyNet, inputs: &[Vec<f64>], labels: &[u8], cfg: &TrainConfig) -> Result<TrainReport> {
    if inputs.len() != labels.len() {
        return Err(shape_mismatch(format!("{} labels", inputs.len()), labels.len()));
    }
    if inputs.is_empty() {
        return Err(Error::EmptyTable);
    }
    if cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) {
        return Err(Error::Config("batch_size and learning_rate must be positive".into()));
    }
    for (x, &y) in inputs.iter().zip(labels) {
        net.check_input(x)?;
        if y > 1 {
            return Err(Error::BadValue(format!("label {y} is not binary")));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam {
        m: zeros_like(net),
        v: zeros_like(net),
        t: 0,
    };
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = zeros_like(net);
            for &i in batch {
                let fwd = net.forward_unchecked(&inputs[i]);
                let (loss, g) = cross_entropy(fwd.logits, labels[i]);
                epoch_loss += loss;
                net.backward(&fwd, g, Some(&mut grads));
            }
            adam.t += 1;
            let scale = 1.0 / batch.len() as f64;
            for (li, layer) in net.layers_mut().iter_mut().enumerate() {
                if !layer.spec.is_trainable() {
                    continue;
                }
                let (gw, gb) = &grads[li];
                let (mw, mb) = &mut adam.m[li];
                let (vw, vb) = &mut adam.v[li];
                Adam::update(cfg, adam.t, &mut layer.weights, gw, mw, vw, scale);
                Adam::update(cfg, adam.t, &mut layer.bias, gb, mb, vb, scale);
            }
        }
        epoch_losses.push(epoch_loss / inputs.len() as f64);
    }
    Ok(TrainReport {
        epoch_losses,
        steps: adam.t as usize,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{NetBuilder, Shape};
    use rand::Rng;

    #[test]
    fn cross_entropy_gradient_is_softmax_minus_onehot() {
        let (loss, g) = cross_entropy([0.0, 0.0], 1);
        assert!((loss - 2f64.ln()).abs() < 1e-15);
        assert_eq!(g, [0.5, -0.5]);
    }

    #[test]
    fn learns_a_separable_problem() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = NetBuilder::new(Shape::image(1, 1, 4))
            .flatten()
            .dense(8)
            .relu()
            .dense(2)
            .build_random(&mut rng)
            .unwrap();
        let inputs: Vec<Vec<f64>> = (0..256)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let labels: Vec<u8> = inputs.iter().map(|x| (x[0] + x[2] > 0.0) as u8).collect();
        let cfg = TrainConfig {
            epochs: 40,
            learning_rate: 1e-2,
            batch_size: 32,
            ..TrainConfig::default()
        };
        let report = train(&mut net, &inputs, &labels, &cfg).unwrap();
        assert!(report.epoch_losses.last().unwrap() < &0.2, "{:?}", report.epoch_losses);
        let correct = inputs
            .iter()
            .zip(&labels)
            .filter(|(x, &y)| (net.score(x).unwrap() >= 0.5) as u8 == y)
            .count();
        assert!(correct > 240);
    }

    #[test]
    fn training_is_deterministic() {
        let build = || {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            NetBuilder::new(Shape::image(1, 1, 2)).flatten().dense(2).build_random(&mut rng).unwrap()
        };
        let inputs = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        let labels = vec![1, 0, 1];
        let cfg = TrainConfig {
            batch_size: 2,
            ..TrainConfig::default()
        };
        let (mut a, mut b) = (build(), build());
        train(&mut a, &inputs, &labels, &cfg).unwrap();
        train(&mut b, &inputs, &labels, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
