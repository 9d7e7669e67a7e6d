use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::mlp::{Momentum, Trace};
use super::vae::{LossWeights, VaeSurrogate};
use crate::problems::{EvaluatedSample, Solution};
use crate::{rng, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub score_weight: f64,
    pub kl_weight: f64,
    /// Upper bound on the norm of each batch-mean gradient.
    pub grad_clip: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-2,
            momentum: 0.9,
            epochs: 300,
            batch_size: 32,
            score_weight: 1.0,
            kl_weight: 0.1,
            grad_clip: 5.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && (0.0..1.0).contains(&self.momentum)
            && self.epochs > 0
            && self.batch_size > 0
            && self.score_weight >= 0.0
            && self.kl_weight >= 0.0
            && self.grad_clip > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("training config out of range"))
        }
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights::new(self.score_weight, self.kl_weight)
    }
}

/// Min-max scaling of raw objective values to `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub min: f64,
    pub max: f64,
}

impl Normalization {
    pub fn fit(values: &[f64]) -> Self {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Normalization { min, max }
    }

    /// A constant dataset maps to 0.
    pub fn apply(&self, y: f64) -> f64 {
        let span = self.max - self.min;
        if span > 0.0 {
            (y - self.min) / span
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainedVae {
    pub surrogate: VaeSurrogate,
    pub normalization: Normalization,
    /// Mean per-sample loss before training.
    pub initial_loss: f64,
    /// Mean per-sample loss of every epoch.
    pub loss_history: Vec<f64>,
}

/// Trains a fresh surrogate on `dataset` with minibatch SGD and momentum.
pub fn train_vae(dataset: &[EvaluatedSample], config: &TrainConfig) -> Result<TrainedVae> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::invalid("training dataset is empty"));
    }
    let dim = dataset[0].solution.len();
    if let Some(bad) = dataset.iter().find(|s| s.solution.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, actual: bad.solution.len() });
    }
    let normalization = Normalization::fit(&dataset.iter().map(|s| s.objective).collect::<Vec<_>>());
    let data: Vec<(Vec<f64>, f64)> =
        dataset.iter().map(|s| (s.solution.to_f64(), normalization.apply(s.objective))).collect();

    let mut r = rng::seeded(config.seed);
    let mut vae = VaeSurrogate::new(dim, &mut r);
    let weights = config.weights();
    let mut init_rng = rng::stream(config.seed, 1);
    let initial_loss = vae.loss_sampled(&data, weights, &mut init_rng) / data.len() as f64;
    let mut opt = [
        Momentum::new(&vae.encoder, config.momentum),
        Momentum::new(&vae.decoder, config.momentum),
        Momentum::new(&vae.scorer, config.momentum),
    ];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut r);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grads = vae.zeros_like();
            for &i in batch {
                total += vae.accumulate(&data[i].0, data[i].1, weights, &mut r, &mut grads);
            }
            let norm = [&grads.encoder, &grads.decoder, &grads.scorer]
                .iter()
                .flat_map(|n| n.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias)))
                .map(|g| g * g)
                .sum::<f64>()
                .sqrt()
                / batch.len() as f64;
            let scale = if norm > config.grad_clip { config.grad_clip / norm } else { 1.0 };
            let lr = scale * config.learning_rate / batch.len() as f64;
            opt[0].step(&mut vae.encoder, &grads.encoder, lr);
            opt[1].step(&mut vae.decoder, &grads.decoder, lr);
            opt[2].step(&mut vae.scorer, &grads.scorer, lr);
        }
        let mean = total / data.len() as f64;
        if !mean.is_finite() || !(vae.encoder.all_finite() && vae.decoder.all_finite() && vae.scorer.all_finite()) {
            return Err(Error::Divergence { epoch });
        }
        history.push(mean);
    }
    Ok(TrainedVae { surrogate: vae, normalization, initial_loss, loss_history: history })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FinetuneConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig { learning_rate: 1e-2, momentum: 0.9, epochs: 200, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct Finetuned {
    pub surrogate: VaeSurrogate,
    /// Mean pair loss before the first update.
    pub initial_loss: f64,
    /// Mean pair loss of the retained decoder after each epoch (non-increasing).
    pub loss_history: Vec<f64>,
}

/// Pairs sharing the same input reduce to one latent point with an averaged target.
struct Group {
    z: Vec<f64>,
    target: Vec<f64>,
    weight: f64,
}

fn group_pairs(vae: &VaeSurrogate, pairs: &[(Solution, Solution)]) -> (Vec<Group>, f64) {
    let mut index: HashMap<&Solution, usize> = HashMap::new();
    let mut sums: Vec<(Vec<f64>, f64, &Solution)> = Vec::new();
    for (xin, xout) in pairs {
        let slot = *index.entry(xin).or_insert_with(|| {
            sums.push((vec![0.0; xout.len()], 0.0, xin));
            sums.len() - 1
        });
        let (acc, w, _) = &mut sums[slot];
        acc.iter_mut().zip(xout.bits()).for_each(|(a, &b)| *a += b as f64);
        *w += 1.0;
    }
    // Σ_pairs ||t - r||² = Σ_groups w ||t̄ - r||² + Σ_groups Σ ||t - t̄||²
    let mut residual = 0.0;
    let groups = sums
        .into_iter()
        .map(|(acc, w, xin)| {
            let target: Vec<f64> = acc.iter().map(|a| a / w).collect();
            // bits are 0/1, so Σ (t - t̄)² = w t̄ (1 - t̄) per coordinate
            residual += target.iter().map(|t| w * t * (1.0 - t)).sum::<f64>();
            Group { z: vae.latent_mean(&xin.to_f64()), target, weight: w }
        })
        .collect();
    (groups, residual)
}

/// Resizes the decoder's output layer to `target_dim` rows: truncation keeps
/// the first rows, growth appends rows drawn from `N(0, 0.01^2)` with zero bias.
pub fn resize_output<R: rand::Rng + ?Sized>(vae: &mut VaeSurrogate, target_dim: usize, rng: &mut R) {
    let last = vae.decoder.layers.last_mut().expect("decoder has layers");
    let old = last.outputs;
    if target_dim <= old {
        last.weights.truncate(target_dim * last.inputs);
        last.bias.truncate(target_dim);
    } else {
        let normal = Normal::new(0.0, 0.01).expect("finite std");
        last.weights.extend((0..(target_dim - old) * last.inputs).map(|_| normal.sample(rng)));
        last.bias.resize(target_dim, 0.0);
    }
    last.outputs = target_dim;
}

/// Fine-tunes a copy of the decoder on `(x_in, x_out)` pairs with the encoder
/// frozen and `z = mu(x_in)`. The decoder with the lowest loss seen is returned.
pub fn finetune_decoder(
    surrogate: &VaeSurrogate,
    pairs: &[(Solution, Solution)],
    target_dim: usize,
    config: &FinetuneConfig,
) -> Result<Finetuned> {
    if pairs.is_empty() {
        return Err(Error::invalid("fine-tuning needs at least one pair"));
    }
    if target_dim == 0 || config.epochs == 0 || !(config.learning_rate > 0.0) {
        return Err(Error::invalid("fine-tuning config out of range"));
    }
    for (xin, xout) in pairs {
        if xin.len() != surrogate.input_dim() {
            return Err(Error::DimensionMismatch { expected: surrogate.input_dim(), actual: xin.len() });
        }
        if xout.len() != target_dim {
            return Err(Error::DimensionMismatch { expected: target_dim, actual: xout.len() });
        }
    }
    let mut vae = surrogate.clone();
    if target_dim != vae.output_dim() {
        resize_output(&mut vae, target_dim, &mut rng::seeded(config.seed));
    }
    let (groups, residual) = group_pairs(&vae, pairs);
    let n = pairs.len() as f64;
    let mut trace = Trace::default();
    let mut loss_and_grad = |dec: &super::Mlp, grads: Option<&mut super::Mlp>| -> f64 {
        let mut total = residual;
        let mut grads = grads;
        for g in &groups {
            dec.forward_trace(&g.z, &mut trace);
            let out = trace.output();
            total += g.weight * out.iter().zip(&g.target).map(|(r, t)| (r - t) * (r - t)).sum::<f64>();
            if let Some(gr) = grads.as_deref_mut() {
                let dr: Vec<f64> = out.iter().zip(&g.target).map(|(r, t)| 2.0 * g.weight * (r - t)).collect();
                dec.backward(&trace, &dr, gr);
            }
        }
        total / n
    };

    // Each pass scores the current decoder and then steps it, so the decoder
    // reached by the last step gets one extra evaluation.
    let mut opt = Momentum::new(&vae.decoder, config.momentum);
    let mut history = Vec::with_capacity(config.epochs);
    let mut grads = vae.decoder.zeros_like();
    let initial = loss_and_grad(&vae.decoder, Some(&mut grads));
    let mut best = (initial, vae.decoder.clone());
    for epoch in 0..config.epochs {
        opt.step(&mut vae.decoder, &grads, config.learning_rate);
        let last = epoch + 1 == config.epochs;
        grads = vae.decoder.zeros_like();
        let loss = loss_and_grad(&vae.decoder, if last { None } else { Some(&mut grads) });
        if !loss.is_finite() || !vae.decoder.all_finite() {
            return Err(Error::Divergence { epoch });
        }
        if loss < best.0 {
            best = (loss, vae.decoder.clone());
        }
        history.push(best.0);
    }
    vae.decoder = best.1;
    Ok(Finetuned { surrogate: vae, initial_loss: initial, loss_history: history })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(dim: usize, n: usize, seed: u64) -> Vec<EvaluatedSample> {
        let mut r = rng::seeded(seed);
        (0..n)
            .map(|_| {
                let s = Solution::random(dim, &mut r);
                let objective = s.count_ones() as f64;
                EvaluatedSample { solution: s, objective }
            })
            .collect()
    }

    #[test]
    fn normalization_bounds() {
        let n = Normalization::fit(&[3.0, 5.0, 4.0]);
        assert_eq!(n.apply(3.0), 0.0);
        assert_eq!(n.apply(5.0), 1.0);
        assert_eq!(Normalization::fit(&[2.0, 2.0]).apply(2.0), 0.0);
    }

    #[test]
    fn training_is_deterministic_and_improves() {
        let data = samples(8, 64, 1);
        let cfg = TrainConfig { epochs: 40, seed: 5, ..TrainConfig::default() };
        let a = train_vae(&data, &cfg).unwrap();
        let b = train_vae(&data, &cfg).unwrap();
        assert_eq!(a.surrogate, b.surrogate);
        assert_eq!(a.loss_history.len(), 40);
        assert!(a.loss_history.last().unwrap() <= &a.initial_loss);
    }

    #[test]
    fn divergent_learning_rate_is_reported() {
        let data = samples(8, 64, 2);
        let cfg = TrainConfig { epochs: 50, learning_rate: 1e6, grad_clip: f64::MAX, ..TrainConfig::default() };
        assert!(matches!(train_vae(&data, &cfg), Err(Error::Divergence { .. })));
    }

    #[test]
    fn grouped_loss_matches_pairwise_loss() {
        let vae = VaeSurrogate::new(6, &mut rng::seeded(0));
        let mut r = rng::seeded(1);
        let ins: Vec<Solution> = (0..3).map(|_| Solution::random(6, &mut r)).collect();
        let pairs: Vec<(Solution, Solution)> =
            (0..12).map(|i| (ins[i % 3].clone(), Solution::random(6, &mut r))).collect();
        let cfg = FinetuneConfig { epochs: 1, learning_rate: 1e-12, ..FinetuneConfig::default() };
        let out = finetune_decoder(&vae, &pairs, 6, &cfg).unwrap();
        let direct = vae.transfer_loss(&pairs) / pairs.len() as f64;
        assert!((out.initial_loss - direct).abs() < 1e-12);
    }

    #[test]
    fn resize_truncates_and_grows() {
        let mut vae = VaeSurrogate::new(10, &mut rng::seeded(0));
        let before = vae.decoder.layers.last().unwrap().clone();
        let mut small = vae.clone();
        resize_output(&mut small, 7, &mut rng::seeded(1));
        let l = small.decoder.layers.last().unwrap();
        assert_eq!(l.outputs, 7);
        assert_eq!(&l.weights[..], &before.weights[..7 * before.inputs]);
        resize_output(&mut vae, 13, &mut rng::seeded(1));
        let l = vae.decoder.layers.last().unwrap();
        assert_eq!(l.weights.len(), 13 * l.inputs);
        assert_eq!(&l.weights[..10 * l.inputs], &before.weights[..]);
        assert!(l.weights[10 * l.inputs..].iter().all(|w| w.abs() < 0.1));
        assert_eq!(vae.output_dim(), 13);
    }

    #[test]
    fn finetune_freezes_encoder_and_scorer() {
        let vae = VaeSurrogate::new(6, &mut rng::seeded(3));
        let mut r = rng::seeded(4);
        let pairs: Vec<_> = (0..8).map(|_| (Solution::random(6, &mut r), Solution::random(9, &mut r))).collect();
        let out = finetune_decoder(&vae, &pairs, 9, &FinetuneConfig { epochs: 20, ..Default::default() }).unwrap();
        assert_eq!(out.surrogate.encoder, vae.encoder);
        assert_eq!(out.surrogate.scorer, vae.scorer);
        assert_eq!(out.surrogate.output_dim(), 9);
        assert!(out.loss_history.windows(2).all(|w| w[1] <= w[0]));
        assert!(finetune_decoder(&vae, &[], 9, &FinetuneConfig::default()).is_err());
        assert!(finetune_decoder(&vae, &pairs, 8, &FinetuneConfig::default()).is_err());
    }
}
