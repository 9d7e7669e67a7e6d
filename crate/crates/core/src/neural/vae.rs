use rand::Rng;
use rand_distr::StandardNormal;

use super::mlp::{Activation, Mlp, Trace};
use crate::problems::Solution;
use crate::{Error, Result};

/// Bounds applied to the encoder's log-sigma output before exponentiation.
pub const LOG_SIGMA_MIN: f64 = -6.0;
pub const LOG_SIGMA_MAX: f64 = 2.0;

/// Latent width used for a `d`-dimensional instance.
pub fn default_latent_dim(d: usize) -> usize {
    d.div_ceil(8).max(4)
}

/// VAE surrogate of one solved instance.
///
/// The encoder maps a solution to `[mu_z, log sigma_z]`; the decoder maps a
/// latent vector back to per-bit probabilities and the scorer maps it to a
/// predicted (normalised) objective value.
#[derive(Clone, Debug, PartialEq)]
pub struct VaeSurrogate {
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub scorer: Mlp,
    pub latent_dim: usize,
}

/// Weights of the three loss terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub reconstruction: f64,
    pub score: f64,
    pub kl: f64,
}

impl LossWeights {
    pub fn new(score: f64, kl: f64) -> Self {
        LossWeights { reconstruction: 1.0, score, kl }
    }
}

/// How the latent vector is obtained from `(mu, sigma)`.
pub enum Latent<'a, R: Rng + ?Sized = crate::rng::Rng> {
    Mean,
    Fixed(&'a [f64]),
    Sample(&'a mut R),
}

#[derive(Clone, Debug, PartialEq)]
pub struct VaeOutput {
    pub reconstruction: Vec<f64>,
    pub score: f64,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

struct Pass {
    enc: Trace,
    dec: Trace,
    sco: Trace,
    mu: Vec<f64>,
    log_sigma: Vec<f64>,
    /// Whether log-sigma sat inside the clamp range (gradient passes through).
    unclamped: Vec<bool>,
    sigma: Vec<f64>,
    eps: Vec<f64>,
}

impl VaeSurrogate {
    /// Default architecture: encoder `d-64-32-2dz`, decoder `dz-32-64-d`,
    /// scorer `dz-32-1`.
    pub fn new<R: Rng + ?Sized>(input_dim: usize, rng: &mut R) -> Self {
        Self::with_widths(input_dim, default_latent_dim(input_dim), &[64, 32], &[32, 64], &[32], rng)
    }

    pub fn with_widths<R: Rng + ?Sized>(
        input_dim: usize,
        latent_dim: usize,
        encoder_hidden: &[usize],
        decoder_hidden: &[usize],
        scorer_hidden: &[usize],
        rng: &mut R,
    ) -> Self {
        let stack = |first: usize, hidden: &[usize], last: usize, out_act: Activation, rng: &mut R| {
            let sizes: Vec<usize> =
                std::iter::once(first).chain(hidden.iter().copied()).chain(std::iter::once(last)).collect();
            let mut acts = vec![Activation::Relu; hidden.len()];
            acts.push(out_act);
            Mlp::new(&sizes, &acts, rng)
        };
        let encoder = stack(input_dim, encoder_hidden, 2 * latent_dim, Activation::Identity, rng);
        let decoder = stack(latent_dim, decoder_hidden, input_dim, Activation::Sigmoid, rng);
        let scorer = stack(latent_dim, scorer_hidden, 1, Activation::Identity, rng);
        VaeSurrogate { encoder, decoder, scorer, latent_dim }
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.decoder.output_dim()
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.decoder.param_count() + self.scorer.param_count()
    }

    pub(crate) fn zeros_like(&self) -> Self {
        VaeSurrogate {
            encoder: self.encoder.zeros_like(),
            decoder: self.decoder.zeros_like(),
            scorer: self.scorer.zeros_like(),
            latent_dim: self.latent_dim,
        }
    }

    /// Parameters as one vector: encoder, then decoder, then scorer.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.encoder.flatten_into(&mut out);
        self.decoder.flatten_into(&mut out);
        self.scorer.flatten_into(&mut out);
        out
    }

    pub fn load_params_flat(&mut self, flat: &[f64]) {
        let mut pos = self.encoder.load_flat(flat);
        pos += self.decoder.load_flat(&flat[pos..]);
        self.scorer.load_flat(&flat[pos..]);
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), actual: x.len() });
        }
        Ok(())
    }

    /// Deterministic latent mean of `x`.
    pub fn latent_mean(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.encoder.forward(x);
        out.truncate(self.latent_dim);
        out
    }

    pub fn decode(&self, z: &[f64]) -> Vec<f64> {
        self.decoder.forward(z)
    }

    pub fn score_latent(&self, z: &[f64]) -> f64 {
        self.scorer.forward(z)[0]
    }

    fn pass<R: Rng + ?Sized>(&self, x: &[f64], latent: Latent<'_, R>) -> Pass {
        let dz = self.latent_dim;
        let mut enc = Trace::default();
        self.encoder.forward_trace(x, &mut enc);
        let out = enc.output();
        let mu = out[..dz].to_vec();
        let raw = &out[dz..];
        let log_sigma: Vec<f64> = raw.iter().map(|v| v.clamp(LOG_SIGMA_MIN, LOG_SIGMA_MAX)).collect();
        let unclamped = raw.iter().map(|v| (LOG_SIGMA_MIN..=LOG_SIGMA_MAX).contains(v)).collect();
        let sigma: Vec<f64> = log_sigma.iter().map(|s| s.exp()).collect();
        let eps = match latent {
            Latent::Mean => vec![0.0; dz],
            Latent::Fixed(e) => e.to_vec(),
            Latent::Sample(rng) => (0..dz).map(|_| rng.sample(StandardNormal)).collect(),
        };
        let z: Vec<f64> = (0..dz).map(|i| mu[i] + sigma[i] * eps[i]).collect();
        let mut dec = Trace::default();
        self.decoder.forward_trace(&z, &mut dec);
        let mut sco = Trace::default();
        self.scorer.forward_trace(&z, &mut sco);
        Pass { enc, dec, sco, mu, log_sigma, unclamped, sigma, eps }
    }

    /// Full forward pass. `Latent::Mean` uses `z = mu`; otherwise
    /// `z = mu + sigma * eps` (reparameterisation).
    pub fn forward<R: Rng + ?Sized>(&self, x: &[f64], latent: Latent<'_, R>) -> Result<VaeOutput> {
        self.check_input(x)?;
        let p = self.pass(x, latent);
        Ok(VaeOutput {
            reconstruction: p.dec.output().to_vec(),
            score: p.sco.output()[0],
            mu: p.mu,
            sigma: p.sigma,
        })
    }

    /// Loss of one sample; accumulates its gradient into `grads` when given.
    ///
    /// `||x - x'||^2 + w_s (y - y')^2 + w_kl KL(N(mu, sigma^2) || N(0, I))`.
    fn sample_loss<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        y: f64,
        weights: LossWeights,
        latent: Latent<'_, R>,
        grads: Option<&mut VaeSurrogate>,
    ) -> f64 {
        let p = self.pass(x, latent);
        let recon = p.dec.output();
        let sse: f64 = recon.iter().zip(x).map(|(r, t)| (r - t) * (r - t)).sum();
        let pred = p.sco.output()[0];
        let kl: f64 = (0..self.latent_dim)
            .map(|i| 0.5 * (p.mu[i] * p.mu[i] + p.sigma[i] * p.sigma[i] - 1.0 - 2.0 * p.log_sigma[i]))
            .sum();
        let loss = weights.reconstruction * sse + weights.score * (y - pred).powi(2) + weights.kl * kl;

        if let Some(g) = grads {
            let d_recon: Vec<f64> =
                recon.iter().zip(x).map(|(r, t)| weights.reconstruction * 2.0 * (r - t)).collect();
            let dz_dec = self.decoder.backward(&p.dec, &d_recon, &mut g.decoder);
            let dz_sco = self.scorer.backward(&p.sco, &[weights.score * 2.0 * (pred - y)], &mut g.scorer);
            let dz = self.latent_dim;
            let mut d_enc = vec![0.0; 2 * dz];
            for i in 0..dz {
                let dzi = dz_dec[i] + dz_sco[i];
                d_enc[i] = dzi + weights.kl * p.mu[i];
                let d_sigma = dzi * p.eps[i] + weights.kl * (p.sigma[i] - 1.0 / p.sigma[i]);
                d_enc[dz + i] = if p.unclamped[i] { d_sigma * p.sigma[i] } else { 0.0 };
            }
            self.encoder.backward(&p.enc, &d_enc, &mut g.encoder);
        }
        loss
    }

    /// Summed loss over `batch`. `noise[i]` is the latent noise of sample `i`;
    /// `None` uses the latent mean.
    pub fn loss(&self, batch: &[(Vec<f64>, f64)], weights: LossWeights, noise: Option<&[Vec<f64>]>) -> f64 {
        batch
            .iter()
            .enumerate()
            .map(|(i, (x, y))| {
                let latent = match noise {
                    Some(n) => Latent::Fixed(&n[i]),
                    None => Latent::<crate::rng::Rng>::Mean,
                };
                self.sample_loss(x, *y, weights, latent, None)
            })
            .sum()
    }

    /// Summed loss with fresh noise drawn from `rng`.
    pub fn loss_sampled<R: Rng + ?Sized>(&self, batch: &[(Vec<f64>, f64)], weights: LossWeights, rng: &mut R) -> f64 {
        batch.iter().map(|(x, y)| self.sample_loss(x, *y, weights, Latent::Sample(&mut *rng), None)).sum()
    }

    /// Exact gradient of [`VaeSurrogate::loss`] with fixed noise, flattened in
    /// [`VaeSurrogate::params_flat`] order.
    pub fn gradient(&self, batch: &[(Vec<f64>, f64)], weights: LossWeights, noise: &[Vec<f64>]) -> Vec<f64> {
        let mut g = self.zeros_like();
        for (i, (x, y)) in batch.iter().enumerate() {
            self.sample_loss(x, *y, weights, Latent::<crate::rng::Rng>::Fixed(&noise[i]), Some(&mut g));
        }
        g.params_flat()
    }

    /// Loss and gradient with noise drawn from `rng`; gradient accumulated into `grads`.
    pub(crate) fn accumulate<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        y: f64,
        weights: LossWeights,
        rng: &mut R,
        grads: &mut VaeSurrogate,
    ) -> f64 {
        self.sample_loss(x, y, weights, Latent::Sample(rng), Some(grads))
    }

    /// Predicted (normalised) objective for each solution, using `z = mu`.
    pub fn predict_scores(&self, xs: &[Solution]) -> Result<Vec<f64>> {
        xs.iter()
            .map(|x| {
                let v = x.to_f64();
                self.check_input(&v)?;
                Ok(self.score_latent(&self.latent_mean(&v)))
            })
            .collect()
    }

    /// Fine-tuning loss: `||x_out - D(mu(x_in))||^2` summed over the pairs.
    pub fn transfer_loss(&self, pairs: &[(Solution, Solution)]) -> f64 {
        pairs
            .iter()
            .map(|(xin, xout)| {
                let r = self.decode(&self.latent_mean(&xin.to_f64()));
                r.iter().zip(xout.bits()).map(|(r, &t)| (r - t as f64).powi(2)).sum::<f64>()
            })
            .sum()
    }

    /// Gradient of [`VaeSurrogate::transfer_loss`] with respect to the decoder
    /// parameters only.
    pub fn transfer_gradient(&self, pairs: &[(Solution, Solution)]) -> Vec<f64> {
        let mut g = self.decoder.zeros_like();
        let mut trace = Trace::default();
        for (xin, xout) in pairs {
            let z = self.latent_mean(&xin.to_f64());
            self.decoder.forward_trace(&z, &mut trace);
            let r = trace.output();
            let dr: Vec<f64> = r.iter().zip(xout.bits()).map(|(r, &t)| 2.0 * (r - t as f64)).collect();
            self.decoder.backward(&trace, &dr, &mut g);
        }
        g.flatten()
    }
}
