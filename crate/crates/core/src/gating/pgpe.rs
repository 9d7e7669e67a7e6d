use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{par, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PgpeConfig {
    pub sigma_init: f64,
    pub alpha_mu: f64,
    pub alpha_sigma: f64,
    pub sigma_limit: f64,
    /// Samples per iteration before mirroring; `2 * half_population` are evaluated.
    pub half_population: usize,
    pub max_iter: usize,
    /// Starting mean, one value broadcast to every coordinate.
    pub mu_init: f64,
}

impl Default for PgpeConfig {
    fn default() -> Self {
        PgpeConfig {
            sigma_init: 0.1,
            alpha_mu: 0.01,
            alpha_sigma: 0.2,
            sigma_limit: 0.01,
            half_population: 16,
            max_iter: 100,
            mu_init: 0.0,
        }
    }
}

impl PgpeConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.sigma_init, self.alpha_mu, self.alpha_sigma, self.sigma_limit];
        if positive.iter().all(|v| *v > 0.0 && v.is_finite())
            && self.sigma_limit <= self.sigma_init
            && self.half_population > 0
        {
            Ok(())
        } else {
            Err(Error::invalid("PGPE config out of range"))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PgpeResult {
    pub best: Vec<f64>,
    pub best_value: f64,
    /// Incumbent value after each iteration.
    pub history: Vec<f64>,
    /// Smallest sigma coordinate after each iteration.
    pub sigma_min: Vec<f64>,
}

/// Mirrored sample of `w` about `mu`.
pub fn mirror(mu: &[f64], w: &[f64]) -> Vec<f64> {
    mu.iter().zip(w).map(|(m, x)| 2.0 * m - x).collect()
}

/// Maximises `objective` with symmetric-sampling PGPE.
///
/// Each iteration draws `N` perturbations `eps_i ~ N(0, sigma^2)`, evaluates
/// `mu + eps_i`, `mu - eps_i` and `mu`, keeps the best point seen so far, and
/// applies `mu += a_mu * sum_i eps_i (f+_i - f-_i)` and
/// `sigma += a_sigma * sum_i (eps_i^2 - sigma^2) / sigma * ((f+_i + f-_i)/2 - f(mu))`,
/// with sigma floored at `sigma_limit`. Candidates are evaluated in parallel.
pub fn pgpe_optimize<F, R>(objective: F, dim: usize, config: &PgpeConfig, rng: &mut R) -> Result<PgpeResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync + Send,
    R: Rng + ?Sized,
{
    config.validate()?;
    if dim == 0 {
        return Err(Error::invalid("PGPE needs at least one dimension"));
    }
    let eval = |w: &[f64]| -> Result<f64> {
        let v = objective(w)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite)
        }
    };
    let n = config.half_population;
    let mut mu = vec![config.mu_init; dim];
    let mut sigma = vec![config.sigma_init; dim];
    let mut best = mu.clone();
    let mut best_value = eval(&mu)?;
    let mut history = Vec::with_capacity(config.max_iter);
    let mut sigma_min = Vec::with_capacity(config.max_iter);
    let std = Normal::new(0.0, 1.0).expect("unit normal");

    for _ in 0..config.max_iter {
        let eps: Vec<Vec<f64>> =
            (0..n).map(|_| sigma.iter().map(|s| s * std.sample(rng)).collect()).collect();
        let mut points: Vec<Vec<f64>> = eps.iter().map(|e| mu.iter().zip(e).map(|(m, e)| m + e).collect()).collect();
        let mirrored: Vec<Vec<f64>> = points.iter().map(|w| mirror(&mu, w)).collect();
        points.extend(mirrored);
        points.push(mu.clone());
        let values = par::map(&points, |w| eval(w)).into_iter().collect::<Result<Vec<f64>>>()?;

        // first maximum wins ties, in the order samples, mirrors, mean
        let (star, &f_star) = values
            .iter()
            .enumerate()
            .fold(None, |acc: Option<(usize, &f64)>, (i, v)| match acc {
                Some((_, b)) if *b >= *v => acc,
                _ => Some((i, v)),
            })
            .expect("at least one candidate");
        if f_star > best_value {
            best_value = f_star;
            best = points[star].clone();
        }

        let f_b = values[2 * n];
        let mut d_mu = vec![0.0; dim];
        let mut d_sigma = vec![0.0; dim];
        for i in 0..n {
            let f_m = values[i] - values[n + i];
            let f_s = (values[i] + values[n + i]) / 2.0 - f_b;
            for j in 0..dim {
                d_mu[j] += eps[i][j] * f_m;
                d_sigma[j] += (eps[i][j] * eps[i][j] - sigma[j] * sigma[j]) / sigma[j] * f_s;
            }
        }
        for j in 0..dim {
            mu[j] += config.alpha_mu * d_mu[j];
            sigma[j] = (sigma[j] + config.alpha_sigma * d_sigma[j]).max(config.sigma_limit);
        }
        history.push(best_value);
        sigma_min.push(sigma.iter().copied().fold(f64::INFINITY, f64::min));
    }
    Ok(PgpeResult { best, best_value, history, sigma_min })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn mirror_about_mean() {
        assert_eq!(mirror(&[0.0, 0.0], &[0.1, -0.2]), vec![-0.1, 0.2]);
        let mu = [0.3, -1.0];
        let w = [0.7, 2.5];
        let m = mirror(&mu, &w);
        for j in 0..2 {
            assert_eq!((w[j] + m[j]) / 2.0, mu[j]);
        }
    }

    #[test]
    fn incumbent_and_sigma_floor() {
        let cfg = PgpeConfig { max_iter: 50, half_population: 4, ..Default::default() };
        let out = pgpe_optimize(|w| Ok(-w.iter().map(|x| (x - 0.5).powi(2)).sum::<f64>()), 3, &cfg, &mut rng::seeded(1))
            .unwrap();
        assert!(out.history.windows(2).all(|w| w[0] <= w[1]));
        assert!(out.sigma_min.iter().all(|&s| s >= cfg.sigma_limit));
        assert_eq!(out.best_value, *out.history.last().unwrap());
    }

    #[test]
    fn non_finite_objective_is_an_error() {
        let cfg = PgpeConfig { max_iter: 3, ..Default::default() };
        assert!(matches!(pgpe_optimize(|_| Ok(f64::NAN), 2, &cfg, &mut rng::seeded(0)), Err(Error::NonFinite)));
    }
}
