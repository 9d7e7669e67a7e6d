//! Experience selection: correlation features between a probed instance and
//! every stored surrogate, the gating network that scores them, and its PGPE
//! training.

mod correlation;
mod pgpe;
mod train;

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use correlation::{average_ranks, kendall_tau, pearson, spearman};
pub use pgpe::{mirror, pgpe_optimize, PgpeConfig, PgpeResult};
pub use train::{diversity, normalize_objective, train_gating, GatingTrainer, GatingTrainingConfig, Variant};

use crate::neural::{decode_networks, encode_networks, Activation, Mlp};
use crate::problems::{EvaluatedSample, Solution};
use crate::repository::ExperienceRepository;
use crate::{par, Error, Result};

/// Truncates or zero-pads every solution to `dim` coordinates.
pub fn adapt_dims(xs: &[Solution], dim: usize) -> Vec<Solution> {
    xs.iter().map(|x| x.resized(dim)).collect()
}

/// Feature vector `pearson ++ spearman ++ kendall`, each with one entry per
/// record, between record `i`'s predicted scores on the probe and the probe's
/// true objectives.
pub fn compute_features(repo: &ExperienceRepository, probe: &[EvaluatedSample]) -> Result<Vec<f64>> {
    if probe.len() < 2 {
        return Err(Error::invalid("features need at least two probe solutions"));
    }
    let xs: Vec<Solution> = probe.iter().map(|s| s.solution.clone()).collect();
    let y: Vec<f64> = probe.iter().map(|s| s.objective).collect();
    let per_record = par::map(&repo.records, |r| -> Result<[f64; 3]> {
        let pred = r.surrogate.predict_scores(&adapt_dims(&xs, r.source_dim))?;
        Ok([pearson(&pred, &y), spearman(&pred, &y), kendall_tau(&pred, &y)])
    });
    let per_record = per_record.into_iter().collect::<Result<Vec<_>>>()?;
    let n = per_record.len();
    let mut out = vec![0.0; 3 * n];
    for (i, c) in per_record.iter().enumerate() {
        for (t, v) in c.iter().enumerate() {
            out[t * n + i] = *v;
        }
    }
    Ok(out)
}

/// Indices of the `k` largest scores in descending order; ties go to the lower index.
pub fn select_topk(scores: &[f64], k: usize) -> Result<Vec<usize>> {
    if k > scores.len() {
        return Err(Error::invalid(format!("cannot select {k} of {} experiences", scores.len())));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    Ok(idx)
}

/// Gating network: `3n -> 2n (relu) -> n (identity)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GatingModel {
    pub net: Mlp,
    pub n: usize,
    /// Fingerprint of the repository the weights were trained against.
    pub repository: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct GatingManifest {
    version: u32,
    n: usize,
    repository: Option<String>,
}

impl GatingModel {
    fn shape(n: usize) -> ([usize; 3], [Activation; 2]) {
        ([3 * n, 2 * n, n], [Activation::Relu, Activation::Identity])
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let (sizes, acts) = Self::shape(n);
        GatingModel { net: Mlp::new(&sizes, &acts, rng), n, repository: None }
    }

    pub fn param_count(n: usize) -> usize {
        3 * n * 2 * n + 2 * n + 2 * n * n + n
    }

    /// Network with parameters taken from `flat` (see [`Mlp::load_flat`]).
    pub fn from_flat(n: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != Self::param_count(n) {
            return Err(Error::DimensionMismatch { expected: Self::param_count(n), actual: flat.len() });
        }
        let (sizes, acts) = Self::shape(n);
        let mut net = Mlp::new(&sizes, &acts, &mut crate::rng::seeded(0));
        net.load_flat(flat);
        Ok(GatingModel { net, n, repository: None })
    }

    pub fn scores(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != 3 * self.n {
            return Err(Error::DimensionMismatch { expected: 3 * self.n, actual: features.len() });
        }
        Ok(self.net.forward(features))
    }

    /// Fails when the model was trained against a different repository.
    pub fn check(&self, repo: &ExperienceRepository) -> Result<()> {
        if self.n != repo.len() {
            return Err(Error::Fingerprint(format!("gating has {} outputs, repository {} records", self.n, repo.len())));
        }
        if let Some(fp) = &self.repository {
            if *fp != repo.fingerprint() {
                return Err(Error::Fingerprint("gating was trained against another repository".into()));
            }
        }
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let manifest = GatingManifest { version: 1, n: self.n, repository: self.repository.clone() };
        fs::write(dir.join("gating.weights"), encode_networks(&[&self.net]))?;
        fs::write(dir.join("manifest.toml"), toml::to_string(&manifest).expect("manifest serialises"))?;
        Ok(())
    }

    /// Loads a model and checks it against `repo`.
    pub fn load(dir: &Path, repo: &ExperienceRepository) -> Result<Self> {
        let text = fs::read_to_string(dir.join("manifest.toml"))?;
        let m: GatingManifest = toml::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
        if m.version != 1 {
            return Err(Error::VersionMismatch(format!("gating version {}", m.version)));
        }
        let mut nets = decode_networks(&fs::read(dir.join("gating.weights"))?)?;
        let (sizes, _) = Self::shape(m.n);
        let net = nets.pop().filter(|_| nets.is_empty()).ok_or_else(|| Error::corrupt("expected one network"))?;
        if net.input_dim() != sizes[0] || net.output_dim() != m.n {
            return Err(Error::corrupt("gating network shape does not match its manifest"));
        }
        let model = GatingModel { net, n: m.n, repository: m.repository };
        model.check(repo)?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adapt_truncates_and_pads() {
        let x = Solution::from_bitstring("10110").unwrap();
        assert_eq!(adapt_dims(std::slice::from_ref(&x), 3)[0].to_bitstring(), "101");
        assert_eq!(adapt_dims(&[Solution::from_bitstring("101").unwrap()], 5)[0].to_bitstring(), "10100");
        assert_eq!(adapt_dims(std::slice::from_ref(&x), 5)[0], x);
    }

    #[test]
    fn topk_order_and_ties() {
        assert_eq!(select_topk(&[0.3, 0.9, 0.1], 2).unwrap(), vec![1, 0]);
        assert_eq!(select_topk(&[0.5, 0.5], 1).unwrap(), vec![0]);
        assert_eq!(select_topk(&[0.2, 0.7, 0.4], 3).unwrap(), vec![1, 2, 0]);
        assert!(select_topk(&[0.2], 2).is_err());
    }

    #[test]
    fn flat_round_trip() {
        let g = GatingModel::random(4, &mut crate::rng::seeded(0));
        assert_eq!(g.net.param_count(), GatingModel::param_count(4));
        let back = GatingModel::from_flat(4, &g.net.flatten()).unwrap();
        assert_eq!(back.net, g.net);
        assert_eq!(g.scores(&[0.1; 12]).unwrap().len(), 4);
        assert!(g.scores(&[0.1; 11]).is_err());
    }
}
