use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{compute_features, pgpe_optimize, select_topk, GatingModel, PgpeConfig, PgpeResult};
use crate::problems::{EvaluatedSample, Instance, Objective, Solution};
use crate::repository::{collect_experience, ExperienceRepository};
use crate::transfer::{experience_candidates, MpiConfig};
use crate::{par, rng, Error, Result};

/// Per-instance aggregate of the normalised objectives of generated candidates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    #[default]
    Max,
    Mean,
    MaxDiv,
    MeanDiv,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "max" => Ok(Variant::Max),
            "mean" => Ok(Variant::Mean),
            "max-div" | "maxdiv" => Ok(Variant::MaxDiv),
            "mean-div" | "meandiv" => Ok(Variant::MeanDiv),
            other => Err(Error::invalid(format!("unknown gating variant `{other}`"))),
        }
    }
}

/// `(f - f_min) / (f_max - f_min)`, or 0 when the bounds coincide.
pub fn normalize_objective(f: f64, f_min: f64, f_max: f64) -> f64 {
    if f_max > f_min {
        (f - f_min) / (f_max - f_min)
    } else {
        0.0
    }
}

/// Mean pairwise L1 distance over all ordered pairs (self-pairs included),
/// divided by the dimension.
pub fn diversity(xs: &[&Solution]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let d = xs[0].len().max(1) as f64;
    let total: usize = xs.iter().map(|a| xs.iter().map(|b| a.hamming(b)).sum::<usize>()).sum();
    total as f64 / (xs.len() as f64 * xs.len() as f64 * d)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatingTrainingConfig {
    pub variant: Variant,
    pub pgpe: PgpeConfig,
    /// Pipeline settings used inside the objective (the training profile).
    pub mpi: MpiConfig,
    /// Random samples per training instance used to estimate `f_min`/`f_max`.
    pub normalization_samples: usize,
    /// Precompute every (instance, record) candidate set once.
    pub cache: bool,
    pub seed: u64,
}

impl Default for GatingTrainingConfig {
    fn default() -> Self {
        GatingTrainingConfig {
            variant: Variant::Max,
            pgpe: PgpeConfig::default(),
            mpi: MpiConfig::default(),
            normalization_samples: 100_000,
            cache: true,
            seed: 0,
        }
    }
}

struct Prepared {
    probe: Vec<EvaluatedSample>,
    features: Vec<f64>,
    f_min: f64,
    f_max: f64,
    base_seed: u64,
}

/// Candidate set of one record for one training instance, already evaluated.
#[derive(Clone, Debug)]
struct Generated {
    solutions: Vec<Solution>,
    normalized: Vec<f64>,
}

/// Evaluates gating weights on a fixed set of training instances.
///
/// Probes, features and normalisation bounds are drawn once per instance.
/// Since each record's candidates are a function of (instance, record) only,
/// they can be generated once and reused for every weight vector; the cached
/// and uncached objectives agree exactly.
pub struct GatingTrainer<'a> {
    repo: &'a ExperienceRepository,
    instances: &'a [Instance],
    config: GatingTrainingConfig,
    prepared: Vec<Prepared>,
    cache: Option<Vec<Vec<Generated>>>,
}

impl<'a> GatingTrainer<'a> {
    pub fn new(repo: &'a ExperienceRepository, instances: &'a [Instance], config: GatingTrainingConfig) -> Result<Self> {
        if instances.is_empty() {
            return Err(Error::invalid("gating training needs at least one instance"));
        }
        if config.mpi.k > repo.len() {
            return Err(Error::invalid(format!("k = {} exceeds repository size {}", config.mpi.k, repo.len())));
        }
        config.mpi.validate()?;
        let prepared = par::map_range(instances.len(), |s| -> Result<Prepared> {
            let inst = &instances[s];
            let key = |tag: &[u8]| rng::derive_seed(&[b"gating", tag, &config.seed.to_le_bytes(), &(s as u64).to_le_bytes()]);
            let mut r = rng::seeded(key(b"probe"));
            let probe = collect_experience(inst, config.mpi.e.max(2), &mut r)?;
            let base_seed = r.random();
            let features = compute_features(repo, &probe)?;
            let bounds = collect_experience(inst, config.normalization_samples.max(1), &mut rng::seeded(key(b"bounds")))?;
            let f_min = bounds.iter().map(|b| b.objective).fold(f64::INFINITY, f64::min);
            let f_max = bounds.iter().map(|b| b.objective).fold(f64::NEG_INFINITY, f64::max);
            Ok(Prepared { probe, features, f_min, f_max, base_seed })
        });
        let prepared = prepared.into_iter().collect::<Result<_>>()?;
        let mut trainer = GatingTrainer { repo, instances, config, prepared, cache: None };
        if trainer.config.cache {
            trainer.build_cache()?;
        }
        Ok(trainer)
    }

    fn generate(&self, s: usize, i: usize) -> Result<Generated> {
        let inst = &self.instances[s];
        let p = &self.prepared[s];
        let cands = experience_candidates(&self.repo.records[i], i, &p.probe, inst.dim, p.base_seed, &self.config.mpi)?;
        let mut solutions = Vec::with_capacity(cands.len());
        let mut normalized = Vec::with_capacity(cands.len());
        for x in cands {
            let x = inst.repair(&x);
            normalized.push(normalize_objective(inst.evaluate(&x)?, p.f_min, p.f_max));
            solutions.push(x);
        }
        Ok(Generated { solutions, normalized })
    }

    fn build_cache(&mut self) -> Result<()> {
        let n = self.repo.len();
        let cells = par::map_range(self.instances.len() * n, |c| self.generate(c / n, c % n));
        let mut table: Vec<Vec<Generated>> = Vec::with_capacity(self.instances.len());
        let mut cells = cells.into_iter();
        for _ in 0..self.instances.len() {
            table.push(cells.by_ref().take(n).collect::<Result<_>>()?);
        }
        self.cache = Some(table);
        Ok(())
    }

    fn aggregate(&self, sets: &[&Generated]) -> f64 {
        let values: Vec<f64> = sets.iter().flat_map(|g| g.normalized.iter().copied()).collect();
        if values.is_empty() {
            return 0.0;
        }
        let base = match self.config.variant {
            Variant::Max | Variant::MaxDiv => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Variant::Mean | Variant::MeanDiv => values.iter().sum::<f64>() / values.len() as f64,
        };
        match self.config.variant {
            Variant::MaxDiv | Variant::MeanDiv => {
                let xs: Vec<&Solution> = sets.iter().flat_map(|g| g.solutions.iter()).collect();
                base + diversity(&xs)
            }
            _ => base,
        }
    }

    fn selection(&self, model: &GatingModel, s: usize) -> Result<Vec<usize>> {
        select_topk(&model.scores(&self.prepared[s].features)?, self.config.mpi.k)
    }

    /// Objective of `weights`, running the transfer step for every selection.
    pub fn objective_uncached(&self, weights: &[f64]) -> Result<f64> {
        let model = GatingModel::from_flat(self.repo.len(), weights)?;
        let per = par::map_range(self.instances.len(), |s| -> Result<f64> {
            let sets = self.selection(&model, s)?.into_iter().map(|i| self.generate(s, i)).collect::<Result<Vec<_>>>()?;
            Ok(self.aggregate(&sets.iter().collect::<Vec<_>>()))
        });
        per.into_iter().sum()
    }

    /// Objective of `weights`, from the candidate cache when it was built.
    pub fn objective(&self, weights: &[f64]) -> Result<f64> {
        let Some(table) = &self.cache else {
            return self.objective_uncached(weights);
        };
        let model = GatingModel::from_flat(self.repo.len(), weights)?;
        let mut total = 0.0;
        for (s, row) in table.iter().enumerate() {
            let sets: Vec<&Generated> = self.selection(&model, s)?.into_iter().map(|i| &row[i]).collect();
            total += self.aggregate(&sets);
        }
        Ok(total)
    }

    pub fn dim(&self) -> usize {
        GatingModel::param_count(self.repo.len())
    }

    /// Runs PGPE over the flattened gating weights.
    pub fn train(&self) -> Result<(GatingModel, PgpeResult)> {
        let mut r = rng::seeded(rng::derive_seed(&[b"pgpe", &self.config.seed.to_le_bytes()]));
        let result = pgpe_optimize(|w| self.objective(w), self.dim(), &self.config.pgpe, &mut r)?;
        let mut model = GatingModel::from_flat(self.repo.len(), &result.best)?;
        model.repository = Some(self.repo.fingerprint());
        Ok((model, result))
    }
}

pub fn train_gating(
    repo: &ExperienceRepository,
    instances: &[Instance],
    config: &GatingTrainingConfig,
) -> Result<GatingModel> {
    Ok(GatingTrainer::new(repo, instances, config.clone())?.train()?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalisation_and_diversity() {
        assert_eq!(normalize_objective(6.0, 2.0, 10.0), 0.5);
        assert_eq!(normalize_objective(6.0, 2.0, 2.0), 0.0);
        let x = Solution::from_bitstring("1101001").unwrap();
        assert_eq!(diversity(&[&x, &x, &x]), 0.0);
        let c = x.complement();
        assert_eq!(diversity(&[&x, &c]), 0.5);
    }

    #[test]
    fn variant_names() {
        assert_eq!("max".parse::<Variant>().unwrap(), Variant::Max);
        assert_eq!("Mean-Div".parse::<Variant>().unwrap(), Variant::MeanDiv);
        assert_eq!(Variant::default(), Variant::Max);
        assert!("best".parse::<Variant>().is_err());
    }
}
