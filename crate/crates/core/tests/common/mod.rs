#![allow(dead_code)]

use popinit::gating::{GatingModel, GatingTrainingConfig, PgpeConfig};
use popinit::neural::{FinetuneConfig, TrainConfig};
use popinit::problems::generate_instance;
use popinit::repository::{build_repository, ExperienceRepository, RepositoryConfig};
use popinit::transfer::MpiConfig;
use popinit::{Instance, ProblemClass, Solution};

pub fn instances(specs: &[(ProblemClass, usize)], seed: u64) -> Vec<Instance> {
    specs.iter().map(|&(c, d)| generate_instance(c, d, seed).unwrap()).collect()
}

/// Small repository that trains in a few seconds.
pub fn quick_repository(specs: &[(ProblemClass, usize)], samples: usize, epochs: usize, seed: u64) -> ExperienceRepository {
    let config = RepositoryConfig {
        samples_per_instance: samples,
        seed,
        train: TrainConfig { epochs, ..TrainConfig::default() },
    };
    build_repository(&instances(specs, seed), &config).unwrap()
}

/// Twelve records (the default k) on small OM/KP/MC instances.
pub fn twelve_record_repository() -> ExperienceRepository {
    let mut specs = Vec::new();
    for class in [ProblemClass::OneMax, ProblemClass::Knapsack, ProblemClass::MaxCut] {
        for d in [10, 12, 14, 16] {
            specs.push((class, d));
        }
    }
    quick_repository(&specs, 200, 20, 3)
}

/// Default FE settings with cheap candidate generation and fine-tuning.
pub fn light_mpi() -> MpiConfig {
    MpiConfig {
        candidate_sample_count: 500,
        finetune: FinetuneConfig { epochs: 10, ..FinetuneConfig::default() },
        ..MpiConfig::default()
    }
}

pub fn random_gating(repo: &ExperienceRepository, seed: u64) -> GatingModel {
    let mut g = GatingModel::random(repo.len(), &mut popinit::rng::seeded(seed));
    g.repository = Some(repo.fingerprint());
    g
}

pub fn small_gating_config(k: usize, iters: usize, seed: u64) -> GatingTrainingConfig {
    GatingTrainingConfig {
        pgpe: PgpeConfig { max_iter: iters, half_population: 4, ..PgpeConfig::default() },
        mpi: MpiConfig {
            e: 16,
            k,
            q: 2,
            q_m: 4,
            p: 8,
            candidate_sample_count: 200,
            finetune: FinetuneConfig { epochs: 5, ..FinetuneConfig::default() },
            ..MpiConfig::default()
        },
        normalization_samples: 500,
        seed,
        ..GatingTrainingConfig::default()
    }
}

pub fn all_solutions(d: usize) -> impl Iterator<Item = Solution> {
    (0..1u32 << d).map(move |m| Solution::new((0..d).map(|i| ((m >> i) & 1) as u8).collect()).unwrap())
}

/// Longest prefix of `x` whose selected weight fits, found by trying every cut point.
pub fn knapsack_projection(x: &Solution, weights: &[f64], capacity: f64) -> Solution {
    let d = x.len();
    (0..=d)
        .rev()
        .map(|cut| Solution::new((0..d).map(|i| if i < cut { x.bits()[i] } else { 0 }).collect()).unwrap())
        .find(|y| y.bits().iter().zip(weights).map(|(&b, w)| b as f64 * w).sum::<f64>() <= capacity)
        .expect("the empty prefix is always feasible")
}

/// Among all subsets of `x` with `min(k, |x|)` ones, the one with the smallest indices.
pub fn cardinality_projection(x: &Solution, k: usize) -> Solution {
    let d = x.len();
    let mask: u32 = (0..d).filter(|&i| x.bits()[i] == 1).map(|i| 1 << i).sum();
    let ones = (mask.count_ones() as usize).min(k);
    let indices = |m: u32| (0..d).filter(|&i| m >> i & 1 == 1).collect::<Vec<_>>();
    let mut best: Option<Vec<usize>> = None;
    let mut sub = mask;
    loop {
        if sub.count_ones() as usize == ones {
            let idx = indices(sub);
            if best.as_ref().is_none_or(|b| idx < *b) {
                best = Some(idx);
            }
        }
        if sub == 0 {
            break;
        }
        sub = (sub - 1) & mask;
    }
    let mut bits = vec![0u8; d];
    for i in best.unwrap() {
        bits[i] = 1;
    }
    Solution::new(bits).unwrap()
}
