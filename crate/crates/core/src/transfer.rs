//! Online stage: probe a new instance, select experiences with the gating
//! network, fine-tune their decoders towards the new instance, generate
//! candidates, interpolate, and assemble the initial population.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::gating::{compute_features, select_topk, GatingModel};
use crate::neural::{finetune_decoder, FinetuneConfig, VaeSurrogate};
use crate::optimizers::BudgetMeter;
use crate::problems::{EvaluatedSample, Objective, Solution};
use crate::repository::{ExperienceRecord, ExperienceRepository};
use crate::{par, rng, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MpiConfig {
    /// Probe solutions.
    pub e: usize,
    /// Selected experiences.
    pub k: usize,
    /// Candidates generated per experience.
    pub q: usize,
    /// Interpolated children.
    pub q_m: usize,
    /// Population size.
    pub p: usize,
    /// Uniform decoder-input draws per experience.
    pub candidate_sample_count: usize,
    pub elite_fraction: f64,
    /// Source samples drawn per experience, as a multiple of `e`.
    pub source_factor: usize,
    pub finetune: FinetuneConfig,
}

impl Default for MpiConfig {
    fn default() -> Self {
        MpiConfig {
            e: 64,
            k: 12,
            q: 4,
            q_m: 20,
            p: 20,
            candidate_sample_count: 100_000,
            elite_fraction: 0.1,
            source_factor: 4,
            finetune: FinetuneConfig::default(),
        }
    }
}

impl MpiConfig {
    /// FEs charged when no random padding is needed.
    pub fn planned_fes(&self) -> usize {
        self.e + self.k * self.q + self.q_m
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.q == 0 || self.candidate_sample_count < self.q || self.source_factor == 0 {
            return Err(Error::invalid("MPI config: p, q and sample counts must be positive"));
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction < 1.0) {
            return Err(Error::invalid("MPI config: elite fraction must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Probe,
    Generated,
    Interpolated,
    Random,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Probe => "probe",
            Provenance::Generated => "generated",
            Provenance::Interpolated => "interpolated",
            Provenance::Random => "random",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitResult {
    /// Sorted by descending objective.
    pub population: Vec<EvaluatedSample>,
    pub provenance: Vec<Provenance>,
    pub fes_consumed: usize,
    /// Repository indices of the experiences used, in selection order.
    pub selected: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    /// Experiences chosen uniformly at random instead of by the gating network.
    NoGating,
    /// Generated candidates replaced by random evaluated solutions.
    NoTransfer,
    /// No interpolated children.
    NoInterpolation,
}

/// `e` uniform random solutions, repaired and charged one FE each.
pub fn probe<R: Rng + ?Sized>(
    objective: &dyn Objective,
    e: usize,
    meter: &BudgetMeter,
    rng: &mut R,
) -> Result<Vec<EvaluatedSample>> {
    if meter.remaining() < e {
        return Err(Error::BudgetExhausted { used: meter.used(), limit: meter.limit() });
    }
    crate::optimizers::init_rand(objective, e, meter, rng)
}

/// Splits indices of `y` into `e_l` buckets of descending objective, as evenly
/// as possible, never separating equal values.
///
/// Equal values form groups, visited from best to worst. A group opens the
/// next bucket when the remaining groups are just enough to fill the
/// remaining buckets, or when the current bucket has reached its share of
/// `|y| / e_l` within two thirds of the group's size.
pub fn partition_by_fitness(y: &[f64], e_l: usize) -> Result<Vec<Vec<usize>>> {
    let mut groups: BTreeMap<OrdF64, Vec<usize>> = BTreeMap::new();
    for (i, &v) in y.iter().enumerate() {
        groups.entry(OrdF64(v)).or_default().push(i);
    }
    let groups: Vec<Vec<usize>> = groups.into_values().rev().collect();
    if e_l == 0 || e_l > groups.len() {
        return Err(Error::invalid(format!("cannot split {} distinct values into {e_l} buckets", groups.len())));
    }
    let total = y.len() as f64;
    let f = groups.len();
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); e_l];
    let (mut i, mut m) = (1usize, 0usize);
    for (j0, group) in groups.into_iter().enumerate() {
        let j = j0 + 1;
        let c1 = f - j < e_l - i && i < e_l;
        let c2 = total * i as f64 / e_l as f64 - m as f64 <= 2.0 * group.len() as f64 / 3.0 && i < e_l;
        if !buckets[i - 1].is_empty() && (c1 || c2) {
            i = (i + 1).min(e_l);
        }
        m += group.len();
        buckets[i - 1].extend(group);
    }
    Ok(buckets)
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn distinct_values(y: impl Iterator<Item = f64>) -> usize {
    y.map(f64::to_bits).collect::<HashSet<_>>().len()
}

/// Rank-aligned fine-tuning pairs: `source_count` samples of the record's
/// dataset (all of it if smaller) and the probe are bucketed by objective into
/// the same number of buckets, and corresponding buckets are crossed.
pub fn build_finetune_pairs<R: Rng + ?Sized>(
    record: &ExperienceRecord,
    probe: &[EvaluatedSample],
    source_count: usize,
    rng: &mut R,
) -> Result<Vec<(Solution, Solution)>> {
    if probe.is_empty() || record.dataset.is_empty() {
        return Err(Error::invalid("fine-tuning pairs need solutions on both sides"));
    }
    let picked: Vec<&EvaluatedSample> = if record.dataset.len() <= source_count {
        record.dataset.iter().collect()
    } else {
        let mut idx = sample(rng, record.dataset.len(), source_count).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| &record.dataset[i]).collect()
    };
    let ys: Vec<f64> = picked.iter().map(|s| s.objective).collect();
    let yt: Vec<f64> = probe.iter().map(|s| s.objective).collect();
    let e_l = distinct_values(ys.iter().copied()).min(distinct_values(yt.iter().copied()));
    let src = partition_by_fitness(&ys, e_l)?;
    let tgt = partition_by_fitness(&yt, e_l)?;
    let mut pairs = Vec::new();
    for (bs, bt) in src.iter().zip(&tgt) {
        for &a in bs {
            for &b in bt {
                pairs.push((picked[a].solution.clone(), probe[b].solution.clone()));
            }
        }
    }
    Ok(pairs)
}

/// Top-`q` distinct binarised reconstructions of `sample_count` uniform inputs,
/// ranked by predicted score (latent mean). Shortfalls are padded with random
/// solutions, which come last.
pub fn generate_candidates<R: Rng + ?Sized>(
    surrogate: &VaeSurrogate,
    q: usize,
    sample_count: usize,
    rng: &mut R,
) -> Vec<Solution> {
    let d_in = surrogate.input_dim();
    let inputs: Vec<Solution> = (0..sample_count).map(|_| Solution::random(d_in, rng)).collect();
    let latents: Vec<(f64, Vec<f64>)> = par::flat_map_chunks(&inputs, 1024, |chunk| {
        chunk
            .iter()
            .map(|x| {
                let z = surrogate.latent_mean(&x.to_f64());
                (surrogate.score_latent(&z), z)
            })
            .collect()
    });
    let mut order: Vec<usize> = (0..latents.len()).collect();
    order.sort_by(|&a, &b| latents[b].0.total_cmp(&latents[a].0).then(a.cmp(&b)));
    let mut out: Vec<Solution> = Vec::with_capacity(q);
    let mut seen = HashSet::new();
    for i in order {
        if out.len() == q {
            break;
        }
        let bits = surrogate.decode(&latents[i].1).iter().map(|&p| u8::from(p > 0.5)).collect();
        let x = Solution::from_bits_unchecked(bits);
        if seen.insert(x.clone()) {
            out.push(x);
        }
    }
    let d_out = surrogate.output_dim();
    while out.len() < q {
        let x = Solution::random(d_out, rng);
        if seen.insert(x.clone()) || (1usize << d_out.min(20)) <= seen.len() {
            out.push(x);
        }
    }
    out
}

/// `q_m` children of two elite and two mediocre parents each. Bits on which
/// all four parents agree are copied; the others are 1 with probability equal
/// to the parents' mean. Children are repaired and charged.
pub fn interpolate_children<R: Rng + ?Sized>(
    pool: &[EvaluatedSample],
    q_m: usize,
    elite_fraction: f64,
    objective: &dyn Objective,
    meter: &BudgetMeter,
    rng: &mut R,
) -> Result<Vec<EvaluatedSample>> {
    if q_m == 0 {
        return Ok(Vec::new());
    }
    let mut sorted: Vec<&EvaluatedSample> = pool.iter().collect();
    sorted.sort_by(|a, b| b.objective.total_cmp(&a.objective));
    let n_elite = ((elite_fraction * sorted.len() as f64).floor() as usize).max(1);
    if sorted.len() < n_elite + 2 {
        return Err(Error::invalid("interpolation needs one elite and two mediocre solutions"));
    }
    if meter.remaining() < q_m {
        return Err(Error::BudgetExhausted { used: meter.used(), limit: meter.limit() });
    }
    let (elite, mediocre) = sorted.split_at(n_elite);
    let pick = |pool: &[&EvaluatedSample], rng: &mut R| -> [Solution; 2] {
        if pool.len() == 1 {
            return [pool[0].solution.clone(), pool[0].solution.clone()];
        }
        let idx = sample(rng, pool.len(), 2);
        [pool[idx.index(0)].solution.clone(), pool[idx.index(1)].solution.clone()]
    };
    let d = objective.dim();
    let mut out = Vec::with_capacity(q_m);
    for _ in 0..q_m {
        let [e1, e2] = pick(elite, rng);
        let [m1, m2] = pick(mediocre, rng);
        let parents = [&e1, &e2, &m1, &m2];
        let bits = (0..d)
            .map(|j| {
                let ones: u8 = parents.iter().map(|p| p.bits()[j]).sum();
                match ones {
                    0 => 0,
                    4 => 1,
                    _ => u8::from(rng.random::<f64>() < ones as f64 / 4.0),
                }
            })
            .collect();
        out.push(meter.evaluate_repaired(objective, &Solution::from_bits_unchecked(bits))?);
    }
    Ok(out)
}

/// `pool` plus `q_m` interpolated children, sorted by descending objective.
pub fn interpolate<R: Rng + ?Sized>(
    pool: &[EvaluatedSample],
    q_m: usize,
    elite_fraction: f64,
    objective: &dyn Objective,
    meter: &BudgetMeter,
    rng: &mut R,
) -> Result<Vec<EvaluatedSample>> {
    let children = interpolate_children(pool, q_m, elite_fraction, objective, meter, rng)?;
    let mut all: Vec<EvaluatedSample> = pool.iter().cloned().chain(children).collect();
    all.sort_by(|a, b| b.objective.total_cmp(&a.objective));
    Ok(all)
}

/// Unevaluated candidates produced by record `index` for the probed instance.
///
/// Each record draws from its own stream of `base_seed`, so the result does not
/// depend on which other records were selected or on thread scheduling.
pub fn experience_candidates(
    record: &ExperienceRecord,
    index: usize,
    probe: &[EvaluatedSample],
    target_dim: usize,
    base_seed: u64,
    config: &MpiConfig,
) -> Result<Vec<Solution>> {
    let mut r = rng::stream(base_seed, index as u64);
    let pairs = build_finetune_pairs(record, probe, config.source_factor * probe.len(), &mut r)?;
    let ft = FinetuneConfig { seed: r.random(), ..config.finetune.clone() };
    let tuned = finetune_decoder(&record.surrogate, &pairs, target_dim, &ft)
        .map_err(|e| Error::Training { id: record.id.clone(), source: Box::new(e) })?;
    Ok(generate_candidates(&tuned.surrogate, config.q, config.candidate_sample_count, &mut r))
}

/// Full pipeline with the learned gating network.
pub fn mpi_initialize<R: Rng + ?Sized>(
    objective: &dyn Objective,
    repo: &ExperienceRepository,
    gating: &GatingModel,
    config: &MpiConfig,
    meter: &BudgetMeter,
    rng: &mut R,
) -> Result<InitResult> {
    run_pipeline(objective, repo, Some(gating), None, config, meter, rng)
}

pub fn ablation_initialize<R: Rng + ?Sized>(
    variant: Ablation,
    objective: &dyn Objective,
    repo: &ExperienceRepository,
    gating: &GatingModel,
    config: &MpiConfig,
    meter: &BudgetMeter,
    rng: &mut R,
) -> Result<InitResult> {
    match variant {
        Ablation::NoGating => run_pipeline(objective, repo, None, None, config, meter, rng),
        Ablation::NoTransfer => run_pipeline(objective, repo, Some(gating), Some(variant), config, meter, rng),
        Ablation::NoInterpolation => {
            let cfg = MpiConfig { q_m: 0, ..config.clone() };
            run_pipeline(objective, repo, Some(gating), None, &cfg, meter, rng)
        }
    }
}

fn run_pipeline<R: Rng + ?Sized>(
    objective: &dyn Objective,
    repo: &ExperienceRepository,
    gating: Option<&GatingModel>,
    ablation: Option<Ablation>,
    config: &MpiConfig,
    meter: &BudgetMeter,
    rng: &mut R,
) -> Result<InitResult> {
    config.validate()?;
    if let Some(g) = gating {
        g.check(repo)?;
    }
    if config.k > repo.len() {
        return Err(Error::invalid(format!("k = {} exceeds repository size {}", config.k, repo.len())));
    }
    if meter.remaining() < config.planned_fes() {
        return Err(Error::BudgetExhausted { used: meter.used(), limit: meter.limit() });
    }
    let start = meter.used();
    let d = objective.dim();

    let probe_set = probe(objective, config.e, meter, rng)?;
    let selected = match gating {
        Some(g) => {
            let features = compute_features(repo, &probe_set)?;
            select_topk(&g.scores(&features)?, config.k)?
        }
        None => sample(rng, repo.len(), config.k).into_vec(),
    };

    let mut pool: Vec<EvaluatedSample> = probe_set.clone();
    let mut tags = vec![Provenance::Probe; pool.len()];
    if ablation == Some(Ablation::NoTransfer) {
        let random = crate::optimizers::init_rand(objective, config.k * config.q, meter, rng)?;
        tags.extend(std::iter::repeat_n(Provenance::Random, random.len()));
        pool.extend(random);
    } else {
        let base: u64 = rng.random();
        let candidates = par::map(&selected, |&i| {
            experience_candidates(&repo.records[i], i, &probe_set, d, base, config)
        });
        for cands in candidates {
            for x in cands? {
                pool.push(meter.evaluate_repaired(objective, &x)?);
                tags.push(Provenance::Generated);
            }
        }
    }
    let children = interpolate_children(&pool, config.q_m, config.elite_fraction, objective, meter, rng)?;
    tags.extend(std::iter::repeat_n(Provenance::Interpolated, children.len()));
    pool.extend(children);

    let mut seen = HashSet::new();
    let mut unique: Vec<(EvaluatedSample, Provenance)> = Vec::new();
    for (s, t) in pool.into_iter().zip(tags) {
        if seen.insert(s.solution.clone()) {
            unique.push((s, t));
        }
    }
    let mut guard = 0;
    while unique.len() < config.p {
        let s = meter.evaluate_repaired(objective, &Solution::random(d, rng))?;
        guard += 1;
        // tiny search spaces may not hold p distinct solutions
        if seen.insert(s.solution.clone()) || guard > 64 * config.p {
            unique.push((s, Provenance::Random));
        }
    }
    unique.sort_by(|a, b| b.0.objective.total_cmp(&a.0.objective));
    unique.truncate(config.p);
    let (population, provenance) = unique.into_iter().unzip();
    Ok(InitResult { population, provenance, fes_consumed: meter.used() - start, selected })
}
