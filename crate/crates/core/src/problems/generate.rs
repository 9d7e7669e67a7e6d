use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Beta, Distribution};

use super::{ContaminationParams, InfluenceParams, Instance, Interaction, Params, ProblemClass, Solution};
use crate::rng::{self, derive_seed};
use crate::{Error, Result};

/// Monte-Carlo paths per contamination instance.
pub const CONTAMINATION_SIMULATIONS: usize = 100;
/// Monte-Carlo worlds per influence instance.
pub const INFLUENCE_WORLDS: usize = 100;
/// Influence graphs have this many nodes per decision variable.
pub const INFLUENCE_NODES_PER_DIM: usize = 5;

/// Builds a random instance of `class`. Deterministic in `(class, dim, seed)`.
pub fn generate_instance(class: ProblemClass, dim: usize, seed: u64) -> Result<Instance> {
    if dim < 2 {
        return Err(Error::invalid(format!("dimension must be at least 2, got {dim}")));
    }
    let mut rng = rng::seeded(derive_seed(&[
        b"instance",
        &[class.code()],
        &(dim as u64).to_le_bytes(),
        &seed.to_le_bytes(),
    ]));
    let params = match class {
        ProblemClass::OneMax => Params::OneMax { reference: Solution::random(dim, &mut rng) },
        ProblemClass::Knapsack => knapsack(dim, &mut rng),
        ProblemClass::MaxCut => {
            if dim < 3 {
                return Err(Error::invalid("max-cut needs at least 3 nodes"));
            }
            max_cut(dim, &mut rng)
        }
        ProblemClass::Contamination => Params::Contamination(contamination(dim, &mut rng)),
        ProblemClass::Influence => {
            if dim < 3 {
                return Err(Error::invalid("influence maximisation needs dimension at least 3"));
            }
            Params::Influence(influence(dim, &mut rng))
        }
        ProblemClass::External => {
            return Err(Error::UnsupportedClass("EXTERNAL instances are declared, not generated".into()))
        }
    };
    Ok(Instance { class, dim, seed, params })
}

fn knapsack<R: Rng>(dim: usize, rng: &mut R) -> Params {
    let mut values: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    let mut weights: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    weights.sort_by(|a, b| b.total_cmp(a));
    let ratio = rng.random_range(0.2..=0.8);
    let capacity = ratio * weights.iter().sum::<f64>();
    Params::Knapsack { values, weights, capacity }
}

fn connected(adjacency: &[u8], d: usize) -> bool {
    let mut seen = vec![false; d];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for v in 0..d {
            if adjacency[u * d + v] == 1 && !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

fn max_cut<R: Rng>(d: usize, rng: &mut R) -> Params {
    let pairs: Vec<(usize, usize)> =
        (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect();
    let adjacency = loop {
        let density = rng.random_range(0.2..=0.4);
        let edges = (((density * (d * d) as f64).floor()) as usize).min(pairs.len());
        let mut adjacency = vec![0u8; d * d];
        for idx in sample(rng, pairs.len(), edges) {
            let (i, j) = pairs[idx];
            adjacency[i * d + j] = 1;
            adjacency[j * d + i] = 1;
        }
        if connected(&adjacency, d) {
            break adjacency;
        }
    };
    let share = rng.random_range(0.2..=0.4);
    let k = ((share * d as f64).floor() as usize).max(1);
    Params::MaxCut { adjacency, k }
}

fn contamination<R: Rng>(dim: usize, rng: &mut R) -> ContaminationParams {
    let t = CONTAMINATION_SIMULATIONS;
    let alpha_dist = Beta::new(1.0, 17.0 / 3.0).expect("valid beta");
    let gamma_dist = Beta::new(1.0, 7.0 / 3.0).expect("valid beta");
    let z0_dist = Beta::new(1.0, 30.0).expect("valid beta");
    let lambda = if rng.random_bool(0.5) { 0.0 } else { 1e-2 };
    let alpha = (0..t * dim).map(|_| alpha_dist.sample(rng)).collect();
    let gamma = (0..t * dim).map(|_| gamma_dist.sample(rng)).collect();
    let z0 = (0..t).map(|_| z0_dist.sample(rng)).collect();
    ContaminationParams {
        costs: vec![1.0; dim],
        lambda,
        rho: 1.0,
        threshold: 0.1,
        simulations: t,
        alpha,
        gamma,
        z0,
    }
}

fn influence<R: Rng>(dim: usize, rng: &mut R) -> InfluenceParams {
    let nodes = INFLUENCE_NODES_PER_DIM * dim;
    let edge_prob = rng.random_range(0.05..=0.15);
    let mut out: Vec<Vec<(u32, f64)>> = vec![Vec::new(); nodes];
    for u in 0..nodes {
        for v in u + 1..nodes {
            if rng.random_bool(edge_prob) {
                out[u].push((v as u32, rng.random_range(0.0..=0.2)));
                out[v].push((u as u32, rng.random_range(0.0..=0.2)));
            }
        }
    }
    let mut offsets = vec![0u32];
    let mut targets = Vec::new();
    let mut probs = Vec::new();
    for arcs in &mut out {
        arcs.sort_by_key(|&(v, _)| v);
        for &(v, p) in arcs.iter() {
            targets.push(v);
            probs.push(p);
        }
        offsets.push(targets.len() as u32);
    }

    let picked = sample(rng, nodes, nodes).into_vec();
    let candidates: Vec<u32> = picked[..dim].iter().map(|&v| v as u32).collect();
    let n_a = (0.05 * nodes as f64).ceil() as usize;
    let seeds_a: Vec<u32> = picked[dim..dim + n_a].iter().map(|&v| v as u32).collect();

    let k_lo = (0.2 * dim as f64).ceil() as usize;
    let k_hi = ((0.6 * dim as f64).floor() as usize).max(k_lo);
    let k = rng.random_range(k_lo..=k_hi);
    let q = if rng.random_bool(0.5) { Interaction::COMPLEMENTARY } else { Interaction::COMPETITIVE };
    let world_seeds = (0..INFLUENCE_WORLDS).map(|_| rng.random()).collect();
    InfluenceParams { nodes, offsets, targets, probs, seeds_a, candidates, k, q, world_seeds, worlds: Default::default() }
}
