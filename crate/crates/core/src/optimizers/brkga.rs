use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ga::check_population;
use super::{best_of, BudgetMeter, RunOutcome};
use crate::problems::{EvaluatedSample, Objective, Solution};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BrkgaConfig {
    pub pop_size: usize,
    pub elites: usize,
    pub crossover_offspring: usize,
    pub mutants: usize,
    pub elite_bias: f64,
}

impl Default for BrkgaConfig {
    fn default() -> Self {
        BrkgaConfig { pop_size: 20, elites: 4, crossover_offspring: 14, mutants: 2, elite_bias: 0.7 }
    }
}

/// Keys used for a bit of an injected binary individual.
pub const KEY_ONE: f64 = 0.75;
pub const KEY_ZERO: f64 = 0.25;

pub fn decode_keys(keys: &[f64]) -> Solution {
    Solution::from_bits_unchecked(keys.iter().map(|&k| u8::from(k > 0.5)).collect())
}

pub fn lift_keys(x: &Solution) -> Vec<f64> {
    x.bits().iter().map(|&b| if b == 1 { KEY_ONE } else { KEY_ZERO }).collect()
}

struct Member {
    keys: Vec<f64>,
    sample: EvaluatedSample,
}

/// Biased random-key GA over `[0, 1]^d`, decoded by thresholding at 0.5.
pub fn brkga_run<R: Rng + ?Sized>(
    objective: &dyn Objective,
    init: Vec<EvaluatedSample>,
    meter: &BudgetMeter,
    config: &BrkgaConfig,
    rng: &mut R,
) -> Result<RunOutcome> {
    if config.elites + config.crossover_offspring + config.mutants != config.pop_size
        || config.elites == 0
        || config.elites >= config.pop_size
        || !(0.0..=1.0).contains(&config.elite_bias)
    {
        return Err(Error::invalid("BRKGA config: elites + crossover + mutants must equal pop_size"));
    }
    let d = objective.dim();
    check_population(&init, config.pop_size, d)?;
    let mut best = best_of(&init).cloned().expect("non-empty population");
    let mut pop: Vec<Member> = init.into_iter().map(|s| Member { keys: lift_keys(&s.solution), sample: s }).collect();
    let mut history = Vec::new();

    let sort = |pop: &mut Vec<Member>| pop.sort_by(|a, b| b.sample.objective.total_cmp(&a.sample.objective));
    sort(&mut pop);
    'run: while !meter.exhausted() {
        let mut next_keys = Vec::with_capacity(config.crossover_offspring + config.mutants);
        for _ in 0..config.crossover_offspring {
            let elite = &pop[rng.random_range(0..config.elites)].keys;
            let other = &pop[rng.random_range(config.elites..config.pop_size)].keys;
            next_keys.push(
                (0..d).map(|j| if rng.random::<f64>() < config.elite_bias { elite[j] } else { other[j] }).collect(),
            );
        }
        for _ in 0..config.mutants {
            next_keys.push((0..d).map(|_| rng.random::<f64>()).collect::<Vec<f64>>());
        }
        pop.truncate(config.elites);
        for keys in next_keys {
            if meter.exhausted() {
                break 'run;
            }
            let sample = meter.evaluate_repaired(objective, &decode_keys(&keys))?;
            if sample.objective > best.objective {
                best = sample.clone();
            }
            history.push(best.objective);
            pop.push(Member { keys, sample });
        }
        sort(&mut pop);
    }
    Ok(RunOutcome { best, history })
}
