use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{best_of, sort_desc, BudgetMeter, RunOutcome};
use crate::problems::{EvaluatedSample, Objective, Solution};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaEliteConfig {
    pub pop_size: usize,
    pub elites: usize,
    pub offspring: usize,
    pub mutation_rate: f64,
}

impl Default for GaEliteConfig {
    fn default() -> Self {
        GaEliteConfig { pop_size: 20, elites: 1, offspring: 20, mutation_rate: 0.001 }
    }
}

pub(crate) fn check_population(init: &[EvaluatedSample], pop_size: usize, dim: usize) -> Result<()> {
    if init.len() != pop_size {
        return Err(Error::DimensionMismatch { expected: pop_size, actual: init.len() });
    }
    if let Some(s) = init.iter().find(|s| s.solution.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, actual: s.solution.len() });
    }
    Ok(())
}

/// Single-point crossover: `a[..cut] ++ b[cut..]` with `cut` in `1..d`.
pub(crate) fn crossover<R: Rng + ?Sized>(a: &Solution, b: &Solution, rng: &mut R) -> Vec<u8> {
    let d = a.len();
    let cut = if d > 1 { rng.random_range(1..d) } else { 0 };
    a.bits()[..cut].iter().chain(&b.bits()[cut..]).copied().collect()
}

/// Generational GA with elitist survivor truncation.
///
/// Parents are uniform random pairs; the next population is the elites plus
/// the best offspring. The run stops the moment the meter is exhausted.
pub fn ga_elite_run<R: Rng + ?Sized>(
    objective: &dyn Objective,
    init: Vec<EvaluatedSample>,
    meter: &BudgetMeter,
    config: &GaEliteConfig,
    rng: &mut R,
) -> Result<RunOutcome> {
    if config.elites >= config.pop_size || config.offspring + config.elites < config.pop_size {
        return Err(Error::invalid("GA-Elite config: need elites < pop_size <= elites + offspring"));
    }
    check_population(&init, config.pop_size, objective.dim())?;
    let mut pop = init;
    sort_desc(&mut pop);
    let mut best = best_of(&pop).cloned().expect("non-empty population");
    let mut history = Vec::new();

    'run: while !meter.exhausted() {
        let mut children = Vec::with_capacity(config.offspring);
        for _ in 0..config.offspring {
            if meter.exhausted() {
                break 'run;
            }
            let a = &pop[rng.random_range(0..pop.len())].solution;
            let b = &pop[rng.random_range(0..pop.len())].solution;
            let mut bits = crossover(a, b, rng);
            for bit in bits.iter_mut() {
                if rng.random::<f64>() < config.mutation_rate {
                    *bit ^= 1;
                }
            }
            let child = meter.evaluate_repaired(objective, &Solution::from_bits_unchecked(bits))?;
            if child.objective > best.objective {
                best = child.clone();
            }
            history.push(best.objective);
            children.push(child);
        }
        sort_desc(&mut children);
        pop.truncate(config.elites);
        pop.extend(children.into_iter().take(config.pop_size - config.elites));
        sort_desc(&mut pop);
    }
    Ok(RunOutcome { best, history })
}
