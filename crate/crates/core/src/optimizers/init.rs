use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{sort_desc, BudgetMeter};
use crate::problems::{EvaluatedSample, Objective, Solution};
use crate::{Error, Result};

/// `p` uniform random solutions, repaired and evaluated.
pub fn init_rand<R: Rng + ?Sized>(
    objective: &dyn Objective,
    p: usize,
    meter: &BudgetMeter,
    rng: &mut R,
) -> Result<Vec<EvaluatedSample>> {
    let d = objective.dim();
    (0..p).map(|_| meter.evaluate_repaired(objective, &Solution::random(d, rng))).collect()
}

/// `p/2` random solutions followed by their bitwise complements. Complements
/// are taken from the raw samples, before repair.
pub fn init_obl<R: Rng + ?Sized>(
    objective: &dyn Objective,
    p: usize,
    meter: &BudgetMeter,
    rng: &mut R,
) -> Result<Vec<EvaluatedSample>> {
    if !p.is_multiple_of(2) {
        return Err(Error::invalid("opposition-based init needs an even population size"));
    }
    let d = objective.dim();
    let raw: Vec<Solution> = (0..p / 2).map(|_| Solution::random(d, rng)).collect();
    let opposite: Vec<Solution> = raw.iter().map(Solution::complement).collect();
    raw.iter().chain(&opposite).map(|x| meter.evaluate_repaired(objective, x)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    /// Random solutions evaluated before the first classifier is fitted.
    pub initial: usize,
    /// Fresh uniform candidates screened per iteration.
    pub pool: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub regularization: f64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig { initial: 20, pool: 200, epochs: 100, learning_rate: 0.1, regularization: 0.01 }
    }
}

/// Linear classifier `sign(w.x + b)` on `x` mapped to `{-1, +1}^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSvm {
    pub w: Vec<f64>,
    pub b: f64,
}

fn signed(x: &Solution) -> impl Iterator<Item = f64> + '_ {
    x.bits().iter().map(|&b| if b == 1 { 1.0 } else { -1.0 })
}

impl LinearSvm {
    pub fn score(&self, x: &Solution) -> f64 {
        self.b + signed(x).zip(&self.w).map(|(x, w)| x * w).sum::<f64>()
    }

    /// Full-batch subgradient descent on the regularised hinge loss.
    pub fn fit(xs: &[&Solution], labels: &[f64], config: &SvmConfig) -> Self {
        let d = xs.first().map_or(0, |x| x.len());
        let n = xs.len().max(1) as f64;
        let feats: Vec<Vec<f64>> = xs.iter().map(|x| signed(x).collect()).collect();
        let mut svm = LinearSvm { w: vec![0.0; d], b: 0.0 };
        let mut gw = vec![0.0; d];
        for _ in 0..config.epochs {
            gw.iter_mut().zip(&svm.w).for_each(|(g, w)| *g = config.regularization * w);
            let mut gb = 0.0;
            for (f, &y) in feats.iter().zip(labels) {
                let margin = y * (svm.b + f.iter().zip(&svm.w).map(|(a, b)| a * b).sum::<f64>());
                if margin < 1.0 {
                    gw.iter_mut().zip(f).for_each(|(g, x)| *g -= y * x / n);
                    gb -= y / n;
                }
            }
            svm.w.iter_mut().zip(&gw).for_each(|(w, g)| *w -= config.learning_rate * g);
            svm.b -= config.learning_rate * gb;
        }
        svm
    }
}

/// Classifier-guided sampling: after `config.initial` random evaluations, each
/// step fits a top-half/bottom-half classifier to everything evaluated so far
/// and evaluates the highest-scoring candidate of a fresh random pool. Stops
/// after `budget` evaluations and returns the best `p`, sorted descending.
pub fn init_svmss<R: Rng + ?Sized>(
    objective: &dyn Objective,
    p: usize,
    budget: usize,
    meter: &BudgetMeter,
    config: &SvmConfig,
    rng: &mut R,
) -> Result<Vec<EvaluatedSample>> {
    if budget < p || budget < config.initial || config.pool == 0 {
        return Err(Error::invalid(format!("classifier-guided init: budget {budget} below population {p}")));
    }
    let d = objective.dim();
    let mut archive = init_rand(objective, config.initial, meter, rng)?;
    let mut seen: HashSet<Solution> = archive.iter().map(|s| s.solution.clone()).collect();
    while archive.len() < budget {
        let mut ranked: Vec<&EvaluatedSample> = archive.iter().collect();
        ranked.sort_by(|a, b| b.objective.total_cmp(&a.objective));
        let top = ranked.len().div_ceil(2);
        let labels: Vec<f64> = (0..ranked.len()).map(|i| if i < top { 1.0 } else { -1.0 }).collect();
        let xs: Vec<&Solution> = ranked.iter().map(|s| &s.solution).collect();
        let svm = LinearSvm::fit(&xs, &labels, config);

        let mut pick: Option<(f64, Solution)> = None;
        for _ in 0..config.pool {
            let cand = objective.repair(&Solution::random(d, rng));
            if seen.contains(&cand) {
                continue;
            }
            let s = svm.score(&cand);
            if pick.as_ref().is_none_or(|(best, _)| s > *best) {
                pick = Some((s, cand));
            }
        }
        // a pool of duplicates only: fall back to a plain random candidate
        let cand = pick.map(|(_, c)| c).unwrap_or_else(|| objective.repair(&Solution::random(d, rng)));
        let value = meter.evaluate(objective, &cand)?;
        seen.insert(cand.clone());
        archive.push(EvaluatedSample { solution: cand, objective: value });
    }
    sort_desc(&mut archive);
    archive.truncate(p);
    Ok(archive)
}
