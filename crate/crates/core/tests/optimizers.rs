use std::collections::HashSet;
use std::sync::Mutex;

use popinit::optimizers::{brkga_run, ga_elite_run, init_rand, init_svmss, BrkgaConfig, GaEliteConfig, SvmConfig};
use popinit::problems::{generate_instance, Instance};
use popinit::rng::seeded;
use popinit::{BudgetMeter, Objective, ProblemClass, Solution};

/// Records every solution it is asked to evaluate.
struct Logged<'a> {
    inner: &'a Instance,
    seen: Mutex<Vec<Solution>>,
}

impl Objective for Logged<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn repair(&self, x: &Solution) -> Solution {
        self.inner.repair(x)
    }

    fn evaluate(&self, x: &Solution) -> popinit::Result<f64> {
        self.seen.lock().unwrap().push(x.clone());
        self.inner.evaluate(x)
    }
}

fn one_max_20() -> Instance {
    generate_instance(ProblemClass::OneMax, 20, 1).unwrap()
}

fn mean_best(run: impl Fn(u64) -> f64, seeds: u64) -> f64 {
    (0..seeds).map(&run).sum::<f64>() / seeds as f64
}

fn ga_best(inst: &Instance, seed: u64) -> f64 {
    let meter = BudgetMeter::new(800);
    let mut r = seeded(seed);
    let init = init_rand(inst, 20, &meter, &mut r).unwrap();
    let out = ga_elite_run(inst, init, &meter, &GaEliteConfig::default(), &mut r).unwrap();
    assert_eq!(out.evaluations(), 780);
    assert!(out.history.windows(2).all(|w| w[1] >= w[0]));
    out.best.objective
}

fn brkga_best(inst: &Instance, seed: u64) -> f64 {
    let meter = BudgetMeter::new(800);
    let mut r = seeded(seed);
    let init = init_rand(inst, 20, &meter, &mut r).unwrap();
    let out = brkga_run(inst, init, &meter, &BrkgaConfig::default(), &mut r).unwrap();
    assert_eq!(meter.used(), 800);
    out.best.objective
}

#[test]
fn ga_elite_solves_small_one_max() {
    let inst = one_max_20();
    let m = mean_best(|s| ga_best(&inst, s), 20);
    assert!(m >= 18.0, "mean best {m}");
}

#[test]
fn brkga_keeps_up_with_ga_elite() {
    let inst = one_max_20();
    let ga = mean_best(|s| ga_best(&inst, s), 20);
    let brkga = mean_best(|s| brkga_best(&inst, 100 + s), 20);
    assert!(brkga >= ga - 1.0, "brkga {brkga} vs ga {ga}");
}

#[test]
fn full_elite_bias_only_copies_elites() {
    let inst = generate_instance(ProblemClass::OneMax, 16, 2).unwrap();
    let logged = Logged { inner: &inst, seen: Mutex::new(Vec::new()) };
    let meter = BudgetMeter::new(100);
    let mut r = seeded(3);
    let mut init = init_rand(&inst, 20, &meter, &mut r).unwrap();
    init.sort_by(|a, b| b.objective.total_cmp(&a.objective));
    let elites: HashSet<Solution> = init[..4].iter().map(|s| s.solution.clone()).collect();
    let cfg = BrkgaConfig { crossover_offspring: 16, mutants: 0, elite_bias: 1.0, ..BrkgaConfig::default() };
    brkga_run(&logged, init, &meter, &cfg, &mut r).unwrap();
    let seen = logged.seen.into_inner().unwrap();
    assert_eq!(seen.len(), 80);
    assert!(seen.iter().all(|x| elites.contains(x)));
}

#[test]
fn classifier_guided_init_beats_matched_random_sampling() {
    let inst = one_max_20();
    let (mut svm_total, mut rand_total) = (0.0, 0.0);
    for seed in 0..30 {
        let meter = BudgetMeter::new(132);
        let pop = init_svmss(&inst, 20, 132, &meter, &SvmConfig::default(), &mut seeded(seed)).unwrap();
        assert_eq!((pop.len(), meter.used()), (20, 132));
        assert!(pop.windows(2).all(|w| w[0].objective >= w[1].objective));
        svm_total += pop[0].objective;
        let random = init_rand(&inst, 132, &BudgetMeter::new(132), &mut seeded(500 + seed)).unwrap();
        rand_total += random.iter().map(|s| s.objective).fold(f64::NEG_INFINITY, f64::max);
    }
    assert!(svm_total >= rand_total, "{svm_total} vs {rand_total}");
}

#[test]
fn both_optimizers_stop_exactly_at_the_limit() {
    let inst = generate_instance(ProblemClass::Knapsack, 25, 4).unwrap();
    for limit in [20, 21, 37, 132, 800] {
        let meter = BudgetMeter::new(limit);
        let mut r = seeded(limit as u64);
        let init = init_rand(&inst, 20, &meter, &mut r).unwrap();
        let ga = ga_elite_run(&inst, init.clone(), &meter, &GaEliteConfig::default(), &mut r).unwrap();
        assert_eq!((ga.evaluations(), meter.used()), (limit - 20, limit));

        let meter = BudgetMeter::new(limit);
        (0..20).for_each(|_| meter.charge().unwrap());
        let brkga = brkga_run(&inst, init, &meter, &BrkgaConfig::default(), &mut r).unwrap();
        assert_eq!((brkga.evaluations(), meter.used()), (limit - 20, limit));
    }
}
