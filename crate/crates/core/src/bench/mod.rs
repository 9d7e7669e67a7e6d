//! Experiment harness: plans, resumable runs, rank-sum statistics, W-D-L
//! aggregation and reports.

mod report;
mod stats;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

pub use report::{csv_report, curve_data, emit_report, text_table, ReportFormat};
pub use stats::{mean_std, ranksum_exact, ranksum_normal, wilcoxon_ranksum, ComparisonCell, Verdict, Wdl, EXACT_LIMIT};

use crate::gating::GatingModel;
use crate::optimizers::{init_obl, init_rand, init_svmss, run_optimizer, BudgetMeter, Optimizer, SvmConfig};
use crate::problems::{generate_instance, EvaluatedSample, Instance, ProblemClass};
use crate::repository::ExperienceRepository;
use crate::transfer::{ablation_initialize, mpi_initialize, Ablation, MpiConfig};
use crate::{par, rng, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Initializer {
    Mpi,
    Rand,
    Obl,
    Svmss,
    NoGating,
    NoTransfer,
    NoInterp,
}

impl Initializer {
    pub const ALL: [Initializer; 7] = [
        Initializer::Mpi,
        Initializer::Rand,
        Initializer::Obl,
        Initializer::Svmss,
        Initializer::NoGating,
        Initializer::NoTransfer,
        Initializer::NoInterp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Initializer::Mpi => "mpi",
            Initializer::Rand => "rand",
            Initializer::Obl => "obl",
            Initializer::Svmss => "svmss",
            Initializer::NoGating => "no-gating",
            Initializer::NoTransfer => "no-transfer",
            Initializer::NoInterp => "no-interp",
        }
    }

    pub fn needs_artifacts(self) -> bool {
        matches!(self, Initializer::Mpi | Initializer::NoGating | Initializer::NoTransfer | Initializer::NoInterp)
    }
}

impl FromStr for Initializer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Initializer::ALL
            .into_iter()
            .find(|i| i.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown initializer `{s}`")))
    }
}

impl fmt::Display for Initializer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An initializer paired with an optimizer, written `init+optimizer`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Method {
    pub init: Initializer,
    pub optimizer: Optimizer,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (init, opt) = s.split_once('+').ok_or_else(|| Error::invalid(format!("method `{s}` is not init+optimizer")))?;
        Ok(Method { init: init.parse()?, optimizer: opt.parse()? })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{}", self.init, self.optimizer)
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub class: String,
    pub dim: usize,
    pub seed: u64,
}

impl InstanceSpec {
    pub fn generate(&self) -> Result<Instance> {
        generate_instance(self.class.parse::<ProblemClass>()?, self.dim, self.seed)
    }
}

/// Trained artifacts needed by the transfer-based initializers.
pub struct Artifacts<'a> {
    pub repository: &'a ExperienceRepository,
    pub gating: &'a GatingModel,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArtifactPaths {
    pub repository: Option<PathBuf>,
    pub gating: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum Rule {
    /// Pooled wins strictly exceed pooled losses.
    WinsExceedLosses,
    /// Challenger mean beats baseline mean (or ties it when `ties_count`) on at
    /// least this fraction of instances.
    MeanBetterFraction { at_least: f64, #[serde(default)] ties_count: bool },
}

/// Comparison evaluated by `report`; a failing check yields a nonzero exit code.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub baseline: Method,
    pub challenger: Method,
    #[serde(default)]
    pub classes: Option<Vec<String>>,
    #[serde(default)]
    pub dims: Option<Vec<usize>>,
    #[serde(flatten)]
    pub rule: Rule,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentPlan {
    pub instances: Vec<InstanceSpec>,
    pub methods: Vec<Method>,
    pub budget: usize,
    /// Budget points at which best-so-far values are recorded.
    pub sweep: Vec<usize>,
    pub repetitions: usize,
    pub base_seed: u64,
    pub alpha: f64,
    pub mpi: MpiConfig,
    pub svm: SvmConfig,
    pub artifacts: ArtifactPaths,
    pub checks: Vec<Check>,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            instances: Vec::new(),
            methods: Vec::new(),
            budget: 800,
            sweep: Vec::new(),
            repetitions: 30,
            base_seed: 0,
            alpha: 0.05,
            mpi: MpiConfig::default(),
            svm: SvmConfig::default(),
            artifacts: ArtifactPaths::default(),
            checks: Vec::new(),
        }
    }
}

impl ExperimentPlan {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plan serialises")
    }

    /// Largest budget any run needs.
    pub fn max_budget(&self) -> usize {
        self.sweep.iter().copied().chain([self.budget]).max().unwrap_or(self.budget)
    }

    /// Budget points reported, ascending, always including `budget`.
    pub fn budget_points(&self) -> Vec<usize> {
        let mut pts: Vec<usize> = self.sweep.iter().copied().chain([self.budget]).collect();
        pts.sort_unstable();
        pts.dedup();
        pts
    }

    pub fn validate(&self) -> Result<()> {
        if self.instances.is_empty() || self.methods.is_empty() || self.repetitions == 0 {
            return Err(Error::invalid("plan needs instances, methods and at least one repetition"));
        }
        let smallest = self.budget_points()[0];
        for m in &self.methods {
            let cost = init_cost(m.init, &self.mpi, &self.svm);
            if cost > smallest {
                return Err(Error::invalid(format!("budget {smallest} is below the {} init cost {cost}", m.init)));
            }
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for spec in &self.instances {
            for &method in &self.methods {
                for rep in 0..self.repetitions {
                    out.push(Cell { spec: spec.clone(), method, rep });
                }
            }
        }
        out
    }
}

/// FEs an initializer consumes (without random padding).
pub fn init_cost(init: Initializer, mpi: &MpiConfig, svm: &SvmConfig) -> usize {
    match init {
        Initializer::Mpi | Initializer::NoGating | Initializer::NoTransfer => mpi.planned_fes(),
        Initializer::NoInterp => mpi.e + mpi.k * mpi.q,
        Initializer::Rand | Initializer::Obl => mpi.p,
        Initializer::Svmss => mpi.planned_fes().max(svm.initial).max(mpi.p),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Cell {
    pub spec: InstanceSpec,
    pub method: Method,
    pub rep: usize,
}

impl Cell {
    pub fn id(&self) -> String {
        format!("{}-d{}-s{}/{}/r{}", self.spec.class, self.spec.dim, self.spec.seed, self.method, self.rep)
    }

    pub fn run_seed(&self, base_seed: u64) -> u64 {
        let inst = format!("{}-d{}-s{}", self.spec.class, self.spec.dim, self.spec.seed);
        rng::derive_seed(&[
            b"run",
            &base_seed.to_le_bytes(),
            inst.as_bytes(),
            self.method.to_string().as_bytes(),
            &(self.rep as u64).to_le_bytes(),
        ])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub cell: String,
    pub class: String,
    pub dim: usize,
    pub instance_seed: u64,
    pub method: Method,
    pub rep: usize,
    pub run_seed: u64,
    pub budget: usize,
    pub best_objective: f64,
    pub best_solution: String,
    pub fes_init: usize,
    pub fes_total: usize,
    /// `(budget point, best objective within that many FEs)`.
    pub sweep: Vec<(usize, f64)>,
}

impl RunRecord {
    pub fn instance_key(&self) -> (String, usize, u64) {
        (self.class.clone(), self.dim, self.instance_seed)
    }

    pub fn best_at(&self, budget: usize) -> Option<f64> {
        self.sweep.iter().find(|(b, _)| *b == budget).map(|&(_, v)| v)
    }
}

/// Result of one initializer + optimizer run.
#[derive(Clone, Debug)]
pub struct SingleRun {
    pub init: Vec<EvaluatedSample>,
    pub fes_init: usize,
    pub best: EvaluatedSample,
    /// Best-so-far after every FE, counting initialisation FEs first.
    pub trace: Vec<f64>,
}

pub fn initialize(
    init: Initializer,
    instance: &Instance,
    artifacts: Option<&Artifacts<'_>>,
    mpi: &MpiConfig,
    svm: &SvmConfig,
    meter: &BudgetMeter,
    rng: &mut rng::Rng,
) -> Result<Vec<EvaluatedSample>> {
    let need = || artifacts.ok_or_else(|| Error::invalid(format!("initializer `{init}` needs a repository and gating model")));
    Ok(match init {
        Initializer::Rand => init_rand(instance, mpi.p, meter, rng)?,
        Initializer::Obl => init_obl(instance, mpi.p, meter, rng)?,
        Initializer::Svmss => init_svmss(instance, mpi.p, init_cost(init, mpi, svm), meter, svm, rng)?,
        Initializer::Mpi => {
            let a = need()?;
            mpi_initialize(instance, a.repository, a.gating, mpi, meter, rng)?.population
        }
        other => {
            let a = need()?;
            let variant = match other {
                Initializer::NoGating => Ablation::NoGating,
                Initializer::NoTransfer => Ablation::NoTransfer,
                _ => Ablation::NoInterpolation,
            };
            ablation_initialize(variant, instance, a.repository, a.gating, mpi, meter, rng)?.population
        }
    })
}

/// Initialises and optimises one instance under `budget` FEs.
#[allow(clippy::too_many_arguments)]
pub fn run_single(
    instance: &Instance,
    method: Method,
    budget: usize,
    artifacts: Option<&Artifacts<'_>>,
    mpi: &MpiConfig,
    svm: &SvmConfig,
    seed: u64,
) -> Result<SingleRun> {
    let meter = BudgetMeter::new(budget);
    let mut r = rng::seeded(seed);
    let init = initialize(method.init, instance, artifacts, mpi, svm, &meter, &mut r)?;
    let fes_init = meter.used();
    let init_best = init.iter().map(|s| s.objective).fold(f64::NEG_INFINITY, f64::max);
    let outcome = run_optimizer(method.optimizer, instance, init.clone(), &meter, &mut r)?;
    let mut trace = vec![init_best; fes_init];
    trace.extend(&outcome.history);
    Ok(SingleRun { init, fes_init, best: outcome.best, trace })
}

fn run_cell(plan: &ExperimentPlan, cell: &Cell, artifacts: Option<&Artifacts<'_>>) -> Result<RunRecord> {
    let instance = cell.spec.generate()?;
    let seed = cell.run_seed(plan.base_seed);
    let run = run_single(&instance, cell.method, plan.max_budget(), artifacts, &plan.mpi, &plan.svm, seed)?;
    let sweep = plan.budget_points().into_iter().map(|b| (b, run.trace[b.min(run.trace.len()) - 1])).collect::<Vec<_>>();
    let best = run.trace[plan.budget.min(run.trace.len()) - 1];
    Ok(RunRecord {
        cell: cell.id(),
        class: cell.spec.class.clone(),
        dim: cell.spec.dim,
        instance_seed: cell.spec.seed,
        method: cell.method,
        rep: cell.rep,
        run_seed: seed,
        budget: plan.budget,
        best_objective: best,
        best_solution: run.best.solution.to_bitstring(),
        fes_init: run.fes_init,
        fes_total: run.trace.len(),
        sweep,
    })
}

/// Reads a JSON-lines results store; a truncated last line is ignored.
pub fn read_results(path: &Path) -> Result<Vec<RunRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for line in BufReader::new(fs::File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(r) => out.push(r),
            Err(_) => continue,
        }
    }
    Ok(out)
}

/// Runs every cell of `plan` not already present in `store`, appending each
/// record as it completes, and returns all records in plan order.
pub fn run_experiment(plan: &ExperimentPlan, artifacts: Option<&Artifacts<'_>>, store: Option<&Path>) -> Result<Vec<RunRecord>> {
    plan.validate()?;
    if let Some(a) = artifacts {
        a.gating.check(a.repository)?;
    }
    let existing = match store {
        Some(p) => read_results(p)?,
        None => Vec::new(),
    };
    let done: HashSet<String> = existing.iter().map(|r| r.cell.clone()).collect();
    let cells = plan.cells();
    let pending: Vec<&Cell> = cells.iter().filter(|c| !done.contains(&c.id())).collect();
    let writer = match store {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            Some(Mutex::new(OpenOptions::new().create(true).append(true).open(p)?))
        }
        None => None,
    };
    let fresh = par::map(&pending, |cell| -> Result<RunRecord> {
        let rec = run_cell(plan, cell, artifacts)?;
        if let Some(w) = &writer {
            let line = serde_json::to_string(&rec).map_err(|e| Error::Parse(e.to_string()))?;
            let mut f = w.lock().expect("results writer poisoned");
            writeln!(f, "{line}")?;
        }
        Ok(rec)
    });
    let mut by_id: BTreeMap<String, RunRecord> = existing.into_iter().map(|r| (r.cell.clone(), r)).collect();
    for r in fresh {
        let r = r?;
        by_id.insert(r.cell.clone(), r);
    }
    cells
        .iter()
        .map(|c| by_id.remove(&c.id()).ok_or_else(|| Error::invalid(format!("missing cell {}", c.id()))))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupBy {
    Class,
    Dim,
    All,
}

impl FromStr for GroupBy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "class" => Ok(GroupBy::Class),
            "dim" => Ok(GroupBy::Dim),
            "all" => Ok(GroupBy::All),
            other => Err(Error::invalid(format!("unknown grouping `{other}`"))),
        }
    }
}

type InstanceKey = (String, usize, u64);

/// Per-instance best objectives of `method` at `budget`, ordered by repetition.
fn samples_by_instance(results: &[RunRecord], method: Method, budget: usize) -> BTreeMap<InstanceKey, Vec<(usize, f64)>> {
    let mut out: BTreeMap<InstanceKey, Vec<(usize, f64)>> = BTreeMap::new();
    for r in results.iter().filter(|r| r.method == method) {
        let v = if budget == r.budget { Some(r.best_objective) } else { r.best_at(budget) };
        if let Some(v) = v {
            out.entry(r.instance_key()).or_default().push((r.rep, v));
        }
    }
    out.values_mut().for_each(|v| v.sort_by_key(|(rep, _)| *rep));
    out
}

/// Per-instance comparison of `challenger` against `baseline` at `budget`.
pub fn compare_methods(
    results: &[RunRecord],
    baseline: Method,
    challenger: Method,
    budget: usize,
    alpha: f64,
) -> Result<Vec<((String, usize, u64), ComparisonCell)>> {
    let a = samples_by_instance(results, challenger, budget);
    let b = samples_by_instance(results, baseline, budget);
    let keys: Vec<&InstanceKey> = a.keys().chain(b.keys()).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    keys.into_iter()
        .map(|k| {
            let (Some(x), Some(y)) = (a.get(k), b.get(k)) else {
                return Err(Error::invalid(format!("missing results for {}-d{}-s{}", k.0, k.1, k.2)));
            };
            let x: Vec<f64> = x.iter().map(|p| p.1).collect();
            let y: Vec<f64> = y.iter().map(|p| p.1).collect();
            Ok((k.clone(), ComparisonCell::compare(&x, &y, alpha)?))
        })
        .collect()
}

/// W-D-L of `challenger` against `baseline`, grouped as requested.
pub fn aggregate_wdl(
    results: &[RunRecord],
    baseline: Method,
    challenger: Method,
    group_by: GroupBy,
    alpha: f64,
) -> Result<Vec<(String, Wdl)>> {
    let budget = results.first().map_or(0, |r| r.budget);
    let mut groups: BTreeMap<String, Wdl> = BTreeMap::new();
    for ((class, dim, _), cell) in compare_methods(results, baseline, challenger, budget, alpha)? {
        let key = match group_by {
            GroupBy::Class => class,
            GroupBy::Dim => dim.to_string(),
            GroupBy::All => "all".to_string(),
        };
        groups.entry(key).or_default().add(cell.verdict);
    }
    Ok(groups.into_iter().collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

pub fn evaluate_check(results: &[RunRecord], check: &Check, alpha: f64) -> Result<CheckOutcome> {
    let budget = results.first().map_or(0, |r| r.budget);
    let cells: Vec<_> = compare_methods(results, check.baseline, check.challenger, budget, alpha)?
        .into_iter()
        .filter(|((class, dim, _), _)| {
            check.classes.as_ref().is_none_or(|c| c.contains(class)) && check.dims.as_ref().is_none_or(|d| d.contains(dim))
        })
        .collect();
    if cells.is_empty() {
        return Err(Error::invalid(format!("check `{}` matches no instances", check.name)));
    }
    let (passed, detail) = match check.rule {
        Rule::WinsExceedLosses => {
            let mut w = Wdl::default();
            cells.iter().for_each(|(_, c)| w.add(c.verdict));
            (w.wins > w.losses, format!("W-D-L {w}"))
        }
        Rule::MeanBetterFraction { at_least, ties_count } => {
            let better = cells
                .iter()
                .filter(|(_, c)| c.mean_a > c.mean_b || (ties_count && c.mean_a == c.mean_b))
                .count();
            let frac = better as f64 / cells.len() as f64;
            (frac >= at_least, format!("{better}/{} instances ({:.0}%, need {:.0}%)", cells.len(), 100.0 * frac, 100.0 * at_least))
        }
    };
    Ok(CheckOutcome { name: check.name.clone(), passed, detail })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan() -> ExperimentPlan {
        ExperimentPlan {
            instances: vec![
                InstanceSpec { class: "OM".into(), dim: 12, seed: 1 },
                InstanceSpec { class: "KP".into(), dim: 12, seed: 2 },
            ],
            methods: vec!["rand+ga-elite".parse().unwrap(), "obl+brkga".parse().unwrap()],
            budget: 100,
            sweep: vec![50],
            repetitions: 3,
            ..Default::default()
        }
    }

    #[test]
    fn method_names_round_trip() {
        for init in Initializer::ALL {
            for opt in [Optimizer::GaElite, Optimizer::Brkga] {
                let m = Method { init, optimizer: opt };
                assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
            }
        }
        assert!("mpi".parse::<Method>().is_err());
    }

    #[test]
    fn plan_toml_round_trip() {
        let p = plan();
        assert_eq!(ExperimentPlan::from_toml(&p.to_toml()).unwrap(), p);
    }

    #[test]
    fn experiment_cardinality_and_resume() {
        let p = plan();
        let dir = tempfile::tempdir().unwrap();
        let store = dir.path().join("results.jsonl");
        let all = run_experiment(&p, None, Some(&store)).unwrap();
        assert_eq!(all.len(), 12);
        // drop the last records and rerun
        let text = fs::read_to_string(&store).unwrap();
        let kept: Vec<&str> = text.lines().take(5).collect();
        fs::write(&store, kept.join("\n") + "\n").unwrap();
        let again = run_experiment(&p, None, Some(&store)).unwrap();
        assert_eq!(again, all);
        assert_eq!(read_results(&store).unwrap().len(), 12);
        assert!(all.iter().all(|r| r.fes_init == 20 && r.fes_total == 100));
    }

    #[test]
    fn transfer_methods_need_artifacts() {
        let mut p = plan();
        p.methods = vec!["mpi+ga-elite".parse().unwrap()];
        p.budget = 200;
        assert!(run_experiment(&p, None, None).is_err());
    }
}
