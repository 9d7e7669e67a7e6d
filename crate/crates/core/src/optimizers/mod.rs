//! Budget-metered binary GAs and the baseline population initializers.

mod brkga;
mod ga;
mod init;
mod meter;

pub use brkga::{brkga_run, BrkgaConfig};
pub use ga::{ga_elite_run, GaEliteConfig};
pub use init::{init_obl, init_rand, init_svmss, SvmConfig};
pub use meter::BudgetMeter;

use crate::problems::EvaluatedSample;

/// Result of one optimizer run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub best: EvaluatedSample,
    /// Best objective seen so far, one entry per evaluation made by the optimizer.
    pub history: Vec<f64>,
}

impl RunOutcome {
    pub fn evaluations(&self) -> usize {
        self.history.len()
    }
}

/// Stable descending sort by objective; equal objectives keep insertion order.
pub(crate) fn sort_desc(pop: &mut [EvaluatedSample]) {
    pop.sort_by(|a, b| b.objective.total_cmp(&a.objective));
}

pub(crate) fn best_of(pop: &[EvaluatedSample]) -> Option<&EvaluatedSample> {
    pop.iter().fold(None, |best: Option<&EvaluatedSample>, s| match best {
        Some(b) if b.objective >= s.objective => Some(b),
        _ => Some(s),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Optimizer {
    GaElite,
    Brkga,
}

impl Optimizer {
    pub fn name(self) -> &'static str {
        match self {
            Optimizer::GaElite => "ga-elite",
            Optimizer::Brkga => "brkga",
        }
    }
}

impl std::str::FromStr for Optimizer {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "ga-elite" | "ga" => Ok(Optimizer::GaElite),
            "brkga" => Ok(Optimizer::Brkga),
            other => Err(crate::Error::invalid(format!("unknown optimizer `{other}`"))),
        }
    }
}

impl std::fmt::Display for Optimizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Runs `optimizer` with its default configuration.
pub fn run_optimizer<R: rand::Rng + ?Sized>(
    optimizer: Optimizer,
    objective: &dyn crate::Objective,
    init: Vec<EvaluatedSample>,
    meter: &BudgetMeter,
    rng: &mut R,
) -> crate::Result<RunOutcome> {
    match optimizer {
        Optimizer::GaElite => ga_elite_run(objective, init, meter, &GaEliteConfig::default(), rng),
        Optimizer::Brkga => brkga_run(objective, init, meter, &BrkgaConfig::default(), rng),
    }
}
