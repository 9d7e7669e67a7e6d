//! Binary benchmark problems: instance generation, repair, evaluation and the
//! `XFI1` instance file format.
//!
//! All objectives are maximised. Repair is applied inside [`Objective::evaluate`],
//! so every objective value corresponds to a feasible (repaired) solution.

mod contamination;
mod external;
mod format;
mod generate;
mod influence;
mod solution;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

pub use contamination::ContaminationParams;
pub use external::{ExternalClient, ExternalSpec};
pub use format::{load_instance, save_instance};
pub use generate::generate_instance;
pub use influence::{InfluenceParams, Interaction};
pub use solution::{EvaluatedSample, Solution};

use crate::{Error, Result};

/// Anything that can be queried as a black-box binary objective.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    /// Projects `x` onto the feasible set. Total and idempotent.
    fn repair(&self, x: &Solution) -> Solution;

    /// True objective of `repair(x)` (maximisation).
    fn evaluate(&self, x: &Solution) -> Result<f64>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProblemClass {
    OneMax,
    Knapsack,
    MaxCut,
    Contamination,
    Influence,
    External,
}

impl ProblemClass {
    pub const GENERATED: [ProblemClass; 5] = [
        ProblemClass::OneMax,
        ProblemClass::Knapsack,
        ProblemClass::MaxCut,
        ProblemClass::Contamination,
        ProblemClass::Influence,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ProblemClass::OneMax => "OM",
            ProblemClass::Knapsack => "KP",
            ProblemClass::MaxCut => "MC",
            ProblemClass::Contamination => "CCP",
            ProblemClass::Influence => "CIM",
            ProblemClass::External => "EXTERNAL",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            ProblemClass::OneMax => 0,
            ProblemClass::Knapsack => 1,
            ProblemClass::MaxCut => 2,
            ProblemClass::Contamination => 3,
            ProblemClass::Influence => 4,
            ProblemClass::External => 5,
        }
    }

    pub(crate) fn from_code(code: u8) -> Result<Self> {
        Ok(match code {
            0 => ProblemClass::OneMax,
            1 => ProblemClass::Knapsack,
            2 => ProblemClass::MaxCut,
            3 => ProblemClass::Contamination,
            4 => ProblemClass::Influence,
            5 => ProblemClass::External,
            other => return Err(Error::corrupt(format!("unknown class code {other}"))),
        })
    }
}

impl fmt::Display for ProblemClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ProblemClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "OM" => Ok(ProblemClass::OneMax),
            "KP" => Ok(ProblemClass::Knapsack),
            "MC" => Ok(ProblemClass::MaxCut),
            "CCP" => Ok(ProblemClass::Contamination),
            "CIM" => Ok(ProblemClass::Influence),
            "EXTERNAL" => Ok(ProblemClass::External),
            _ => Err(Error::UnsupportedClass(s.to_string())),
        }
    }
}

/// Class-specific instance data.
#[derive(Clone, Debug)]
pub enum Params {
    OneMax {
        reference: Solution,
    },
    /// Values and weights are sorted descending together, so `v_i > v_j` iff `w_i > w_j`.
    Knapsack {
        values: Vec<f64>,
        weights: Vec<f64>,
        capacity: f64,
    },
    /// Symmetric 0/1 adjacency matrix, row-major `d x d`, zero diagonal.
    MaxCut {
        adjacency: Vec<u8>,
        k: usize,
    },
    Contamination(ContaminationParams),
    Influence(InfluenceParams),
    External(Arc<ExternalClient>),
}

/// An immutable problem instance. Safe to evaluate from several threads.
#[derive(Clone, Debug)]
pub struct Instance {
    pub class: ProblemClass,
    pub dim: usize,
    pub seed: u64,
    pub params: Params,
}

impl Instance {
    pub fn external(spec: ExternalSpec, dim: usize) -> Self {
        Instance {
            class: ProblemClass::External,
            dim,
            seed: 0,
            params: Params::External(Arc::new(ExternalClient::new(spec, dim))),
        }
    }

    /// Short identifier: `<class>-d<dim>-s<seed>`.
    pub fn id(&self) -> String {
        format!("{}-d{}-s{}", self.class.tag(), self.dim, self.seed)
    }

    fn check_len(&self, x: &Solution) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: x.len() });
        }
        Ok(())
    }

    /// Objective of an already-feasible solution.
    fn score(&self, x: &Solution) -> Result<f64> {
        let bits = x.bits();
        let value = match &self.params {
            Params::OneMax { reference } => (self.dim - reference.hamming(x)) as f64,
            Params::Knapsack { values, .. } => {
                bits.iter().zip(values).filter(|(&b, _)| b == 1).map(|(_, v)| v).sum()
            }
            Params::MaxCut { adjacency, .. } => {
                let d = self.dim;
                let mut cut = 0u64;
                for i in (0..d).filter(|&i| bits[i] == 1) {
                    let row = &adjacency[i * d..(i + 1) * d];
                    cut += (0..d).filter(|&j| bits[j] == 0 && row[j] == 1).count() as u64;
                }
                cut as f64
            }
            Params::Contamination(p) => p.objective(bits),
            Params::Influence(p) => p.active_b(bits),
            Params::External(client) => client.evaluate(x)?,
        };
        if !value.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(value)
    }
}

/// Keeps the first `k` ones in index order.
pub(crate) fn keep_first_ones(bits: &[u8], k: usize) -> Vec<u8> {
    let mut seen = 0;
    bits.iter()
        .map(|&b| {
            if b == 1 {
                seen += 1;
                (seen <= k) as u8
            } else {
                0
            }
        })
        .collect()
}

impl Objective for Instance {
    fn dim(&self) -> usize {
        self.dim
    }

    fn repair(&self, x: &Solution) -> Solution {
        match &self.params {
            Params::Knapsack { weights, capacity, .. } => {
                let mut total = 0.0;
                let mut bits = x.bits().to_vec();
                for i in 0..bits.len() {
                    if bits[i] == 1 {
                        total += weights[i];
                        if total > *capacity {
                            bits[i..].iter_mut().for_each(|b| *b = 0);
                            break;
                        }
                    }
                }
                Solution::from_bits_unchecked(bits)
            }
            Params::MaxCut { k, .. } => Solution::from_bits_unchecked(keep_first_ones(x.bits(), *k)),
            Params::Influence(p) => Solution::from_bits_unchecked(keep_first_ones(x.bits(), p.k)),
            Params::OneMax { .. } | Params::Contamination(_) | Params::External(_) => x.clone(),
        }
    }

    fn evaluate(&self, x: &Solution) -> Result<f64> {
        self.check_len(x)?;
        let repaired = self.repair(x);
        self.score(&repaired)
    }
}
