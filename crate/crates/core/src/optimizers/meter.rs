use std::sync::atomic::{AtomicUsize, Ordering};

use crate::problems::{EvaluatedSample, Objective, Solution};
use crate::{Error, Result};

/// Counts true objective evaluations against a fixed limit.
///
/// Charging is atomic, so one meter can be shared by concurrent callers.
#[derive(Debug)]
pub struct BudgetMeter {
    limit: usize,
    used: AtomicUsize,
}

impl BudgetMeter {
    pub fn new(limit: usize) -> Self {
        BudgetMeter { limit, used: AtomicUsize::new(0) }
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    pub fn used(&self) -> usize {
        self.used.load(Ordering::SeqCst)
    }

    pub fn remaining(&self) -> usize {
        self.limit - self.used()
    }

    pub fn exhausted(&self) -> bool {
        self.remaining() == 0
    }

    /// Reserves one evaluation, failing without side effects when none is left.
    pub fn charge(&self) -> Result<()> {
        self.used
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |u| (u < self.limit).then_some(u + 1))
            .map(|_| ())
            .map_err(|used| Error::BudgetExhausted { used, limit: self.limit })
    }

    /// Charges one FE and evaluates `x` as given.
    pub fn evaluate(&self, objective: &dyn Objective, x: &Solution) -> Result<f64> {
        self.charge()?;
        objective.evaluate(x)
    }

    /// Repairs `x`, charges one FE and evaluates the repaired solution.
    pub fn evaluate_repaired(&self, objective: &dyn Objective, x: &Solution) -> Result<EvaluatedSample> {
        let solution = objective.repair(x);
        let value = self.evaluate(objective, &solution)?;
        Ok(EvaluatedSample { solution, objective: value })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{generate_instance, ProblemClass};

    #[test]
    fn charges_stop_at_limit() {
        let m = BudgetMeter::new(3);
        for _ in 0..3 {
            m.charge().unwrap();
        }
        assert!(matches!(m.charge(), Err(Error::BudgetExhausted { used: 3, limit: 3 })));
        assert_eq!(m.used(), 3);
        assert!(m.exhausted());
    }

    #[test]
    fn concurrent_charges_never_overshoot() {
        let m = BudgetMeter::new(1000);
        std::thread::scope(|s| {
            for _ in 0..4 {
                s.spawn(|| while m.charge().is_ok() {});
            }
        });
        assert_eq!(m.used(), 1000);
    }

    #[test]
    fn evaluate_repaired_returns_feasible() {
        let inst = generate_instance(ProblemClass::Knapsack, 10, 3).unwrap();
        let m = BudgetMeter::new(1);
        let s = m.evaluate_repaired(&inst, &Solution::new(vec![1; 10]).unwrap()).unwrap();
        assert_eq!(inst.repair(&s.solution), s.solution);
        assert!(m.evaluate_repaired(&inst, &s.solution).is_err());
    }
}
