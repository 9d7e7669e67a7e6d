/// Contamination control with frozen Monte-Carlo draws.
///
/// Path `k` follows `z_i = a_ki (1 - x_i)(1 - z_{i-1}) + (1 - g_ki x_i) z_{i-1}`
/// from `z_0 = z0_k`. The chance constraint is folded into the objective: stage
/// `i` pays `rho` times the fraction of paths whose `z_i` exceeds the threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct ContaminationParams {
    pub costs: Vec<f64>,
    pub lambda: f64,
    pub rho: f64,
    pub threshold: f64,
    pub simulations: usize,
    /// Row-major `simulations x dim`.
    pub alpha: Vec<f64>,
    /// Row-major `simulations x dim`.
    pub gamma: Vec<f64>,
    pub z0: Vec<f64>,
}

impl ContaminationParams {
    pub fn dim(&self) -> usize {
        self.costs.len()
    }

    /// Contamination trajectory `z_1..z_d` of simulation `k`.
    pub fn path(&self, bits: &[u8], k: usize) -> Vec<f64> {
        let d = self.dim();
        let alpha = &self.alpha[k * d..(k + 1) * d];
        let gamma = &self.gamma[k * d..(k + 1) * d];
        let mut z = self.z0[k];
        (0..d)
            .map(|i| {
                let x = bits[i] as f64;
                z = alpha[i] * (1.0 - x) * (1.0 - z) + (1.0 - gamma[i] * x) * z;
                z
            })
            .collect()
    }

    pub fn objective(&self, bits: &[u8]) -> f64 {
        let d = self.dim();
        let mut exceed = vec![0usize; d];
        for k in 0..self.simulations {
            for (i, z) in self.path(bits, k).into_iter().enumerate() {
                if z > self.threshold {
                    exceed[i] += 1;
                }
            }
        }
        let t = self.simulations as f64;
        let stage_terms: f64 = (0..d)
            .map(|i| self.costs[i] * bits[i] as f64 + self.rho * exceed[i] as f64 / t)
            .sum();
        let ones = bits.iter().filter(|&&b| b == 1).count() as f64;
        -(stage_terms + self.lambda * ones)
    }
}
