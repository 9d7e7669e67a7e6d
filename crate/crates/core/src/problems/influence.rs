//! Complementary influence maximisation under comparative independent cascade.
//!
//! Each Monte-Carlo world is a possible world of the ComIC model: a live/blocked
//! coin per arc (shared by both opinions), one adoption threshold per node and
//! opinion, and a tie-break coin for nodes informed of both opinions in the same
//! step. World randomness is addressed by key from a per-world seed, so every
//! solution is scored on the same worlds.

use std::sync::OnceLock;

use crate::rng::keyed_uniform;

/// Adoption probabilities `(q_{A|0}, q_{A|B}, q_{B|0}, q_{B|A})`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interaction {
    pub a_alone: f64,
    pub a_given_b: f64,
    pub b_alone: f64,
    pub b_given_a: f64,
}

impl Interaction {
    pub const COMPLEMENTARY: Interaction =
        Interaction { a_alone: 0.5, a_given_b: 0.75, b_alone: 0.5, b_given_a: 0.75 };
    pub const COMPETITIVE: Interaction =
        Interaction { a_alone: 0.5, a_given_b: 0.25, b_alone: 0.5, b_given_a: 0.25 };
}

#[derive(Clone, Debug, PartialEq)]
pub struct InfluenceParams {
    pub nodes: usize,
    /// CSR offsets into `targets`/`probs`, length `nodes + 1`.
    pub offsets: Vec<u32>,
    pub targets: Vec<u32>,
    pub probs: Vec<f64>,
    pub seeds_a: Vec<u32>,
    /// Candidate seed nodes for opinion B; bit `i` of a solution selects `candidates[i]`.
    pub candidates: Vec<u32>,
    pub k: usize,
    pub q: Interaction,
    pub world_seeds: Vec<u64>,
    /// Realised worlds, built from `world_seeds` on first use.
    pub worlds: WorldCache,
}

/// Lazily materialised possible worlds. Derived data only, so it never takes
/// part in equality.
#[derive(Clone, Debug, Default)]
pub struct WorldCache(OnceLock<Vec<LiveWorld>>);

impl PartialEq for WorldCache {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

/// One possible world: live arcs in CSR form plus the per-node coins.
#[derive(Clone, Debug)]
pub struct LiveWorld {
    offsets: Vec<u32>,
    targets: Vec<u32>,
    /// Adoption thresholds for opinions A and B.
    thresholds: Vec<[f64; 2]>,
    /// Whether A is processed first when a node hears both opinions at once.
    a_first: Vec<bool>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum State {
    Idle,
    Suspended,
    Adopted,
    Rejected,
}

const THRESHOLD_KEY: u64 = 1 << 40;
const TIE_KEY: u64 = 2 << 40;

impl LiveWorld {
    fn realise(params: &InfluenceParams, seed: u64) -> Self {
        let mut offsets = Vec::with_capacity(params.nodes + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for u in 0..params.nodes {
            for arc in params.offsets[u] as usize..params.offsets[u + 1] as usize {
                if keyed_uniform(seed, arc as u64) < params.probs[arc] {
                    targets.push(params.targets[arc]);
                }
            }
            offsets.push(targets.len() as u32);
        }
        let thresholds = (0..params.nodes as u64)
            .map(|v| [keyed_uniform(seed, THRESHOLD_KEY + 2 * v), keyed_uniform(seed, THRESHOLD_KEY + 2 * v + 1)])
            .collect();
        let a_first = (0..params.nodes as u64).map(|v| keyed_uniform(seed, TIE_KEY + v) < 0.5).collect();
        LiveWorld { offsets, targets, thresholds, a_first }
    }
}

struct World<'a> {
    params: &'a InfluenceParams,
    live: &'a LiveWorld,
    a: Vec<State>,
    b: Vec<State>,
}

impl<'a> World<'a> {
    fn threshold(&self, node: usize, opinion_b: bool) -> f64 {
        self.live.thresholds[node][opinion_b as usize]
    }

    /// Node `v` hears about opinion A. Returns true if it adopts.
    fn inform_a(&mut self, v: usize) -> bool {
        if self.a[v] != State::Idle {
            return false;
        }
        let q = &self.params.q;
        let t = self.threshold(v, false);
        if self.b[v] == State::Adopted {
            self.a[v] = if t <= q.a_given_b { State::Adopted } else { State::Rejected };
        } else {
            self.a[v] = if t <= q.a_alone { State::Adopted } else { State::Suspended };
        }
        self.a[v] == State::Adopted
    }

    fn inform_b(&mut self, v: usize) -> bool {
        if self.b[v] != State::Idle {
            return false;
        }
        let q = &self.params.q;
        let t = self.threshold(v, true);
        if self.a[v] == State::Adopted {
            self.b[v] = if t <= q.b_given_a { State::Adopted } else { State::Rejected };
        } else {
            self.b[v] = if t <= q.b_alone { State::Adopted } else { State::Suspended };
        }
        self.b[v] == State::Adopted
    }

    /// After `v` adopts B, a suspended A decision is reconsidered with `q_{A|B}`.
    fn reconsider_a(&mut self, v: usize) -> bool {
        if self.a[v] != State::Suspended {
            return false;
        }
        let adopt = self.threshold(v, false) <= self.params.q.a_given_b;
        self.a[v] = if adopt { State::Adopted } else { State::Rejected };
        adopt
    }

    fn reconsider_b(&mut self, v: usize) -> bool {
        if self.b[v] != State::Suspended {
            return false;
        }
        let adopt = self.threshold(v, true) <= self.params.q.b_given_a;
        self.b[v] = if adopt { State::Adopted } else { State::Rejected };
        adopt
    }

    fn run(mut self, seeds_b: &[usize]) -> usize {
        let n = self.params.nodes;
        let mut frontier_a: Vec<usize> = Vec::new();
        let mut frontier_b: Vec<usize> = Vec::new();
        for &s in &self.params.seeds_a {
            let s = s as usize;
            if self.a[s] != State::Adopted {
                self.a[s] = State::Adopted;
                frontier_a.push(s);
            }
        }
        for &s in seeds_b {
            if self.b[s] != State::Adopted {
                self.b[s] = State::Adopted;
                frontier_b.push(s);
            }
        }

        let mut heard_a = vec![false; n];
        let mut heard_b = vec![false; n];
        while !frontier_a.is_empty() || !frontier_b.is_empty() {
            let mut informed: Vec<usize> = Vec::new();
            for (frontier, heard, states) in
                [(&frontier_a, &mut heard_a, &self.a), (&frontier_b, &mut heard_b, &self.b)]
            {
                for &u in frontier.iter() {
                    let (lo, hi) = (self.live.offsets[u] as usize, self.live.offsets[u + 1] as usize);
                    for &v in &self.live.targets[lo..hi] {
                        let v = v as usize;
                        if states[v] == State::Idle && !heard[v] {
                            heard[v] = true;
                            informed.push(v);
                        }
                    }
                }
            }
            informed.sort_unstable();
            informed.dedup();

            let mut next_a = Vec::new();
            let mut next_b = Vec::new();
            for v in informed {
                let (ha, hb) = (heard_a[v], heard_b[v]);
                heard_a[v] = false;
                heard_b[v] = false;
                let a_first = !(ha && hb) || self.live.a_first[v];
                let order: [(bool, bool); 2] = if a_first { [(ha, false), (hb, true)] } else { [(hb, true), (ha, false)] };
                for (heard, is_b) in order {
                    if !heard {
                        continue;
                    }
                    if is_b {
                        if self.inform_b(v) {
                            next_b.push(v);
                            if self.reconsider_a(v) {
                                next_a.push(v);
                            }
                        }
                    } else if self.inform_a(v) {
                        next_a.push(v);
                        if self.reconsider_b(v) {
                            next_b.push(v);
                        }
                    }
                }
            }
            frontier_a = next_a;
            frontier_b = next_b;
        }
        self.b.iter().filter(|&&s| s == State::Adopted).count()
    }
}

impl InfluenceParams {
    pub fn dim(&self) -> usize {
        self.candidates.len()
    }

    /// Number of B-adopters in world `w` for the seed set selected by `bits`.
    pub fn simulate(&self, bits: &[u8], w: usize) -> usize {
        let seeds_b: Vec<usize> = bits
            .iter()
            .zip(&self.candidates)
            .filter(|(&b, _)| b == 1)
            .map(|(_, &c)| c as usize)
            .collect();
        let world = World {
            params: self,
            live: &self.realised()[w],
            a: vec![State::Idle; self.nodes],
            b: vec![State::Idle; self.nodes],
        };
        world.run(&seeds_b)
    }

    fn realised(&self) -> &[LiveWorld] {
        self.worlds.0.get_or_init(|| self.world_seeds.iter().map(|&s| LiveWorld::realise(self, s)).collect())
    }

    /// Mean number of B-adopters over the frozen worlds.
    pub fn active_b(&self, bits: &[u8]) -> f64 {
        let total: usize = (0..self.world_seeds.len()).map(|w| self.simulate(bits, w)).sum();
        total as f64 / self.world_seeds.len() as f64
    }
}
