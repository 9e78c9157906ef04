use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ConfigError, Outcome, ParentVector, TracePoint, TreeProblem};

/// Population simulated annealing with geometric cooling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaConfig {
    pub t0: f64,
    pub tf: f64,
    pub cool: f64,
    pub pop_size: usize,
    pub moves: usize,
    pub seed: u64,
}

impl Default for SaConfig {
    fn default() -> Self {
        Self {
            t0: 1e-2,
            tf: 1e-6,
            cool: 0.9,
            pop_size: 8,
            moves: 16,
            seed: 1,
        }
    }
}

impl SaConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |key, reason: &str| {
            Err(ConfigError {
                key,
                reason: reason.to_string(),
            })
        };
        if !(self.tf > 0.0) {
            return err("sa.tf", "must be > 0");
        }
        if !(self.t0 >= self.tf) {
            return err("sa.t0", "must be >= sa.tf");
        }
        if !(self.cool > 0.0 && self.cool < 1.0) {
            return err("sa.cool", "must lie strictly between 0 and 1");
        }
        if self.pop_size == 0 {
            return err("sa.pop_size", "must be >= 1");
        }
        if self.moves == 0 {
            return err("sa.moves", "must be >= 1");
        }
        Ok(())
    }
}

/// Boltzmann acceptance of a move that worsens the cost by `delta` at
/// temperature `t`.
pub fn accept_worse<R: Rng + ?Sized>(delta: f64, t: f64, rng: &mut R) -> bool {
    rng.gen::<f64>() < (-delta / t).exp()
}

/// Anneals a population seeded from `initial` and returns the best tree
/// seen. The best cost never exceeds the initial cost.
pub fn sa_optimize<R: Rng + ?Sized>(
    problem: &TreeProblem,
    initial: &ParentVector,
    cfg: &SaConfig,
    rng: &mut R,
) -> Outcome {
    let mut pop: Vec<ParentVector> = Vec::with_capacity(cfg.pop_size);
    pop.push(initial.clone());
    while pop.len() < cfg.pop_size {
        pop.push(problem.neighbor_move(initial, rng));
    }
    // strict comparison keeps the earliest of equally good solutions
    let mut best = pop[0].clone();
    for s in &pop[1..] {
        if s.cost < best.cost {
            best = s.clone();
        }
    }

    let mut trace = Vec::new();
    let mut t = cfg.t0;
    let mut step = 0;
    while t > cfg.tf {
        for member in pop.iter_mut() {
            for _ in 0..cfg.moves {
                let cand = problem.neighbor_move(member, rng);
                let accept =
                    cand.cost <= member.cost || accept_worse(cand.cost - member.cost, t, rng);
                if accept {
                    *member = cand;
                    if member.cost < best.cost {
                        best = member.clone();
                    }
                }
            }
        }
        let current = pop.iter().map(|s| s.cost).fold(f64::INFINITY, f64::min);
        trace.push(TracePoint {
            iteration: step,
            level: t,
            current,
            best: best.cost,
        });
        t *= cfg.cool;
        step += 1;
    }
    Outcome { best, trace }
}
