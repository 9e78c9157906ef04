use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ConfigError, Outcome, ParentVector, TracePoint, TreeProblem};
use crate::topology::Parent;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VnsConfig {
    pub k_max: usize,
    pub local_iters: usize,
    pub max_stall: usize,
    pub seed: u64,
}

impl Default for VnsConfig {
    fn default() -> Self {
        Self {
            k_max: 3,
            local_iters: 200,
            max_stall: 10,
            seed: 1,
        }
    }
}

impl VnsConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (key, v) in [
            ("vns.k_max", self.k_max),
            ("vns.local_iters", self.local_iters),
            ("vns.max_stall", self.max_stall),
        ] {
            if v == 0 {
                return Err(ConfigError {
                    key,
                    reason: "must be >= 1".into(),
                });
            }
        }
        Ok(())
    }
}

/// First-improvement descent over single parent swaps, spending at most
/// `budget` cost evaluations.
///
/// Only moves inside the subtree of the current bottleneck node can lower
/// the maximum, so those are scanned first (from a random offset), then the
/// rest.
pub fn local_search<R: Rng + ?Sized>(
    problem: &TreeProblem,
    start: &ParentVector,
    budget: usize,
    rng: &mut R,
) -> ParentVector {
    let mut cur = start.clone();
    let mut evals = 0;
    'descent: while evals < budget {
        let (_, worst) = problem.evaluate_detail(&cur.parents);
        let Some(worst) = worst else { break };
        let (mut hot, mut cold): (Vec<usize>, Vec<usize>) = problem
            .movable()
            .iter()
            .partition(|&&v| TreeProblem::in_subtree(&cur.parents, v, worst));
        rotate_random(&mut hot, rng);
        rotate_random(&mut cold, rng);
        for v in hot.into_iter().chain(cold) {
            for &p in problem.options(v) {
                if cur.parents[v] == Some(Parent::Node(p))
                    || TreeProblem::in_subtree(&cur.parents, p, v)
                {
                    continue;
                }
                let mut parents = cur.parents.clone();
                parents[v] = Some(Parent::Node(p));
                let cost = problem.evaluate(&parents);
                evals += 1;
                if cost < cur.cost {
                    cur = ParentVector { parents, cost };
                    continue 'descent;
                }
                if evals >= budget {
                    break 'descent;
                }
            }
        }
        // full scan without improvement: local optimum
        break;
    }
    debug_assert!(problem.is_valid(&cur));
    cur
}

fn rotate_random<T, R: Rng + ?Sized>(v: &mut [T], rng: &mut R) {
    if v.len() > 1 {
        let k = rng.gen_range(0..v.len());
        v.rotate_left(k);
    }
}

/// Variable neighborhood search: shake in the k-fold swap neighborhood,
/// descend, move on improvement and restart from k = 1, otherwise widen k.
/// Stops after `max_stall` sweeps over k without improvement.
pub fn vns_optimize<R: Rng + ?Sized>(
    problem: &TreeProblem,
    initial: &ParentVector,
    cfg: &VnsConfig,
    rng: &mut R,
) -> Outcome {
    let mut x = initial.clone();
    let mut trace = Vec::new();
    let mut iteration = 0;
    let mut stall = 0;
    while stall < cfg.max_stall {
        let mut improved = false;
        let mut k = 1;
        while k <= cfg.k_max {
            let shaken = problem.shake(&x, k, rng);
            let local = local_search(problem, &shaken, cfg.local_iters, rng);
            let (level, current) = (k as f64, local.cost);
            if local.cost < x.cost {
                x = local;
                k = 1;
                improved = true;
            } else {
                k += 1;
            }
            trace.push(TracePoint {
                iteration,
                level,
                current,
                best: x.cost,
            });
            iteration += 1;
        }
        stall = if improved { 0 } else { stall + 1 };
    }
    Outcome { best: x, trace }
}
