//! Exhaustive reference optimum for small trees. Costs are recomputed here
//! from scratch so the search code is checked against an independent path.

use thiserror::Error;

use super::{ParentVector, TreeProblem};
use crate::energy::relative_load;
use crate::topology::Parent;

pub const ORACLE_MAX_NODES: usize = 9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error(
        "instance has {0} non-sink nodes, exhaustive search supports at most {ORACLE_MAX_NODES}"
    )]
    TooLarge(usize),
    #[error("no spanning tree exists over the given nodes")]
    Infeasible,
}

fn tree_cost(problem: &TreeProblem, parents: &[Option<Parent>]) -> f64 {
    let net = problem.network();
    let members = problem.members();
    let mut worst = 0.0_f64;
    for &v in members {
        // count members whose route passes through v
        let q = members
            .iter()
            .filter(|&&u| {
                let mut cur = Some(Parent::Node(u));
                while let Some(Parent::Node(x)) = cur {
                    if x == v {
                        return true;
                    }
                    cur = parents[x];
                }
                false
            })
            .count() as u32;
        let parent = parents[v].expect("complete assignment");
        let d = net.link_distance(v, parent);
        let load = relative_load(net.nodes[v].energy, q, d, problem.params())
            .expect("members have positive energy");
        worst = worst.max(load);
    }
    worst
}

/// Enumerates every acyclic parent assignment of the movable members and
/// returns the smallest bottleneck cost with the first assignment reaching
/// it.
pub fn brute_force_optimum(problem: &TreeProblem) -> Result<(f64, ParentVector), OracleError> {
    let members = problem.members();
    if members.len() > ORACLE_MAX_NODES {
        return Err(OracleError::TooLarge(members.len()));
    }
    let n = problem.network().len();
    let mut parents: Vec<Option<Parent>> = vec![None; n];
    for &v in members {
        if problem.network().is_anchor(v) {
            parents[v] = Some(Parent::Sink);
        }
    }
    let movable = problem.movable().to_vec();
    let mut best: Option<(f64, Vec<Option<Parent>>)> = None;
    enumerate(problem, &movable, 0, &mut parents, &mut best);
    let (cost, parents) = best.ok_or(OracleError::Infeasible)?;
    Ok((cost, ParentVector { parents, cost }))
}

fn enumerate(
    problem: &TreeProblem,
    movable: &[usize],
    i: usize,
    parents: &mut Vec<Option<Parent>>,
    best: &mut Option<(f64, Vec<Option<Parent>>)>,
) {
    if i == movable.len() {
        let cost = tree_cost(problem, parents);
        if best.as_ref().map_or(true, |(b, _)| cost < *b) {
            *best = Some((cost, parents.clone()));
        }
        return;
    }
    let v = movable[i];
    for &p in problem.options(v) {
        // closing a cycle is detected by the last edge assigned on it
        let mut cur = Some(Parent::Node(p));
        let mut cycle = false;
        while let Some(Parent::Node(x)) = cur {
            if x == v {
                cycle = true;
                break;
            }
            cur = parents[x];
        }
        if cycle {
            continue;
        }
        parents[v] = Some(Parent::Node(p));
        enumerate(problem, movable, i + 1, parents, best);
        parents[v] = None;
    }
}
