//! Search over rooted spanning trees for the min-max relative load.
//!
//! Solutions are parent vectors over the current tree members. Anchors stay
//! on the sink; every other member may move to any open neighbor (member,
//! not at threshold, not labeled) that is not in its own subtree.

mod oracle;
mod sa;
mod vns;

pub use oracle::{brute_force_optimum, OracleError, ORACLE_MAX_NODES};
pub use sa::{accept_worse, sa_optimize, SaConfig};
pub use vns::{local_search, vns_optimize, VnsConfig};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::EnergyParams;
use crate::network::Network;
use crate::topology::{Parent, Topology};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid optimizer setting `{key}`: {reason}")]
pub struct ConfigError {
    pub key: &'static str,
    pub reason: String,
}

/// Parent assignment plus its cached bottleneck cost.
#[derive(Debug, Clone, PartialEq)]
pub struct ParentVector {
    pub parents: Vec<Option<Parent>>,
    pub cost: f64,
}

impl ParentVector {
    pub fn to_topology(&self, like: &Topology) -> Topology {
        let mut t = Topology::from_parents(&self.parents);
        for v in 0..like.len() {
            if like.is_labeled(v) {
                t.set_labeled(v);
            }
        }
        t
    }

    /// Number of entries that differ from `other`.
    pub fn diff_count(&self, other: &ParentVector) -> usize {
        self.parents
            .iter()
            .zip(&other.parents)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// One row of an optimizer convergence trace. `level` is the temperature
/// for annealing and the neighborhood index for VNS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub level: f64,
    pub current: f64,
    pub best: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub best: ParentVector,
    pub trace: Vec<TracePoint>,
}

/// The search space induced by a tree: its members, which of them may
/// move, and where each may go.
pub struct TreeProblem<'a> {
    net: &'a Network,
    params: &'a EnergyParams,
    members: Vec<usize>,
    movable: Vec<usize>,
    is_member: Vec<bool>,
    options: Vec<Vec<usize>>,
    /// Link length for each entry of `options`.
    option_dist: Vec<Vec<f64>>,
}

impl<'a> TreeProblem<'a> {
    pub fn new(net: &'a Network, params: &'a EnergyParams, topo: &Topology) -> Self {
        let n = net.len();
        let members: Vec<usize> = topo.members().collect();
        let open = |p: usize| topo.is_member(p) && net.nodes[p].can_parent() && !topo.is_labeled(p);
        let mut options = vec![Vec::new(); n];
        let mut option_dist = vec![Vec::new(); n];
        let mut movable = Vec::new();
        let mut is_member = vec![false; n];
        for &v in &members {
            is_member[v] = true;
            if net.is_anchor(v) {
                continue;
            }
            movable.push(v);
            for nb in net.table.neighbors(v) {
                if open(nb.id) {
                    options[v].push(nb.id);
                    option_dist[v].push(nb.dist);
                }
            }
        }
        Self {
            net,
            params,
            members,
            movable,
            is_member,
            options,
            option_dist,
        }
    }

    pub fn network(&self) -> &Network {
        self.net
    }

    pub fn params(&self) -> &EnergyParams {
        self.params
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn movable(&self) -> &[usize] {
        &self.movable
    }

    /// Open parents of `v`.
    pub fn options(&self, v: usize) -> &[usize] {
        &self.options[v]
    }

    pub fn solution(&self, topo: &Topology) -> ParentVector {
        let parents = topo.parents().to_vec();
        let cost = self.evaluate(&parents);
        ParentVector { parents, cost }
    }

    fn link(&self, v: usize, parent: Parent) -> f64 {
        match parent {
            Parent::Sink => self.net.path_dist[v],
            Parent::Node(p) => match self.options[v].iter().position(|&o| o == p) {
                Some(i) => self.option_dist[v][i],
                None => self.net.link_distance(v, parent),
            },
        }
    }

    /// Bottleneck cost of `parents` and the member attaining it.
    pub fn evaluate_detail(&self, parents: &[Option<Parent>]) -> (f64, Option<usize>) {
        let mut q = vec![0u32; parents.len()];
        for &v in &self.members {
            q[v] += 1;
            let mut cur = parents[v];
            while let Some(Parent::Node(p)) = cur {
                q[p] += 1;
                cur = parents[p];
            }
        }
        let mut worst = (0.0, None);
        for &v in &self.members {
            let parent = parents[v].expect("member has a parent");
            let load =
                self.params.round_drain(q[v], self.link(v, parent)) / self.net.nodes[v].energy;
            if load > worst.0 {
                worst = (load, Some(v));
            }
        }
        worst
    }

    pub fn evaluate(&self, parents: &[Option<Parent>]) -> f64 {
        self.evaluate_detail(parents).0
    }

    /// True if `x` is `v` or lies below it.
    pub fn in_subtree(parents: &[Option<Parent>], x: usize, v: usize) -> bool {
        let mut cur = Some(Parent::Node(x));
        while let Some(Parent::Node(p)) = cur {
            if p == v {
                return true;
            }
            cur = parents[p];
        }
        false
    }

    /// Checks that `s` is a tree over the members that respects the move
    /// rules and that its cached cost is current.
    pub fn is_valid(&self, s: &ParentVector) -> bool {
        let n = s.parents.len();
        for &v in &self.members {
            let ok = match s.parents[v] {
                None => false,
                Some(Parent::Sink) => self.net.is_anchor(v),
                Some(Parent::Node(p)) => {
                    !self.net.is_anchor(v) && self.net.table.distance(v, p).is_some()
                }
            };
            if !ok {
                return false;
            }
            let mut cur = s.parents[v];
            let mut steps = 0;
            while let Some(Parent::Node(p)) = cur {
                steps += 1;
                if steps > n || !self.is_member[p] {
                    return false;
                }
                cur = s.parents[p];
            }
        }
        s.cost == self.evaluate(&s.parents)
    }

    /// Feasible new parents for `v` under `s`.
    fn alternatives(&self, s: &ParentVector, v: usize) -> Vec<usize> {
        let current = s.parents[v];
        self.options[v]
            .iter()
            .copied()
            .filter(|&p| Some(Parent::Node(p)) != current && !Self::in_subtree(&s.parents, p, v))
            .collect()
    }

    /// Re-parents one random movable member to a random feasible parent. If
    /// the drawn node has no alternative, draws again, up to the member
    /// count; after that `s` is returned unchanged.
    pub fn neighbor_move<R: Rng + ?Sized>(&self, s: &ParentVector, rng: &mut R) -> ParentVector {
        if self.movable.is_empty() {
            return s.clone();
        }
        for _ in 0..self.members.len() {
            let v = self.movable[rng.gen_range(0..self.movable.len())];
            let alts = self.alternatives(s, v);
            if alts.is_empty() {
                continue;
            }
            let p = alts[rng.gen_range(0..alts.len())];
            let mut parents = s.parents.clone();
            parents[v] = Some(Parent::Node(p));
            let cost = self.evaluate(&parents);
            let next = ParentVector { parents, cost };
            debug_assert!(self.is_valid(&next));
            return next;
        }
        s.clone()
    }

    /// A random point in the k-fold parent-swap neighborhood of `s`.
    pub fn shake<R: Rng + ?Sized>(&self, s: &ParentVector, k: usize, rng: &mut R) -> ParentVector {
        let mut out = s.clone();
        for _ in 0..k {
            out = self.neighbor_move(&out, rng);
        }
        out
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use crate::energy::EnergyParams;
    use crate::geometry::{Point, SinkPath};
    use crate::network::Network;

    /// Anchor A, normals B and D. B hears A and D, D hears A and B.
    pub fn four_node() -> Network {
        let path = SinkPath::new(vec![Point::new(0.0, 500.0), Point::new(1000.0, 500.0)]).unwrap();
        let pts = [
            Point::new(500.0, 480.0),
            Point::new(500.0, 400.0),
            Point::new(600.0, 420.0),
        ];
        Network::new(&pts, path, 150.0, 50.0, 0.2, 0.01).unwrap()
    }

    /// Two anchors and four normals with several alternative routes and
    /// uneven energies.
    pub fn six_node() -> Network {
        let path = SinkPath::new(vec![Point::new(0.0, 500.0), Point::new(1000.0, 500.0)]).unwrap();
        let pts = [
            Point::new(400.0, 470.0),
            Point::new(560.0, 490.0),
            Point::new(420.0, 380.0),
            Point::new(530.0, 370.0),
            Point::new(470.0, 270.0),
            Point::new(600.0, 300.0),
        ];
        let mut net = Network::new(&pts, path, 150.0, 50.0, 0.2, 0.01).unwrap();
        for (v, e) in [
            (0, 0.12),
            (1, 0.2),
            (2, 0.09),
            (3, 0.18),
            (4, 0.2),
            (5, 0.15),
        ] {
            net.nodes[v].energy = e;
        }
        net
    }

    pub fn params() -> EnergyParams {
        EnergyParams::default()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use crate::control::{build_spanning_tree, EventLog};
    use crate::energy::bottleneck_cost;
    use crate::geometry::{Point, SinkPath};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cost_matches_bottleneck_of_decoded_tree() {
        let net = six_node();
        let p = params();
        let topo = build_spanning_tree(&net, &p, &mut EventLog::default()).unwrap();
        let prob = TreeProblem::new(&net, &p, &topo);
        let s = prob.solution(&topo);
        assert_eq!(s.cost, bottleneck_cost(&topo, &net, &p).unwrap());
        assert!(prob.is_valid(&s));
    }

    #[test]
    fn rigid_network_never_moves() {
        let path = SinkPath::new(vec![Point::new(0.0, 500.0), Point::new(1000.0, 500.0)]).unwrap();
        let pts = [
            Point::new(500.0, 480.0),
            Point::new(500.0, 380.0),
            Point::new(500.0, 280.0),
        ];
        let net = Network::new(&pts, path, 150.0, 50.0, 0.2, 0.01).unwrap();
        let p = params();
        let topo = build_spanning_tree(&net, &p, &mut EventLog::default()).unwrap();
        let prob = TreeProblem::new(&net, &p, &topo);
        let s = prob.solution(&topo);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(prob.neighbor_move(&s, &mut rng), s);
        assert_eq!(prob.shake(&s, 3, &mut rng), s);
    }

    #[test]
    fn four_node_move_changes_only_one_entry() {
        let net = four_node();
        let p = params();
        let topo = build_spanning_tree(&net, &p, &mut EventLog::default()).unwrap();
        let prob = TreeProblem::new(&net, &p, &topo);
        let s = prob.solution(&topo);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let m = prob.neighbor_move(&s, &mut rng);
            assert_eq!(m.diff_count(&s), 1);
            assert_eq!(m.cost, prob.evaluate(&m.parents));
            let t = m.to_topology(&topo);
            t.validate(&net).unwrap();
            assert_eq!(m.cost, bottleneck_cost(&t, &net, &p).unwrap());
        }
    }

    #[test]
    fn shake_changes_at_most_k_entries() {
        let net = six_node();
        let p = params();
        let topo = build_spanning_tree(&net, &p, &mut EventLog::default()).unwrap();
        let prob = TreeProblem::new(&net, &p, &topo);
        let s = prob.solution(&topo);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            assert!(prob.shake(&s, 2, &mut rng).diff_count(&s) <= 2);
        }
    }

    #[test]
    fn moves_never_pick_a_descendant() {
        let net = six_node();
        let p = params();
        let topo = build_spanning_tree(&net, &p, &mut EventLog::default()).unwrap();
        let prob = TreeProblem::new(&net, &p, &topo);
        let mut s = prob.solution(&topo);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10_000 {
            s = prob.neighbor_move(&s, &mut rng);
            assert!(prob.is_valid(&s));
        }
    }
}
