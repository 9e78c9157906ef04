//! Static deployment data (positions, roles, neighbor table) together with
//! the mutable per-node energy state.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point, SinkPath};
use crate::topology::Parent;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("network unreachable from sink path: no node within anchor radius {0} m")]
    NoAnchors(f64),
    #[error("`{key}` must be positive, got {value}")]
    NonPositive { key: &'static str, value: f64 },
    #[error("e_min must be below the initial energy ({e_min} >= {initial})")]
    MinAboveInitial { e_min: f64, initial: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Anchor,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnergyStatus {
    Normal,
    Warning,
    Threshold,
    Dead,
}

/// Energy band of a node relative to its minimum stored energy. The band
/// edges at 2x and 3x `e_min` are inclusive on the lower status.
pub fn energy_state(e: f64, e_min: f64) -> EnergyStatus {
    if e < e_min {
        EnergyStatus::Dead
    } else if e <= 2.0 * e_min {
        EnergyStatus::Threshold
    } else if e <= 3.0 * e_min {
        EnergyStatus::Warning
    } else {
        EnergyStatus::Normal
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    pub id: usize,
    pub pos: Point,
    pub energy: f64,
    pub initial_energy: f64,
    pub e_min: f64,
    pub role: Role,
    pub status: EnergyStatus,
}

impl NodeState {
    pub fn is_alive(&self) -> bool {
        self.status != EnergyStatus::Dead
    }

    /// May take on new children.
    pub fn can_parent(&self) -> bool {
        matches!(self.status, EnergyStatus::Normal | EnergyStatus::Warning)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: usize,
    pub dist: f64,
}

/// Per-node list of in-range neighbors, sorted by id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NeighborTable {
    adj: Vec<Vec<Neighbor>>,
}

impl NeighborTable {
    pub fn neighbors(&self, v: usize) -> &[Neighbor] {
        &self.adj[v]
    }

    pub fn distance(&self, a: usize, b: usize) -> Option<f64> {
        self.adj[a]
            .binary_search_by_key(&b, |n| n.id)
            .ok()
            .map(|i| self.adj[a][i].dist)
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }
}

/// Every pair within `comm_radius` (inclusive), in both directions.
pub fn build_neighbor_table(positions: &[Point], comm_radius: f64) -> NeighborTable {
    let mut adj = vec![Vec::new(); positions.len()];
    for a in 0..positions.len() {
        for b in a + 1..positions.len() {
            let dist = positions[a].distance(&positions[b]);
            if dist <= comm_radius {
                adj[a].push(Neighbor { id: b, dist });
                adj[b].push(Neighbor { id: a, dist });
            }
        }
    }
    for list in &mut adj {
        list.sort_by_key(|n| n.id);
    }
    NeighborTable { adj }
}

/// Anchors are the nodes within `anchor_radius` of the sink path, boundary
/// included.
pub fn classify_roles(
    positions: &[Point],
    path: &SinkPath,
    anchor_radius: f64,
) -> Result<Vec<Role>, NetworkError> {
    if !(anchor_radius > 0.0) {
        return Err(NetworkError::NonPositive {
            key: "anchor_radius",
            value: anchor_radius,
        });
    }
    let roles: Vec<Role> = positions
        .iter()
        .map(|p| {
            if path.distance_to(p) <= anchor_radius {
                Role::Anchor
            } else {
                Role::Normal
            }
        })
        .collect();
    if !roles.contains(&Role::Anchor) {
        return Err(NetworkError::NoAnchors(anchor_radius));
    }
    Ok(roles)
}

#[derive(Debug, Clone)]
pub struct Network {
    pub nodes: Vec<NodeState>,
    pub table: NeighborTable,
    pub path: SinkPath,
    pub comm_radius: f64,
    pub anchor_radius: f64,
    /// Distance from each node to the sink path. Anchors transmit over this
    /// distance when the sink passes by.
    pub path_dist: Vec<f64>,
}

impl Network {
    pub fn new(
        positions: &[Point],
        path: SinkPath,
        comm_radius: f64,
        anchor_radius: f64,
        initial_energy: f64,
        e_min: f64,
    ) -> Result<Self, NetworkError> {
        if !(comm_radius > 0.0) {
            return Err(NetworkError::NonPositive {
                key: "comm_radius",
                value: comm_radius,
            });
        }
        if !(initial_energy > 0.0) {
            return Err(NetworkError::NonPositive {
                key: "initial_energy",
                value: initial_energy,
            });
        }
        if !(e_min > 0.0) {
            return Err(NetworkError::NonPositive {
                key: "e_min",
                value: e_min,
            });
        }
        if e_min >= initial_energy {
            return Err(NetworkError::MinAboveInitial {
                e_min,
                initial: initial_energy,
            });
        }
        let roles = classify_roles(positions, &path, anchor_radius)?;
        let table = build_neighbor_table(positions, comm_radius);
        let path_dist = positions.iter().map(|p| path.distance_to(p)).collect();
        let nodes = positions
            .iter()
            .zip(roles)
            .enumerate()
            .map(|(id, (&pos, role))| NodeState {
                id,
                pos,
                energy: initial_energy,
                initial_energy,
                e_min,
                role,
                status: energy_state(initial_energy, e_min),
            })
            .collect();
        Ok(Self {
            nodes,
            table,
            path,
            comm_radius,
            anchor_radius,
            path_dist,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_anchor(&self, v: usize) -> bool {
        self.nodes[v].role == Role::Anchor
    }

    /// Length of the link from `v` to `parent`; for the sink this is the
    /// distance to the path.
    pub fn link_distance(&self, v: usize, parent: Parent) -> f64 {
        match parent {
            Parent::Sink => self.path_dist[v],
            Parent::Node(p) => self.nodes[v].pos.distance(&self.nodes[p].pos),
        }
    }

    /// Ids of live nodes that cannot reach any live anchor through live
    /// neighbors.
    pub fn unreachable(&self) -> Vec<usize> {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut stack: Vec<usize> = (0..n)
            .filter(|&v| self.nodes[v].is_alive() && self.is_anchor(v))
            .collect();
        for &v in &stack {
            seen[v] = true;
        }
        while let Some(v) = stack.pop() {
            for nb in self.table.neighbors(v) {
                if !seen[nb.id] && self.nodes[nb.id].is_alive() {
                    seen[nb.id] = true;
                    stack.push(nb.id);
                }
            }
        }
        (0..n)
            .filter(|&v| self.nodes[v].is_alive() && !seen[v])
            .collect()
    }
}
