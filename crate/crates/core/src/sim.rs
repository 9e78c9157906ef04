//! Round-driven lifetime simulation.
//!
//! Each round the sink sweeps its path once. Every live node produces one
//! packet; packets climb the tree and anchors hand them to the sink as it
//! passes. Nodes pay for what they relay and send, then the energy-band
//! state machine repairs the tree.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{
    build_spanning_tree, local_search_reparent, remove_dead, warning_reparent, ControlError, Event,
    EventKind, EventLog,
};
use crate::energy::{bottleneck_cost, EnergyError, EnergyParams};
use crate::geometry::{Area, GeometryError, Point, SinkPath};
use crate::network::{energy_state, EnergyStatus, Network, NetworkError, NodeState};
use crate::opt::{sa_optimize, vns_optimize, SaConfig, TracePoint, TreeProblem, VnsConfig};
use crate::topology::Topology;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error("initial network is disconnected; isolated nodes: {0:?}")]
    Disconnected(Vec<usize>),
    #[error("no connected deployment of {nodes} nodes found after {attempts} draws")]
    Deployment { nodes: usize, attempts: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    None,
    Sa,
    Vns,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Reoptimize {
    /// Optimize once after the initial construction.
    Setup,
    /// Also optimize after every round with a threshold or death event.
    OnThreshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub optimizer: OptimizerKind,
    pub thresholds: bool,
    pub reoptimize: Reoptimize,
}

impl Policy {
    /// Greedy tree, no energy bands beyond death, no optimizer.
    pub const BASELINE: Policy = Policy {
        optimizer: OptimizerKind::None,
        thresholds: false,
        reoptimize: Reoptimize::Setup,
    };

    pub const PROPOSED: Policy = Policy {
        optimizer: OptimizerKind::Vns,
        thresholds: true,
        reoptimize: Reoptimize::OnThreshold,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub positions: Vec<Point>,
    pub sink_path: SinkPath,
    pub radio: EnergyParams,
    pub initial_energy: f64,
    pub e_min: f64,
    pub comm_radius: f64,
    pub anchor_radius: f64,
    pub rounds: u32,
    pub t_hop_ms: f64,
    pub policy: Policy,
    pub sa: SaConfig,
    pub vns: VnsConfig,
    pub seed: u64,
}

impl SimulationConfig {
    /// Defaults for everything but the node positions.
    pub fn new(positions: Vec<Point>, sink_path: SinkPath) -> Self {
        Self {
            positions,
            sink_path,
            radio: EnergyParams::default(),
            initial_energy: 0.2,
            e_min: 0.01,
            comm_radius: 150.0,
            anchor_radius: 100.0,
            rounds: 1200,
            t_hop_ms: 0.1,
            policy: Policy::PROPOSED,
            sa: SaConfig::default(),
            vns: VnsConfig::default(),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: u32,
    pub generated: u32,
    pub delivered: u32,
    pub delay_sum_ms: f64,
    pub energy_used: f64,
    pub deaths_this_round: u32,
    pub alive: u32,
    /// Bottleneck load of the tree the round was routed over.
    pub bottleneck_load: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub metrics: Vec<RoundMetrics>,
    pub final_nodes: Vec<NodeState>,
    pub events: Vec<Event>,
    pub setup_trace: Vec<TracePoint>,
    /// Initial minus remaining minus consumed energy at the end of the run.
    pub conservation_error: f64,
}

pub struct Simulation {
    cfg: SimulationConfig,
    net: Network,
    topo: Topology,
    log: EventLog,
    round: u32,
    rng: ChaCha8Rng,
    history: Vec<RoundMetrics>,
    initial_total: f64,
    consumed: f64,
    setup_trace: Vec<TracePoint>,
}

impl Simulation {
    /// Builds the network and the initial (optionally optimized) tree.
    pub fn new(cfg: SimulationConfig) -> Result<Self, SimError> {
        cfg.radio.validate()?;
        let net = Network::new(
            &cfg.positions,
            cfg.sink_path.clone(),
            cfg.comm_radius,
            cfg.anchor_radius,
            cfg.initial_energy,
            cfg.e_min,
        )?;
        let unreachable = net.unreachable();
        if !unreachable.is_empty() {
            return Err(SimError::Disconnected(unreachable));
        }
        let mut log = EventLog::default();
        let topo = build_spanning_tree(&net, &cfg.radio, &mut log)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(match cfg.policy.optimizer {
            OptimizerKind::Sa => cfg.sa.seed,
            _ => cfg.vns.seed,
        });
        let initial_total = net.nodes.iter().map(|n| n.energy).sum();
        let mut sim = Self {
            cfg,
            net,
            topo,
            log,
            round: 0,
            rng,
            history: Vec::new(),
            initial_total,
            consumed: 0.0,
            setup_trace: Vec::new(),
        };
        sim.setup_trace = sim.optimize();
        Ok(sim)
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn events(&self) -> &[Event] {
        &self.log.events
    }

    pub fn history(&self) -> &[RoundMetrics] {
        &self.history
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn params(&self) -> &EnergyParams {
        &self.cfg.radio
    }

    /// Initial energy minus remaining energy minus consumed energy.
    pub fn conservation_error(&self) -> f64 {
        let remaining: f64 = self.net.nodes.iter().map(|n| n.energy).sum();
        self.initial_total - remaining - self.consumed
    }

    pub fn consumed(&self) -> f64 {
        self.consumed
    }

    /// Per-round drain each member would incur right now, `None` for
    /// non-members.
    pub fn planned_drain(&self) -> Vec<Option<f64>> {
        (0..self.net.len())
            .map(|v| {
                self.topo
                    .parent(v)
                    .filter(|_| self.topo.is_member(v))
                    .map(|p| {
                        self.cfg
                            .radio
                            .round_drain(self.topo.q(v), self.net.link_distance(v, p))
                    })
            })
            .collect()
    }

    fn optimize(&mut self) -> Vec<TracePoint> {
        if self.cfg.policy.optimizer == OptimizerKind::None || self.topo.member_count() == 0 {
            return Vec::new();
        }
        let problem = TreeProblem::new(&self.net, &self.cfg.radio, &self.topo);
        let initial = problem.solution(&self.topo);
        let outcome = match self.cfg.policy.optimizer {
            OptimizerKind::Sa => sa_optimize(&problem, &initial, &self.cfg.sa, &mut self.rng),
            OptimizerKind::Vns => vns_optimize(&problem, &initial, &self.cfg.vns, &mut self.rng),
            OptimizerKind::None => unreachable!(),
        };
        if outcome.best.cost < initial.cost {
            let old = self.topo.clone();
            self.topo = outcome.best.to_topology(&old);
            for v in old.members() {
                if old.parent(v) != self.topo.parent(v) {
                    self.log
                        .push(EventKind::Reparent, v, old.parent(v), self.topo.parent(v));
                }
            }
            debug_assert_eq!(self.topo.validate(&self.net), Ok(()));
        }
        outcome.trace
    }

    fn status_of(&self, e: f64) -> EnergyStatus {
        if self.cfg.policy.thresholds {
            energy_state(e, self.cfg.e_min)
        } else if e < self.cfg.e_min {
            EnergyStatus::Dead
        } else {
            EnergyStatus::Normal
        }
    }

    /// Routes one round of traffic, charges energy and runs the repair
    /// pipeline.
    pub fn run_round(&mut self) -> RoundMetrics {
        self.round += 1;
        self.log.round = self.round;
        let n = self.net.len();
        let params = self.cfg.radio;
        let bottleneck = bottleneck_cost(&self.topo, &self.net, &params).unwrap_or(f64::NAN);

        let drain = self.planned_drain();
        // a node that cannot afford the round spends what it has and drops
        // everything routed through it
        let failed: Vec<bool> = (0..n)
            .map(|v| drain[v].is_some_and(|d| self.net.nodes[v].energy < d))
            .collect();

        let mut generated = 0;
        let mut delivered = 0;
        let mut delay_sum_ms = 0.0;
        for u in 0..n {
            if !self.net.nodes[u].is_alive() {
                continue;
            }
            generated += 1;
            if !self.topo.is_member(u) {
                continue;
            }
            let clear = !failed[u] && self.topo.ancestors(u).all(|a| !failed[a]);
            if clear {
                delivered += 1;
                delay_sum_ms += self.topo.depth(u) as f64 * self.cfg.t_hop_ms;
            }
        }

        let mut energy_used = 0.0;
        for v in 0..n {
            if let Some(d) = drain[v] {
                let node = &mut self.net.nodes[v];
                let spent = if failed[v] { node.energy } else { d };
                node.energy -= spent;
                energy_used += spent;
            }
        }
        self.consumed += energy_used;

        let mut died = Vec::new();
        let mut hit_threshold = Vec::new();
        let mut hit_warning = Vec::new();
        for v in 0..n {
            let old = self.net.nodes[v].status;
            if old == EnergyStatus::Dead {
                continue;
            }
            let new = self.status_of(self.net.nodes[v].energy);
            if new == old {
                continue;
            }
            self.net.nodes[v].status = new;
            match new {
                EnergyStatus::Dead => died.push(v),
                EnergyStatus::Threshold => hit_threshold.push(v),
                EnergyStatus::Warning => hit_warning.push(v),
                EnergyStatus::Normal => {}
            }
        }

        for &v in &died {
            self.log
                .push(EventKind::Death, v, self.topo.parent(v), None);
        }
        if !died.is_empty() {
            remove_dead(&mut self.topo, &died, &self.net, &params, &mut self.log);
        }
        for &v in &hit_threshold {
            self.log.push(
                EventKind::Threshold,
                v,
                self.topo.parent(v),
                self.topo.parent(v),
            );
            if self.topo.is_member(v) {
                local_search_reparent(&mut self.topo, v, &self.net, &params, &mut self.log);
            }
        }
        for &v in &hit_warning {
            self.log.push(
                EventKind::Warning,
                v,
                self.topo.parent(v),
                self.topo.parent(v),
            );
            warning_reparent(&mut self.topo, v, &self.net, &params, &mut self.log);
        }
        if self.cfg.policy.reoptimize == Reoptimize::OnThreshold
            && !(died.is_empty() && hit_threshold.is_empty())
        {
            self.optimize();
        }
        debug_assert_eq!(self.topo.validate(&self.net), Ok(()));

        let alive = self.net.nodes.iter().filter(|x| x.is_alive()).count() as u32;
        let metrics = RoundMetrics {
            round: self.round,
            generated,
            delivered,
            delay_sum_ms,
            energy_used,
            deaths_this_round: died.len() as u32,
            alive,
            bottleneck_load: bottleneck,
        };
        self.history.push(metrics);
        metrics
    }

    pub fn finish(self) -> SimulationOutput {
        let conservation_error = self.conservation_error();
        SimulationOutput {
            conservation_error,
            metrics: self.history,
            final_nodes: self.net.nodes,
            events: self.log.events,
            setup_trace: self.setup_trace,
        }
    }
}

/// Runs the configured number of rounds from a fresh network.
pub fn run_simulation(cfg: SimulationConfig) -> Result<SimulationOutput, SimError> {
    let rounds = cfg.rounds;
    let mut sim = Simulation::new(cfg)?;
    for _ in 0..rounds {
        sim.run_round();
    }
    Ok(sim.finish())
}

pub const MAX_DEPLOY_ATTEMPTS: usize = 10_000;

/// Uniform random positions in `area`, redrawn until every node has a
/// multi-hop route to some anchor.
pub fn deploy(
    nodes: usize,
    area: &Area,
    path: &SinkPath,
    comm_radius: f64,
    anchor_radius: f64,
    seed: u64,
) -> Result<Vec<Point>, SimError> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_DEPLOY_ATTEMPTS {
        let pts: Vec<Point> = (0..nodes)
            .map(|_| {
                Point::new(
                    rng.gen_range(0.0..=area.width),
                    rng.gen_range(0.0..=area.height),
                )
            })
            .collect();
        match Network::new(&pts, path.clone(), comm_radius, anchor_radius, 1.0, 0.5) {
            Ok(net) if net.unreachable().is_empty() => return Ok(pts),
            Ok(_) | Err(NetworkError::NoAnchors(_)) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(SimError::Deployment {
        nodes,
        attempts: MAX_DEPLOY_ATTEMPTS,
    })
}

/// Where the sink is after covering fraction `t` of its path.
pub fn sink_position(t: f64, path: &SinkPath) -> Result<Point, GeometryError> {
    path.position(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{relative_load, rx_cost, tx_cost};

    fn midline() -> SinkPath {
        SinkPath::new(vec![Point::new(0.0, 500.0), Point::new(1000.0, 500.0)]).unwrap()
    }

    fn cfg(pts: &[(f64, f64)]) -> SimulationConfig {
        let pts = pts.iter().map(|&(x, y)| Point::new(x, y)).collect();
        SimulationConfig {
            rounds: 10,
            ..SimulationConfig::new(pts, midline())
        }
    }

    #[test]
    fn single_anchor_round() {
        let mut sim = Simulation::new(cfg(&[(500.0, 470.0)])).unwrap();
        let m = sim.run_round();
        let p = EnergyParams::default();
        assert!((m.energy_used - tx_cost(30.0, &p).unwrap()).abs() < 1e-15);
        assert_eq!((m.generated, m.delivered), (1, 1));
        assert!((m.delay_sum_ms - 0.1).abs() < 1e-15);
    }

    #[test]
    fn chain_round_drain() {
        let mut sim = Simulation::new(cfg(&[(500.0, 470.0), (500.0, 370.0)])).unwrap();
        let m = sim.run_round();
        let p = EnergyParams::default();
        let a = rx_cost(&p) + 2.0 * tx_cost(30.0, &p).unwrap();
        let b = tx_cost(100.0, &p).unwrap();
        assert!((sim.network().nodes[0].energy - (0.2 - a)).abs() < 1e-15);
        assert!((sim.network().nodes[1].energy - (0.2 - b)).abs() < 1e-15);
        assert!((m.energy_used - (a + b)).abs() < 1e-15);
        assert!(sim.conservation_error().abs() < 1e-15);
        assert_eq!(m.delivered, 2);
        assert!((m.delay_sum_ms - 0.3).abs() < 1e-12);
    }

    #[test]
    fn drain_matches_relative_load() {
        let pts: Vec<(f64, f64)> = (0..12)
            .map(|i| (300.0 + 40.0 * i as f64, 470.0 - 35.0 * (i % 4) as f64))
            .collect();
        let mut sim = Simulation::new(cfg(&pts)).unwrap();
        for _ in 0..5 {
            let before: Vec<f64> = sim.network().nodes.iter().map(|n| n.energy).collect();
            let expect: Vec<Option<f64>> = (0..pts.len())
                .map(|v| {
                    let t = sim.topology();
                    t.is_member(v).then(|| {
                        let d = sim.network().link_distance(v, t.parent(v).unwrap());
                        relative_load(before[v], t.q(v), d, sim.params()).unwrap() * before[v]
                    })
                })
                .collect();
            sim.run_round();
            for v in 0..pts.len() {
                if let Some(e) = expect[v] {
                    let got = before[v] - sim.network().nodes[v].energy;
                    assert!((got - e).abs() <= 1e-12 * e, "node {v}: {got} vs {e}");
                }
            }
        }
    }

    #[test]
    fn dead_network_yields_zero_round() {
        let mut c = cfg(&[(500.0, 470.0)]);
        c.initial_energy = 0.0101;
        let mut sim = Simulation::new(c).unwrap();
        let first = sim.run_round();
        assert_eq!(first.deaths_this_round, 1);
        let m = sim.run_round();
        assert_eq!((m.generated, m.delivered, m.alive), (0, 0, 0));
        assert_eq!(m.energy_used, 0.0);
    }

    #[test]
    fn zero_rounds_returns_initial_state() {
        let c = SimulationConfig {
            rounds: 0,
            ..cfg(&[(500.0, 470.0)])
        };
        let out = run_simulation(c).unwrap();
        assert!(out.metrics.is_empty());
        assert_eq!(out.final_nodes[0].energy, 0.2);
    }

    #[test]
    fn sink_moves_by_arc_length() {
        let path = midline();
        assert_eq!(sink_position(0.0, &path).unwrap(), Point::new(0.0, 500.0));
        assert_eq!(
            sink_position(1.0, &path).unwrap(),
            Point::new(1000.0, 500.0)
        );
        assert_eq!(
            sink_position(0.25, &path).unwrap(),
            Point::new(250.0, 500.0)
        );
        assert!(sink_position(1.01, &path).is_err());
    }

    #[test]
    fn disconnected_network_is_rejected() {
        let c = cfg(&[(500.0, 470.0), (900.0, 50.0)]);
        match Simulation::new(c) {
            Err(SimError::Disconnected(v)) => assert_eq!(v, vec![1]),
            other => panic!("unexpected {:?}", other.err()),
        }
    }

    #[test]
    fn deployment_is_connected_and_repeatable() {
        let area = Area::default();
        let path = SinkPath::midline(&area);
        let a = deploy(60, &area, &path, 150.0, 100.0, 4).unwrap();
        let b = deploy(60, &area, &path, 150.0, 100.0, 4).unwrap();
        assert_eq!(a, b);
        let net = Network::new(&a, path, 150.0, 100.0, 0.2, 0.01).unwrap();
        assert!(net.unreachable().is_empty());
    }
}
