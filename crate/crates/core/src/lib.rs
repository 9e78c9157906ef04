//! Lifetime simulation for wireless sensor networks that route over a
//! load-balanced spanning tree rooted at a mobile sink.
//!
//! The tree minimizes the largest relative load (per-round drain divided
//! by remaining energy) over all sensors. It is built greedily, repaired
//! when nodes cross their threshold, warning or death energy bands, and
//! can be refined with simulated annealing or variable neighborhood search.

pub mod control;
pub mod energy;
pub mod experiment;
pub mod geometry;
pub mod network;
pub mod opt;
pub mod sim;
pub mod topology;

pub use control::{build_spanning_tree, Event, EventKind, EventLog};
pub use energy::{bottleneck_cost, relative_load, rx_cost, tx_cost, EnergyParams};
pub use geometry::{Area, Point, SinkPath};
pub use network::{energy_state, EnergyStatus, Network, NodeState, Role};
pub use topology::{Parent, Topology};
pub use experiment::{load_config, run_experiment, ExperimentConfig, ExperimentSummary};
pub use sim::{run_simulation, sink_position, RoundMetrics, Simulation, SimulationConfig};
