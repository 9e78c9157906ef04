//! First-order radio energy model, per-node relative load and the min-max
//! bottleneck objective shared by tree construction, the optimizers and the
//! simulator.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::Network;
use crate::topology::Topology;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("distance must be non-negative, got {0}")]
    NegativeDistance(f64),
    #[error("relative load needs positive remaining energy, got {0}")]
    NonPositiveEnergy(f64),
    #[error("subtree packet count must be at least 1")]
    EmptySubtree,
    #[error("invalid radio parameter `{key}`: {reason}")]
    InvalidParam { key: &'static str, reason: String },
}

/// Radio constants. Energies are per bit, the amplifier coefficient is per
/// bit per metre^alpha.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyParams {
    pub e_elec: f64,
    pub e_da: f64,
    pub e_amp: f64,
    pub alpha: u32,
    pub msg_bits: u32,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            e_elec: 50e-9,
            e_da: 5e-9,
            e_amp: 100e-12,
            alpha: 2,
            msg_bits: 2000,
        }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<(), EnergyError> {
        for (key, v) in [
            ("e_elec", self.e_elec),
            ("e_da", self.e_da),
            ("e_amp", self.e_amp),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(EnergyError::InvalidParam {
                    key,
                    reason: format!("must be a finite value >= 0, got {v}"),
                });
            }
        }
        if self.alpha != 2 && self.alpha != 4 {
            return Err(EnergyError::InvalidParam {
                key: "alpha",
                reason: format!(
                    "must be 2 (free space) or 4 (multipath), got {}",
                    self.alpha
                ),
            });
        }
        if self.msg_bits == 0 {
            return Err(EnergyError::InvalidParam {
                key: "msg_bits",
                reason: "must be > 0".into(),
            });
        }
        Ok(())
    }

    /// Transmit cost over `d` metres without the domain check.
    #[inline]
    pub(crate) fn tx(&self, d: f64) -> f64 {
        let l = self.msg_bits as f64;
        (self.e_elec + self.e_da) * l + self.e_amp * l * d.powi(self.alpha as i32)
    }

    #[inline]
    pub(crate) fn rx(&self) -> f64 {
        self.e_elec * self.msg_bits as f64
    }

    /// Energy a node spends in one round when it relays `q - 1` packets and
    /// transmits `q` over a `d` metre link.
    #[inline]
    pub(crate) fn round_drain(&self, q: u32, d: f64) -> f64 {
        let q = q as f64;
        (self.rx() + self.tx(d)) * q - self.rx()
    }
}

/// Energy to transmit one packet over `d` metres. Aggregation energy is
/// charged on the sending side.
pub fn tx_cost(d: f64, params: &EnergyParams) -> Result<f64, EnergyError> {
    if d < 0.0 || d.is_nan() {
        return Err(EnergyError::NegativeDistance(d));
    }
    Ok(params.tx(d))
}

/// Energy to receive one packet.
pub fn rx_cost(params: &EnergyParams) -> f64 {
    params.rx()
}

/// Per-round drain of a node divided by its remaining energy. `subtree` is
/// the number of packets the node transmits per round, its own included.
pub fn relative_load(
    energy: f64,
    subtree: u32,
    d_parent: f64,
    params: &EnergyParams,
) -> Result<f64, EnergyError> {
    if energy <= 0.0 || energy.is_nan() {
        return Err(EnergyError::NonPositiveEnergy(energy));
    }
    if subtree == 0 {
        return Err(EnergyError::EmptySubtree);
    }
    if d_parent < 0.0 || d_parent.is_nan() {
        return Err(EnergyError::NegativeDistance(d_parent));
    }
    Ok(params.round_drain(subtree, d_parent) / energy)
}

/// Largest relative load over the members of `topo`. A sink-only tree
/// costs 0.
pub fn bottleneck_cost(
    topo: &Topology,
    net: &Network,
    params: &EnergyParams,
) -> Result<f64, EnergyError> {
    let mut worst = 0.0_f64;
    for v in topo.members() {
        let d = net.link_distance(v, topo.parent(v).expect("member has a parent"));
        let load = relative_load(net.nodes[v].energy, topo.q(v), d, params)?;
        worst = worst.max(load);
    }
    Ok(worst)
}
