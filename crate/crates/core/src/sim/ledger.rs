use std::collections::BTreeMap;

use thiserror::Error;

use crate::ids::NodeId;
use crate::node::SensorNode;

pub const DEFAULT_UNIT_COST: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Charge {
    pub tick: usize,
    pub node: NodeId,
    pub hops: usize,
    pub amount: f64,
}

/// Append-only record of transmission charges.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLedger {
    unit_cost: f64,
    entries: Vec<Charge>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ChargeError {
    #[error("a transmission needs at least one hop")]
    ZeroHops,
    #[error("node {0} is dead")]
    DeadSender(NodeId),
    #[error("node {node} needs {needed} energy but has {available}")]
    InsufficientEnergy { node: NodeId, needed: f64, available: f64 },
}

impl EnergyLedger {
    /// Panics unless `unit_cost` is positive and finite; configs validate it
    /// first.
    pub fn new(unit_cost: f64) -> Self {
        assert!(unit_cost.is_finite() && unit_cost > 0.0, "unit cost must be positive");
        Self {
            unit_cost,
            entries: Vec::new(),
        }
    }

    pub fn unit_cost(&self) -> f64 {
        self.unit_cost
    }

    pub fn entries(&self) -> &[Charge] {
        &self.entries
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|c| c.amount).sum()
    }

    pub fn total_at(&self, tick: usize) -> f64 {
        self.entries.iter().filter(|c| c.tick == tick).map(|c| c.amount).sum()
    }

    /// Per-tick totals for ticks `0..ticks`.
    pub fn series(&self, ticks: usize) -> Vec<f64> {
        let mut out = vec![0.0; ticks];
        for c in &self.entries {
            if let Some(slot) = out.get_mut(c.tick) {
                *slot += c.amount;
            }
        }
        out
    }

    pub fn node_totals(&self) -> BTreeMap<NodeId, f64> {
        let mut out = BTreeMap::new();
        for c in &self.entries {
            *out.entry(c.node).or_insert(0.0) += c.amount;
        }
        out
    }

    /// Number of single-hop transmissions recorded at `tick`.
    pub fn hops_at(&self, tick: usize) -> usize {
        self.entries.iter().filter(|c| c.tick == tick).map(|c| c.hops).sum()
    }
}

/// Charges `hops * unit_cost` to `sender` and records it. On error nothing
/// is deducted or recorded.
pub fn charge_transmission(
    ledger: &mut EnergyLedger,
    tick: usize,
    sender: &mut SensorNode,
    hops: usize,
) -> Result<f64, ChargeError> {
    if hops == 0 {
        return Err(ChargeError::ZeroHops);
    }
    if !sender.is_alive() {
        return Err(ChargeError::DeadSender(sender.id));
    }
    let amount = hops as f64 * ledger.unit_cost;
    if sender.residual_energy() < amount {
        return Err(ChargeError::InsufficientEnergy {
            node: sender.id,
            needed: amount,
            available: sender.residual_energy(),
        });
    }
    sender.drain(amount);
    ledger.entries.push(Charge {
        tick,
        node: sender.id,
        hops,
        amount,
    });
    Ok(amount)
}
